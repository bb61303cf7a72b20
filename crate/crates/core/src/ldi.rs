//! The two-layer layered depth image and its supporting planes.

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, RigidPose};
use crate::grid::{Grid, Mask, Rgb};

/// Per-pixel instance labels. Id 0 means "no instance / scene structure".
pub type InstanceMap = Grid<u32>;

/// One RGB-D layer. Depth is stored as 0 wherever `valid` is false.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbdLayer {
    pub color: Grid<Rgb>,
    pub depth: Grid<f64>,
    pub valid: Mask,
}

impl RgbdLayer {
    pub fn new(color: Grid<Rgb>, depth: Grid<f64>, valid: Mask) -> Result<Self> {
        let layer = RgbdLayer { color, depth, valid };
        layer.validate()?;
        Ok(layer)
    }

    /// A layer that is valid exactly where depth is positive.
    pub fn from_depth(color: Grid<Rgb>, depth: Grid<f64>) -> Result<Self> {
        let valid = depth.map(|&d| d > 0.0 && d.is_finite());
        let depth = depth.zip_map(&valid, |&d, &v| if v { d } else { 0.0 });
        RgbdLayer::new(color, depth, valid)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        RgbdLayer {
            color: Grid::filled(width, height, [0; 3]),
            depth: Grid::filled(width, height, 0.0),
            valid: Grid::filled(width, height, false),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.color.same_dims(&self.depth) || !self.color.same_dims(&self.valid) {
            return Err(Error::InvalidInput("layer planes have mismatched dimensions".into()));
        }
        for (i, (&d, &v)) in self.depth.iter().zip(self.valid.iter()).enumerate() {
            let ok = if v { d > 0.0 && d.is_finite() } else { d == 0.0 };
            if !ok {
                let (x, y) = self.depth.coords(i);
                return Err(Error::InvalidInput(format!(
                    "layer depth {d} at ({x}, {y}) inconsistent with validity {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn set(&mut self, i: usize, color: Rgb, depth: f64) {
        self.color[i] = color;
        self.depth[i] = depth;
        self.valid[i] = true;
    }

    pub fn clear(&mut self, i: usize) {
        self.color[i] = [0; 3];
        self.depth[i] = 0.0;
        self.valid[i] = false;
    }
}

/// Two-layer LDI: the visible surface plus the first occluded surface behind
/// foreground objects.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredDepthImage {
    pub foreground: RgbdLayer,
    /// Where `fg_mask` is true this holds the surface behind the occluder, or
    /// is invalid. Elsewhere it duplicates the foreground, except that an
    /// inpainted LDI also replaces the dilation ring around the mask.
    pub background: RgbdLayer,
    pub fg_mask: Mask,
    pub camera: CameraIntrinsics,
    /// Camera-to-world pose of the reference view.
    pub ref_pose: RigidPose,
}

impl LayeredDepthImage {
    pub fn new(
        foreground: RgbdLayer,
        background: RgbdLayer,
        fg_mask: Mask,
        camera: CameraIntrinsics,
        ref_pose: RigidPose,
    ) -> Result<Self> {
        let ldi = LayeredDepthImage {
            foreground,
            background,
            fg_mask,
            camera,
            ref_pose,
        };
        ldi.validate()?;
        Ok(ldi)
    }

    /// Checks the structural invariants: matching dimensions and a dense
    /// first layer. Depth ordering is reported separately by
    /// [`depth_order_violations`](Self::depth_order_violations) because
    /// inpainted backgrounds need not respect it.
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.foreground.validate()?;
        self.background.validate()?;
        let dims = (self.camera.width, self.camera.height);
        if self.foreground.color.dims() != dims
            || self.background.color.dims() != dims
            || self.fg_mask.dims() != dims
        {
            return Err(Error::InvalidInput(format!(
                "LDI planes do not match the {}x{} camera",
                dims.0, dims.1
            )));
        }
        if !self.foreground.valid.iter().all(|&v| v) {
            return Err(Error::InvalidInput("foreground layer must be dense".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    /// Pixels violating `bg.depth > fg.depth + eps` among masked, valid
    /// background pixels.
    pub fn depth_order_violations(&self, eps: f64) -> Vec<usize> {
        (0..self.fg_mask.len())
            .filter(|&i| {
                self.fg_mask[i]
                    && self.background.valid[i]
                    && !(self.background.depth[i] > self.foreground.depth[i] + eps)
            })
            .collect()
    }
}

/// Continuous foreground scores in `[0, 1]`, 1 meaning foreground.
#[derive(Clone, Debug, PartialEq)]
pub struct SegScoreMap(Grid<f64>);

impl SegScoreMap {
    pub fn new(scores: Grid<f64>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidInput(format!("score {bad} outside [0, 1]")));
        }
        Ok(SegScoreMap(scores))
    }

    /// Flips polarity for maps where 1 means background.
    pub fn inverted(&self) -> Self {
        SegScoreMap(self.0.map(|s| 1.0 - s))
    }

    pub fn scores(&self) -> &Grid<f64> {
        &self.0
    }
}
