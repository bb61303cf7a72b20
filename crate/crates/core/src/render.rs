//! Novel view synthesis from an LDI.
//!
//! The foreground layer is forward-splatted into the perturbed camera and
//! small cracks are closed morphologically. Pixels that are still void take
//! the splatted background layer.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{project, unproject, CameraIntrinsics, Pixel, RigidPose};
use crate::grid::{Grid, Mask, Rgb};
use crate::ldi::{LayeredDepthImage, RgbdLayer};
use crate::par;

pub const DEFAULT_CLOSE_KERNEL: usize = 3;

/// Translations beyond this (meters) leave the small-motion regime the
/// representation is meant for.
pub const LARGE_PERTURBATION: f64 = 0.5;

/// Offset of the target camera relative to the reference camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewPerturbation {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub rotation: Option<Matrix3<f64>>,
}

impl ViewPerturbation {
    pub const ZERO: ViewPerturbation = ViewPerturbation {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        rotation: None,
    };

    pub fn translation(dx: f64, dy: f64, dz: f64) -> Self {
        ViewPerturbation {
            dx,
            dy,
            dz,
            rotation: None,
        }
    }

    /// Target camera-to-reference pose.
    pub fn target_pose(&self) -> Result<RigidPose> {
        if ![self.dx, self.dy, self.dz].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("perturbation must be finite".into()));
        }
        let magnitude = (self.dx * self.dx + self.dy * self.dy + self.dz * self.dz).sqrt();
        if magnitude > LARGE_PERTURBATION {
            log::warn!("perturbation of {magnitude:.3} m exceeds {LARGE_PERTURBATION} m; expect large disocclusions");
        }
        RigidPose::new(
            self.rotation.unwrap_or_else(Matrix3::identity),
            Vector3::new(self.dx, self.dy, self.dz),
        )
    }
}

impl Default for ViewPerturbation {
    fn default() -> Self {
        ViewPerturbation::ZERO
    }
}

/// Color of pixels no layer reached.
pub const VOID_COLOR: Rgb = [0, 0, 0];

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedView {
    pub color: Grid<Rgb>,
    /// 0 where void.
    pub depth: Grid<f64>,
    pub void: Mask,
}

impl RenderedView {
    pub fn empty(width: usize, height: usize) -> Self {
        RenderedView {
            color: Grid::filled(width, height, VOID_COLOR),
            depth: Grid::filled(width, height, 0.0),
            void: Grid::filled(width, height, true),
        }
    }

    pub fn void_count(&self) -> usize {
        self.void.count()
    }
}

/// Forward-splats the valid pixels of `layer` into the perturbed camera with
/// nearest-pixel rounding and a z-buffer. Ties keep the smaller source index.
pub fn warp_layer(layer: &RgbdLayer, cam: &CameraIntrinsics, pert: &ViewPerturbation) -> Result<RenderedView> {
    let target_from_ref = pert.target_pose()?.inverse();
    let (w, h) = (layer.width(), layer.height());
    if (w, h) != (cam.width, cam.height) {
        return Err(Error::InvalidInput("layer size differs from the camera".into()));
    }
    let splats = par::map_range(w * h, |i| {
        if !layer.valid[i] {
            return None;
        }
        let src = Pixel::new((i % w) as u32, (i / w) as u32);
        let pt = unproject(src, layer.depth[i], cam).ok()?;
        let (uv, z) = project(&target_from_ref.transform_point(&pt), cam).ok()?;
        cam.pixel_at(uv).map(|p| (p.index(w), z))
    });

    let mut view = RenderedView::empty(w, h);
    for (i, splat) in splats.into_iter().enumerate() {
        let Some((t, z)) = splat else { continue };
        if view.void[t] || z < view.depth[t] {
            view.void[t] = false;
            view.depth[t] = z;
            view.color[t] = layer.color[i];
        }
    }
    Ok(view)
}

/// Square-kernel offsets ordered by distance, then row, then column.
fn kernel_offsets(kernel_size: usize) -> Vec<(isize, isize)> {
    let r = (kernel_size / 2) as isize;
    let mut offs: Vec<(isize, isize)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
    offs.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    offs
}

/// Morphological closing (dilation then erosion) of the non-void set with a
/// square kernel. Pixels the closing adds take color and depth from the
/// nearest non-void neighbor found during dilation. Voids wider than the
/// kernel survive, and erosion treats outside the image as void so border
/// bands are never filled.
pub fn morphological_close(view: &RenderedView, kernel_size: usize) -> Result<RenderedView> {
    if kernel_size == 0 || kernel_size % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "closing kernel {kernel_size} must be odd and >= 1"
        )));
    }
    let (w, h) = view.void.dims();
    let offsets = kernel_offsets(kernel_size);

    // dilation: nearest non-void source for each pixel, if any
    let mut source: Grid<Option<usize>> = Grid::filled(w, h, None);
    par::for_each_row(source.as_mut_slice(), w, |y, row| {
        for (x, s) in row.iter_mut().enumerate() {
            if !view.void[(x, y)] {
                *s = Some(y * w + x);
                continue;
            }
            *s = offsets.iter().find_map(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                match view.void.checked(nx, ny) {
                    Some(false) => Some(ny as usize * w + nx as usize),
                    _ => None,
                }
            });
        }
    });

    // erosion of the dilated set
    let mut out = view.clone();
    let mut keep: Grid<bool> = Grid::filled(w, h, false);
    par::for_each_row(keep.as_mut_slice(), w, |y, row| {
        for (x, k) in row.iter_mut().enumerate() {
            *k = view.void[(x, y)]
                && offsets.iter().all(|&(dx, dy)| {
                    source
                        .checked(x as isize + dx, y as isize + dy)
                        .is_some_and(|s| s.is_some())
                });
        }
    });
    for i in 0..w * h {
        if keep[i] {
            let s = source[i].expect("eroded pixels lie in the dilated set");
            out.void[i] = false;
            out.color[i] = view.color[s];
            out.depth[i] = view.depth[s];
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderOptions {
    pub close_kernel: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            close_kernel: DEFAULT_CLOSE_KERNEL,
        }
    }
}

/// An LDI render with the pixels taken from the background layer marked.
#[derive(Clone, Debug, PartialEq)]
pub struct LdiRender {
    pub view: RenderedView,
    pub from_background: Mask,
}

/// Foreground-only render: warp plus closing.
pub fn render_single_layer(ldi: &LayeredDepthImage, pert: &ViewPerturbation, opts: &RenderOptions) -> Result<RenderedView> {
    morphological_close(&warp_layer(&ldi.foreground, &ldi.camera, pert)?, opts.close_kernel)
}

pub fn render_ldi_detailed(ldi: &LayeredDepthImage, pert: &ViewPerturbation, opts: &RenderOptions) -> Result<LdiRender> {
    let mut view = render_single_layer(ldi, pert, opts)?;
    let back = warp_layer(&ldi.background, &ldi.camera, pert)?;
    let mut from_background = Grid::filled(view.void.width(), view.void.height(), false);
    for i in 0..view.void.len() {
        if view.void[i] && !back.void[i] {
            view.void[i] = false;
            view.color[i] = back.color[i];
            view.depth[i] = back.depth[i];
            from_background[i] = true;
        }
    }
    Ok(LdiRender { view, from_background })
}

/// Two-layer render: the closed foreground warp with remaining voids filled
/// from the warped background layer.
pub fn render_ldi(ldi: &LayeredDepthImage, pert: &ViewPerturbation, opts: &RenderOptions) -> Result<RenderedView> {
    render_ldi_detailed(ldi, pert, opts).map(|r| r.view)
}

/// Default sweep: left, right, up and down at each magnitude.
pub fn four_direction_sweep(magnitudes: &[f64]) -> Vec<(String, ViewPerturbation)> {
    let mut out = Vec::new();
    for &m in magnitudes {
        for (name, dx, dy) in [("left", -m, 0.0), ("right", m, 0.0), ("up", 0.0, -m), ("down", 0.0, m)] {
            out.push((format!("{name}_{m:.2}"), ViewPerturbation::translation(dx, dy, 0.0)));
        }
    }
    out
}

pub const DEFAULT_SWEEP_MAGNITUDES: [f64; 2] = [0.05, 0.10];
