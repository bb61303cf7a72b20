//! Pinhole camera model and rigid transforms.
//!
//! Conventions: the camera looks along +z with x to the right and y down, so
//! image axes and camera axes are aligned. Integer pixel coordinates `(u, v)`
//! name the center of column `u`, row `v`.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Pinhole intrinsics `K` plus the image size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive and finite (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image size must be non-zero".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::InvalidParameter(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    #[inline]
    pub fn contains(&self, p: Pixel) -> bool {
        (p.u as usize) < self.width && (p.v as usize) < self.height
    }

    /// Rounds a continuous position to the pixel whose center is nearest,
    /// or `None` when that pixel is outside the image.
    #[inline]
    pub fn pixel_at(&self, p: ImagePoint) -> Option<Pixel> {
        // f64::round is half-away-from-zero.
        let u = p.u.round();
        let v = p.v.round();
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some(Pixel {
                u: u as u32,
                v: v as u32,
            })
        } else {
            None
        }
    }

    /// `‖K⁻¹ (u, v, 1)ᵀ‖₂`, the length of the viewing ray with unit depth.
    #[inline]
    pub fn ray_norm(&self, p: ImagePoint) -> f64 {
        let x = (p.u - self.cx) / self.fx;
        let y = (p.v - self.cy) / self.fy;
        (x * x + y * y + 1.0).sqrt()
    }
}

/// Integer pixel address (column `u`, row `v`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub u: u32,
    pub v: u32,
}

impl Pixel {
    pub const fn new(u: u32, v: u32) -> Self {
        Pixel { u, v }
    }

    #[inline]
    pub fn index(&self, width: usize) -> usize {
        self.v as usize * width + self.u as usize
    }
}

/// Continuous image-plane position in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        ImagePoint { u, v }
    }
}

impl From<Pixel> for ImagePoint {
    fn from(p: Pixel) -> Self {
        ImagePoint {
            u: p.u as f64,
            v: p.v as f64,
        }
    }
}

/// Converts a ray length (distance from the camera center) into depth along
/// the optical axis.
pub fn ray_to_depth(ray_len: f64, k: &CameraIntrinsics, p: impl Into<ImagePoint>) -> Result<f64> {
    if !ray_len.is_finite() || ray_len < 0.0 {
        return Err(Error::InvalidInput(format!("ray length {ray_len} must be finite and non-negative")));
    }
    Ok(ray_len / k.ray_norm(p.into()))
}

/// Back-projects a pixel at the given depth into camera coordinates.
pub fn unproject(p: impl Into<ImagePoint>, depth: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::InvalidDepth(depth));
    }
    let p = p.into();
    Ok(Point3::new(
        (p.u - k.cx) * depth / k.fx,
        (p.v - k.cy) * depth / k.fy,
        depth,
    ))
}

/// Perspective projection; returns the continuous image position and depth.
pub fn project(pt: &Point3, k: &CameraIntrinsics) -> Result<(ImagePoint, f64)> {
    if !(pt.z > 0.0) {
        return Err(Error::BehindCamera(pt.z));
    }
    Ok((
        ImagePoint {
            u: k.fx * pt.x / pt.z + k.cx,
            v: k.fy * pt.y / pt.z + k.cy,
        },
        pt.z,
    ))
}

/// Rigid transform `x ↦ R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ORTHONORMAL_TOL: f64 = 1e-6;

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("pose has non-finite entries".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(
                "rotation must be orthonormal with determinant +1".into(),
            ));
        }
        Ok(RigidPose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Parses 16 row-major floats of a homogeneous 4×4 matrix.
    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::InvalidParameter(format!(
                "pose needs 16 values, got {}",
                values.len()
            )));
        }
        let m = Matrix4::from_row_slice(values);
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidParameter(format!(
                "pose bottom row must be 0 0 0 1, got {bottom:?}"
            )));
        }
        RigidPose::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 4 + c] = self.rotation[(r, c)];
            }
            out[r * 4 + 3] = self.translation[r];
        }
        out[15] = 1.0;
        out
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.transpose();
        RigidPose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn transform_point(&self, pt: &Point3) -> Point3 {
        Point3::from(self.rotation * pt.coords + self.translation)
    }

    /// Largest absolute element-wise difference between the two 4×4 matrices.
    pub fn max_abs_diff(&self, other: &RigidPose) -> f64 {
        (self.rotation - other.rotation)
            .amax()
            .max((self.translation - other.translation).amax())
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        RigidPose::identity()
    }
}

/// Free-function form of [`RigidPose::transform_point`].
pub fn transform_point(pose: &RigidPose, pt: &Point3) -> Point3 {
    pose.transform_point(pt)
}

/// Relative transform mapping frame-`i` camera coordinates into reference
/// camera coordinates, given both camera-to-world poses.
pub fn relative_pose(world_from_ref: &RigidPose, world_from_i: &RigidPose) -> RigidPose {
    world_from_ref.inverse().compose(world_from_i)
}
