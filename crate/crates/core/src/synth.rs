//! Synthetic scenes made of planes facing the camera, rendered exactly by
//! ray casting. Used for fixtures, demos and benchmarks.
//!
//! World axes match the camera convention: x right, y down, z forward.

use nalgebra::Vector3;

use crate::builder::{RangeKind, RgbdInstanceFrame, DEFAULT_WINDOW};
use crate::geometry::{CameraIntrinsics, RigidPose};
use crate::grid::{Grid, Rgb};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Texture {
    Solid(Rgb),
    /// Square cells of side `cell` meters, each with a color hashed from its
    /// cell coordinates and `seed`.
    Cells { cell: f64, seed: u32 },
}

impl Texture {
    pub fn at(&self, x: f64, y: f64) -> Rgb {
        match *self {
            Texture::Solid(c) => c,
            Texture::Cells { cell, seed } => {
                let (i, j) = ((x / cell).floor() as i64, (y / cell).floor() as i64);
                let mut h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
                    ^ (seed as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
                h ^= h >> 29;
                h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
                h ^= h >> 32;
                [h as u8, (h >> 8) as u8, (h >> 16) as u8]
            }
        }
    }
}

/// An axis-aligned rectangle at constant world `z`. Infinite bounds make a
/// wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub z: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub instance: u32,
    pub texture: Texture,
}

impl Plane {
    pub fn wall(z: f64, instance: u32, texture: Texture) -> Self {
        Plane {
            z,
            x_range: (f64::NEG_INFINITY, f64::INFINITY),
            y_range: (f64::NEG_INFINITY, f64::INFINITY),
            instance,
            texture,
        }
    }

    pub fn rect(z: f64, x_range: (f64, f64), y_range: (f64, f64), instance: u32, color: Rgb) -> Self {
        Plane {
            z,
            x_range,
            y_range,
            instance,
            texture: Texture::Solid(color),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_range.0..self.x_range.1).contains(&x) && (self.y_range.0..self.y_range.1).contains(&y)
    }
}

/// First surface along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Ray parameter for a direction whose camera-frame z component is 1,
    /// i.e. depth along the optical axis.
    pub depth: f64,
    pub ray_length: f64,
    pub instance: u32,
    pub color: Rgb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarScene {
    pub planes: Vec<Plane>,
    pub camera: CameraIntrinsics,
}

impl PlanarScene {
    /// Nearest hit of the ray through pixel center `(u, v)` of a camera at
    /// `pose` (camera-to-world).
    pub fn cast(&self, pose: &RigidPose, u: f64, v: f64) -> Option<Hit> {
        let k = &self.camera;
        let d_cam = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        let d = pose.rotation() * d_cam;
        let o = pose.translation();
        if d.z <= 0.0 {
            return None;
        }
        self.planes
            .iter()
            .filter_map(|p| {
                let t = (p.z - o.z) / d.z;
                if t <= 0.0 {
                    return None;
                }
                let (x, y) = (o.x + t * d.x, o.y + t * d.y);
                p.contains(x, y).then(|| Hit {
                    depth: t,
                    ray_length: t * d_cam.norm(),
                    instance: p.instance,
                    color: p.texture.at(x, y),
                })
            })
            .min_by(|a, b| a.depth.total_cmp(&b.depth))
    }

    /// Renders one frame. Rays that miss every plane get range 0.
    pub fn render(&self, pose: &RigidPose, range_kind: RangeKind) -> RgbdInstanceFrame {
        let (w, h) = (self.camera.width as usize, self.camera.height as usize);
        let hits = par::map_range(w * h, |i| self.cast(pose, (i % w) as f64, (i / w) as f64));
        let color = hits.iter().map(|h| h.map_or([0; 3], |h| h.color)).collect();
        let range = hits
            .iter()
            .map(|h| {
                h.map_or(0.0, |h| match range_kind {
                    RangeKind::Depth => h.depth,
                    RangeKind::RayLength => h.ray_length,
                })
            })
            .collect();
        RgbdInstanceFrame {
            color: Grid::from_vec(w, h, color).expect("sized"),
            range: Grid::from_vec(w, h, range).expect("sized"),
            range_kind,
            instances: Grid::from_vec(w, h, hits.iter().map(|h| h.map_or(0, |h| h.instance)).collect()).expect("sized"),
            pose: *pose,
            camera: self.camera,
        }
    }

    /// Frames along a straight path through the origin: frame `i` sits at
    /// `(i - n/2) * step` times the unit `axis`.
    pub fn sweep(&self, n: usize, step: f64, axis: SweepAxis, range_kind: RangeKind) -> Vec<RgbdInstanceFrame> {
        sweep_poses(n, step, axis)
            .iter()
            .map(|p| self.render(p, range_kind))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    X,
    Y,
}

pub fn sweep_poses(n: usize, step: f64, axis: SweepAxis) -> Vec<RigidPose> {
    let mid = (n / 2) as f64;
    (0..n)
        .map(|i| {
            let s = (i as f64 - mid) * step;
            match axis {
                SweepAxis::X => RigidPose::from_translation(s, 0.0, 0.0),
                SweepAxis::Y => RigidPose::from_translation(0.0, s, 0.0),
            }
        })
        .collect()
}

/// A named scene with the sweep used to film it.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub scene: PlanarScene,
    pub frames: usize,
    pub step: f64,
    pub axis: SweepAxis,
    pub range_kind: RangeKind,
}

impl Fixture {
    pub fn frames(&self) -> Vec<RgbdInstanceFrame> {
        self.scene.sweep(self.frames, self.step, self.axis, self.range_kind)
    }

    pub fn poses(&self) -> Vec<RigidPose> {
        sweep_poses(self.frames, self.step, self.axis)
    }
}

/// Wall depth of the standard fixtures, in meters.
pub const FIXTURE_WALL_DEPTH: f64 = 4.0;

/// 64×64 camera with unit-pixel wall disparity per `1/16` m of baseline at
/// the fixture wall depth.
pub fn fixture_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(64.0, 64.0, 31.5, 31.5, 64, 64).expect("valid intrinsics")
}

/// Planar scenes over a textured back wall, filmed by 20-frame sweeps whose
/// step moves the wall by exactly one pixel per frame.
pub fn standard_fixtures() -> Vec<Fixture> {
    let camera = fixture_camera();
    let step = FIXTURE_WALL_DEPTH / camera.fx;
    let wall = |seed| Plane::wall(FIXTURE_WALL_DEPTH, 0, Texture::Cells { cell: 3.0 * step, seed });
    let split_wall = |seed| Plane {
        x_range: (0.0, f64::INFINITY),
        instance: 9,
        ..Plane::wall(FIXTURE_WALL_DEPTH, 0, Texture::Cells { cell: 2.0 * step, seed })
    };
    let fixture = |name, planes, axis, range_kind| Fixture {
        name,
        scene: PlanarScene { planes, camera },
        frames: DEFAULT_WINDOW,
        step,
        axis,
        range_kind,
    };
    vec![
        fixture(
            "box_over_wall",
            vec![Plane::rect(2.0, (-0.3137, 0.2719), (-0.2861, 0.3311), 1, [200, 40, 40]), wall(1)],
            SweepAxis::X,
            RangeKind::Depth,
        ),
        fixture(
            "two_boxes_stacked",
            vec![
                Plane::rect(2.5, (-0.6137, 0.1719), (-0.4861, 0.2311), 1, [40, 200, 40]),
                Plane::rect(1.6, (-0.1213, 0.3371), (-0.1917, 0.4109), 2, [40, 40, 200]),
                wall(2),
            ],
            SweepAxis::X,
            RangeKind::Depth,
        ),
        fixture(
            "split_wall_vertical_sweep",
            vec![
                Plane::rect(2.2, (-0.2437, 0.2281), (-0.3123, 0.1889), 3, [230, 200, 20]),
                split_wall(5),
                wall(3),
            ],
            SweepAxis::Y,
            RangeKind::Depth,
        ),
        fixture(
            "ray_length_two_boxes",
            vec![
                Plane::rect(1.8, (-0.5521, -0.0773), (-0.2017, 0.2563), 4, [120, 10, 160]),
                Plane::rect(2.7, (0.1093, 0.6611), (-0.4301, 0.0177), 6, [10, 160, 160]),
                wall(4),
            ],
            SweepAxis::X,
            RangeKind::RayLength,
        ),
        fixture(
            "thin_pole",
            vec![
                Plane::rect(1.5, (-0.0531, 0.0613), (-1.0, 1.0), 7, [250, 250, 250]),
                split_wall(6),
                wall(7),
            ],
            SweepAxis::X,
            RangeKind::Depth,
        ),
        fixture(
            "overlapping_boxes_vertical",
            vec![
                Plane::rect(2.9, (-0.4129, 0.3907), (-0.5333, 0.0781), 11, [90, 60, 30]),
                Plane::rect(1.9, (-0.2203, 0.1871), (-0.1409, 0.3797), 12, [30, 90, 60]),
                Plane::rect(1.3, (0.0611, 0.2437), (0.0513, 0.2291), 13, [200, 90, 160]),
                wall(8),
            ],
            SweepAxis::Y,
            RangeKind::Depth,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wall_depth_is_exact() {
        let fx = &standard_fixtures()[0];
        let frame = fx.scene.render(&RigidPose::identity(), RangeKind::Depth);
        assert_eq!(frame.range[(0, 0)], FIXTURE_WALL_DEPTH);
        assert_eq!(frame.instances[(0, 0)], 0);
        assert_eq!(frame.range[(31, 31)], 2.0);
        assert_eq!(frame.instances[(31, 31)], 1);
    }

    #[test]
    fn ray_length_matches_depth_at_principal_axis() {
        let scene = PlanarScene {
            planes: vec![Plane::wall(3.0, 0, Texture::Solid([1, 2, 3]))],
            camera: CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 5, 5).unwrap(),
        };
        let h = scene.cast(&RigidPose::identity(), 2.0, 2.0).unwrap();
        assert_eq!(h.depth, h.ray_length);
        let off = scene.cast(&RigidPose::identity(), 0.0, 2.0).unwrap();
        assert!(off.ray_length > off.depth);
    }

    #[test]
    fn sweep_is_centered_on_middle_frame() {
        let poses = sweep_poses(20, 0.5, SweepAxis::Y);
        assert_eq!(poses[10], RigidPose::identity());
        assert_eq!(poses[0].translation().y, -5.0);
    }

    #[test]
    fn cell_texture_is_piecewise_constant() {
        let t = Texture::Cells { cell: 0.25, seed: 3 };
        assert_eq!(t.at(0.01, 0.01), t.at(0.24, 0.2));
        assert_ne!(t.at(0.01, 0.01), t.at(0.26, 0.01));
    }
}
