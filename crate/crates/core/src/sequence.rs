//! Posed RGB-D + instance sequences on disk.
//!
//! ```text
//! scene/
//!   sequence.txt         intrinsics, optional range_kind / pose_convention,
//!                        one `frame <name> = <16 floats>` line per frame
//!   color/<name>.png     8-bit RGB
//!   range/<name>.png     16-bit millimeters
//!   instance/<name>.png  16-bit ids, 0 = background structure
//! ```

use std::path::{Path, PathBuf};

use crate::builder::{RangeKind, RgbdInstanceFrame, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::imageio;
use crate::metadata::{format_camera, format_pose, Metadata};

pub const SEQUENCE_FILE: &str = "sequence.txt";

/// Direction of the stored 4×4 pose matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoseConvention {
    CameraToWorld,
    WorldToCamera,
}

impl std::str::FromStr for PoseConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c2w" | "camera_to_world" => Ok(PoseConvention::CameraToWorld),
            "w2c" | "world_to_camera" => Ok(PoseConvention::WorldToCamera),
            _ => Err(Error::Config(format!("unknown pose convention `{s}` (use c2w or w2c)"))),
        }
    }
}

impl std::str::FromStr for RangeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(RangeKind::Depth),
            "ray" | "ray_length" => Ok(RangeKind::RayLength),
            _ => Err(Error::Config(format!("unknown range kind `{s}` (use depth or ray_length)"))),
        }
    }
}

/// Overrides for values otherwise read from `sequence.txt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceOptions {
    pub range_kind: Option<RangeKind>,
    pub pose_convention: Option<PoseConvention>,
    /// First frame of the window.
    pub start: usize,
    /// Window length; clipped to the frames available after `start`.
    pub window: usize,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions {
            range_kind: None,
            pose_convention: None,
            start: 0,
            window: DEFAULT_WINDOW,
        }
    }
}

/// A loaded window of frames with their names.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub names: Vec<String>,
    pub frames: Vec<RgbdInstanceFrame>,
}

fn plane(dir: &Path, sub: &str, name: &str) -> PathBuf {
    dir.join(sub).join(format!("{name}.png"))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing {what}: {}", path.display())))
    }
}

pub fn load_sequence(dir: impl AsRef<Path>, opts: &SequenceOptions) -> Result<Sequence> {
    let dir = dir.as_ref();
    let meta_path = dir.join(SEQUENCE_FILE);
    require_file(&meta_path, "pose file")?;
    let text = std::fs::read_to_string(&meta_path).map_err(|source| Error::Io {
        path: meta_path.clone(),
        source,
    })?;
    let md = Metadata::parse(&text)?;
    let camera = md.intrinsics()?;
    let range_kind = match opts.range_kind {
        Some(k) => k,
        None => md.get("range_kind").map(str::parse).transpose()?.unwrap_or(RangeKind::Depth),
    };
    let convention = match opts.pose_convention {
        Some(c) => c,
        None => md
            .get("pose_convention")
            .map(str::parse)
            .transpose()?
            .unwrap_or(PoseConvention::CameraToWorld),
    };

    let all = md.frames()?;
    if opts.start >= all.len() {
        return Err(Error::Config(format!(
            "start frame {} out of range ({} frames listed)",
            opts.start,
            all.len()
        )));
    }
    let end = (opts.start + opts.window).min(all.len());
    if end - opts.start < opts.window {
        log::warn!(
            "window of {} requested, only {} frames available from {}",
            opts.window,
            end - opts.start,
            opts.start
        );
    }

    let mut names = Vec::new();
    let mut frames = Vec::new();
    for (name, pose) in &all[opts.start..end] {
        let (c, r, i) = (plane(dir, "color", name), plane(dir, "range", name), plane(dir, "instance", name));
        require_file(&c, "color image")?;
        require_file(&r, "range image")?;
        require_file(&i, "instance image")?;
        let pose: RigidPose = match convention {
            PoseConvention::CameraToWorld => *pose,
            PoseConvention::WorldToCamera => pose.inverse(),
        };
        let frame = RgbdInstanceFrame {
            color: imageio::read_rgb(&c)?,
            range: imageio::read_depth_mm(&r)?,
            range_kind,
            instances: imageio::read_instances(&i)?,
            pose,
            camera,
        };
        frame.validate().map_err(|e| Error::Config(format!("frame {name}: {e}")))?;
        names.push(name.clone());
        frames.push(frame);
    }
    log::info!("loaded {} frames from {}", frames.len(), dir.display());
    Ok(Sequence { names, frames })
}

/// Writes frames in the layout [`load_sequence`] reads, with camera-to-world
/// poses. All frames must share the first frame's camera and range kind.
pub fn write_sequence(dir: impl AsRef<Path>, names: &[String], frames: &[RgbdInstanceFrame]) -> Result<()> {
    let dir = dir.as_ref();
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("no frames to write".into()))?;
    if names.len() != frames.len() {
        return Err(Error::InvalidInput("one name per frame required".into()));
    }
    for sub in ["color", "range", "instance"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|source| Error::Io { path: p, source })?;
    }
    let mut text = format_camera(&first.camera, None);
    text.push_str(match first.range_kind {
        RangeKind::Depth => "range_kind = depth\n",
        RangeKind::RayLength => "range_kind = ray_length\n",
    });
    text.push_str("pose_convention = c2w\n");
    for (name, f) in names.iter().zip(frames) {
        if f.camera != first.camera || f.range_kind != first.range_kind {
            return Err(Error::InvalidInput(format!("frame {name} differs in camera or range kind")));
        }
        text.push_str(&format!("frame {name} = {}\n", format_pose(&f.pose)));
        imageio::write_rgb(plane(dir, "color", name), &f.color)?;
        imageio::write_depth_mm(plane(dir, "range", name), &f.range)?;
        imageio::write_instances(plane(dir, "instance", name), &f.instances)?;
    }
    let meta = dir.join(SEQUENCE_FILE);
    std::fs::write(&meta, text).map_err(|source| Error::Io { path: meta, source })
}
