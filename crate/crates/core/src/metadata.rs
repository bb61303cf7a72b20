//! Plain-text camera metadata: one `key = value` per line, `#` comments.
//!
//! ```text
//! fx = 525
//! fy = 525
//! cx = 319.5
//! cy = 239.5
//! width = 640
//! height = 480
//! pose = 1 0 0 0  0 1 0 0  0 0 1 0  0 0 0 1
//! ```
//!
//! Sequence files add one `frame <name> = <16 floats>` line per frame.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, RigidPose};

/// Parsed key/value document, keeping frame entries in file order.
#[derive(Debug, Default, Clone)]
pub struct Metadata {
    entries: Vec<(String, String)>,
    frames: Vec<(String, String)>,
}

impl Metadata {
    pub fn parse(text: &str) -> Result<Self> {
        let mut md = Metadata::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim().to_string();
            if let Some(name) = key.strip_prefix("frame ") {
                md.frames.push((name.trim().to_string(), value));
            } else {
                if md.entries.iter().any(|(k, _)| k == key) {
                    return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
                }
                md.entries.push((key.to_string(), value));
            }
        }
        Ok(md)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(
            self.require("fx")?,
            self.require("fy")?,
            self.require("cx")?,
            self.require("cy")?,
            self.require("width")?,
            self.require("height")?,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pose(&self) -> Result<Option<RigidPose>> {
        self.get("pose").map(parse_pose).transpose()
    }

    /// `(name, pose)` for each `frame` line, in file order.
    pub fn frames(&self) -> Result<Vec<(String, RigidPose)>> {
        self.frames
            .iter()
            .map(|(name, v)| {
                parse_pose(v)
                    .map(|p| (name.clone(), p))
                    .map_err(|e| Error::Config(format!("frame {name}: {e}")))
            })
            .collect()
    }
}

pub fn parse_pose(text: &str) -> Result<RigidPose> {
    let values = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("pose: cannot parse `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    RigidPose::from_row_major(&values).map_err(|e| Error::Config(e.to_string()))
}

pub fn format_pose(pose: &RigidPose) -> String {
    pose.to_row_major()
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serializes intrinsics and an optional pose. `{:?}` on f64 prints the
/// shortest string that round-trips exactly.
pub fn format_camera(k: &CameraIntrinsics, pose: Option<&RigidPose>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "fx = {:?}", k.fx);
    let _ = writeln!(s, "fy = {:?}", k.fy);
    let _ = writeln!(s, "cx = {:?}", k.cx);
    let _ = writeln!(s, "cy = {:?}", k.cy);
    let _ = writeln!(s, "width = {}", k.width);
    let _ = writeln!(s, "height = {}", k.height);
    if let Some(p) = pose {
        let _ = writeln!(s, "pose = {}", format_pose(p));
    }
    s
}
