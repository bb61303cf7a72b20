//! Layered depth images (LDIs) with two layers: construction from posed
//! RGB-D sequences with instance labels, foreground removal and background
//! inpainting, novel view rendering, and evaluation metrics.
//!
//! With the default `parallel` feature, per-pixel and per-frame loops run on
//! rayon. Disabling it gives a sequential build with bit-identical results.

pub mod builder;
pub mod container;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod imageio;
pub mod inpaint;
pub mod ldi;
pub mod mask;
pub mod metadata;
pub mod metrics;
pub mod par;
pub mod render;
pub mod sequence;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, ImagePoint, Pixel, Point3, RigidPose};
pub use grid::{Grid, Mask, Rgb};
pub use ldi::{InstanceMap, LayeredDepthImage, RgbdLayer, SegScoreMap};
