//! Ground-truth LDI construction from a window of posed RGB-D frames with
//! instance labels.
//!
//! Every pixel of every supportive frame is warped into the reference view.
//! A warped sample may enter the background layer at pixel `p` only if
//!
//! 1. it lies behind the reference surface at `p` by more than `eps_occ`,
//! 2. its instance differs from the reference instance at `p`, and
//! 3. its instance never occludes another instance in any view.
//!
//! Among the samples that pass, the nearest one wins. Pixels whose reference
//! instance is an occluder form the foreground mask.

use std::borrow::Cow;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{relative_pose, unproject, CameraIntrinsics, ImagePoint, Pixel, RigidPose};
use crate::grid::{Grid, Mask, Rgb};
use crate::ldi::{InstanceMap, LayeredDepthImage, RgbdLayer};
use crate::par;

/// Default depth tolerance for ordering and occlusion tests, in meters.
pub const DEFAULT_EPS_OCC: f64 = 0.01;

/// Default number of consecutive frames per LDI.
pub const DEFAULT_WINDOW: usize = 20;

/// What the range plane of a frame measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeKind {
    /// Distance along the optical axis.
    Depth,
    /// Euclidean distance from the camera center.
    RayLength,
}

/// One posed input frame.
#[derive(Clone, Debug)]
pub struct RgbdInstanceFrame {
    pub color: Grid<Rgb>,
    /// Meters, 0 where the sensor has no reading.
    pub range: Grid<f64>,
    pub range_kind: RangeKind,
    pub instances: InstanceMap,
    /// Camera-to-world.
    pub pose: RigidPose,
    pub camera: CameraIntrinsics,
}

impl RgbdInstanceFrame {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let dims = (self.camera.width, self.camera.height);
        if self.color.dims() != dims || self.range.dims() != dims || self.instances.dims() != dims {
            return Err(Error::Config(format!(
                "frame planes do not match the {}x{} camera",
                dims.0, dims.1
            )));
        }
        if let Some(bad) = self.range.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidInput(format!("range value {bad} must be finite and non-negative")));
        }
        Ok(())
    }

    /// Depth along the optical axis, converting ray lengths when needed.
    pub fn depth_map(&self) -> Cow<'_, Grid<f64>> {
        match self.range_kind {
            RangeKind::Depth => Cow::Borrowed(&self.range),
            RangeKind::RayLength => {
                let k = self.camera;
                let w = self.range.width();
                let data = par::map_range(self.range.len(), |i| {
                    let p = ImagePoint::new((i % w) as f64, (i / w) as f64);
                    self.range[i] / k.ray_norm(p)
                });
                Cow::Owned(Grid::from_vec(w, self.range.height(), data).expect("same size"))
            }
        }
    }

    /// Same frame with its range plane converted to depth.
    pub fn into_depth_frame(self) -> Self {
        match self.range_kind {
            RangeKind::Depth => self,
            RangeKind::RayLength => {
                let range = self.depth_map().into_owned();
                RgbdInstanceFrame {
                    range,
                    range_kind: RangeKind::Depth,
                    ..self
                }
            }
        }
    }
}

/// A source pixel re-projected into the reference view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpedSample {
    pub target: Pixel,
    pub depth: f64,
    pub color: Rgb,
    pub instance: u32,
    pub source_frame: usize,
    /// Row-major index of the source pixel.
    pub source_index: usize,
}

/// Bookkeeping for one warped frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WarpStats {
    pub kept: usize,
    pub dropped_invalid_depth: usize,
    pub dropped_behind_camera: usize,
    pub dropped_out_of_bounds: usize,
}

impl WarpStats {
    fn add(&mut self, o: &WarpStats) {
        self.kept += o.kept;
        self.dropped_invalid_depth += o.dropped_invalid_depth;
        self.dropped_behind_camera += o.dropped_behind_camera;
        self.dropped_out_of_bounds += o.dropped_out_of_bounds;
    }
}

/// Forward-warps every pixel of `src` into the camera `ref_cam`, where
/// `t_ref_src` maps source camera coordinates into target camera coordinates.
/// Samples are returned in source row-major order.
pub fn warp_frame(
    src: &RgbdInstanceFrame,
    source_frame: usize,
    t_ref_src: &RigidPose,
    ref_cam: &CameraIntrinsics,
) -> (Vec<WarpedSample>, WarpStats) {
    let depth = src.depth_map();
    let depth = depth.as_ref();
    let w = depth.width();
    let rows = par::map_range(depth.height(), |v| {
        let mut stats = WarpStats::default();
        let mut out = Vec::with_capacity(w);
        for u in 0..w {
            let i = v * w + u;
            let d = depth[i];
            let Ok(pt) = unproject(Pixel::new(u as u32, v as u32), d, &src.camera) else {
                stats.dropped_invalid_depth += 1;
                continue;
            };
            let q = t_ref_src.transform_point(&pt);
            let Ok((uv, z)) = crate::geometry::project(&q, ref_cam) else {
                stats.dropped_behind_camera += 1;
                continue;
            };
            let Some(target) = ref_cam.pixel_at(uv) else {
                stats.dropped_out_of_bounds += 1;
                continue;
            };
            stats.kept += 1;
            out.push(WarpedSample {
                target,
                depth: z,
                color: src.color[i],
                instance: src.instances[i],
                source_frame,
                source_index: i,
            });
        }
        (out, stats)
    });
    let mut stats = WarpStats::default();
    let mut samples = Vec::with_capacity(rows.iter().map(|r| r.0.len()).sum());
    for (row, s) in rows {
        samples.extend(row);
        stats.add(&s);
    }
    (samples, stats)
}

/// Instance ids that occlude some other instance somewhere. Id 0 is never a
/// member.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OccluderSet(BTreeSet<u32>);

impl OccluderSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `id` unless it is the reserved id 0. Returns whether it was added.
    pub fn insert(&mut self, id: u32) -> bool {
        id != 0 && self.0.insert(id)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.0.contains(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn extend(&mut self, other: &OccluderSet) {
        self.0.extend(other.0.iter().copied());
    }
}

impl FromIterator<u32> for OccluderSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        let mut s = OccluderSet::new();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

/// Records occlusions between samples warped into a view and the surface the
/// view actually sees. Whenever a sample and the visible surface at the same
/// pixel belong to different instances and are separated by more than `eps`,
/// the nearer instance occludes the farther one.
pub fn detect_occlusions(
    view_depth: &Grid<f64>,
    view_instances: &InstanceMap,
    samples: &[WarpedSample],
    eps: f64,
    out: &mut OccluderSet,
) {
    let w = view_depth.width();
    for s in samples {
        let i = s.target.index(w);
        let d = view_depth[i];
        let id = view_instances[i];
        if d <= 0.0 || id == s.instance {
            continue;
        }
        if s.depth < d - eps {
            out.insert(s.instance);
        } else if s.depth > d + eps {
            out.insert(id);
        }
    }
}

/// Finds every instance that occludes another one, checking supportive
/// frames warped into the reference and the reference warped into each
/// supportive frame.
pub fn collect_occluders(frames: &[RgbdInstanceFrame], ref_index: usize, eps: f64) -> Result<OccluderSet> {
    validate_window(frames, ref_index)?;
    let depth_frames: Vec<Cow<'_, Grid<f64>>> = frames.iter().map(|f| f.depth_map()).collect();
    check_dense(&depth_frames[ref_index])?;
    Ok(occluders_from(frames, &depth_frames, ref_index, eps).0)
}

fn occluders_from(
    frames: &[RgbdInstanceFrame],
    depths: &[Cow<'_, Grid<f64>>],
    ref_index: usize,
    eps: f64,
) -> (OccluderSet, Vec<WarpStats>) {
    let reference = &frames[ref_index];
    let per_frame = par::map_range(frames.len(), |i| {
        let mut set = OccluderSet::new();
        if i == ref_index {
            return (set, WarpStats::default());
        }
        let t_ref_i = relative_pose(&reference.pose, &frames[i].pose);
        let (into_ref, stats) = warp_frame(&frames[i], i, &t_ref_i, &reference.camera);
        detect_occlusions(&depths[ref_index], &reference.instances, &into_ref, eps, &mut set);
        drop(into_ref);
        let (into_i, _) = warp_frame(reference, ref_index, &t_ref_i.inverse(), &frames[i].camera);
        detect_occlusions(&depths[i], &frames[i].instances, &into_i, eps, &mut set);
        (set, stats)
    });
    let mut all = OccluderSet::new();
    let mut stats = Vec::with_capacity(frames.len());
    for (set, s) in per_frame {
        all.extend(&set);
        stats.push(s);
    }
    (all, stats)
}

/// Foreground mask: pixels whose reference instance is an occluder.
pub fn extract_fg_mask(instances: &InstanceMap, occluders: &OccluderSet) -> Mask {
    instances.map(|&id| occluders.contains(id))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildConfig {
    /// Reference frame; defaults to the middle of the window.
    pub ref_index: Option<usize>,
    pub eps_occ: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            ref_index: None,
            eps_occ: DEFAULT_EPS_OCC,
        }
    }
}

/// Middle frame of a window of `n` frames.
pub fn default_ref_index(n: usize) -> usize {
    n / 2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BuildStats {
    pub frames: usize,
    pub ref_index: usize,
    pub eps_occ: f64,
    pub occluders: Vec<u32>,
    pub warp: Vec<WarpStats>,
    pub samples_in_foreground: usize,
    pub rejected_not_behind: usize,
    pub rejected_same_instance: usize,
    pub rejected_occluder: usize,
    pub accepted: usize,
    pub foreground_pixels: usize,
    pub background_filled: usize,
    pub background_holes: usize,
}

/// Result of [`build_ldi`]: the LDI plus per-pixel provenance of the
/// background layer.
#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub ldi: LayeredDepthImage,
    pub occluders: OccluderSet,
    /// Instance that supplied each valid background pixel.
    pub background_instance: Grid<Option<u32>>,
    /// Frame that supplied each valid background pixel.
    pub background_frame: Grid<Option<usize>>,
    pub stats: BuildStats,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    depth: f64,
    frame: usize,
    source_index: usize,
    color: Rgb,
    instance: u32,
}

impl Candidate {
    /// Strict ordering on `(depth, frame, source_index)`.
    #[inline]
    fn beats(&self, other: &Candidate) -> bool {
        self.depth
            .total_cmp(&other.depth)
            .then(self.frame.cmp(&other.frame))
            .then(self.source_index.cmp(&other.source_index))
            .is_lt()
    }
}

type CandidateBuffer = Vec<Option<Candidate>>;

fn merge_buffers(a: Option<CandidateBuffer>, b: Option<CandidateBuffer>) -> Option<CandidateBuffer> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(mut a), Some(b)) => {
            for (slot, cand) in a.iter_mut().zip(b) {
                if let Some(c) = cand {
                    if slot.as_ref().is_none_or(|s| c.beats(s)) {
                        *slot = Some(c);
                    }
                }
            }
            Some(a)
        }
    }
}

#[derive(Default)]
struct Rejections {
    in_foreground: usize,
    not_behind: usize,
    same_instance: usize,
    occluder: usize,
}

/// Builds the LDI for `frames` using the reference `config.ref_index`
/// (default: middle frame).
pub fn build_ldi(frames: &[RgbdInstanceFrame], config: &BuildConfig) -> Result<BuildOutput> {
    let ref_index = config.ref_index.unwrap_or_else(|| default_ref_index(frames.len()));
    validate_window(frames, ref_index)?;
    validate_eps(config.eps_occ)?;
    let depths: Vec<Cow<'_, Grid<f64>>> = frames.iter().map(|f| f.depth_map()).collect();
    check_dense(&depths[ref_index])?;
    let (occluders, warp) = occluders_from(frames, &depths, ref_index, config.eps_occ);
    let mut out = assemble(frames, &depths, ref_index, &occluders, config.eps_occ);
    out.stats.warp = warp;
    Ok(out)
}

/// Builds the layers for a fixed occluder set. With the occluders held
/// fixed, adding supportive frames can only fill new background pixels or
/// bring existing ones closer.
pub fn build_with_occluders(
    frames: &[RgbdInstanceFrame],
    ref_index: usize,
    occluders: &OccluderSet,
    eps: f64,
) -> Result<BuildOutput> {
    validate_window(frames, ref_index)?;
    validate_eps(eps)?;
    let depths: Vec<Cow<'_, Grid<f64>>> = frames.iter().map(|f| f.depth_map()).collect();
    check_dense(&depths[ref_index])?;
    Ok(assemble(frames, &depths, ref_index, occluders, eps))
}

fn assemble(
    frames: &[RgbdInstanceFrame],
    depths: &[Cow<'_, Grid<f64>>],
    ref_index: usize,
    occluders: &OccluderSet,
    eps: f64,
) -> BuildOutput {
    let reference = &frames[ref_index];
    let ref_depth = depths[ref_index].as_ref();
    let (w, h) = ref_depth.dims();
    let fg_mask = extract_fg_mask(&reference.instances, occluders);

    let per_frame = |i: usize| -> (Option<CandidateBuffer>, Rejections) {
        let mut rej = Rejections::default();
        if i == ref_index {
            return (None, rej);
        }
        let t_ref_i = relative_pose(&reference.pose, &frames[i].pose);
        let (samples, _) = warp_frame(&frames[i], i, &t_ref_i, &reference.camera);
        let mut buf: CandidateBuffer = vec![None; w * h];
        for s in &samples {
            let p = s.target.index(w);
            if !fg_mask[p] {
                continue;
            }
            rej.in_foreground += 1;
            if !(s.depth > ref_depth[p] + eps) {
                rej.not_behind += 1;
                continue;
            }
            if s.instance == reference.instances[p] {
                rej.same_instance += 1;
                continue;
            }
            if occluders.contains(s.instance) {
                rej.occluder += 1;
                continue;
            }
            let c = Candidate {
                depth: s.depth,
                frame: i,
                source_index: s.source_index,
                color: s.color,
                instance: s.instance,
            };
            if buf[p].as_ref().is_none_or(|b| c.beats(b)) {
                buf[p] = Some(c);
            }
        }
        (Some(buf), rej)
    };

    let (best, rej) = par::map_reduce(
        frames.len(),
        per_frame,
        || (None, Rejections::default()),
        |(a, ra), (b, rb)| {
            (
                merge_buffers(a, b),
                Rejections {
                    in_foreground: ra.in_foreground + rb.in_foreground,
                    not_behind: ra.not_behind + rb.not_behind,
                    same_instance: ra.same_instance + rb.same_instance,
                    occluder: ra.occluder + rb.occluder,
                },
            )
        },
    );
    let best = best.unwrap_or_else(|| vec![None; w * h]);

    let foreground = RgbdLayer {
        color: reference.color.clone(),
        depth: ref_depth.clone(),
        valid: Grid::filled(w, h, true),
    };
    let mut background = foreground.clone();
    let mut background_instance = reference.instances.map(|&id| Some(id));
    let mut background_frame = Grid::filled(w, h, Some(ref_index));
    let mut filled = 0;
    for i in 0..w * h {
        if !fg_mask[i] {
            continue;
        }
        match best[i] {
            Some(c) => {
                background.set(i, c.color, c.depth);
                background_instance[i] = Some(c.instance);
                background_frame[i] = Some(c.frame);
                filled += 1;
            }
            None => {
                background.clear(i);
                background_instance[i] = None;
                background_frame[i] = None;
            }
        }
    }

    let fg_count = fg_mask.count();
    let stats = BuildStats {
        frames: frames.len(),
        ref_index,
        eps_occ: eps,
        occluders: occluders.iter().collect(),
        warp: Vec::new(),
        samples_in_foreground: rej.in_foreground,
        rejected_not_behind: rej.not_behind,
        rejected_same_instance: rej.same_instance,
        rejected_occluder: rej.occluder,
        accepted: rej.in_foreground - rej.not_behind - rej.same_instance - rej.occluder,
        foreground_pixels: fg_count,
        background_filled: filled,
        background_holes: fg_count - filled,
    };
    let ldi = LayeredDepthImage {
        foreground,
        background,
        fg_mask,
        camera: reference.camera,
        ref_pose: reference.pose,
    };
    debug_assert!(ldi.validate().is_ok());
    BuildOutput {
        ldi,
        occluders: occluders.clone(),
        background_instance,
        background_frame,
        stats,
    }
}

fn validate_window(frames: &[RgbdInstanceFrame], ref_index: usize) -> Result<()> {
    if frames.len() < 2 {
        return Err(Error::Config(format!("need at least 2 frames, got {}", frames.len())));
    }
    if ref_index >= frames.len() {
        return Err(Error::Config(format!(
            "reference index {ref_index} outside window of {} frames",
            frames.len()
        )));
    }
    let dims = frames[ref_index].color.dims();
    for (i, f) in frames.iter().enumerate() {
        f.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("frame {i}: {m}")),
            other => other,
        })?;
        if f.color.dims() != dims {
            return Err(Error::Config(format!(
                "frame {i} is {}x{}, reference is {}x{}",
                f.color.width(),
                f.color.height(),
                dims.0,
                dims.1
            )));
        }
    }
    Ok(())
}

fn validate_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps_occ {eps} must be finite and >= 0")));
    }
    Ok(())
}

fn check_dense(depth: &Grid<f64>) -> Result<()> {
    if let Some(i) = depth.iter().position(|&d| d <= 0.0) {
        let (x, y) = depth.coords(i);
        return Err(Error::InvalidInput(format!(
            "reference depth must be dense; missing at ({x}, {y})"
        )));
    }
    Ok(())
}
