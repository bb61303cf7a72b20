//! Background completion behind a pluggable backend.
//!
//! Requests carry color and depth normalized to `[-1, 1]` with the sentinel
//! written into hole pixels, which is the input contract of learned RGB-D
//! inpainting generators. The crate ships a classical backend that fills each
//! channel with its discrete harmonic extension.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::mask::{NormalizedRgbd, SENTINEL};
use crate::par;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct InpaintRequest {
    pub color: Grid<[f64; 3]>,
    pub depth: Grid<f64>,
    pub hole: Mask,
}

impl InpaintRequest {
    /// Wraps sentinel-marked planes. Every hole pixel must carry the sentinel
    /// in all channels and no other pixel may.
    pub fn new(input: NormalizedRgbd, hole: Mask) -> Result<Self> {
        let req = InpaintRequest {
            color: input.color,
            depth: input.depth,
            hole,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.color.same_dims(&self.depth) || !self.color.same_dims(&self.hole) {
            return Err(Error::InvalidInput("request planes have mismatched dimensions".into()));
        }
        for i in 0..self.hole.len() {
            let c = self.color[i];
            let d = self.depth[i];
            let all_sentinel = c.iter().all(|&v| v == SENTINEL) && d == SENTINEL;
            if self.hole[i] != all_sentinel {
                let (x, y) = self.hole.coords(i);
                return Err(Error::InvalidInput(format!(
                    "pixel ({x}, {y}): hole flag {} disagrees with sentinel marking",
                    self.hole[i]
                )));
            }
            if !self.hole[i] && !c.iter().chain(std::iter::once(&d)).all(|v| (-1.0..=1.0).contains(v)) {
                let (x, y) = self.hole.coords(i);
                return Err(Error::InvalidInput(format!("pixel ({x}, {y}) outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InpaintResult {
    pub color: Grid<[f64; 3]>,
    pub depth: Grid<f64>,
    pub backend_name: String,
}

impl InpaintResult {
    pub fn as_normalized(&self) -> NormalizedRgbd {
        NormalizedRgbd {
            color: self.color.clone(),
            depth: self.depth.clone(),
        }
    }
}

/// Something that can hallucinate the hole region of a request.
pub trait InpaintBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Returns completed planes. Values outside the hole are overwritten by
    /// [`inpaint`] and hole values are clamped to `[-1, 1]`, so a backend
    /// only has to produce finite numbers of the right size.
    fn fill(&self, request: &InpaintRequest) -> Result<InpaintResult>;
}

/// Runs `backend` on `request` and enforces the result contract.
pub fn inpaint(request: &InpaintRequest, backend: &dyn InpaintBackend) -> Result<InpaintResult> {
    request.validate()?;
    if !request.hole.any() {
        return Ok(InpaintResult {
            color: request.color.clone(),
            depth: request.depth.clone(),
            backend_name: backend.name().to_string(),
        });
    }
    if request.hole.iter().all(|&h| h) {
        return Err(Error::Unfillable);
    }
    let mut out = backend.fill(request)?;
    if !out.color.same_dims(&request.hole) || !out.depth.same_dims(&request.hole) {
        return Err(Error::InvalidInput(format!(
            "backend `{}` returned planes of the wrong size",
            backend.name()
        )));
    }
    for i in 0..request.hole.len() {
        if request.hole[i] {
            let c = &mut out.color[i];
            if !c.iter().all(|v| v.is_finite()) || !out.depth[i].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "backend `{}` produced non-finite values",
                    backend.name()
                )));
            }
            c.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
            out.depth[i] = out.depth[i].clamp(-1.0, 1.0);
        } else {
            out.color[i] = request.color[i];
            out.depth[i] = request.depth[i];
        }
    }
    Ok(out)
}

/// Harmonic (Laplace) fill: every hole pixel converges to the mean of its
/// 4-neighbors. Color channels and depth are filled independently.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionBackend {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DiffusionBackend {
    fn default() -> Self {
        DiffusionBackend {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl InpaintBackend for DiffusionBackend {
    fn name(&self) -> &str {
        "diffusion"
    }

    fn fill(&self, req: &InpaintRequest) -> Result<InpaintResult> {
        let channels = par::map_range(4, |c| {
            let plane = if c < 3 {
                req.color.map(|px| px[c])
            } else {
                req.depth.clone()
            };
            let out = diffusion_fill(&plane, &req.hole, self.tol, self.max_iters);
            if !out.converged {
                log::warn!(
                    "diffusion fill of channel {c} stopped after {} iterations (max update {:.3e})",
                    out.iterations,
                    out.max_update
                );
            }
            out.values
        });
        let color = Grid::from_fn(req.color.width(), req.color.height(), |x, y| {
            [channels[0][(x, y)], channels[1][(x, y)], channels[2][(x, y)]]
        });
        Ok(InpaintResult {
            color,
            depth: channels[3].clone(),
            backend_name: self.name().to_string(),
        })
    }
}

/// Looks up a backend by its CLI name.
pub fn backend_by_name(name: &str, tol: f64, max_iters: usize) -> Result<Box<dyn InpaintBackend>> {
    match name {
        "diffusion" => {
            if !(tol > 0.0) || max_iters == 0 {
                return Err(Error::InvalidParameter(format!(
                    "diffusion needs tol > 0 and max_iters > 0 (got {tol}, {max_iters})"
                )));
            }
            Ok(Box::new(DiffusionBackend { tol, max_iters }))
        }
        other => Err(Error::InvalidParameter(format!("unknown inpainting backend `{other}`"))),
    }
}

#[derive(Clone, Debug)]
pub struct DiffusionOutcome {
    pub values: Grid<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest absolute change in the final sweep.
    pub max_update: f64,
}

const NEIGHBORS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// 4-connected components of `mask`, as lists of row-major indices.
pub fn connected_components(mask: &Mask) -> Vec<Vec<usize>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Jacobi iteration towards the discrete harmonic extension of the non-hole
/// values into `hole`. Each hole component starts at the mean of the values
/// bordering it. Stops once the largest update drops below `tol` or after
/// `max_iters` sweeps.
pub fn diffusion_fill(channel: &Grid<f64>, hole: &Mask, tol: f64, max_iters: usize) -> DiffusionOutcome {
    assert!(channel.same_dims(hole), "channel and hole sizes differ");
    let (w, h) = channel.dims();
    let mut values = channel.clone();

    let neighbors = |i: usize| {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        NEIGHBORS.iter().filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then(|| ny as usize * w + nx as usize)
        })
    };

    let mut hole_indices = Vec::new();
    for comp in connected_components(hole) {
        let (sum, n) = comp
            .iter()
            .flat_map(|&i| neighbors(i))
            .filter(|&j| !hole[j])
            .fold((0.0, 0usize), |(s, n), j| (s + channel[j], n + 1));
        let init = if n > 0 { sum / n as f64 } else { 0.0 };
        for &i in &comp {
            values[i] = init;
        }
        hole_indices.extend(comp);
    }
    hole_indices.sort_unstable();

    let mut iterations = 0;
    let mut max_update = 0.0;
    let mut converged = hole_indices.is_empty();
    while !converged && iterations < max_iters {
        let current = &values;
        let next = par::map_slice(&hole_indices, |&i| {
            let (s, n) = neighbors(i).fold((0.0, 0usize), |(s, n), j| (s + current[j], n + 1));
            s / n as f64
        });
        max_update = hole_indices
            .iter()
            .zip(&next)
            .map(|(&i, &v)| (v - values[i]).abs())
            .fold(0.0, f64::max);
        for (&i, v) in hole_indices.iter().zip(next) {
            values[i] = v;
        }
        iterations += 1;
        converged = max_update < tol;
    }

    DiffusionOutcome {
        values,
        converged,
        iterations,
        max_update,
    }
}

fn edge_map(plane: &Grid<f64>) -> Mask {
    let (w, h) = plane.dims();
    let grad = Grid::from_fn(w, h, |x, y| {
        let v = plane[(x, y)];
        let gx = if x + 1 < w { plane[(x + 1, y)] - v } else { 0.0 };
        let gy = if y + 1 < h { plane[(x, y + 1)] - v } else { 0.0 };
        (gx * gx + gy * gy).sqrt()
    });
    let mean = grad.iter().sum::<f64>() / grad.len().max(1) as f64;
    grad.map(|&g| g > mean && g > 1e-12)
}

/// Luma of a normalized or 8-bit color triple.
pub fn luma(c: &[f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Diagnostic agreement between color edges and depth edges, in `[0, 1]`.
///
/// A pixel is an edge when its forward-difference gradient magnitude exceeds
/// the mean magnitude of its plane. The score is the fraction of pixels where
/// the color (luma) and depth edge maps agree. Both maps are scale-free, so
/// depth equal to luma up to an affine change scores 1.
pub fn pair_consistency_score(color: &Grid<[f64; 3]>, depth: &Grid<f64>) -> f64 {
    assert!(color.same_dims(depth), "color and depth sizes differ");
    if depth.is_empty() {
        return 1.0;
    }
    let color_edges = edge_map(&color.map(luma));
    let depth_edges = edge_map(depth);
    let agree = color_edges.iter().zip(depth_edges.iter()).filter(|(a, b)| a == b).count();
    agree as f64 / depth.len() as f64
}
