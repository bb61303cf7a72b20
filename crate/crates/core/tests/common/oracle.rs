//! Exhaustive ray-casting reference for planar fixtures.
//!
//! Works from the plane list alone: every ray of every frame is intersected
//! with every plane, all hits kept. Nothing here calls the builder, the
//! warper or the scene's own ray caster.

use std::collections::BTreeSet;

use ldi_core::synth::{Fixture, Plane};
use ldi_core::Rgb;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleHit {
    pub z: f64,
    pub x: f64,
    pub y: f64,
    pub plane: usize,
    pub instance: u32,
}

#[derive(Clone, Debug)]
pub struct OracleBackground {
    pub depth: f64,
    pub color: Rgb,
    pub instance: u32,
}

#[derive(Clone, Debug)]
pub struct OracleLdi {
    pub width: usize,
    pub height: usize,
    pub occluders: BTreeSet<u32>,
    pub fg_mask: Vec<bool>,
    /// Per fg pixel: the first non-occluding surface behind the reference
    /// surface, if any supportive frame sees that exact point.
    pub background: Vec<Option<OracleBackground>>,
    /// Per fg pixel: the surface the background should come from, seen or
    /// not.
    pub hidden_surface: Vec<Option<OracleBackground>>,
}

fn inside(p: &Plane, x: f64, y: f64) -> bool {
    x >= p.x_range.0 && x < p.x_range.1 && y >= p.y_range.0 && y < p.y_range.1
}

/// All plane hits of the pixel-center ray `(u, v)` from a camera at `origin`
/// with identity orientation, nearest first.
pub fn all_hits(fx: &Fixture, origin: [f64; 3], u: f64, v: f64) -> Vec<OracleHit> {
    let k = &fx.scene.camera;
    let (dx, dy) = ((u - k.cx) / k.fx, (v - k.cy) / k.fy);
    let mut hits: Vec<OracleHit> = fx
        .scene
        .planes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let z = p.z - origin[2];
            if z <= 0.0 {
                return None;
            }
            let (x, y) = (origin[0] + dx * z, origin[1] + dy * z);
            inside(p, x, y).then_some(OracleHit {
                z,
                x,
                y,
                plane: i,
                instance: p.instance,
            })
        })
        .collect();
    // equal depths: earlier planes win, as in the plane list order
    hits.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.plane.cmp(&b.plane)));
    hits
}

fn origins(fx: &Fixture) -> Vec<[f64; 3]> {
    fx.poses()
        .iter()
        .map(|p| {
            assert!(
                (p.rotation() - nalgebra::Matrix3::identity()).abs().max() == 0.0,
                "oracle handles translation-only sweeps"
            );
            let t = p.translation();
            [t.x, t.y, t.z]
        })
        .collect()
}

/// Reference LDI for `fx` with the middle frame as reference.
pub fn oracle_ldi(fx: &Fixture, eps: f64) -> OracleLdi {
    let k = &fx.scene.camera;
    let (w, h) = (k.width, k.height);
    let origins = origins(fx);
    let ref_index = origins.len() / 2;

    // an instance occludes if it is the first surface on some ray with a
    // different instance more than eps behind it
    let mut occluders = BTreeSet::new();
    for o in &origins {
        for v in 0..h {
            for u in 0..w {
                let hits = all_hits(fx, *o, u as f64, v as f64);
                if let Some(first) = hits.first() {
                    if first.instance != 0
                        && hits[1..].iter().any(|b| b.instance != first.instance && b.z - first.z > eps)
                    {
                        occluders.insert(first.instance);
                    }
                }
            }
        }
    }

    let o_ref = origins[ref_index];
    let mut fg_mask = vec![false; w * h];
    let mut background = vec![None; w * h];
    let mut hidden_surface = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let hits = all_hits(fx, o_ref, u as f64, v as f64);
            let Some(first) = hits.first() else { continue };
            if !occluders.contains(&first.instance) {
                continue;
            }
            fg_mask[i] = true;
            let Some(s) = hits
                .iter()
                .find(|s| !occluders.contains(&s.instance) && s.instance != first.instance && s.z > first.z + eps)
            else {
                continue;
            };
            let plane = &fx.scene.planes[s.plane];
            let surface = OracleBackground {
                depth: s.z,
                color: plane.texture.at(s.x, s.y),
                instance: s.instance,
            };
            hidden_surface[i] = Some(surface.clone());

            // the same world point seen from a supportive frame
            let seen = origins.iter().enumerate().any(|(j, o)| {
                if j == ref_index {
                    return false;
                }
                let z = plane.z - o[2];
                let uj = k.fx * (s.x - o[0]) / z + k.cx;
                let vj = k.fy * (s.y - o[1]) / z + k.cy;
                let (ur, vr) = (uj.round(), vj.round());
                assert!(
                    (uj - ur).abs() < 1e-6 && (vj - vr).abs() < 1e-6,
                    "{}: background point lands off pixel centers; fixture not aligned",
                    fx.name
                );
                if ur < 0.0 || vr < 0.0 || ur >= w as f64 || vr >= h as f64 {
                    return false;
                }
                all_hits(fx, *o, ur, vr)
                    .first()
                    .is_some_and(|f| f.plane == s.plane)
            });
            if seen {
                background[i] = Some(surface);
            }
        }
    }
    OracleLdi {
        width: w,
        height: h,
        occluders,
        fg_mask,
        background,
        hidden_surface,
    }
}
