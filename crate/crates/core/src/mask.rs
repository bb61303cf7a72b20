//! Turning segmentation scores into the diminishing mask, and marking the
//! masked pixels in normalized RGB-D input for an inpainting backend.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Rgb};
use crate::ldi::SegScoreMap;
use crate::par;

/// Score threshold; below 0.5 so uncertain pixels go to the foreground.
pub const DEFAULT_THRESHOLD: f64 = 0.45;
/// Extent of the cross-shaped structuring element, in pixels.
pub const DEFAULT_DILATE_SIZE: usize = 5;
/// Value written into hole pixels of normalized `[-1, 1]` input.
pub const SENTINEL: f64 = -2.0;
/// Depth mapped to +1 during normalization, in meters.
pub const DEFAULT_DEPTH_MAX: f64 = 10.0;

/// `mask(p) = score(p) >= tau`.
pub fn threshold_scores(scores: &SegScoreMap, tau: f64) -> Result<Mask> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {tau} must lie in (0, 1)")));
    }
    Ok(scores.scores().map(|&s| s >= tau))
}

/// Binary dilation with a plus-shaped element spanning `size` pixels along
/// each axis. The image border clips the element.
pub fn dilate_cross(mask: &Mask, size: usize) -> Result<Mask> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "cross dilation size {size} must be odd and >= 1"
        )));
    }
    let r = (size / 2) as isize;
    let (w, h) = mask.dims();
    let mut out = Grid::filled(w, h, false);
    par::for_each_row(out.as_mut_slice(), w, |y, row| {
        let y = y as isize;
        for (x, o) in row.iter_mut().enumerate() {
            let x = x as isize;
            *o = (-r..=r).any(|d| {
                mask.checked(x + d, y).copied().unwrap_or(false) || mask.checked(x, y + d).copied().unwrap_or(false)
            });
        }
    });
    Ok(out)
}

/// RGB-D planes scaled to `[-1, 1]` per channel group.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedRgbd {
    pub color: Grid<[f64; 3]>,
    pub depth: Grid<f64>,
}

/// Linear maps from 8-bit color and `[0, depth_max]` meters to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub depth_max: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            depth_max: DEFAULT_DEPTH_MAX,
        }
    }
}

impl Normalization {
    pub fn new(depth_max: f64) -> Result<Self> {
        if !(depth_max > 0.0 && depth_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("depth_max {depth_max} must be positive")));
        }
        Ok(Normalization { depth_max })
    }

    pub fn color_to_unit(&self, c: u8) -> f64 {
        c as f64 / 127.5 - 1.0
    }

    pub fn color_from_unit(&self, v: f64) -> u8 {
        ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
    }

    pub fn depth_to_unit(&self, d: f64) -> f64 {
        (d / self.depth_max).clamp(0.0, 1.0) * 2.0 - 1.0
    }

    pub fn depth_from_unit(&self, v: f64) -> f64 {
        (v.clamp(-1.0, 1.0) + 1.0) * 0.5 * self.depth_max
    }

    pub fn normalize(&self, color: &Grid<Rgb>, depth: &Grid<f64>) -> Result<NormalizedRgbd> {
        if !color.same_dims(depth) {
            return Err(Error::InvalidInput("color and depth sizes differ".into()));
        }
        Ok(NormalizedRgbd {
            color: color.map(|c| c.map(|v| self.color_to_unit(v))),
            depth: depth.map(|&d| self.depth_to_unit(d)),
        })
    }

    pub fn denormalize(&self, n: &NormalizedRgbd) -> (Grid<Rgb>, Grid<f64>) {
        (
            n.color.map(|c| c.map(|v| self.color_from_unit(v))),
            n.depth.map(|&v| self.depth_from_unit(v)),
        )
    }
}

/// Writes `sentinel` into every channel of every masked pixel.
pub fn apply_mask(input: &NormalizedRgbd, mask: &Mask, sentinel: f64) -> Result<NormalizedRgbd> {
    if !input.color.same_dims(mask) || !input.depth.same_dims(mask) {
        return Err(Error::InvalidInput("mask size differs from the RGB-D planes".into()));
    }
    Ok(NormalizedRgbd {
        color: input.color.zip_map(mask, |&c, &m| if m { [sentinel; 3] } else { c }),
        depth: input.depth.zip_map(mask, |&d, &m| if m { sentinel } else { d }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(v: f64) -> SegScoreMap {
        SegScoreMap::new(Grid::filled(4, 3, v)).unwrap()
    }

    #[test]
    fn published_defaults() {
        assert_eq!(DEFAULT_THRESHOLD, 0.45);
        assert_eq!(DEFAULT_DILATE_SIZE, 5);
        assert_eq!(SENTINEL, -2.0);
    }

    #[test]
    fn threshold_is_boundary_inclusive() {
        assert_eq!(threshold_scores(&scores(0.45), 0.45).unwrap().count(), 12);
        assert_eq!(threshold_scores(&scores(0.0), 0.45).unwrap().count(), 0);
        assert_eq!(threshold_scores(&scores(1.0), 0.45).unwrap().count(), 12);
        assert!(threshold_scores(&scores(0.5), 1.0).is_err());
        assert!(threshold_scores(&scores(0.5), 0.0).is_err());
    }

    #[test]
    fn single_pixel_cross_of_five() {
        let mut m = Grid::filled(9, 9, false);
        m[(4, 4)] = true;
        let d = dilate_cross(&m, 5).unwrap();
        let expected = Grid::from_fn(9, 9, |x, y| {
            let (dx, dy) = (x.abs_diff(4), y.abs_diff(4));
            (dx == 0 && dy <= 2) || (dy == 0 && dx <= 2)
        });
        assert_eq!(d.count(), 9);
        assert_eq!(d, expected);
    }

    #[test]
    fn dilation_clips_at_border() {
        let mut m = Grid::filled(5, 5, false);
        m[(0, 0)] = true;
        assert_eq!(dilate_cross(&m, 5).unwrap().count(), 5);
    }

    #[test]
    fn dilation_rejects_even_size() {
        let m = Grid::filled(3, 3, false);
        assert!(dilate_cross(&m, 4).is_err());
        assert!(dilate_cross(&m, 0).is_err());
        assert!(!dilate_cross(&m, 5).unwrap().any());
    }

    #[test]
    fn sentinel_application() {
        let norm = Normalization::default();
        let color = Grid::from_fn(3, 2, |x, y| [x as u8 * 100, y as u8 * 200, 255]);
        let depth = Grid::from_fn(3, 2, |x, _| 1.0 + x as f64);
        let n = norm.normalize(&color, &depth).unwrap();
        assert!(n.color.iter().flatten().chain(n.depth.iter()).all(|v| (-1.0..=1.0).contains(v)));

        let empty = Grid::filled(3, 2, false);
        assert_eq!(apply_mask(&n, &empty, SENTINEL).unwrap(), n);
        let full = Grid::filled(3, 2, true);
        let all = apply_mask(&n, &full, SENTINEL).unwrap();
        assert!(all.color.iter().flatten().chain(all.depth.iter()).all(|&v| v == SENTINEL));
    }

    #[test]
    fn normalization_round_trip() {
        let norm = Normalization::new(8.0).unwrap();
        for c in 0..=255u8 {
            assert_eq!(norm.color_from_unit(norm.color_to_unit(c)), c);
        }
        assert!((norm.depth_from_unit(norm.depth_to_unit(3.25)) - 3.25).abs() < 1e-12);
        assert!(Normalization::new(0.0).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        proptest::collection::vec(any::<bool>(), 64).prop_map(|v| Grid::from_vec(8, 8, v).unwrap())
    }

    proptest! {
        #[test]
        fn dilate_size_one_is_identity(m in arb_mask()) {
            prop_assert_eq!(dilate_cross(&m, 1).unwrap(), m);
        }

        #[test]
        fn dilation_is_monotone(a in arb_mask(), b in arb_mask(), size in prop::sample::select(vec![1usize, 3, 5, 7])) {
            let union = a.or(&b);
            prop_assert!(dilate_cross(&a, size).unwrap().is_subset_of(&dilate_cross(&union, size).unwrap()));
            prop_assert!(a.is_subset_of(&dilate_cross(&a, size).unwrap()));
        }

        #[test]
        fn threshold_monotone_in_tau(v in proptest::collection::vec(0.0..=1.0f64, 64), t1 in 0.01..0.99f64, t2 in 0.01..0.99f64) {
            let s = SegScoreMap::new(Grid::from_vec(8, 8, v).unwrap()).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(threshold_scores(&s, hi).unwrap().is_subset_of(&threshold_scores(&s, lo).unwrap()));
        }

        #[test]
        fn apply_mask_is_idempotent(m in arb_mask(), seed in 0u8..255) {
            let norm = Normalization::default();
            let color = Grid::from_fn(8, 8, |x, y| [seed.wrapping_add(x as u8), y as u8, 7]);
            let depth = Grid::from_fn(8, 8, |x, y| 0.5 + (x * y) as f64 * 0.1);
            let n = norm.normalize(&color, &depth).unwrap();
            let once = apply_mask(&n, &m, SENTINEL).unwrap();
            prop_assert_eq!(apply_mask(&once, &m, SENTINEL).unwrap(), once);
        }
    }
}
