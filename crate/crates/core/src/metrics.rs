//! Evaluation measures for depth, color, masks and completed backgrounds.
//!
//! Scales follow common reporting practice: depth errors in meters, RGB rms
//! in 8-bit levels, MAE on intensities in `[0, 1]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Rgb};
use crate::ldi::{LayeredDepthImage, SegScoreMap};

fn check_region<T, U>(a: &Grid<T>, b: &Grid<U>, region: &Mask, name: &'static str) -> Result<usize> {
    if !a.same_dims(b) || !a.same_dims(region) {
        return Err(Error::InvalidInput(format!("{name}: plane sizes differ")));
    }
    match region.count() {
        0 => Err(Error::UndefinedMetric(name)),
        n => Ok(n),
    }
}

/// Mean of `|pred - gt| / gt` over `region`.
pub fn rel_error(pred: &Grid<f64>, gt: &Grid<f64>, region: &Mask) -> Result<f64> {
    let n = check_region(pred, gt, region, "rel")?;
    let mut sum = 0.0;
    for i in 0..gt.len() {
        if region[i] {
            if !(gt[i] > 0.0) {
                return Err(Error::InvalidInput(format!("rel: ground truth {} is not positive", gt[i])));
            }
            sum += (pred[i] - gt[i]).abs() / gt[i];
        }
    }
    Ok(sum / n as f64)
}

/// Root mean square difference over `region`.
pub fn rms_error(pred: &Grid<f64>, gt: &Grid<f64>, region: &Mask) -> Result<f64> {
    let n = check_region(pred, gt, region, "rms")?;
    let sum: f64 = (0..gt.len())
        .filter(|&i| region[i])
        .map(|i| (pred[i] - gt[i]).powi(2))
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// RMS over all three channels in 8-bit levels.
pub fn rms_rgb(pred: &Grid<Rgb>, gt: &Grid<Rgb>, region: &Mask) -> Result<f64> {
    let n = check_region(pred, gt, region, "rms_rgb")?;
    let sum: f64 = (0..gt.len())
        .filter(|&i| region[i])
        .flat_map(|i| (0..3).map(move |c| (pred[i][c] as f64 - gt[i][c] as f64).powi(2)))
        .sum();
    Ok((sum / (3 * n) as f64).sqrt())
}

/// Mean absolute difference of intensities scaled to `[0, 1]`.
pub fn mae(a: &Grid<Rgb>, b: &Grid<Rgb>) -> Result<f64> {
    let all = Grid::filled(a.width(), a.height(), true);
    mae_in(a, b, &all)
}

pub fn mae_in(a: &Grid<Rgb>, b: &Grid<Rgb>, region: &Mask) -> Result<f64> {
    let n = check_region(a, b, region, "mae")?;
    let sum: f64 = (0..a.len())
        .filter(|&i| region[i])
        .flat_map(|i| (0..3).map(move |c| (a[i][c] as f64 - b[i][c] as f64).abs() / 255.0))
        .sum();
    Ok(sum / (3 * n) as f64)
}

/// Intersection over union of the pixels equal to `positive` in both masks.
/// Two masks without any such pixel score 1.
pub fn iou(pred: &Mask, gt: &Mask, positive: bool) -> Result<f64> {
    if !pred.same_dims(gt) {
        return Err(Error::InvalidInput("iou: mask sizes differ".into()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        let (p, g) = (p == positive, g == positive);
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Fraction of the largest residual at which berHu switches from linear to
/// quadratic.
pub const BERHU_THRESHOLD_FRACTION: f64 = 0.2;

/// Reverse Huber of a single residual with threshold `c`.
pub fn berhu_term(e: f64, c: f64) -> f64 {
    let a = e.abs();
    if a <= c {
        a
    } else {
        (e * e + c * c) / (2.0 * c)
    }
}

/// Mean reverse Huber loss over `region`, with `c` set to a fifth of the
/// largest absolute residual in the region.
pub fn berhu(pred: &Grid<f64>, gt: &Grid<f64>, region: &Mask) -> Result<f64> {
    let n = check_region(pred, gt, region, "berhu")?;
    let residuals: Vec<f64> = (0..gt.len()).filter(|&i| region[i]).map(|i| pred[i] - gt[i]).collect();
    let c = BERHU_THRESHOLD_FRACTION * residuals.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(residuals.iter().map(|&e| berhu_term(e, c)).sum::<f64>() / n as f64)
}

/// Mean squared difference between scores and `{0, 1}` mask targets.
pub fn masked_l2(pred: &SegScoreMap, gt: &Mask) -> Result<f64> {
    let s = pred.scores();
    if !s.same_dims(gt) {
        return Err(Error::InvalidInput("masked_l2: sizes differ".into()));
    }
    if s.is_empty() {
        return Err(Error::UndefinedMetric("masked_l2"));
    }
    let sum: f64 = s
        .iter()
        .zip(gt.iter())
        .map(|(&v, &t)| (v - if t { 1.0 } else { 0.0 }).powi(2))
        .sum();
    Ok(sum / s.len() as f64)
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_DYNAMIC_RANGE: f64 = 255.0;

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - r;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM of two single-channel planes on the 0–255 scale, using an
/// 11×11 Gaussian window (σ = 1.5) over every fully inside position.
pub fn ssim_plane(a: &Grid<f64>, b: &Grid<f64>) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::InvalidInput("ssim: image sizes differ".into()));
    }
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let g = gaussian_window();
    let c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE).powi(2);
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let total = crate::par::sum_range(ow * oh, |k| {
        let (x0, y0) = (k % ow, k / ow);
        let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (j, gy) in g.iter().enumerate() {
            for (i, gx) in g.iter().enumerate() {
                let wt = gx * gy;
                let va = a[(x0 + i, y0 + j)];
                let vb = b[(x0 + i, y0 + j)];
                ma += wt * va;
                mb += wt * vb;
                saa += wt * va * va;
                sbb += wt * vb * vb;
                sab += wt * va * vb;
            }
        }
        let var_a = saa - ma * ma;
        let var_b = sbb - mb * mb;
        let cov = sab - ma * mb;
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
    });
    Ok(total / (ow * oh) as f64)
}

/// SSIM of RGB images, averaged over channels.
pub fn ssim(a: &Grid<Rgb>, b: &Grid<Rgb>) -> Result<f64> {
    let mut sum = 0.0;
    for c in 0..3 {
        sum += ssim_plane(&a.map(|p| p[c] as f64), &b.map(|p| p[c] as f64))?;
    }
    Ok(sum / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Area {
    Whole,
    Inpainted,
}

/// Metrics for one image area. `None` marks a metric that is undefined
/// there (empty region, or SSIM outside the whole-image area).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub area: Area,
    pub pixel_count: usize,
    pub rel: Option<f64>,
    pub rms_depth: Option<f64>,
    pub rms_rgb: Option<f64>,
    pub ssim: Option<f64>,
    pub mae: Option<f64>,
    pub iou_fg: Option<f64>,
    pub iou_bg: Option<f64>,
}

impl MetricReport {
    pub fn is_defined(&self) -> bool {
        self.pixel_count > 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Restrict the inpainted area with the ground-truth mask instead of the
    /// predicted one.
    pub use_gt_mask: bool,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Compares predicted and ground-truth background layers on the whole image
/// (every pixel with a valid ground-truth background) and on the inpainted
/// area (those pixels inside the foreground mask). Pixels where the
/// predicted background is invalid count as depth 0 and black.
pub fn evaluate_areas(
    pred: &LayeredDepthImage,
    gt: &LayeredDepthImage,
    opts: &EvalOptions,
) -> Result<(MetricReport, MetricReport)> {
    if pred.fg_mask.dims() != gt.fg_mask.dims() {
        return Err(Error::InvalidInput("predicted and ground-truth LDIs differ in size".into()));
    }
    let gt_valid = &gt.background.valid;
    let mask = if opts.use_gt_mask { &gt.fg_mask } else { &pred.fg_mask };
    let inpainted = mask.and(gt_valid);

    let iou_fg = Some(iou(&pred.fg_mask, &gt.fg_mask, true)?);
    let iou_bg = Some(iou(&pred.fg_mask, &gt.fg_mask, false)?);

    // SSIM over full frames with invalid ground truth blanked in both
    let blank = |c: &Grid<Rgb>| c.zip_map(gt_valid, |&p, &v| if v { p } else { [0; 3] });
    let ssim_whole = if gt_valid.any() {
        Some(ssim(&blank(&pred.background.color), &blank(&gt.background.color))?)
    } else {
        None
    };

    let report = |area: Area, region: &Mask, ssim: Option<f64>| -> Result<MetricReport> {
        let p = &pred.background;
        let g = &gt.background;
        Ok(MetricReport {
            area,
            pixel_count: region.count(),
            rel: defined(rel_error(&p.depth, &g.depth, region))?,
            rms_depth: defined(rms_error(&p.depth, &g.depth, region))?,
            rms_rgb: defined(rms_rgb(&p.color, &g.color, region))?,
            ssim,
            mae: defined(mae_in(&p.color, &g.color, region))?,
            iou_fg,
            iou_bg,
        })
    };
    Ok((
        report(Area::Whole, gt_valid, ssim_whole)?,
        report(Area::Inpainted, &inpainted, None)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all(w: usize, h: usize) -> Mask {
        Grid::filled(w, h, true)
    }

    fn ramp(w: usize, h: usize) -> Grid<f64> {
        Grid::from_fn(w, h, |x, y| 1.0 + 0.1 * x as f64 + 0.05 * y as f64)
    }

    #[test]
    fn rel_examples() {
        let gt = ramp(8, 8);
        assert_eq!(rel_error(&gt, &gt, &all(8, 8)).unwrap(), 0.0);
        let scaled = gt.map(|v| 1.1 * v);
        assert!((rel_error(&scaled, &gt, &all(8, 8)).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(
            rel_error(&gt, &gt, &Grid::filled(8, 8, false)),
            Err(Error::UndefinedMetric("rel"))
        ));
    }

    #[test]
    fn rms_examples() {
        let gt = ramp(6, 4);
        let off = gt.map(|v| v + 0.5);
        assert!((rms_error(&off, &gt, &all(6, 4)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rms_error(&gt, &gt, &all(6, 4)).unwrap(), 0.0);
        let alt = Grid::from_fn(6, 4, |x, y| gt[(x, y)] + if (x + y) % 2 == 0 { 1.0 } else { -1.0 });
        assert!((rms_error(&alt, &gt, &all(6, 4)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_examples() {
        let a = Grid::from_fn(4, 15, |_, y| y <= 9);
        let b = Grid::from_fn(4, 15, |_, y| (5..=14).contains(&y));
        assert_eq!(iou(&a, &b, true).unwrap(), 1.0 / 3.0);
        assert_eq!(iou(&a, &a, true).unwrap(), 1.0);
        let c = Grid::from_fn(4, 15, |_, y| y >= 10);
        assert_eq!(iou(&a, &c, true).unwrap(), 0.0);
        let none = Grid::filled(4, 15, false);
        assert_eq!(iou(&none, &none, true).unwrap(), 1.0);
    }

    #[test]
    fn mae_examples() {
        let a = Grid::filled(3, 3, [100u8, 100, 100]);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let lo = Grid::filled(3, 3, [0u8, 0, 0]);
        let hi = Grid::filled(3, 3, [255u8, 255, 255]);
        assert_eq!(mae(&lo, &hi).unwrap(), 1.0);
        let b = Grid::filled(3, 3, [51u8, 51, 51]);
        assert!((mae(&lo, &b).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn berhu_branches() {
        assert_eq!(berhu_term(0.5, 1.0), 0.5);
        assert_eq!(berhu_term(2.0, 1.0), 2.5);
        assert_eq!(berhu_term(-2.0, 1.0), 2.5);
        let c = 0.37;
        assert_eq!(berhu_term(c, c), c);
        assert!(((c * c + c * c) / (2.0 * c) - c).abs() < 1e-15);
        let gt = ramp(4, 4);
        assert_eq!(berhu(&gt, &gt, &all(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn berhu_uses_fifth_of_max_residual() {
        let gt = Grid::filled(2, 1, 0.0);
        let pred = Grid::from_vec(2, 1, vec![5.0, 0.5]).unwrap();
        // c = 1: 5 → (25 + 1) / 2 = 13, 0.5 → 0.5
        assert!((berhu(&pred, &gt, &all(2, 1)).unwrap() - 6.75).abs() < 1e-12);
    }

    #[test]
    fn masked_l2_examples() {
        let gt = Grid::from_fn(4, 4, |x, _| x < 2);
        let perfect = SegScoreMap::new(gt.map(|&b| if b { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(masked_l2(&perfect, &gt).unwrap(), 0.0);
        assert_eq!(masked_l2(&perfect.inverted(), &gt).unwrap(), 1.0);
        let half = SegScoreMap::new(Grid::filled(4, 4, 0.5)).unwrap();
        assert_eq!(masked_l2(&half, &gt).unwrap(), 0.25);
    }

    #[test]
    fn ssim_identity_and_window_check() {
        let img = Grid::from_fn(32, 32, |x, y| [(x * 8) as u8, (y * 8) as u8, ((x + y) * 4) as u8]);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-9);
        let small = Grid::filled(10, 40, [0u8; 3]);
        assert!(ssim(&small, &small).is_err());
    }

    #[test]
    fn ssim_of_inverted_checkerboard_is_negative() {
        let a = Grid::from_fn(32, 32, |x, y| if (x / 4 + y / 4) % 2 == 0 { [30u8; 3] } else { [220u8; 3] });
        let b = a.map(|p| p.map(|v| 255 - v));
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rel_is_scale_covariant(s in 0.01..5.0f64) {
            let gt = ramp(5, 5);
            let pred = gt.map(|v| s * v);
            prop_assert!((rel_error(&pred, &gt, &all(5, 5)).unwrap() - (s - 1.0).abs()).abs() < 1e-12);
        }

        #[test]
        fn ssim_is_symmetric(a in proptest::collection::vec(any::<u8>(), 16 * 16), b in proptest::collection::vec(any::<u8>(), 16 * 16)) {
            let ga = Grid::from_vec(16, 16, a).unwrap().map(|&v| v as f64);
            let gb = Grid::from_vec(16, 16, b).unwrap().map(|&v| v as f64);
            let ab = ssim_plane(&ga, &gb).unwrap();
            prop_assert!((ab - ssim_plane(&gb, &ga).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_symmetric_and_monotone(a in proptest::collection::vec(any::<bool>(), 36), b in proptest::collection::vec(any::<bool>(), 36), extra in 0usize..36) {
            let ga = Grid::from_vec(6, 6, a).unwrap();
            let gb = Grid::from_vec(6, 6, b).unwrap();
            let base = iou(&ga, &gb, true).unwrap();
            prop_assert_eq!(base, iou(&gb, &ga, true).unwrap());
            let (mut a2, mut b2) = (ga.clone(), gb.clone());
            a2[extra] = true;
            b2[extra] = true;
            prop_assert!(iou(&a2, &b2, true).unwrap() >= base);
        }

        #[test]
        fn berhu_continuous_at_threshold(c in 1e-3..10.0f64) {
            let lin = berhu_term(c, c);
            let quad = (c * c + c * c) / (2.0 * c);
            prop_assert!((lin - quad).abs() <= 1e-12 * c);
            prop_assert!((berhu_term(c * (1.0 + 1e-9), c) - c).abs() < 1e-6 * c);
        }
    }
}
