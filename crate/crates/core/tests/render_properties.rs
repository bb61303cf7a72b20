use ldi_core::builder::{build_ldi, BuildConfig};
use ldi_core::render::{
    four_direction_sweep, render_ldi, render_ldi_detailed, render_single_layer, warp_layer, RenderOptions,
    ViewPerturbation, DEFAULT_SWEEP_MAGNITUDES,
};
use ldi_core::synth::standard_fixtures;
use ldi_core::{CameraIntrinsics, Grid, LayeredDepthImage, RgbdLayer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture_ldis() -> Vec<(&'static str, LayeredDepthImage)> {
    standard_fixtures()
        .iter()
        .map(|fx| (fx.name, build_ldi(&fx.frames(), &BuildConfig::default()).unwrap().ldi))
        .collect()
}

#[test]
fn ldi_voids_are_a_subset_of_single_layer_voids() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = RenderOptions::default();
    let mut strict = 0;
    for (name, ldi) in fixture_ldis() {
        for _ in 0..50 {
            let pert = ViewPerturbation::translation(
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.05..0.05),
            );
            let single = render_single_layer(&ldi, &pert, &opts).unwrap();
            let layered = render_ldi(&ldi, &pert, &opts).unwrap();
            assert!(layered.void.is_subset_of(&single.void), "{name}: {pert:?}");
            strict += (layered.void_count() < single.void_count()) as usize;
        }
    }
    // small boxes leave cracks the closing already fills, so only the
    // fixture set as a whole must show the background helping
    assert!(strict > 0, "background never filled a void");
}

#[test]
fn zero_perturbation_reproduces_the_foreground() {
    for (name, ldi) in fixture_ldis() {
        let view = render_ldi(&ldi, &ViewPerturbation::ZERO, &RenderOptions::default()).unwrap();
        assert_eq!(view.void_count(), 0, "{name}");
        assert_eq!(view.color, ldi.foreground.color, "{name}");
        assert_eq!(view.depth, ldi.foreground.depth, "{name}");
    }
}

/// Colors encode the source column and row so every splat can be traced.
fn coded_plane(k: &CameraIntrinsics, d: f64) -> RgbdLayer {
    RgbdLayer::from_depth(
        Grid::from_fn(k.width, k.height, |x, y| [x as u8, y as u8, 0]),
        Grid::filled(k.width, k.height, d),
    )
    .unwrap()
}

#[test]
fn fronto_parallel_plane_shifts_by_focal_baseline_over_depth() {
    let k = CameraIntrinsics::new(180.0, 180.0, 63.5, 47.5, 128, 96).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let d = rng.random_range(0.5..6.0);
        let (bx, by) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
        let view = warp_layer(&coded_plane(&k, d), &k, &ViewPerturbation::translation(bx, by, 0.0)).unwrap();
        let (sx, sy) = (-k.fx * bx / d, -k.fy * by / d);
        let mut worst: f64 = 0.0;
        for y in 0..k.height {
            for x in 0..k.width {
                if view.void[(x, y)] {
                    continue;
                }
                let [u0, v0, _] = view.color[(x, y)];
                worst = worst
                    .max((x as f64 - (u0 as f64 + sx)).abs())
                    .max((y as f64 - (v0 as f64 + sy)).abs());
                assert!((view.depth[(x, y)] - d).abs() < 1e-12);
            }
        }
        assert!(worst <= 0.5 + 1e-9, "deviation {worst} px at d={d}, b=({bx},{by})");
    }
}

#[test]
fn default_sweep_covers_four_directions_at_two_magnitudes() {
    let sweep = four_direction_sweep(&DEFAULT_SWEEP_MAGNITUDES);
    assert_eq!(sweep.len(), 8);
    assert_eq!(DEFAULT_SWEEP_MAGNITUDES, [0.05, 0.10]);
    let names: Vec<&str> = sweep.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"left_0.05") && names.contains(&"down_0.10"));
}

#[test]
fn background_pixels_only_fill_voids() {
    let (_, ldi) = fixture_ldis().remove(1);
    let pert = ViewPerturbation::translation(0.1, 0.0, 0.0);
    let single = render_single_layer(&ldi, &pert, &RenderOptions::default()).unwrap();
    let detailed = render_ldi_detailed(&ldi, &pert, &RenderOptions::default()).unwrap();
    assert!(detailed.from_background.is_subset_of(&single.void));
    for i in 0..single.void.len() {
        if !single.void[i] {
            assert_eq!(detailed.view.color[i], single.color[i]);
        }
    }
}
