use ldi_core::builder::{build_ldi, BuildConfig};
use ldi_core::container::encode;
use ldi_core::inpaint::{inpaint, DiffusionBackend, InpaintRequest};
use ldi_core::mask::{apply_mask, dilate_cross, Normalization, SENTINEL};
use ldi_core::metrics::ssim;
use ldi_core::render::{render_ldi, RenderOptions, ViewPerturbation};
use ldi_core::synth::standard_fixtures;

/// Runs the whole pipeline on one fixture and returns everything it made.
fn pipeline() -> (Vec<u8>, Vec<u8>, Vec<u64>, u64) {
    let fx = &standard_fixtures()[3];
    let out = build_ldi(&fx.frames(), &BuildConfig::default()).unwrap();
    let ldi = &out.ldi;
    let container = encode(ldi).unwrap();

    let view = render_ldi(ldi, &ViewPerturbation::translation(0.07, -0.03, 0.0), &RenderOptions::default()).unwrap();
    let rendered: Vec<u8> = view.color.iter().flatten().copied().collect();

    let hole = dilate_cross(&ldi.fg_mask, 5).unwrap();
    let norm = Normalization::default();
    let input = apply_mask(&norm.normalize(&ldi.foreground.color, &ldi.foreground.depth).unwrap(), &hole, SENTINEL).unwrap();
    let filled = inpaint(&InpaintRequest::new(input, hole).unwrap(), &DiffusionBackend::default()).unwrap();
    let bits = filled.color.iter().flatten().chain(filled.depth.iter()).map(|v| v.to_bits()).collect();

    let s = ssim(&ldi.foreground.color, &view.color).unwrap();
    (container, rendered, bits, s.to_bits())
}

#[test]
fn one_thread_and_many_threads_agree_bitwise() {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let a = single.install(pipeline);
    let b = many.install(pipeline);
    assert!(a == b, "parallel and sequential runs differ");
    assert!(pipeline() == a);
}
