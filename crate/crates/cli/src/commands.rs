use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use ldi_core::builder::{build_ldi, BuildConfig};
use ldi_core::container::{load_ldi, save_ldi};
use ldi_core::imageio;
use ldi_core::inpaint::{backend_by_name, inpaint, pair_consistency_score, InpaintRequest};
use ldi_core::mask::{apply_mask, dilate_cross, threshold_scores, Normalization, SENTINEL};
use ldi_core::metadata::Metadata;
use ldi_core::metrics::{evaluate_areas, EvalOptions, MetricReport};
use ldi_core::render::{four_direction_sweep, render_ldi, render_single_layer, RenderOptions, ViewPerturbation};
use ldi_core::sequence::{load_sequence, write_sequence, SequenceOptions};
use ldi_core::synth::standard_fixtures;
use ldi_core::{Error, LayeredDepthImage, Mask, Result, RgbdLayer, RigidPose};

use crate::service::{self, AppState};
use crate::{BuildArgs, Cli, DiminishArgs, EvalArgs, RenderArgs, ServeArgs, SynthArgs};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// `scene.ldi` + `_fgmask.png` → `scene_fgmask.png`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn build(cli: &Cli, a: &BuildArgs) -> Result<()> {
    let dir = cli.resolve(&a.sequence);
    let opts = SequenceOptions {
        range_kind: a.range_kind.map(Into::into),
        pose_convention: a.pose_convention.map(Into::into),
        start: a.start,
        window: a.window,
    };
    let seq = load_sequence(&dir, &opts)?;
    let config = BuildConfig {
        ref_index: a.ref_index,
        eps_occ: a.eps_occ,
    };
    let out = build_ldi(&seq.frames, &config)?;
    let s = &out.stats;
    log::info!(
        "reference {} ({}), occluders {:?}, {} foreground pixels, {} filled, {} holes",
        s.ref_index,
        seq.names[s.ref_index],
        s.occluders,
        s.foreground_pixels,
        s.background_filled,
        s.background_holes
    );

    let ldi_path = cli.resolve(&a.out);
    save_ldi(&out.ldi, &ldi_path)?;
    let mask_path = a.mask_out.as_ref().map_or_else(|| sibling(&ldi_path, "_fgmask.png"), |p| cli.resolve(p));
    imageio::write_mask(&mask_path, &out.ldi.fg_mask)?;
    let stats_path = a
        .stats_out
        .as_ref()
        .map_or_else(|| sibling(&ldi_path, "_stats.json"), |p| cli.resolve(p));
    write_json(&stats_path, &out.stats)
}

struct DiminishInput {
    color: ldi_core::Grid<ldi_core::Rgb>,
    depth: ldi_core::Grid<f64>,
    mask: Option<Mask>,
    ldi: Option<LayeredDepthImage>,
}

fn diminish_input(cli: &Cli, a: &DiminishArgs) -> Result<DiminishInput> {
    if let Some(p) = &a.ldi {
        let ldi = load_ldi(cli.resolve(p))?;
        return Ok(DiminishInput {
            color: ldi.foreground.color.clone(),
            depth: ldi.foreground.depth.clone(),
            mask: Some(ldi.fg_mask.clone()),
            ldi: Some(ldi),
        });
    }
    match (&a.color, &a.depth) {
        (Some(c), Some(d)) => Ok(DiminishInput {
            color: imageio::read_rgb(cli.resolve(c))?,
            depth: imageio::read_depth_mm(cli.resolve(d))?,
            mask: None,
            ldi: None,
        }),
        _ => Err(Error::Config("diminish needs --ldi or both --color and --depth".into())),
    }
}

pub fn diminish(cli: &Cli, a: &DiminishArgs) -> Result<()> {
    if [&a.out_color, &a.out_depth, &a.out_ldi, &a.out_hole].iter().all(|o| o.is_none()) {
        return Err(Error::Config("nothing to write: pass --out-color, --out-depth, --out-hole or --out-ldi".into()));
    }
    let backend = backend_by_name(&a.backend, a.tol, a.max_iters)?;
    let norm = Normalization::new(a.depth_max)?;
    let input = diminish_input(cli, a)?;
    if !input.color.same_dims(&input.depth) {
        return Err(Error::Config("color and depth images differ in size".into()));
    }

    let mask = if let Some(p) = &a.scores {
        let mut scores = imageio::read_scores(cli.resolve(p))?;
        if a.invert_scores {
            scores = scores.inverted();
        }
        threshold_scores(&scores, a.threshold)?
    } else if let Some(p) = &a.mask {
        imageio::read_mask(cli.resolve(p))?
    } else {
        input
            .mask
            .clone()
            .ok_or_else(|| Error::Config("no mask source: pass --scores, --mask or --ldi".into()))?
    };
    if !mask.same_dims(&input.depth) {
        return Err(Error::Config("mask size differs from the input images".into()));
    }

    let hole = dilate_cross(&mask, a.dilate)?;
    log::info!("{} masked pixels, {} after dilation", mask.count(), hole.count());
    let normalized = norm.normalize(&input.color, &input.depth)?;
    let request = InpaintRequest::new(apply_mask(&normalized, &hole, SENTINEL)?, hole.clone())?;
    let filled = inpaint(&request, backend.as_ref())?;
    log::info!(
        "backend {}: color/depth edge agreement {:.3}",
        filled.backend_name,
        pair_consistency_score(&filled.color, &filled.depth)
    );

    // outside the hole keep the input exactly rather than its normalized
    // round trip
    let (fill_color, fill_depth) = norm.denormalize(&filled.as_normalized());
    let mut bg_color = input.color.clone();
    let mut bg_depth = input.depth.clone();
    for i in 0..hole.len() {
        if hole[i] {
            bg_color[i] = fill_color[i];
            bg_depth[i] = fill_depth[i];
        }
    }

    if let Some(p) = &a.out_color {
        imageio::write_rgb(cli.resolve(p), &bg_color)?;
    }
    if let Some(p) = &a.out_depth {
        imageio::write_depth_mm(cli.resolve(p), &bg_depth)?;
    }
    if let Some(p) = &a.out_hole {
        imageio::write_mask(cli.resolve(p), &hole)?;
    }
    if let Some(p) = &a.out_ldi {
        let (camera, ref_pose) = match (&input.ldi, &a.camera) {
            (Some(ldi), _) => (ldi.camera, ldi.ref_pose),
            (None, Some(cam)) => {
                let path = cli.resolve(cam);
                let md = Metadata::parse(&std::fs::read_to_string(&path).map_err(io_err(&path))?)?;
                (md.intrinsics()?, md.pose()?.unwrap_or_else(RigidPose::identity))
            }
            (None, None) => return Err(Error::Config("--out-ldi without --ldi needs --camera".into())),
        };
        let ldi = LayeredDepthImage::new(
            RgbdLayer::from_depth(input.color, input.depth)?,
            RgbdLayer::from_depth(bg_color, bg_depth)?,
            mask,
            camera,
            ref_pose,
        )?;
        save_ldi(&ldi, cli.resolve(p))?;
    }
    Ok(())
}

pub fn render(cli: &Cli, a: &RenderArgs) -> Result<()> {
    let ldi = load_ldi(cli.resolve(&a.ldi))?;
    let opts = RenderOptions {
        close_kernel: a.close_kernel,
    };
    let single_view = a.dx.is_some() || a.dy.is_some() || a.dz.is_some();
    let jobs: Vec<(PathBuf, ViewPerturbation)> = if single_view {
        let pert = ViewPerturbation::translation(a.dx.unwrap_or(0.0), a.dy.unwrap_or(0.0), a.dz.unwrap_or(0.0));
        vec![(cli.resolve(&a.out), pert)]
    } else {
        if a.magnitudes.is_empty() || a.magnitudes.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Config("sweep magnitudes must be positive".into()));
        }
        let dir = cli.resolve(&a.out_dir);
        ensure_dir(&dir)?;
        four_direction_sweep(&a.magnitudes)
            .into_iter()
            .map(|(name, p)| (dir.join(format!("{name}.png")), p))
            .collect()
    };

    let mut table = String::from("view,dx,dy,dz,void_ldi,void_single\n");
    for (path, pert) in &jobs {
        let layered = render_ldi(&ldi, pert, &opts)?;
        let single = render_single_layer(&ldi, pert, &opts)?;
        imageio::write_rgb(path, &layered.color)?;
        if a.single_layer {
            imageio::write_rgb(sibling(path, "_single.png"), &single.color)?;
        }
        if a.emit_void {
            imageio::write_mask(sibling(path, "_void.png"), &layered.void)?;
            if a.single_layer {
                imageio::write_mask(sibling(path, "_single_void.png"), &single.void)?;
            }
        }
        let name = path.file_stem().unwrap_or_default().to_string_lossy();
        let _ = writeln!(
            table,
            "{name},{},{},{},{},{}",
            pert.dx,
            pert.dy,
            pert.dz,
            layered.void_count(),
            single.void_count()
        );
        log::info!("{name}: {} void (LDI) vs {} (single layer)", layered.void_count(), single.void_count());
    }
    print!("{table}");
    if !single_view {
        let p = cli.resolve(&a.out_dir).join("voids.csv");
        std::fs::write(&p, table).map_err(io_err(&p))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    whole: MetricReport,
    inpainted: MetricReport,
}

pub fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let pred = load_ldi(cli.resolve(&a.pred))?;
    let gt = load_ldi(cli.resolve(&a.gt))?;
    let (whole, inpainted) = evaluate_areas(
        &pred,
        &gt,
        &EvalOptions {
            use_gt_mask: a.use_gt_mask,
        },
    )?;
    let report = EvalReport { whole, inpainted };
    println!("{}", serde_json::to_string(&report).map_err(|e| Error::InvalidInput(e.to_string()))?);
    write_json(&cli.resolve(&a.out), &report)
}

pub fn serve(cli: &Cli, a: &ServeArgs) -> Result<()> {
    let ldi = load_ldi(cli.resolve(&a.ldi))?;
    let state = Arc::new(AppState::new(
        ldi,
        RenderOptions {
            close_kernel: a.close_kernel,
        },
    )?);
    let addr = std::net::SocketAddr::new(a.bind, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(io_err(Path::new("<runtime>")))?;
    rt.block_on(service::serve(state, addr)).map_err(|source| Error::Io {
        path: PathBuf::from(addr.to_string()),
        source,
    })
}

pub fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let fixtures = standard_fixtures();
    if a.fixture == "list" {
        for f in &fixtures {
            println!("{}", f.name);
        }
        return Ok(());
    }
    let fx = fixtures
        .iter()
        .find(|f| f.name == a.fixture)
        .ok_or_else(|| Error::Config(format!("unknown fixture `{}` (try --fixture list)", a.fixture)))?;
    let frames = fx.frames();
    let names: Vec<String> = (0..frames.len()).map(|i| format!("{i:04}")).collect();
    write_sequence(cli.resolve(&a.out_dir), &names, &frames)
}
