use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use gliaskel::io::{
    export_report, export_swc, hist_equalize, import_swc, load_mask, load_volume, save_mask, save_volume, VolumeFormat,
};
use gliaskel::metrics::evaluate;
use gliaskel::phantom::{generate_series, PhantomSpec};
use gliaskel::temporal::{frame_objective, morph_skeleton, run_series};
use gliaskel::tracer::trace_initial_skeleton;
use gliaskel::vesselness::{iv_transform, vesselness_with};
use gliaskel::SkeletonGraph;

use crate::config::PipelineConfig;

fn write_json(value: &impl serde::Serialize, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn summary(s: &SkeletonGraph) -> String {
    format!(
        "{} segments, {} bifurcations, {} terminals",
        s.segments.len(),
        s.bifurcations().len(),
        s.terminals().len()
    )
}

/// `<out>.morph.json` next to the morphed SWC.
pub fn default_log_path(out_swc: &Path) -> PathBuf {
    out_swc.with_extension("morph.json")
}

pub fn trace(mask: &Path, out: &Path, format: Option<VolumeFormat>) -> Result<()> {
    let m = load_mask(mask, format)?;
    let s = trace_initial_skeleton(&m).with_context(|| format!("tracing {}", mask.display()))?;
    export_swc(&s, out)?;
    log::info!("{}: {}", out.display(), summary(&s));
    Ok(())
}

pub fn morph(
    prev: &Path,
    frame: &Path,
    out: &Path,
    log_path: &Path,
    format: Option<VolumeFormat>,
    cfg: &PipelineConfig,
) -> Result<()> {
    cfg.validate()?;
    let prev_s = import_swc(prev)?;
    let image = load_volume(frame, format)?;
    let iv =
        frame_objective(&image, &cfg.series_options()).with_context(|| format!("filtering {}", frame.display()))?;
    let m = morph_skeleton(&prev_s, &iv, &cfg.morph)
        .with_context(|| format!("morphing {} onto {}", prev.display(), frame.display()))?;
    for seg in m.flagged() {
        log::warn!("segment {} flagged: {:?}", seg.segment, seg.flags);
    }
    export_swc(&m.skeleton, out)?;
    write_json(&m.log(), log_path)?;
    log::info!(
        "{}: {} (score {:.4})",
        out.display(),
        summary(&m.skeleton),
        m.total_score
    );
    Ok(())
}

/// File names written by the pipeline for frame `t` (0-based).
pub fn frame_swc(t: usize) -> String {
    format!("frame_{t:03}.swc")
}

pub fn frame_report(t: usize) -> String {
    format!("frame_{t:03}.report.json")
}

pub fn frame_log(t: usize) -> String {
    format!("frame_{t:03}.morph.json")
}

fn check_inputs(cfg: &PipelineConfig) -> Result<()> {
    let Some(seg) = &cfg.seg else {
        bail!("config has no `seg` (first-frame segmentation)")
    };
    ensure!(!cfg.frames.is_empty(), "config has no `frames`");
    ensure!(
        cfg.gt.is_empty() || cfg.gt.len() == cfg.frames.len(),
        "`gt` lists {} skeletons for {} frames",
        cfg.gt.len(),
        cfg.frames.len()
    );
    for p in std::iter::once(seg).chain(&cfg.frames).chain(&cfg.gt) {
        ensure!(p.is_file(), "input file {} does not exist", p.display());
    }
    cfg.validate()
}

pub fn pipeline(cfg: &PipelineConfig) -> Result<()> {
    check_inputs(cfg)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let seg = load_mask(cfg.seg.as_deref().expect("checked"), None)?;
    let frames = cfg
        .frames
        .iter()
        .enumerate()
        .map(|(t, p)| load_volume(p, None).with_context(|| format!("frame {t}")))
        .collect::<Result<Vec<_>>>()?;
    let gt = cfg
        .gt
        .iter()
        .map(|p| import_swc(p).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let out = run_series(&frames, &seg, &cfg.morph, &cfg.series_options())?;
    for (t, f) in out.iter().enumerate() {
        export_swc(&f.skeleton, &cfg.out_dir.join(frame_swc(t)))?;
        if let Some(m) = &f.morph {
            write_json(&m.log(), &cfg.out_dir.join(frame_log(t)))?;
        }
        if let Some(g) = gt.get(t) {
            let r = evaluate(&f.skeleton, g, cfg.tolerance_um).with_context(|| format!("evaluating frame {t}"))?;
            export_report(&r, &cfg.out_dir.join(frame_report(t)))?;
            log::info!("frame {t}: weighted accuracy {:.3}", r.weighted_accuracy_normalized);
        }
    }
    log::info!("{} frames written to {}", out.len(), cfg.out_dir.display());
    Ok(())
}

pub fn eval(test: &Path, gt: &Path, out: &Path, tolerance_um: f64) -> Result<()> {
    let t = import_swc(test)?;
    let g = import_swc(gt)?;
    let r = evaluate(&t, &g, tolerance_um)?;
    export_report(&r, out)?;
    log::info!(
        "{}: weighted accuracy {:.3}",
        out.display(),
        r.weighted_accuracy_normalized
    );
    Ok(())
}

pub fn vesselness(
    input: &Path,
    out: &Path,
    penalized: bool,
    format: Option<VolumeFormat>,
    cfg: &PipelineConfig,
) -> Result<()> {
    cfg.validate()?;
    let mut v = load_volume(input, format)?;
    if cfg.hist_eq {
        v = hist_equalize(&v, cfg.hist_bins);
    }
    let opts = cfg.series_options();
    let resp = vesselness_with(&v, &opts.scales, &opts.frangi)?;
    let result = if penalized {
        let map = iv_transform(&resp)?;
        log::info!("penalty magnitude {}", map.x_avg);
        map.volume
    } else {
        resp
    };
    save_volume(&result, out, format)?;
    Ok(())
}

pub struct PhantomArgs {
    pub spec: PhantomSpec,
    pub frames: usize,
    pub format: VolumeFormat,
}

fn ext(format: VolumeFormat) -> &'static str {
    match format {
        VolumeFormat::TiffStack => "tif",
        VolumeFormat::RawMeta => "raw",
        VolumeFormat::Nrrd => "nrrd",
    }
}

/// Writes `image_NNN`, `gt_NNN.swc`, the first frame's `seg` label volume
/// and a `pipeline.cfg` that runs the whole series against its ground truth.
pub fn phantom(args: &PhantomArgs, out_dir: &Path) -> Result<()> {
    ensure!(args.frames > 0, "--frames must be positive");
    let series = generate_series(&args.spec, args.frames)?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let e = ext(args.format);
    let mut cfg = PipelineConfig {
        seg: Some(PathBuf::from(format!("seg.{e}"))),
        out_dir: PathBuf::from("out"),
        ..PipelineConfig::default()
    };
    save_mask(&series[0].mask, &out_dir.join(format!("seg.{e}")), Some(args.format))?;
    for (t, p) in series.iter().enumerate() {
        let image = format!("image_{t:03}.{e}");
        let gt = format!("gt_{t:03}.swc");
        save_volume(&p.image, &out_dir.join(&image), Some(args.format))?;
        export_swc(&p.skeleton, &out_dir.join(&gt))?;
        cfg.frames.push(image.into());
        cfg.gt.push(gt.into());
    }
    let cfg_path = out_dir.join("pipeline.cfg");
    fs::write(&cfg_path, cfg.to_text()).with_context(|| format!("cannot write {}", cfg_path.display()))?;
    log::info!("{} frames written to {}", args.frames, out_dir.display());
    Ok(())
}
