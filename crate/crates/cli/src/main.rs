mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gliaskel::io::VolumeFormat;
use gliaskel::phantom::PhantomSpec;
use gliaskel::vesselness::Polarity;

use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "gliaskel",
    version,
    about = "Skeleton tracing and temporal morphing of tubular cells"
)]
struct Cli {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Overrides for config keys.
#[derive(Args, Default)]
struct Tuning {
    /// Vesselness scales in voxels, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    scales: Option<Vec<f64>>,
    /// Largest allowed bifurcation displacement per frame (voxels).
    #[arg(long)]
    max_bif_shift: Option<f64>,
    /// `bright` (fluorescent tubes) or `dark`.
    #[arg(long)]
    polarity: Option<Polarity>,
    /// Histogram-equalise frames before filtering.
    #[arg(long)]
    hist_eq: bool,
    /// Branch matching tolerance in µm.
    #[arg(long)]
    tolerance_um: Option<f64>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trace the initial skeleton from a labelled mask (0 background, 2 soma).
    Trace {
        mask: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Volume format; inferred from the extension when omitted.
        #[arg(long)]
        format: Option<VolumeFormat>,
    },
    /// Morph a skeleton onto the next frame.
    Morph {
        prev: PathBuf,
        frame: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Morph log path (default: `<out>.morph.json`).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        format: Option<VolumeFormat>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Trace frame 1, morph every later frame, evaluate against ground truth.
    Pipeline {
        /// Config file (same as --config).
        config_file: Option<PathBuf>,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Score a skeleton against a ground-truth skeleton.
    Eval {
        test: PathBuf,
        gt: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        tolerance_um: Option<f64>,
    },
    /// Write the multiscale vesselness response of a volume.
    Vesselness {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Write the penalised morphing objective instead of the raw response.
        #[arg(long)]
        penalized: bool,
        #[arg(long)]
        format: Option<VolumeFormat>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Generate a synthetic tubular tree (series) with ground truth.
    Phantom {
        #[arg(short, long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        /// Grid size as `nx,ny,nz`.
        #[arg(long, value_parser = parse_dims, default_value = "64,64,64")]
        dims: [usize; 3],
        #[arg(long, default_value_t = 3)]
        n_primary: usize,
        #[arg(long, default_value_t = 2)]
        max_depth: u32,
        #[arg(long, default_value_t = 1.5)]
        tube_radius: f64,
        #[arg(long, default_value_t = 3.0)]
        soma_radius: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Largest tip displacement from frame 0 (voxels).
        #[arg(long, default_value_t = 2.0)]
        motion: f64,
        #[arg(long, default_value = "nrrd")]
        format: VolumeFormat,
    },
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected nx,ny,nz, got `{s}`"))
}

fn apply(cfg: &mut PipelineConfig, t: &Tuning) -> Result<()> {
    if let Some(s) = &t.scales {
        cfg.scales.clone_from(s);
    }
    if let Some(x) = t.max_bif_shift {
        cfg.morph.max_bifurcation_shift = x;
    }
    if let Some(p) = t.polarity {
        cfg.polarity = p;
    }
    if t.hist_eq {
        cfg.hist_eq = true;
    }
    if let Some(x) = t.tolerance_um {
        cfg.tolerance_um = x;
    }
    for kv in &t.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{kv}`")
        };
        cfg.set(k.trim(), v, Path::new(""))
            .with_context(|| format!("--set {kv}"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config_path = match &cli.cmd {
        Cmd::Pipeline {
            config_file: Some(p), ..
        } => Some(p.clone()),
        _ => cli.config.clone(),
    };
    let mut cfg = match &config_path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match &cli.cmd {
        Cmd::Morph { tuning, .. } | Cmd::Vesselness { tuning, .. } => apply(&mut cfg, tuning)?,
        Cmd::Pipeline { tuning, out_dir, .. } => {
            apply(&mut cfg, tuning)?;
            if let Some(d) = out_dir {
                cfg.out_dir.clone_from(d);
            }
        }
        Cmd::Eval {
            tolerance_um: Some(x), ..
        } => cfg.tolerance_um = *x,
        _ => {}
    }
    if cli.show_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    log::debug!("{} worker threads", gliaskel::par::threads());

    match cli.cmd {
        Cmd::Trace { mask, out, format } => commands::trace(&mask, &out, format),
        Cmd::Morph {
            prev,
            frame,
            out,
            log,
            format,
            ..
        } => {
            let log = log.unwrap_or_else(|| commands::default_log_path(&out));
            commands::morph(&prev, &frame, &out, &log, format, &cfg)
        }
        Cmd::Pipeline { .. } => {
            if config_path.is_none() {
                bail!("pipeline needs a config file");
            }
            commands::pipeline(&cfg)
        }
        Cmd::Eval { test, gt, out, .. } => commands::eval(&test, &gt, &out, cfg.tolerance_um),
        Cmd::Vesselness {
            input,
            out,
            penalized,
            format,
            ..
        } => commands::vesselness(&input, &out, penalized, format, &cfg),
        Cmd::Phantom {
            out_dir,
            seed,
            frames,
            dims,
            n_primary,
            max_depth,
            tube_radius,
            soma_radius,
            noise,
            motion,
            format,
        } => {
            let spec = PhantomSpec {
                seed,
                n_primary,
                max_depth,
                tube_radius,
                soma_radius,
                dims,
                noise_sigma: noise,
                motion_amplitude: motion,
                ..PhantomSpec::default()
            };
            commands::phantom(&commands::PhantomArgs { spec, frames, format }, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
