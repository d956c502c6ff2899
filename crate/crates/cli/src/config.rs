//! Flat `key = value` configuration shared by all commands.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Relative paths are resolved against the directory of the config file.
//! `--show-config` prints every key with its effective value in this same
//! format, so its output is itself a valid config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gliaskel::io::DEFAULT_BINS;
use gliaskel::metrics::DEFAULT_TOLERANCE_UM;
use gliaskel::temporal::{MorphConfig, SeriesOptions};
use gliaskel::vesselness::{FrangiParams, Penalty, Polarity, DEFAULT_SCALES};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Segmentation (label volume) of the first frame.
    pub seg: Option<PathBuf>,
    pub frames: Vec<PathBuf>,
    /// Ground-truth skeletons, one per frame, or none.
    pub gt: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub scales: Vec<f64>,
    pub polarity: Polarity,
    pub hist_eq: bool,
    pub hist_bins: usize,
    pub tolerance_um: f64,
    pub morph: MorphConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seg: None,
            frames: Vec::new(),
            gt: Vec::new(),
            out_dir: PathBuf::from("out"),
            scales: DEFAULT_SCALES.to_vec(),
            polarity: Polarity::Bright,
            hist_eq: false,
            hist_bins: DEFAULT_BINS,
            tolerance_um: DEFAULT_TOLERANCE_UM,
            morph: MorphConfig::default(),
        }
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn paths(items: &[PathBuf]) -> String {
    items
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .parse::<T>()
        .with_context(|| format!("`{key}`: cannot parse `{value}`"))
}

impl PipelineConfig {
    pub fn to_text(&self) -> String {
        let m = &self.morph;
        let polarity = match self.polarity {
            Polarity::Bright => "bright",
            Polarity::Dark => "dark",
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seg = {}",
            self.seg.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        let _ = writeln!(s, "frames = {}", paths(&self.frames));
        let _ = writeln!(s, "gt = {}", paths(&self.gt));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "scales = {}", join(&self.scales));
        let _ = writeln!(s, "polarity = {polarity}");
        let _ = writeln!(s, "hist_eq = {}", self.hist_eq);
        let _ = writeln!(s, "hist_bins = {}", self.hist_bins);
        let _ = writeln!(s, "tolerance_um = {}", self.tolerance_um);
        let _ = writeln!(s, "max_bifurcation_shift = {}", m.max_bifurcation_shift);
        let _ = writeln!(s, "bifurcation_stiffness = {}", m.bifurcation_stiffness);
        let _ = writeln!(s, "max_endpoint_shift_per_iter = {}", m.max_endpoint_shift_per_iter);
        let _ = writeln!(s, "max_iters = {}", m.max_iters);
        let _ = writeln!(s, "improvement_epsilon = {}", m.improvement_epsilon);
        let _ = writeln!(s, "max_terminal_shift = {}", m.max_terminal_shift);
        let _ = writeln!(s, "length_penalty_ratio = {}", m.length_penalty_ratio);
        let _ = writeln!(s, "search_margin = {}", m.search_margin);
        s
    }

    /// Sets one key; path values are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let value = value.trim();
        let path = |v: &str| base.join(v);
        let m = &mut self.morph;
        match key {
            "seg" => self.seg = (!value.is_empty()).then(|| path(value)),
            "frames" => self.frames = list(value).map(path).collect(),
            "gt" => self.gt = list(value).map(path).collect(),
            "out_dir" => self.out_dir = path(value),
            "scales" => self.scales = list(value).map(|v| number(key, v)).collect::<Result<_>>()?,
            "polarity" => self.polarity = value.parse()?,
            "hist_eq" => self.hist_eq = number(key, value)?,
            "hist_bins" => self.hist_bins = number(key, value)?,
            "tolerance_um" => self.tolerance_um = number(key, value)?,
            "max_bifurcation_shift" => m.max_bifurcation_shift = number(key, value)?,
            "bifurcation_stiffness" => m.bifurcation_stiffness = number(key, value)?,
            "max_endpoint_shift_per_iter" => m.max_endpoint_shift_per_iter = number(key, value)?,
            "max_iters" => m.max_iters = number(key, value)?,
            "improvement_epsilon" => m.improvement_epsilon = number(key, value)?,
            "max_terminal_shift" => m.max_terminal_shift = number(key, value)?,
            "length_penalty_ratio" => m.length_penalty_ratio = number(key, value)?,
            "search_margin" => m.search_margin = number(key, value)?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{line}`", i + 1);
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("line {}: `{key}` given twice", i + 1);
            }
            cfg.set(key, value, base).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    /// Checks the tunables; paths are checked by the commands that use them.
    pub fn validate(&self) -> Result<()> {
        self.morph.validate()?;
        if self.scales.is_empty() || self.scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            bail!("scales must be a non-empty list of positive numbers");
        }
        if !self.tolerance_um.is_finite() || self.tolerance_um < 0.0 {
            bail!("tolerance_um must be non-negative");
        }
        if self.hist_bins < 2 {
            bail!("hist_bins must be at least 2");
        }
        Ok(())
    }

    pub fn series_options(&self) -> SeriesOptions {
        SeriesOptions {
            scales: self.scales.clone(),
            frangi: FrangiParams {
                polarity: self.polarity,
                ..FrangiParams::default()
            },
            penalty: Penalty::PositiveMean,
            hist_eq: self.hist_eq,
            hist_bins: self.hist_bins,
        }
    }
}
