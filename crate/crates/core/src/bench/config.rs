//! Experiment configuration files.
//!
//! A config is a TOML document. The `params` list means something different
//! for each experiment kind:
//!
//! | kind                 | `params`                          | `param` column |
//! |----------------------|-----------------------------------|----------------|
//! | `cs_pgd_sweep_r`     | multiples of `||x_gt||_1` for `R` | multiple       |
//! | `cs_pgd_ratios`      | one multiple of `||x_gt||_1`      | `m/n`          |
//! | `cs_fista_sweep_beta`| `beta` values                     | `beta`         |
//! | `cs_controlled`      | unused (`R = ||x_gt||_1`)         | `m/n`          |
//! | `rate_curves`        | support sizes `k`                 | `k`            |
//! | `ista_family`        | `beta` values                     | `beta`         |
//! | `sr_pgd`             | multiples of `||x_gt||_1` for `R` | multiple       |
//!
//! An optional `[paper_scale]` table overrides selected fields when the run
//! is started with `--paper-scale`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fidelity::FidelityKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CsPgdSweepR,
    CsPgdRatios,
    CsFistaSweepBeta,
    CsControlled,
    RateCurves,
    IstaFamily,
    SrPgd,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::CsPgdSweepR => "cs_pgd_sweep_r",
            ExperimentKind::CsPgdRatios => "cs_pgd_ratios",
            ExperimentKind::CsFistaSweepBeta => "cs_fista_sweep_beta",
            ExperimentKind::CsControlled => "cs_controlled",
            ExperimentKind::RateCurves => "rate_curves",
            ExperimentKind::IstaFamily => "ista_family",
            ExperimentKind::SrPgd => "sr_pgd",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where ground-truth signals come from. Signals live in the Haar domain,
/// except for `sr_pgd`, which also treats them as Haar coefficients of the
/// high-resolution image.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// `k` nonzeros on a uniform support, normal amplitudes, scaled to peak 255.
    Sparse { k: usize },
    /// Random signs, magnitudes `255 * rank^-decay` on a random ordering.
    Power { decay: f64 },
    /// Grayscale PGM files, block-averaged to `side`.
    Images { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrSpec {
    #[serde(default = "default_scale")]
    pub scale: usize,
    #[serde(default = "default_kernel_size")]
    pub kernel_size: usize,
    #[serde(default = "default_kernel_sigma")]
    pub kernel_sigma: f64,
}

impl Default for SrSpec {
    fn default() -> Self {
        Self {
            scale: default_scale(),
            kernel_size: default_kernel_size(),
            kernel_sigma: default_kernel_sigma(),
        }
    }
}

fn default_scale() -> usize {
    2
}
fn default_kernel_size() -> usize {
    7
}
fn default_kernel_sigma() -> f64 {
    1.6
}

/// Fields replaced under `--paper-scale`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperScale {
    pub side: Option<usize>,
    pub iters: Option<usize>,
    pub star_iters: Option<usize>,
    pub num_supports: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub signal: Option<SignalSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Label written to the `experiment` column; defaults to the kind.
    pub name: Option<String>,
    pub seeds: Vec<u64>,
    /// Image side; the signal dimension is `side^2`.
    pub side: usize,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    /// Measurement SNR in dB; `inf` for noiseless.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "default_fidelities")]
    pub fidelities: Vec<FidelityKind>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Budget of the preceding run that supplies `x_*`; 0 disables it.
    #[serde(default)]
    pub star_iters: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_num_supports")]
    pub num_supports: usize,
    /// Haar coefficients kept by `cs_controlled`; defaults to `0.95 m / ln n`.
    pub keep: Option<usize>,
    pub signal: Option<SignalSpec>,
    #[serde(default)]
    pub sr: SrSpec,
    pub output: Option<PathBuf>,
    pub paper_scale: Option<PaperScale>,
}

fn default_ratios() -> Vec<f64> {
    vec![0.5]
}
fn default_snr() -> f64 {
    f64::INFINITY
}
fn default_fidelities() -> Vec<FidelityKind> {
    FidelityKind::BOTH.to_vec()
}
fn default_iters() -> usize {
    1000
}
fn default_record_every() -> usize {
    1
}
fn default_num_supports() -> usize {
    crate::rate_lab::DEFAULT_NUM_SUPPORTS
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative image paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |s: &mut SignalSpec| {
            if let SignalSpec::Images { paths } = s {
                for p in paths.iter_mut() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        };
        if let Some(s) = cfg.signal.as_mut() {
            resolve(s);
        }
        if let Some(s) = cfg.paper_scale.as_mut().and_then(|p| p.signal.as_mut()) {
            resolve(s);
        }
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.experiment.as_str().to_string())
    }

    pub fn n(&self) -> usize {
        self.side * self.side
    }

    /// Number of measurements for a compression ratio.
    pub fn measurements(&self, ratio: f64) -> usize {
        (ratio * self.n() as f64).round() as usize
    }

    /// The config with its `[paper_scale]` overrides applied.
    pub fn at_paper_scale(&self) -> Self {
        let mut out = self.clone();
        if let Some(p) = &self.paper_scale {
            if let Some(v) = p.side {
                out.side = v;
            }
            if let Some(v) = p.iters {
                out.iters = v;
            }
            if let Some(v) = p.star_iters {
                out.star_iters = v;
            }
            if let Some(v) = p.num_supports {
                out.num_supports = v;
            }
            if let Some(v) = &p.seeds {
                out.seeds = v.clone();
            }
            if let Some(v) = &p.signal {
                out.signal = Some(v.clone());
            }
        }
        out
    }

    /// Sparsity enforced by `cs_controlled` at `m` measurements.
    pub fn controlled_keep(&self, m: usize) -> usize {
        self.keep
            .unwrap_or_else(|| (0.95 * m as f64 / (self.n() as f64).ln()).floor() as usize)
            .clamp(1, self.n())
    }

    pub fn signal(&self) -> SignalSpec {
        self.signal
            .clone()
            .unwrap_or(SignalSpec::Sparse { k: (self.n() / 20).max(1) })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.side < 2 || !self.side.is_power_of_two() {
            return bad(format!("side must be a power of two >= 2, got {}", self.side));
        }
        if self.ratios.is_empty() {
            return bad("ratios must be nonempty".into());
        }
        for &r in &self.ratios {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("ratio {r} is outside (0, 1]"));
            }
            if self.measurements(r) == 0 {
                return bad(format!("ratio {r} gives zero measurements"));
            }
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad("snr_db must be a number or inf".into());
        }
        if self.fidelities.is_empty() {
            return bad("fidelities must be nonempty".into());
        }
        if self.iters == 0 || self.record_every == 0 {
            return bad("iters and record_every must be at least 1".into());
        }
        if self.num_supports == 0 {
            return bad("num_supports must be at least 1".into());
        }
        let needs_params = matches!(
            self.experiment,
            ExperimentKind::CsPgdSweepR
                | ExperimentKind::CsFistaSweepBeta
                | ExperimentKind::RateCurves
                | ExperimentKind::IstaFamily
                | ExperimentKind::SrPgd
        );
        if needs_params && self.params.is_empty() {
            return bad(format!("{} needs a nonempty params list", self.experiment));
        }
        if self.experiment == ExperimentKind::CsPgdRatios && self.params.len() > 1 {
            return bad("cs_pgd_ratios takes at most one R multiple".into());
        }
        for &p in &self.params {
            let ok = match self.experiment {
                ExperimentKind::CsFistaSweepBeta | ExperimentKind::IstaFamily => {
                    p >= 0.0 && p.is_finite()
                }
                ExperimentKind::RateCurves => p >= 1.0 && p.fract() == 0.0,
                _ => p > 0.0 && p.is_finite(),
            };
            if !ok {
                return bad(format!("param {p} is invalid for {}", self.experiment));
            }
        }
        if self.experiment == ExperimentKind::RateCurves {
            for &r in &self.ratios {
                let m = self.measurements(r);
                if let Some(&k) = self.params.iter().find(|&&k| k as usize > m) {
                    return bad(format!("support size {k} exceeds m = {m}"));
                }
            }
        }
        if self.experiment == ExperimentKind::SrPgd {
            let sr = &self.sr;
            if sr.scale == 0 || self.side % sr.scale != 0 {
                return bad(format!("sr scale {} does not divide side {}", sr.scale, self.side));
            }
            if sr.kernel_size % 2 == 0 || !(sr.kernel_sigma > 0.0) {
                return bad("sr kernel must have odd size and positive sigma".into());
            }
        }
        match self.signal() {
            SignalSpec::Sparse { k } => {
                if k == 0 || k > self.n() {
                    return bad(format!("signal sparsity {k} is outside 1..={}", self.n()));
                }
            }
            SignalSpec::Power { decay } => {
                if !(decay > 0.0 && decay.is_finite()) {
                    return bad(format!("power decay must be positive, got {decay}"));
                }
            }
            SignalSpec::Images { paths } => {
                if paths.is_empty() {
                    return bad("images signal needs at least one path".into());
                }
                if let Some(p) = paths.iter().find(|p| !p.is_file()) {
                    return bad(format!("image {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }
}
