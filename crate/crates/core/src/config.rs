//! Pipeline configuration: defaults, a flat `key = value` file format, and
//! typed accessors for each processing stage.

use std::fs;
use std::path::Path;

use crate::classify::Measure;
use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::features::FeatureParams;
use crate::keca::Retention;
use crate::kernel::{KernelKind, KernelSpec};

/// Which kernel family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Cosine,
    Gaussian,
    Polynomial,
}

impl KernelChoice {
    pub fn parse(s: &str) -> Option<KernelChoice> {
        match s {
            "cosine" => Some(KernelChoice::Cosine),
            "gaussian" => Some(KernelChoice::Gaussian),
            "polynomial" => Some(KernelChoice::Polynomial),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelChoice::Cosine => "cosine",
            KernelChoice::Gaussian => "gaussian",
            KernelChoice::Polynomial => "polynomial",
        }
    }
}

/// A single measure, or all four at once (evaluation reports only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureChoice {
    Single(Measure),
    All,
}

impl MeasureChoice {
    pub fn parse(s: &str) -> Option<MeasureChoice> {
        if s == "all" {
            return Some(MeasureChoice::All);
        }
        Measure::parse(s).map(MeasureChoice::Single)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureChoice::Single(m) => m.name(),
            MeasureChoice::All => "all",
        }
    }

    /// The measures this choice expands to.
    pub fn measures(&self) -> Vec<Measure> {
        match self {
            MeasureChoice::Single(m) => vec![*m],
            MeasureChoice::All => Measure::ALL.to_vec(),
        }
    }
}

/// Evenly spaced acceptance thresholds `start..=stop` with `steps` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSweep {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl TauSweep {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + i as f64 * step).collect()
    }
}

/// Every tunable of the pipeline in one flat structure.
///
/// The config file format is one `key = value` per line; `#` starts a
/// comment; blank lines are ignored; unknown keys are errors. Keys carry
/// the field names below.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Working image width; inputs are resized to this geometry.
    pub width: usize,
    /// Working image height.
    pub height: usize,
    pub scales: usize,
    pub orientations: usize,
    pub k_max: f64,
    pub spacing: f64,
    pub sigma: f64,
    pub window: usize,
    /// Feature block side length.
    pub block: usize,
    pub kernel: KernelChoice,
    pub kernel_width: f64,
    pub kernel_degree: u32,
    pub kernel_offset: f64,
    /// Unit-normalize feature vectors before kernel evaluation.
    pub normalize: bool,
    /// Fixed number of retained axes; when unset, `energy` decides.
    pub k: Option<usize>,
    /// Cumulative entropy fraction for automatic axis count selection.
    pub energy: f64,
    pub measure: MeasureChoice,
    /// Acceptance threshold; +inf accepts every probe (closed-set mode).
    pub tau: f64,
    /// When set, evaluate at each swept τ instead of the single `tau`.
    pub tau_sweep: Option<TauSweep>,
    /// Seed for randomized helpers (dataset shuffling); the pipeline itself
    /// is deterministic.
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            width: 92,
            height: 112,
            scales: 5,
            orientations: 8,
            k_max: std::f64::consts::FRAC_PI_2,
            spacing: std::f64::consts::SQRT_2,
            sigma: 2.0 * std::f64::consts::PI,
            window: 33,
            block: 7,
            kernel: KernelChoice::Cosine,
            kernel_width: 1.0,
            kernel_degree: 2,
            kernel_offset: 1.0,
            normalize: true,
            k: None,
            energy: 0.95,
            measure: MeasureChoice::Single(Measure::L2),
            tau: f64::INFINITY,
            tau_sweep: None,
            seed: 0,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config {
            reason: format!("invalid value {value:?} for {what}"),
        };
        match key {
            "width" => self.width = value.parse().map_err(|_| bad("width"))?,
            "height" => self.height = value.parse().map_err(|_| bad("height"))?,
            "scales" => self.scales = value.parse().map_err(|_| bad("scales"))?,
            "orientations" => self.orientations = value.parse().map_err(|_| bad("orientations"))?,
            "k_max" => self.k_max = value.parse().map_err(|_| bad("k_max"))?,
            "spacing" => self.spacing = value.parse().map_err(|_| bad("spacing"))?,
            "sigma" => self.sigma = value.parse().map_err(|_| bad("sigma"))?,
            "window" => self.window = value.parse().map_err(|_| bad("window"))?,
            "block" => self.block = value.parse().map_err(|_| bad("block"))?,
            "kernel" => {
                self.kernel = KernelChoice::parse(value).ok_or_else(|| Error::Config {
                    reason: format!(
                        "unknown kernel {value:?} (expected cosine, gaussian or polynomial)"
                    ),
                })?
            }
            "kernel_width" => self.kernel_width = value.parse().map_err(|_| bad("kernel_width"))?,
            "kernel_degree" => {
                self.kernel_degree = value.parse().map_err(|_| bad("kernel_degree"))?
            }
            "kernel_offset" => {
                self.kernel_offset = value.parse().map_err(|_| bad("kernel_offset"))?
            }
            "normalize" => {
                self.normalize = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad("normalize (expected true or false)")),
                }
            }
            "k" => {
                self.k = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("k (expected a count or auto)"))?)
                }
            }
            "energy" => self.energy = value.parse().map_err(|_| bad("energy"))?,
            "measure" => {
                self.measure = MeasureChoice::parse(value).ok_or_else(|| Error::Config {
                    reason: format!(
                        "unknown measure {value:?} (expected l1, l2, mahalanobis, cosine or all)"
                    ),
                })?
            }
            "tau" => {
                self.tau = match value {
                    "inf" => f64::INFINITY,
                    "-inf" => f64::NEG_INFINITY,
                    _ => value.parse().map_err(|_| bad("tau"))?,
                }
            }
            "tau_sweep" => {
                let parts: Vec<&str> = value.split(':').collect();
                if parts.len() != 3 {
                    return Err(Error::Config {
                        reason: format!("tau_sweep must be start:stop:steps, got {value:?}"),
                    });
                }
                let start: f64 = parts[0].parse().map_err(|_| bad("tau_sweep start"))?;
                let stop: f64 = parts[1].parse().map_err(|_| bad("tau_sweep stop"))?;
                let steps: usize = parts[2].parse().map_err(|_| bad("tau_sweep steps"))?;
                self.tau_sweep = Some(TauSweep { start, stop, steps });
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "threads" => self.threads = value.parse().map_err(|_| bad("threads"))?,
            _ => {
                return Err(Error::Config {
                    reason: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    /// Parses a config document on top of the defaults.
    pub fn parse_str(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                reason: format!("line {}: expected key = value, got {raw:?}", i + 1),
            })?;
            cfg.apply(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config { reason } => Error::Config {
                    reason: format!("line {}: {reason}", i + 1),
                },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Cross-field validation. Stage constructors re-check their own
    /// parameters; this brings the failures forward to config load time.
    pub fn validate(&self) -> Result<()> {
        self.gabor_params().validate()?;
        self.kernel_spec()?.validate()?;
        let fail = |reason: String| Err(Error::Config { reason });
        if self.width == 0 || self.height == 0 {
            return fail(format!("working geometry must be positive, got {}x{}", self.width, self.height));
        }
        if self.window > self.width.min(self.height) {
            return fail(format!(
                "window {} exceeds the working geometry {}x{}",
                self.window, self.width, self.height
            ));
        }
        if self.block == 0 || self.block >= self.width.min(self.height) {
            return fail(format!(
                "block must satisfy 1 <= block < min(width, height) = {}, got {}",
                self.width.min(self.height),
                self.block
            ));
        }
        if self.k == Some(0) {
            return fail("k must be at least 1 (or auto)".into());
        }
        if !(self.energy > 0.0 && self.energy <= 1.0) {
            return fail(format!("energy must lie in (0, 1], got {}", self.energy));
        }
        if self.tau.is_nan() {
            return fail("tau must not be NaN".into());
        }
        if let Some(sweep) = &self.tau_sweep {
            if sweep.steps < 2 {
                return fail(format!("tau_sweep needs at least 2 steps, got {}", sweep.steps));
            }
            if !(sweep.start.is_finite() && sweep.stop.is_finite() && sweep.start <= sweep.stop) {
                return fail(format!(
                    "tau_sweep range must be finite and ordered, got {}:{}",
                    sweep.start, sweep.stop
                ));
            }
        }
        Ok(())
    }

    pub fn gabor_params(&self) -> GaborParams {
        GaborParams {
            scales: self.scales,
            orientations: self.orientations,
            k_max: self.k_max,
            spacing: self.spacing,
            sigma: self.sigma,
            window: self.window,
        }
    }

    pub fn feature_params(&self) -> FeatureParams {
        FeatureParams { block: self.block }
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let kind = match self.kernel {
            KernelChoice::Cosine => KernelKind::Cosine,
            KernelChoice::Gaussian => KernelKind::Gaussian {
                width: self.kernel_width,
            },
            KernelChoice::Polynomial => KernelKind::Polynomial {
                degree: self.kernel_degree,
                offset: self.kernel_offset,
            },
        };
        let spec = KernelSpec {
            kind,
            normalize: self.normalize,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn retention(&self) -> Retention {
        match self.k {
            Some(k) => Retention::Count(k),
            None => Retention::EnergyFraction(self.energy),
        }
    }

    /// Thresholds to evaluate at: the sweep when present, else the single τ.
    pub fn taus(&self) -> Vec<f64> {
        match &self.tau_sweep {
            Some(sweep) => sweep.values(),
            None => vec![self.tau],
        }
    }
}
