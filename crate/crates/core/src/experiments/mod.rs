//! Monte Carlo harness: effective-SNR sweeps, the validation suite and the
//! CSV/SVG/JSON writers.

mod output;
mod sweep;
mod validation;

pub use output::{emit_outputs, render_svg, write_csv, OutputError, OutputPaths, CSV_HEADER};
pub use sweep::{run_n_sweep, run_snr_sweep, run_sweep, ReferencePoint, SweepKind, SweepResult, SweepRow};
pub use validation::{run_validation_suite, CheckResult, ValidationReport};

use crate::baselines::{BaselineError, SchemeKind};
use crate::channel::{ChannelError, ScenarioConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("cannot read config {path}: {source}")]
    ConfigIo { path: String, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    ConfigParse { path: String, source: serde_json::Error },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Held-out pilot count for Baseline III: fixed, or `N + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Omega2Size {
    Fixed(usize),
    Named(Omega2Rule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Omega2Rule {
    #[serde(rename = "n+1")]
    NPlusOne,
}

impl Omega2Size {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Omega2Size::Fixed(s) => s,
            Omega2Size::Named(Omega2Rule::NPlusOne) => n + 1,
        }
    }
}

impl fmt::Display for Omega2Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega2Size::Fixed(s) => write!(f, "{s}"),
            Omega2Size::Named(Omega2Rule::NPlusOne) => f.write_str("N+1"),
        }
    }
}

/// A scheme as it appears in sweep output; Baseline III carries its held-out size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSpec {
    Simple(SchemeKind),
    Baseline3(Omega2Size),
}

impl SchemeSpec {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemeSpec::Simple(k) => *k,
            SchemeSpec::Baseline3(_) => SchemeKind::Baseline3,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SchemeSpec::Simple(k) => k.to_string(),
            SchemeSpec::Baseline3(s) => format!("baseline3[{s}]"),
        }
    }

    /// Stable identifier for seeding, independent of list order.
    pub(crate) fn stream_id(&self) -> u64 {
        match self {
            SchemeSpec::Simple(SchemeKind::Proposed) => 1,
            SchemeSpec::Simple(SchemeKind::Baseline1) => 2,
            SchemeSpec::Simple(SchemeKind::Baseline2) => 3,
            SchemeSpec::Simple(SchemeKind::Baseline3) => 4,
            SchemeSpec::Simple(SchemeKind::PerfectCsi) => 5,
            SchemeSpec::Baseline3(Omega2Size::Fixed(s)) => 0x100 + *s as u64,
            SchemeSpec::Baseline3(Omega2Size::Named(_)) => 0xFF,
        }
    }
}

/// How per-trial effective SNRs are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of per-trial dB values.
    #[default]
    Db,
    /// dB of the mean linear SNR.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub schemes: Vec<SchemeKind>,
    pub trials: usize,
    pub seed: u64,
    /// `sigma^2 / P_t` values (dB) for the reference-SNR sweep.
    pub noise_ratios_db: Vec<f64>,
    /// Subsurface counts for the N sweep.
    pub n_values: Vec<usize>,
    /// Reference SNR held fixed per realization in the N sweep.
    pub n_sweep_reference_snr_db: f64,
    pub omega2_sizes: Vec<Omega2Size>,
    /// Sub-blocks for the pilot-pair schemes; `None` uses `N + 1`.
    pub sub_blocks: Option<usize>,
    /// Baseline II codebook size; `None` uses `2 (N + 1)`.
    pub codebook_size: Option<usize>,
    /// Baseline III rows are skipped above this `N`.
    pub baseline3_max_n: usize,
    pub averaging: Averaging,
    /// Validation negative control: rotation used for the optimality check.
    pub sabotage_phase: Option<f64>,
    /// Output directory; the command line may override it.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            schemes: vec![
                SchemeKind::PerfectCsi,
                SchemeKind::Proposed,
                SchemeKind::Baseline1,
                SchemeKind::Baseline2,
                SchemeKind::Baseline3,
            ],
            trials: 500,
            seed: 1,
            noise_ratios_db: vec![-120.0, -130.0, -140.0, -150.0, -160.0],
            n_values: (1..=10).map(|i| 2 * i).collect(),
            n_sweep_reference_snr_db: 0.0,
            omega2_sizes: vec![Omega2Size::Fixed(1)],
            sub_blocks: None,
            codebook_size: None,
            baseline3_max_n: 14,
            averaging: Averaging::Db,
            sabotage_phase: None,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ExperimentError::ConfigIo { path: path.display().to_string(), source })?;
        Self::from_json(&text)
            .map_err(|source| ExperimentError::ConfigParse { path: path.display().to_string(), source })
    }

    /// Schemes with Baseline III expanded once per held-out size.
    pub fn scheme_specs(&self) -> Vec<SchemeSpec> {
        let mut out = Vec::new();
        for &kind in &self.schemes {
            if kind == SchemeKind::Baseline3 {
                out.extend(self.omega2_sizes.iter().map(|&s| SchemeSpec::Baseline3(s)));
            } else {
                out.push(SchemeSpec::Simple(kind));
            }
        }
        out
    }

    pub fn sub_blocks_for(&self, n: usize) -> usize {
        self.sub_blocks.unwrap_or(n + 1)
    }

    pub fn codebook_size_for(&self, n: usize) -> usize {
        self.codebook_size.unwrap_or(2 * (n + 1))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.scenario.validate()?;
        if self.trials < 1 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.schemes.contains(&SchemeKind::Baseline3) {
            if self.omega2_sizes.is_empty() {
                return Err(ExperimentError::Config("omega2_sizes must not be empty with baseline3".into()));
            }
            if self.omega2_sizes.contains(&Omega2Size::Fixed(0)) {
                return Err(ExperimentError::Config("omega2 sizes must be at least 1".into()));
            }
        }
        if let Some(k) = self.sub_blocks {
            if k == 0 {
                return Err(ExperimentError::Config("sub_blocks must be positive".into()));
            }
        }
        if self.codebook_size == Some(0) {
            return Err(ExperimentError::Config("codebook_size must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_snr_sweep(&self) -> Result<(), ExperimentError> {
        self.validate()?;
        if self.noise_ratios_db.is_empty() {
            return Err(ExperimentError::Config("noise_ratios_db must not be empty".into()));
        }
        if self.noise_ratios_db.iter().any(|x| !x.is_finite()) {
            return Err(ExperimentError::Config("noise ratios must be finite".into()));
        }
        self.check_sub_blocks(self.scenario.n_subsurfaces)
    }

    pub fn validate_n_sweep(&self) -> Result<(), ExperimentError> {
        self.validate()?;
        if self.n_values.is_empty() {
            return Err(ExperimentError::Config("n_values must not be empty".into()));
        }
        if !self.n_sweep_reference_snr_db.is_finite() {
            return Err(ExperimentError::Config("n_sweep_reference_snr_db must be finite".into()));
        }
        for &n in &self.n_values {
            self.check_sub_blocks(n)?;
        }
        Ok(())
    }

    fn check_sub_blocks(&self, n: usize) -> Result<(), ExperimentError> {
        if self.sub_blocks_for(n) <= n {
            return Err(ExperimentError::Config(format!(
                "sub_blocks = {} is below N + 1 = {}",
                self.sub_blocks_for(n),
                n + 1
            )));
        }
        Ok(())
    }
}
