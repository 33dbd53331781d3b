use super::{Averaging, ExperimentConfig, ExperimentError, SchemeSpec};
use crate::baselines::{
    baseline1_estimate, baseline2_select, baseline3_estimate, perfect_csi, proposed_estimate, BaselineResult,
    SchemeKind,
};
use crate::channel::{realize_channels, ChannelRealization};
use crate::estimator::{build_training_matrix, dft_training, estimation_target, TrainingMatrix, TrainingPlan};
use crate::rng::SeededRng;
use crate::signal::LinkBudget;
use serde::Serialize;

// seed-path prefixes
const CHANNEL_STREAM: u64 = 0xC4A1;
const SCHEME_STREAM: u64 = 0x5C4E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Noise ratio varied at fixed `N`; axis is the mean reference SNR.
    ReferenceSnr,
    /// `N` varied at a fixed per-realization reference SNR; axis is `N`.
    Subsurfaces,
}

/// Reference-SNR statistics of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub axis: f64,
    pub n_subsurfaces: usize,
    pub noise_ratio_db: Option<f64>,
    pub mean_reference_snr_db: f64,
    #[serde(skip)]
    pub reference_snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: f64,
    pub scheme: String,
    pub eff_snr_db_mean: f64,
    pub eff_snr_db_stderr: f64,
    pub mse_mean: Option<f64>,
    pub trials: usize,
    pub budget: usize,
    pub n_subsurfaces: usize,
    pub noise_ratio_db: Option<f64>,
    /// Effective SNR of every trial, in trial order.
    #[serde(skip)]
    pub trial_snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    pub points: Vec<ReferencePoint>,
    /// Human-readable notes on rows that were not produced.
    pub skipped: Vec<String>,
}

impl SweepResult {
    pub fn row(&self, scheme: &str, axis_index: usize) -> Option<&SweepRow> {
        let point = self.points.get(axis_index)?;
        self.rows.iter().find(|r| r.scheme == scheme && r.axis == point.axis)
    }

    pub fn schemes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scheme) {
                out.push(r.scheme.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum NoiseSetting {
    Fixed(f64),
    ReferenceSnr(f64),
}

struct TrialOutcome {
    reference_snr_db: f64,
    /// `None` where the scheme was skipped for this `N`.
    schemes: Vec<Option<(f64, Option<f64>, usize)>>,
}

struct PointContext<'a> {
    config: &'a ExperimentConfig,
    specs: &'a [SchemeSpec],
    n: usize,
    point_index: u64,
    noise: NoiseSetting,
    plan: TrainingPlan,
    matrix: TrainingMatrix,
}

impl PointContext<'_> {
    fn skip(&self, spec: &SchemeSpec) -> bool {
        spec.kind() == SchemeKind::Baseline3 && self.n > self.config.baseline3_max_n
    }

    fn trial(&self, t: u64) -> Result<TrialOutcome, ExperimentError> {
        let cfg = self.config;
        let alpha = cfg.scenario.tag_reflection;
        let scenario = cfg.scenario.clone().with_subsurfaces(self.n);
        let mut ch_rng = SeededRng::derived(cfg.seed, &[CHANNEL_STREAM, self.n as u64, t]);
        let ch = realize_channels(&scenario, &mut ch_rng)?;

        let noise_ratio = match self.noise {
            NoiseSetting::Fixed(nr) => nr,
            NoiseSetting::ReferenceSnr(db) => {
                let p = alpha * alpha * ch.h_d().norm_sqr().powi(2);
                (p / 10f64.powf(db / 10.0)).max(f64::MIN_POSITIVE)
            }
        };
        let budget = LinkBudget::new(noise_ratio, alpha);
        let target = estimation_target(&ch, alpha);

        let mut schemes = Vec::with_capacity(self.specs.len());
        for spec in self.specs {
            if self.skip(spec) {
                schemes.push(None);
                continue;
            }
            let mut rng =
                SeededRng::derived(cfg.seed, &[SCHEME_STREAM, self.n as u64, self.point_index, t, spec.stream_id()]);
            let result = self.run_scheme(spec, &ch, alpha, noise_ratio, &mut rng)?;
            let snr =
                budget.effective_snr_db(&result.reflection, &ch).map_err(crate::baselines::BaselineError::from)?;
            let mse = match (&result.g_hat, result.scheme) {
                (Some(g), _) => Some((g - &target).norm_squared()),
                (None, SchemeKind::PerfectCsi) => Some(0.0),
                (None, _) => None,
            };
            schemes.push(Some((snr, mse, result.training_symbols)));
        }
        Ok(TrialOutcome { reference_snr_db: budget.reference_snr_db(ch.h_d()), schemes })
    }

    fn run_scheme(
        &self,
        spec: &SchemeSpec,
        ch: &ChannelRealization,
        alpha: f64,
        noise_ratio: f64,
        rng: &mut SeededRng,
    ) -> Result<BaselineResult, ExperimentError> {
        let cfg = self.config;
        let n = self.n;
        Ok(match spec {
            SchemeSpec::Simple(SchemeKind::PerfectCsi) => perfect_csi(ch),
            SchemeSpec::Simple(SchemeKind::Proposed) => {
                proposed_estimate(&self.plan, &self.matrix, ch, alpha, noise_ratio, rng)?
            }
            SchemeSpec::Simple(SchemeKind::Baseline1) => {
                baseline1_estimate(ch, alpha, noise_ratio, cfg.sub_blocks_for(n), rng)?
            }
            SchemeSpec::Simple(SchemeKind::Baseline2) => {
                baseline2_select(ch, alpha, noise_ratio, cfg.codebook_size_for(n), rng)?
            }
            SchemeSpec::Simple(SchemeKind::Baseline3) => baseline3_estimate(ch, alpha, noise_ratio, 1, rng)?,
            SchemeSpec::Baseline3(size) => baseline3_estimate(ch, alpha, noise_ratio, size.resolve(n), rng)?,
        })
    }
}

fn run_trials(ctx: &PointContext<'_>, trials: usize) -> Result<Vec<TrialOutcome>, ExperimentError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials as u64).into_par_iter().map(|t| ctx.trial(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials as u64).map(|t| ctx.trial(t)).collect()
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn average_snr(xs: &[f64], averaging: Averaging) -> (f64, f64) {
    match averaging {
        Averaging::Db => mean_and_stderr(xs),
        Averaging::Linear => {
            let lin: Vec<f64> = xs.iter().map(|x| 10f64.powf(x / 10.0)).collect();
            let (m, se) = mean_and_stderr(&lin);
            (10.0 * m.log10(), 10.0 / std::f64::consts::LN_10 * se / m)
        }
    }
}

fn run_point(
    config: &ExperimentConfig,
    specs: &[SchemeSpec],
    n: usize,
    point_index: usize,
    noise: NoiseSetting,
    kind: SweepKind,
) -> Result<(ReferencePoint, Vec<SweepRow>), ExperimentError> {
    let plan = dft_training(config.sub_blocks_for(n), n).map_err(crate::baselines::BaselineError::from)?;
    let matrix = build_training_matrix(&plan).map_err(crate::baselines::BaselineError::from)?;
    let ctx = PointContext { config, specs, n, point_index: point_index as u64, noise, plan, matrix };
    let outcomes = run_trials(&ctx, config.trials)?;

    let reference: Vec<f64> = outcomes.iter().map(|o| o.reference_snr_db).collect();
    let mean_ref = mean_and_stderr(&reference).0;
    let noise_ratio_db = match noise {
        NoiseSetting::Fixed(nr) => Some(10.0 * nr.log10()),
        NoiseSetting::ReferenceSnr(_) => None,
    };
    let axis = match kind {
        SweepKind::ReferenceSnr => mean_ref,
        SweepKind::Subsurfaces => n as f64,
    };

    let mut rows = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        if ctx.skip(spec) {
            continue;
        }
        let per_trial: Vec<(f64, Option<f64>, usize)> =
            outcomes.iter().map(|o| o.schemes[i].expect("scheme ran")).collect();
        let snrs: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
        let (mean, stderr) = average_snr(&snrs, config.averaging);
        let mse_mean =
            per_trial.iter().map(|p| p.1).collect::<Option<Vec<f64>>>().map(|m| m.iter().sum::<f64>() / m.len() as f64);
        rows.push(SweepRow {
            axis,
            scheme: spec.label(),
            eff_snr_db_mean: mean,
            eff_snr_db_stderr: stderr,
            mse_mean,
            trials: config.trials,
            budget: per_trial[0].2,
            n_subsurfaces: n,
            noise_ratio_db,
            trial_snr_db: snrs,
        });
    }
    let point = ReferencePoint {
        axis,
        n_subsurfaces: n,
        noise_ratio_db,
        mean_reference_snr_db: mean_ref,
        reference_snr_db: reference,
    };
    Ok((point, rows))
}

/// Effective SNR versus reference SNR: sweeps `sigma^2/P_t` at the
/// scenario's `N`, with the same channel draws at every noise level.
pub fn run_snr_sweep(config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    config.validate_snr_sweep()?;
    let specs = config.scheme_specs();
    let n = config.scenario.n_subsurfaces;
    let mut result =
        SweepResult { kind: SweepKind::ReferenceSnr, rows: Vec::new(), points: Vec::new(), skipped: Vec::new() };
    for (i, &db) in config.noise_ratios_db.iter().enumerate() {
        let (point, rows) =
            run_point(config, &specs, n, i, NoiseSetting::Fixed(10f64.powf(db / 10.0)), SweepKind::ReferenceSnr)?;
        result.points.push(point);
        result.rows.extend(rows);
    }
    note_skipped(config, &specs, &[n], &mut result.skipped);
    Ok(result)
}

/// Effective SNR versus `N` with the reference SNR pinned per realization
/// by choosing `sigma^2/P_t = alpha^2 |h_d|^4 / SNR_ref`.
pub fn run_n_sweep(config: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    config.validate_n_sweep()?;
    let specs = config.scheme_specs();
    let mut result =
        SweepResult { kind: SweepKind::Subsurfaces, rows: Vec::new(), points: Vec::new(), skipped: Vec::new() };
    let noise = NoiseSetting::ReferenceSnr(config.n_sweep_reference_snr_db);
    for (i, &n) in config.n_values.iter().enumerate() {
        let (point, rows) = run_point(config, &specs, n, i, noise, SweepKind::Subsurfaces)?;
        result.points.push(point);
        result.rows.extend(rows);
    }
    note_skipped(config, &specs, &config.n_values, &mut result.skipped);
    Ok(result)
}

pub fn run_sweep(config: &ExperimentConfig, kind: SweepKind) -> Result<SweepResult, ExperimentError> {
    match kind {
        SweepKind::ReferenceSnr => run_snr_sweep(config),
        SweepKind::Subsurfaces => run_n_sweep(config),
    }
}

fn note_skipped(config: &ExperimentConfig, specs: &[SchemeSpec], ns: &[usize], out: &mut Vec<String>) {
    for spec in specs.iter().filter(|s| s.kind() == SchemeKind::Baseline3) {
        for &n in ns.iter().filter(|&&n| n > config.baseline3_max_n) {
            out.push(format!("{} skipped at N = {n} (baseline3_max_n = {})", spec.label(), config.baseline3_max_n));
        }
    }
}
