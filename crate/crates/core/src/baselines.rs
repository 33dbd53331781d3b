//! The proposed scheme and the comparison schemes, all producing a
//! reflection design from simulated training observations.
//!
//! * Baseline I: the proposed pilot-pair estimator with a random rotation.
//! * Baseline II: pick the strongest of `Q` DFT-codebook reflections.
//! * Baseline III: resolve the square-root sign of each of `N + 1` pilots by
//!   exhaustive search, scoring candidates on held-out pilots.

use crate::channel::ChannelRealization;
use crate::estimator::{
    build_training_matrix, dft_training, estimate_channel, rotation_coefficients, EstimatorError, TrainingMatrix,
    TrainingPlan,
};
use crate::linalg::{CMatrix, CVector, LinalgError, LsSolver};
use crate::rng::SeededRng;
use crate::signal::{optimal_reflection, reader_received_scaled, reflection_from_estimate, ReflectionVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use thiserror::Error;

/// Rotation draws for Baseline I with `|t2|` or `|t3|` at or below this are redrawn.
pub const BASELINE1_MIN_COEFF: f64 = 1e-3;

/// Largest `N` accepted by the exhaustive sign search.
pub const BASELINE3_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("Baseline II needs at least one candidate")]
    EmptyCodebook,
    #[error("Baseline III needs at least one held-out pilot")]
    EmptyTestSet,
    #[error("Baseline III sign search is capped at N = {BASELINE3_MAX_N}, got {0}")]
    TooManySubsurfaces(usize),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl From<crate::signal::SignalError> for BaselineError {
    fn from(e: crate::signal::SignalError) -> Self {
        BaselineError::Estimator(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Proposed,
    Baseline1,
    Baseline2,
    Baseline3,
    PerfectCsi,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Proposed => "proposed",
            SchemeKind::Baseline1 => "baseline1",
            SchemeKind::Baseline2 => "baseline2",
            SchemeKind::Baseline3 => "baseline3",
            SchemeKind::PerfectCsi => "perfect_csi",
        })
    }
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Proposed,
        SchemeKind::Baseline1,
        SchemeKind::Baseline2,
        SchemeKind::Baseline3,
        SchemeKind::PerfectCsi,
    ];
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.to_string() == s.trim()).ok_or_else(|| {
            format!("unknown scheme `{s}` (expected one of proposed, baseline1, baseline2, baseline3, perfect_csi)")
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Rotation used by the pilot-pair estimator.
    pub phi: Option<f64>,
    /// Minimum held-out MSE found by Baseline III.
    pub testing_mse: Option<f64>,
    pub candidates: Option<usize>,
}

/// Outcome of one scheme on one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scheme: SchemeKind,
    pub reflection: ReflectionVector,
    /// Estimate of `alpha [h_d^2; 2 h_d h_c]` where the scheme forms one.
    pub g_hat: Option<CVector>,
    pub training_symbols: usize,
    pub diagnostics: Diagnostics,
}

pub fn perfect_csi(ch: &ChannelRealization) -> BaselineResult {
    BaselineResult {
        scheme: SchemeKind::PerfectCsi,
        reflection: optimal_reflection(ch.h_d(), ch.h_c()).reflection,
        g_hat: None,
        training_symbols: 0,
        diagnostics: Diagnostics::default(),
    }
}

fn pilot_pair_scheme(
    scheme: SchemeKind,
    plan: &TrainingPlan,
    matrix: &TrainingMatrix,
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    rng: &mut SeededRng,
) -> Result<BaselineResult, BaselineError> {
    let est = estimate_channel(plan, matrix, ch, alpha, noise_ratio, rng)?;
    Ok(BaselineResult {
        scheme,
        reflection: reflection_from_estimate(&est.g_hat).reflection,
        g_hat: Some(est.g_hat),
        training_symbols: plan.training_symbols(),
        diagnostics: Diagnostics { phi: Some(plan.phi()), ..Default::default() },
    })
}

/// The proposed estimator with a prepared plan and factored training matrix.
pub fn proposed_estimate(
    plan: &TrainingPlan,
    matrix: &TrainingMatrix,
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    rng: &mut SeededRng,
) -> Result<BaselineResult, BaselineError> {
    pilot_pair_scheme(SchemeKind::Proposed, plan, matrix, ch, alpha, noise_ratio, rng)
}

/// Uniform rotation on `(0, 2 pi)`, redrawn while `|t2|` or `|t3|` is too small.
pub fn draw_baseline1_phase(rng: &mut SeededRng) -> f64 {
    loop {
        let phi = rng.uniform_phase();
        let (_, t2, t3) = rotation_coefficients(phi);
        if phi > 0.0 && t2.norm() > BASELINE1_MIN_COEFF && t3.norm() > BASELINE1_MIN_COEFF {
            return phi;
        }
    }
}

/// Baseline I with a given rotation. At `phi = 2 pi / 3` this is the proposed scheme.
pub fn baseline1_with_phase(
    phi: f64,
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    k: usize,
    rng: &mut SeededRng,
) -> Result<BaselineResult, BaselineError> {
    let plan = dft_training(k, ch.n_subsurfaces())?.with_phase(phi);
    let matrix = build_training_matrix(&plan)?;
    pilot_pair_scheme(SchemeKind::Baseline1, &plan, &matrix, ch, alpha, noise_ratio, rng)
}

pub fn baseline1_estimate(
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    k: usize,
    rng: &mut SeededRng,
) -> Result<BaselineResult, BaselineError> {
    let phi = draw_baseline1_phase(rng);
    baseline1_with_phase(phi, ch, alpha, noise_ratio, k, rng)
}

/// Column `c` of the `Q x Q` DFT matrix evaluated on subsurfaces `1..=N`.
pub fn dft_codeword(c: usize, q: usize, n: usize) -> ReflectionVector {
    ReflectionVector::from_phases((1..=n).map(|i| -TAU * ((c * i) % q) as f64 / q as f64))
}

/// Tries `Q` DFT codewords in random order and keeps the one with the
/// largest measured received power. No channel estimate is formed.
pub fn baseline2_select(
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    q: usize,
    rng: &mut SeededRng,
) -> Result<BaselineResult, BaselineError> {
    if q == 0 {
        return Err(BaselineError::EmptyCodebook);
    }
    let n = ch.n_subsurfaces();
    let mut order: Vec<usize> = (0..q).collect();
    order.shuffle(rng);
    let mut best: Option<(f64, ReflectionVector)> = None;
    for c in order {
        let v = dft_codeword(c, q, n);
        let power = reader_received_scaled(&v, ch, alpha, rng.complex_noise(noise_ratio))?.norm_sqr();
        if best.as_ref().is_none_or(|(p, _)| power > *p) {
            best = Some((power, v));
        }
    }
    let (_, reflection) = best.expect("q >= 1");
    Ok(BaselineResult {
        scheme: SchemeKind::Baseline2,
        reflection,
        g_hat: None,
        training_symbols: q,
        diagnostics: Diagnostics { candidates: Some(q), ..Default::default() },
    })
}

/// Both square roots of `y`, principal branch first.
pub fn sqrt_candidates(y: Complex64) -> (Complex64, Complex64) {
    let r = y.sqrt();
    (r, -r)
}

/// Training reflections and received pilots for Baseline III.
#[derive(Debug, Clone)]
pub struct SignSearchProblem {
    /// `N + 1` reflections whose one-way channels are solved for.
    pub fit_reflections: Vec<ReflectionVector>,
    pub fit_received: Vec<Complex64>,
    /// Held-out reflections used to score candidates.
    pub test_reflections: Vec<ReflectionVector>,
    pub test_received: Vec<Complex64>,
}

impl SignSearchProblem {
    /// Draws the received pilots over `ch`. Fit reflections are the DFT rows
    /// `e^{-j 2 pi k n / (N + 1)}`; held-out reflections have random phases.
    pub fn observe(
        ch: &ChannelRealization,
        alpha: f64,
        noise_ratio: f64,
        test_size: usize,
        rng: &mut SeededRng,
    ) -> Result<Self, BaselineError> {
        let n = ch.n_subsurfaces();
        if test_size == 0 {
            return Err(BaselineError::EmptyTestSet);
        }
        if n > BASELINE3_MAX_N {
            return Err(BaselineError::TooManySubsurfaces(n));
        }
        let plan = dft_training(n + 1, n)?;
        let fit_reflections: Vec<_> = (0..=n).map(|k| plan.reflection(k)).collect::<Result<_, _>>()?;
        let test_reflections: Vec<_> =
            (0..test_size).map(|_| ReflectionVector::from_phases((0..n).map(|_| rng.uniform_phase()))).collect();
        let mut receive = |v: &ReflectionVector| reader_received_scaled(v, ch, alpha, rng.complex_noise(noise_ratio));
        let fit_received = fit_reflections.iter().map(&mut receive).collect::<Result<_, _>>()?;
        let test_received = test_reflections.iter().map(&mut receive).collect::<Result<_, _>>()?;
        Ok(Self { fit_reflections, fit_received, test_reflections, test_received })
    }

    pub fn n_subsurfaces(&self) -> usize {
        self.fit_reflections.len() - 1
    }

    pub fn candidate_count(&self) -> usize {
        1usize << self.fit_reflections.len()
    }

    fn design_row(v: &ReflectionVector) -> impl Iterator<Item = Complex64> + '_ {
        std::iter::once(Complex64::new(1.0, 0.0)).chain(v.as_vector().iter().map(|z| z.conj()))
    }

    /// Rows `[1, v_k^H]` of the linear one-way model `b_k = h_d + v_k^H h_c`.
    pub fn fit_matrix(&self) -> CMatrix {
        let m = self.fit_reflections.len();
        CMatrix::from_row_iterator(m, m, self.fit_reflections.iter().flat_map(Self::design_row))
    }

    fn sign(mask: u64, k: usize) -> f64 {
        if mask >> k & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// `[h_d; h_c]` implied by sign pattern `mask` (bit `k` set means the
    /// negative root for pilot `k`).
    pub fn candidate(&self, mask: u64) -> Result<CVector, BaselineError> {
        let solver = LsSolver::new(&self.fit_matrix())?;
        let b = CVector::from_iterator(
            self.fit_received.len(),
            self.fit_received.iter().enumerate().map(|(k, &y)| sqrt_candidates(y).0 * Self::sign(mask, k)),
        );
        Ok(solver.solve(&b)?)
    }

    /// Visits every sign pattern in Gray-code order with its held-out MSE.
    /// Returns the first pattern reaching the minimum.
    pub fn search(&self, mut visit: impl FnMut(u64, f64)) -> Result<(u64, f64), BaselineError> {
        let m = self.fit_reflections.len();
        let solver = LsSolver::new(&self.fit_matrix())?;
        // Held-out one-way channel prediction is linear in the signed roots:
        // b_j = sum_k s_k d[j][k].
        let roots: Vec<Complex64> = self.fit_received.iter().map(|&y| sqrt_candidates(y).0).collect();
        let mut d = vec![vec![Complex64::new(0.0, 0.0); m]; self.test_reflections.len()];
        for k in 0..m {
            let mut e = CVector::zeros(m);
            e[k] = roots[k];
            let x = solver.solve(&e)?;
            for (j, u) in self.test_reflections.iter().enumerate() {
                d[j][k] = Self::design_row(u).zip(x.iter()).map(|(a, b)| a * b).sum();
            }
        }
        let mut pred: Vec<Complex64> = d.iter().map(|row| row.iter().sum()).collect();
        let score = |pred: &[Complex64]| -> f64 {
            pred.iter().zip(&self.test_received).map(|(b, y)| (y - b * b).norm_sqr()).sum::<f64>() / pred.len() as f64
        };

        let mut mask = 0u64;
        let mut best = (mask, score(&pred));
        visit(mask, best.1);
        for i in 1..(1u64 << m) {
            let k = i.trailing_zeros() as usize;
            mask ^= 1 << k;
            let delta = if mask >> k & 1 == 1 { -2.0 } else { 2.0 };
            for (p, row) in pred.iter_mut().zip(&d) {
                *p += row[k] * delta;
            }
            let s = score(&pred);
            visit(mask, s);
            if s < best.1 {
                best = (mask, s);
            }
        }
        Ok(best)
    }
}

pub fn baseline3_estimate(
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    omega2_size: usize,
    rng: &mut SeededRng,
) -> Result<BaselineResult, BaselineError> {
    let problem = SignSearchProblem::observe(ch, alpha, noise_ratio, omega2_size, rng)?;
    let (mask, testing_mse) = problem.search(|_, _| {})?;
    let x = problem.candidate(mask)?;
    let h_d = x[0];
    let h_c = x.rows(1, x.len() - 1).clone_owned();
    let mut g = Vec::with_capacity(x.len());
    g.push(h_d * h_d);
    g.extend(h_c.iter().map(|h| 2.0 * h_d * h));
    Ok(BaselineResult {
        scheme: SchemeKind::Baseline3,
        reflection: optimal_reflection(h_d, &h_c).reflection,
        g_hat: Some(CVector::from_vec(g)),
        training_symbols: problem.fit_reflections.len() + omega2_size,
        diagnostics: Diagnostics {
            testing_mse: Some(testing_mse),
            candidates: Some(problem.candidate_count()),
            ..Default::default()
        },
    })
}
