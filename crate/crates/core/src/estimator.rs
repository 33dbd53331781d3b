//! Phase-rotated pilot-pair channel estimation and its MSE-optimal training
//! design.
//!
//! Each of the `K` sub-blocks sends two pilots. The first uses reflection
//! `v_k`; the second advances every IRS phase shift by the common rotation
//! `phi`. Combining the pair as `t1 * y1 - y2` with `t1 = e^{2j phi}` removes
//! the `(v_k^H h_c)^2` term exactly and leaves a linear model in
//! `[h_d^2; 2 h_d h_c]`:
//!
//! ```text
//! t1 y1 - y2 = t2 h_d^2 + t3 v_k^H (2 h_d h_c) + noise
//! t2 = e^{2j phi} - 1,   t3 = e^{2j phi} - e^{j phi}
//! ```
//!
//! Stacking the sub-blocks gives the `K x (N + 1)` training matrix with rows
//! `[t2, t3 v_k^H]`, solved by least squares. The estimation MSE is
//! `2 (sigma^2/P_t) Tr((A^H A)^-1)`, which is minimised by orthogonal
//! zero-sum reflection columns (DFT columns) and `phi = 2 pi / 3`, where
//! `A^H A = 3K I`.

use crate::channel::ChannelRealization;
use crate::linalg::{gram, CMatrix, CVector, LinalgError, LsSolver};
use crate::rng::SeededRng;
use crate::signal::{
    lift_reflection, lifted_received, reader_received_scaled, LiftedChannel, ReflectionVector, SignalError,
    UNIT_MODULUS_TOL,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Plans with `|t2|` or `|t3|` below this are rejected.
pub const DEGENERATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("need at least N + 1 = {required} sub-blocks, got {k}")]
    TooFewSubBlocks { k: usize, required: usize },
    #[error("rotation phase {phi} is degenerate (|t2| = {t2}, |t3| = {t3})")]
    DegeneratePhase { phi: f64, t2: f64, t3: f64 },
    #[error("training entry ({row}, {col}) is not unit modulus")]
    NotUnitModulus { row: usize, col: usize },
    #[error("sub-block index {k} out of range for {count} sub-blocks")]
    SubBlockOutOfRange { k: usize, count: usize },
    #[error("no feasible phase on the search grid")]
    EmptyGrid,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// The MSE-optimal common rotation, `2 pi / 3`.
pub fn optimal_phase() -> f64 {
    TAU / 3.0
}

/// Rotation coefficients `(t1, t2, t3)` for phase `phi`.
pub fn rotation_coefficients(phi: f64) -> (Complex64, Complex64, Complex64) {
    let e1 = Complex64::from_polar(1.0, phi);
    let e2 = Complex64::from_polar(1.0, 2.0 * phi);
    (e2, e2 - 1.0, e2 - e1)
}

/// `K` sub-blocks of reflection patterns plus the common rotation phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanFile", into = "PlanFile")]
pub struct TrainingPlan {
    phi: f64,
    /// Row `k` holds `v_k`.
    reflections: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    phi: f64,
    reflections: Vec<Vec<Complex64>>,
}

impl From<TrainingPlan> for PlanFile {
    fn from(p: TrainingPlan) -> Self {
        let reflections = p.reflections.row_iter().map(|r| r.iter().copied().collect()).collect();
        PlanFile { phi: p.phi, reflections }
    }
}

impl TryFrom<PlanFile> for TrainingPlan {
    type Error = EstimatorError;

    fn try_from(f: PlanFile) -> Result<Self, Self::Error> {
        let k = f.reflections.len();
        let n = f.reflections.first().map_or(0, Vec::len);
        if let Some(bad) = f.reflections.iter().find(|r| r.len() != n) {
            return Err(LinalgError::DimensionMismatch { expected: n, found: bad.len() }.into());
        }
        let m = CMatrix::from_fn(k, n, |i, j| f.reflections[i][j]);
        TrainingPlan::new(f.phi, m)
    }
}

impl TrainingPlan {
    /// Any unit-modulus `K x N` reflection matrix and phase. Use
    /// [`TrainingPlan::check_usable`] before estimating with it.
    pub fn new(phi: f64, reflections: CMatrix) -> Result<Self, EstimatorError> {
        if !phi.is_finite() {
            return Err(EstimatorError::DegeneratePhase { phi, t2: f64::NAN, t3: f64::NAN });
        }
        for row in 0..reflections.nrows() {
            for col in 0..reflections.ncols() {
                let err = (reflections[(row, col)].norm() - 1.0).abs();
                if err.is_nan() || err > UNIT_MODULUS_TOL {
                    return Err(EstimatorError::NotUnitModulus { row, col });
                }
            }
        }
        Ok(Self { phi: phi.rem_euclid(TAU), reflections })
    }

    pub fn with_phase(&self, phi: f64) -> Self {
        Self { phi: phi.rem_euclid(TAU), reflections: self.reflections.clone() }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn sub_blocks(&self) -> usize {
        self.reflections.nrows()
    }

    pub fn n_subsurfaces(&self) -> usize {
        self.reflections.ncols()
    }

    pub fn reflections(&self) -> &CMatrix {
        &self.reflections
    }

    pub fn coefficients(&self) -> (Complex64, Complex64, Complex64) {
        rotation_coefficients(self.phi)
    }

    /// Reflection for sub-block `k` (zero-based).
    pub fn reflection(&self, k: usize) -> Result<ReflectionVector, EstimatorError> {
        if k >= self.sub_blocks() {
            return Err(EstimatorError::SubBlockOutOfRange { k, count: self.sub_blocks() });
        }
        Ok(ReflectionVector::new(self.reflections.row(k).transpose())?)
    }

    /// Reflection for the second pilot of sub-block `k`: every phase shift
    /// advanced by `phi`, i.e. `v_k^H -> e^{j phi} v_k^H`.
    pub fn rotated_reflection(&self, k: usize) -> Result<ReflectionVector, EstimatorError> {
        let v = self.reflection(k)?;
        let rot = Complex64::from_polar(1.0, -self.phi);
        Ok(ReflectionVector::new(v.as_vector() * rot)?)
    }

    pub fn check_usable(&self) -> Result<(), EstimatorError> {
        let required = self.n_subsurfaces() + 1;
        if self.sub_blocks() < required {
            return Err(EstimatorError::TooFewSubBlocks { k: self.sub_blocks(), required });
        }
        let (_, t2, t3) = self.coefficients();
        if t2.norm() < DEGENERATE_TOL || t3.norm() < DEGENERATE_TOL {
            return Err(EstimatorError::DegeneratePhase { phi: self.phi, t2: t2.norm(), t3: t3.norm() });
        }
        Ok(())
    }

    /// Number of pilot symbols spent, two per sub-block.
    pub fn training_symbols(&self) -> usize {
        2 * self.sub_blocks()
    }
}

/// `N` columns of the `K x K` DFT matrix, `v_{k,n} = e^{-j 2 pi k n / K}`
/// for `k = 0..K` and `n = 1..=N`, with the optimal rotation.
pub fn dft_training(k: usize, n: usize) -> Result<TrainingPlan, EstimatorError> {
    if k <= n {
        return Err(EstimatorError::TooFewSubBlocks { k, required: n + 1 });
    }
    let v = CMatrix::from_fn(k, n, |row, col| {
        let idx = ((row * (col + 1)) % k) as f64;
        Complex64::from_polar(1.0, -TAU * idx / k as f64)
    });
    TrainingPlan::new(optimal_phase(), v)
}

/// Effective training matrix with rows `[t2, t3 v_k^H]`, factored for LS.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    matrix: CMatrix,
    solver: LsSolver,
}

pub fn training_matrix_entries(plan: &TrainingPlan) -> CMatrix {
    let (_, t2, t3) = plan.coefficients();
    let v = plan.reflections();
    CMatrix::from_fn(plan.sub_blocks(), plan.n_subsurfaces() + 1, |row, col| {
        if col == 0 {
            t2
        } else {
            t3 * v[(row, col - 1)].conj()
        }
    })
}

pub fn build_training_matrix(plan: &TrainingPlan) -> Result<TrainingMatrix, EstimatorError> {
    plan.check_usable()?;
    let matrix = training_matrix_entries(plan);
    let solver = LsSolver::new(&matrix)?;
    Ok(TrainingMatrix { matrix, solver })
}

impl TrainingMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn gram(&self) -> CMatrix {
        gram(&self.matrix)
    }

    pub fn trace_inverse_gram(&self) -> f64 {
        self.solver.trace_inverse_gram()
    }

    /// `2 (sigma^2/P_t) Tr((A^H A)^-1)`.
    pub fn theoretical_mse(&self, noise_ratio: f64) -> f64 {
        2.0 * noise_ratio * self.trace_inverse_gram()
    }

    /// LS estimate of `[h_d^2; 2 h_d h_c]` from the differenced pilots.
    pub fn estimate(&self, y: &CVector, noise_ratio: f64) -> Result<Estimate, EstimatorError> {
        let g_hat = self.solver.solve(y)?;
        let residual_norm = (&self.matrix * &g_hat - y).norm();
        Ok(Estimate { g_hat, residual_norm, theoretical_mse: self.theoretical_mse(noise_ratio) })
    }
}

pub fn theoretical_mse(a: &TrainingMatrix, noise_ratio: f64) -> f64 {
    a.theoretical_mse(noise_ratio)
}

/// Least-squares estimate of `[h_d^2; 2 h_d h_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub g_hat: CVector,
    pub residual_norm: f64,
    pub theoretical_mse: f64,
}

impl Estimate {
    /// `|g_hat - truth|^2`.
    pub fn squared_error(&self, truth: &CVector) -> f64 {
        (&self.g_hat - truth).norm_squared()
    }
}

/// The vector the estimator targets, `alpha [h_d^2; 2 h_d h_c]`.
pub fn estimation_target(ch: &ChannelRealization, alpha: f64) -> CVector {
    let h_d = ch.h_d();
    let mut g = Vec::with_capacity(ch.n_subsurfaces() + 1);
    g.push(h_d * h_d * alpha);
    g.extend(ch.h_c().iter().map(|h| 2.0 * h_d * h * alpha));
    CVector::from_vec(g)
}

/// The two received pilots of sub-block `k`, each with independent noise
/// of power `noise_ratio`.
pub fn simulate_pilot_pair(
    plan: &TrainingPlan,
    k: usize,
    ch: &ChannelRealization,
    noise_ratio: f64,
    rng: &mut SeededRng,
) -> Result<(Complex64, Complex64), EstimatorError> {
    simulate_pilot_pair_scaled(plan, k, ch, 1.0, noise_ratio, rng)
}

pub fn simulate_pilot_pair_scaled(
    plan: &TrainingPlan,
    k: usize,
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    rng: &mut SeededRng,
) -> Result<(Complex64, Complex64), EstimatorError> {
    let first = plan.reflection(k)?;
    let second = plan.rotated_reflection(k)?;
    let z1 = rng.complex_noise(noise_ratio);
    let z2 = rng.complex_noise(noise_ratio);
    let y1 = reader_received_scaled(&first, ch, alpha, z1)?;
    let y2 = reader_received_scaled(&second, ch, alpha, z2)?;
    Ok((y1, y2))
}

/// `t1 y1 - y2`, which cancels the quadratic reflected term.
pub fn difference(y1: Complex64, y2: Complex64, phi: f64) -> Complex64 {
    let (t1, _, _) = rotation_coefficients(phi);
    t1 * y1 - y2
}

/// Noiseless differenced pilot of sub-block `k` evaluated on an arbitrary
/// lifted channel vector, through `a^H g` for both pilots.
pub fn difference_lifted(plan: &TrainingPlan, k: usize, g: &LiftedChannel) -> Result<Complex64, EstimatorError> {
    let a1 = lift_reflection(&plan.reflection(k)?)?;
    let a2 = lift_reflection(&plan.rotated_reflection(k)?)?;
    Ok(difference(lifted_received(&a1, g)?, lifted_received(&a2, g)?, plan.phi()))
}

/// Runs all sub-blocks of `plan` over `ch` and returns the LS estimate.
pub fn estimate_channel(
    plan: &TrainingPlan,
    matrix: &TrainingMatrix,
    ch: &ChannelRealization,
    alpha: f64,
    noise_ratio: f64,
    rng: &mut SeededRng,
) -> Result<Estimate, EstimatorError> {
    let mut y = CVector::zeros(plan.sub_blocks());
    for k in 0..plan.sub_blocks() {
        let (y1, y2) = simulate_pilot_pair_scaled(plan, k, ch, alpha, noise_ratio, rng)?;
        y[k] = difference(y1, y2, plan.phi());
    }
    matrix.estimate(&y, noise_ratio)
}

/// `A^H A` assembled entry by entry from the plan without forming `A`.
pub fn gram_closed_form(plan: &TrainingPlan) -> CMatrix {
    let (_, t2, t3) = plan.coefficients();
    let k = plan.sub_blocks();
    let n = plan.n_subsurfaces();
    let v = plan.reflections();
    let col_sum = |j: usize| -> Complex64 { (0..k).map(|row| v[(row, j)]).sum() };
    let t3_sq = t3.norm_sqr();
    CMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => Complex64::new(k as f64 * t2.norm_sqr(), 0.0),
        (0, j) => t2.conj() * t3 * col_sum(j - 1).conj(),
        (i, 0) => t2 * t3.conj() * col_sum(i - 1),
        (i, j) if i == j => Complex64::new(k as f64 * t3_sq, 0.0),
        (i, j) => t3_sq * (0..k).map(|row| v[(row, i - 1)] * v[(row, j - 1)].conj()).sum::<Complex64>(),
    })
}

/// Which optimality conditions a plan violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum OptimalityViolation {
    /// Columns of the reflection matrix are not orthogonal with norm `K`.
    NotOrthogonal,
    /// Some subsurface's phases do not sum to zero over the sub-blocks.
    NonZeroColumnSum,
    /// Rotation phase differs from `2 pi / 3`.
    SuboptimalPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub violations: Vec<OptimalityViolation>,
    pub max_orthogonality_error: f64,
    pub max_column_sum: f64,
    pub phase_error: f64,
}

impl OptimalityReport {
    pub fn is_optimal(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_training_optimality(plan: &TrainingPlan, tol: f64) -> OptimalityReport {
    let v = plan.reflections();
    let k = plan.sub_blocks() as f64;
    let cross = v.ad_mul(v);
    let mut max_orth = 0.0f64;
    for i in 0..cross.nrows() {
        for j in 0..cross.ncols() {
            let target = if i == j { k } else { 0.0 };
            max_orth = max_orth.max((cross[(i, j)] - target).norm());
        }
    }
    let max_sum = v.column_iter().map(|c| c.sum().norm()).fold(0.0, f64::max);
    let d = (plan.phi() - optimal_phase()).rem_euclid(TAU);
    let phase_error = d.min(TAU - d);

    let mut violations = Vec::new();
    if max_orth > tol {
        violations.push(OptimalityViolation::NotOrthogonal);
    }
    if max_sum > tol {
        violations.push(OptimalityViolation::NonZeroColumnSum);
    }
    if phase_error > tol {
        violations.push(OptimalityViolation::SuboptimalPhase);
    }
    OptimalityReport { violations, max_orthogonality_error: max_orth, max_column_sum: max_sum, phase_error }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSearch {
    pub best_phase: f64,
    pub best_trace: f64,
    /// `(phi, Tr((A^H A)^-1))` at every feasible grid point.
    pub evaluated: Vec<(f64, f64)>,
}

/// Evaluates `Tr((A^H A)^-1)` at `phi = 2 pi i / grid_points`,
/// `i = 1..grid_points`, skipping degenerate or rank-deficient points.
/// Ties within `1e-12` relative go to the smallest phase.
pub fn phase_grid_search(reflections: &CMatrix, grid_points: usize) -> Result<PhaseSearch, EstimatorError> {
    let base = TrainingPlan::new(0.0, reflections.clone())?;
    let mut evaluated = Vec::new();
    for i in 1..grid_points {
        let phi = TAU * i as f64 / grid_points as f64;
        if let Ok(m) = build_training_matrix(&base.with_phase(phi)) {
            evaluated.push((phi, m.trace_inverse_gram()));
        }
    }
    let min = evaluated.iter().map(|e| e.1).min_by(f64::total_cmp).ok_or(EstimatorError::EmptyGrid)?;
    // phi and 2 pi - phi give the same trace; report the smaller of a mirrored pair
    let &(best_phase, best_trace) = evaluated.iter().find(|e| e.1 <= min * (1.0 + 1e-12)).expect("minimum is attained");
    Ok(PhaseSearch { best_phase, best_trace, evaluated })
}

/// `Tr((A^H A)^-1)` for the plan's reflections at rotation `phi`.
pub fn trace_at_phase(plan: &TrainingPlan, phi: f64) -> Result<f64, EstimatorError> {
    Ok(build_training_matrix(&plan.with_phase(phi))?.trace_inverse_gram())
}

/// The 2 x 3 pilot-pair mixing matrix `[[1, 1, 1], [1, e^{j phi}, e^{2j phi}]]`
/// acting on `[h_d^2, 2 h_d v^H h_c, w]`.
pub fn pilot_pair_mixing(phi: f64) -> CMatrix {
    let e = |p: f64| Complex64::from_polar(1.0, p);
    CMatrix::from_row_slice(2, 3, &[e(0.0), e(0.0), e(0.0), e(0.0), e(phi), e(2.0 * phi)])
}
