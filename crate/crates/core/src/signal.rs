//! Monostatic backscatter signal model.
//!
//! The reader sees the one-way channel `h_d + v^H h_c` twice, so the received
//! pilot is quadratic in the unknowns. Lifting the reflection to
//! `a = [1; v; v (x) v]` and the channel to `g = [h_d^2; 2 h_d h_c; h_c (x) h_c]`
//! turns it into the linear form `y = a^H g + z`.

use crate::channel::{ChannelRealization, ScenarioConfig};
use crate::linalg::{hermitian_product, kron, CVector, LinalgError};
use num_complex::Complex64;
use thiserror::Error;

/// Allowed deviation of `|v_n|` from one.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("reflection entry {index} has modulus {modulus}, expected 1")]
    NotUnitModulus { index: usize, modulus: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// IRS reflection vector with unit-modulus entries.
///
/// Entry `n` is `exp(-j theta_n)` for the phase shift `theta_n` applied by
/// subsurface `n`, so that the reflected contribution is `v^H h_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionVector(CVector);

impl ReflectionVector {
    pub fn new(v: CVector) -> Result<Self, SignalError> {
        for (index, z) in v.iter().enumerate() {
            let modulus = z.norm();
            if modulus.is_nan() || (modulus - 1.0).abs() > UNIT_MODULUS_TOL {
                return Err(SignalError::NotUnitModulus { index, modulus });
            }
        }
        Ok(Self(v))
    }

    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<Complex64> = phases.into_iter().map(|p| Complex64::from_polar(1.0, p)).collect();
        Self(CVector::from_vec(v))
    }

    pub fn ones(n: usize) -> Self {
        Self(CVector::from_element(n, Complex64::new(1.0, 0.0)))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Phase shifts `theta_n = -arg(v_n)`.
    pub fn phase_shifts(&self) -> Vec<f64> {
        self.0.iter().map(|z| -z.arg()).collect()
    }
}

/// `a = [1; v; v (x) v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTraining(CVector);

impl LiftedTraining {
    pub fn as_vector(&self) -> &CVector {
        &self.0
    }
}

/// `g = [h_d^2; 2 h_d h_c; h_c (x) h_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedChannel(CVector);

impl LiftedChannel {
    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn n_subsurfaces(&self) -> usize {
        // len = N^2 + N + 1
        let len = self.0.len();
        (0..=len).find(|n| n * n + n + 1 == len).unwrap_or(0)
    }

    /// The first `N + 1` entries, `[h_d^2; 2 h_d h_c]`.
    pub fn head(&self) -> CVector {
        let n = self.n_subsurfaces();
        self.0.rows(0, n + 1).clone_owned()
    }

    /// Replaces the `h_c (x) h_c` block. Used to probe which parts of the
    /// model a processing step depends on.
    pub fn with_tail(&self, tail: &CVector) -> Result<Self, LinalgError> {
        let n = self.n_subsurfaces();
        if tail.len() != n * n {
            return Err(LinalgError::DimensionMismatch { expected: n * n, found: tail.len() });
        }
        let mut g = self.0.clone();
        g.rows_mut(n + 1, n * n).copy_from(tail);
        Ok(Self(g))
    }
}

pub fn lift_reflection(v: &ReflectionVector) -> Result<LiftedTraining, SignalError> {
    let v = v.as_vector();
    let vv = kron(v, v)?;
    let mut a = Vec::with_capacity(1 + v.len() + vv.len());
    a.push(Complex64::new(1.0, 0.0));
    a.extend(v.iter());
    a.extend(vv.iter());
    Ok(LiftedTraining(CVector::from_vec(a)))
}

pub fn lift_channel(h_d: Complex64, h_c: &CVector) -> Result<LiftedChannel, SignalError> {
    let hh = kron(h_c, h_c)?;
    let mut g = Vec::with_capacity(1 + h_c.len() + hh.len());
    g.push(h_d * h_d);
    g.extend(h_c.iter().map(|h| 2.0 * h_d * h));
    g.extend(hh.iter());
    Ok(LiftedChannel(CVector::from_vec(g)))
}

/// `a^H g`, the noiseless received pilot in lifted form.
pub fn lifted_received(a: &LiftedTraining, g: &LiftedChannel) -> Result<Complex64, SignalError> {
    Ok(hermitian_product(a.as_vector(), g.as_vector())?)
}

/// One-way channel `h_d + v^H h_c` seen at the tag.
pub fn tag_received(v: &ReflectionVector, ch: &ChannelRealization) -> Result<Complex64, SignalError> {
    Ok(ch.h_d() + hermitian_product(v.as_vector(), ch.h_c())?)
}

/// `(h_d + v^H h_c)^2 + noise` at the reader, with full tag reflection.
pub fn reader_received(
    v: &ReflectionVector,
    ch: &ChannelRealization,
    noise: Complex64,
) -> Result<Complex64, SignalError> {
    reader_received_scaled(v, ch, 1.0, noise)
}

/// Same as [`reader_received`] with tag reflection coefficient `alpha`.
pub fn reader_received_scaled(
    v: &ReflectionVector,
    ch: &ChannelRealization,
    alpha: f64,
    noise: Complex64,
) -> Result<Complex64, SignalError> {
    let b = tag_received(v, ch)?;
    Ok(alpha * b * b + noise)
}

/// A passive beamforming design together with whether the zero-direct-link
/// tie-break was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamDesign {
    pub reflection: ReflectionVector,
    pub used_fallback: bool,
}

fn co_phase(reference: Complex64, terms: impl Iterator<Item = Complex64>) -> ReflectionVector {
    ReflectionVector::from_phases(terms.map(|t| (reference.conj() * t).arg()))
}

/// Co-phases every reflected path with the direct link.
///
/// When `h_d = 0` the reflected paths are aligned with subsurface 1 instead.
pub fn optimal_reflection(h_d: Complex64, h_c: &CVector) -> BeamDesign {
    if h_d != Complex64::new(0.0, 0.0) {
        return BeamDesign { reflection: co_phase(h_d, h_c.iter().copied()), used_fallback: false };
    }
    let anchor = h_c.iter().copied().next().unwrap_or(Complex64::new(0.0, 0.0));
    BeamDesign { reflection: co_phase(anchor, h_c.iter().copied()), used_fallback: true }
}

/// Beamforming from the estimate `[h_d^2; 2 h_d h_c]`: `exp(j arg(g_1^* g_n))`.
///
/// Identical to [`optimal_reflection`] when the estimate is exact.
pub fn reflection_from_estimate(g_hat: &CVector) -> BeamDesign {
    let Some((&g1, rest)) = g_hat.as_slice().split_first() else {
        return BeamDesign { reflection: ReflectionVector::ones(0), used_fallback: true };
    };
    if g1 != Complex64::new(0.0, 0.0) {
        return BeamDesign { reflection: co_phase(g1, rest.iter().copied()), used_fallback: false };
    }
    let anchor = rest.first().copied().unwrap_or(Complex64::new(0.0, 0.0));
    BeamDesign { reflection: co_phase(anchor, rest.iter().copied()), used_fallback: true }
}

/// Noise level and tag reflection used to turn channels into SNR figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// `sigma^2 / P_t`, linear.
    pub noise_ratio: f64,
    pub alpha: f64,
}

impl LinkBudget {
    pub fn new(noise_ratio: f64, alpha: f64) -> Self {
        assert!(noise_ratio > 0.0, "noise ratio must be positive");
        Self { noise_ratio, alpha }
    }

    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self::new(config.noise_ratio(), config.tag_reflection)
    }

    /// `10 log10(alpha^2 |b^2|^2 / (sigma^2/P_t))` for one-way channel `b`.
    /// Returns `-inf` for a zero channel.
    pub fn snr_db(&self, one_way: Complex64) -> f64 {
        let p = self.alpha * self.alpha * one_way.norm_sqr().powi(2);
        10.0 * (p / self.noise_ratio).log10()
    }

    pub fn reference_snr_db(&self, h_d: Complex64) -> f64 {
        self.snr_db(h_d)
    }

    pub fn effective_snr_db(&self, v: &ReflectionVector, ch: &ChannelRealization) -> Result<f64, SignalError> {
        Ok(self.snr_db(tag_received(v, ch)?))
    }
}

pub fn reference_snr_db(config: &ScenarioConfig, h_d: Complex64) -> f64 {
    LinkBudget::from_config(config).reference_snr_db(h_d)
}

pub fn effective_snr_db(
    config: &ScenarioConfig,
    v: &ReflectionVector,
    ch: &ChannelRealization,
) -> Result<f64, SignalError> {
    LinkBudget::from_config(config).effective_snr_db(v, ch)
}
