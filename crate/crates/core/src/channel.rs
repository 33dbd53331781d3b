//! Deployment geometry, path loss and Rician fading for the reader, tag and
//! IRS links.
//!
//! The IRS is modelled as a line of `n_subsurfaces * elements_per_subsurface`
//! elements centred on `irs_pos`. Each element channel carries a distance
//! based path loss and a Rician fading draw whose line-of-sight phasor is
//! taken from the exact element-to-endpoint distance. A subsurface channel is
//! the coherent sum of its element channels.

use crate::linalg::{ensure_finite, CVector, LinalgError};
use crate::rng::SeededRng;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this are rejected by [`path_loss_db`].
pub const MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance {0} m is below the {MIN_DISTANCE_M} m near-field guard")]
    DistanceTooSmall(f64),
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("cascaded channel does not equal h_r * f at subsurface {0}")]
    InconsistentCascade(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Point3 = [f64; 3];

/// How the line-of-sight component of each element channel is phased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LosModel {
    /// `exp(-j 2 pi d / lambda)` from the exact element distance.
    #[default]
    Geometric,
    /// Independent uniformly random phase per element and realization.
    RandomPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub reader_pos: Point3,
    pub tag_pos: Point3,
    pub irs_pos: Point3,
    pub n_subsurfaces: usize,
    pub elements_per_subsurface: usize,
    pub carrier_freq_hz: f64,
    pub ref_pathloss_db: f64,
    pub pathloss_exp_reader_irs: f64,
    pub pathloss_exp_irs_tag: f64,
    pub pathloss_exp_reader_tag: f64,
    pub rician_factor_db: f64,
    pub noise_power_dbm: f64,
    pub tx_power_dbm: f64,
    pub tag_reflection: f64,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    /// Direction of the element line. `None` picks the direction orthogonal
    /// to both the IRS-reader and IRS-tag lines of sight.
    pub irs_axis: Option<Point3>,
    pub los_model: LosModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            reader_pos: [2.0, 0.0, 0.0],
            tag_pos: [2.0, 13.0, 0.0],
            irs_pos: [0.0, 13.0, 0.33],
            n_subsurfaces: 10,
            elements_per_subsurface: 5,
            carrier_freq_hz: 915e6,
            ref_pathloss_db: 30.0,
            pathloss_exp_reader_irs: 2.2,
            pathloss_exp_irs_tag: 2.2,
            pathloss_exp_reader_tag: 3.5,
            rician_factor_db: 6.0,
            noise_power_dbm: -90.0,
            tx_power_dbm: 30.0,
            tag_reflection: 1.0,
            element_spacing: 0.5,
            irs_axis: None,
            los_model: LosModel::Geometric,
        }
    }
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

impl ScenarioConfig {
    pub fn with_subsurfaces(mut self, n: usize) -> Self {
        self.n_subsurfaces = n;
        self
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn rician_factor_linear(&self) -> f64 {
        10f64.powf(self.rician_factor_db / 10.0)
    }

    /// Normalized noise power `sigma^2 / P_t` (linear).
    pub fn noise_ratio(&self) -> f64 {
        10f64.powf((self.noise_power_dbm - self.tx_power_dbm) / 10.0)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: &str| Err(ChannelError::InvalidConfig(msg.to_string()));
        if self.n_subsurfaces < 1 {
            return bad("n_subsurfaces must be at least 1");
        }
        if self.elements_per_subsurface < 1 {
            return bad("elements_per_subsurface must be at least 1");
        }
        let exps = [self.pathloss_exp_reader_irs, self.pathloss_exp_irs_tag, self.pathloss_exp_reader_tag];
        if exps.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return bad("path-loss exponents must be positive");
        }
        if !(0.0..=1.0).contains(&self.tag_reflection) {
            return bad("tag_reflection must lie in [0, 1]");
        }
        if !(self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite()) {
            return bad("carrier_freq_hz must be positive");
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return bad("element_spacing must be positive");
        }
        let finite = [self.ref_pathloss_db, self.rician_factor_db, self.noise_power_dbm, self.tx_power_dbm];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("decibel parameters must be finite");
        }
        let pts = [self.reader_pos, self.tag_pos, self.irs_pos];
        if pts.iter().flatten().any(|x| !x.is_finite()) {
            return bad("positions must be finite");
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if distance(pts[i], pts[j]) < MIN_DISTANCE_M {
                    return bad("reader, tag and IRS positions must be pairwise distinct");
                }
            }
        }
        if let Some(axis) = self.irs_axis {
            if !(norm(axis) > 0.0 && norm(axis).is_finite()) {
                return bad("irs_axis must be a nonzero finite vector");
            }
        }
        Ok(())
    }

    /// Unit vector along which the IRS elements are laid out.
    pub fn element_axis(&self) -> Point3 {
        let axis = self.irs_axis.unwrap_or_else(|| {
            let c = cross(sub(self.reader_pos, self.irs_pos), sub(self.tag_pos, self.irs_pos));
            if norm(c) > 1e-9 {
                c
            } else {
                [0.0, 0.0, 1.0]
            }
        });
        let n = norm(axis);
        [axis[0] / n, axis[1] / n, axis[2] / n]
    }

    /// Centres of all IRS elements, subsurface by subsurface.
    pub fn element_positions(&self) -> Vec<Point3> {
        let total = self.n_subsurfaces * self.elements_per_subsurface;
        let step = self.element_spacing * self.wavelength();
        let axis = self.element_axis();
        let mid = (total as f64 - 1.0) / 2.0;
        (0..total)
            .map(|i| {
                let off = (i as f64 - mid) * step;
                [self.irs_pos[0] + off * axis[0], self.irs_pos[1] + off * axis[1], self.irs_pos[2] + off * axis[2]]
            })
            .collect()
    }
}

/// Log-distance path loss with a 1 m reference.
pub fn path_loss_db(distance_m: f64, exponent: f64, ref_db: f64) -> Result<f64, ChannelError> {
    if distance_m.is_nan() || distance_m < MIN_DISTANCE_M {
        return Err(ChannelError::DistanceTooSmall(distance_m));
    }
    Ok(ref_db + 10.0 * exponent * distance_m.log10())
}

fn amplitude_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 20.0)
}

pub fn los_phasor(distance_m: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(1.0, -TAU * distance_m / wavelength)
}

/// Unit-modulus line-of-sight phasors from every IRS element to `endpoint`.
pub fn los_phase_vector(config: &ScenarioConfig, endpoint: Point3) -> Vec<Complex64> {
    let lambda = config.wavelength();
    config.element_positions().into_iter().map(|p| los_phasor(distance(p, endpoint), lambda)).collect()
}

/// `sqrt(k/(1+k)) * los + sqrt(1/(1+k)) * w` with `w` standard complex Gaussian.
pub fn rician_sample(los: &[Complex64], k_factor: f64, rng: &mut SeededRng) -> Vec<Complex64> {
    assert!(k_factor >= 0.0, "Rician factor must be nonnegative");
    let los_w = (k_factor / (1.0 + k_factor)).sqrt();
    let nlos_w = (1.0 / (1.0 + k_factor)).sqrt();
    los.iter().map(|&l| l * los_w + rng.complex_gaussian() * nlos_w).collect()
}

/// Element-wise `h_r .* f`.
pub fn cascade(h_r: &CVector, f: &CVector) -> Result<CVector, LinalgError> {
    if h_r.len() != f.len() {
        return Err(LinalgError::DimensionMismatch { expected: h_r.len(), found: f.len() });
    }
    Ok(h_r.component_mul(f))
}

/// One fading draw of every link in the deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    h_d: Complex64,
    f: CVector,
    h_r: CVector,
    h_c: CVector,
}

impl ChannelRealization {
    pub fn new(h_d: Complex64, f: CVector, h_r: CVector) -> Result<Self, ChannelError> {
        let h_c = cascade(&h_r, &f)?;
        ensure_finite(std::iter::once(&h_d).chain(f.iter()).chain(h_r.iter()))?;
        Ok(Self { h_d, f, h_r, h_c })
    }

    /// Accepts a precomputed cascade and checks it against `h_r .* f`.
    pub fn from_parts(h_d: Complex64, f: CVector, h_r: CVector, h_c: CVector) -> Result<Self, ChannelError> {
        let expected = Self::new(h_d, f, h_r)?;
        if expected.h_c.len() != h_c.len() {
            return Err(LinalgError::DimensionMismatch { expected: expected.h_c.len(), found: h_c.len() }.into());
        }
        for (n, (a, b)) in expected.h_c.iter().zip(h_c.iter()).enumerate() {
            if (a - b).norm() > 1e-12 * a.norm().max(b.norm()).max(f64::MIN_POSITIVE) {
                return Err(ChannelError::InconsistentCascade(n));
            }
        }
        Ok(expected)
    }

    /// Channel with a given cascade, `f = h_c` and `h_r = 1`.
    pub fn from_cascade(h_d: Complex64, h_c: CVector) -> Result<Self, ChannelError> {
        let ones = CVector::from_element(h_c.len(), Complex64::new(1.0, 0.0));
        Self::new(h_d, h_c, ones)
    }

    pub fn h_d(&self) -> Complex64 {
        self.h_d
    }

    pub fn f(&self) -> &CVector {
        &self.f
    }

    pub fn h_r(&self) -> &CVector {
        &self.h_r
    }

    pub fn h_c(&self) -> &CVector {
        &self.h_c
    }

    pub fn n_subsurfaces(&self) -> usize {
        self.h_c.len()
    }
}

fn element_link(
    config: &ScenarioConfig,
    endpoint: Point3,
    exponent: f64,
    rng: &mut SeededRng,
) -> Result<Vec<Complex64>, ChannelError> {
    let lambda = config.wavelength();
    let positions = config.element_positions();
    let mut amps = Vec::with_capacity(positions.len());
    let mut los = Vec::with_capacity(positions.len());
    for p in &positions {
        let d = distance(*p, endpoint);
        amps.push(amplitude_from_db(path_loss_db(d, exponent, config.ref_pathloss_db)?));
        los.push(match config.los_model {
            LosModel::Geometric => los_phasor(d, lambda),
            LosModel::RandomPhase => Complex64::from_polar(1.0, rng.uniform_phase()),
        });
    }
    let faded = rician_sample(&los, config.rician_factor_linear(), rng);
    Ok(faded.into_iter().zip(amps).map(|(x, a)| x * a).collect())
}

fn sum_subsurfaces(elements: &[Complex64], per: usize, n: usize) -> CVector {
    CVector::from_fn(n, |i, _| elements[i * per..(i + 1) * per].iter().sum())
}

/// Draws `h_d`, `f` and `h_r` for one coherence block.
///
/// `n_subsurfaces = 0` is accepted and yields a deployment without an IRS.
pub fn realize_channels(config: &ScenarioConfig, rng: &mut SeededRng) -> Result<ChannelRealization, ChannelError> {
    let n = config.n_subsurfaces;
    let per = config.elements_per_subsurface;
    let f_el = element_link(config, config.reader_pos, config.pathloss_exp_reader_irs, rng)?;
    let hr_el = element_link(config, config.tag_pos, config.pathloss_exp_irs_tag, rng)?;

    let d_rt = distance(config.reader_pos, config.tag_pos);
    let amp = amplitude_from_db(path_loss_db(d_rt, config.pathloss_exp_reader_tag, config.ref_pathloss_db)?);
    let los = match config.los_model {
        LosModel::Geometric => los_phasor(d_rt, config.wavelength()),
        LosModel::RandomPhase => Complex64::from_polar(1.0, rng.uniform_phase()),
    };
    let h_d = rician_sample(&[los], config.rician_factor_linear(), rng)[0] * amp;

    ChannelRealization::new(h_d, sum_subsurfaces(&f_el, per, n), sum_subsurfaces(&hr_el, per, n))
}
