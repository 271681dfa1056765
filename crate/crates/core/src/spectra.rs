//! Noise spectral density of EPR-conditioned squeezing reflected off a
//! detuned cavity, plus the derived spectrogram and squeeze-angle views.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;

use crate::coupling::{kimble_factor, optimal_squeeze_angle};
use crate::error::{ModelError, Result};
use crate::params::{
    check_efficiency, FilterCavityParams, FrequencyGrid, InterferometerParams, ReadoutParams,
    SqueezerParams,
};
use crate::quadrature::{
    apply_readout_loss, ponderomotive_transfer, readout_variance, squeezed_input_covariance,
    QuadCovariance,
};

/// Lower clip applied by [`display_db`].
pub const DISPLAY_FLOOR_DB: f64 = -60.0;

pub fn to_db(value: f64) -> f64 {
    10.0 * value.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dB value clipped at [`DISPLAY_FLOOR_DB`] for plotting. Stored data is
/// never clipped.
pub fn display_db(db: f64) -> f64 {
    db.max(DISPLAY_FLOOR_DB)
}

/// C(Ω) = (δ₁² − Ω²)(δ₂² − Ω²) + γ²(γ² + δ₁² + δ₂² + 2Ω²)
pub fn coefficient_c(gamma: f64, d1: f64, d2: f64, omega: f64) -> f64 {
    let (g2, a2, b2, w2) = (gamma * gamma, d1 * d1, d2 * d2, omega * omega);
    (a2 - w2) * (b2 - w2) + g2 * (g2 + a2 + b2 + 2.0 * w2)
}

/// D(Ω) = Π_{i=1,2} (γ² + (δᵢ − Ω)²)(γ² + (δᵢ + Ω)²), strictly positive.
pub fn coefficient_d(gamma: f64, d1: f64, d2: f64, omega: f64) -> f64 {
    let g2 = gamma * gamma;
    [d1, d2]
        .iter()
        .map(|d| (g2 + (d - omega).powi(2)) * (g2 + (d + omega).powi(2)))
        .product()
}

/// The pair (K₁, K₂) at one sideband frequency.
///
/// Evaluated on frequencies normalized by max(γ, |δ₁|, |δ₂|, Ω); both
/// coefficients are homogeneous of degree zero.
pub fn coupling_k(gamma: f64, d1: f64, d2: f64, omega: f64) -> (f64, f64) {
    let scale = gamma.max(d1.abs()).max(d2.abs()).max(omega.abs());
    let (g, a, b, w) = (gamma / scale, d1 / scale, d2 / scale, omega / scale);
    let c = coefficient_c(g, a, b, w);
    let d = coefficient_d(g, a, b, w);
    let sum = a + b;
    let k1 = c / d * (c - 2.0 * g * g * sum * sum);
    let k2 = c / d * (2.0 * g * sum * (g * g - a * b + w * w));
    (k1, k2)
}

pub fn coupling_k1(gamma: f64, d1: f64, d2: f64, omega: f64) -> f64 {
    coupling_k(gamma, d1, d2, omega).0
}

pub fn coupling_k2(gamma: f64, d1: f64, d2: f64, omega: f64) -> f64 {
    coupling_k(gamma, d1, d2, omega).1
}

fn cavity_k(cav: &FilterCavityParams, omega: f64) -> (f64, f64) {
    coupling_k(
        cav.halfwidth(),
        cav.detuning_signal(),
        cav.detuning_idler(),
        omega,
    )
}

/// |C|/√D = √(K₁² + K₂²) ∈ (0, 1]: how much of the signal–idler correlation
/// survives at Ω for the best readout angle.
pub fn inference_fidelity(cav: &FilterCavityParams, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let (k1, k2) = cavity_k(cav, omega);
    Ok(k1.hypot(k2))
}

fn check_omega(omega: f64) -> Result<f64> {
    if omega.is_finite() && omega > 0.0 {
        Ok(omega)
    } else {
        Err(ModelError::Domain {
            name: "omega",
            value: omega,
            reason: "sideband frequency must be positive",
        })
    }
}

/// S(Ω) = 1 − η + η cosh 2r + η·2√(αβ)/(α+β)·sinh 2r·(K₁ cos 2ζ + K₂ sin 2ζ)
pub fn epr_noise(
    cav: &FilterCavityParams,
    squeeze_factor: f64,
    rd: &ReadoutParams,
    omega: f64,
) -> Result<f64> {
    check_omega(omega)?;
    let (k1, k2) = cavity_k(cav, omega);
    let eta = rd.efficiency();
    let two_r = 2.0 * squeeze_factor;
    let (s2, c2) = (2.0 * rd.readout_angle()).sin_cos();
    // 1 − η + η cosh 2r regrouped so that r = 0 gives exactly 1
    let excess = 2.0 * squeeze_factor.sinh().powi(2);
    Ok(1.0 + eta * (excess + rd.lo_balance() * two_r.sinh() * (k1 * c2 + k2 * s2)))
}

/// Minimum of S over readout angle at Ω, in closed form.
pub fn min_epr_noise(
    cav: &FilterCavityParams,
    squeeze_factor: f64,
    rd: &ReadoutParams,
    omega: f64,
) -> Result<f64> {
    let fidelity = inference_fidelity(cav, omega)?;
    let eta = rd.efficiency();
    let two_r = 2.0 * squeeze_factor;
    let excess = 2.0 * squeeze_factor.sinh().powi(2);
    Ok(1.0 + eta * (excess - rd.lo_balance() * two_r.sinh() * fidelity))
}

/// Readout angle (mod π) minimizing S at Ω.
pub fn optimal_readout_angle(cav: &FilterCavityParams, omega: f64) -> f64 {
    let (k1, k2) = cavity_k(cav, omega);
    (0.5 * k2.atan2(k1) + FRAC_PI_2).rem_euclid(PI)
}

/// S(Ω) on a frequency grid; linear values with vacuum = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    grid: FrequencyGrid,
    values: Vec<f64>,
}

impl NoiseSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(ModelError::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ModelError::Domain {
                name: "noise",
                value: values[i],
                reason: "spectral density must be positive",
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn db(&self) -> Vec<f64> {
        self.values.iter().map(|v| to_db(*v)).collect()
    }
}

pub fn epr_noise_spectrum(
    cav: &FilterCavityParams,
    sq: &SqueezerParams,
    rd: &ReadoutParams,
    grid: &FrequencyGrid,
) -> Result<NoiseSpectrum> {
    let values = grid
        .omegas()
        .iter()
        .map(|w| epr_noise(cav, sq.squeeze_factor(), rd, *w))
        .collect::<Result<Vec<_>>>()?;
    NoiseSpectrum::new(grid.clone(), values)
}

/// Noise in dB over (Ω, ζ); rows follow the frequency grid, columns the
/// readout angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    grid: FrequencyGrid,
    angles: Vec<f64>,
    values_db: Vec<Vec<f64>>,
}

impl Spectrogram {
    pub fn new(grid: FrequencyGrid, angles: Vec<f64>, values_db: Vec<Vec<f64>>) -> Result<Self> {
        if values_db.len() != grid.len() || values_db.iter().any(|row| row.len() != angles.len()) {
            return Err(ModelError::InvalidGrid(
                "spectrogram dimensions do not match its axes".into(),
            ));
        }
        if angles.is_empty() {
            return Err(ModelError::InvalidGrid("no readout angles".into()));
        }
        Ok(Self {
            grid,
            angles,
            values_db,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn values_db(&self) -> &[Vec<f64>] {
        &self.values_db
    }

    /// (minimum dB, angle of the minimum) for every frequency row.
    pub fn row_minima(&self) -> Vec<(f64, f64)> {
        self.values_db
            .iter()
            .map(|row| {
                let (j, v) = row
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("non-empty row");
                (*v, self.angles[j])
            })
            .collect()
    }

    /// Span of the π-unwrapped argmin angle along the frequency axis.
    pub fn argmin_angle_span(&self) -> f64 {
        let angles: Vec<f64> = self.row_minima().iter().map(|(_, a)| *a).collect();
        span(&unwrap_backward(&angles, PI))
    }
}

fn uniform_angles(angle_count: usize) -> Result<Vec<f64>> {
    if angle_count < 4 {
        return Err(ModelError::Domain {
            name: "angle_count",
            value: angle_count as f64,
            reason: "at least 4 readout angles are required",
        });
    }
    Ok((0..angle_count)
        .map(|j| TAU * j as f64 / angle_count as f64)
        .collect())
}

/// S in dB over the grid and `angle_count` readout angles spread uniformly
/// over [0, 2π). The readout angle of `rd_template` is ignored.
pub fn spectrogram(
    cav: &FilterCavityParams,
    sq: &SqueezerParams,
    rd_template: &ReadoutParams,
    grid: &FrequencyGrid,
    angle_count: usize,
) -> Result<Spectrogram> {
    let angles = uniform_angles(angle_count)?;
    let values = grid
        .omegas()
        .par_iter()
        .map(|w| {
            angles
                .iter()
                .map(|z| {
                    let rd = rd_template.with_readout_angle(*z)?;
                    epr_noise(cav, sq.squeeze_factor(), &rd, *w).map(to_db)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrogram::new(grid.clone(), angles, values)
}

/// Frequency-dependent squeeze angle θ(Ω) = ½ atan2(K₂, K₁).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTrajectory {
    pub points: Vec<(f64, f64)>,
}

impl AngleTrajectory {
    pub fn span(&self) -> f64 {
        let angles: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        span(&angles)
    }
}

/// θ(Ω) unwrapped with nearest-branch continuation, starting from the
/// highest grid frequency (where θ → 0) and walking down.
pub fn squeeze_angle_trajectory(cav: &FilterCavityParams, grid: &FrequencyGrid) -> AngleTrajectory {
    let raw: Vec<f64> = grid
        .omegas()
        .iter()
        .map(|w| {
            let (k1, k2) = cavity_k(cav, *w);
            assert!(k1 != 0.0 || k2 != 0.0, "K1 = K2 = 0 at omega = {w}");
            0.5 * k2.atan2(k1)
        })
        .collect();
    let unwrapped = unwrap_backward(&raw, PI);
    AngleTrajectory {
        points: grid.omegas().iter().copied().zip(unwrapped).collect(),
    }
}

/// Unwrap `values` (defined modulo `period`) by nearest-branch continuation
/// from the last element backwards. The last element is left untouched.
pub fn unwrap_backward(values: &[f64], period: f64) -> Vec<f64> {
    let mut out = values.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        let next = out[i + 1];
        let diff = out[i] - next;
        out[i] -= period * (diff / period).round();
    }
    out
}

fn span(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// How the squeeze angle is chosen for the interferometer noise map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeMode {
    /// No squeezing injected.
    None,
    /// The squeezer's own injection angle at every frequency.
    FixedAngle,
    /// Minor axis rotated to arctan K(Ω) + π/2 at every frequency.
    FrequencyDependent,
}

fn input_state(sq: &SqueezerParams, kimble: f64, mode: SqueezeMode) -> QuadCovariance {
    match mode {
        SqueezeMode::None => QuadCovariance::vacuum(),
        SqueezeMode::FixedAngle => squeezed_input_covariance(sq),
        SqueezeMode::FrequencyDependent => squeezed_input_covariance(
            &SqueezerParams::from_phase_referenced_angle(
                sq.squeeze_factor(),
                optimal_squeeze_angle(kimble),
            )
            .expect("finite angle"),
        ),
    }
}

/// Readout noise of the squeezed interferometer divided by the unsqueezed
/// one, at a single (Ω, ζ).
pub fn interferometer_noise_ratio(
    ifo: &InterferometerParams,
    sq: &SqueezerParams,
    efficiency: f64,
    omega: f64,
    zeta: f64,
    mode: SqueezeMode,
) -> Result<f64> {
    check_efficiency(efficiency)?;
    let k = kimble_factor(ifo, omega)?;
    let transfer = ponderomotive_transfer(k);
    let squeezed = apply_readout_loss(&transfer.apply(&input_state(sq, k, mode)), efficiency)?;
    let reference = apply_readout_loss(&transfer.apply(&QuadCovariance::vacuum()), efficiency)?;
    Ok(readout_variance(&squeezed, zeta) / readout_variance(&reference, zeta))
}

/// Quantum-noise improvement map over (Ω, ζ), in dB relative to the
/// unsqueezed interferometer (negative = better).
pub fn interferometer_noise_map(
    ifo: &InterferometerParams,
    sq: &SqueezerParams,
    efficiency: f64,
    grid: &FrequencyGrid,
    angle_count: usize,
    mode: SqueezeMode,
) -> Result<Spectrogram> {
    check_efficiency(efficiency)?;
    let angles = uniform_angles(angle_count)?;
    let values = grid
        .omegas()
        .par_iter()
        .map(|w| {
            angles
                .iter()
                .map(|z| interferometer_noise_ratio(ifo, sq, efficiency, *w, *z, mode).map(to_db))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrogram::new(grid.clone(), angles, values)
}
