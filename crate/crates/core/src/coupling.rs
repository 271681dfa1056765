//! Ponderomotive and detuned-cavity coupling factors, and the phase-quadrature
//! noise of a squeezed input passing through a tuned interferometer.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{ModelError, Result};
use crate::params::{CarrierLayout, FilterCavityParams, InterferometerParams, SqueezerParams};
use crate::quadrature::{ponderomotive_transfer, readout_variance, squeezed_input_covariance};

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

/// Kimble factor K(Ω) = 2Jγ / (Ω²(γ² + Ω²)).
pub fn kimble_factor(ifo: &InterferometerParams, omega: f64) -> Result<f64> {
    let omega = check_omega(omega)?;
    let gamma = ifo.detector_halfwidth();
    let w2 = omega * omega;
    Ok(2.0 * ifo.coupling_scale() * gamma / (w2 * (gamma * gamma + w2)))
}

/// Quadrature coupling of a cavity detuned by δ: 2γδ / (γ² − δ² + Ω²).
///
/// For |δ| > γ the denominator vanishes at Ω² = δ² − γ²; that point is
/// reported as [`ModelError::Singularity`].
pub fn cavity_coupling(halfwidth: f64, detuning: f64, omega: f64) -> Result<f64> {
    if !(halfwidth.is_finite() && halfwidth > 0.0) {
        return Err(ModelError::Domain {
            name: "halfwidth",
            value: halfwidth,
            reason: "must be finite and strictly positive",
        });
    }
    let (g2, d2, w2) = (halfwidth * halfwidth, detuning * detuning, omega * omega);
    let denom = g2 - d2 + w2;
    // below the cancellation error of γ² − δ² + Ω² the pole cannot be resolved
    if denom.abs() <= 4.0 * f64::EPSILON * (g2 + d2 + w2) {
        return Err(ModelError::Singularity { omega });
    }
    Ok(2.0 * halfwidth * detuning / denom)
}

/// Relative mismatch |K − K^cav(Ω, γ)·J/γ³| / K between the ponderomotive
/// coupling and an optimally detuned (δ = γ) cavity.
pub fn kimble_cavity_equivalence_error(
    ifo: &InterferometerParams,
    halfwidth: f64,
    omega: f64,
) -> Result<f64> {
    let omega = check_omega(omega)?;
    if omega >= halfwidth {
        return Err(ModelError::Domain {
            name: "omega",
            value: omega,
            reason: "equivalence only holds below the cavity halfwidth",
        });
    }
    let k = kimble_factor(ifo, omega)?;
    let scaled =
        cavity_coupling(halfwidth, halfwidth, omega)? * ifo.coupling_scale() / halfwidth.powi(3);
    Ok((k - scaled).abs() / k)
}

/// arctan K: the noise-minimizing angle in the phase-quadrature formula's
/// own convention (0 = phase squeezing). Add π/2 for the minor-axis angle
/// used by [`SqueezerParams`].
pub fn optimal_squeeze_angle(kimble: f64) -> f64 {
    kimble.atan()
}

/// Phase-quadrature output variance for coupling K, squeeze factor r and
/// squeeze angle φ in the formula's convention, with uncorrelated vacuum
/// inputs:
///
/// b_phase·[cosh r − sinh r (cos 2φ + K sin 2φ)]
///   − K·b_ampl·[cosh r + sinh r (cos 2φ − K⁻¹ sin 2φ)]
pub fn phase_noise_closed_form(
    kimble: f64,
    squeeze_factor: f64,
    phase_referenced_angle: f64,
) -> f64 {
    let (ch, sh) = (squeeze_factor.cosh(), squeeze_factor.sinh());
    let (s2, c2) = (2.0 * phase_referenced_angle).sin_cos();
    let phase_coeff = ch - sh * (c2 + kimble * s2);
    // K·K⁻¹ expanded so that K = 0 stays finite
    let ampl_coeff = -kimble * (ch + sh * c2) + sh * s2;
    phase_coeff * phase_coeff + ampl_coeff * ampl_coeff
}

/// Closed-form phase-quadrature noise at sideband frequency Ω.
pub fn phase_quadrature_noise_closed_form(
    ifo: &InterferometerParams,
    sq: &SqueezerParams,
    omega: f64,
) -> Result<f64> {
    let k = kimble_factor(ifo, omega)?;
    Ok(phase_noise_closed_form(
        k,
        sq.squeeze_factor(),
        sq.phase_referenced_angle(),
    ))
}

/// Same quantity as [`phase_quadrature_noise_closed_form`], obtained by propagating
/// the squeezed covariance through the ponderomotive map and projecting on
/// the phase quadrature.
pub fn phase_quadrature_noise_propagated(
    ifo: &InterferometerParams,
    sq: &SqueezerParams,
    omega: f64,
) -> Result<f64> {
    let k = kimble_factor(ifo, omega)?;
    Ok(phase_noise_propagated_for(k, sq))
}

pub(crate) fn phase_noise_propagated_for(kimble: f64, sq: &SqueezerParams) -> f64 {
    let out = ponderomotive_transfer(kimble).apply(&squeezed_input_covariance(sq));
    readout_variance(&out, FRAC_PI_2)
}

/// Signed offset of `carrier` (rad/s) from the nearest resonance of a cavity
/// whose resonances sit at integer multiples of the FSR, wrapped into
/// (−πΔ, πΔ].
pub fn detuning_from_resonance(carrier: f64, fsr_hz: f64) -> f64 {
    let fsr = TAU * fsr_hz;
    let offset = carrier.rem_euclid(fsr);
    if offset > PI * fsr_hz {
        offset - fsr
    } else {
        offset
    }
}

/// (δ_signal, δ_idler) for the given carrier layout.
pub fn detunings_from_layout(layout: &CarrierLayout, cav: &FilterCavityParams) -> (f64, f64) {
    (
        detuning_from_resonance(layout.signal_carrier(), cav.fsr_hz()),
        detuning_from_resonance(layout.idler_carrier(), cav.fsr_hz()),
    )
}

/// Copy of `cav` with its detunings taken from `layout`.
pub fn cavity_for_layout(
    layout: &CarrierLayout,
    cav: &FilterCavityParams,
) -> Result<FilterCavityParams> {
    let (signal, idler) = detunings_from_layout(layout, cav);
    cav.with_detunings(signal, idler)
}
