//! Physical parameter sets. All constructors validate; the values are
//! immutable afterwards.

use std::f64::consts::{PI, TAU};

use crate::error::{finite, positive, ModelError, Result};

/// Free spectral range of the 2.5 m emulation cavity, Hz.
pub const DEFAULT_FSR_HZ: f64 = 58.73e6;
/// Length of the emulation cavity, m.
pub const DEFAULT_CAVITY_LENGTH_M: f64 = 2.5;

/// Detector parameters entering the ponderomotive (Kimble) coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams {
    circulating_power: f64,
    mirror_mass: f64,
    wavelength: f64,
    arm_length: f64,
    detector_halfwidth: f64,
}

impl InterferometerParams {
    /// `circulating_power` in W, `mirror_mass` in kg, `wavelength` and
    /// `arm_length` in m, `detector_halfwidth` in rad/s.
    pub fn new(
        circulating_power: f64,
        mirror_mass: f64,
        wavelength: f64,
        arm_length: f64,
        detector_halfwidth: f64,
    ) -> Result<Self> {
        Ok(Self {
            circulating_power: positive("circulating_power", circulating_power)?,
            mirror_mass: positive("mirror_mass", mirror_mass)?,
            wavelength: positive("wavelength", wavelength)?,
            arm_length: positive("arm_length", arm_length)?,
            detector_halfwidth: positive("detector_halfwidth", detector_halfwidth)?,
        })
    }

    /// A parameter set loosely resembling a 4 km second-generation detector.
    pub fn advanced_ligo_like() -> Self {
        Self::new(800e3, 40.0, 1064e-9, 4000.0, TAU * 500.0).expect("valid defaults")
    }

    pub fn circulating_power(&self) -> f64 {
        self.circulating_power
    }

    pub fn mirror_mass(&self) -> f64 {
        self.mirror_mass
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn arm_length(&self) -> f64 {
        self.arm_length
    }

    pub fn detector_halfwidth(&self) -> f64 {
        self.detector_halfwidth
    }

    /// Optomechanical scale J = 8π I_c / (M λ L), in s⁻³.
    pub fn coupling_scale(&self) -> f64 {
        8.0 * PI * self.circulating_power / (self.mirror_mass * self.wavelength * self.arm_length)
    }
}

/// Detuned cavity seen by the signal and idler carriers.
///
/// Detunings are signed, in rad/s, and positive when the carrier sits above
/// its nearest resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCavityParams {
    halfwidth: f64,
    detuning_signal: f64,
    detuning_idler: f64,
    fsr_hz: f64,
    length_m: f64,
}

impl FilterCavityParams {
    /// Cavity with the default 2.5 m / 58.73 MHz geometry.
    pub fn new(halfwidth: f64, detuning_signal: f64, detuning_idler: f64) -> Result<Self> {
        Self::with_geometry(
            halfwidth,
            detuning_signal,
            detuning_idler,
            DEFAULT_FSR_HZ,
            DEFAULT_CAVITY_LENGTH_M,
        )
    }

    pub fn with_geometry(
        halfwidth: f64,
        detuning_signal: f64,
        detuning_idler: f64,
        fsr_hz: f64,
        length_m: f64,
    ) -> Result<Self> {
        let halfwidth = positive("halfwidth", halfwidth)?;
        let fsr_hz = positive("fsr_hz", fsr_hz)?;
        let length_m = positive("length_m", length_m)?;
        let limit = PI * fsr_hz;
        for (name, d) in [
            ("detuning_signal", detuning_signal),
            ("detuning_idler", detuning_idler),
        ] {
            finite(name, d)?;
            if d.abs() > limit {
                return Err(ModelError::Domain {
                    name,
                    value: d,
                    reason: "detuning must lie within half a free spectral range",
                });
            }
        }
        Ok(Self {
            halfwidth,
            detuning_signal,
            detuning_idler,
            fsr_hz,
            length_m,
        })
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn detuning_signal(&self) -> f64 {
        self.detuning_signal
    }

    pub fn detuning_idler(&self) -> f64 {
        self.detuning_idler
    }

    pub fn fsr_hz(&self) -> f64 {
        self.fsr_hz
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    /// Same geometry, new detunings.
    pub fn with_detunings(&self, detuning_signal: f64, detuning_idler: f64) -> Result<Self> {
        Self::with_geometry(
            self.halfwidth,
            detuning_signal,
            detuning_idler,
            self.fsr_hz,
            self.length_m,
        )
    }
}

/// Pump, signal and idler carrier frequencies (rad/s) of a non-degenerate
/// parametric source. Energy conservation: ω_pump = ω_S + ω_I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierLayout {
    pump_frequency: f64,
    signal_carrier: f64,
    idler_carrier: f64,
}

impl CarrierLayout {
    const ENERGY_TOLERANCE: f64 = 1e-12;

    pub fn new(pump_frequency: f64, signal_carrier: f64, idler_carrier: f64) -> Result<Self> {
        positive("pump_frequency", pump_frequency)?;
        positive("signal_carrier", signal_carrier)?;
        positive("idler_carrier", idler_carrier)?;
        if signal_carrier >= idler_carrier {
            return Err(ModelError::Domain {
                name: "signal_carrier",
                value: signal_carrier,
                reason: "signal carrier must lie below the idler carrier",
            });
        }
        let mismatch = (signal_carrier + idler_carrier - pump_frequency).abs() / pump_frequency;
        if mismatch > Self::ENERGY_TOLERANCE {
            return Err(ModelError::Domain {
                name: "pump_frequency",
                value: pump_frequency,
                reason: "signal + idler must equal the pump frequency",
            });
        }
        Ok(Self {
            pump_frequency,
            signal_carrier,
            idler_carrier,
        })
    }

    /// Carriers placed at ω_pump/2 ∓ `offset`.
    pub fn symmetric(pump_frequency: f64, offset: f64) -> Result<Self> {
        let offset = positive("offset", offset)?;
        let half = 0.5 * pump_frequency;
        Self::new(pump_frequency, half - offset, half + offset)
    }

    pub fn pump_frequency(&self) -> f64 {
        self.pump_frequency
    }

    pub fn signal_carrier(&self) -> f64 {
        self.signal_carrier
    }

    pub fn idler_carrier(&self) -> f64 {
        self.idler_carrier
    }
}

/// Injected squeezing. `injection_angle` is the quadrature angle of the
/// squeezed (minor) axis: 0 squeezes amplitude, π/2 squeezes phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezerParams {
    squeeze_factor: f64,
    injection_angle: f64,
}

impl SqueezerParams {
    pub fn new(squeeze_factor: f64, injection_angle: f64) -> Result<Self> {
        finite("squeeze_factor", squeeze_factor)?;
        finite("injection_angle", injection_angle)?;
        if squeeze_factor < 0.0 {
            return Err(ModelError::Domain {
                name: "squeeze_factor",
                value: squeeze_factor,
                reason: "must be non-negative",
            });
        }
        Ok(Self {
            squeeze_factor,
            injection_angle,
        })
    }

    /// Build from the angle convention of the phase-quadrature noise formula,
    /// where 0 squeezes the phase quadrature (minor axis = angle + π/2).
    pub fn from_phase_referenced_angle(
        squeeze_factor: f64,
        phase_referenced_angle: f64,
    ) -> Result<Self> {
        Self::new(squeeze_factor, phase_referenced_angle + 0.5 * PI)
    }

    pub fn vacuum() -> Self {
        Self {
            squeeze_factor: 0.0,
            injection_angle: 0.0,
        }
    }

    pub fn squeeze_factor(&self) -> f64 {
        self.squeeze_factor
    }

    pub fn injection_angle(&self) -> f64 {
        self.injection_angle
    }

    /// Injection angle reduced into [0, π).
    pub fn reduced_angle(&self) -> f64 {
        self.injection_angle.rem_euclid(PI)
    }

    /// The same angle in the phase-quadrature formula convention.
    pub fn phase_referenced_angle(&self) -> f64 {
        self.injection_angle - 0.5 * PI
    }
}

/// Bichromatic homodyne readout settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutParams {
    readout_angle: f64,
    efficiency: f64,
    lo_power_signal: f64,
    lo_power_idler: f64,
    conditioning_gain: Option<f64>,
}

impl ReadoutParams {
    pub fn new(
        readout_angle: f64,
        efficiency: f64,
        lo_power_signal: f64,
        lo_power_idler: f64,
    ) -> Result<Self> {
        finite("readout_angle", readout_angle)?;
        check_efficiency(efficiency)?;
        Ok(Self {
            readout_angle,
            efficiency,
            lo_power_signal: positive("lo_power_signal", lo_power_signal)?,
            lo_power_idler: positive("lo_power_idler", lo_power_idler)?,
            conditioning_gain: None,
        })
    }

    /// Equal local-oscillator powers.
    pub fn balanced(readout_angle: f64, efficiency: f64) -> Result<Self> {
        Self::new(readout_angle, efficiency, 1.0, 1.0)
    }

    pub fn with_conditioning_gain(mut self, gain: f64) -> Result<Self> {
        self.conditioning_gain = Some(finite("conditioning_gain", gain)?);
        Ok(self)
    }

    pub fn with_readout_angle(mut self, readout_angle: f64) -> Result<Self> {
        self.readout_angle = finite("readout_angle", readout_angle)?;
        Ok(self)
    }

    pub fn readout_angle(&self) -> f64 {
        self.readout_angle
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn lo_power_signal(&self) -> f64 {
        self.lo_power_signal
    }

    pub fn lo_power_idler(&self) -> f64 {
        self.lo_power_idler
    }

    pub fn conditioning_gain(&self) -> Option<f64> {
        self.conditioning_gain
    }

    /// 2√(αβ)/(α+β), which only depends on α/β and is ≤ 1.
    pub fn lo_balance(&self) -> f64 {
        let ratio = self.lo_power_signal / self.lo_power_idler;
        2.0 * ratio.sqrt() / (1.0 + ratio)
    }
}

pub(crate) fn check_efficiency(efficiency: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&efficiency) {
        Ok(efficiency)
    } else {
        Err(ModelError::Domain {
            name: "efficiency",
            value: efficiency,
            reason: "must lie in [0, 1]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpacing {
    Linear,
    Logarithmic,
    Custom,
}

/// Strictly increasing, positive sideband frequencies Ω in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    spacing: GridSpacing,
}

impl FrequencyGrid {
    pub fn from_omegas(omegas: Vec<f64>) -> Result<Self> {
        Self::checked(omegas, GridSpacing::Custom)
    }

    /// `points` values from `min_hz` to `max_hz` inclusive, equally spaced.
    pub fn linear_hz(min_hz: f64, max_hz: f64, points: usize) -> Result<Self> {
        let (lo, hi) = Self::check_range(min_hz, max_hz, points)?;
        let omegas = if points == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        lo + step * i as f64
                    }
                })
                .collect()
        };
        Self::checked(omegas, GridSpacing::Linear)
    }

    /// `points` values from `min_hz` to `max_hz` inclusive, equally spaced in log.
    pub fn logarithmic_hz(min_hz: f64, max_hz: f64, points: usize) -> Result<Self> {
        let (lo, hi) = Self::check_range(min_hz, max_hz, points)?;
        let omegas = if points == 1 {
            vec![lo]
        } else {
            let ratio = (hi / lo).ln() / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        lo * (ratio * i as f64).exp()
                    }
                })
                .collect()
        };
        Self::checked(omegas, GridSpacing::Logarithmic)
    }

    /// Default grid for the cavity scenarios: 10 kHz – 30 MHz, 512 log points.
    pub fn default_cavity() -> Self {
        Self::logarithmic_hz(10e3, 30e6, 512).expect("valid default grid")
    }

    fn check_range(min_hz: f64, max_hz: f64, points: usize) -> Result<(f64, f64)> {
        if points == 0 {
            return Err(ModelError::InvalidGrid(
                "grid needs at least one point".into(),
            ));
        }
        if !(min_hz.is_finite() && max_hz.is_finite() && min_hz > 0.0) {
            return Err(ModelError::InvalidGrid(format!(
                "bounds must be finite and positive, got {min_hz}..{max_hz} Hz"
            )));
        }
        if points > 1 && max_hz <= min_hz {
            return Err(ModelError::InvalidGrid(format!(
                "upper bound {max_hz} Hz must exceed lower bound {min_hz} Hz"
            )));
        }
        Ok((TAU * min_hz, TAU * max_hz))
    }

    fn checked(omegas: Vec<f64>, spacing: GridSpacing) -> Result<Self> {
        if omegas.is_empty() {
            return Err(ModelError::InvalidGrid("grid is empty".into()));
        }
        if let Some(i) = omegas.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(ModelError::InvalidGrid(format!(
                "point {i} = {} is not a positive finite frequency",
                omegas[i]
            )));
        }
        if let Some(i) = omegas.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidGrid(format!(
                "grid is not strictly increasing at point {}",
                i + 1
            )));
        }
        Ok(Self { omegas, spacing })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn spacing(&self) -> GridSpacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}
