//! JSON scenario configuration. Every section is optional and overlays the
//! preset named by `scenario` (default `custom`); keys carry their units.
//!
//! ```json
//! {
//!   "scenario": "fig3a",
//!   "cavity": { "halfwidth_rad_s": 942477.8, "detuning_idler_rad_s": 0.0 },
//!   "squeezer": { "squeeze_factor": 1.0, "injection_angle_rad": 1.5708 },
//!   "readout": { "readout_angle_rad": 1.5708, "efficiency": 0.7 },
//!   "grid": { "min_hz": 1e4, "max_hz": 3e7, "points": 512, "spacing": "log" },
//!   "angles": 256
//! }
//! ```

use std::fs;
use std::path::Path;

use epr_noise::coupling::cavity_for_layout;
use epr_noise::fit::{FitOptions, FreeParameter, ModelParams};
use epr_noise::presets::{Scenario, ScenarioTag};
use epr_noise::spectra::SqueezeMode;
use epr_noise::{
    CarrierLayout, FilterCavityParams, FrequencyGrid, InterferometerParams, ReadoutParams,
    SqueezerParams,
};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<String>,
    pub interferometer: Option<InterferometerSection>,
    pub cavity: Option<CavitySection>,
    pub carriers: Option<CarrierSection>,
    pub squeezer: Option<SqueezerSection>,
    pub readout: Option<ReadoutSection>,
    pub grid: Option<GridSection>,
    pub angles: Option<usize>,
    pub map_mode: Option<MapMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerSection {
    pub circulating_power_w: Option<f64>,
    pub mirror_mass_kg: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub arm_length_m: Option<f64>,
    pub halfwidth_rad_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub halfwidth_rad_s: Option<f64>,
    pub detuning_signal_rad_s: Option<f64>,
    pub detuning_idler_rad_s: Option<f64>,
    pub fsr_hz: Option<f64>,
    pub length_m: Option<f64>,
}

/// Absolute carrier frequencies; when given, the detunings follow from
/// their offsets to the nearest cavity resonance.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSection {
    pub pump_rad_s: f64,
    pub signal_rad_s: f64,
    pub idler_rad_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezerSection {
    pub squeeze_factor: Option<f64>,
    pub injection_angle_rad: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    pub readout_angle_rad: Option<f64>,
    pub efficiency: Option<f64>,
    pub lo_power_signal_w: Option<f64>,
    pub lo_power_idler_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub min_hz: f64,
    pub max_hz: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Lin,
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMode {
    None,
    FixedAngle,
    FrequencyDependent,
}

impl From<MapMode> for SqueezeMode {
    fn from(m: MapMode) -> Self {
        match m {
            MapMode::None => SqueezeMode::None,
            MapMode::FixedAngle => SqueezeMode::FixedAngle,
            MapMode::FrequencyDependent => SqueezeMode::FrequencyDependent,
        }
    }
}

impl GridSection {
    pub fn build(&self) -> Result<FrequencyGrid> {
        match self.spacing {
            Spacing::Lin => FrequencyGrid::linear_hz(self.min_hz, self.max_hz, self.points),
            Spacing::Log => FrequencyGrid::logarithmic_hz(self.min_hz, self.max_hz, self.points),
        }
        .map_err(|e| CliError::validation(format!("grid: {e}")))
    }
}

/// `<min_hz>:<max_hz>:<points>:<lin|log>`
pub fn parse_grid(spec: &str) -> Result<GridSection> {
    let bad = |what: &str| CliError::validation(format!("--grid '{spec}': {what}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [min, max, points, spacing] = parts[..] else {
        return Err(bad("expected <min_hz>:<max_hz>:<points>:<lin|log>"));
    };
    Ok(GridSection {
        min_hz: min.parse().map_err(|_| bad("min_hz is not a number"))?,
        max_hz: max.parse().map_err(|_| bad("max_hz is not a number"))?,
        points: points
            .parse()
            .map_err(|_| bad("points is not an integer"))?,
        spacing: match spacing {
            "lin" => Spacing::Lin,
            "log" => Spacing::Log,
            _ => return Err(bad("spacing must be 'lin' or 'log'")),
        },
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Overlay this configuration on its preset and re-validate every
    /// parameter. `preset` takes precedence over the `scenario` key.
    pub fn resolve(&self, preset: Option<ScenarioTag>) -> Result<Scenario> {
        let tag = match (preset, &self.scenario) {
            (Some(tag), _) => tag,
            (None, Some(name)) => name
                .parse()
                .map_err(|e: String| CliError::validation(format!("scenario: {e}")))?,
            (None, None) => ScenarioTag::Custom,
        };
        let mut sc = Scenario::preset(tag);

        if let Some(s) = &self.interferometer {
            let base = sc.interferometer;
            sc.interferometer = InterferometerParams::new(
                s.circulating_power_w.unwrap_or(base.circulating_power()),
                s.mirror_mass_kg.unwrap_or(base.mirror_mass()),
                s.wavelength_m.unwrap_or(base.wavelength()),
                s.arm_length_m.unwrap_or(base.arm_length()),
                s.halfwidth_rad_s.unwrap_or(base.detector_halfwidth()),
            )
            .map_err(|e| CliError::validation(format!("interferometer: {e}")))?;
        }

        let cav = self.cavity.clone().unwrap_or_default();
        let base = sc.cavity;
        sc.cavity = FilterCavityParams::with_geometry(
            cav.halfwidth_rad_s.unwrap_or(base.halfwidth()),
            cav.detuning_signal_rad_s.unwrap_or(base.detuning_signal()),
            cav.detuning_idler_rad_s.unwrap_or(base.detuning_idler()),
            cav.fsr_hz.unwrap_or(base.fsr_hz()),
            cav.length_m.unwrap_or(base.length_m()),
        )
        .map_err(|e| CliError::validation(format!("cavity: {e}")))?;

        if let Some(c) = &self.carriers {
            if cav.detuning_signal_rad_s.is_some() || cav.detuning_idler_rad_s.is_some() {
                return Err(CliError::validation(
                    "carriers: give either carrier frequencies or cavity detunings, not both",
                ));
            }
            let layout = CarrierLayout::new(c.pump_rad_s, c.signal_rad_s, c.idler_rad_s)
                .map_err(|e| CliError::validation(format!("carriers: {e}")))?;
            sc.cavity = cavity_for_layout(&layout, &sc.cavity)
                .map_err(|e| CliError::validation(format!("carriers: {e}")))?;
        }

        if let Some(s) = &self.squeezer {
            sc.squeezer = SqueezerParams::new(
                s.squeeze_factor.unwrap_or(sc.squeezer.squeeze_factor()),
                s.injection_angle_rad
                    .unwrap_or(sc.squeezer.injection_angle()),
            )
            .map_err(|e| CliError::validation(format!("squeezer: {e}")))?;
        }

        if let Some(s) = &self.readout {
            let base = sc.readout;
            sc.readout = ReadoutParams::new(
                s.readout_angle_rad.unwrap_or(base.readout_angle()),
                s.efficiency.unwrap_or(base.efficiency()),
                s.lo_power_signal_w.unwrap_or(base.lo_power_signal()),
                s.lo_power_idler_w.unwrap_or(base.lo_power_idler()),
            )
            .map_err(|e| CliError::validation(format!("readout: {e}")))?;
        }

        if let Some(g) = &self.grid {
            sc.grid = g.build()?;
        }
        if let Some(n) = self.angles {
            sc.angle_count = check_angles(n)?;
        }
        if let Some(m) = self.map_mode {
            sc.map_mode = m.into();
        }
        Ok(sc)
    }
}

pub fn check_angles(n: usize) -> Result<usize> {
    if n < 4 {
        return Err(CliError::validation(format!(
            "angles: {n} readout angles requested, at least 4 are needed"
        )));
    }
    Ok(n)
}

/// Initial guess, free parameters and optimizer settings for `fit`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub initial: ModelParams,
    pub free: Vec<FreeParameter>,
    #[serde(default)]
    pub options: Option<FitOptionsSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptionsSection {
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub refine: Option<bool>,
}

impl FitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn options(&self) -> FitOptions {
        let d = FitOptions::default();
        let o = self.options.clone().unwrap_or_default();
        FitOptions {
            max_iterations: o.max_iterations.unwrap_or(d.max_iterations),
            tolerance: o.tolerance.unwrap_or(d.tolerance),
            refine: o.refine.unwrap_or(d.refine),
        }
    }
}
