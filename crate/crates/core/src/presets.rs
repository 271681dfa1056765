//! Parameter sets for the detuning regimes of the cavity experiment and for
//! the interferometer noise maps.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use crate::params::{
    FilterCavityParams, FrequencyGrid, InterferometerParams, ReadoutParams, SqueezerParams,
};
use crate::spectra::SqueezeMode;

/// Cavity HWHM linewidth, rad/s.
pub const CAVITY_HALFWIDTH: f64 = TAU * 150e3;
/// Signal-carrier detuning, rad/s.
pub const SIGNAL_DETUNING: f64 = TAU * 460e3;
/// High-frequency plateau targeted by the cavity presets, dB.
pub const PLATEAU_DB: f64 = -4.0;
/// Squeeze factor used by the cavity presets.
pub const PRESET_SQUEEZE_FACTOR: f64 = 1.0;
/// Squeeze factor and detection efficiency of the noise-map presets.
pub const MAP_SQUEEZE_FACTOR: f64 = 1.0;
pub const MAP_EFFICIENCY: f64 = 0.6;
pub const DEFAULT_ANGLE_COUNT: usize = 256;

/// η such that 1 − η + η e^{−2r} equals `plateau_db`.
pub fn plateau_efficiency(squeeze_factor: f64, plateau_db: f64) -> f64 {
    (1.0 - 10f64.powf(plateau_db / 10.0)) / (1.0 - (-2.0 * squeeze_factor).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioTag {
    Fig3a,
    Fig3b,
    Fig4,
    Fig1Fi,
    Fig1Fd,
    Custom,
}

impl ScenarioTag {
    pub const ALL: [ScenarioTag; 6] = [
        ScenarioTag::Fig3a,
        ScenarioTag::Fig3b,
        ScenarioTag::Fig4,
        ScenarioTag::Fig1Fi,
        ScenarioTag::Fig1Fd,
        ScenarioTag::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioTag::Fig3a => "fig3a",
            ScenarioTag::Fig3b => "fig3b",
            ScenarioTag::Fig4 => "fig4",
            ScenarioTag::Fig1Fi => "fig1-fi",
            ScenarioTag::Fig1Fd => "fig1-fd",
            ScenarioTag::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|t| t.as_str()).collect();
                format!(
                    "unknown scenario '{s}', expected one of {}",
                    names.join(", ")
                )
            })
    }
}

/// Everything needed to evaluate one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tag: ScenarioTag,
    pub interferometer: InterferometerParams,
    pub cavity: FilterCavityParams,
    pub squeezer: SqueezerParams,
    pub readout: ReadoutParams,
    pub grid: FrequencyGrid,
    pub angle_count: usize,
    pub map_mode: SqueezeMode,
}

impl Scenario {
    /// Built-in parameters for `tag`; `Custom` yields the fig3a values.
    pub fn preset(tag: ScenarioTag) -> Self {
        let detunings = match tag {
            ScenarioTag::Fig3b => (SIGNAL_DETUNING, -SIGNAL_DETUNING),
            ScenarioTag::Fig4 => (SIGNAL_DETUNING, SIGNAL_DETUNING),
            _ => (SIGNAL_DETUNING, 0.0),
        };
        let cavity = FilterCavityParams::new(CAVITY_HALFWIDTH, detunings.0, detunings.1)
            .expect("valid preset cavity");
        let interferometer = InterferometerParams::advanced_ligo_like();
        match tag {
            ScenarioTag::Fig1Fi | ScenarioTag::Fig1Fd => Self {
                tag,
                interferometer,
                cavity,
                squeezer: SqueezerParams::new(MAP_SQUEEZE_FACTOR, FRAC_PI_2).expect("valid"),
                readout: ReadoutParams::balanced(FRAC_PI_2, MAP_EFFICIENCY).expect("valid"),
                grid: FrequencyGrid::logarithmic_hz(10.0, 10e3, 512).expect("valid"),
                angle_count: DEFAULT_ANGLE_COUNT,
                map_mode: if tag == ScenarioTag::Fig1Fi {
                    SqueezeMode::FixedAngle
                } else {
                    SqueezeMode::FrequencyDependent
                },
            },
            _ => Self {
                tag,
                interferometer,
                cavity,
                squeezer: SqueezerParams::new(PRESET_SQUEEZE_FACTOR, FRAC_PI_2).expect("valid"),
                readout: ReadoutParams::balanced(
                    FRAC_PI_2,
                    plateau_efficiency(PRESET_SQUEEZE_FACTOR, PLATEAU_DB),
                )
                .expect("valid"),
                grid: FrequencyGrid::default_cavity(),
                angle_count: DEFAULT_ANGLE_COUNT,
                map_mode: SqueezeMode::FrequencyDependent,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plateau_efficiency_hits_target() {
        let r = PRESET_SQUEEZE_FACTOR;
        let eta = plateau_efficiency(r, PLATEAU_DB);
        assert!(eta > 0.0 && eta < 1.0);
        let s = 1.0 - eta + eta * (-2.0 * r).exp();
        assert_relative_eq!(10.0 * s.log10(), PLATEAU_DB, epsilon = 1e-12);
    }

    #[test]
    fn cavity_presets_differ_only_in_detunings() {
        let a = Scenario::preset(ScenarioTag::Fig3a);
        for tag in [ScenarioTag::Fig3b, ScenarioTag::Fig4] {
            let b = Scenario::preset(tag);
            assert_eq!(a.cavity.halfwidth(), b.cavity.halfwidth());
            assert_eq!(a.squeezer, b.squeezer);
            assert_eq!(a.readout, b.readout);
            assert_eq!(a.grid, b.grid);
            assert_eq!(b.cavity.detuning_signal(), SIGNAL_DETUNING);
        }
        assert_eq!(
            Scenario::preset(ScenarioTag::Fig3b).cavity.detuning_idler(),
            -SIGNAL_DETUNING
        );
        assert_eq!(
            Scenario::preset(ScenarioTag::Fig4).cavity.detuning_idler(),
            SIGNAL_DETUNING
        );
        assert_eq!(a.cavity.detuning_idler(), 0.0);
    }

    #[test]
    fn tags_round_trip() {
        for tag in ScenarioTag::ALL {
            assert_eq!(tag.as_str().parse::<ScenarioTag>().unwrap(), tag);
        }
        assert!("fig9".parse::<ScenarioTag>().is_err());
    }
}
