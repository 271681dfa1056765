//! Quantum-noise model for squeezed-light interferometers read out with
//! EPR-entangled signal and idler sidebands reflected off a detuned cavity.
//!
//! * [`coupling`] / [`quadrature`]: ponderomotive and cavity coupling, and
//!   single-mode Gaussian covariance propagation.
//! * [`spectra`]: the two-carrier noise spectral density, spectrograms over
//!   readout angle, squeeze-angle trajectories and interferometer noise maps.
//! * [`epr`]: two-mode states, conditional variances and the Reid criterion.
//! * [`fit`]: joint least-squares estimation from measured traces.

pub mod coupling;
pub mod epr;
pub mod error;
pub mod fit;
pub mod params;
pub mod presets;
pub mod quadrature;
pub mod spectra;

pub use error::{ModelError, Result};
pub use params::{
    CarrierLayout, FilterCavityParams, FrequencyGrid, GridSpacing, InterferometerParams,
    ReadoutParams, SqueezerParams,
};
