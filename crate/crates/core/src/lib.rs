//! Simulation and parameter-estimation toolkit for a fiber-coupled optical
//! microcavity probed by falling cold atoms.
//!
//! The crate models the coupled atom-cavity system at the rate-equation level:
//! cavity-QED rates derived from resonator geometry and atomic constants
//! ([`physics`]), the standing-wave mode and effective atom numbers ([`mode`]),
//! the reflected probe spectrum ([`spectrum`]), free-fall transits of a thermal
//! cloud with shot noise and cavity-length jitter ([`cloud`]), photon-counting
//! statistics with detector corrections ([`stats`]), Monte Carlo forward models
//! and fits ([`fit`]), and Purcell-enhanced photon production ([`source`]).
//!
//! The `atomcav` binary exposes the whole chain as config-driven, seeded,
//! reproducible experiments; see the repository README.

pub mod cli;
pub mod cloud;
pub mod config;
pub mod constants;
pub mod error;
pub mod fit;
pub mod mode;
pub mod physics;
pub mod source;
pub mod spectrum;
pub mod stats;

pub use cloud::{fall_time, CloudSpec, CountTrace, JitterSpec, MeanTrace, ProbeSpec};
pub use error::{Error, Result};
pub use fit::{fit_spectrum, fit_transit, mc_spectrum, spectral_fwhm, FitResult};
pub use mode::{effective_atom_number, mode_intensity, rayleigh_length, waist_at, AtomPosition};
pub use physics::{derive_rates, AtomSpecies, CavityGeometry, CoupledRates};
pub use source::{emission_efficiency, purcell_rate, EmitterModel};
pub use spectrum::{
    atom_number_from_intensities, beta_from_contrast, intensity_from_atom_number,
    reflected_fraction, reflection_amplitude, IntensityTriple, SpectrumSample,
};
pub use stats::{dead_time_correct, efficiency_correct, normalized_variance, DetectorSpec};
