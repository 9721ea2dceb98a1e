//! Run configuration: a single TOML file with per-section physical
//! parameters, CLI overrides on top, and field-level validation.
//!
//! Defaults describe the reference apparatus: a 130 µm cavity of finesse 280
//! with a 4.6 µm waist at 780 nm, probed at I₀ = 419×10³ counts/s with
//! contrast β = 0.1943, and a 4×10⁷-atom cloud released 6 mm above the
//! cavity at 30 µK.

use serde::{Deserialize, Serialize};

use crate::cloud::{CloudSpec, JitterComponent, JitterSpec, ProbeSpec};
use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::physics::{AtomSpecies, CavityGeometry};
use crate::source::EmitterModel;
use crate::stats::DetectorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub species: SpeciesConfig,
    pub probe: ProbeConfig,
    pub cloud: CloudConfig,
    pub detector: DetectorConfig,
    pub jitter: JitterConfig,
    pub transit: TransitConfig,
    pub spectrum: SpectrumConfig,
    pub fit: FitConfig,
    pub stats: StatsConfig,
    pub pulse: PulseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            geometry: GeometryConfig::default(),
            species: SpeciesConfig::default(),
            probe: ProbeConfig::default(),
            cloud: CloudConfig::default(),
            detector: DetectorConfig::default(),
            jitter: JitterConfig::default(),
            transit: TransitConfig::default(),
            spectrum: SpectrumConfig::default(),
            fit: FitConfig::default(),
            stats: StatsConfig::default(),
            pulse: PulseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub length_um: f64,
    pub waist_um: f64,
    pub mirror_curvature_um: f64,
    pub finesse: f64,
    pub wavelength_nm: f64,
    pub beta: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            length_um: 130.0,
            waist_um: 4.6,
            mirror_curvature_um: 186.0,
            finesse: 280.0,
            wavelength_nm: 780.0,
            beta: 0.19429243654766648,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesConfig {
    pub gamma_per_s: f64,
    pub zeeman_factor: f64,
    /// Dipole moment override (C·m); the bundled ⁸⁵Rb D₂ value when absent.
    pub dipole_cm: Option<f64>,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        Self {
            gamma_per_s: crate::constants::RB85_GAMMA,
            zeeman_factor: crate::constants::ZEEMAN_F3_AVERAGE,
            dipole_cm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Off-resonant detected rate I₀ (counts/s).
    pub i0_per_s: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { i0_per_s: 419e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub atoms: f64,
    pub temperature_uk: f64,
    pub sigma0_um: f64,
    pub height_mm: f64,
    pub release_time_ms: f64,
    pub transverse_offset_um: f64,
    pub hole_diameter_mm: Option<f64>,
    /// When set, the atom number is rescaled so the analytic ⟨N⟩(t) peaks at
    /// this value.
    pub peak_n: Option<f64>,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            atoms: 4e7,
            temperature_uk: 30.0,
            sigma0_um: 500.0,
            height_mm: 6.0,
            release_time_ms: 0.0,
            transverse_offset_um: 0.0,
            hole_diameter_mm: Some(1.0),
            peak_n: Some(0.7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub dead_time_ns: f64,
    pub quantum_efficiency: f64,
    pub path_transmission: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { dead_time_ns: 44.0, quantum_efficiency: 0.6, path_transmission: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterConfig {
    pub white_rms_pm: f64,
    /// (frequency Hz, amplitude pm, phase rad) per component.
    pub components: Vec<(f64, f64, f64)>,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            white_rms_pm: 120.0,
            components: vec![(650.0, 600.0, 0.0), (1300.0, 400.0, 2.1), (2100.0, 250.0, 4.2)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitConfig {
    pub n_drops: usize,
    pub duration_ms: f64,
    pub bin_us: f64,
}

impl Default for TransitConfig {
    fn default() -> Self {
        Self { n_drops: 34, duration_ms: 60.0, bin_us: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub mean_n: f64,
    /// Relative Gaussian noise added to synthetic spectra.
    pub noise: f64,
    pub span_mhz: f64,
    pub points: usize,
    pub linewidth_mhz: f64,
    pub n_realizations: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            mean_n: 1.1,
            noise: 0.02,
            span_mhz: 72.0,
            points: 481,
            linewidth_mhz: 1.2,
            n_realizations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub n_realizations: usize,
    pub max_mean_n: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { n_realizations: 2000, max_mean_n: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub window_bins: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { window_bins: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub pump_rate_per_s: f64,
    pub dark_branch: f64,
    pub loss_rate_per_s: f64,
    pub fiber_outcoupling: f64,
    pub detection_eff: f64,
    pub n0: f64,
    pub repeats: usize,
    pub window_ms: f64,
    pub excitation_ms: f64,
    pub bin_us: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            pump_rate_per_s: 3.8e8,
            dark_branch: 0.25,
            loss_rate_per_s: 5e4,
            fiber_outcoupling: 0.5,
            detection_eff: 0.54,
            n0: 1.0,
            repeats: 256,
            window_ms: 2.0,
            excitation_ms: 1.0,
            bin_us: 10.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// All invariant violations; an empty list means the config is runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut diagnostics = Vec::new();
        let mut check = |ok: bool, message: &str| {
            if !ok {
                diagnostics.push(message.to_string());
            }
        };
        check(self.geometry.length_um > 0.0, "geometry.length_um must be positive");
        check(self.geometry.waist_um > 0.0, "geometry.waist_um must be positive");
        check(
            self.geometry.mirror_curvature_um > 0.0,
            "geometry.mirror_curvature_um must be positive",
        );
        check(self.geometry.finesse >= 1.0, "geometry.finesse must be >= 1");
        check(self.geometry.wavelength_nm > 0.0, "geometry.wavelength_nm must be positive");
        check(
            (0.0..=1.0).contains(&self.geometry.beta),
            "geometry.beta must lie in [0, 1]",
        );
        check(self.species.gamma_per_s > 0.0, "species.gamma_per_s must be positive");
        check(
            self.species.zeeman_factor > 0.0 && self.species.zeeman_factor <= 1.0,
            "species.zeeman_factor must lie in (0, 1]",
        );
        if let Some(mu) = self.species.dipole_cm {
            check(mu > 0.0, "species.dipole_cm must be positive");
        }
        check(self.probe.i0_per_s > 0.0, "probe.i0_per_s must be positive");
        check(self.cloud.atoms >= 0.0, "cloud.atoms must be non-negative");
        check(self.cloud.temperature_uk > 0.0, "cloud.temperature_uk must be positive");
        check(self.cloud.sigma0_um > 0.0, "cloud.sigma0_um must be positive");
        check(self.cloud.height_mm > 0.0, "cloud.height_mm must be positive");
        if let Some(d) = self.cloud.hole_diameter_mm {
            check(d > 0.0, "cloud.hole_diameter_mm must be positive");
        }
        if let Some(n) = self.cloud.peak_n {
            check(n >= 0.0, "cloud.peak_n must be non-negative");
        }
        check(self.detector.dead_time_ns >= 0.0, "detector.dead_time_ns must be non-negative");
        check(
            self.detector.quantum_efficiency > 0.0 && self.detector.quantum_efficiency <= 1.0,
            "detector.quantum_efficiency must lie in (0, 1]",
        );
        check(
            self.detector.path_transmission > 0.0 && self.detector.path_transmission <= 1.0,
            "detector.path_transmission must lie in (0, 1]",
        );
        check(self.jitter.white_rms_pm >= 0.0, "jitter.white_rms_pm must be non-negative");
        check(
            self.jitter.components.iter().all(|c| c.1 >= 0.0),
            "jitter.components amplitudes must be >= 0",
        );
        check(self.transit.n_drops >= 1, "transit.n_drops must be >= 1");
        check(self.transit.duration_ms > 0.0, "transit.duration_ms must be positive");
        check(self.transit.bin_us > 0.0, "transit.bin_us must be positive");
        check(self.spectrum.noise >= 0.0, "spectrum.noise must be non-negative");
        check(self.spectrum.mean_n >= 0.0, "spectrum.mean_n must be non-negative");
        check(self.spectrum.points >= 7, "spectrum.points must be >= 7");
        check(self.spectrum.span_mhz > 0.0, "spectrum.span_mhz must be positive");
        check(
            self.spectrum.linewidth_mhz >= 0.0,
            "spectrum.linewidth_mhz must be non-negative",
        );
        check(self.spectrum.n_realizations >= 1, "spectrum.n_realizations must be >= 1");
        check(self.fit.n_realizations >= 100, "fit.n_realizations must be >= 100");
        check(self.fit.max_mean_n > 0.0, "fit.max_mean_n must be positive");
        check(self.stats.window_bins >= 8, "stats.window_bins must be >= 8");
        check(self.pulse.pump_rate_per_s >= 0.0, "pulse.pump_rate_per_s must be non-negative");
        check(
            (0.0..=1.0).contains(&self.pulse.dark_branch),
            "pulse.dark_branch must lie in [0, 1]",
        );
        check(self.pulse.loss_rate_per_s >= 0.0, "pulse.loss_rate_per_s must be non-negative");
        check(
            (0.0..=1.0).contains(&self.pulse.fiber_outcoupling),
            "pulse.fiber_outcoupling must lie in [0, 1]",
        );
        check(
            (0.0..=1.0).contains(&self.pulse.detection_eff),
            "pulse.detection_eff must lie in [0, 1]",
        );
        check(self.pulse.n0 >= 0.0, "pulse.n0 must be non-negative");
        check(self.pulse.repeats >= 1, "pulse.repeats must be >= 1");
        check(self.pulse.window_ms > 0.0, "pulse.window_ms must be positive");
        check(
            self.pulse.excitation_ms > 0.0 && self.pulse.excitation_ms < self.pulse.window_ms,
            "pulse.excitation_ms must fall inside the window",
        );
        diagnostics
    }

    /// Validate and error with the full diagnostic list.
    pub fn ensure_valid(&self) -> Result<()> {
        let diagnostics = self.validate();
        if diagnostics.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(diagnostics))
        }
    }

    pub fn geometry(&self) -> Result<CavityGeometry> {
        CavityGeometry::new(
            self.geometry.length_um * 1e-6,
            self.geometry.waist_um * 1e-6,
            self.geometry.mirror_curvature_um * 1e-6,
            self.geometry.finesse,
            self.geometry.wavelength_nm * 1e-9,
            self.geometry.beta,
        )
    }

    pub fn species(&self) -> Result<AtomSpecies> {
        AtomSpecies::new(
            self.species.dipole_cm.unwrap_or(crate::constants::RB85_D2_CYCLING_DIPOLE),
            self.species.gamma_per_s,
            self.species.zeeman_factor,
            2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (self.geometry.wavelength_nm * 1e-9),
        )
    }

    pub fn probe(&self) -> ProbeSpec {
        ProbeSpec { i0: self.probe.i0_per_s, beta: self.geometry.beta }
    }

    /// Cloud in SI units, with the peak-⟨N⟩ rescaling applied when requested.
    pub fn cloud(&self, geom: &CavityGeometry) -> Result<CloudSpec> {
        let cloud = CloudSpec {
            atom_count: self.cloud.atoms,
            temperature: self.cloud.temperature_uk * 1e-6,
            initial_sigma: self.cloud.sigma0_um * 1e-6,
            drop_height: self.cloud.height_mm * 1e-3,
            release_time: self.cloud.release_time_ms * 1e-3,
            transverse_offset: self.cloud.transverse_offset_um * 1e-6,
            hole_radius: self.cloud.hole_diameter_mm.map(|d| d * 1e-3 / 2.0),
        };
        cloud.validate()?;
        match self.cloud.peak_n {
            Some(target) if cloud.atom_count > 0.0 => cloud.scaled_to_peak(geom, target),
            _ => Ok(cloud),
        }
    }

    pub fn detector(&self) -> Result<DetectorSpec> {
        DetectorSpec::new(
            self.detector.dead_time_ns * 1e-9,
            self.detector.quantum_efficiency,
            self.detector.path_transmission,
        )
    }

    pub fn jitter(&self) -> JitterSpec {
        JitterSpec {
            components: self
                .jitter
                .components
                .iter()
                .map(|&(frequency, amplitude_pm, phase)| JitterComponent {
                    frequency,
                    amplitude: amplitude_pm * 1e-12,
                    phase,
                })
                .collect(),
            white_rms: self.jitter.white_rms_pm * 1e-12,
        }
    }

    pub fn emitter_model(&self, rates: &crate::physics::CoupledRates) -> Result<EmitterModel> {
        EmitterModel::from_rates(
            rates,
            self.pulse.pump_rate_per_s,
            self.pulse.dark_branch,
            self.pulse.loss_rate_per_s,
            self.pulse.fiber_outcoupling,
            self.pulse.detection_eff,
        )
    }

    /// Laser linewidth as an angular-frequency FWHM (rad/s).
    pub fn linewidth_fwhm(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.spectrum.linewidth_mhz * 1e6
    }

    /// Uniform detuning grid in rad/s covering ±span/2.
    pub fn detuning_grid(&self) -> Vec<f64> {
        let span = 2.0 * std::f64::consts::PI * self.spectrum.span_mhz * 1e6;
        let n = self.spectrum.points.max(2);
        (0..n).map(|i| -span / 2.0 + span * i as f64 / (n - 1) as f64).collect()
    }
}
