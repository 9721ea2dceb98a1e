//! Purcell-enhanced photon production into the cavity and fiber.
//!
//! When a transverse excitation beam saturates atoms sitting in the mode, an
//! excited atom decays either into the cavity channel at 2g²/κ (weighted by
//! its local mode intensity) or into free space at 2γ, of which a branching
//! fraction optically pumps the atom into the dark hyperfine ground state
//! and removes it from the cycle. Radiation pressure additionally expels
//! atoms at a slow rate. The model is a classical three-level rate equation
//! per atom (ground, excited, dark); the drive couples ground and excited
//! symmetrically, so a strong pump saturates the excited fraction at one
//! half.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{sample_poisson, CountTrace, MeanTrace};
use crate::error::{Error, Result};
use crate::physics::CoupledRates;

/// Rate-model parameters for one emission run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterModel {
    /// Incoherent drive rate coupling ground ↔ excited (s⁻¹).
    pub pump_rate: f64,
    /// Peak emission rate into the cavity channel, 2g²/κ (s⁻¹).
    pub cavity_emission_rate: f64,
    /// Free-space emission rate 2γ (s⁻¹).
    pub free_space_rate: f64,
    /// Part of the free-space rate that pumps into the dark state (s⁻¹),
    /// ≤ `free_space_rate`.
    pub dark_pumping_rate: f64,
    /// Physical atom-removal rate from radiation pressure (s⁻¹).
    pub loss_rate: f64,
    /// Fraction of cavity photons leaving through the fiber mirror.
    pub fiber_outcoupling: f64,
    /// Detection efficiency of the fiber channel.
    pub detection_efficiency: f64,
}

impl EmitterModel {
    /// Build from derived rates with the cavity channel at 2g²/κ and free
    /// space at 2γ; `dark_branch` is the dark fraction per free-space decay.
    pub fn from_rates(
        rates: &CoupledRates,
        pump_rate: f64,
        dark_branch: f64,
        loss_rate: f64,
        fiber_outcoupling: f64,
        detection_efficiency: f64,
    ) -> Result<Self> {
        let model = Self {
            pump_rate,
            cavity_emission_rate: purcell_rate(rates),
            free_space_rate: 2.0 * rates.gamma,
            dark_pumping_rate: dark_branch * 2.0 * rates.gamma,
            loss_rate,
            fiber_outcoupling,
            detection_efficiency,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            (self.pump_rate, "pump_rate"),
            (self.cavity_emission_rate, "cavity_emission_rate"),
            (self.free_space_rate, "free_space_rate"),
            (self.dark_pumping_rate, "dark_pumping_rate"),
            (self.loss_rate, "loss_rate"),
        ];
        for (value, field) in rates {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    message: "rates must be non-negative and finite".into(),
                });
            }
        }
        if self.dark_pumping_rate > self.free_space_rate {
            return Err(Error::InvalidParameter {
                field: "dark_pumping_rate",
                message: "dark pumping cannot exceed the free-space rate".into(),
            });
        }
        for (value, field) in [
            (self.fiber_outcoupling, "fiber_outcoupling"),
            (self.detection_efficiency, "detection_efficiency"),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    field,
                    message: "fractions must lie in [0, 1]".into(),
                });
            }
        }
        Ok(())
    }
}

/// Emission rate into the cavity channel, 2g²/κ, with the Zeeman-averaged g².
pub fn purcell_rate(rates: &CoupledRates) -> f64 {
    2.0 * rates.g_squared / rates.kappa
}

/// Fraction of excitations emitted into the cavity mode, C/(1+C) with the
/// single-atom cooperativity C = g²/(κγ).
pub fn emission_efficiency(rates: &CoupledRates) -> f64 {
    let c = rates.cooperativity();
    c / (1.0 + c)
}

/// Per-bin expectation values and the sampled counts of one pulse run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseOutcome {
    pub trace: CountTrace,
    /// Expected detected photons per bin (before Poisson sampling).
    pub expected_per_bin: Vec<f64>,
    /// Total expected detected photons.
    pub expected_detected: f64,
    /// Total expected photons emitted into the cavity channel.
    pub expected_cavity_photons: f64,
    /// Total expected photons emitted into free space.
    pub expected_free_space_photons: f64,
}

/// Integrate the rate model for `n0` equally coupled atoms (mode weight 1)
/// from excitation-on at t = 0 and Poisson-sample the detected counts per
/// bin.
pub fn simulate_pulse(
    model: &EmitterModel,
    n0: f64,
    duration: f64,
    bin_width: f64,
    seed: u64,
) -> Result<PulseOutcome> {
    model.validate()?;
    if duration <= 0.0 || bin_width <= 0.0 {
        return Err(Error::InvalidParameter {
            field: "duration",
            message: "duration and bin width must be positive".into(),
        });
    }
    if n0 < 0.0 {
        return Err(Error::InvalidParameter {
            field: "n0",
            message: "atom number must be non-negative".into(),
        });
    }

    let bins = (duration / bin_width).ceil() as usize;
    let max_rate = model
        .pump_rate
        .max(model.cavity_emission_rate)
        .max(model.free_space_rate)
        .max(model.loss_rate)
        .max(1.0);
    let dt = (bin_width / 64.0).min(0.02 / max_rate);

    // populations of one atom: ground, excited, dark (sum stays 1)
    let mut p = [1.0f64, 0.0, 0.0];
    let derivative = |p: &[f64; 3]| -> [f64; 3] {
        let back = model.pump_rate
            + model.cavity_emission_rate
            + (model.free_space_rate - model.dark_pumping_rate);
        [
            -model.pump_rate * p[0] + back * p[1],
            model.pump_rate * p[0]
                - (model.pump_rate + model.cavity_emission_rate + model.free_space_rate) * p[1],
            model.dark_pumping_rate * p[1],
        ]
    };

    let mut expected_per_bin = vec![0.0f64; bins];
    let mut expected_cavity = 0.0f64;
    let mut expected_free = 0.0f64;
    let mut t = 0.0f64;
    while t < duration {
        let step = dt.min(duration - t);
        // RK4 on the populations; the emitted flux integral uses the
        // midpoint excited population and the survival factor exp(-loss t)
        let k1 = derivative(&p);
        let p2 = [p[0] + 0.5 * step * k1[0], p[1] + 0.5 * step * k1[1], p[2] + 0.5 * step * k1[2]];
        let k2 = derivative(&p2);
        let p3 = [p[0] + 0.5 * step * k2[0], p[1] + 0.5 * step * k2[1], p[2] + 0.5 * step * k2[2]];
        let k3 = derivative(&p3);
        let p4 = [p[0] + step * k3[0], p[1] + step * k3[1], p[2] + step * k3[2]];
        let k4 = derivative(&p4);

        let excited_mid = p[1] + 0.5 * step * k1[1];
        let survival = (-model.loss_rate * (t + 0.5 * step)).exp();
        let cavity_flux = n0 * survival * model.cavity_emission_rate * excited_mid;
        let free_flux = n0 * survival * model.free_space_rate * excited_mid;
        let bin = ((t + 0.5 * step) / bin_width) as usize;
        if bin < bins {
            expected_per_bin[bin] +=
                cavity_flux * model.fiber_outcoupling * model.detection_efficiency * step;
        }
        expected_cavity += cavity_flux * step;
        expected_free += free_flux * step;

        for i in 0..3 {
            p[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += step;

        // once the atom is dark or gone the remaining flux is negligible
        if (p[0] + p[1]) * survival < 1e-12 {
            break;
        }
    }

    debug_assert!(p.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
    debug_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<u32> =
        expected_per_bin.iter().map(|&mu| sample_poisson(mu, &mut rng)).collect();
    let expected_detected = expected_per_bin.iter().sum();
    Ok(PulseOutcome {
        trace: CountTrace { bin_width, counts, start_time: 0.0 },
        expected_per_bin,
        expected_detected,
        expected_cavity_photons: expected_cavity,
        expected_free_space_photons: expected_free,
    })
}

/// Joint-run consistency check: the photon pulse must peak within one bin of
/// the excitation marker, and the probe trace must drop below its
/// pre-excitation mean minus 3σ (σ estimated from the pre-excitation bins)
/// within five bins of the marker.
pub fn pulse_onset_check(
    probe: &MeanTrace,
    pulse: &MeanTrace,
    excitation_bin: Option<usize>,
) -> Result<bool> {
    let marker = excitation_bin.ok_or(Error::MissingMarker)?;
    if (probe.bin_width - pulse.bin_width).abs() > 1e-12 * probe.bin_width
        || (probe.start_time - pulse.start_time).abs() > 1e-12
    {
        return Err(Error::InvalidParameter {
            field: "traces",
            message: "probe and pulse traces must share a time base".into(),
        });
    }
    if marker < 16 || marker >= probe.values.len() || marker >= pulse.values.len() {
        return Err(Error::InvalidParameter {
            field: "excitation_bin",
            message: "marker must leave at least 16 pre-excitation bins".into(),
        });
    }

    let peak_bin = pulse
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let pulse_coincides = peak_bin.abs_diff(marker) <= 1;

    let pre = &probe.values[..marker];
    let pre_mean = pre.iter().sum::<f64>() / pre.len() as f64;
    let pre_sigma = (pre.iter().map(|v| (v - pre_mean).powi(2)).sum::<f64>()
        / (pre.len() - 1) as f64)
        .sqrt();
    let threshold = pre_mean - 3.0 * pre_sigma;
    let probe_drops = probe.values[marker..probe.values.len().min(marker + 5)]
        .iter()
        .any(|&v| v < threshold);

    Ok(pulse_coincides && probe_drops)
}
