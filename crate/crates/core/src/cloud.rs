//! Thermal cloud release, free-fall transit through the mode, and the
//! resulting reflected count traces with shot noise and cavity-length jitter.
//!
//! Geometry: the cavity axis is horizontal; the cloud is released a height
//! `drop_height` above it and falls through the mode. Coordinates: x is
//! horizontal transverse, y vertical (fall direction), z along the cavity
//! axis. The cloud keeps an isotropic Gaussian density with per-axis rms
//! σ(t) = √(σ₀² + (v_th·t)²), v_th = √(k_B·T/m), while its center falls
//! ballistically. A circular hole above the cavity clips the initial
//! transverse distribution; the clipped cloud is approximated by its capture
//! fraction and truncated variance, which is accurate because the sampling
//! region (tens of µm) is far smaller than the cloud (hundreds of µm and up).
//!
//! Atoms are drawn as a Poisson process restricted to a cylinder of radius
//! 4·w(z) around the axis; couplings outside are below e⁻³² and truncated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, RB85_MASS, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::mode::{rayleigh_length, waist_at, AtomPosition};
use crate::physics::{CavityGeometry, CoupledRates};
use crate::spectrum::reflection_amplitude;
use crate::stats::{saturated_mean, DetectorSpec};

/// Thermal cloud released above the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    /// Atoms in the trap at release (may be fractional; it is the mean of a
    /// Poisson process).
    pub atom_count: f64,
    /// Cloud temperature (K).
    pub temperature: f64,
    /// Initial rms radius σ₀ (m).
    pub initial_sigma: f64,
    /// Release height of the cloud center above the cavity axis (m).
    pub drop_height: f64,
    /// Release time (s); trace times are absolute, so transit happens near
    /// `release_time + fall_time(drop_height)`.
    pub release_time: f64,
    /// Horizontal offset of the drop axis from the cavity axis (m).
    pub transverse_offset: f64,
    /// Radius of the hole the atoms fall through, if any (m).
    pub hole_radius: Option<f64>,
}

impl CloudSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, message: &str| Error::InvalidParameter {
            field,
            message: message.to_string(),
        };
        if self.atom_count < 0.0 {
            return Err(bad("atom_count", "atom count must be non-negative"));
        }
        if self.temperature <= 0.0 {
            return Err(bad("temperature", "temperature must be positive"));
        }
        if self.initial_sigma <= 0.0 {
            return Err(bad("initial_sigma", "initial rms radius must be positive"));
        }
        if self.drop_height <= 0.0 {
            return Err(bad("drop_height", "drop height must be positive"));
        }
        if let Some(r) = self.hole_radius {
            if r <= 0.0 {
                return Err(bad("hole_radius", "hole radius must be positive"));
            }
        }
        Ok(())
    }

    /// One-dimensional thermal velocity √(k_B·T/m) for ⁸⁵Rb.
    pub fn thermal_velocity(&self) -> f64 {
        (BOLTZMANN * self.temperature / RB85_MASS).sqrt()
    }

    /// Fraction of the cloud passing the hole (2-D Gaussian inside radius r).
    fn capture_fraction(&self) -> f64 {
        match self.hole_radius {
            Some(r) => 1.0 - (-r * r / (2.0 * self.initial_sigma * self.initial_sigma)).exp(),
            None => 1.0,
        }
    }

    /// Per-axis variance reduction of the transverse initial distribution
    /// after the hard radial cut.
    fn truncation_factor(&self) -> f64 {
        match self.hole_radius {
            Some(r) => {
                let a = r * r / (2.0 * self.initial_sigma * self.initial_sigma);
                1.0 - a * (-a).exp() / (1.0 - (-a).exp())
            }
            None => 1.0,
        }
    }

    /// Per-axis rms sizes at absolute time `t`: (transverse/axial σ_xz,
    /// vertical σ_y). The hole clips only the horizontal axes.
    fn sigmas(&self, t: f64) -> (f64, f64) {
        let tf = (t - self.release_time).max(0.0);
        let thermal = (self.thermal_velocity() * tf).powi(2);
        let s0 = self.initial_sigma * self.initial_sigma;
        let sxz = (self.truncation_factor() * s0 + thermal).sqrt();
        let sy = (s0 + thermal).sqrt();
        (sxz, sy)
    }

    /// Height of the cloud center above the cavity axis at absolute time `t`.
    pub fn center_height(&self, t: f64) -> f64 {
        let tf = (t - self.release_time).max(0.0);
        self.drop_height - 0.5 * STANDARD_GRAVITY * tf * tf
    }

    /// Cloud density per unit area in the x-y plane, evaluated on the cavity
    /// axis at time `t` (atoms/m²).
    fn axis_area_density(&self, t: f64) -> f64 {
        let (sxz, sy) = self.sigmas(t);
        let yc = self.center_height(t);
        let gx = gaussian_pdf(self.transverse_offset, sxz);
        let gy = gaussian_pdf(yc, sy);
        self.atom_count * self.capture_fraction() * gx * gy
    }

    /// Rescale the atom count so the analytic mean effective atom number
    /// peaks at `target` during the transit.
    pub fn scaled_to_peak(&self, geom: &CavityGeometry, target: f64) -> Result<CloudSpec> {
        if target < 0.0 {
            return Err(Error::InvalidParameter {
                field: "peak_n",
                message: "target peak must be non-negative".into(),
            });
        }
        let peak = self.peak_mean_effective_atoms(geom);
        if peak <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "atom_count",
                message: "cannot rescale a cloud with zero transit signal".into(),
            });
        }
        let mut scaled = *self;
        scaled.atom_count *= target / peak;
        Ok(scaled)
    }

    /// Maximum of the analytic ⟨N⟩(t) over the transit.
    pub fn peak_mean_effective_atoms(&self, geom: &CavityGeometry) -> f64 {
        let t0 = self.release_time + fall_time(self.drop_height);
        (0..=2000)
            .map(|i| {
                let t = self.release_time + (0.2 + 1.6 * i as f64 / 2000.0) * (t0 - self.release_time);
                mean_effective_atoms(self, geom, t)
            })
            .fold(0.0, f64::max)
    }
}

/// Probe drive: off-resonant count rate and input-coupling contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Off-resonant detected rate I₀ (counts/s).
    pub i0: f64,
    /// Contrast parameter β.
    pub beta: f64,
}

/// One sinusoidal cavity-length vibration component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterComponent {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Cavity-length jitter: deterministic audio-frequency components plus a
/// white Gaussian term.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JitterSpec {
    pub components: Vec<JitterComponent>,
    pub white_rms: f64,
}

impl JitterSpec {
    pub fn is_quiet(&self) -> bool {
        self.white_rms == 0.0 && self.components.iter().all(|c| c.amplitude == 0.0)
    }

    /// Deterministic displacement Σ aᵢ·sin(2πfᵢt + φᵢ) (m).
    pub fn deterministic_displacement(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.amplitude * (2.0 * std::f64::consts::PI * c.frequency * t + c.phase).sin())
            .sum()
    }

    /// Total displacement at time `t`, drawing the white term from `rng`.
    pub fn displacement<R: Rng>(&self, t: f64, rng: &mut R) -> f64 {
        let mut d = self.deterministic_displacement(t);
        if self.white_rms > 0.0 {
            let normal = Normal::new(0.0, self.white_rms).expect("white_rms >= 0");
            d += normal.sample(rng);
        }
        d
    }
}

/// Seeded displacement sample; see [`JitterSpec::displacement`].
pub fn jitter_displacement(jitter: &JitterSpec, t: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    jitter.displacement(t, &mut rng)
}

/// Time-binned photon counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTrace {
    /// Bin width τ (s).
    pub bin_width: f64,
    pub counts: Vec<u32>,
    /// Absolute time of the leading edge of the first bin (s).
    pub start_time: f64,
}

impl CountTrace {
    pub fn bin_center(&self, index: usize) -> f64 {
        self.start_time + (index as f64 + 0.5) * self.bin_width
    }
}

/// Average of several equally-shaped count traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTrace {
    pub bin_width: f64,
    pub values: Vec<f64>,
    pub start_time: f64,
    pub n_drops: usize,
}

impl MeanTrace {
    pub fn bin_center(&self, index: usize) -> f64 {
        self.start_time + (index as f64 + 0.5) * self.bin_width
    }
}

/// Free-fall time from rest over height `h`, √(2h/g).
pub fn fall_time(drop_height: f64) -> f64 {
    (2.0 * drop_height.max(0.0) / STANDARD_GRAVITY).sqrt()
}

fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// Expected atoms inside the sampling cylinder {ρ ≤ 4w(z), |z| ≤ L/2} at
/// time `t` (Simpson quadrature along the axis).
pub fn expected_in_cylinder(cloud: &CloudSpec, geom: &CavityGeometry, t: f64) -> f64 {
    let n_xy = cloud.axis_area_density(t);
    if n_xy == 0.0 {
        return 0.0;
    }
    let (sxz, _) = cloud.sigmas(t);
    let half = geom.length / 2.0;
    let integrand = |z: f64| {
        let w = waist_at(geom, z);
        gaussian_pdf(z, sxz) * 16.0 * std::f64::consts::PI * w * w
    };
    n_xy * simpson(integrand, -half, half, 128)
}

/// Analytic mean effective atom number ⟨N⟩(t) = n_axis(t)·V, valid while the
/// cloud is much larger than the mode region (σ ≫ w, L ≲ σ).
pub fn mean_effective_atoms(cloud: &CloudSpec, geom: &CavityGeometry, t: f64) -> f64 {
    let n_xy = cloud.axis_area_density(t);
    if n_xy == 0.0 {
        return 0.0;
    }
    let (sxz, _) = cloud.sigmas(t);
    let half = geom.length / 2.0;
    let axial_density =
        simpson(|z| gaussian_pdf(z, sxz), -half, half, 128) / geom.length;
    n_xy * crate::physics::mode_volume(geom) * axial_density
}

/// Mean mode weight ⟨D⟩ of one atom drawn by the cylinder sampler from a
/// cloud that is uniform along the axis: 1/(64·(1 + L²/(12·z_R²))).
pub fn mean_mode_weight(geom: &CavityGeometry) -> f64 {
    let zr = rayleigh_length(geom);
    1.0 / (64.0 * (1.0 + geom.length * geom.length / (12.0 * zr * zr)))
}

/// Draw atom positions inside the sampling cylinder for an axially uniform
/// cloud with expected count `lambda`. z follows the disc area w(z)², ρ is
/// uniform over the disc of radius 4·w(z); the standing wave is sampled
/// uniformly because z varies over many periods.
pub fn sample_mode_positions<R: Rng>(
    geom: &CavityGeometry,
    lambda: f64,
    rng: &mut R,
) -> Vec<AtomPosition> {
    sample_cylinder(geom, lambda, |_| 1.0, rng)
}

fn sample_cylinder<R: Rng>(
    geom: &CavityGeometry,
    lambda: f64,
    axial_weight: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Vec<AtomPosition> {
    let count = poisson_inverse(rng.random::<f64>(), lambda);
    let half = geom.length / 2.0;
    // envelope for rejection sampling of z (weight peaks at the mirror ends
    // for flat clouds; scan a coarse grid to stay safe for any weight)
    let envelope = (0..=64)
        .map(|i| {
            let z = -half + geom.length * i as f64 / 64.0;
            let w = waist_at(geom, z);
            axial_weight(z) * w * w
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut positions = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let z = loop {
            let z = (rng.random::<f64>() - 0.5) * geom.length;
            let w = waist_at(geom, z);
            if rng.random::<f64>() * envelope <= axial_weight(z) * w * w {
                break z;
            }
        };
        let radius = 4.0 * waist_at(geom, z) * rng.random::<f64>().sqrt();
        positions.push(AtomPosition::new(radius, z));
    }
    positions
}

/// Draw the atoms coupled to the mode at absolute time `t`.
pub fn sample_positions<R: Rng>(
    cloud: &CloudSpec,
    geom: &CavityGeometry,
    t: f64,
    rng: &mut R,
) -> Vec<AtomPosition> {
    let lambda = expected_in_cylinder(cloud, geom, t);
    if lambda <= 0.0 {
        return Vec::new();
    }
    let (sxz, _) = cloud.sigmas(t);
    sample_cylinder(geom, lambda, |z| gaussian_pdf(z, sxz) / gaussian_pdf(0.0, sxz), rng)
}

/// Seeded variant of [`sample_positions`]; identical seeds give identical
/// draws.
pub fn sample_positions_seeded(
    cloud: &CloudSpec,
    geom: &CavityGeometry,
    t: f64,
    seed: u64,
) -> Vec<AtomPosition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_positions(cloud, geom, t, &mut rng)
}

/// Simulate one drop: per bin, resample the coupled atoms, convert the
/// cavity-length jitter into a cavity detuning δω_C = −ω_C·δL/L, evaluate the
/// reflected rate, optionally apply the detector dead-time saturation to the
/// expected rate, and draw a Poisson count.
#[allow(clippy::too_many_arguments)]
pub fn transit_trace(
    cloud: &CloudSpec,
    geom: &CavityGeometry,
    rates: &CoupledRates,
    probe: &ProbeSpec,
    jitter: &JitterSpec,
    detector: Option<&DetectorSpec>,
    bins: usize,
    bin_width: f64,
    seed: u64,
) -> CountTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega_c = geom.mode_angular_frequency();
    let mut counts = Vec::with_capacity(bins);
    for i in 0..bins {
        let t = (i as f64 + 0.5) * bin_width;
        let positions = sample_positions(cloud, geom, t, &mut rng);
        let n = crate::mode::effective_atom_number(geom, &positions);
        let delta_cavity = omega_c * jitter.displacement(t, &mut rng) / geom.length;
        let fraction = reflection_amplitude(delta_cavity, 0.0, n, rates, probe.beta).norm_sqr();
        let mut expected = fraction * probe.i0 * bin_width;
        if let Some(det) = detector {
            expected = saturated_mean(expected, bin_width, det.dead_time);
        }
        counts.push(sample_poisson(expected, &mut rng));
    }
    CountTrace { bin_width, counts, start_time: 0.0 }
}

/// Run `n_drops` independent seeded drops in parallel.
#[allow(clippy::too_many_arguments)]
pub fn run_drops(
    cloud: &CloudSpec,
    geom: &CavityGeometry,
    rates: &CoupledRates,
    probe: &ProbeSpec,
    jitter: &JitterSpec,
    detector: Option<&DetectorSpec>,
    n_drops: usize,
    bins: usize,
    bin_width: f64,
    base_seed: u64,
) -> Vec<CountTrace> {
    (0..n_drops)
        .into_par_iter()
        .map(|drop| {
            let seed = base_seed ^ (drop as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            transit_trace(cloud, geom, rates, probe, jitter, detector, bins, bin_width, seed)
        })
        .collect()
}

/// Bin-wise average of equally shaped traces.
pub fn average_traces(traces: &[CountTrace]) -> Result<MeanTrace> {
    let first = traces.first().ok_or_else(|| Error::InvalidParameter {
        field: "traces",
        message: "need at least one trace".into(),
    })?;
    let mut values = vec![0.0f64; first.counts.len()];
    for trace in traces {
        if trace.counts.len() != first.counts.len() || trace.bin_width != first.bin_width {
            return Err(Error::InvalidParameter {
                field: "traces",
                message: "traces must share bin width and length".into(),
            });
        }
        for (acc, &c) in values.iter_mut().zip(trace.counts.iter()) {
            *acc += c as f64;
        }
    }
    let n = traces.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(MeanTrace {
        bin_width: first.bin_width,
        values,
        start_time: first.start_time,
        n_drops: traces.len(),
    })
}

/// Poisson draw that stays well-defined for any non-negative mean.
pub(crate) fn sample_poisson<R: Rng>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    draw as u32
}

/// Inverse-CDF Poisson quantile; monotone in both arguments, which gives
/// smooth common-random-number coupling across nearby means.
pub(crate) fn poisson_inverse(u: f64, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 60.0 {
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        let cap = (lambda * 20.0 + 200.0) as u64;
        while u > cdf && k < cap {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k
    } else {
        // normal quantile with continuity correction
        let z = inverse_normal_cdf(u.clamp(1e-12, 1.0 - 1e-12));
        (lambda + lambda.sqrt() * z).round().max(0.0) as u64
    }
}

/// Acklam's rational approximation of the standard normal quantile
/// (absolute error below 1.2e-9 on (0,1)).
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}
