//! Monte Carlo forward model and parameter estimation for spectra and
//! transit traces.
//!
//! Spectrum fits minimize χ² over the mean atom number with a golden-section
//! search on [0, max]. Every objective evaluation regenerates the Monte Carlo
//! ensemble from the same seed (common random numbers), and the Poisson atom
//! counts are drawn through a monotone inverse-CDF coupling, so the objective
//! is a deterministic, smoothly varying function of the candidate mean and
//! the search is reproducible bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{mean_mode_weight, sample_mode_positions, MeanTrace};
use crate::constants::STANDARD_GRAVITY;
use crate::error::{Error, Result};
use crate::mode::effective_atom_number;
use crate::physics::{CavityGeometry, CoupledRates};
use crate::spectrum::{
    convolve_linewidth, intensity_from_atom_number, reflected_fraction, SpectrumSample,
};

/// Result of a spectrum fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Best-fit mean atom number ⟨N⟩.
    pub mean_n: f64,
    /// FWHM of the atom-induced feature of the best-fit model (rad/s).
    pub fwhm: f64,
    /// FWHM of the same feature without number fluctuations (rad/s), i.e.
    /// the fixed-N curve at ⟨N⟩; reported alongside because width
    /// definitions differ between conventions.
    pub fixed_n_fwhm: f64,
    /// χ² at the optimum.
    pub chi_square: f64,
    /// Number of objective evaluations spent by the search.
    pub n_evaluations: usize,
    /// Seed that froze the Monte Carlo ensemble.
    pub seed: u64,
}

/// Forward-model configuration shared by generation and fitting.
#[derive(Debug, Clone, Copy)]
pub struct McModel<'a> {
    pub geom: &'a CavityGeometry,
    pub rates: &'a CoupledRates,
    pub beta: f64,
    /// Probe-laser Lorentzian FWHM (rad/s); 0 disables the convolution.
    pub linewidth_fwhm: f64,
    pub n_realizations: usize,
    /// With fluctuations disabled every realization uses exactly ⟨N⟩.
    pub fluctuations: bool,
}

/// Monte Carlo average of the reflection spectrum over atom-number
/// fluctuations, convolved with the probe-laser lineshape.
///
/// Each realization draws a Poisson number of atoms in the mode cylinder
/// (expected effective number `mean_n`), sums their mode weights into N, and
/// evaluates the closed-form reflected fraction on the detuning grid.
pub fn mc_spectrum(
    mean_n: f64,
    model: &McModel,
    detuning_grid: &[f64],
    seed: u64,
) -> Result<Vec<SpectrumSample>> {
    if model.n_realizations == 0 {
        return Err(Error::InvalidParameter {
            field: "n_realizations",
            message: "need at least one realization".into(),
        });
    }
    let ensemble = sample_atom_numbers(mean_n, model, seed);
    let inv = 1.0 / ensemble.len() as f64;
    let spectrum: Vec<SpectrumSample> = detuning_grid
        .par_iter()
        .map(|&delta| {
            let mean: f64 = ensemble
                .iter()
                .map(|&n| reflected_fraction(delta, n, model.rates, model.beta))
                .sum::<f64>()
                * inv;
            SpectrumSample { detuning: delta, reflected_fraction: mean, sigma: 0.0 }
        })
        .collect();
    if model.linewidth_fwhm > 0.0 {
        convolve_linewidth(&spectrum, model.linewidth_fwhm)
    } else {
        Ok(spectrum)
    }
}

fn sample_atom_numbers(mean_n: f64, model: &McModel, seed: u64) -> Vec<f64> {
    if !model.fluctuations {
        return vec![mean_n; model.n_realizations];
    }
    let lambda = mean_n / mean_mode_weight(model.geom);
    (0..model.n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let positions = sample_mode_positions(model.geom, lambda, &mut rng);
            effective_atom_number(model.geom, &positions)
        })
        .collect()
}

/// Fit the mean atom number to measured spectrum samples by χ² minimization
/// with a derivative-free golden-section search over [0, `max_mean_n`].
pub fn fit_spectrum(
    data: &[SpectrumSample],
    model: &McModel,
    max_mean_n: f64,
    seed: u64,
) -> Result<FitResult> {
    if data.len() < 7 {
        return Err(Error::FitFailure(format!(
            "need at least 7 samples spanning the dip, got {}",
            data.len()
        )));
    }
    let grid: Vec<f64> = data.iter().map(|s| s.detuning).collect();
    let mut evaluations = 0usize;
    let mut objective = |mean_n: f64| -> Result<f64> {
        evaluations += 1;
        let model_spectrum = mc_spectrum(mean_n, model, &grid, seed)?;
        Ok(chi_square(data, &model_spectrum))
    };

    let tol = 1e-3;
    let (best_n, best_chi2) = golden_section(&mut objective, 0.0, max_mean_n, tol, 200)?;
    if best_n > max_mean_n - 2.0 * tol {
        return Err(Error::FitFailure(format!(
            "optimum pinned at the upper search bound {max_mean_n}: chi2 = {best_chi2:.3e}; \
             the data dip is deeper than the model can reach"
        )));
    }

    let fwhm = best_fit_feature_fwhm(best_n, model, &grid, seed, true)?;
    let fixed_n_fwhm = best_fit_feature_fwhm(best_n, model, &grid, seed, false)?;
    Ok(FitResult { mean_n: best_n, fwhm, fixed_n_fwhm, chi_square: best_chi2, n_evaluations: evaluations, seed })
}

/// χ² = Σ [(model − data)/σ]²; points with σ = 0 get unit weight.
pub fn chi_square(data: &[SpectrumSample], model: &[SpectrumSample]) -> f64 {
    data.iter()
        .zip(model.iter())
        .map(|(d, m)| {
            let sigma = if d.sigma > 0.0 { d.sigma } else { 1.0 };
            ((m.reflected_fraction - d.reflected_fraction) / sigma).powi(2)
        })
        .sum()
}

fn best_fit_feature_fwhm(
    mean_n: f64,
    model: &McModel,
    grid: &[f64],
    seed: u64,
    fluctuations: bool,
) -> Result<f64> {
    let mut m = *model;
    m.fluctuations = fluctuations && model.fluctuations;
    let with_atoms = mc_spectrum(mean_n, &m, grid, seed)?;
    let mut empty_model = m;
    empty_model.fluctuations = false;
    empty_model.n_realizations = 1;
    let empty = mc_spectrum(0.0, &empty_model, grid, seed)?;
    spectral_fwhm(&atom_feature(&with_atoms, &empty))
}

/// Difference spectrum (with atoms − empty cavity): the atom-induced feature.
pub fn atom_feature(with_atoms: &[SpectrumSample], empty: &[SpectrumSample]) -> Vec<SpectrumSample> {
    with_atoms
        .iter()
        .zip(empty.iter())
        .map(|(a, e)| SpectrumSample {
            detuning: a.detuning,
            reflected_fraction: a.reflected_fraction - e.reflected_fraction,
            sigma: (a.sigma * a.sigma + e.sigma * e.sigma).sqrt(),
        })
        .collect()
}

/// Full width at half maximum of a single-peaked feature, by linear
/// interpolation between the grid points bracketing the half level. The
/// baseline is the average of the two outermost samples. Errors when the
/// peak does not rise above the noise floor (5× the mean σ, or 1e-9).
pub fn spectral_fwhm(feature: &[SpectrumSample]) -> Result<f64> {
    if feature.len() < 5 {
        return Err(Error::WidthUndefined);
    }
    let baseline =
        (feature.first().unwrap().reflected_fraction + feature.last().unwrap().reflected_fraction)
            / 2.0;
    let (peak_idx, peak) = feature
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.reflected_fraction))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let height = peak - baseline;
    let mean_sigma = feature.iter().map(|s| s.sigma).sum::<f64>() / feature.len() as f64;
    if height <= (5.0 * mean_sigma).max(1e-9) {
        return Err(Error::WidthUndefined);
    }
    let half = baseline + height / 2.0;

    let crossing = |i: usize, j: usize| -> f64 {
        let (a, b) = (&feature[i], &feature[j]);
        a.detuning
            + (b.detuning - a.detuning) * (half - a.reflected_fraction)
                / (b.reflected_fraction - a.reflected_fraction)
    };
    let mut left = None;
    for i in (0..peak_idx).rev() {
        if feature[i].reflected_fraction <= half {
            left = Some(crossing(i, i + 1));
            break;
        }
    }
    let mut right = None;
    for i in peak_idx + 1..feature.len() {
        if feature[i].reflected_fraction <= half {
            right = Some(crossing(i - 1, i));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::WidthUndefined),
    }
}

/// Golden-section minimization on [a, b]; deterministic for a deterministic
/// objective. Returns (argmin, min).
pub fn golden_section(
    objective: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    let f_lo = objective(lo)?;
    let f_hi = objective(hi)?;
    for _ in 0..max_iterations {
        if hi - lo < tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    let (mut x_best, mut f_best) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if f_lo < f_best {
        x_best = a;
        f_best = f_lo;
    }
    if f_hi < f_best {
        x_best = b;
        f_best = f_hi;
    }
    Ok((x_best, f_best))
}

/// Nelder-Mead simplex minimizer for the few-parameter transit fit.
pub fn nelder_mead(
    objective: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    scales: &[f64],
    max_iterations: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut vertex = start.to_vec();
        vertex[i] += scales[i];
        simplex.push(vertex);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| objective(v)).collect();

    for _ in 0..max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if (values[n] - values[0]).abs() <= 1e-12 * (values[0].abs() + 1e-12) {
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let reflect: Vec<f64> =
            (0..n).map(|j| centroid[j] + (centroid[j] - simplex[n][j])).collect();
        let f_reflect = objective(&reflect);

        if f_reflect < values[0] {
            let expand: Vec<f64> =
                (0..n).map(|j| centroid[j] + 2.0 * (centroid[j] - simplex[n][j])).collect();
            let f_expand = objective(&expand);
            if f_expand < f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
        } else if f_reflect < values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_reflect;
        } else {
            let contract: Vec<f64> =
                (0..n).map(|j| centroid[j] + 0.5 * (simplex[n][j] - centroid[j])).collect();
            let f_contract = objective(&contract);
            if f_contract < values[n] {
                simplex[n] = contract;
                values[n] = f_contract;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = objective(&simplex[i]);
                }
            }
        }
    }
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    (simplex[best].clone(), values[best])
}

/// Transit-fit configuration: calibration levels plus the kinematics that
/// stay fixed during the fit.
#[derive(Debug, Clone, Copy)]
pub struct TransitFitSetup<'a> {
    pub rates: &'a CoupledRates,
    /// Off-resonant count rate I₀ (counts/s).
    pub i0: f64,
    /// Resonant empty-cavity count rate I₁ (counts/s).
    pub i1: f64,
    /// Thermal velocity of the falling cloud (m/s).
    pub thermal_velocity: f64,
    /// When present, the trace is dead-time corrected before fitting, so the
    /// model works in true rates.
    pub detector: Option<&'a crate::stats::DetectorSpec>,
}

/// Result of a transit fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitFit {
    /// Maximum of the fitted N(t) over the trace.
    pub peak_n: f64,
    /// Time at which the cloud center crosses the cavity (s).
    pub center_time: f64,
    /// Fitted amplitude (N at the center crossing).
    pub amplitude: f64,
    /// Fitted initial rms cloud size (m).
    pub initial_sigma: f64,
    pub chi_square: f64,
    /// Set when the pre-arrival baseline disagrees with I₁ beyond 5σ.
    pub baseline_warning: bool,
}

/// Gaussian-cloud transit profile: N(t) for a cloud whose center crosses the
/// cavity at `center_time`, normalized so N(center_time) = `amplitude`. The
/// shape includes both the Gaussian passage in fall distance and the 1/σ³
/// dilution of the expanding cloud, which shifts the transit maximum slightly
/// before the center crossing.
pub fn transit_profile(
    t: f64,
    amplitude: f64,
    center_time: f64,
    initial_sigma: f64,
    thermal_velocity: f64,
) -> f64 {
    let sigma2 = |tt: f64| initial_sigma * initial_sigma + (thermal_velocity * tt).powi(2);
    let s2 = sigma2(t);
    let s2_ref = sigma2(center_time);
    let fall = 0.5 * STANDARD_GRAVITY * (center_time * center_time - t * t);
    amplitude * (s2_ref / s2).powf(1.5) * (-fall * fall / (2.0 * s2)).exp()
}

/// Fit an averaged transit trace with I(t) = intensity(N(t)) where N(t) is
/// the Gaussian transit profile with free amplitude, center time, and
/// initial size. Counts are dead-time corrected first when a detector is
/// given.
pub fn fit_transit(raw_trace: &MeanTrace, setup: &TransitFitSetup) -> Result<TransitFit> {
    let bins = raw_trace.values.len();
    if bins < 32 {
        return Err(Error::FitFailure("trace too short to fit a transit".into()));
    }
    let trace = match setup.detector {
        Some(det) if det.dead_time > 0.0 => {
            let corrected: std::result::Result<Vec<f64>, Error> = raw_trace
                .values
                .iter()
                .map(|&m| crate::stats::dead_time_correct(m, raw_trace.bin_width, det.dead_time))
                .collect();
            MeanTrace { values: corrected?, ..raw_trace.clone() }
        }
        _ => raw_trace.clone(),
    };
    let trace = &trace;
    let tau = trace.bin_width;
    let weight_floor = 0.5 / trace.n_drops.max(1) as f64;

    // crude peak location for the starting simplex
    let smooth = |i: usize| -> f64 {
        let lo = i.saturating_sub(12);
        let hi = (i + 13).min(bins);
        trace.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    };
    let peak_bin = (0..bins).max_by(|&a, &b| smooth(a).partial_cmp(&smooth(b)).unwrap()).unwrap();
    let t_peak = trace.bin_center(peak_bin);

    // baseline consistency check over the first eighth of the trace
    let baseline_bins = (bins / 8).max(16);
    let baseline: f64 =
        trace.values[..baseline_bins].iter().sum::<f64>() / baseline_bins as f64;
    let expected_baseline = setup.i1 * tau;
    let baseline_se = (expected_baseline / (trace.n_drops.max(1) as f64 * baseline_bins as f64))
        .sqrt()
        .max(1e-12);
    let baseline_warning = (baseline - expected_baseline).abs() > 5.0 * baseline_se;

    let peak_counts = smooth(peak_bin);
    let start_amplitude = crate::spectrum::atom_number_from_intensities(
        &crate::spectrum::IntensityTriple {
            i0: setup.i0,
            i1: setup.i1,
            i2: (peak_counts / tau).clamp(setup.i1, setup.i0 * (1.0 - 1e-9)),
        },
        setup.rates,
    )
    .unwrap_or(0.1)
    .max(1e-3);

    // Poisson weights from a wide smoothing of the trace: using each bin's
    // own value as its variance lets downward fluctuations grab extra weight
    // and biases the amplitude low at small drop counts
    let variances: Vec<f64> = (0..bins)
        .map(|i| {
            let lo = i.saturating_sub(100);
            let hi = (i + 101).min(bins);
            let local = trace.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            local.max(weight_floor) / trace.n_drops.max(1) as f64
        })
        .collect();

    let objective = |params: &[f64]| -> f64 {
        let (amplitude, center, sigma0) = (params[0], params[1], params[2]);
        if !(0.0..=1e3).contains(&amplitude)
            || !(0.0..=10.0).contains(&center)
            || !(0.0..=0.5).contains(&sigma0)
        {
            return f64::INFINITY;
        }
        let mut chi2 = 0.0;
        for i in 0..bins {
            let t = trace.bin_center(i);
            let n = transit_profile(t, amplitude, center, sigma0, setup.thermal_velocity);
            let model = intensity_from_atom_number(n, setup.i0, setup.i1, setup.rates) * tau;
            chi2 += (model - trace.values[i]).powi(2) / variances[i];
        }
        chi2
    };

    let start = vec![start_amplitude, t_peak, 0.5e-3];
    let scales = vec![0.3 * start_amplitude.max(0.05), 0.1 * t_peak.max(1e-3), 0.4e-3];
    let (params, chi2) = nelder_mead(&objective, &start, &scales, 600);
    // polish from the first optimum with a tighter simplex
    let scales2 = vec![0.02 * params[0].max(0.01), 0.005 * params[1].max(1e-3), 0.05e-3];
    let (params, chi2b) = nelder_mead(&objective, &params, &scales2, 400);
    let chi2 = chi2.min(chi2b);

    let (amplitude, center_time, initial_sigma) = (params[0], params[1], params[2]);
    let peak_n = (0..bins)
        .map(|i| {
            transit_profile(
                trace.bin_center(i),
                amplitude,
                center_time,
                initial_sigma,
                setup.thermal_velocity,
            )
        })
        .fold(0.0, f64::max);

    Ok(TransitFit { peak_n, center_time, amplitude, initial_sigma, chi_square: chi2, baseline_warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{derive_rates, AtomSpecies};

    fn paper_setup() -> (CavityGeometry, CoupledRates) {
        let geom = CavityGeometry::new(130e-6, 4.6e-6, 186e-6, 280.0, 780e-9, 0.194292).unwrap();
        let rates = derive_rates(&AtomSpecies::rb85_d2(), &geom);
        (geom, rates)
    }

    fn grid(gamma: f64) -> Vec<f64> {
        // gamma/20 spacing over +-20 gamma
        let step = gamma / 20.0;
        (0..=800).map(|i| -20.0 * gamma + i as f64 * step).collect()
    }

    #[test]
    fn degenerate_mc_matches_closed_form() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 50,
            fluctuations: false,
        };
        let grid = grid(rates.gamma);
        let spectrum = mc_spectrum(1.3, &model, &grid, 5).unwrap();
        for s in &spectrum {
            let direct = reflected_fraction(s.detuning, 1.3, &rates, 0.194292);
            assert!((s.reflected_fraction - direct).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_mean_gives_empty_cavity_spectrum() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 200,
            fluctuations: true,
        };
        let grid = grid(rates.gamma);
        let spectrum = mc_spectrum(0.0, &model, &grid, 5).unwrap();
        for s in &spectrum {
            let direct = reflected_fraction(s.detuning, 0.0, &rates, 0.194292);
            assert!((s.reflected_fraction - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fluctuations_lower_the_resonant_average() {
        // the reflected fraction is concave in N near these parameters, so
        // averaging over a fluctuating N sits below the fixed-N value
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 4000,
            fluctuations: true,
        };
        let spectrum = mc_spectrum(1.0, &model, &[0.0], 11).unwrap();
        let fixed = reflected_fraction(0.0, 1.0, &rates, 0.194292);
        assert!(
            spectrum[0].reflected_fraction < fixed - 0.003,
            "{} !< {}",
            spectrum[0].reflected_fraction,
            fixed
        );
    }

    #[test]
    fn ensemble_mean_matches_target() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 20_000,
            fluctuations: true,
        };
        let ns = sample_atom_numbers(1.1, &model, 77);
        let mean = ns.iter().sum::<f64>() / ns.len() as f64;
        assert!((mean - 1.1).abs() / 1.1 < 0.02, "mean = {mean}");
    }

    #[test]
    fn spectral_fwhm_constructed_lorentzian() {
        // peak-normalized Lorentzian of FWHM 2*gamma on a flat background
        let gamma = 1.9e7;
        let feature: Vec<SpectrumSample> = grid(gamma)
            .into_iter()
            .map(|d| SpectrumSample {
                detuning: d,
                reflected_fraction: 0.1 / (1.0 + (d / gamma).powi(2)),
                sigma: 0.0,
            })
            .collect();
        let width = spectral_fwhm(&feature).unwrap();
        assert!((width - 2.0 * gamma).abs() / (2.0 * gamma) < 0.01, "width = {width:e}");
    }

    #[test]
    fn spectral_fwhm_needs_a_feature() {
        let flat: Vec<SpectrumSample> = grid(1.9e7)
            .into_iter()
            .map(|d| SpectrumSample { detuning: d, reflected_fraction: 0.65, sigma: 0.01 })
            .collect();
        assert!(matches!(spectral_fwhm(&flat), Err(Error::WidthUndefined)));
    }

    #[test]
    fn feature_width_grows_with_atom_number() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 1,
            fluctuations: false,
        };
        let grid = grid(rates.gamma);
        let empty = mc_spectrum(0.0, &model, &grid, 1).unwrap();
        let mut widths = Vec::new();
        for n in [0.5, 1.0, 2.0] {
            let spec = mc_spectrum(n, &model, &grid, 1).unwrap();
            widths.push(spectral_fwhm(&atom_feature(&spec, &empty)).unwrap());
        }
        assert!(widths[0] < widths[1] && widths[1] < widths[2], "{widths:?}");
        // on-resonance height grows too
        let h = |n: f64| reflected_fraction(0.0, n, &rates, 0.194292);
        assert!(h(0.5) < h(1.0) && h(1.0) < h(2.0));
    }

    #[test]
    fn golden_section_minimizes_quadratic() {
        let mut f = |x: f64| -> Result<f64> { Ok((x - 1.7).powi(2) + 0.25) };
        let (x, v) = golden_section(&mut f, 0.0, 10.0, 1e-6, 200).unwrap();
        assert!((x - 1.7).abs() < 1e-5);
        assert!((v - 0.25).abs() < 1e-9);
    }

    #[test]
    fn nelder_mead_minimizes_rosenbrock() {
        let rosenbrock = |p: &[f64]| -> f64 {
            (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2)
        };
        let (best, value) = nelder_mead(&rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], 2000);
        assert!(value < 1e-8, "value = {value}");
        assert!((best[0] - 1.0).abs() < 1e-3 && (best[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn spectrum_fit_round_trip() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 2.0 * std::f64::consts::PI * 1.2e6,
            n_realizations: 1500,
            fluctuations: true,
        };
        let grid = grid(rates.gamma);
        let truth = 1.1;
        let clean = mc_spectrum(truth, &model, &grid, 2024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data: Vec<SpectrumSample> = clean
            .iter()
            .map(|s| {
                let noise = 0.02 * s.reflected_fraction;
                let draw: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                SpectrumSample {
                    detuning: s.detuning,
                    reflected_fraction: s.reflected_fraction + noise * draw,
                    sigma: noise,
                }
            })
            .collect();
        let fit = fit_spectrum(&data, &model, 10.0, 909).unwrap();
        assert!((fit.mean_n - truth).abs() / truth < 0.10, "recovered {}", fit.mean_n);
        assert!(fit.fwhm > 0.0);
        assert!(fit.n_evaluations > 10);
    }

    #[test]
    fn spectrum_fit_zero_atoms() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 400,
            fluctuations: true,
        };
        let grid = grid(rates.gamma);
        let data: Vec<SpectrumSample> = grid
            .iter()
            .map(|&d| SpectrumSample {
                detuning: d,
                reflected_fraction: reflected_fraction(d, 0.0, &rates, 0.194292),
                sigma: 0.005,
            })
            .collect();
        match fit_spectrum(&data, &model, 10.0, 2) {
            Ok(fit) => assert!(fit.mean_n < 0.05, "mean_n = {}", fit.mean_n),
            // the feature of a zero-atom fit may be below the noise floor
            Err(Error::WidthUndefined) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn spectrum_fit_is_deterministic() {
        let (geom, rates) = paper_setup();
        let model = McModel {
            geom: &geom,
            rates: &rates,
            beta: 0.194292,
            linewidth_fwhm: 0.0,
            n_realizations: 300,
            fluctuations: true,
        };
        let grid = grid(rates.gamma);
        let clean = mc_spectrum(0.8, &model, &grid, 5).unwrap();
        let data: Vec<SpectrumSample> = clean
            .iter()
            .map(|s| SpectrumSample { sigma: 0.01, ..*s })
            .collect();
        let a = fit_spectrum(&data, &model, 10.0, 3).unwrap();
        let b = fit_spectrum(&data, &model, 10.0, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transit_fit_exact_on_noiseless_profile() {
        let (_, rates) = paper_setup();
        let vth = 0.0541993056158259; // 30 uK
        let (i0, i1) = (419e3, 272e3);
        let tau = 10e-6;
        let truth = (0.62, 0.0349, 0.4e-3);
        let values: Vec<f64> = (0..6000)
            .map(|i| {
                let t = (i as f64 + 0.5) * tau;
                let n = transit_profile(t, truth.0, truth.1, truth.2, vth);
                intensity_from_atom_number(n, i0, i1, &rates) * tau
            })
            .collect();
        let trace = MeanTrace { bin_width: tau, values, start_time: 0.0, n_drops: 1000 };
        let setup = TransitFitSetup { rates: &rates, i0, i1, thermal_velocity: vth, detector: None };
        let fit = fit_transit(&trace, &setup).unwrap();
        assert!((fit.amplitude - truth.0).abs() < 1e-4, "amplitude {}", fit.amplitude);
        assert!((fit.center_time - truth.1).abs() < 1e-6, "center {}", fit.center_time);
        assert!(!fit.baseline_warning);
    }

    #[test]
    fn transit_fit_flat_trace_has_no_amplitude() {
        let (_, rates) = paper_setup();
        let (i0, i1) = (419e3, 272e3);
        let tau = 10e-6;
        let values = vec![i1 * tau; 4000];
        let trace = MeanTrace { bin_width: tau, values, start_time: 0.0, n_drops: 500 };
        let setup =
            TransitFitSetup { rates: &rates, i0, i1, thermal_velocity: 0.0541993056158259, detector: None };
        let fit = fit_transit(&trace, &setup).unwrap();
        assert!(fit.peak_n < 0.02, "peak_n = {}", fit.peak_n);
    }

    #[test]
    fn transit_fit_flags_bad_baseline() {
        let (_, rates) = paper_setup();
        let (i0, i1) = (419e3, 272e3);
        let tau = 10e-6;
        // baseline 10% above the expected empty-cavity level
        let values = vec![1.1 * i1 * tau; 4000];
        let trace = MeanTrace { bin_width: tau, values, start_time: 0.0, n_drops: 500 };
        let setup =
            TransitFitSetup { rates: &rates, i0, i1, thermal_velocity: 0.0541993056158259, detector: None };
        let fit = fit_transit(&trace, &setup).unwrap();
        assert!(fit.baseline_warning);
    }
}
