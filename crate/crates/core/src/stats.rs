//! Detector corrections and photon-counting statistics.
//!
//! The dead-time model is the non-paralyzable per-bin correction
//! n = m/(1 − m·τ_d/τ); the simulator applies the matching forward
//! saturation map m = n/(1 + n·τ_d/τ) to expected rates so the correction is
//! testable as an exact inverse. The normalized variance f(n) = Var(n)/⟨n⟩ is
//! corrected for the detection efficiency η = (quantum efficiency) × (path
//! transmission) by f_corr − 1 = (f − 1)/η, the exact transformation for
//! binomial thinning of a counting process.

use serde::{Deserialize, Serialize};

use crate::cloud::CountTrace;
use crate::error::{Error, Result};

/// Photon-counting detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Dead time after each detection (s).
    pub dead_time: f64,
    /// Detector quantum efficiency ∈ (0, 1].
    pub quantum_efficiency: f64,
    /// Optical path transmission ∈ (0, 1].
    pub path_transmission: f64,
}

impl DetectorSpec {
    pub fn new(dead_time: f64, quantum_efficiency: f64, path_transmission: f64) -> Result<Self> {
        let spec = Self { dead_time, quantum_efficiency, path_transmission };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dead_time < 0.0 {
            return Err(Error::InvalidParameter {
                field: "dead_time",
                message: "dead time must be non-negative".into(),
            });
        }
        for (value, field) in [
            (self.quantum_efficiency, "quantum_efficiency"),
            (self.path_transmission, "path_transmission"),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::InvalidParameter {
                    field,
                    message: "efficiency must lie in (0, 1]".into(),
                });
            }
        }
        Ok(())
    }

    /// Overall detection efficiency η.
    pub fn overall_efficiency(&self) -> f64 {
        self.quantum_efficiency * self.path_transmission
    }
}

/// Dead-time correction n = m/(1 − m·τ_d/τ) for `measured` counts in a bin of
/// width `bin_width`. Errors once the bin saturates (m·τ_d/τ ≥ 1).
pub fn dead_time_correct(measured: f64, bin_width: f64, dead_time: f64) -> Result<f64> {
    let load = measured * dead_time / bin_width;
    if load >= 1.0 {
        return Err(Error::DeadTimeSaturated { counts: measured });
    }
    Ok(measured / (1.0 - load))
}

/// Forward saturation map m = n/(1 + n·τ_d/τ), the exact inverse of
/// [`dead_time_correct`].
pub fn saturated_mean(true_counts: f64, bin_width: f64, dead_time: f64) -> f64 {
    true_counts / (1.0 + true_counts * dead_time / bin_width)
}

/// Normalized variance f = Var(n)/⟨n⟩ with the unbiased sample variance.
pub fn normalized_variance(counts: &[f64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::UndefinedStatistic(format!(
            "need at least 2 samples, got {}",
            counts.len()
        )));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::UndefinedStatistic("window mean is not positive".into()));
    }
    let variance = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(variance / mean)
}

/// Efficiency correction f_corr = 1 + (f − 1)/η.
pub fn efficiency_correct(f: f64, detector: &DetectorSpec) -> f64 {
    1.0 + (f - 1.0) / detector.overall_efficiency()
}

/// Sliding-window noise trace: dead-time correct every bin, take the
/// normalized variance per window, and efficiency-correct it. Returns
/// (window center time, f_corr) pairs.
pub fn fano_trace(
    trace: &CountTrace,
    window: usize,
    detector: &DetectorSpec,
) -> Result<Vec<(f64, f64)>> {
    if window < 8 {
        return Err(Error::InvalidParameter {
            field: "window",
            message: "window must span at least 8 bins".into(),
        });
    }
    if trace.counts.len() < window {
        return Err(Error::InvalidParameter {
            field: "window",
            message: "trace is shorter than one window".into(),
        });
    }
    let corrected: Vec<f64> = trace
        .counts
        .iter()
        .map(|&m| dead_time_correct(m as f64, trace.bin_width, detector.dead_time))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(corrected.len() - window + 1);
    for start in 0..=corrected.len() - window {
        let f = normalized_variance(&corrected[start..start + window])?;
        let center = trace.start_time + (start as f64 + window as f64 / 2.0) * trace.bin_width;
        out.push((center, efficiency_correct(f, detector)));
    }
    Ok(out)
}

/// Across-drop statistic: normalized variance of the dead-time-corrected
/// counts over the drop ensemble, computed independently per bin. Complements
/// the within-trace sliding window.
pub fn across_drop_fano(
    traces: &[CountTrace],
    detector: &DetectorSpec,
) -> Result<Vec<(f64, f64)>> {
    let first = traces.first().ok_or_else(|| Error::InvalidParameter {
        field: "traces",
        message: "need at least 2 traces".into(),
    })?;
    if traces.len() < 2 {
        return Err(Error::InvalidParameter {
            field: "traces",
            message: "need at least 2 traces".into(),
        });
    }
    let bins = first.counts.len();
    let mut out = Vec::with_capacity(bins);
    let mut column = Vec::with_capacity(traces.len());
    for bin in 0..bins {
        column.clear();
        for trace in traces {
            column.push(dead_time_correct(
                trace.counts[bin] as f64,
                trace.bin_width,
                detector.dead_time,
            )?);
        }
        let f = normalized_variance(&column)?;
        out.push((first.bin_center(bin), efficiency_correct(f, detector)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn apd() -> DetectorSpec {
        DetectorSpec::new(44e-9, 0.6, 0.9).unwrap()
    }

    #[test]
    fn dead_time_reference_value() {
        // 4.19 / (1 - 4.19 * 44e-9 / 10e-6), computed independently
        let n = dead_time_correct(4.19, 10e-6, 44e-9).unwrap();
        assert!((n - 4.268697710999996).abs() < 1e-12, "n = {n}");
    }

    #[test]
    fn dead_time_limits() {
        assert_eq!(dead_time_correct(0.0, 10e-6, 44e-9).unwrap(), 0.0);
        assert_eq!(dead_time_correct(5.0, 10e-6, 0.0).unwrap(), 5.0);
        let at_limit = 10e-6 / 44e-9;
        assert!(matches!(
            dead_time_correct(at_limit, 10e-6, 44e-9),
            Err(Error::DeadTimeSaturated { .. })
        ));
    }

    #[test]
    fn dead_time_monotone() {
        let mut last = -1.0;
        for i in 0..200 {
            let m = i as f64 * 0.5;
            let n = dead_time_correct(m, 10e-6, 44e-9).unwrap();
            assert!(n > last);
            last = n;
        }
    }

    #[test]
    fn normalized_variance_poisson_and_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dist = Poisson::new(3.3f64).unwrap();
        let counts: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let f = normalized_variance(&counts).unwrap();
        assert!((f - 1.0).abs() < 0.02, "f = {f}");

        assert!((normalized_variance(&[4.0; 64]).unwrap()).abs() < 1e-12);
        assert!(normalized_variance(&[1.0]).is_err());
        assert!(normalized_variance(&[0.0; 16]).is_err());
    }

    #[test]
    fn normalized_variance_super_poisson_when_modulated() {
        // slowly modulated mean -> excess variance
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let counts: Vec<f64> = (0..100_000)
            .map(|i| {
                let mean = 3.0 * (1.0 + 0.4 * (i as f64 * 0.002).sin());
                Poisson::new(mean).unwrap().sample(&mut rng)
            })
            .collect();
        let f = normalized_variance(&counts).unwrap();
        assert!(f > 1.1, "f = {f}");
    }

    #[test]
    fn efficiency_correction_reference() {
        let detector = apd();
        assert!((detector.overall_efficiency() - 0.54).abs() < 1e-12);
        assert!((efficiency_correct(0.946, &detector) - 0.90).abs() < 1e-12);
        assert_eq!(efficiency_correct(1.0, &detector), 1.0);
        let unity = DetectorSpec::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(efficiency_correct(1.37, &unity), 1.37);
    }

    #[test]
    fn efficiency_correction_inverts_binomial_thinning() {
        // modulated counts with f > 1, thinned with keep-probability 0.54
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let eta = 0.54;
        let mut full = Vec::with_capacity(200_000);
        let mut thinned = Vec::with_capacity(200_000);
        for i in 0..200_000usize {
            let mean = 4.0 * (1.0 + 0.35 * (i as f64 * 0.003).sin());
            let n: f64 = Poisson::new(mean).unwrap().sample(&mut rng);
            let mut kept = 0.0;
            for _ in 0..n as u64 {
                if rand::Rng::random::<f64>(&mut rng) < eta {
                    kept += 1.0;
                }
            }
            full.push(n);
            thinned.push(kept);
        }
        let f_full = normalized_variance(&full).unwrap();
        let f_thin = normalized_variance(&thinned).unwrap();
        // thinning maps f -> 1 + eta (f - 1)
        assert!((f_thin - (1.0 + eta * (f_full - 1.0))).abs() < 0.02);
        let recovered = efficiency_correct(f_thin, &apd());
        assert!((recovered - f_full).abs() < 0.04, "{recovered} vs {f_full}");
    }

    #[test]
    fn fano_trace_poisson_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let dist = Poisson::new(2.7f64).unwrap();
        let trace = CountTrace {
            bin_width: 10e-6,
            counts: (0..50_000).map(|_| dist.sample(&mut rng) as u32).collect(),
            start_time: 0.0,
        };
        let ideal = DetectorSpec::new(0.0, 0.6, 0.9).unwrap();
        let fano = fano_trace(&trace, 100, &ideal).unwrap();
        let mean: f64 = fano.iter().map(|(_, f)| f).sum::<f64>() / fano.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean f_corr = {mean}");
        // no trend: first and last quarter agree within estimator noise
        let q = fano.len() / 4;
        let head: f64 = fano[..q].iter().map(|(_, f)| f).sum::<f64>() / q as f64;
        let tail: f64 = fano[fano.len() - q..].iter().map(|(_, f)| f).sum::<f64>() / q as f64;
        assert!((head - tail).abs() < 0.05);
    }

    #[test]
    fn fano_trace_window_validation() {
        let trace = CountTrace { bin_width: 10e-6, counts: vec![3; 64], start_time: 0.0 };
        assert!(fano_trace(&trace, 4, &apd()).is_err());
        assert!(fano_trace(&trace, 128, &apd()).is_err());
    }

    proptest! {
        #[test]
        fn saturation_round_trip_is_exact(
            true_counts in 0.0..200.0f64,
            dead_ns in 0.0..200.0f64,
        ) {
            let bin = 10e-6;
            let dead = dead_ns * 1e-9;
            let measured = saturated_mean(true_counts, bin, dead);
            let recovered = dead_time_correct(measured, bin, dead).unwrap();
            prop_assert!((recovered - true_counts).abs() < 1e-12 * true_counts.max(1.0));
        }
    }
}
