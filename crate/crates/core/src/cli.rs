//! Experiment runners behind the command-line interface.
//!
//! Every run is driven by one resolved [`RunConfig`] plus a seed, writes its
//! artifacts into the output directory, and embeds the fully-resolved config
//! and seed as `#`-prefixed TOML at the top of every CSV, so each data file
//! describes the run that produced it. Summaries are JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cloud::{
    average_traces, fall_time, mean_effective_atoms, run_drops, transit_trace, CountTrace,
    MeanTrace,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fit::{
    atom_feature, fit_spectrum, fit_transit, mc_spectrum, spectral_fwhm, McModel, TransitFitSetup,
};
use crate::physics::derive_rates;
use crate::source::{pulse_onset_check, simulate_pulse};
use crate::spectrum::{intensity_from_atom_number, SpectrumSample};
use crate::stats::fano_trace;

/// Named experiments exposed as CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Rates,
    Spectrum,
    Drop,
    FitSpectrum,
    FitTransit,
    Stats,
    Pulse,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Rates => "rates",
            Experiment::Spectrum => "spectrum",
            Experiment::Drop => "drop",
            Experiment::FitSpectrum => "fit-spectrum",
            Experiment::FitTransit => "fit-transit",
            Experiment::Stats => "stats",
            Experiment::Pulse => "pulse",
        }
    }
}

/// Paths of files written by a run, echoed to stdout.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
}

fn config_banner(config: &RunConfig) -> String {
    let mut banner = String::new();
    for line in config.to_toml().lines() {
        let _ = writeln!(banner, "# {line}");
    }
    banner
}

fn write_csv(
    path: &Path,
    config: &RunConfig,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<()> {
    let mut text = config_banner(config);
    let _ = writeln!(text, "{header}");
    for row in rows {
        let _ = writeln!(text, "{row}");
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_summary<T: Serialize>(path: &Path, summary: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryEnvelope<T: Serialize> {
    experiment: &'static str,
    seed: u64,
    results: T,
    config: RunConfig,
}

fn trace_rows<'a>(trace: &'a CountTrace) -> impl Iterator<Item = String> + 'a {
    trace
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| format!("{:.9e},{}", trace.bin_center(i), c))
}

fn mean_trace_rows<'a>(trace: &'a MeanTrace) -> impl Iterator<Item = String> + 'a {
    trace
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.9e},{:.9e}", trace.bin_center(i), v))
}

const RAD_PER_MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;

fn spectrum_rows<'a>(samples: &'a [SpectrumSample]) -> impl Iterator<Item = String> + 'a {
    samples.iter().map(|s| {
        format!(
            "{:.9e},{:.9e},{:.9e}",
            s.detuning / RAD_PER_MHZ,
            s.reflected_fraction,
            s.sigma
        )
    })
}

/// Run one experiment; returns the artifact list.
pub fn run(experiment: Experiment, config: &RunConfig, out_dir: &Path) -> Result<RunArtifacts> {
    config.ensure_valid()?;
    std::fs::create_dir_all(out_dir)?;
    let mut artifacts = RunArtifacts::default();

    let config_path = out_dir.join("resolved_config.toml");
    std::fs::write(&config_path, config.to_toml())?;
    artifacts.files.push(config_path);

    match experiment {
        Experiment::Rates => run_rates(config, out_dir, &mut artifacts)?,
        Experiment::Spectrum => run_spectrum(config, out_dir, &mut artifacts)?,
        Experiment::Drop => run_drop(config, out_dir, &mut artifacts)?,
        Experiment::FitSpectrum => {
            return Err(Error::Config("fit-spectrum needs an --input file".into()))
        }
        Experiment::FitTransit => {
            return Err(Error::Config("fit-transit needs an --input file".into()))
        }
        Experiment::Stats => run_stats(config, out_dir, &mut artifacts)?,
        Experiment::Pulse => run_pulse(config, out_dir, &mut artifacts)?,
    }
    Ok(artifacts)
}

#[derive(Serialize)]
struct RatesSummary {
    mode_volume_m3: f64,
    rayleigh_length_m: f64,
    g0_per_s: f64,
    g_squared_per_s2: f64,
    kappa_per_s: f64,
    gamma_per_s: f64,
    critical_atom_number: f64,
    cooperativity: f64,
    purcell_rate_per_s: f64,
    emission_efficiency: f64,
    i1_per_s: f64,
    fall_time_s: f64,
}

fn run_rates(config: &RunConfig, out_dir: &Path, artifacts: &mut RunArtifacts) -> Result<()> {
    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let probe = config.probe();
    let summary = SummaryEnvelope {
        experiment: "rates",
        seed: config.seed,
        results: RatesSummary {
            mode_volume_m3: crate::physics::mode_volume(&geom),
            rayleigh_length_m: crate::mode::rayleigh_length(&geom),
            g0_per_s: rates.g0,
            g_squared_per_s2: rates.g_squared,
            kappa_per_s: rates.kappa,
            gamma_per_s: rates.gamma,
            critical_atom_number: rates.critical_atom_number,
            cooperativity: rates.cooperativity(),
            purcell_rate_per_s: crate::source::purcell_rate(&rates),
            emission_efficiency: crate::source::emission_efficiency(&rates),
            i1_per_s: probe.i0 * (1.0 - probe.beta) * (1.0 - probe.beta),
            fall_time_s: fall_time(config.cloud.height_mm * 1e-3),
        },
        config: config.clone(),
    };
    let path = out_dir.join("rates_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct SpectrumSummary {
    mean_n: f64,
    noise: f64,
    n_realizations: usize,
    on_resonance_fraction: f64,
    feature_fwhm_rad_per_s: Option<f64>,
    feature_fwhm_over_2gamma: Option<f64>,
}

fn run_spectrum(config: &RunConfig, out_dir: &Path, artifacts: &mut RunArtifacts) -> Result<()> {
    use rand::SeedableRng;
    use rand_distr::Distribution;

    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let model = McModel {
        geom: &geom,
        rates: &rates,
        beta: config.geometry.beta,
        linewidth_fwhm: config.linewidth_fwhm(),
        n_realizations: config.spectrum.n_realizations,
        fluctuations: true,
    };
    let grid = config.detuning_grid();
    let clean = mc_spectrum(config.spectrum.mean_n, &model, &grid, config.seed)?;

    let mut empty_model = model;
    empty_model.fluctuations = false;
    empty_model.n_realizations = 1;
    let empty = mc_spectrum(0.0, &empty_model, &grid, config.seed)?;
    let feature_fwhm = spectral_fwhm(&atom_feature(&clean, &empty)).ok();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5EED));
    let normal = rand_distr::StandardNormal;
    let noisy: Vec<SpectrumSample> = clean
        .iter()
        .map(|s| {
            let sigma = config.spectrum.noise * s.reflected_fraction;
            let draw: f64 = normal.sample(&mut rng);
            SpectrumSample {
                detuning: s.detuning,
                reflected_fraction: (s.reflected_fraction + sigma * draw).clamp(0.0, 1.0),
                sigma,
            }
        })
        .collect();

    let csv_path = out_dir.join("spectrum.csv");
    write_csv(
        &csv_path,
        config,
        "detuning_mhz,reflected_fraction,sigma",
        spectrum_rows(&noisy),
    )?;
    artifacts.files.push(csv_path);

    let model_path = out_dir.join("spectrum_model.csv");
    write_csv(
        &model_path,
        config,
        "detuning_mhz,reflected_fraction,sigma",
        spectrum_rows(&clean),
    )?;
    artifacts.files.push(model_path);

    let mid = clean.len() / 2;
    let summary = SummaryEnvelope {
        experiment: "spectrum",
        seed: config.seed,
        results: SpectrumSummary {
            mean_n: config.spectrum.mean_n,
            noise: config.spectrum.noise,
            n_realizations: config.spectrum.n_realizations,
            on_resonance_fraction: clean[mid].reflected_fraction,
            feature_fwhm_rad_per_s: feature_fwhm,
            feature_fwhm_over_2gamma: feature_fwhm.map(|w| w / (2.0 * rates.gamma)),
        },
        config: config.clone(),
    };
    let path = out_dir.join("spectrum_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct DropSummary {
    n_drops: usize,
    configured_peak_n: Option<f64>,
    analytic_peak_n: f64,
    fall_time_s: f64,
    baseline_counts_per_bin: f64,
    peak_counts_per_bin: f64,
}

fn run_drop(config: &RunConfig, out_dir: &Path, artifacts: &mut RunArtifacts) -> Result<()> {
    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let probe = config.probe();
    let cloud = config.cloud(&geom)?;
    let jitter = config.jitter();
    let detector = config.detector()?;
    let bin_width = config.transit.bin_us * 1e-6;
    let bins = (config.transit.duration_ms * 1e-3 / bin_width).round() as usize;

    let traces = run_drops(
        &cloud,
        &geom,
        &rates,
        &probe,
        &jitter,
        Some(&detector),
        config.transit.n_drops,
        bins,
        bin_width,
        config.seed,
    );
    let mean = average_traces(&traces)?;

    let csv_path = out_dir.join("drop_trace.csv");
    write_csv(&csv_path, config, "time_s,counts", mean_trace_rows(&mean))?;
    artifacts.files.push(csv_path);

    let single_path = out_dir.join("drop_trace_first.csv");
    write_csv(&single_path, config, "time_s,counts", trace_rows(&traces[0]))?;
    artifacts.files.push(single_path);

    let t_arrival = cloud.release_time + fall_time(cloud.drop_height);
    let quarter = bins / 4;
    let baseline = mean.values[..quarter.max(1)].iter().sum::<f64>() / quarter.max(1) as f64;
    let peak = mean.values.iter().cloned().fold(0.0, f64::max);
    let summary = SummaryEnvelope {
        experiment: "drop",
        seed: config.seed,
        results: DropSummary {
            n_drops: config.transit.n_drops,
            configured_peak_n: config.cloud.peak_n,
            analytic_peak_n: (0..bins)
                .map(|i| mean_effective_atoms(&cloud, &geom, mean.bin_center(i)))
                .fold(0.0, f64::max),
            fall_time_s: t_arrival,
            baseline_counts_per_bin: baseline,
            peak_counts_per_bin: peak,
        },
        config: config.clone(),
    };
    let path = out_dir.join("drop_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct FitSpectrumSummary {
    input: String,
    mean_n: f64,
    feature_fwhm_rad_per_s: f64,
    feature_fwhm_over_2gamma: f64,
    fixed_n_fwhm_over_2gamma: f64,
    chi_square: f64,
    n_points: usize,
    n_evaluations: usize,
}

/// Fit a measured/synthetic spectrum CSV; the embedded config of the input
/// file is ignored in favor of the supplied one.
pub fn run_fit_spectrum(
    config: &RunConfig,
    input: &Path,
    out_dir: &Path,
) -> Result<RunArtifacts> {
    config.ensure_valid()?;
    std::fs::create_dir_all(out_dir)?;
    let mut artifacts = RunArtifacts::default();

    let data = read_spectrum_csv(input)?;
    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let model = McModel {
        geom: &geom,
        rates: &rates,
        beta: config.geometry.beta,
        linewidth_fwhm: config.linewidth_fwhm(),
        n_realizations: config.fit.n_realizations,
        fluctuations: true,
    };
    let fit = fit_spectrum(&data, &model, config.fit.max_mean_n, config.seed)?;

    let grid: Vec<f64> = data.iter().map(|s| s.detuning).collect();
    let best_curve = mc_spectrum(fit.mean_n, &model, &grid, config.seed)?;
    let model_path = out_dir.join("fit_spectrum_model.csv");
    write_csv(
        &model_path,
        config,
        "detuning_mhz,reflected_fraction,sigma",
        spectrum_rows(&best_curve),
    )?;
    artifacts.files.push(model_path);

    let summary = SummaryEnvelope {
        experiment: "fit-spectrum",
        seed: config.seed,
        results: FitSpectrumSummary {
            input: input.display().to_string(),
            mean_n: fit.mean_n,
            feature_fwhm_rad_per_s: fit.fwhm,
            feature_fwhm_over_2gamma: fit.fwhm / (2.0 * rates.gamma),
            fixed_n_fwhm_over_2gamma: fit.fixed_n_fwhm / (2.0 * rates.gamma),
            chi_square: fit.chi_square,
            n_points: data.len(),
            n_evaluations: fit.n_evaluations,
        },
        config: config.clone(),
    };
    let path = out_dir.join("fit_spectrum_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(artifacts)
}

#[derive(Serialize)]
struct FitTransitSummary {
    input: String,
    peak_n: f64,
    center_time_s: f64,
    amplitude: f64,
    initial_sigma_m: f64,
    chi_square: f64,
    baseline_warning: bool,
}

/// Fit an averaged transit trace CSV.
pub fn run_fit_transit(config: &RunConfig, input: &Path, out_dir: &Path) -> Result<RunArtifacts> {
    config.ensure_valid()?;
    std::fs::create_dir_all(out_dir)?;
    let mut artifacts = RunArtifacts::default();

    let (trace, embedded) = read_trace_csv(input)?;
    // prefer drop metadata embedded in the file for weighting
    let n_drops = embedded.as_ref().map(|c| c.transit.n_drops).unwrap_or(config.transit.n_drops);
    let trace = MeanTrace { n_drops, ..trace };

    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let probe = config.probe();
    let i1 = probe.i0 * (1.0 - probe.beta) * (1.0 - probe.beta);
    let cloud = config.cloud(&geom)?;
    let detector = config.detector()?;
    let setup = TransitFitSetup {
        rates: &rates,
        i0: probe.i0,
        i1,
        thermal_velocity: cloud.thermal_velocity(),
        detector: Some(&detector),
    };
    let fit = fit_transit(&trace, &setup)?;

    let model_path = out_dir.join("fit_transit_model.csv");
    let tau = trace.bin_width;
    write_csv(
        &model_path,
        config,
        "time_s,counts",
        (0..trace.values.len()).map(|i| {
            let t = trace.bin_center(i);
            let n = crate::fit::transit_profile(
                t,
                fit.amplitude,
                fit.center_time,
                fit.initial_sigma,
                setup.thermal_velocity,
            );
            let model = intensity_from_atom_number(n, probe.i0, i1, &rates) * tau;
            format!("{t:.9e},{model:.9e}")
        }),
    )?;
    artifacts.files.push(model_path);

    let summary = SummaryEnvelope {
        experiment: "fit-transit",
        seed: config.seed,
        results: FitTransitSummary {
            input: input.display().to_string(),
            peak_n: fit.peak_n,
            center_time_s: fit.center_time,
            amplitude: fit.amplitude,
            initial_sigma_m: fit.initial_sigma,
            chi_square: fit.chi_square,
            baseline_warning: fit.baseline_warning,
        },
        config: config.clone(),
    };
    let path = out_dir.join("fit_transit_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(artifacts)
}

#[derive(Serialize)]
struct StatsSummary {
    window_bins: usize,
    pre_arrival_mean_fano: f64,
    post_arrival_mean_fano: f64,
    arrival_time_s: f64,
}

fn run_stats(config: &RunConfig, out_dir: &Path, artifacts: &mut RunArtifacts) -> Result<()> {
    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let probe = config.probe();
    let cloud = config.cloud(&geom)?;
    let jitter = config.jitter();
    let detector = config.detector()?;
    let bin_width = config.transit.bin_us * 1e-6;
    let bins = (config.transit.duration_ms * 1e-3 / bin_width).round() as usize;

    let trace = transit_trace(
        &cloud,
        &geom,
        &rates,
        &probe,
        &jitter,
        Some(&detector),
        bins,
        bin_width,
        config.seed,
    );
    let fano = fano_trace(&trace, config.stats.window_bins, &detector)?;

    let csv_path = out_dir.join("stats_fano.csv");
    write_csv(
        &csv_path,
        config,
        "time_s,f_corr",
        fano.iter().map(|(t, f)| format!("{t:.9e},{f:.9e}")),
    )?;
    artifacts.files.push(csv_path);

    let trace_path = out_dir.join("stats_trace.csv");
    write_csv(&trace_path, config, "time_s,counts", trace_rows(&trace))?;
    artifacts.files.push(trace_path);

    let arrival = cloud.release_time + fall_time(cloud.drop_height);
    let pre: Vec<f64> =
        fano.iter().filter(|(t, _)| *t < arrival - 5e-3).map(|(_, f)| *f).collect();
    let post: Vec<f64> =
        fano.iter().filter(|(t, _)| (*t - arrival).abs() < 2e-3).map(|(_, f)| *f).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let summary = SummaryEnvelope {
        experiment: "stats",
        seed: config.seed,
        results: StatsSummary {
            window_bins: config.stats.window_bins,
            pre_arrival_mean_fano: mean(&pre),
            post_arrival_mean_fano: mean(&post),
            arrival_time_s: arrival,
        },
        config: config.clone(),
    };
    let path = out_dir.join("stats_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct PulseSummary {
    repeats: usize,
    n0: f64,
    expected_detected_per_shot: f64,
    detected_total: u64,
    detected_per_shot: f64,
    onset_check: bool,
    excitation_bin: usize,
}

fn run_pulse(config: &RunConfig, out_dir: &Path, artifacts: &mut RunArtifacts) -> Result<()> {
    let geom = config.geometry()?;
    let species = config.species()?;
    let rates = derive_rates(&species, &geom);
    let probe = config.probe();
    let detector = config.detector()?;
    let model = config.emitter_model(&rates)?;

    let bin_width = config.pulse.bin_us * 1e-6;
    let bins = (config.pulse.window_ms * 1e-3 / bin_width).round() as usize;
    let marker = (config.pulse.excitation_ms * 1e-3 / bin_width).round() as usize;
    let repeats = config.pulse.repeats;

    // probe channel: constant atom level N0 until excitation-on, then decay
    // by dark pumping plus physical loss
    let i1 = probe.i0 * (1.0 - probe.beta) * (1.0 - probe.beta);
    let decay = model.dark_pumping_rate * 0.5 + model.loss_rate;
    let mut probe_values = vec![0.0f64; bins];
    let mut pulse_values = vec![0.0f64; bins];
    let mut detected_total = 0u64;
    let mut expected_detected = 0.0f64;

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    for shot in 0..repeats {
        let outcome = simulate_pulse(
            &model,
            config.pulse.n0,
            (bins - marker) as f64 * bin_width,
            bin_width,
            config.seed ^ (shot as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )?;
        expected_detected = outcome.expected_detected;
        for (i, &c) in outcome.trace.counts.iter().enumerate() {
            if marker + i < bins {
                pulse_values[marker + i] += c as f64;
            }
        }
        detected_total += outcome.trace.counts.iter().map(|&c| c as u64).sum::<u64>();

        for (i, value) in probe_values.iter_mut().enumerate() {
            let t = (i as f64 + 0.5) * bin_width;
            let n = if i < marker {
                config.pulse.n0
            } else {
                config.pulse.n0 * (-decay * (t - marker as f64 * bin_width)).exp()
            };
            let mean = crate::stats::saturated_mean(
                intensity_from_atom_number(n, probe.i0, i1, &rates) * bin_width,
                bin_width,
                detector.dead_time,
            );
            *value += crate::cloud::sample_poisson(mean, &mut rng) as f64;
        }
    }
    let inv = 1.0 / repeats as f64;
    probe_values.iter_mut().for_each(|v| *v *= inv);
    pulse_values.iter_mut().for_each(|v| *v *= inv);

    let probe_trace =
        MeanTrace { bin_width, values: probe_values, start_time: 0.0, n_drops: repeats };
    let pulse_trace =
        MeanTrace { bin_width, values: pulse_values, start_time: 0.0, n_drops: repeats };
    let onset = pulse_onset_check(&probe_trace, &pulse_trace, Some(marker))?;

    let probe_path = out_dir.join("pulse_probe.csv");
    write_csv(&probe_path, config, "time_s,counts", mean_trace_rows(&probe_trace))?;
    artifacts.files.push(probe_path);
    let pulse_path = out_dir.join("pulse_photons.csv");
    write_csv(&pulse_path, config, "time_s,counts", mean_trace_rows(&pulse_trace))?;
    artifacts.files.push(pulse_path);

    let summary = SummaryEnvelope {
        experiment: "pulse",
        seed: config.seed,
        results: PulseSummary {
            repeats,
            n0: config.pulse.n0,
            expected_detected_per_shot: expected_detected,
            detected_total,
            detected_per_shot: detected_total as f64 * inv,
            onset_check: onset,
            excitation_bin: marker,
        },
        config: config.clone(),
    };
    let path = out_dir.join("pulse_summary.json");
    write_summary(&path, &summary)?;
    artifacts.files.push(path);
    Ok(())
}

/// Read a spectrum CSV (detuning_mhz, reflected_fraction, sigma), skipping
/// the `#` config banner.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumSample>> {
    let text = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("detuning") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::DataFormat {
                path: path.display().to_string(),
                message: format!("expected 3 columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::DataFormat {
                path: path.display().to_string(),
                message: format!("bad number {s:?}"),
            })
        };
        samples.push(SpectrumSample {
            detuning: parse(fields[0])? * RAD_PER_MHZ,
            reflected_fraction: parse(fields[1])?,
            sigma: parse(fields[2])?,
        });
    }
    if samples.is_empty() {
        return Err(Error::DataFormat {
            path: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    Ok(samples)
}

/// Read a trace CSV (time_s, counts) plus the embedded resolved config from
/// the `#` banner when present.
pub fn read_trace_csv(path: &Path) -> Result<(MeanTrace, Option<RunConfig>)> {
    let text = std::fs::read_to_string(path)?;
    let mut banner = String::new();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("time_s") {
            continue;
        }
        if let Some(stripped) = trimmed.strip_prefix('#') {
            banner.push_str(stripped.trim_start());
            banner.push('\n');
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::DataFormat {
                path: path.display().to_string(),
                message: format!("expected 2 columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::DataFormat {
                path: path.display().to_string(),
                message: format!("bad number {s:?}"),
            })
        };
        times.push(parse(fields[0])?);
        values.push(parse(fields[1])?);
    }
    if times.len() < 2 {
        return Err(Error::DataFormat {
            path: path.display().to_string(),
            message: "need at least 2 data rows".into(),
        });
    }
    let bin_width = times[1] - times[0];
    if bin_width <= 0.0 {
        return Err(Error::DataFormat {
            path: path.display().to_string(),
            message: "time column must increase".into(),
        });
    }
    let start_time = times[0] - bin_width / 2.0;
    let embedded = RunConfig::from_toml(&banner).ok();
    Ok((MeanTrace { bin_width, values, start_time, n_drops: 1 }, embedded))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_spectrum() {
        let dir = std::env::temp_dir().join(format!("atomcav-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let config = RunConfig::default();
        let samples = vec![
            SpectrumSample { detuning: -RAD_PER_MHZ, reflected_fraction: 0.7, sigma: 0.01 },
            SpectrumSample { detuning: 0.0, reflected_fraction: 0.8, sigma: 0.01 },
            SpectrumSample { detuning: RAD_PER_MHZ, reflected_fraction: 0.7, sigma: 0.01 },
        ];
        let path = dir.join("spec.csv");
        write_csv(
            &path,
            &config,
            "detuning_mhz,reflected_fraction,sigma",
            spectrum_rows(&samples),
        )
        .unwrap();
        let back = read_spectrum_csv(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in samples.iter().zip(back.iter()) {
            assert!((a.detuning - b.detuning).abs() < 1.0);
            assert!((a.reflected_fraction - b.reflected_fraction).abs() < 1e-12);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn trace_csv_recovers_embedded_config() {
        let dir = std::env::temp_dir().join(format!("atomcav-trace-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut config = RunConfig::default();
        config.transit.n_drops = 17;
        let trace = MeanTrace {
            bin_width: 1e-5,
            values: vec![2.7, 2.8, 2.6, 2.9],
            start_time: 0.0,
            n_drops: 17,
        };
        let path = dir.join("trace.csv");
        write_csv(&path, &config, "time_s,counts", mean_trace_rows(&trace)).unwrap();
        let (back, embedded) = read_trace_csv(&path).unwrap();
        assert_eq!(back.values.len(), 4);
        assert!((back.bin_width - 1e-5).abs() < 1e-18);
        assert_eq!(embedded.unwrap().transit.n_drops, 17);
        std::fs::remove_dir_all(&dir).ok();
    }
}
