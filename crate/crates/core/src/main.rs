use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use atomcav::cli::{run, run_fit_spectrum, run_fit_transit, Experiment, RunArtifacts};
use atomcav::config::RunConfig;
use atomcav::error::Result;

/// Config-driven, seeded simulations of a fiber-coupled microcavity probing
/// falling cold atoms: derived rates, reflection spectra, transit traces,
/// photon statistics, fits, and triggered photon pulses.
#[derive(Parser)]
#[command(name = "atomcav", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; defaults apply for missing sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed recorded in every output (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Derive coupling, decay, and figure-of-merit rates from the config.
    Rates,
    /// Generate a Monte Carlo reflection spectrum with synthetic noise.
    Spectrum {
        /// Mean effective atom number of the forward model.
        #[arg(long = "mean-n", alias = "mean-N")]
        mean_n: Option<f64>,
        /// Relative Gaussian noise on the synthetic data points.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        span_mhz: Option<f64>,
        #[arg(long)]
        n_realizations: Option<usize>,
    },
    /// Simulate averaged free-fall transits of the cloud through the mode.
    Drop {
        #[arg(long)]
        n_drops: Option<usize>,
        /// Trap atom number (clears any peak-n tuning unless given too).
        #[arg(long)]
        atoms: Option<f64>,
        /// Rescale the cloud so the analytic mean atom number peaks here.
        #[arg(long)]
        peak_n: Option<f64>,
        #[arg(long)]
        duration_ms: Option<f64>,
    },
    /// Fit the mean atom number to a spectrum CSV.
    FitSpectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n_realizations: Option<usize>,
    },
    /// Fit a Gaussian-cloud transit profile to an averaged trace CSV.
    FitTransit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Photon-statistics trace: sliding-window corrected normalized variance.
    Stats {
        #[arg(long)]
        window: Option<usize>,
    },
    /// Triggered photon production at the transit peak.
    Pulse {
        #[arg(long)]
        n0: Option<f64>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<RunArtifacts> {
    let mut config = load_config(cli)?;
    match &cli.command {
        Command::Rates => run(Experiment::Rates, &config, &cli.out),
        Command::Spectrum { mean_n, noise, points, span_mhz, n_realizations } => {
            if let Some(v) = mean_n {
                config.spectrum.mean_n = *v;
            }
            if let Some(v) = noise {
                config.spectrum.noise = *v;
            }
            if let Some(v) = points {
                config.spectrum.points = *v;
            }
            if let Some(v) = span_mhz {
                config.spectrum.span_mhz = *v;
            }
            if let Some(v) = n_realizations {
                config.spectrum.n_realizations = *v;
            }
            run(Experiment::Spectrum, &config, &cli.out)
        }
        Command::Drop { n_drops, atoms, peak_n, duration_ms } => {
            if let Some(v) = n_drops {
                config.transit.n_drops = *v;
            }
            if let Some(v) = atoms {
                config.cloud.atoms = *v;
                config.cloud.peak_n = *peak_n;
            }
            if let Some(v) = peak_n {
                config.cloud.peak_n = Some(*v);
            }
            if let Some(v) = duration_ms {
                config.transit.duration_ms = *v;
            }
            run(Experiment::Drop, &config, &cli.out)
        }
        Command::FitSpectrum { input, n_realizations } => {
            if let Some(v) = n_realizations {
                config.fit.n_realizations = *v;
            }
            run_fit_spectrum(&config, input, &cli.out)
        }
        Command::FitTransit { input } => run_fit_transit(&config, input, &cli.out),
        Command::Stats { window } => {
            if let Some(v) = window {
                config.stats.window_bins = *v;
            }
            run(Experiment::Stats, &config, &cli.out)
        }
        Command::Pulse { n0, repeats } => {
            if let Some(v) = n0 {
                config.pulse.n0 = *v;
            }
            if let Some(v) = repeats {
                config.pulse.repeats = *v;
            }
            run(Experiment::Pulse, &config, &cli.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();
    }
    match dispatch(&cli) {
        Ok(artifacts) => {
            for file in artifacts.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
