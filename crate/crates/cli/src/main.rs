//! Command-line driver: generate networks, validate configs, run failure
//! sweeps, and derive metric/estimation/entropy reports from trial records.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qnet_ear::error::Result;
use qnet_ear::experiment::{
    dd_ear_csv, entropy_csv, load_trials, metrics_csv, nsr_csv, occurrence_csv, run_experiment,
    sample_demands, CovarianceSpec, DemandSource, DomainSource, ExperimentConfig, NetworkSource,
    NsrOptions,
};
use qnet_ear::network::{generate_random_network, GeneratorParams};

#[derive(Parser)]
#[command(name = "qnet-ear", version, about = "Entanglement accessibility under failure domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Parameters shared by every sweep-shaped subcommand.
#[derive(Args)]
struct SweepArgs {
    /// Network description (JSON). Omit to generate one from --nodes.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Node count for the generated network when --network is omitted.
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    /// Edge probability for the generated network.
    #[arg(long, default_value_t = 0.1)]
    edge_prob: f64,
    /// Demand list (JSON). Omit to sample --demand-count random demands.
    #[arg(long)]
    demands: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    demand_count: usize,
    /// Failure domain list (JSON). Omit to sample m random domains.
    #[arg(long)]
    domains: Option<PathBuf>,
    /// Number of failure events.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Largest domain radius to sample, in hops.
    #[arg(long, default_value_t = 8.0)]
    radius_max: f64,
    /// Fraction of the bottleneck served on alternate-path passes.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Ratio histogram bin width; must tile [0, 1].
    #[arg(long, default_value_t = 0.05)]
    bin_width: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl SweepArgs {
    fn config(&self) -> ExperimentConfig {
        let network = match &self.network {
            Some(path) => NetworkSource::File(path.clone()),
            None => NetworkSource::Generate(GeneratorParams {
                node_count: self.nodes,
                edge_probability: self.edge_prob,
                ..Default::default()
            }),
        };
        let mut config = ExperimentConfig::new(network, self.out.clone());
        config.demands = match &self.demands {
            Some(path) => DemandSource::File(path.clone()),
            None => DemandSource::Generate(self.demand_count),
        };
        config.domains = match &self.domains {
            Some(path) => DomainSource::File(path.clone()),
            None => DomainSource::Sample,
        };
        config.event_count = self.m;
        config.radius_max = self.radius_max;
        config.kappa = self.kappa;
        config.bin_width = self.bin_width;
        config.seed = self.seed;
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random network (and optionally demands) as JSON.
    Generate {
        #[arg(long, default_value_t = 50)]
        nodes: usize,
        #[arg(long, default_value_t = 0.1)]
        edge_prob: f64,
        /// Also sample this many demands into demands.json.
        #[arg(long)]
        demand_count: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory for network.json (and demands.json).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a config and its input files; print one diagnostic per problem.
    Validate(SweepArgs),
    /// Run the failure sweep and write every report.
    Simulate {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Also fit the NSR estimate; value is the noise covariance spec
        /// ("identity", "diagonal:<var>", or "file:<path>").
        #[arg(long)]
        nsr: Option<String>,
        /// Also write the entropy report.
        #[arg(long)]
        entropy: bool,
    },
    /// Recompute metric reports from an existing trials.csv.
    Metrics {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        bin_width: f64,
        #[arg(long, default_value_t = 8.0)]
        radius_max: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit the NSR estimate to the ratio column of an existing trials.csv.
    Estimate {
        #[arg(long)]
        trials: PathBuf,
        /// "identity", "diagonal:<var>", or "file:<path>" (JSON matrix).
        #[arg(long, default_value = "identity")]
        covariance: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Entropy report from an existing trials.csv.
    Entropy {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        bin_width: f64,
        #[arg(long, default_value_t = 8.0)]
        radius_max: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    if let Ok(n) = std::env::var("QNET_EAR_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {}

fn write_report(path: &PathBuf, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { nodes, edge_prob, demand_count, seed, out } => {
            let params = GeneratorParams {
                node_count: nodes,
                edge_probability: edge_prob,
                ..Default::default()
            };
            let net = generate_random_network(&params, seed)?;
            std::fs::create_dir_all(&out)?;
            write_report(&out.join("network.json"), &net.to_json())?;
            if let Some(count) = demand_count {
                let demands = sample_demands(&net, count, seed)?;
                let text = serde_json_string(&demands)?;
                write_report(&out.join("demands.json"), &text)?;
            }
            Ok(true)
        }
        Command::Validate(sweep) => {
            let diagnostics = qnet_ear::experiment::validate(&sweep.config());
            for d in &diagnostics {
                eprintln!("{d}");
            }
            if diagnostics.is_empty() {
                println!("ok");
            }
            Ok(diagnostics.is_empty())
        }
        Command::Simulate { sweep, nsr, entropy } => {
            let mut config = sweep.config();
            if let Some(spec) = &nsr {
                config.nsr = Some(NsrOptions {
                    covariance: CovarianceSpec::parse(spec)?,
                    ..Default::default()
                });
            }
            config.emit_entropy = entropy;
            let bundle = run_experiment(&config)?;
            for path in [Some(&bundle.trials), Some(&bundle.metrics), Some(&bundle.dd_ear),
                         Some(&bundle.occurrence), bundle.nsr.as_ref(), bundle.entropy.as_ref()]
                .into_iter()
                .flatten()
            {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Metrics { trials, bin_width, radius_max, out } => {
            let records = load_trials(&trials)?;
            write_report(&out.join("metrics.csv"), &metrics_csv(&records, bin_width)?)?;
            write_report(
                &out.join("dd_ear.csv"),
                &dd_ear_csv(&records, bin_width, radius_max, 20)?,
            )?;
            write_report(&out.join("occurrence.csv"), &occurrence_csv(&records, bin_width)?)?;
            Ok(true)
        }
        Command::Estimate { trials, covariance, out } => {
            let records = load_trials(&trials)?;
            let options = NsrOptions {
                covariance: CovarianceSpec::parse(&covariance)?,
                ..Default::default()
            };
            write_report(&out.join("nsr.csv"), &nsr_csv(&records, &options)?)?;
            Ok(true)
        }
        Command::Entropy { trials, bin_width, radius_max, out } => {
            let records = load_trials(&trials)?;
            let bins = (radius_max / 20.0, bin_width);
            write_report(&out.join("entropy.csv"), &entropy_csv(&records, bin_width, bins)?)?;
            Ok(true)
        }
    }
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Result<String> {
    // qnet-ear re-exports nothing serde-side; go through the network JSON
    // conventions: pretty-printed, trailing newline
    Ok(format!("{}\n", serde_json::to_string_pretty(value).map_err(
        |e| qnet_ear::Error::Config(e.to_string()),
    )?))
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
