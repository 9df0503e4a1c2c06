//! End-to-end experiment driver: load or generate networks and demands,
//! run failure sweeps, and emit metric/estimation/entropy reports. Every
//! draw derives from one master seed, so identical configs produce
//! byte-identical reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::{select_hyperparameters, HyperGrid};
use crate::failure::{load_domains, sample_domains, FailureDomain};
use crate::liegroup::{
    entropy_rate, entropy_rate_derivative, group_function, trapezoid, GroupSampleSet,
};
use crate::metrics::{
    bin_index, cp_ear, dd_ear, occurrence, pr_ear, RadiusBin, RatioDistribution,
};
use crate::network::{generate_random_network, GeneratorParams, NodeId, QuantumNetwork};
use crate::routing::{load_demands, run_trials, Demand, TrialRecord};
use crate::rng::sub_rng;

/// Where the network comes from.
#[derive(Debug, Clone)]
pub enum NetworkSource {
    File(PathBuf),
    Generate(GeneratorParams),
}

/// Where the demands come from.
#[derive(Debug, Clone)]
pub enum DemandSource {
    File(PathBuf),
    /// Sample this many random demands.
    Generate(usize),
}

/// Where the failure domains come from.
#[derive(Debug, Clone)]
pub enum DomainSource {
    File(PathBuf),
    Sample,
}

/// Noise covariance specification for the estimation report.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    Identity,
    Diagonal(f64),
    File(PathBuf),
}

impl CovarianceSpec {
    /// Parse "identity", "diagonal:<var>" or "file:<path>".
    pub fn parse(text: &str) -> Result<Self> {
        if text == "identity" {
            return Ok(Self::Identity);
        }
        if let Some(var) = text.strip_prefix("diagonal:") {
            let v: f64 = var
                .parse()
                .map_err(|_| Error::Config(format!("bad diagonal variance {var:?}")))?;
            if !(v > 0.0) {
                return Err(Error::Config(format!("diagonal variance {v} must be > 0")));
            }
            return Ok(Self::Diagonal(v));
        }
        if let Some(path) = text.strip_prefix("file:") {
            return Ok(Self::File(PathBuf::from(path)));
        }
        Err(Error::Config(format!(
            "covariance spec {text:?} is not identity, diagonal:<var> or file:<path>"
        )))
    }

    pub fn materialize(&self, m: usize) -> Result<DMatrix<f64>> {
        match self {
            Self::Identity => Ok(DMatrix::identity(m, m)),
            Self::Diagonal(v) => Ok(DMatrix::identity(m, m) * *v),
            Self::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let rows: Vec<Vec<f64>> =
                    serde_json::from_str(&text).map_err(|e| Error::Parse {
                        file: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::Parse {
                        file: path.display().to_string(),
                        message: format!("covariance must be {m}x{m}"),
                    });
                }
                Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
            }
        }
    }
}

/// Options for the optional estimation report.
#[derive(Debug, Clone)]
pub struct NsrOptions {
    pub covariance: CovarianceSpec,
    pub grid: HyperGrid,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for NsrOptions {
    fn default() -> Self {
        Self {
            covariance: CovarianceSpec::Identity,
            grid: HyperGrid {
                offsets: vec![0.0],
                gains: vec![1.0],
                kernel_scales: vec![0.5, 2.0, 8.0],
                smoothness: vec![1.0, 10.0, 100.0],
            },
            max_iters: 2000,
            tol: 1e-10,
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    pub demands: DemandSource,
    pub domains: DomainSource,
    /// Number of failure events m.
    pub event_count: usize,
    pub radius_max: f64,
    /// Step-4 serving fraction kappa.
    pub kappa: f64,
    pub bin_width: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Emit nsr.csv when set.
    pub nsr: Option<NsrOptions>,
    /// Emit entropy.csv when set; the pair is the (radius, occurrence)
    /// histogram bin widths. Defaults derive from radius_max and bin_width.
    pub entropy_bins: Option<(f64, f64)>,
    pub emit_entropy: bool,
    /// Radius bin count for the dd_ear sweep.
    pub radius_bins: usize,
}

impl ExperimentConfig {
    pub fn new(network: NetworkSource, out_dir: PathBuf) -> Self {
        Self {
            network,
            demands: DemandSource::Generate(10),
            domains: DomainSource::Sample,
            event_count: 100,
            radius_max: 8.0,
            kappa: 1.0,
            bin_width: 0.05,
            seed: 1,
            out_dir,
            nsr: None,
            entropy_bins: None,
            emit_entropy: false,
            radius_bins: 20,
        }
    }
}

/// Paths of the reports one run produced.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub trials: PathBuf,
    pub metrics: PathBuf,
    pub dd_ear: PathBuf,
    pub occurrence: PathBuf,
    pub nsr: Option<PathBuf>,
    pub entropy: Option<PathBuf>,
    pub records: Vec<TrialRecord>,
}

/// List every invariant violation in the config and its referenced files
/// without running. An empty list means the config is runnable.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut diagnostics = Vec::new();
    if config.event_count < 1 {
        diagnostics.push(format!("m = {} must be >= 1", config.event_count));
    }
    if !(config.radius_max > 0.0) {
        diagnostics.push(format!("radius_max = {} must be > 0", config.radius_max));
    }
    if !(config.kappa > 0.0 && config.kappa <= 1.0) {
        diagnostics.push(format!("kappa = {} must lie in (0, 1]", config.kappa));
    }
    if !(config.bin_width > 0.0 && config.bin_width <= 1.0) {
        diagnostics.push(format!("bin_width = {} must lie in (0, 1]", config.bin_width));
    }
    if config.radius_bins < 1 {
        diagnostics.push("radius_bins must be >= 1".to_string());
    }
    let net = match &config.network {
        NetworkSource::File(path) => match QuantumNetwork::load(path) {
            Ok(net) => Some(net),
            Err(e) => {
                diagnostics.push(format!("network: {e}"));
                None
            }
        },
        NetworkSource::Generate(params) => {
            match generate_random_network(params, config.seed) {
                Ok(net) => Some(net),
                Err(e) => {
                    diagnostics.push(format!("network generator: {e}"));
                    None
                }
            }
        }
    };
    if let (Some(net), DemandSource::File(path)) = (&net, &config.demands) {
        if let Err(e) = load_demands(net, path) {
            diagnostics.push(format!("demands: {e}"));
        }
    }
    if let (Some(net), DomainSource::File(path)) = (&net, &config.domains) {
        if let Err(e) = load_domains(net, path) {
            diagnostics.push(format!("domains: {e}"));
        }
    }
    diagnostics
}

/// Sample random demands between distinct reachable node pairs. Required
/// rates are uniform in (0, 2 * mean capacity].
pub fn sample_demands(net: &QuantumNetwork, count: usize, seed: u64) -> Result<Vec<Demand>> {
    if net.node_count() < 2 {
        return Err(Error::Config("need at least 2 nodes to sample demands".into()));
    }
    let mean_capacity = if net.connections().is_empty() {
        1.0
    } else {
        net.connections().iter().map(|c| c.capacity).sum::<f64>()
            / net.connections().len() as f64
    };
    let mut rng = sub_rng(seed, "demand-sample", 0);
    let mut demands = Vec::with_capacity(count);
    for id in 0..count {
        let source = NodeId(rng.gen_range(0..net.node_count()));
        let mut target = NodeId(rng.gen_range(0..net.node_count()));
        while target == source {
            target = NodeId(rng.gen_range(0..net.node_count()));
        }
        let required = (1.0 - rng.gen::<f64>()) * 2.0 * mean_capacity;
        demands.push(Demand { id, source, target, user: id + 1, required });
    }
    Ok(demands)
}

/// A float with 12 significant digits, stable across runs.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_report(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("f,weight,radius,ratio,served_total,baseline\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.event_index,
            fmt_float(r.event_weight),
            fmt_float(r.radius),
            fmt_float(r.ratio),
            fmt_float(r.served_total),
            fmt_float(r.baseline),
        );
    }
    out
}

/// Load a trials.csv report back into records.
pub fn load_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_trials(&text, &path.display().to_string())
}

pub fn parse_trials(text: &str, origin: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "f,weight,radius,ratio,served_total,baseline" {
        return Err(Error::Parse {
            file: origin.to_string(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                file: origin.to_string(),
                message: format!("line {}: expected 6 fields", lineno + 2),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                file: origin.to_string(),
                message: format!("line {}: bad float {s:?}", lineno + 2),
            })
        };
        records.push(TrialRecord {
            event_index: fields[0].parse().map_err(|_| Error::Parse {
                file: origin.to_string(),
                message: format!("line {}: bad index {:?}", lineno + 2, fields[0]),
            })?,
            event_weight: parse(fields[1])?,
            radius: parse(fields[2])?,
            ratio: parse(fields[3])?,
            served_total: parse(fields[4])?,
            baseline: parse(fields[5])?,
            per_demand_served: Vec::new(),
        });
    }
    Ok(records)
}

/// CP-EAR and PR-EAR sweep report over the x grid {0, bin_width, ..., 1}.
pub fn metrics_csv(records: &[TrialRecord], bin_width: f64) -> Result<String> {
    let dist = RatioDistribution::from_trials(records, bin_width)?;
    let steps = dist.bin_count();
    let mut out = String::from("metric,param,value\n");
    for i in 0..=steps {
        let x = (i as f64 * bin_width).min(1.0);
        let _ = writeln!(out, "cp_ear,{},{}", fmt_float(x), fmt_float(cp_ear(&dist, x)));
    }
    for i in 0..=steps {
        let q = (i as f64 * bin_width).min(1.0);
        let _ = writeln!(out, "pr_ear,{},{}", fmt_float(q), fmt_float(pr_ear(&dist, q)?));
    }
    Ok(out)
}

/// DD-EAR sweep over radius bins, keyed by normalized hop distance.
pub fn dd_ear_csv(
    records: &[TrialRecord],
    bin_width: f64,
    radius_max: f64,
    radius_bins: usize,
) -> Result<String> {
    let dist = RatioDistribution::from_trials(records, bin_width)?;
    let mut out = String::from("radius_lo,radius_hi,normalized_distance,dd_ear\n");
    let step = radius_max / radius_bins as f64;
    for b in 0..radius_bins {
        let bin = RadiusBin { lo: b as f64 * step, hi: (b + 1) as f64 * step };
        // make the top edge inclusive so radius == radius_max is counted
        let bin = if b + 1 == radius_bins {
            RadiusBin { lo: bin.lo, hi: bin.hi + step * 1e-9 }
        } else {
            bin
        };
        let Ok(value) = dd_ear(&dist, bin) else {
            continue;
        };
        let mid = (b as f64 + 0.5) * step;
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_float(bin.lo),
            fmt_float((b + 1) as f64 * step),
            fmt_float(mid / radius_max),
            fmt_float(value),
        );
    }
    Ok(out)
}

pub fn occurrence_csv(records: &[TrialRecord], bin_width: f64) -> Result<String> {
    let table = occurrence(records, bin_width)?;
    let mut out = String::from("bin_lo,bin_hi,count,q\n");
    for (b, (&count, &q)) in table.counts.iter().zip(&table.q).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_float(b as f64 * bin_width),
            fmt_float(((b + 1) as f64 * bin_width).min(1.0)),
            count,
            fmt_float(q),
        );
    }
    Ok(out)
}

/// NSR estimation report from the empirical ratio vector.
pub fn nsr_csv(records: &[TrialRecord], options: &NsrOptions) -> Result<String> {
    let m = records.len();
    let observations = DVector::from_fn(m, |i, _| records[i].ratio);
    let covariance = options.covariance.materialize(m)?;
    let selection = select_hyperparameters(
        &observations,
        &covariance,
        &options.grid,
        options.max_iters,
        options.tol,
    )?;
    let fit = crate::estimation::forward_model(&selection.estimate.q_estimate, selection.kernel_scale)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# alpha={} gamma={} delta={} omega={} score={}",
        fmt_float(selection.offset),
        fmt_float(selection.gain),
        fmt_float(selection.kernel_scale),
        fmt_float(selection.smoothness),
        fmt_float(selection.score),
    );
    out.push_str("f,observation,q_estimate,fit\n");
    for i in 0..m {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            records[i].event_index,
            fmt_float(observations[i]),
            fmt_float(selection.estimate.q_estimate[i]),
            fmt_float(fit[i]),
        );
    }
    Ok(out)
}

/// Entropy report: per-event entropy of the growing empirical distribution
/// of (radius, occurrence) group elements, its finite-difference derivative,
/// and the trapezoidal total.
pub fn entropy_csv(
    records: &[TrialRecord],
    bin_width: f64,
    bins: (f64, f64),
) -> Result<String> {
    if records.len() < 2 {
        return Err(Error::LieGroup("entropy report needs at least 2 events".into()));
    }
    let table = occurrence(records, bin_width)?;
    let elements: Vec<(crate::liegroup::Se2Element, f64)> = records
        .iter()
        .map(|r| {
            let q = table.q[bin_index(r.ratio, bin_width)];
            group_function(r.radius, q).map(|g| (g, r.event_weight))
        })
        .collect::<Result<_>>()?;
    // per-event set f = events 1..=f, weights renormalized
    let mut entropies = Vec::new();
    for f in 2..=records.len() {
        let prefix = &elements[..f];
        let mass: f64 = prefix.iter().map(|(_, w)| w).sum();
        let set = GroupSampleSet::new(
            prefix.iter().map(|(g, w)| (g.clone(), w / mass)).collect(),
        )?;
        entropies.push(entropy_rate(&set, bins)?.value);
    }
    let mut out = String::from("f,entropy,derivative\n");
    for (i, &h) in entropies.iter().enumerate() {
        let d = entropy_rate_derivative(&entropies, i + 1)?;
        let _ = writeln!(out, "{},{},{}", i + 2, fmt_float(h), fmt_float(d));
    }
    let _ = writeln!(out, "total,{},", fmt_float(trapezoid(&entropies)));
    Ok(out)
}

/// Run the whole experiment and write every requested report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    let diagnostics = validate(config);
    if !diagnostics.is_empty() {
        return Err(Error::Config(diagnostics.join("; ")));
    }
    let net = match &config.network {
        NetworkSource::File(path) => QuantumNetwork::load(path)?,
        NetworkSource::Generate(params) => generate_random_network(params, config.seed)?,
    };
    let demands = match &config.demands {
        DemandSource::File(path) => load_demands(&net, path)?,
        DemandSource::Generate(count) => sample_demands(&net, *count, config.seed)?,
    };
    let domains: Vec<FailureDomain> = match &config.domains {
        DomainSource::File(path) => load_domains(&net, path)?,
        DomainSource::Sample => {
            sample_domains(&net, config.event_count, config.radius_max, config.seed)?
        }
    };
    let records = run_trials(&net, &demands, &domains, config.kappa, config.seed)?;

    std::fs::create_dir_all(&config.out_dir)?;
    let path = |name: &str| config.out_dir.join(name);

    let trials_path = path("trials.csv");
    write_report(&trials_path, &trials_csv(&records))?;
    let metrics_path = path("metrics.csv");
    write_report(&metrics_path, &metrics_csv(&records, config.bin_width)?)?;
    let dd_path = path("dd_ear.csv");
    write_report(
        &dd_path,
        &dd_ear_csv(&records, config.bin_width, config.radius_max, config.radius_bins)?,
    )?;
    let occ_path = path("occurrence.csv");
    write_report(&occ_path, &occurrence_csv(&records, config.bin_width)?)?;

    let nsr_path = match &config.nsr {
        Some(options) => {
            let p = path("nsr.csv");
            write_report(&p, &nsr_csv(&records, options)?)?;
            Some(p)
        }
        None => None,
    };
    let entropy_path = if config.emit_entropy {
        let bins = config
            .entropy_bins
            .unwrap_or((config.radius_max / 20.0, config.bin_width));
        let p = path("entropy.csv");
        write_report(&p, &entropy_csv(&records, config.bin_width, bins)?)?;
        Some(p)
    } else {
        None
    };

    Ok(ReportBundle {
        trials: trials_path,
        metrics: metrics_path,
        dd_ear: dd_path,
        occurrence: occ_path,
        nsr: nsr_path,
        entropy: entropy_path,
        records,
    })
}
