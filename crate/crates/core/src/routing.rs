//! Demand serving over the post-failure network (the estimation algorithm
//! for the occurrence of the accessibility ratio).
//!
//! Demands are served greedily: a first shortest path per eligible demand
//! under the post-failure mask, then repeated next-shortest-path passes over
//! connections with positive remaining throughput until every residual is
//! zero or no path exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::failure::{apply_failure, FailureDomain, FailureOutcome};
use crate::network::{EntangledConnection, NodeId, QuantumNetwork};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A user demand: source/target nodes and the required entanglement rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: usize,
    pub source: NodeId,
    pub target: NodeId,
    /// User index k in 1..K.
    pub user: usize,
    /// Required ebits/second.
    pub required: f64,
}

impl Demand {
    fn validate(&self, net: &QuantumNetwork) -> Result<()> {
        net.check_node(self.source)?;
        net.check_node(self.target)?;
        if self.source == self.target {
            return Err(Error::Config(format!("demand {}: source == target", self.id)));
        }
        if !(self.required >= 0.0) {
            return Err(Error::Config(format!("demand {}: required must be >= 0", self.id)));
        }
        Ok(())
    }
}

/// Load demands from a JSON list [{ "id", "source", "target", "user", "required" }].
pub fn load_demands(net: &QuantumNetwork, path: &std::path::Path) -> Result<Vec<Demand>> {
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let demands: Vec<Demand> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: origin.clone(),
        message: e.to_string(),
    })?;
    for d in &demands {
        d.validate(net).map_err(|e| Error::Parse { file: origin.clone(), message: e.to_string() })?;
    }
    Ok(demands)
}

/// Outcome of one failure event after demand serving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub event_index: usize,
    pub event_weight: f64,
    pub radius: f64,
    /// Empirical accessibility ratio: served_total / baseline.
    pub ratio: f64,
    pub served_total: f64,
    /// Total no-failure throughput over all connections.
    pub baseline: f64,
    /// Served amount per demand, by demand order.
    pub per_demand_served: Vec<f64>,
}

/// Total accessible entanglement over a connection set at no failure:
/// the sum of capacities.
pub fn total_accessible<'a, I>(connections: I) -> f64
where
    I: IntoIterator<Item = &'a EntangledConnection>,
{
    connections.into_iter().map(|c| c.capacity).sum()
}

/// Demands whose source and target are both unaffected by the failure.
pub fn eligible_demands<'a>(demands: &'a [Demand], outcome: &FailureOutcome) -> Vec<&'a Demand> {
    demands
        .iter()
        .filter(|d| {
            !outcome.affected_nodes[d.source.index()] && !outcome.affected_nodes[d.target.index()]
        })
        .collect()
}

// Serving below this rate is treated as exhausted; guards the kappa < 1
// geometric tail against non-termination.
const MIN_SERVE: f64 = 1e-12;
const MAX_PASSES_PER_DEMAND: usize = 10_000;

/// Serve user demands over the post-failure network and report the
/// accessibility ratio for this trial.
///
/// `x_fraction` (kappa) scales how much of each alternate path's bottleneck
/// is granted per pass; kappa = 1 serves the full bottleneck.
pub fn serve_demands(
    net: &QuantumNetwork,
    outcome: &FailureOutcome,
    demands: &[Demand],
    x_fraction: f64,
) -> Result<TrialRecord> {
    serve_demands_for_event(net, outcome, demands, x_fraction, 0, 0.0, f64::NAN)
}

fn serve_demands_for_event(
    net: &QuantumNetwork,
    outcome: &FailureOutcome,
    demands: &[Demand],
    x_fraction: f64,
    event_index: usize,
    event_weight: f64,
    radius: f64,
) -> Result<TrialRecord> {
    if !(x_fraction > 0.0 && x_fraction <= 1.0) {
        return Err(Error::Config(format!("kappa {x_fraction} must lie in (0, 1]")));
    }
    for d in demands {
        d.validate(net)?;
    }
    let n_conn = net.connections().len();
    if outcome.surviving_connections.len() != n_conn {
        return Err(Error::Config("outcome does not match network".into()));
    }

    // Step 1: usable mask from condition c over the outcome.
    let mask = outcome.surviving_connections.clone();

    // Step 2: remaining throughput starts at capacity for surviving
    // connections; residuals start at the full requirement.
    let mut remaining: Vec<f64> = net
        .connections()
        .iter()
        .enumerate()
        .map(|(id, c)| if mask[id] { c.capacity } else { 0.0 })
        .collect();

    let mut order: Vec<&Demand> = eligible_demands(demands, outcome);
    order.sort_by_key(|d| d.id);

    let mut served_total = 0.0;
    let mut per_demand_served = vec![0.0; demands.len()];
    let index_of = |id: usize| demands.iter().position(|d| d.id == id).unwrap();
    let mut residual: Vec<f64> = order.iter().map(|d| d.required).collect();

    // Step 3: first shortest path per eligible demand.
    for (i, demand) in order.iter().enumerate() {
        if residual[i] <= 0.0 {
            continue;
        }
        let Some(path) = net.shortest_path(&mask, demand.source, demand.target)? else {
            continue;
        };
        if path.is_empty() {
            continue;
        }
        let bottleneck = path
            .iter()
            .map(|&cid| remaining[cid])
            .fold(f64::INFINITY, f64::min);
        // The decrement uses the pre-zero residual.
        let grant = residual[i].min(bottleneck);
        if grant > 0.0 {
            served_total += grant;
            per_demand_served[index_of(demand.id)] += grant;
            for &cid in &path {
                remaining[cid] -= grant;
            }
            residual[i] -= grant;
        }
    }

    // Steps 4-5: for demands with residual > 0, next shortest paths over
    // positive-remaining connections, serving kappa * bottleneck per pass.
    for (i, demand) in order.iter().enumerate() {
        let mut passes = 0;
        while residual[i] > 0.0 && passes < MAX_PASSES_PER_DEMAND {
            passes += 1;
            let open: Vec<bool> = (0..n_conn)
                .map(|cid| mask[cid] && remaining[cid] > 0.0)
                .collect();
            let Some(path) = net.shortest_path(&open, demand.source, demand.target)? else {
                break;
            };
            if path.is_empty() {
                break;
            }
            let bottleneck = path
                .iter()
                .map(|&cid| remaining[cid])
                .fold(f64::INFINITY, f64::min);
            let grant = (x_fraction * bottleneck).min(residual[i]);
            if grant < MIN_SERVE {
                break;
            }
            served_total += grant;
            per_demand_served[index_of(demand.id)] += grant;
            for &cid in &path {
                remaining[cid] = (remaining[cid] - grant).max(0.0);
            }
            residual[i] -= grant;
        }
    }

    let baseline = total_accessible(net.connections());
    let ratio = if baseline > 0.0 { served_total / baseline } else { 0.0 };
    Ok(TrialRecord {
        event_index,
        event_weight,
        radius,
        ratio,
        served_total,
        baseline,
        per_demand_served,
    })
}

/// One failure application plus demand serving per domain. Per-trial seeds
/// derive from `(master seed, event index)`, so trials are independent of
/// scheduling; records are ordered by event index.
pub fn run_trials(
    net: &QuantumNetwork,
    demands: &[Demand],
    domains: &[FailureDomain],
    x_fraction: f64,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if domains.is_empty() {
        return Err(Error::Config("at least one failure domain required".into()));
    }
    let run_one = |domain: &FailureDomain| -> Result<TrialRecord> {
        let outcome = apply_failure(net, domain, seed)?;
        serve_demands_for_event(
            net,
            &outcome,
            demands,
            x_fraction,
            domain.event_index,
            domain.event_weight,
            domain.radius,
        )
    };
    #[cfg(feature = "parallel")]
    let records: Result<Vec<TrialRecord>> = domains.par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let records: Result<Vec<TrialRecord>> = domains.iter().map(run_one).collect();
    records
}

/// Sequential reference path for `run_trials`; always available so the two
/// can be benchmarked against each other in one build.
pub fn run_trials_sequential(
    net: &QuantumNetwork,
    demands: &[Demand],
    domains: &[FailureDomain],
    x_fraction: f64,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if domains.is_empty() {
        return Err(Error::Config("at least one failure domain required".into()));
    }
    domains
        .iter()
        .map(|domain| {
            let outcome = apply_failure(net, domain, seed)?;
            serve_demands_for_event(
                net,
                &outcome,
                demands,
                x_fraction,
                domain.event_index,
                domain.event_weight,
                domain.radius,
            )
        })
        .collect()
}
