//! Complex failure domains: sampling, affect probabilities, and the
//! affected/surviving connection sets for one failure event.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NodeId, QuantumNetwork};
use crate::rng::sub_rng;

/// One complex failure event: a center node, a hop-unit radius and the
/// event probability Pr(f).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDomain {
    /// 1-based event index within the experiment.
    pub event_index: usize,
    pub center: NodeId,
    /// Radius in hop units, >= 0.
    pub radius: f64,
    /// Event weight Pr(f); weights sum to 1 across one experiment.
    pub event_weight: f64,
}

/// Serialized form: [{ "f", "center", "radius", "weight" }].
#[derive(Serialize, Deserialize)]
struct DomainRecord {
    f: usize,
    center: usize,
    radius: f64,
    weight: f64,
}

/// Materialized outcome of a single failure event.
#[derive(Debug, Clone)]
pub struct FailureOutcome {
    /// affected_nodes[v] = node v is affected by the failure.
    pub affected_nodes: Vec<bool>,
    /// affected_connections[id] = connection is affected (rate forced to 0).
    pub affected_connections: Vec<bool>,
    /// surviving[id] = unaffected and post-failure rate >= threshold.
    pub surviving_connections: Vec<bool>,
    /// Post-failure throughput per connection (ebits/second).
    pub post_failure_rate: Vec<f64>,
}

impl FailureOutcome {
    pub fn affected_node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.affected_nodes
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| NodeId(i))
    }
}

/// Probability that an element at `distance` from the center of a
/// `radius`-sized domain is affected: 1 - d/r inside the domain, 0 outside.
pub fn affect_probability(distance: f64, radius: f64) -> Result<f64> {
    if !(distance >= 0.0) || !(radius >= 0.0) {
        return Err(Error::Domain(format!(
            "distance {distance} and radius {radius} must be >= 0"
        )));
    }
    if radius == 0.0 {
        return Ok(if distance == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(if distance <= radius { 1.0 - distance / radius } else { 0.0 })
}

/// A network element, for distance queries.
#[derive(Debug, Clone, Copy)]
pub enum Element {
    Node(NodeId),
    Connection(usize),
}

/// Hop distance of an element from the domain center. A connection sits at
/// the minimum of its endpoints' distances. `None` = unreachable (affect
/// probability 0).
pub fn element_distance(
    net: &QuantumNetwork,
    element: Element,
    center: NodeId,
) -> Result<Option<f64>> {
    let dist = net.bfs_distances(center, None)?;
    match element {
        Element::Node(n) => {
            net.check_node(n)?;
            Ok(dist[n.index()].map(|d| d as f64))
        }
        Element::Connection(id) => {
            let c = net
                .connection(id)
                .ok_or_else(|| Error::Domain(format!("connection {id} not in network")))?;
            let da = dist[c.a.index()];
            let db = dist[c.b.index()];
            Ok(match (da, db) {
                (Some(x), Some(y)) => Some(x.min(y) as f64),
                (Some(x), None) | (None, Some(x)) => Some(x as f64),
                (None, None) => None,
            })
        }
    }
}

/// Domain radius from the level sequence of an abstracted shortest path:
/// sum of 2^(l-1) over the path's connections (doubling architecture).
pub fn domain_radius_from_path(levels: &[u32]) -> Result<u64> {
    if levels.is_empty() {
        return Err(Error::Domain("empty level list".into()));
    }
    let mut total = 0u64;
    for &l in levels {
        total += crate::network::hop_distance_for_level(l as i64)?;
    }
    Ok(total)
}

/// Sample `m` failure domains: centers uniform over V, radii uniform
/// continuous in (0, radius_max], weights uniform in (0, 1] normalized to
/// sum 1. Deterministic given the seed.
pub fn sample_domains(
    net: &QuantumNetwork,
    m: usize,
    radius_max: f64,
    seed: u64,
) -> Result<Vec<FailureDomain>> {
    if m < 1 {
        return Err(Error::Config("m must be >= 1".into()));
    }
    if !(radius_max > 0.0) {
        return Err(Error::Config(format!("radius_max {radius_max} must be > 0")));
    }
    if net.node_count() == 0 {
        return Err(Error::Config("network has no nodes".into()));
    }
    let mut rng = sub_rng(seed, "domain-sample", 0);
    let mut domains = Vec::with_capacity(m);
    let mut weight_sum = 0.0;
    for f in 1..=m {
        let center = NodeId(rng.gen_range(0..net.node_count()));
        // uniform over (0, radius_max]: flip the half-open [0, 1) sample
        let radius = (1.0 - rng.gen::<f64>()) * radius_max;
        let weight = 1.0 - rng.gen::<f64>();
        weight_sum += weight;
        domains.push(FailureDomain { event_index: f, center, radius, event_weight: weight });
    }
    for d in &mut domains {
        d.event_weight /= weight_sum;
    }
    Ok(domains)
}

/// Load domains from a JSON list [{ "f", "center", "radius", "weight" }].
pub fn load_domains(net: &QuantumNetwork, path: &std::path::Path) -> Result<Vec<FailureDomain>> {
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let records: Vec<DomainRecord> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: origin.clone(),
        message: e.to_string(),
    })?;
    let mut domains = Vec::with_capacity(records.len());
    let mut weight_sum = 0.0;
    for r in &records {
        if r.center >= net.node_count() {
            return Err(Error::Parse {
                file: origin,
                message: format!("domain {}: center {} out of range", r.f, r.center),
            });
        }
        if !(r.radius >= 0.0) || !(0.0..=1.0).contains(&r.weight) {
            return Err(Error::Parse {
                file: origin,
                message: format!("domain {}: radius/weight out of range", r.f),
            });
        }
        weight_sum += r.weight;
        domains.push(FailureDomain {
            event_index: r.f,
            center: NodeId(r.center),
            radius: r.radius,
            event_weight: r.weight,
        });
    }
    if domains.is_empty() {
        return Err(Error::Parse { file: origin, message: "no domains in file".into() });
    }
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parse {
            file: origin,
            message: format!("domain weights sum to {weight_sum}, expected 1"),
        });
    }
    Ok(domains)
}

pub fn save_domains(domains: &[FailureDomain], path: &std::path::Path) -> Result<()> {
    let records: Vec<DomainRecord> = domains
        .iter()
        .map(|d| DomainRecord {
            f: d.event_index,
            center: d.center.index(),
            radius: d.radius,
            weight: d.event_weight,
        })
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&records).unwrap())?;
    Ok(())
}

/// Materialize one failure event. Each node and connection is independently
/// marked affected with probability `affect_probability(distance, radius)`;
/// connections incident to an affected node are affected; affected
/// connections get rate 0 and unaffected connections keep their capacity.
/// Surviving connections are the unaffected ones whose rate meets the
/// threshold (condition c). Deterministic given the seed.
///
/// Uniform draws are consumed for every element in a fixed order, so runs
/// with a shared seed are monotone-coupled across radii.
pub fn apply_failure(
    net: &QuantumNetwork,
    domain: &FailureDomain,
    seed: u64,
) -> Result<FailureOutcome> {
    net.check_node(domain.center)
        .map_err(|_| Error::Domain(format!("domain center {} not in network", domain.center)))?;
    if !(domain.radius >= 0.0) {
        return Err(Error::Domain(format!("radius {} must be >= 0", domain.radius)));
    }
    let dist = net.bfs_distances(domain.center, None)?;
    let mut rng = sub_rng(seed, "failure-apply", domain.event_index as u64);

    let mut affected_nodes = vec![false; net.node_count()];
    for (v, flag) in affected_nodes.iter_mut().enumerate() {
        let u: f64 = rng.gen();
        if let Some(d) = dist[v] {
            *flag = u < affect_probability(d as f64, domain.radius)?;
        }
    }

    let n_conn = net.connections().len();
    let mut affected_connections = vec![false; n_conn];
    for (id, flag) in affected_connections.iter_mut().enumerate() {
        let u: f64 = rng.gen();
        let c = &net.connections()[id];
        if affected_nodes[c.a.index()] || affected_nodes[c.b.index()] {
            *flag = true;
            continue;
        }
        let d = match (dist[c.a.index()], dist[c.b.index()]) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (Some(x), None) | (None, Some(x)) => Some(x),
            (None, None) => None,
        };
        if let Some(d) = d {
            *flag = u < affect_probability(d as f64, domain.radius)?;
        }
    }

    let mut post_failure_rate = vec![0.0; n_conn];
    let mut surviving = vec![false; n_conn];
    for (id, c) in net.connections().iter().enumerate() {
        if !affected_connections[id] {
            post_failure_rate[id] = c.capacity;
            surviving[id] = post_failure_rate[id] >= c.threshold;
        }
    }

    Ok(FailureOutcome {
        affected_nodes,
        affected_connections,
        surviving_connections: surviving,
        post_failure_rate,
    })
}
