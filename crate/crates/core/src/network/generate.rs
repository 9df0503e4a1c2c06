//! Erdos-Renyi random network generation with uniform attribute sampling.

use rand::Rng;

use super::{EntangledConnection, NodeId, QuantumNetwork};
use crate::error::{Error, Result};
use crate::rng::sub_rng;

/// Parameters for [`generate_random_network`].
#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub node_count: usize,
    /// Probability that any node pair shares a connection, in (0, 1].
    pub edge_probability: f64,
    /// Capacity sampled uniformly in this range (ebits/second).
    pub capacity_range: (f64, f64),
    /// Threshold = threshold_fraction * capacity, in [0, 1].
    pub threshold_fraction: f64,
    /// Level sampled uniformly over this inclusive integer range.
    pub level_range: (u32, u32),
}

impl GeneratorParams {
    fn validate(&self) -> Result<()> {
        if self.node_count < 2 {
            return Err(Error::Config(format!(
                "node_count {} must be >= 2",
                self.node_count
            )));
        }
        if !(self.edge_probability > 0.0 && self.edge_probability <= 1.0) {
            return Err(Error::Config(format!(
                "edge_probability {} must lie in (0, 1]",
                self.edge_probability
            )));
        }
        if !(self.capacity_range.0 >= 0.0 && self.capacity_range.1 >= self.capacity_range.0) {
            return Err(Error::Config(format!(
                "capacity_range ({}, {}) must be ordered and non-negative",
                self.capacity_range.0, self.capacity_range.1
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold_fraction) {
            return Err(Error::Config(format!(
                "threshold_fraction {} must lie in [0, 1]",
                self.threshold_fraction
            )));
        }
        if self.level_range.0 < 1 || self.level_range.1 < self.level_range.0 {
            return Err(Error::Config(format!(
                "level_range ({}, {}) must be ordered with min >= 1",
                self.level_range.0, self.level_range.1
            )));
        }
        Ok(())
    }
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            node_count: 50,
            edge_probability: 0.1,
            capacity_range: (1.0, 10.0),
            threshold_fraction: 0.1,
            level_range: (1, 3),
        }
    }
}

/// Fidelity assigned to generated connections (the practical target).
const GENERATED_FIDELITY: f64 = 0.98;

/// Generate a seed-reproducible Erdos-Renyi network with uniformly sampled
/// connection attributes.
pub fn generate_random_network(params: &GeneratorParams, seed: u64) -> Result<QuantumNetwork> {
    params.validate()?;
    let mut rng = sub_rng(seed, "network-generate", 0);
    let mut connections = Vec::new();
    for a in 0..params.node_count {
        for b in (a + 1)..params.node_count {
            if rng.gen::<f64>() >= params.edge_probability {
                continue;
            }
            let capacity = if params.capacity_range.0 == params.capacity_range.1 {
                params.capacity_range.0
            } else {
                rng.gen_range(params.capacity_range.0..params.capacity_range.1)
            };
            let level = rng.gen_range(params.level_range.0..=params.level_range.1);
            connections.push(EntangledConnection {
                id: connections.len(),
                a: NodeId(a),
                b: NodeId(b),
                level,
                capacity,
                threshold: params.threshold_fraction * capacity,
                fidelity: GENERATED_FIDELITY,
            });
        }
    }
    QuantumNetwork::new(params.node_count, connections)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_full_probability_forces_single_connection() {
        let params = GeneratorParams {
            node_count: 2,
            edge_probability: 1.0,
            ..Default::default()
        };
        let net = generate_random_network(&params, 1).unwrap();
        assert_eq!(net.connections().len(), 1);
        assert_eq!(net.connections()[0].endpoints(), (NodeId(0), NodeId(1)));
    }

    #[test]
    fn same_seed_gives_identical_networks() {
        let params = GeneratorParams::default();
        let a = generate_random_network(&params, 7).unwrap();
        let b = generate_random_network(&params, 7).unwrap();
        assert_eq!(a.connections(), b.connections());
    }

    #[test]
    fn edge_count_tracks_binomial_mean() {
        // C(50,2) * 0.1 = 122.5 expected edges; average over many seeds must
        // land within 3 sigma of the mean of the per-seed average.
        let params = GeneratorParams::default();
        let trials = 200;
        let pairs = 50.0 * 49.0 / 2.0;
        let p = 0.1;
        let mean = pairs * p;
        let sigma_of_mean = (pairs * p * (1.0 - p) / trials as f64).sqrt();
        let total: usize = (0..trials)
            .map(|s| generate_random_network(&params, s as u64).unwrap().connections().len())
            .sum();
        let observed = total as f64 / trials as f64;
        assert!(
            (observed - mean).abs() < 3.0 * sigma_of_mean,
            "observed {observed}, expected {mean} +- {}",
            3.0 * sigma_of_mean
        );
    }

    #[test]
    fn rejects_single_node() {
        let params = GeneratorParams {
            node_count: 1,
            ..Default::default()
        };
        assert!(generate_random_network(&params, 0).is_err());
    }

    #[test]
    fn generated_attributes_respect_ranges() {
        let params = GeneratorParams::default();
        let net = generate_random_network(&params, 3).unwrap();
        for c in net.connections() {
            assert!(c.capacity >= 1.0 && c.capacity <= 10.0);
            assert!((c.threshold - 0.1 * c.capacity).abs() < 1e-12);
            assert!((1..=3).contains(&c.level));
        }
    }
}
