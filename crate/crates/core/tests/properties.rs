//! Randomized invariants over small instances.

use proptest::prelude::*;

use qnet_ear::liegroup::{se2_exp, AlgebraCoeffs, Se2Element};
use qnet_ear::metrics::{cdf_ear, pr_ear, RatioDistribution, RatioEntry};
use qnet_ear::network::{EntangledConnection, NodeId, QuantumNetwork};
use qnet_ear::routing::{serve_demands, Demand};

fn small_network(n: usize, edge_mask: u32, caps: &[u8]) -> Option<QuantumNetwork> {
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut conns = Vec::new();
    for (i, &(a, b)) in pairs.iter().enumerate() {
        if edge_mask >> i & 1 == 1 {
            conns.push(EntangledConnection {
                id: conns.len(),
                a: NodeId(a),
                b: NodeId(b),
                level: 1,
                capacity: 1.0 + f64::from(caps[i % caps.len()] % 4),
                threshold: 0.0,
                fidelity: 0.98,
            });
        }
    }
    if conns.is_empty() {
        return None;
    }
    QuantumNetwork::new(n, conns).ok()
}

/// Hop length of the true shortest path by exhaustive simple-path search.
fn exhaustive_min_hops(net: &QuantumNetwork, s: usize, t: usize) -> Option<usize> {
    fn dfs(
        net: &QuantumNetwork,
        at: usize,
        t: usize,
        seen: &mut Vec<bool>,
        len: usize,
        best: &mut Option<usize>,
    ) {
        if at == t {
            *best = Some(best.map_or(len, |b: usize| b.min(len)));
            return;
        }
        seen[at] = true;
        for &(_, u) in net.neighbors(NodeId(at)) {
            if !seen[u.0] {
                dfs(net, u.0, t, seen, len + 1, best);
            }
        }
        seen[at] = false;
    }
    let mut best = None;
    dfs(net, s, t, &mut vec![false; net.node_count()], 0, &mut best);
    best
}

proptest! {
    #[test]
    fn shortest_path_matches_exhaustive_search(
        n in 2usize..=6,
        edge_mask in 0u32..(1 << 15),
        caps in proptest::collection::vec(0u8..4, 15),
    ) {
        let Some(net) = small_network(n, edge_mask, &caps) else { return Ok(()); };
        let mask = vec![true; net.connections().len()];
        for s in 0..n {
            for t in 0..n {
                let found = net.shortest_path(&mask, NodeId(s), NodeId(t)).unwrap();
                let expected = if s == t { Some(0) } else { exhaustive_min_hops(&net, s, t) };
                prop_assert_eq!(found.as_ref().map(Vec::len), expected);
                if let Some(path) = &found {
                    // the path is a real walk from s to t
                    let mut at = s;
                    for &cid in path {
                        let c = net.connection(cid).unwrap();
                        prop_assert!(c.a.0 == at || c.b.0 == at);
                        at = if c.a.0 == at { c.b.0 } else { c.a.0 };
                    }
                    prop_assert_eq!(at, t);
                }
            }
        }
    }

    #[test]
    fn serving_respects_capacity_and_demand_bounds(
        n in 2usize..=6,
        edge_mask in 0u32..(1 << 15),
        caps in proptest::collection::vec(0u8..4, 15),
        required in 0.0f64..20.0,
        kappa in 0.05f64..=1.0,
    ) {
        let Some(net) = small_network(n, edge_mask, &caps) else { return Ok(()); };
        let outcome = qnet_ear::failure::FailureOutcome {
            affected_nodes: vec![false; n],
            affected_connections: vec![false; net.connections().len()],
            surviving_connections: vec![true; net.connections().len()],
            post_failure_rate: net.connections().iter().map(|c| c.capacity).collect(),
        };
        let demand = Demand {
            id: 0,
            source: NodeId(0),
            target: NodeId(n - 1),
            user: 1,
            required,
        };
        let record = serve_demands(&net, &outcome, &[demand], kappa).unwrap();
        prop_assert!(record.served_total <= required + 1e-9);
        prop_assert!(record.served_total <= record.baseline + 1e-9);
        prop_assert!(record.ratio >= 0.0 && record.ratio <= 1.0 + 1e-12);
        let per_sum: f64 = record.per_demand_served.iter().sum();
        prop_assert!((per_sum - record.served_total).abs() <= 1e-9);
    }

    #[test]
    fn cdf_is_monotone_and_quantile_bounded(
        ratios in proptest::collection::vec(0.0f64..=1.0, 1..30),
        xs in proptest::collection::vec(0.0f64..=1.0, 10),
    ) {
        let w = 1.0 / ratios.len() as f64;
        let mut entries: Vec<RatioEntry> = ratios
            .iter()
            .map(|&r| RatioEntry { ratio: r, weight: w, radius: 1.0 })
            .collect();
        let correction = 1.0 - entries.iter().map(|e| e.weight).sum::<f64>();
        entries[0].weight += correction;
        let dist = RatioDistribution::new(entries, 0.05).unwrap();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for &x in &sorted {
            let c = cdf_ear(&dist, x);
            prop_assert!(c >= prev - 1e-15);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
            prev = c;
        }
        for &q in &xs {
            let v = pr_ear(&dist, q).unwrap();
            prop_assert!((0.0..=1.0 + 1e-9).contains(&v));
        }
    }

    #[test]
    fn se2_products_stay_in_the_group(
        a1 in -3.0f64..3.0, b1 in -3.0f64..3.0, t1 in -3.0f64..3.0,
        a2 in -3.0f64..3.0, b2 in -3.0f64..3.0, t2 in -3.0f64..3.0,
    ) {
        let g = se2_exp(AlgebraCoeffs::new(a1, b1, t1).unwrap());
        let h = se2_exp(AlgebraCoeffs::new(a2, b2, t2).unwrap());
        let product = g.compose(&h).unwrap();
        // rebuilding from the raw matrix re-checks every group invariant
        prop_assert!(Se2Element::new(*product.matrix()).is_ok());
    }
}
