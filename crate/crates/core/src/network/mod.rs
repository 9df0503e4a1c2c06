//! Immutable model of the entangled quantum network.
//!
//! A network is a simple undirected graph whose edges are leveled entangled
//! connections carrying a throughput capacity, a critical threshold and a
//! fidelity. Networks are validated on construction and never mutated, so
//! they can be shared read-only across concurrent trials.

mod density;
mod generate;

pub use density::{bell_fidelity, DensityMatrix4};
pub use generate::{generate_random_network, GeneratorParams};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index, unique within one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A leveled entangled connection between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangledConnection {
    pub id: usize,
    /// First endpoint (the pair is unordered).
    pub a: NodeId,
    /// Second endpoint.
    pub b: NodeId,
    /// Entanglement level; a level-l connection spans hop distance 2^(l-1).
    pub level: u32,
    /// Upper bound on entanglement throughput, in ebits/second.
    pub capacity: f64,
    /// Critical lower bound on throughput, in ebits/second.
    pub threshold: f64,
    /// Entanglement fidelity, in (0, 1].
    pub fidelity: f64,
}

impl EntangledConnection {
    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn other_endpoint(&self, n: NodeId) -> NodeId {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }

    fn validate(&self, node_count: usize) -> Result<()> {
        let ctx = |msg: String| Error::InvalidNetwork(format!("connection {}: {msg}", self.id));
        if self.a == self.b {
            return Err(ctx("self-loop endpoints".into()));
        }
        for n in [self.a, self.b] {
            if n.0 >= node_count {
                return Err(ctx(format!("endpoint {n} out of range (|V| = {node_count})")));
            }
        }
        if self.level < 1 {
            return Err(ctx("level must be >= 1".into()));
        }
        if !(self.capacity >= 0.0) {
            return Err(ctx(format!("capacity {} must be >= 0", self.capacity)));
        }
        if !(self.threshold >= 0.0) || self.threshold > self.capacity {
            return Err(ctx(format!(
                "threshold {} must lie in [0, capacity {}]",
                self.threshold, self.capacity
            )));
        }
        if !(self.fidelity > 0.0 && self.fidelity <= 1.0) {
            return Err(ctx(format!("fidelity {} must lie in (0, 1]", self.fidelity)));
        }
        Ok(())
    }
}

/// Immutable quantum network: node set `V` and entangled-connection set `S`.
#[derive(Debug, Clone)]
pub struct QuantumNetwork {
    node_count: usize,
    connections: Vec<EntangledConnection>,
    /// adjacency[v] = (connection id, neighbor) pairs, sorted by neighbor.
    adjacency: Vec<Vec<(usize, NodeId)>>,
}

/// Serialized form of a network file.
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    nodes: usize,
    connections: Vec<EntangledConnection>,
}

impl QuantumNetwork {
    /// Build a network, validating every type invariant.
    pub fn new(node_count: usize, mut connections: Vec<EntangledConnection>) -> Result<Self> {
        connections.sort_by_key(|c| c.id);
        for (i, c) in connections.iter().enumerate() {
            c.validate(node_count)?;
            if c.id != i {
                return Err(Error::InvalidNetwork(format!(
                    "connection ids must be dense 0..{}, found {}",
                    connections.len(),
                    c.id
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &connections {
            let key = (c.a.0.min(c.b.0), c.a.0.max(c.b.0));
            if !seen.insert(key) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate connection between nodes {} and {}",
                    key.0, key.1
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for c in &connections {
            adjacency[c.a.0].push((c.id, c.b));
            adjacency[c.b.0].push((c.id, c.a));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(_, n)| n);
        }
        Ok(Self { node_count, connections, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    pub fn connections(&self) -> &[EntangledConnection] {
        &self.connections
    }

    pub fn connection(&self, id: usize) -> Option<&EntangledConnection> {
        self.connections.get(id)
    }

    pub fn neighbors(&self, n: NodeId) -> &[(usize, NodeId)] {
        &self.adjacency[n.0]
    }

    pub fn check_node(&self, n: NodeId) -> Result<()> {
        if n.0 < self.node_count {
            Ok(())
        } else {
            Err(Error::InvalidNode(n.0, self.node_count))
        }
    }

    /// Minimum-hop distances from `src` to every node; `None` = unreachable.
    /// Only connections with `mask[id] = true` are traversed.
    pub fn bfs_distances(&self, src: NodeId, mask: Option<&[bool]>) -> Result<Vec<Option<usize>>> {
        self.check_node(src)?;
        if let Some(m) = mask {
            if m.len() != self.connections.len() {
                return Err(Error::InvalidNetwork(format!(
                    "mask length {} does not cover {} connections",
                    m.len(),
                    self.connections.len()
                )));
            }
        }
        let mut dist = vec![None; self.node_count];
        dist[src.0] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.0].unwrap();
            for &(cid, u) in &self.adjacency[v.0] {
                if mask.map_or(true, |m| m[cid]) && dist[u.0].is_none() {
                    dist[u.0] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        Ok(dist)
    }

    /// Minimum hop count between two nodes; `None` when unreachable.
    pub fn node_hop_distance(&self, a: NodeId, b: NodeId) -> Result<Option<usize>> {
        self.check_node(b)?;
        Ok(self.bfs_distances(a, None)?[b.0])
    }

    /// Minimum-hop path from `src` to `dst` over mask-usable connections,
    /// as an ordered list of connection ids. Ties are broken by the
    /// lexicographically smallest node-index sequence. `None` when
    /// disconnected under the mask.
    pub fn shortest_path(
        &self,
        mask: &[bool],
        src: NodeId,
        dst: NodeId,
    ) -> Result<Option<Vec<usize>>> {
        self.check_node(src)?;
        self.check_node(dst)?;
        if src == dst {
            return Ok(Some(Vec::new()));
        }
        // Distances to dst let the forward walk pick, at each step, the
        // smallest-index neighbor that still lies on some minimum-hop path.
        let dist_to_dst = self.bfs_distances(dst, Some(mask))?;
        let Some(total) = dist_to_dst[src.0] else {
            return Ok(None);
        };
        let mut path = Vec::with_capacity(total);
        let mut at = src;
        let mut remaining = total;
        while at != dst {
            // adjacency is sorted by neighbor index, so the first match is
            // the lexicographically smallest continuation.
            let &(cid, next) = self.adjacency[at.0]
                .iter()
                .find(|&&(cid, u)| mask[cid] && dist_to_dst[u.0] == Some(remaining - 1))
                .expect("BFS distance guarantees a next hop");
            path.push(cid);
            at = next;
            remaining -= 1;
        }
        Ok(Some(path))
    }

    /// Serialize to the network JSON document.
    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            nodes: self.node_count,
            connections: self.connections.clone(),
        };
        serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
    }

    /// Load and validate a network from its JSON document.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            file: origin.to_string(),
            message: e.to_string(),
        })?;
        Self::new(file.nodes, file.connections).map_err(|e| Error::Parse {
            file: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }
}

/// Hop distance spanned by a level-`l` entangled connection: 2^(l-1).
pub fn hop_distance_for_level(l: i64) -> Result<u64> {
    if l < 1 {
        return Err(Error::InvalidLevel(l));
    }
    Ok(1u64 << (l - 1))
}
