//! Slotted multi-hop network graphs: validation, generators, edge-list files.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::coding::MessageId;
use crate::traffic::FlowSpec;

pub type NodeId = usize;

/// Link weight in whole slots. Every hop costs at least one slot.
pub type SlotWeight = u32;

const CONNECTIVITY_RETRIES: usize = 200;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected graph found within {attempts} sampling attempts")]
    ConnectivityFailure { attempts: usize },
    #[error("malformed edge list: {0}")]
    ParseError(String),
}

/// Weighted undirected graph over dense node ids 0..V-1.
///
/// Immutable after construction; cheap to share read-only across runs.
#[derive(Clone, Debug)]
pub struct Network {
    num_nodes: usize,
    /// Canonical edge list, (u, v, w) with u < v, sorted.
    edges: Vec<(NodeId, NodeId, SlotWeight)>,
    /// Per-node neighbor list sorted by neighbor id.
    adjacency: Vec<Vec<(NodeId, SlotWeight)>>,
}

impl Network {
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId, SlotWeight)>,
    ) -> Result<Self, TopologyError> {
        if num_nodes == 0 {
            return Err(TopologyError::InvalidParameter("network has no nodes".into()));
        }
        let mut canonical: Vec<(NodeId, NodeId, SlotWeight)> = Vec::new();
        for (u, v, w) in edges {
            if u == v {
                return Err(TopologyError::InvalidParameter(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(TopologyError::InvalidParameter(format!(
                    "edge ({u},{v}) outside node range 0..{num_nodes}"
                )));
            }
            if w < 1 {
                return Err(TopologyError::InvalidParameter(format!(
                    "edge ({u},{v}) has weight {w}, minimum is one slot"
                )));
            }
            canonical.push((u.min(v), u.max(v), w));
        }
        canonical.sort_unstable();
        for pair in canonical.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(TopologyError::InvalidParameter(format!(
                    "duplicate edge ({},{})",
                    pair[0].0, pair[0].1
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(u, v, w) in &canonical {
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
        }
        Ok(Network {
            num_nodes,
            edges: canonical,
            adjacency,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId, SlotWeight)] {
        &self.edges
    }

    /// Neighbors of `node` with link weights, sorted by neighbor id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, SlotWeight)] {
        &self.adjacency[node]
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<SlotWeight> {
        self.adjacency[u]
            .binary_search_by_key(&v, |&(n, _)| n)
            .ok()
            .map(|i| self.adjacency[u][i].1)
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        if self.num_nodes == 0 {
            return true;
        }
        let mut visited = vec![false; self.num_nodes];
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in self.neighbors(u) {
                if !visited[v] {
                    visited[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.num_nodes
    }

    /// Plain-text edge list: first line "V E", then one "u v w" per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.num_nodes, self.edges.len());
        for &(u, v, w) in &self.edges {
            out.push_str(&format!("{u} {v} {w}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| TopologyError::ParseError("empty file".into()))?;
        let mut parts = header.split_whitespace();
        let v: usize = parse_field(parts.next(), "node count")?;
        let e: usize = parse_field(parts.next(), "edge count")?;
        let mut edges = Vec::with_capacity(e);
        for line in lines {
            let mut parts = line.split_whitespace();
            let u: usize = parse_field(parts.next(), "edge endpoint")?;
            let w: usize = parse_field(parts.next(), "edge endpoint")?;
            let weight: SlotWeight = parse_field(parts.next(), "edge weight")?;
            edges.push((u, w, weight));
        }
        if edges.len() != e {
            return Err(TopologyError::ParseError(format!(
                "header promises {e} edges, found {}",
                edges.len()
            )));
        }
        Network::new(v, edges)
    }
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    what: &str,
) -> Result<T, TopologyError> {
    field
        .ok_or_else(|| TopologyError::ParseError(format!("missing {what}")))?
        .parse()
        .map_err(|_| TopologyError::ParseError(format!("unparseable {what}")))
}

/// Source and destination node sets. The two sets never intersect.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleAssignment {
    pub sources: Vec<NodeId>,
    pub destinations: Vec<NodeId>,
}

/// Sources take the smallest node ids, destinations the largest.
pub fn assign_roles(
    network: &Network,
    num_sources: usize,
    num_destinations: usize,
) -> Result<RoleAssignment, TopologyError> {
    let v = network.num_nodes();
    if num_sources == 0 || num_destinations == 0 {
        return Err(TopologyError::InvalidParameter(
            "need at least one source and one destination".into(),
        ));
    }
    if num_sources + num_destinations > v {
        return Err(TopologyError::InvalidParameter(format!(
            "{num_sources} sources + {num_destinations} destinations overlap in a {v}-node network"
        )));
    }
    Ok(RoleAssignment {
        sources: (0..num_sources).collect(),
        destinations: (v - num_destinations..v).collect(),
    })
}

/// Random connected graph: each candidate edge kept with `edge_probability`,
/// weights drawn from a Gaussian, rounded and clamped below at one slot.
/// Disconnected samples are redrawn from the same seeded stream.
pub fn generate_random_network(
    num_nodes: usize,
    edge_probability: f64,
    weight_mean: f64,
    weight_stddev: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Network, TopologyError> {
    if num_nodes < 2 {
        return Err(TopologyError::InvalidParameter(format!(
            "need at least two nodes, got {num_nodes}"
        )));
    }
    if !(edge_probability > 0.0 && edge_probability <= 1.0) {
        return Err(TopologyError::InvalidParameter(format!(
            "edge probability {edge_probability} outside (0, 1]"
        )));
    }
    if weight_mean < 1.0 {
        return Err(TopologyError::InvalidParameter(format!(
            "weight mean {weight_mean} below one slot"
        )));
    }
    if weight_stddev < 0.0 {
        return Err(TopologyError::InvalidParameter(format!(
            "negative weight stddev {weight_stddev}"
        )));
    }
    let normal = Normal::new(weight_mean, weight_stddev)
        .map_err(|e| TopologyError::InvalidParameter(e.to_string()))?;
    for _ in 0..CONNECTIVITY_RETRIES {
        let mut edges = Vec::new();
        for u in 0..num_nodes {
            for v in u + 1..num_nodes {
                if rng.gen_bool(edge_probability) {
                    let w = normal.sample(rng).round().max(1.0) as SlotWeight;
                    edges.push((u, v, w));
                }
            }
        }
        let network = Network::new(num_nodes, edges)?;
        if network.is_connected() {
            return Ok(network);
        }
    }
    Err(TopologyError::ConnectivityFailure {
        attempts: CONNECTIVITY_RETRIES,
    })
}

/// Node ids of the fixed three-pair example topology.
pub mod special_case_nodes {
    use super::NodeId;

    pub const S1: NodeId = 0;
    pub const S2: NodeId = 1;
    pub const S3: NodeId = 2;
    pub const N1: NodeId = 3;
    pub const N2: NodeId = 4;
    pub const N3: NodeId = 5;
    pub const D1: NodeId = 6;
    pub const D2: NodeId = 7;
    pub const D3: NodeId = 8;
}

/// The three-pair example: every pair's shortest path runs through the shared
/// relay n2 with propagation delay 2, pairs 1 and 3 also have weight-4 detours
/// through n1 and n3, and pair 2 has no alternative at all.
pub fn special_case_network() -> (Network, Vec<FlowSpec>) {
    use special_case_nodes::*;

    let edges = vec![
        (S1, N2, 1),
        (S2, N2, 1),
        (S3, N2, 1),
        (N2, D1, 1),
        (N2, D2, 1),
        (N2, D3, 1),
        (S1, N1, 2),
        (N1, D1, 2),
        (S3, N3, 2),
        (N3, D3, 2),
    ];
    let network = Network::new(9, edges).expect("fixed topology is valid");
    let flows = [(S1, D1), (S2, D2), (S3, D3)]
        .iter()
        .enumerate()
        .map(|(i, &(s, d))| {
            FlowSpec::new(MessageId(i as u32 + 1), vec![s], vec![d], 4, vec![0.5])
                .expect("fixed flows are valid")
        })
        .collect();
    (network, flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn two_node_forced_edge() {
        let net = generate_random_network(2, 1.0, 1.0, 0.0, &mut rng(1)).unwrap();
        assert_eq!(net.edges(), &[(0, 1, 1)]);
    }

    #[test]
    fn single_node_rejected() {
        assert!(matches!(
            generate_random_network(1, 0.5, 2.0, 1.0, &mut rng(1)),
            Err(TopologyError::InvalidParameter(_))
        ));
    }

    #[test]
    fn out_of_range_probability_rejected() {
        assert!(generate_random_network(5, 0.0, 2.0, 1.0, &mut rng(1)).is_err());
        assert!(generate_random_network(5, 1.5, 2.0, 1.0, &mut rng(1)).is_err());
        assert!(generate_random_network(5, 0.5, 0.5, 1.0, &mut rng(1)).is_err());
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = generate_random_network(30, 0.15, 2.0, 1.0, &mut rng(7)).unwrap();
        let b = generate_random_network(30, 0.15, 2.0, 1.0, &mut rng(7)).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.is_connected());
        assert_eq!(a.num_nodes(), 30);
    }

    #[test]
    fn generated_networks_connected_and_symmetric() {
        for seed in 0..25 {
            let net = generate_random_network(20, 0.2, 2.0, 1.0, &mut rng(seed)).unwrap();
            assert!(net.is_connected(), "seed {seed}");
            for &(u, v, w) in net.edges() {
                assert!(w >= 1);
                assert_eq!(net.weight(u, v), Some(w));
                assert_eq!(net.weight(v, u), Some(w));
            }
        }
    }

    #[test]
    fn self_loop_rejected() {
        assert!(Network::new(3, vec![(1, 1, 1)]).is_err());
    }

    #[test]
    fn zero_weight_rejected() {
        assert!(Network::new(3, vec![(0, 1, 0)]).is_err());
    }

    #[test]
    fn roles_take_extreme_ids() {
        let net = generate_random_network(30, 0.3, 2.0, 1.0, &mut rng(3)).unwrap();
        let roles = assign_roles(&net, 3, 3).unwrap();
        assert_eq!(roles.sources, vec![0, 1, 2]);
        assert_eq!(roles.destinations, vec![27, 28, 29]);
    }

    #[test]
    fn roles_hundred_node_case() {
        let net = generate_random_network(100, 0.08, 2.0, 1.0, &mut rng(4)).unwrap();
        let roles = assign_roles(&net, 10, 10).unwrap();
        assert_eq!(roles.sources, (0..10).collect::<Vec<_>>());
        assert_eq!(roles.destinations, (90..100).collect::<Vec<_>>());
    }

    #[test]
    fn overlapping_roles_rejected() {
        let net = Network::new(4, vec![(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        assert!(matches!(
            assign_roles(&net, 3, 3),
            Err(TopologyError::InvalidParameter(_))
        ));
    }

    #[test]
    fn edge_list_roundtrip() {
        let net = generate_random_network(12, 0.3, 2.5, 1.0, &mut rng(5)).unwrap();
        let text = net.to_edge_list();
        let back = Network::from_edge_list(&text).unwrap();
        assert_eq!(net.edges(), back.edges());
        assert_eq!(net.num_nodes(), back.num_nodes());
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(Network::from_edge_list("").is_err());
        assert!(Network::from_edge_list("2 1\n0 1\n").is_err());
        assert!(Network::from_edge_list("2 2\n0 1 1\n").is_err());
    }

    #[test]
    fn special_case_shape() {
        use special_case_nodes::*;
        let (net, flows) = special_case_network();
        assert_eq!(net.num_nodes(), 9);
        assert!(net.is_connected());
        assert_eq!(flows.len(), 3);
        assert_eq!(net.weight(S2, N2), Some(1));
        assert_eq!(net.weight(N2, D2), Some(1));
        assert_eq!(net.weight(S1, N1), Some(2));
        assert_eq!(net.weight(S2, N1), None);
        // s2 touches only the shared relay.
        assert_eq!(net.neighbors(S2), &[(N2, 1)]);
    }
}
