//! Analytical delay estimation: equivalent Dijkstra routes, bottleneck
//! detection, the discrete-time queuing bound, and detour correction.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::coding::MessageId;
use crate::topology::{Network, NodeId};
use crate::traffic::FlowSpec;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
}

/// A fixed path with its propagation delay (sum of link weights).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub source: NodeId,
    pub destination: NodeId,
    pub hops: Vec<NodeId>,
    pub propagation: u64,
}

impl Route {
    /// Nodes that receive and forward the pair's packets: every hop after
    /// the source.
    pub fn relay_hops(&self) -> &[NodeId] {
        &self.hops[1..]
    }

    pub fn predecessor_of(&self, node: NodeId) -> Option<NodeId> {
        self.hops
            .iter()
            .position(|&h| h == node)
            .filter(|&i| i > 0)
            .map(|i| self.hops[i - 1])
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.hops.contains(&node)
    }
}

/// Shortest distances from `origin` to every node, None when unreachable.
/// `removed` nodes (and their edges) are skipped entirely.
fn distances_with_mask(
    network: &Network,
    origin: NodeId,
    removed: &[bool],
) -> Vec<Option<u64>> {
    let mut dist = vec![None; network.num_nodes()];
    if removed[origin] {
        return dist;
    }
    let mut heap = BinaryHeap::new();
    dist[origin] = Some(0);
    heap.push(Reverse((0u64, origin)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u] != Some(d) {
            continue;
        }
        for &(v, w) in network.neighbors(u) {
            if removed[v] {
                continue;
            }
            let candidate = d + w as u64;
            if dist[v].map_or(true, |dv| candidate < dv) {
                dist[v] = Some(candidate);
                heap.push(Reverse((candidate, v)));
            }
        }
    }
    dist
}

/// Dijkstra distances from `origin` to every node.
pub fn dijkstra_distances(network: &Network, origin: NodeId) -> Vec<Option<u64>> {
    distances_with_mask(network, origin, &vec![false; network.num_nodes()])
}

fn route_with_mask(
    network: &Network,
    source: NodeId,
    destination: NodeId,
    removed: &[bool],
) -> Result<Route, AnalysisError> {
    let to_dest = distances_with_mask(network, destination, removed);
    let total = to_dest[source].ok_or(AnalysisError::Unreachable {
        from: source,
        to: destination,
    })?;
    // Walk greedily from the source, always taking the smallest neighbor
    // that still lies on a shortest path; this yields the lexicographically
    // smallest minimum-weight hop sequence.
    let mut hops = vec![source];
    let mut current = source;
    while current != destination {
        let remaining = to_dest[current].expect("on a shortest path");
        let next = network
            .neighbors(current)
            .iter()
            .filter(|&&(v, w)| {
                !removed[v] && to_dest[v].is_some_and(|dv| dv + w as u64 == remaining)
            })
            .map(|&(v, _)| v)
            .min()
            .expect("finite distance implies a next hop");
        hops.push(next);
        current = next;
    }
    Ok(Route {
        source,
        destination,
        hops,
        propagation: total,
    })
}

/// Minimum-weight route; ties broken toward the lexicographically smallest
/// hop sequence so downstream analysis is reproducible.
pub fn dijkstra_route(
    network: &Network,
    source: NodeId,
    destination: NodeId,
) -> Result<Route, AnalysisError> {
    route_with_mask(network, source, destination, &vec![false; network.num_nodes()])
}

/// A route annotated with the flow it carries.
#[derive(Clone, Debug)]
pub struct PairRoute {
    pub message_id: MessageId,
    pub route: Route,
}

/// Equivalent shortest-path routes for every (source, destination) pair of
/// every flow.
pub fn equivalent_routes(
    network: &Network,
    flows: &[FlowSpec],
) -> Result<Vec<PairRoute>, AnalysisError> {
    let mut routes = Vec::new();
    for flow in flows {
        for &s in &flow.sources {
            for &d in &flow.destinations {
                routes.push(PairRoute {
                    message_id: flow.message_id,
                    route: dijkstra_route(network, s, d)?,
                });
            }
        }
    }
    Ok(routes)
}

/// One flow's crossing of a bottleneck node.
#[derive(Clone, Debug)]
pub struct CrossingFlow {
    pub message_id: MessageId,
    pub source: NodeId,
    pub destination: NodeId,
    pub predecessor: NodeId,
}

/// A node where routes of distinct messages first converge.
#[derive(Clone, Debug)]
pub struct BottleneckReport {
    pub node: NodeId,
    pub crossing_flows: Vec<CrossingFlow>,
    /// Merged per-message arrival rates at this node; same-message sources
    /// are counted once at their summed rate.
    pub rate_by_message: Vec<(MessageId, f64)>,
    pub aggregate_rate: f64,
}

/// Detect every bottleneck: a node crossed (at hop index >= 1) by routes of
/// at least two distinct messages arriving over distinct predecessor links.
/// Gatherings of routes carrying the same message are exempt, and each
/// message's sources crossing the node contribute one merged rate.
pub fn find_bottlenecks(
    network: &Network,
    routes: &[PairRoute],
    flows: &[FlowSpec],
) -> Vec<BottleneckReport> {
    let mut reports = Vec::new();
    for node in 0..network.num_nodes() {
        let crossing: Vec<CrossingFlow> = routes
            .iter()
            .filter_map(|pr| {
                pr.route.predecessor_of(node).map(|pred| CrossingFlow {
                    message_id: pr.message_id,
                    source: pr.route.source,
                    destination: pr.route.destination,
                    predecessor: pred,
                })
            })
            .collect();
        let converges = crossing.iter().enumerate().any(|(i, a)| {
            crossing[i + 1..].iter().any(|b| {
                a.message_id != b.message_id && a.predecessor != b.predecessor
            })
        });
        if !converges {
            continue;
        }
        let mut rate_by_message: Vec<(MessageId, f64)> = Vec::new();
        for flow in flows {
            let rate: f64 = flow
                .sources
                .iter()
                .zip(&flow.rates)
                .filter(|(&s, _)| {
                    crossing
                        .iter()
                        .any(|c| c.message_id == flow.message_id && c.source == s)
                })
                .map(|(_, &r)| r)
                .sum();
            if rate > 0.0 {
                rate_by_message.push((flow.message_id, rate));
            }
        }
        let aggregate_rate = rate_by_message.iter().map(|(_, r)| r).sum();
        reports.push(BottleneckReport {
            node,
            crossing_flows: crossing,
            rate_by_message,
            aggregate_rate,
        });
    }
    reports
}

/// Mean wait of a discrete-time unit-service queue fed by independent
/// Bernoulli flows with the given rates: E[A(A-1)] / (2 lambda (1 - lambda))
/// for the per-slot batch A. Infinite at or above capacity.
pub fn batch_mean_wait(rates: &[f64]) -> f64 {
    let lambda: f64 = rates.iter().sum();
    if lambda >= 1.0 {
        return f64::INFINITY;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    let batch_pairs = lambda * lambda - sum_sq; // E[A(A-1)]
    batch_pairs / (2.0 * lambda * (1.0 - lambda))
}

/// Queuing-delay lower bound at a bottleneck, from its merged per-message
/// rates.
pub fn queuing_bound(report: &BottleneckReport) -> f64 {
    let rates: Vec<f64> = report.rate_by_message.iter().map(|&(_, r)| r).collect();
    batch_mean_wait(&rates)
}

/// Delete every bottleneck node and its edges, then retry the shortest path.
/// Absence of a detour is a value, not an error.
pub fn detect_detour(
    network: &Network,
    source: NodeId,
    destination: NodeId,
    bottlenecks: &[BottleneckReport],
) -> Option<Route> {
    let mut removed = vec![false; network.num_nodes()];
    for report in bottlenecks {
        removed[report.node] = true;
    }
    if removed[source] || removed[destination] {
        return None;
    }
    route_with_mask(network, source, destination, &removed).ok()
}

/// Queuing delay along a tandem of unit-service queues, one per intermediate
/// hop, each fed by the given per-hop flow rates.
pub fn tandem_queuing(per_hop_rates: &[Vec<f64>]) -> f64 {
    per_hop_rates.iter().map(|rates| batch_mean_wait(rates)).sum()
}

/// Queuing estimate for a detour carrying only the pair's own traffic. A
/// single Bernoulli flow never queues behind itself at a deterministic unit
/// server, so this is zero today; it runs through the same per-hop formula
/// so shared detours price correctly.
pub fn detour_queuing(route: &Route, own_rate: f64) -> f64 {
    let intermediates = route.hops.len().saturating_sub(2);
    let per_hop: Vec<Vec<f64>> = (0..intermediates).map(|_| vec![own_rate]).collect();
    tandem_queuing(&per_hop)
}

/// Detour branch of a delay estimate.
#[derive(Clone, Debug)]
pub struct DetourEstimate {
    pub route: Route,
    pub propagation: u64,
    pub queuing: f64,
}

/// Composite delay approximation for one (source, destination) pair.
#[derive(Clone, Debug)]
pub struct DelayEstimate {
    pub source: NodeId,
    pub destination: NodeId,
    pub propagation: u64,
    pub queuing_bound: f64,
    pub detour: Option<DetourEstimate>,
    pub combined: f64,
}

/// Full estimate: Dijkstra propagation, queuing bounds summed over the
/// bottlenecks the route crosses, and the detour alternative when one
/// survives bottleneck deletion. `combined` is the primary branch when no
/// detour exists, otherwise the minimum of the two branches.
pub fn approximate_delay(
    network: &Network,
    flows: &[FlowSpec],
    source: NodeId,
    destination: NodeId,
) -> Result<DelayEstimate, AnalysisError> {
    let routes = equivalent_routes(network, flows)?;
    let bottlenecks = find_bottlenecks(network, &routes, flows);
    let route = dijkstra_route(network, source, destination)?;

    // Waits accumulate at bottlenecks the packets pass through on the way;
    // arrival at the destination itself ends the journey.
    let on_route: f64 = bottlenecks
        .iter()
        .filter(|b| b.node != destination && route.contains(b.node))
        .map(queuing_bound)
        .sum();

    let own_rate = flows
        .iter()
        .find_map(|f| f.rate_of(source))
        .unwrap_or(0.0);
    let detour = detect_detour(network, source, destination, &bottlenecks)
        .filter(|d| d.hops != route.hops)
        .map(|d| DetourEstimate {
            propagation: d.propagation,
            queuing: detour_queuing(&d, own_rate),
            route: d,
        });

    let primary = route.propagation as f64 + on_route;
    let combined = match &detour {
        None => primary,
        Some(d) => primary.min(d.propagation as f64 + d.queuing),
    };
    Ok(DelayEstimate {
        source,
        destination,
        propagation: route.propagation,
        queuing_bound: on_route,
        detour,
        combined,
    })
}

/// Queuing delay can be ignored for a flow exactly when every packet in the
/// network belongs to that one message (and coding is in use, which it
/// always is here): any packet crossing a jam still serves the decode.
pub fn same_message_exemption(flows: &[FlowSpec]) -> Vec<bool> {
    flows.iter().map(|_| flows.len() == 1).collect()
}
