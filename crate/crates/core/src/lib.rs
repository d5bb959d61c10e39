//! Simulator and analytical delay estimator for M-to-N broadcast with random
//! linear network coding in time-slotted multi-hop networks.
//!
//! The engine floods coded packets under the fastest-only rule (accept only
//! unseen packets, never send back over the arrival link, one service per
//! slot) and records per-packet delays, decode completions, and queue
//! trajectories. The analysis side prices the same traffic on fixed
//! Dijkstra-equivalent routes: bottleneck detection, a discrete-time queuing
//! lower bound, and detour correction where deleting the bottlenecks still
//! leaves a path.

pub mod analysis;
pub mod coding;
pub mod engine;
pub mod topology;
pub mod traffic;

pub use analysis::{
    approximate_delay, batch_mean_wait, detect_detour, detour_queuing, dijkstra_distances,
    dijkstra_route, equivalent_routes, find_bottlenecks, queuing_bound, same_message_exemption,
    tandem_queuing, AnalysisError, BottleneckReport, DelayEstimate, DetourEstimate, PairRoute,
    Route,
};
pub use coding::{
    encode, CodedPacket, CodingError, DecoderState, Gf256, MessageId, PacketIdentity,
    SourceMessage, WirePacket,
};
pub use engine::{
    measure_average_delay, measure_average_delay_after, measure_queue_growth, run,
    single_packet_first_arrivals, write_deliveries_csv, write_queues_csv, ArrivalPolicy,
    Counters, DecodeEvent, Delivery, EngineConfig, EngineError, SimulationRecord,
};
pub use topology::{
    assign_roles, generate_random_network, special_case_network, Network, NodeId, RoleAssignment,
    SlotWeight, TopologyError,
};
pub use traffic::{validate_flows, ArrivalProcess, FlowSpec, TrafficError};
