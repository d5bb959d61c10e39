//! Slotted simulator for fastest-only broadcast with duplicate discards.
//!
//! Each slot runs three phases: source arrivals, reception, transmission.
//! Nodes accept only packets they have never seen, never forward a packet
//! back over the link it arrived on, and serve their FIFO queue at one
//! packet per slot.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coding::{CodedPacket, DecoderState, Gf256, MessageId, PacketIdentity, SourceMessage};
use crate::topology::{Network, NodeId};
use crate::traffic::{ArrivalProcess, FlowSpec};

/// What happens when several packets reach one receiver in the same slot.
///
/// `Drop` keeps the single-port constraint strict: one admission per slot,
/// chosen by lowest sender id, the rest lost. `Defer` admits every
/// simultaneous arrival into the queue, which is the arrival model the
/// analytical queuing bound assumes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ArrivalPolicy {
    Drop,
    Defer,
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub max_slots: u64,
    pub arrival_policy: ArrivalPolicy,
    /// Payload bytes backing each message; metrics depend only on coefficients.
    pub payload_len: usize,
    /// When relaying, a node holds off sending to neighbors it heard from
    /// within this many slots, on top of never returning a packet over its
    /// arrival link. Packets a node originated itself are exempt. Zero
    /// disables the window entirely.
    pub reverse_suppression_slots: u64,
    /// Whether destination nodes also relay packets of messages that are not
    /// addressed to them. They always rebroadcast their own message.
    pub destinations_relay_foreign: bool,
    /// Stop as soon as every destination of every flow has decoded.
    pub stop_when_decoded: bool,
    /// Track the first arrival slot of every packet at every node.
    pub record_first_arrivals: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_slots: 50_000,
            arrival_policy: ArrivalPolicy::Defer,
            payload_len: 4,
            reverse_suppression_slots: 64,
            destinations_relay_foreign: false,
            stop_when_decoded: false,
            record_first_arrivals: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no deliveries recorded for sources {sources:?} -> {destination}")]
    NoDeliveries {
        sources: Vec<NodeId>,
        destination: NodeId,
    },
    #[error("record spans {horizon} slots, need at least {required}")]
    InsufficientHorizon { horizon: u64, required: u64 },
}

/// Dense per-run packet key; identical coefficient vectors share a key.
pub type PacketKey = u32;

const NO_SENDER: u32 = u32::MAX;

/// First arrival of a packet at a destination of its flow.
#[derive(Clone, Debug)]
pub struct Delivery {
    pub packet: PacketKey,
    pub message_id: MessageId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub created_slot: u64,
    pub arrived_slot: u64,
    /// Path taken by the first-arriving copy, origin first.
    pub hops: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug)]
pub struct DecodeEvent {
    pub destination: NodeId,
    pub message_id: MessageId,
    pub slot: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Counters {
    pub generated: u64,
    pub transmissions: u64,
    pub in_flight_created: u64,
    pub port_drops: u64,
    pub duplicate_discards: u64,
}

/// Everything a run leaves behind: delivery log, decode log, queue series.
pub struct SimulationRecord {
    pub num_nodes: usize,
    /// Slots actually executed (may stop early on full decode).
    pub horizon: u64,
    pub deliveries: Vec<Delivery>,
    pub decode_events: Vec<DecodeEvent>,
    /// Queue length of each node at the end of each slot.
    pub queue_series: Vec<Vec<u32>>,
    /// Per node, first arrival slot by packet key (when recording is on).
    pub first_arrivals: Option<Vec<HashMap<PacketKey, u64>>>,
    pub counters: Counters,
}

impl SimulationRecord {
    pub fn decode_slot(&self, destination: NodeId, message_id: MessageId) -> Option<u64> {
        self.decode_events
            .iter()
            .find(|e| e.destination == destination && e.message_id == message_id)
            .map(|e| e.slot)
    }
}

/// Mean of (first arrival - creation) over delivered packets of the pair.
pub fn measure_average_delay(
    record: &SimulationRecord,
    sources: &[NodeId],
    destination: NodeId,
) -> Result<f64, EngineError> {
    measure_average_delay_after(record, sources, destination, 0)
}

/// Same, restricted to packets created at or after `min_created_slot`.
pub fn measure_average_delay_after(
    record: &SimulationRecord,
    sources: &[NodeId],
    destination: NodeId,
    min_created_slot: u64,
) -> Result<f64, EngineError> {
    let mut sum = 0u64;
    let mut count = 0u64;
    for d in &record.deliveries {
        if d.destination == destination
            && d.created_slot >= min_created_slot
            && sources.contains(&d.origin)
        {
            sum += d.arrived_slot - d.created_slot;
            count += 1;
        }
    }
    if count == 0 {
        return Err(EngineError::NoDeliveries {
            sources: sources.to_vec(),
            destination,
        });
    }
    Ok(sum as f64 / count as f64)
}

/// Empirical stability probe: Q_n(t)/t averaged over the final tenth of the
/// run. Near zero for stable nodes, near the arrival-service drift otherwise.
pub fn measure_queue_growth(
    record: &SimulationRecord,
    node: NodeId,
) -> Result<f64, EngineError> {
    const REQUIRED: u64 = 1000;
    if record.horizon < REQUIRED {
        return Err(EngineError::InsufficientHorizon {
            horizon: record.horizon,
            required: REQUIRED,
        });
    }
    let series = &record.queue_series[node];
    let tail = (record.horizon / 10).max(1) as usize;
    let start = series.len() - tail;
    let sum: f64 = series[start..]
        .iter()
        .enumerate()
        .map(|(i, &q)| q as f64 / (start + i + 1) as f64)
        .sum();
    Ok(sum / tail as f64)
}

struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new() -> Self {
        BitSet { words: Vec::new() }
    }

    fn contains(&self, index: u32) -> bool {
        let word = (index / 64) as usize;
        word < self.words.len() && self.words[word] & (1 << (index % 64)) != 0
    }

    fn insert(&mut self, index: u32) {
        let word = (index / 64) as usize;
        if word >= self.words.len() {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1 << (index % 64);
    }
}

#[derive(Clone)]
struct TrackedPacket {
    key: PacketKey,
    packet: CodedPacket,
}

struct InFlight {
    packet: TrackedPacket,
    sender: NodeId,
    receiver: NodeId,
}

const NEVER: u64 = u64::MAX;

struct NodeState {
    queue: VecDeque<TrackedPacket>,
    seen: BitSet,
    /// Sender a packet key arrived from, indexed by key; NO_SENDER for
    /// self-generated packets.
    last_from: Vec<u32>,
    /// Most recent slot each neighbor delivered anything to this node's port.
    last_heard: Vec<u64>,
    decoders: HashMap<MessageId, DecoderState>,
}

impl NodeState {
    fn new(num_nodes: usize) -> Self {
        NodeState {
            queue: VecDeque::new(),
            seen: BitSet::new(),
            last_from: Vec::new(),
            last_heard: vec![NEVER; num_nodes],
            decoders: HashMap::new(),
        }
    }

    fn set_last_from(&mut self, key: PacketKey, sender: u32) {
        let index = key as usize;
        if index >= self.last_from.len() {
            self.last_from.resize(index + 1, NO_SENDER);
        }
        self.last_from[index] = sender;
    }

    fn last_from(&self, key: PacketKey) -> u32 {
        self.last_from
            .get(key as usize)
            .copied()
            .unwrap_or(NO_SENDER)
    }
}

struct World<'a> {
    network: &'a Network,
    policy: ArrivalPolicy,
    suppression: u64,
    destinations_relay_foreign: bool,
    nodes: Vec<NodeState>,
    in_flight: BTreeMap<u64, Vec<InFlight>>,
    /// Flow index a node is a destination of, if any.
    dest_flow: Vec<Option<usize>>,
    keys: HashMap<PacketIdentity, PacketKey>,
    pending_decodes: usize,
    record: SimulationRecord,
}

impl<'a> World<'a> {
    fn new(network: &'a Network, flows: &[FlowSpec], config: &EngineConfig) -> Self {
        let v = network.num_nodes();
        let mut nodes: Vec<NodeState> = (0..v).map(|_| NodeState::new(v)).collect();
        let mut dest_flow = vec![None; v];
        let mut pending_decodes = 0;
        for (i, flow) in flows.iter().enumerate() {
            for &d in &flow.destinations {
                dest_flow[d] = Some(i);
                nodes[d]
                    .decoders
                    .insert(flow.message_id, DecoderState::new(flow.message_id, flow.k));
                pending_decodes += 1;
            }
        }
        World {
            network,
            policy: config.arrival_policy,
            suppression: config.reverse_suppression_slots,
            destinations_relay_foreign: config.destinations_relay_foreign,
            nodes,
            in_flight: BTreeMap::new(),
            dest_flow,
            keys: HashMap::new(),
            pending_decodes,
            record: SimulationRecord {
                num_nodes: v,
                horizon: 0,
                deliveries: Vec::new(),
                decode_events: Vec::new(),
                queue_series: vec![Vec::new(); v],
                first_arrivals: config
                    .record_first_arrivals
                    .then(|| vec![HashMap::new(); v]),
                counters: Counters::default(),
            },
        }
    }

    fn key_for(&mut self, packet: &CodedPacket) -> PacketKey {
        let next = self.keys.len() as PacketKey;
        *self.keys.entry(packet.identity()).or_insert(next)
    }

    fn note_first_arrival(&mut self, node: NodeId, key: PacketKey, slot: u64) {
        if let Some(per_node) = &mut self.record.first_arrivals {
            per_node[node].entry(key).or_insert(slot);
        }
    }

    fn step(&mut self, slot: u64, arrivals: Vec<(NodeId, CodedPacket)>) {
        // Phase 1: freshly generated packets join their source's queue.
        for (source, packet) in arrivals {
            self.record.counters.generated += 1;
            let key = self.key_for(&packet);
            if self.nodes[source].seen.contains(key) {
                // Coefficient collision with an earlier generation.
                self.record.counters.duplicate_discards += 1;
                continue;
            }
            self.nodes[source].seen.insert(key);
            self.note_first_arrival(source, key, slot);
            self.nodes[source]
                .queue
                .push_back(TrackedPacket { key, packet });
        }

        // Phase 2: resolve this slot's arrivals, one admission per receiver
        // under Drop, all of them under Defer. Same-slot ties go to the
        // lowest sender id.
        let mut landing = self.in_flight.remove(&slot).unwrap_or_default();
        landing.sort_by_key(|f| (f.receiver, f.sender));
        for flight in &landing {
            self.nodes[flight.receiver].last_heard[flight.sender] = slot;
        }
        let mut flights = landing.into_iter().peekable();
        while let Some(first) = flights.next() {
            let receiver = first.receiver;
            match self.policy {
                ArrivalPolicy::Drop => {
                    self.admit(slot, first);
                    while flights.peek().is_some_and(|f| f.receiver == receiver) {
                        flights.next();
                        self.record.counters.port_drops += 1;
                    }
                }
                ArrivalPolicy::Defer => {
                    self.admit(slot, first);
                    while flights.peek().is_some_and(|f| f.receiver == receiver) {
                        let flight = flights.next().expect("peeked");
                        self.admit(slot, flight);
                    }
                }
            }
        }

        // Phase 3: every busy node dequeues one packet and broadcasts it on
        // all links except the one it arrived on and any link it heard from
        // within the suppression window.
        for node in 0..self.nodes.len() {
            let Some(tracked) = self.nodes[node].queue.pop_front() else {
                continue;
            };
            self.record.counters.transmissions += 1;
            let blocked = self.nodes[node].last_from(tracked.key);
            let relaying = tracked.packet.origin != node;
            for &(neighbor, weight) in self.network.neighbors(node) {
                if neighbor as u32 == blocked {
                    continue;
                }
                let heard = self.nodes[node].last_heard[neighbor];
                if relaying
                    && self.suppression > 0
                    && heard != NEVER
                    && slot - heard < self.suppression
                {
                    continue;
                }
                self.record.counters.in_flight_created += 1;
                self.in_flight
                    .entry(slot + weight as u64)
                    .or_default()
                    .push(InFlight {
                        packet: tracked.clone(),
                        sender: node,
                        receiver: neighbor,
                    });
            }
        }

        // End of slot: sample queue lengths.
        for (node, state) in self.nodes.iter().enumerate() {
            self.record.queue_series[node].push(state.queue.len() as u32);
        }
        self.record.horizon = slot + 1;
    }

    fn admit(&mut self, slot: u64, mut flight: InFlight) {
        let receiver = flight.receiver;
        let key = flight.packet.key;
        if self.nodes[receiver].seen.contains(key) {
            self.record.counters.duplicate_discards += 1;
            return;
        }
        self.nodes[receiver].seen.insert(key);
        self.nodes[receiver].set_last_from(key, flight.sender as u32);
        flight.packet.packet.trace.push(receiver);
        self.note_first_arrival(receiver, key, slot);

        let message_id = flight.packet.packet.message_id;
        let is_destination = self.dest_flow[receiver].is_some();
        let mut own_message = false;
        if is_destination {
            if let Some(decoder) = self.nodes[receiver].decoders.get_mut(&message_id) {
                own_message = true;
                self.record.deliveries.push(Delivery {
                    packet: key,
                    message_id,
                    origin: flight.packet.packet.origin,
                    destination: receiver,
                    created_slot: flight.packet.packet.created_slot,
                    arrived_slot: slot,
                    hops: flight.packet.packet.trace.clone(),
                });
                let was_complete = decoder.is_complete();
                decoder
                    .absorb(&flight.packet.packet)
                    .expect("flow packets share the flow's division count");
                if !was_complete && decoder.is_complete() {
                    self.pending_decodes -= 1;
                    self.record.decode_events.push(DecodeEvent {
                        destination: receiver,
                        message_id,
                        slot,
                    });
                }
            }
        }
        if is_destination && !own_message && !self.destinations_relay_foreign {
            // Destinations consume foreign-message traffic instead of
            // volunteering as relays for it; the packet stays marked seen.
            return;
        }
        self.nodes[receiver].queue.push_back(flight.packet);
    }

    fn all_decoded(&self) -> bool {
        self.pending_decodes == 0
    }

    fn quiescent(&self) -> bool {
        self.in_flight.is_empty() && self.nodes.iter().all(|n| n.queue.is_empty())
    }
}

/// Run the broadcast simulation for `flows` over `network`.
///
/// Deterministic: identical (network, flows, config, seed) produce identical
/// records.
pub fn run(
    network: &Network,
    flows: &[FlowSpec],
    config: &EngineConfig,
    seed: u64,
) -> SimulationRecord {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traffic = ArrivalProcess::new(flows, config.payload_len, rng);
    let mut world = World::new(network, flows, config);
    for slot in 0..config.max_slots {
        world.step(slot, traffic.sample_arrivals(slot));
        if config.stop_when_decoded && world.all_decoded() {
            break;
        }
    }
    world.record
}

/// Flood a single packet from an idle network and report each node's first
/// arrival slot. The propagation-delay oracle for Theorem-style checks.
pub fn single_packet_first_arrivals(
    network: &Network,
    source: NodeId,
    max_slots: u64,
) -> Vec<Option<u64>> {
    let message = SourceMessage::new(MessageId(0), vec![Vec::new()]).expect("K=1 message");
    let packet = CodedPacket {
        message_id: message.message_id,
        coefficients: vec![Gf256::ONE],
        payload: Vec::new(),
        origin: source,
        created_slot: 0,
        trace: vec![source],
    };
    let config = EngineConfig {
        record_first_arrivals: true,
        ..EngineConfig::default()
    };
    let mut world = World::new(network, &[], &config);
    world.step(0, vec![(source, packet)]);
    for slot in 1..max_slots {
        if world.quiescent() {
            break;
        }
        world.step(slot, Vec::new());
    }
    let per_node = world.record.first_arrivals.expect("recording enabled");
    per_node
        .into_iter()
        .map(|m| m.get(&0).copied())
        .collect()
}

/// deliveries.csv: one row per first arrival at a destination.
pub fn write_deliveries_csv<W: Write>(record: &SimulationRecord, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "packet_id,message_id,origin,destination,created_slot,arrived_slot,decoded_slot,hops"
    )?;
    for d in &record.deliveries {
        let decoded = record
            .decode_slot(d.destination, d.message_id)
            .map_or(String::new(), |s| s.to_string());
        let hops = d
            .hops
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join("-");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.packet,
            d.message_id,
            d.origin,
            d.destination,
            d.created_slot,
            d.arrived_slot,
            decoded,
            hops
        )?;
    }
    Ok(())
}

/// queues.csv: queue length per node, subsampled every `subsample` slots.
pub fn write_queues_csv<W: Write>(
    record: &SimulationRecord,
    subsample: u64,
    out: &mut W,
) -> io::Result<()> {
    let step = subsample.max(1);
    writeln!(out, "slot,node,queue_len")?;
    for slot in (0..record.horizon).step_by(step as usize) {
        for (node, series) in record.queue_series.iter().enumerate() {
            writeln!(out, "{},{},{}", slot, node, series[slot as usize])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::special_case_network;

    fn line_network() -> Network {
        Network::new(2, vec![(0, 1, 1)]).unwrap()
    }

    fn one_shot_flow(k: usize) -> FlowSpec {
        FlowSpec::new(MessageId(1), vec![0], vec![1], k, vec![1.0]).unwrap()
    }

    #[test]
    fn one_hop_propagation() {
        let net = line_network();
        let arrivals = single_packet_first_arrivals(&net, 0, 100);
        assert_eq!(arrivals, vec![Some(0), Some(1)]);
    }

    #[test]
    fn no_send_back_over_arrival_link() {
        // A single packet on a line: a transmits once, b never returns it.
        let net = line_network();
        let message = SourceMessage::new(MessageId(0), vec![Vec::new()]).unwrap();
        let packet = CodedPacket {
            message_id: message.message_id,
            coefficients: vec![Gf256::ONE],
            payload: Vec::new(),
            origin: 0,
            created_slot: 0,
            trace: vec![0],
        };
        let config = EngineConfig::default();
        let mut world = World::new(&net, &[], &config);
        world.step(0, vec![(0, packet)]);
        for slot in 1..10 {
            world.step(slot, Vec::new());
        }
        // One in-flight copy total: a -> b. b's rebroadcast has nowhere to go.
        assert_eq!(world.record.counters.in_flight_created, 1);
        assert_eq!(world.record.counters.transmissions, 2);
        assert!(world.quiescent());
    }

    #[test]
    fn triangle_duplicate_suppression() {
        let net = Network::new(3, vec![(0, 1, 1), (0, 2, 1), (1, 2, 1)]).unwrap();
        let arrivals = single_packet_first_arrivals(&net, 0, 100);
        assert_eq!(arrivals, vec![Some(0), Some(1), Some(1)]);
    }

    #[test]
    fn zero_rate_leaves_network_idle() {
        let net = line_network();
        let flow = FlowSpec::new(MessageId(1), vec![0], vec![1], 2, vec![0.0]).unwrap();
        let config = EngineConfig {
            max_slots: 2000,
            ..EngineConfig::default()
        };
        let record = run(&net, &[flow], &config, 1);
        assert!(record.deliveries.is_empty());
        assert_eq!(record.counters.generated, 0);
        assert!(record.queue_series.iter().all(|s| s.iter().all(|&q| q == 0)));
        assert_eq!(measure_queue_growth(&record, 0).unwrap(), 0.0);
    }

    #[test]
    fn unit_rate_line_delivers_every_slot() {
        let net = line_network();
        let config = EngineConfig {
            max_slots: 50,
            ..EngineConfig::default()
        };
        let record = run(&net, &[one_shot_flow(4)], &config, 3);
        // Packet generated at slot t arrives at slot t+1; all delivered.
        assert!(record.deliveries.len() >= 48);
        for d in &record.deliveries {
            assert_eq!(d.arrived_slot - d.created_slot, 1);
            assert_eq!(d.hops, vec![0, 1]);
        }
        let delay = measure_average_delay(&record, &[0], 1).unwrap();
        assert_eq!(delay, 1.0);
    }

    #[test]
    fn decode_completes_at_rank_k() {
        let net = line_network();
        let config = EngineConfig {
            max_slots: 100,
            stop_when_decoded: true,
            ..EngineConfig::default()
        };
        let record = run(&net, &[one_shot_flow(4)], &config, 5);
        let decode = record.decode_slot(1, MessageId(1)).expect("decoded");
        // Four innovative packets at one per slot, first arrival at slot 1.
        assert_eq!(decode, 4);
        assert_eq!(record.horizon, 5);
    }

    #[test]
    fn tie_break_prefers_lowest_sender() {
        // Sources 0 and 1 both feed node 2; their slot-0 packets collide at
        // slot 1. Under Drop only the packet from node 0 survives.
        let net = Network::new(3, vec![(0, 2, 1), (1, 2, 1)]).unwrap();
        let flows = [
            FlowSpec::new(MessageId(1), vec![0], vec![2], 1, vec![1.0]).unwrap(),
            FlowSpec::new(MessageId(2), vec![1], vec![2], 1, vec![1.0]).unwrap(),
        ];
        let config = EngineConfig {
            max_slots: 2,
            ..EngineConfig::default()
        };
        let record = run(&net, &flows, &config, 1);
        let slot1: Vec<_> = record.deliveries.iter().filter(|d| d.arrived_slot == 1).collect();
        assert_eq!(slot1.len(), 1);
        assert_eq!(slot1[0].origin, 0);
        assert!(record.counters.port_drops >= 1);

        let defer = EngineConfig {
            max_slots: 2,
            arrival_policy: ArrivalPolicy::Defer,
            ..EngineConfig::default()
        };
        let record = run(&net, &flows, &defer, 1);
        let slot1: Vec<_> = record.deliveries.iter().filter(|d| d.arrived_slot == 1).collect();
        assert_eq!(slot1.len(), 2);
        assert_eq!(record.counters.port_drops, 0);
    }

    #[test]
    fn fifo_service_order() {
        // Under Defer, two packets admitted in one slot depart in admission
        // order on the next hops.
        let net = Network::new(4, vec![(0, 2, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        let flows = [
            FlowSpec::new(MessageId(1), vec![0], vec![3], 1, vec![1.0]).unwrap(),
            FlowSpec::new(MessageId(2), vec![1], vec![3], 1, vec![1.0]).unwrap(),
        ];
        let config = EngineConfig {
            max_slots: 4,
            arrival_policy: ArrivalPolicy::Defer,
            ..EngineConfig::default()
        };
        let record = run(&net, &flows, &config, 1);
        let mut at3: Vec<_> = record
            .deliveries
            .iter()
            .filter(|d| d.destination == 3 && d.created_slot == 0)
            .collect();
        at3.sort_by_key(|d| d.arrived_slot);
        assert_eq!(at3.len(), 2);
        // Node 0's packet was admitted first at node 2, so it departs first.
        assert_eq!(at3[0].origin, 0);
        assert_eq!(at3[0].arrived_slot, 2);
        assert_eq!(at3[1].origin, 1);
        assert_eq!(at3[1].arrived_slot, 3);
    }

    #[test]
    fn deterministic_records() {
        let (net, flows) = special_case_network();
        let config = EngineConfig {
            max_slots: 2000,
            ..EngineConfig::default()
        };
        let a = run(&net, &flows, &config, 42);
        let b = run(&net, &flows, &config, 42);
        assert_eq!(a.deliveries.len(), b.deliveries.len());
        for (x, y) in a.deliveries.iter().zip(&b.deliveries) {
            assert_eq!(x.packet, y.packet);
            assert_eq!(x.arrived_slot, y.arrived_slot);
            assert_eq!(x.hops, y.hops);
        }
        assert_eq!(a.queue_series, b.queue_series);
        assert_eq!(a.counters.generated, b.counters.generated);
    }

    #[test]
    fn queue_conservation_under_drop() {
        // Per slot a node admits at most one packet, generates at most one,
        // and serves at most one: the queue moves by at most +2 / -1.
        let (net, flows) = special_case_network();
        let config = EngineConfig {
            max_slots: 3000,
            ..EngineConfig::default()
        };
        let record = run(&net, &flows, &config, 7);
        for series in &record.queue_series {
            let mut prev = 0i64;
            for &q in series {
                let delta = q as i64 - prev;
                assert!((-1..=2).contains(&delta), "delta {delta}");
                prev = q as i64;
            }
        }
    }

    #[test]
    fn average_delay_arithmetic() {
        let record = SimulationRecord {
            num_nodes: 2,
            horizon: 10,
            deliveries: vec![
                Delivery {
                    packet: 0,
                    message_id: MessageId(1),
                    origin: 0,
                    destination: 1,
                    created_slot: 3,
                    arrived_slot: 8,
                    hops: vec![0, 1],
                },
                Delivery {
                    packet: 1,
                    message_id: MessageId(1),
                    origin: 0,
                    destination: 1,
                    created_slot: 10,
                    arrived_slot: 14,
                    hops: vec![0, 1],
                },
            ],
            decode_events: Vec::new(),
            queue_series: vec![Vec::new(), Vec::new()],
            first_arrivals: None,
            counters: Counters::default(),
        };
        let one = measure_average_delay_after(&record, &[0], 1, 10).unwrap();
        assert_eq!(one, 4.0);
        let both = measure_average_delay(&record, &[0], 1).unwrap();
        assert_eq!(both, 4.5);
        assert!(matches!(
            measure_average_delay(&record, &[1], 0),
            Err(EngineError::NoDeliveries { .. })
        ));
    }

    #[test]
    fn queue_growth_requires_horizon() {
        let record = SimulationRecord {
            num_nodes: 1,
            horizon: 500,
            deliveries: Vec::new(),
            decode_events: Vec::new(),
            queue_series: vec![vec![0; 500]],
            first_arrivals: None,
            counters: Counters::default(),
        };
        assert!(matches!(
            measure_queue_growth(&record, 0),
            Err(EngineError::InsufficientHorizon { .. })
        ));
    }

    #[test]
    fn csv_exports_are_well_formed() {
        let net = line_network();
        let config = EngineConfig {
            max_slots: 20,
            ..EngineConfig::default()
        };
        let record = run(&net, &[one_shot_flow(2)], &config, 9);
        let mut deliveries = Vec::new();
        write_deliveries_csv(&record, &mut deliveries).unwrap();
        let text = String::from_utf8(deliveries).unwrap();
        assert!(text.starts_with("packet_id,message_id,origin"));
        assert_eq!(text.lines().count(), record.deliveries.len() + 1);

        let mut queues = Vec::new();
        write_queues_csv(&record, 5, &mut queues).unwrap();
        let text = String::from_utf8(queues).unwrap();
        // 20 slots sampled every 5 -> 4 sample points x 2 nodes + header.
        assert_eq!(text.lines().count(), 9);
    }
}
