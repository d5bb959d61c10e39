//! Flow specifications and Bernoulli packet generation at the sources.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coding::{encode, CodedPacket, MessageId, SourceMessage};
use crate::topology::NodeId;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("flow {0}: {1}")]
    InvalidFlow(MessageId, String),
    #[error("flows share {0} node {1}")]
    OverlappingFlows(&'static str, NodeId),
}

/// One message's transmission plan: which sources emit it, at what rates,
/// toward which destinations, divided into K coded packets.
#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub message_id: MessageId,
    pub sources: Vec<NodeId>,
    pub destinations: Vec<NodeId>,
    pub k: usize,
    /// Per-source generation rate, parallel to `sources`.
    pub rates: Vec<f64>,
}

impl FlowSpec {
    pub fn new(
        message_id: MessageId,
        sources: Vec<NodeId>,
        destinations: Vec<NodeId>,
        k: usize,
        rates: Vec<f64>,
    ) -> Result<Self, TrafficError> {
        let err = |msg: String| Err(TrafficError::InvalidFlow(message_id, msg));
        if sources.is_empty() {
            return err("no sources".into());
        }
        if destinations.is_empty() {
            return err("no destinations".into());
        }
        if k == 0 {
            return err("division count must be at least 1".into());
        }
        if rates.len() != sources.len() {
            return err(format!("{} rates for {} sources", rates.len(), sources.len()));
        }
        if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return err(format!("rate {r} outside [0, 1]"));
        }
        if sources.iter().any(|s| destinations.contains(s)) {
            return err("sources and destinations intersect".into());
        }
        Ok(FlowSpec {
            message_id,
            sources,
            destinations,
            k,
            rates,
        })
    }

    /// The message generation rate: the sum of the per-source rates. May
    /// exceed one when several sources emit the same message.
    pub fn message_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn rate_of(&self, source: NodeId) -> Option<f64> {
        self.sources
            .iter()
            .position(|&s| s == source)
            .map(|i| self.rates[i])
    }
}

/// Distinct flows must not share sources, destinations, or roles.
pub fn validate_flows(flows: &[FlowSpec]) -> Result<(), TrafficError> {
    let mut sources: Vec<NodeId> = Vec::new();
    let mut destinations: Vec<NodeId> = Vec::new();
    for flow in flows {
        for &s in &flow.sources {
            if sources.contains(&s) {
                return Err(TrafficError::OverlappingFlows("source", s));
            }
            sources.push(s);
        }
        for &d in &flow.destinations {
            if destinations.contains(&d) {
                return Err(TrafficError::OverlappingFlows("destination", d));
            }
            destinations.push(d);
        }
    }
    if let Some(&n) = sources.iter().find(|s| destinations.contains(s)) {
        return Err(TrafficError::OverlappingFlows("role", n));
    }
    Ok(())
}

struct FlowState {
    spec: FlowSpec,
    message: SourceMessage,
}

/// Seeded per-slot Bernoulli arrivals: each source independently emits one
/// freshly encoded packet of its flow's message with probability lambda_s.
pub struct ArrivalProcess {
    flows: Vec<FlowState>,
    rng: ChaCha8Rng,
}

impl ArrivalProcess {
    /// `payload_len` sizes the backing message payloads; simulation metrics
    /// only depend on the coefficient vectors, so small payloads are fine.
    pub fn new(flows: &[FlowSpec], payload_len: usize, mut rng: ChaCha8Rng) -> Self {
        let flows = flows
            .iter()
            .map(|spec| FlowState {
                message: SourceMessage::random(spec.message_id, spec.k, payload_len, &mut rng),
                spec: spec.clone(),
            })
            .collect();
        ArrivalProcess { flows, rng }
    }

    /// All packets generated in `slot`, in deterministic (flow, source) order.
    pub fn sample_arrivals(&mut self, slot: u64) -> Vec<(NodeId, CodedPacket)> {
        let mut out = Vec::new();
        for flow in &self.flows {
            for (&source, &rate) in flow.spec.sources.iter().zip(&flow.spec.rates) {
                if rate > 0.0 && self.rng.gen_bool(rate) {
                    out.push((source, encode(&flow.message, source, slot, &mut self.rng)));
                }
            }
        }
        out
    }

    pub fn message(&self, message_id: MessageId) -> Option<&SourceMessage> {
        self.flows
            .iter()
            .find(|f| f.spec.message_id == message_id)
            .map(|f| &f.message)
    }

    pub fn has_traffic(&self) -> bool {
        self.flows
            .iter()
            .any(|f| f.spec.rates.iter().any(|&r| r > 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn flow(id: u32, source: NodeId, rate: f64) -> FlowSpec {
        FlowSpec::new(MessageId(id), vec![source], vec![source + 10], 4, vec![rate]).unwrap()
    }

    fn process(flows: &[FlowSpec], seed: u64) -> ArrivalProcess {
        ArrivalProcess::new(flows, 4, ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn zero_rate_never_emits() {
        let mut p = process(&[flow(1, 0, 0.0)], 1);
        for slot in 0..1000 {
            assert!(p.sample_arrivals(slot).is_empty());
        }
    }

    #[test]
    fn unit_rate_emits_every_slot() {
        let mut p = process(&[flow(1, 0, 1.0)], 2);
        for slot in 0..1000 {
            let arrivals = p.sample_arrivals(slot);
            assert_eq!(arrivals.len(), 1);
            assert_eq!(arrivals[0].0, 0);
            assert_eq!(arrivals[0].1.created_slot, slot);
            assert_eq!(arrivals[0].1.trace, vec![0]);
        }
    }

    #[test]
    fn empirical_rate_tracks_lambda() {
        let mut p = process(&[flow(1, 0, 0.3)], 3);
        let slots = 100_000;
        let mut count = 0usize;
        for slot in 0..slots {
            count += p.sample_arrivals(slot).len();
        }
        let rate = count as f64 / slots as f64;
        assert!((0.294..=0.306).contains(&rate), "rate {rate}");
    }

    #[test]
    fn sources_are_pairwise_independent() {
        // Chi-square on the 2x2 contingency table of two 0.5-rate sources.
        let specs = [flow(1, 0, 0.5), flow(2, 1, 0.5)];
        let mut p = process(&specs, 4);
        let slots = 50_000usize;
        let mut counts = [[0f64; 2]; 2];
        for slot in 0..slots {
            let arrivals = p.sample_arrivals(slot as u64);
            let a = arrivals.iter().any(|(s, _)| *s == 0) as usize;
            let b = arrivals.iter().any(|(s, _)| *s == 1) as usize;
            counts[a][b] += 1.0;
        }
        let n = slots as f64;
        let mut chi2 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let row: f64 = counts[a][0] + counts[a][1];
                let col: f64 = counts[0][b] + counts[1][b];
                let expected = row * col / n;
                chi2 += (counts[a][b] - expected).powi(2) / expected;
            }
        }
        // One degree of freedom; 11.34 is the 99.9th percentile.
        assert!(chi2 < 11.34, "chi2 = {chi2}");
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let specs = [flow(1, 0, 0.4), flow(2, 1, 0.7)];
        let mut a = process(&specs, 9);
        let mut b = process(&specs, 9);
        for slot in 0..500 {
            let xs = a.sample_arrivals(slot);
            let ys = b.sample_arrivals(slot);
            assert_eq!(xs.len(), ys.len());
            for ((sx, px), (sy, py)) in xs.iter().zip(&ys) {
                assert_eq!(sx, sy);
                assert_eq!(px.identity(), py.identity());
                assert_eq!(px.payload, py.payload);
            }
        }
    }

    #[test]
    fn message_rate_sums_sources() {
        let single = flow(1, 0, 0.4);
        assert!((single.message_rate() - 0.4).abs() < 1e-12);
        let multi = FlowSpec::new(
            MessageId(2),
            vec![0, 1, 2],
            vec![9],
            4,
            vec![0.5, 0.5, 0.5],
        )
        .unwrap();
        assert!((multi.message_rate() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_flows_rejected() {
        assert!(FlowSpec::new(MessageId(1), vec![], vec![1], 4, vec![]).is_err());
        assert!(FlowSpec::new(MessageId(1), vec![0], vec![], 4, vec![0.5]).is_err());
        assert!(FlowSpec::new(MessageId(1), vec![0], vec![1], 0, vec![0.5]).is_err());
        assert!(FlowSpec::new(MessageId(1), vec![0], vec![1], 4, vec![1.5]).is_err());
        assert!(FlowSpec::new(MessageId(1), vec![0], vec![0], 4, vec![0.5]).is_err());
    }

    #[test]
    fn overlapping_flow_sets_rejected() {
        let a = flow(1, 0, 0.5);
        let shares_source = flow(2, 0, 0.5);
        assert!(matches!(
            validate_flows(&[a.clone(), shares_source]),
            Err(TrafficError::OverlappingFlows("source", 0))
        ));
        let b = FlowSpec::new(MessageId(3), vec![10], vec![5], 4, vec![0.5]).unwrap();
        let c = FlowSpec::new(MessageId(4), vec![5], vec![11], 4, vec![0.5]).unwrap();
        assert!(validate_flows(&[a, b, c]).is_err());
    }
}
