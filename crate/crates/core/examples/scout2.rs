//! Temporary: trace per-sender admission composition at specific nodes.

use rncast::topology::special_case_nodes::*;
use rncast::*;

fn main() {
    let (net, mut flows) = special_case_network();
    for f in flows.iter_mut() {
        f.k = 8;
        f.rates = vec![0.5];
    }
    let config = EngineConfig {
        max_slots: 20_000,
        arrival_policy: ArrivalPolicy::Defer,
        reverse_suppression_slots: 64,
        ..EngineConfig::default()
    };
    let record = run(&net, &flows, &config, 1);
    // Deliveries at d1 tell us the winning path per packet.
    let mut via = std::collections::BTreeMap::new();
    for d in record.deliveries.iter().filter(|d| d.destination == D1) {
        let prev = d.hops[d.hops.len() - 2];
        *via.entry(prev).or_insert(0usize) += 1;
    }
    println!("d1 first-arrival predecessor counts: {via:?}");
    let mut via3 = std::collections::BTreeMap::new();
    for d in record.deliveries.iter().filter(|d| d.destination == D3) {
        let prev = d.hops[d.hops.len() - 2];
        *via3.entry(prev).or_insert(0usize) += 1;
    }
    println!("d3 first-arrival predecessor counts: {via3:?}");
    // Histogram of full hop traces into d1 (top 8).
    let mut traces = std::collections::HashMap::new();
    for d in record.deliveries.iter().filter(|d| d.destination == D1) {
        let key = d
            .hops
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join(">");
        *traces.entry(key).or_insert(0usize) += 1;
    }
    let mut top: Vec<_> = traces.into_iter().collect();
    top.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
    for (t, c) in top.iter().take(8) {
        println!("d1 trace {t}: {c}");
    }
    for n in [S1, S2, S3, N1, N2, N3, D1, D2, D3] {
        println!(
            "node {n} final queue len {}",
            record.queue_series[n][record.horizon as usize - 1]
        );
    }
}
