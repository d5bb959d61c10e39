//! Temporary exploration: special-case dynamics across the sweep grid.

use rncast::topology::special_case_nodes::*;
use rncast::*;

fn tail_delay(record: &SimulationRecord, s: NodeId, d: NodeId) -> (f64, f64, usize) {
    let horizon = record.horizon;
    let tail_start = horizon * 3 / 4;
    let all: Vec<u64> = record
        .deliveries
        .iter()
        .filter(|x| x.origin == s && x.destination == d)
        .map(|x| x.arrived_slot - x.created_slot)
        .collect();
    let tail: Vec<u64> = record
        .deliveries
        .iter()
        .filter(|x| x.origin == s && x.destination == d && x.arrived_slot >= tail_start)
        .map(|x| x.arrived_slot - x.created_slot)
        .collect();
    let mean = |v: &[u64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<u64>() as f64 / v.len() as f64
        }
    };
    (mean(&all), mean(&tail), all.len())
}

fn main() {
    let (net, mut flows) = special_case_network();
    for f in flows.iter_mut() {
        f.k = 8;
    }
    for (policy, window) in [
        (ArrivalPolicy::Defer, 8),
        (ArrivalPolicy::Defer, 16),
        (ArrivalPolicy::Defer, 32),
        (ArrivalPolicy::Defer, 64),
    ] {
        println!("=== policy {:?} window {} ===", policy, window);
        for lambda_sum in [0.6, 0.9, 1.2, 1.5] {
            let rate = lambda_sum / 3.0;
            for f in flows.iter_mut() {
                f.rates = vec![rate];
            }
            let config = EngineConfig {
                max_slots: 50_000,
                arrival_policy: policy,
                reverse_suppression_slots: window,
                ..EngineConfig::default()
            };
            let record = run(&net, &flows, &config, 1);
            print!("L={lambda_sum:.1} ");
            for (s, d, tag) in [(S1, D1, "s1d1"), (S2, D2, "s2d2"), (S3, D3, "s3d3")] {
                let (mean, tail, n) = tail_delay(&record, s, d);
                print!("{tag}: mean {mean:7.2} tail {tail:8.2} n {n:5}  ");
            }
            let probes: Vec<String> = [S1, S2, S3, N1, N2, N3]
                .iter()
                .map(|&n| format!("{:.3}", measure_queue_growth(&record, n).unwrap()))
                .collect();
            println!("| probes s1,s2,s3,n1,n2,n3 = {}", probes.join(","));
        }
    }
}
