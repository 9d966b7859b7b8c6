use std::collections::BTreeMap;

use copulse::counting::run_phased_count;
use copulse::exchange::run_msg_exchange;
use copulse::primitives::run_compute_or;
use copulse::sim::{Direction, EventKind, RunOptions, SchedulerPolicy, TraceEvent};
use copulse::{BitMessage, RingConfig};
use proptest::prelude::*;

fn policy() -> impl Strategy<Value = SchedulerPolicy> {
    prop_oneof![
        any::<u64>().prop_map(SchedulerPolicy::random),
        Just(SchedulerPolicy::fifo()),
        Just(SchedulerPolicy::lifo()),
    ]
}

fn check_trace(trace: &[TraceEvent], total: u64) -> Result<(), TestCaseError> {
    let sends = trace.iter().filter(|e| e.kind == EventKind::Send).count() as u64;
    let delivers = trace.iter().filter(|e| e.kind == EventKind::Deliver).count() as u64;
    prop_assert_eq!(sends, total);
    prop_assert_eq!(delivers, total);
    let mut queues: BTreeMap<(usize, Direction), Vec<u64>> = BTreeMap::new();
    for (i, e) in trace.iter().enumerate() {
        prop_assert_eq!(e.seq, i as u64);
        let q = queues.entry((e.link, e.direction)).or_default();
        match e.kind {
            EventKind::Send => q.push(e.pulse),
            EventKind::Deliver => {
                prop_assert!(!q.is_empty(), "delivery before send");
                prop_assert_eq!(q.remove(0), e.pulse, "out of order on link {}", e.link);
            }
        }
    }
    prop_assert!(queues.values().all(Vec::is_empty));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_and_fifo(n in 2usize..9, leader_seed in any::<usize>(), inputs in prop::collection::vec(any::<bool>(), 8), policy in policy()) {
        let cfg = RingConfig::new(n, leader_seed % n);
        let out = run_compute_or(&cfg, &inputs[..n], policy, &RunOptions::default()).unwrap();
        prop_assert!(out.quiescent);
        prop_assert_eq!(out.sum_edge_pulses(), out.total_pulses);
        check_trace(&out.trace, out.total_pulses)?;
    }

    #[test]
    fn counting_trace_is_fifo(n in 2usize..24, seed in any::<u64>()) {
        let out = run_phased_count(&RingConfig::new(n, 0), SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
        prop_assert_eq!(out.sum_edge_pulses(), out.total_pulses);
        check_trace(&out.trace, out.total_pulses)?;
    }

    #[test]
    fn determinism(n in 2usize..12, seed in any::<u64>()) {
        let cfg = RingConfig::new(n, n - 1);
        let a = run_phased_count(&cfg, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
        let b = run_phased_count(&cfg, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.outputs, b.outputs);
    }

    #[test]
    fn tags_are_invisible(n in 2usize..8, seed in any::<u64>(), raw in prop::collection::vec((0u64..16, 0u64..16), 8)) {
        let cfg = RingConfig::new(n, 0);
        let msgs: Vec<_> = raw[..n].iter().map(|&(a, b)| Some((BitMessage::from_uint(a), BitMessage::from_uint(b)))).collect();
        let tagged = run_msg_exchange(&cfg, &msgs, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
        let erased = RunOptions { erase_tags: true, ..RunOptions::default() };
        let plain = run_msg_exchange(&cfg, &msgs, SchedulerPolicy::random(seed), &erased).unwrap();
        prop_assert_eq!(tagged.outputs, plain.outputs);
        prop_assert_eq!(tagged.edge_pulses, plain.edge_pulses);
        prop_assert_eq!(tagged.steps, plain.steps);
    }
}
