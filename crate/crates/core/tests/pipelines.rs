//! End-to-end uses that chain several protocols.

use std::rc::Rc;

use copulse::aggregation::{run_aggregate, Max, Sum};
use copulse::counting::run_phased_count;
use copulse::graph::{round_oracle, run_graph_round, GraphTopology, Mailbox, SimulationPlan};
use copulse::minfind::{run_multiset, MultisetResult};
use copulse::ring::assign_ids_from_distances;
use copulse::sim::{write_trace, RunOptions, SchedulerPolicy, TraceEvent};
use copulse::{BitMessage, RingConfig};

/// An anonymous ring names itself by counting, then uses the names to
/// aggregate.
#[test]
fn anonymous_ring_names_itself_then_aggregates() {
    let inputs = vec![3, 14, 1, 5, 9, 2, 6];
    let n = inputs.len();
    let anon = RingConfig::new(n, 4).with_inputs(inputs.clone());
    let counted = run_phased_count(&anon, SchedulerPolicy::random(11), &RunOptions::quiet()).unwrap();
    let distances: Vec<usize> = counted.unwrap_outputs().iter().map(|o| o.distance as usize).collect();
    let named = assign_ids_from_distances(&anon, &distances).unwrap();
    assert_eq!(named.ids.as_deref(), Some(&[3, 4, 5, 6, 0, 1, 2][..]));

    let sum = run_aggregate(&named, Sum, SchedulerPolicy::random(12), &RunOptions::quiet()).unwrap();
    assert!(sum.unwrap_outputs().iter().all(|o| o.value == 40));
    let max = run_aggregate(&named, Max, SchedulerPolicy::lifo(), &RunOptions::quiet()).unwrap();
    assert!(max.unwrap_outputs().iter().all(|o| o.value == 14));
    let multiset = run_multiset(&named, SchedulerPolicy::fifo(), &RunOptions::quiet()).unwrap();
    assert!(multiset.unwrap_outputs().iter().all(|m| *m == MultisetResult::tally(&inputs)));
}

#[test]
fn trace_round_trips_through_json_lines() {
    let out = run_phased_count(&RingConfig::new(5, 0), SchedulerPolicy::random(1), &RunOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_trace(&out.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let back: Vec<TraceEvent> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, out.trace);
    assert!(text.lines().next().unwrap().contains("\"kind\":\"send\""));
}

#[test]
fn graph_round_on_petersen() {
    let outer = (0..5).map(|i| (i, (i + 1) % 5));
    let spokes = (0..5).map(|i| (i, i + 5));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
    let g = GraphTopology::new(10, outer.chain(spokes).chain(inner).collect()).unwrap();
    let plan = Rc::new(SimulationPlan::new(g.clone(), 7).unwrap());
    let ports = g.ports();
    let outgoing: Vec<Mailbox> =
        (0..10).map(|v| ports[v].iter().map(|&u| (u, BitMessage::from_uint_width((v * 10 + u) as u64 % 8, 3))).collect()).collect();
    let expected = round_oracle(&outgoing);
    for seed in 0..5 {
        let out = run_graph_round(plan.clone(), outgoing.clone(), SchedulerPolicy::random(seed), &RunOptions::quiet()).unwrap();
        assert!(out.quiescent);
        assert_eq!(out.unwrap_outputs(), expected);
    }
}
