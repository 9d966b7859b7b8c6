//! Running each protocol on a scenario and checking the result against a
//! direct computation.

use std::rc::Rc;

use anyhow::{bail, Result};
use clap::ValueEnum;
use copulse::aggregation::{run_aggregate, run_count_with_ids, run_mis, Count, Max, Sum};
use copulse::counting::{run_naive_count, run_phased_count};
use copulse::exchange::{exchange_oracle, exchange_pulse_bound, run_msg_exchange};
use copulse::graph::{edge_pulse_bound, round_oracle, run_graph_round, Mailbox, SimulationPlan};
use copulse::minfind::{run_min_finding, run_multiset, MultisetResult};
use copulse::primitives::{run_bit_send, run_compute_or, BitDirection};
use copulse::ring::virtual_ring;
use copulse::sim::{ExecutionOutcome, RunOptions, SchedulerPolicy, SimError, TraceEvent};
use copulse::BitMessage;
use serde::Serialize;

use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    NaiveCount,
    PhasedCount,
    ComputeOr,
    BitSend,
    MsgExchange,
    Mis,
    Aggregate,
    CountIds,
    MinFinding,
    Multiset,
    GraphCongest,
}

impl Protocol {
    pub fn parse(name: &str) -> Result<Self> {
        match Protocol::from_str(name, false) {
            Ok(p) => Ok(p),
            Err(_) => bail!("unknown protocol `{name}`"),
        }
    }

    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Result of one run. `failure` is `None` when every check passed.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub n: usize,
    pub seed: u64,
    pub quiescent: bool,
    pub total_pulses: u64,
    pub steps: u64,
    pub edge_pulses: Vec<[u64; 2]>,
    pub outputs: serde_json::Value,
    pub failure: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
}

type Check<'a, T> = Box<dyn FnOnce(&ExecutionOutcome<T>, &[T]) -> Result<(), String> + 'a>;

fn report<T: Serialize + Clone>(
    protocol: Protocol,
    sc: &Scenario,
    seed: u64,
    res: Result<ExecutionOutcome<T>, SimError>,
    check: Check<'_, T>,
) -> RunReport {
    let n = sc.graph.as_ref().map_or(sc.ring.n, |g| g.n);
    match res {
        Err(e) => RunReport {
            protocol,
            n,
            seed,
            quiescent: false,
            total_pulses: 0,
            steps: 0,
            edge_pulses: Vec::new(),
            outputs: serde_json::Value::Null,
            failure: Some(e.to_string()),
            trace: Vec::new(),
        },
        Ok(mut out) => {
            let outputs = serde_json::to_value(&out.outputs).unwrap_or(serde_json::Value::Null);
            let failure = if !out.quiescent {
                Some("run did not end quiescent".to_string())
            } else {
                let values: Vec<T> = out.outputs.iter().cloned().map(|o| o.expect("quiescent")).collect();
                check(&out, &values).err()
            };
            RunReport {
                protocol,
                n,
                seed,
                quiescent: out.quiescent,
                total_pulses: out.total_pulses,
                steps: out.steps,
                edge_pulses: std::mem::take(&mut out.edge_pulses),
                outputs,
                failure,
                trace: std::mem::take(&mut out.trace),
            }
        }
    }
}

fn expect(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

pub fn execute(protocol: Protocol, sc: &Scenario, policy: SchedulerPolicy, opts: &RunOptions) -> Result<RunReport> {
    let ring = &sc.ring;
    let n = ring.n;
    let seed = policy.seed;
    let inputs = ring.inputs.clone().unwrap_or_default();
    let distances: Vec<u64> = (0..n).map(|p| ring.distance(p) as u64).collect();
    let r = match protocol {
        Protocol::NaiveCount => report(
            protocol,
            sc,
            seed,
            run_naive_count(ring, policy, opts),
            Box::new(|_, v: &[u64]| expect(v.iter().all(|&x| x == n as u64), || format!("outputs {v:?}, expected {n}"))),
        ),
        Protocol::PhasedCount => report(
            protocol,
            sc,
            seed,
            run_phased_count(ring, policy, opts),
            Box::new(|_, v: &[_]| {
                let got: Vec<u64> = v.iter().map(|o| o.distance).collect();
                expect(v.iter().all(|o| o.n == n as u64), || format!("sizes {:?}, expected {n}", v.iter().map(|o| o.n).collect::<Vec<_>>()))?;
                expect(got == distances, || format!("distances {got:?}, expected {distances:?}"))
            }),
        ),
        Protocol::ComputeOr => {
            let bits: Vec<bool> = inputs.iter().map(|&x| x != 0).collect();
            let or = bits.iter().any(|&b| b);
            report(
                protocol,
                sc,
                seed,
                run_compute_or(ring, &bits, policy, opts),
                Box::new(move |out, v: &[bool]| {
                    expect(v.iter().all(|&x| x == or), || format!("outputs {v:?}, expected {or}"))?;
                    expect(out.total_pulses == 3 * n as u64, || format!("{} pulses, expected exactly {}", out.total_pulses, 3 * n))
                }),
            )
        }
        Protocol::BitSend => {
            let dir = if sc.cw { BitDirection::Cw } else { BitDirection::Ccw };
            let actives: Vec<usize> = (0..n).filter(|&p| sc.trits[p].is_some()).collect();
            if !actives.contains(&ring.leader) {
                bail!("the leader must send a trit");
            }
            let k = actives.len();
            let mut expected = vec![None; n];
            for (j, &p) in actives.iter().enumerate() {
                let from = if sc.cw { actives[(j + k - 1) % k] } else { actives[(j + 1) % k] };
                expected[p] = sc.trits[from];
            }
            report(
                protocol,
                sc,
                seed,
                run_bit_send(ring, &sc.trits, dir, policy, opts),
                Box::new(move |out, v: &[_]| {
                    expect(v == expected.as_slice(), || format!("outputs {v:?}, expected {expected:?}"))?;
                    expect(out.total_pulses <= 6 * n as u64, || format!("{} pulses > 6n", out.total_pulses))
                }),
            )
        }
        Protocol::MsgExchange => {
            let expected = exchange_oracle(&virtual_ring(ring)?, &sc.messages);
            let l = sc.messages.iter().flatten().map(|(a, b)| a.len().max(b.len())).max().unwrap_or(0);
            let bound = exchange_pulse_bound(n, l);
            report(
                protocol,
                sc,
                seed,
                run_msg_exchange(ring, &sc.messages, policy, opts),
                Box::new(move |out, v: &[_]| {
                    expect(v == expected.as_slice(), || "receipts differ from the direct exchange".to_string())?;
                    expect(out.total_pulses <= bound, || format!("{} pulses > {bound}", out.total_pulses))
                }),
            )
        }
        Protocol::Mis => {
            let vr = virtual_ring(&ring.clone().with_active((0..n).map(|p| ring.is_active(p)).collect()))?;
            let leader = ring.leader;
            report(
                protocol,
                sc,
                seed,
                run_mis(ring, policy, opts),
                Box::new(move |_, v: &[_]| {
                    let k = vr.len();
                    let member: Vec<bool> = vr.actives.iter().map(|&p| v[p].is_some_and(|m| m.in_mis)).collect();
                    expect(v[leader].is_some_and(|m| m.in_mis), || "leader not in the set".into())?;
                    for j in 0..k {
                        if k == 1 {
                            break;
                        }
                        let (l, r) = (member[(j + k - 1) % k], member[(j + 1) % k]);
                        expect(!(member[j] && r), || format!("neighbours {} and {} both in the set", vr.actives[j], vr.actives[(j + 1) % k]))?;
                        expect(member[j] || l || r, || format!("{} could join the set", vr.actives[j]))?;
                    }
                    Ok(())
                }),
            )
        }
        Protocol::Aggregate => {
            let (res, expected) = match sc.aggregate.as_str() {
                "count" => (run_aggregate(ring, Count, policy, opts), n as u64),
                "sum" => (run_aggregate(ring, Sum, policy, opts), inputs.iter().sum()),
                "max" => (run_aggregate(ring, Max, policy, opts), inputs.iter().copied().max().unwrap_or(0)),
                other => bail!("unknown aggregate `{other}` (count, sum, max)"),
            };
            report(
                protocol,
                sc,
                seed,
                res,
                Box::new(move |_, v: &[_]| expect(v.iter().all(|o| o.value == expected), || format!("expected {expected} everywhere"))),
            )
        }
        Protocol::CountIds => report(
            protocol,
            sc,
            seed,
            run_count_with_ids(ring, policy, opts),
            Box::new(|_, v: &[u64]| expect(v.iter().all(|&x| x == n as u64), || format!("outputs {v:?}, expected {n}"))),
        ),
        Protocol::MinFinding => {
            let competing = sc.competing.clone();
            let min = (0..n).filter(|&p| competing[p]).map(|p| inputs[p]).min();
            report(
                protocol,
                sc,
                seed,
                run_min_finding(ring, &competing, policy, opts),
                Box::new(move |out, v: &[_]| {
                    let min = min.ok_or("nobody competes")?;
                    expect(v.iter().all(|o| o.min == min), || format!("expected minimum {min}"))?;
                    for p in 0..n {
                        expect(v[p].active == (competing[p] && inputs[p] == min), || format!("candidate flag of {p}"))?;
                    }
                    let b = BitMessage::from_uint(min).len() as u64;
                    let bound = 6 * n as u64 * b + 3 * n as u64 * v[0].length as u64;
                    expect(out.total_pulses <= bound, || format!("{} pulses > {bound}", out.total_pulses))
                }),
            )
        }
        Protocol::Multiset => {
            let tally = MultisetResult::tally(&inputs);
            report(
                protocol,
                sc,
                seed,
                run_multiset(ring, policy, opts),
                Box::new(move |_, v: &[MultisetResult]| expect(v.iter().all(|m| *m == tally), || format!("expected {:?}", tally.0))),
            )
        }
        Protocol::GraphCongest => {
            let g = sc.graph.clone().expect("graph scenario");
            let plan = Rc::new(SimulationPlan::new(g.clone(), ring.leader)?);
            let mult = plan.cover.multiplicity();
            let ports = g.ports();
            let ids = ring.ids.clone().unwrap_or_default();
            let outgoing: Vec<Mailbox> = (0..g.n)
                .map(|v| {
                    ports[v]
                        .iter()
                        .map(|&u| {
                            let word = ids[v].wrapping_mul(31).wrapping_add(ids[u]);
                            (u, BitMessage::from_uint_width(word % (1 << sc.bits), sc.bits))
                        })
                        .collect()
                })
                .collect();
            let expected = round_oracle(&outgoing);
            let b = sc.bits;
            report(
                protocol,
                sc,
                seed,
                run_graph_round(plan, outgoing, policy, opts),
                Box::new(move |out, v: &[Mailbox]| {
                    expect(v == expected.as_slice(), || "receipts differ from the direct round".into())?;
                    for (e, &(a, c)) in g.edges.iter().enumerate() {
                        let pulses = out.edge_pulses[e][0] + out.edge_pulses[e][1];
                        let bound = edge_pulse_bound(b, mult[&(a.min(c), a.max(c))]);
                        expect(pulses <= bound, || format!("edge ({a},{c}) carried {pulses} > {bound}"))?;
                    }
                    Ok(())
                }),
            )
        }
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ConfigFile;

    #[test]
    fn every_protocol_passes_on_a_random_scenario() {
        for &p in Protocol::value_variants() {
            let sc = Scenario::build(p, &ConfigFile::default(), Some(6), None, 3).unwrap();
            let r = execute(p, &sc, SchedulerPolicy::random(3), &RunOptions::quiet()).unwrap();
            assert_eq!(r.failure, None, "{}", p.name());
            assert!(r.total_pulses > 0, "{}", p.name());
        }
    }

    #[test]
    fn names() {
        assert_eq!(Protocol::parse("graph-congest").unwrap(), Protocol::GraphCongest);
        assert_eq!(Protocol::CountIds.name(), "count-ids");
        assert!(Protocol::parse("gossip").is_err());
    }
}
