//! Aggregation on rings with distinct identifiers.
//!
//! Each phase computes a maximal independent set of the current active
//! processes by Cole–Vishkin colour reduction over the simulated virtual
//! ring. Non-members hand their partial value to a member neighbour and
//! drop out, so the leader is eventually the only active process and holds
//! the aggregate, which it then broadcasts.

use std::fmt::Debug;

use serde::Serialize;

use crate::bits::{bit_length, BitMessage};
use crate::counting::{rcv_bits, snd_bits};
use crate::exchange::{msg_exchange, msg_relay, Received};
use crate::primitives::{compute_or, RingView};
use crate::ring::RingConfig;
use crate::sim::{run_to_quiescence, ExecutionOutcome, RunOptions, SchedulerPolicy, SimError};
use crate::Fault;

/// A multiset function `f` with `f(X ⊎ Y) = f(X) ⊕ f(Y)`.
pub trait Aggregation {
    type Value: Clone + Debug + PartialEq + Serialize + 'static;

    fn name(&self) -> &'static str;
    fn singleton(&self, x: u64) -> Self::Value;
    fn combine(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    /// Must never produce an empty string.
    fn encode(&self, value: &Self::Value) -> BitMessage;
    fn decode(&self, msg: &BitMessage) -> Result<Self::Value, Fault>;

    /// Sequential fold, for reference.
    fn fold(&self, xs: &[u64]) -> Option<Self::Value> {
        xs.iter().map(|&x| self.singleton(x)).reduce(|a, b| self.combine(&a, &b))
    }
}

fn decode_uint(msg: &BitMessage) -> Result<u64, Fault> {
    msg.to_uint().ok_or_else(|| Fault::Decode(format!("`{msg}` is not a number")))
}

/// Number of inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Count;

#[derive(Debug, Clone, Copy, Default)]
pub struct Sum;

#[derive(Debug, Clone, Copy, Default)]
pub struct Max;

impl Aggregation for Count {
    type Value = u64;
    fn name(&self) -> &'static str {
        "count"
    }
    fn singleton(&self, _x: u64) -> u64 {
        1
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        a + b
    }
    fn encode(&self, value: &u64) -> BitMessage {
        BitMessage::from_uint(*value)
    }
    fn decode(&self, msg: &BitMessage) -> Result<u64, Fault> {
        decode_uint(msg)
    }
}

impl Aggregation for Sum {
    type Value = u64;
    fn name(&self) -> &'static str {
        "sum"
    }
    fn singleton(&self, x: u64) -> u64 {
        x
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        a + b
    }
    fn encode(&self, value: &u64) -> BitMessage {
        BitMessage::from_uint(*value)
    }
    fn decode(&self, msg: &BitMessage) -> Result<u64, Fault> {
        decode_uint(msg)
    }
}

impl Aggregation for Max {
    type Value = u64;
    fn name(&self) -> &'static str {
        "max"
    }
    fn singleton(&self, x: u64) -> u64 {
        x
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        *a.max(b)
    }
    fn encode(&self, value: &u64) -> BitMessage {
        BitMessage::from_uint(*value)
    }
    fn decode(&self, msg: &BitMessage) -> Result<u64, Fault> {
        decode_uint(msg)
    }
}

/// One exchange as an active process (`Some`) or as a relay (`None`).
async fn exchange(v: &RingView, msgs: Option<(BitMessage, BitMessage)>) -> Result<Option<Received>, Fault> {
    match msgs {
        Some((cw, ccw)) => msg_exchange(v, &cw, &ccw).await.map(Some),
        None => {
            msg_relay(v).await;
            Ok(None)
        }
    }
}

/// Largest identifier bit length, learnt by every process through one OR
/// of "my length is at least `i`" for `i = 1, 2, ...` up to the first
/// false outcome.
pub async fn discover_lambda(v: &RingView, id: u64) -> usize {
    let _scope = v.ctx().instance();
    let len = bit_length(id);
    let mut lambda = 0;
    while compute_or(v, len > lambda).await {
        lambda += 1;
    }
    lambda
}

/// What an active process knows after the independent set is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MisView {
    pub in_mis: bool,
    pub ccw_in_mis: bool,
    pub cw_in_mis: bool,
    /// Final colour, in `0..3`.
    pub color: u64,
    pub reduction_rounds: usize,
}

fn one_bit(b: bool) -> BitMessage {
    BitMessage(vec![b])
}

/// Maximal independent set containing the leader on the virtual ring of
/// the processes passing `Some(id)`; relays pass `None`. Needs at least
/// two active processes.
pub async fn mis(v: &RingView, id: Option<u64>, lambda: usize) -> Result<Option<MisView>, Fault> {
    let _scope = v.ctx().instance();
    let active = id.is_some();
    let mut color = id.unwrap_or(0);
    let mut width = lambda.max(1);
    let mut reduction_rounds = 0;

    while compute_or(v, active && color >= 6).await {
        let msgs = active.then(|| (BitMessage::empty(), BitMessage::from_uint_width(color, width)));
        if let Some(got) = exchange(v, msgs).await? {
            let succ = decode_uint(&got.from_cw)?;
            if succ == color {
                return Err(Fault::ColorCollision(color));
            }
            let j = (color ^ succ).trailing_zeros() as u64;
            color = 2 * j + ((color >> j) & 1);
        }
        width = bit_length(2 * width as u64 - 1);
        reduction_rounds += 1;
    }

    for top in [5, 4, 3] {
        let msgs = active.then(|| (BitMessage::from_uint_width(color, 3), BitMessage::from_uint_width(color, 3)));
        if let Some(got) = exchange(v, msgs).await? {
            let ccw = decode_uint(&got.from_ccw)?;
            let cw = decode_uint(&got.from_cw)?;
            if ccw == color || cw == color {
                return Err(Fault::ColorCollision(color));
            }
            if color == top {
                color = (0..3).find(|c| *c != ccw && *c != cw).expect("three colours, two neighbours");
            }
        }
    }

    let mut joined = active && v.is_leader();
    let (mut ccw_joined, mut cw_joined) = (false, false);
    for step in 0..4u64 {
        if step > 0 && active && !joined && color == step - 1 && !ccw_joined && !cw_joined {
            joined = true;
        }
        if let Some(got) = exchange(v, active.then(|| (one_bit(joined), one_bit(joined)))).await? {
            ccw_joined = got.from_ccw.bits() == [true];
            cw_joined = got.from_cw.bits() == [true];
        }
    }
    Ok(active.then_some(MisView { in_mis: joined, ccw_in_mis: ccw_joined, cw_in_mis: cw_joined, color, reduction_rounds }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateOutput<V> {
    pub value: V,
    pub lambda: usize,
    /// Number of independent-set phases run.
    pub phases: usize,
    /// Phase in which this process handed its value over; `None` for the
    /// leader.
    pub retired_in: Option<usize>,
}

/// Every process learns `f` of all inputs. Identifiers must be distinct.
pub async fn aggregate<A: Aggregation>(v: &RingView, spec: &A, id: u64, x: u64) -> Result<AggregateOutput<A::Value>, Fault> {
    let lambda = discover_lambda(v, id).await;
    aggregate_with_lambda(v, spec, id, x, lambda).await
}

pub async fn aggregate_with_lambda<A: Aggregation>(
    v: &RingView,
    spec: &A,
    id: u64,
    x: u64,
    lambda: usize,
) -> Result<AggregateOutput<A::Value>, Fault> {
    let scope = v.ctx().instance();
    let mut w = spec.singleton(x);
    let mut active = true;
    let mut retired_in = None;
    let mut phase = 0;
    while compute_or(v, active && !v.is_leader()).await {
        let view = mis(v, active.then_some(id), lambda).await?;
        let msgs = view.map(|m| {
            if m.in_mis {
                (BitMessage::empty(), BitMessage::empty())
            } else if m.cw_in_mis {
                (spec.encode(&w), BitMessage::empty())
            } else {
                (BitMessage::empty(), spec.encode(&w))
            }
        });
        let got = exchange(v, msgs).await?;
        if let (Some(m), Some(got)) = (view, got) {
            if m.in_mis {
                if !got.from_ccw.is_empty() {
                    w = spec.combine(&spec.decode(&got.from_ccw)?, &w);
                }
                if !got.from_cw.is_empty() {
                    w = spec.combine(&w, &spec.decode(&got.from_cw)?);
                }
            } else if !m.cw_in_mis && !m.ccw_in_mis {
                return Err(Fault::NotMaximal(id));
            } else {
                active = false;
                retired_in = Some(phase);
            }
        }
        phase += 1;
    }
    drop(scope);
    let value = if v.is_leader() {
        snd_bits(v, spec.encode(&w).bits()).await;
        w
    } else {
        spec.decode(&BitMessage(rcv_bits(v).await?))?
    };
    Ok(AggregateOutput { value, lambda, phases: phase, retired_in })
}

/// Ring size at every process, with identifiers.
pub async fn count_with_ids(v: &RingView, id: u64) -> Result<u64, Fault> {
    Ok(aggregate(v, &Count, id, 1).await?.value)
}

fn ids_of(config: &RingConfig) -> Vec<u64> {
    config.ids.clone().unwrap_or_else(|| (0..config.n as u64).collect())
}

/// Runs [`aggregate`] with `config.ids` (default: indices) and
/// `config.inputs` (default: all zero).
pub fn run_aggregate<A: Aggregation + Clone + 'static>(
    config: &RingConfig,
    spec: A,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<AggregateOutput<A::Value>>, SimError> {
    let ids = ids_of(config);
    let inputs = config.inputs.clone().unwrap_or_else(|| vec![0; config.n]);
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let (spec, id, x) = (spec.clone(), ids[i], inputs[i]);
            Box::pin(async move { aggregate(&RingView::new(ctx, i == leader), &spec, id, x).await })
        },
        policy,
        opts,
    )
}

pub fn run_count_with_ids(
    config: &RingConfig,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<u64>, SimError> {
    let ids = ids_of(config);
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let id = ids[i];
            Box::pin(async move { count_with_ids(&RingView::new(ctx, i == leader), id).await })
        },
        policy,
        opts,
    )
}

/// Independent set of the active processes of `config` (all, without a
/// mask). Actives output `Some(member)`, relays `None`.
pub fn run_mis(config: &RingConfig, policy: SchedulerPolicy, opts: &RunOptions) -> Result<ExecutionOutcome<Option<MisView>>, SimError> {
    let ids = ids_of(config);
    let active: Vec<bool> = (0..config.n).map(|p| config.is_active(p)).collect();
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let (id, act) = (ids[i], active[i]);
            Box::pin(async move {
                let v = RingView::new(ctx, i == leader);
                let lambda = discover_lambda(&v, id).await;
                if compute_or(&v, act && !v.is_leader()).await {
                    mis(&v, act.then_some(id), lambda).await
                } else {
                    let alone = MisView { in_mis: true, ccw_in_mis: true, cw_in_mis: true, color: 0, reduction_rounds: 0 };
                    Ok(v.is_leader().then_some(alone))
                }
            })
        },
        policy,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambda_of(ids: Vec<u64>) -> (usize, u64) {
        let n = ids.len();
        let ids2 = ids.clone();
        let out = run_to_quiescence(
            &crate::sim::Network::ring(n).unwrap(),
            move |i, ctx| {
                let id = ids2[i];
                Box::pin(async move { Ok(discover_lambda(&RingView::new(ctx, i == 0), id).await) })
            },
            SchedulerPolicy::random(1),
            &RunOptions::default(),
        )
        .unwrap();
        let pulses = out.total_pulses;
        let ls = out.unwrap_outputs();
        assert!(ls.iter().all(|&l| l == ls[0]));
        (ls[0], pulses)
    }

    #[test]
    fn lambda_is_max_length() {
        assert_eq!(lambda_of(vec![1, 2, 3]).0, 2);
        assert_eq!(lambda_of(vec![7, 1]).0, 3);
        let (l, pulses) = lambda_of(vec![5, 9, 12]);
        assert_eq!(l, 4);
        assert!(pulses <= 3 * 3 * (4 + 1));
    }

    fn members(cfg: &RingConfig, seed: u64) -> Vec<bool> {
        run_mis(cfg, SchedulerPolicy::random(seed), &RunOptions::default())
            .unwrap()
            .unwrap_outputs()
            .into_iter()
            .map(|m| m.unwrap().in_mis)
            .collect()
    }

    #[test]
    fn mis_of_triangle_is_leader() {
        assert_eq!(members(&RingConfig::new(3, 0).with_ids(vec![0, 1, 2]), 1), vec![true, false, false]);
    }

    #[test]
    fn mis_of_four_ring() {
        assert_eq!(members(&RingConfig::new(4, 0).with_ids(vec![0, 1, 2, 3]), 2), vec![true, false, true, false]);
    }

    #[test]
    fn mis_of_six_ring() {
        for seed in 0..5 {
            let cfg = RingConfig::new(6, 3).with_ids(vec![40, 7, 1000, 3, 65, 12]);
            let m = members(&cfg, seed);
            assert!(m[3]);
            let k = m.iter().filter(|&&b| b).count();
            assert!((2..=3).contains(&k));
            for j in 0..6 {
                assert!(!(m[j] && m[(j + 1) % 6]));
                assert!(m[j] || m[(j + 1) % 6] || m[(j + 5) % 6]);
            }
        }
    }

    #[test]
    fn count_sum_max() {
        let cfg = RingConfig::new(8, 0).with_ids(vec![17, 3, 99, 4, 5, 60, 2, 41]);
        let out = run_count_with_ids(&cfg, SchedulerPolicy::random(3), &RunOptions::default()).unwrap();
        assert!(out.quiescent);
        assert_eq!(out.unwrap_outputs(), vec![8; 8]);

        let cfg = RingConfig::new(5, 2).with_ids(vec![9, 1, 4, 30, 2]).with_inputs(vec![3, 1, 4, 1, 5]);
        let out = run_aggregate(&cfg, Max, SchedulerPolicy::random(4), &RunOptions::default()).unwrap();
        assert!(out.unwrap_outputs().iter().all(|o| o.value == 5));
        let cfg = cfg.with_inputs(vec![0; 5]);
        let out = run_aggregate(&cfg, Sum, SchedulerPolicy::random(4), &RunOptions::default()).unwrap();
        assert!(out.unwrap_outputs().iter().all(|o| o.value == 0));
    }

    #[test]
    fn actives_halve_every_phase() {
        for n in 2..40usize {
            let ids = (0..n as u64).map(|i| (i * 37 + 11) % 1009).collect();
            let out = run_aggregate(&RingConfig::new(n, n / 3).with_ids(ids), Count, SchedulerPolicy::random(n as u64), &RunOptions::quiet()).unwrap();
            let bound = (n as f64).log2().ceil() as usize;
            for o in out.unwrap_outputs() {
                assert_eq!(o.value, n as u64);
                assert!(o.phases <= bound, "n={n}: {} phases", o.phases);
            }
        }
    }

    #[test]
    fn two_processes() {
        let cfg = RingConfig::new(2, 1).with_ids(vec![5, 6]);
        let out = run_count_with_ids(&cfg, SchedulerPolicy::random(9), &RunOptions::default()).unwrap();
        assert_eq!(out.unwrap_outputs(), vec![2, 2]);
    }
}
