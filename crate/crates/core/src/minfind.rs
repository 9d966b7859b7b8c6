//! Minimum finding by ORs over bit positions, and the input multiset by
//! repeated minimum finding and counting.

use serde::Serialize;

use crate::aggregation::{aggregate_with_lambda, discover_lambda, Sum};
use crate::bits::{BitMessage, Trit};
use crate::primitives::{compute_or, RingView};
use crate::ring::RingConfig;
use crate::sim::{run_to_quiescence, ExecutionOutcome, RunOptions, SchedulerPolicy, SimError};
use crate::Fault;

/// Longest input the length search will try before concluding that no
/// process competes.
const MAX_LENGTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MinOutput {
    pub min: u64,
    /// Still a candidate: the process competed and holds the minimum.
    pub active: bool,
    /// Length of the minimum, found with this many ORs.
    pub length: usize,
}

/// Minimum of the inputs (MSB-first, no leading zeros) of the processes
/// calling with `active`; every process learns it. Costs exactly `2B`
/// ORs where `B` is the length of the minimum.
pub async fn min_finding(v: &RingView, bits: &BitMessage, active: bool) -> Result<MinOutput, Fault> {
    let _scope = v.ctx().instance();
    let len = bits.len();
    let mut b = 0;
    loop {
        b += 1;
        if b > MAX_LENGTH {
            return Err(Fault::NoActiveProcess);
        }
        if compute_or(v, active && b >= len).await {
            break;
        }
    }
    let mut active = active && len == b;
    let mut min_bits = BitMessage::empty();
    for phase in 0..b {
        let bit = bits.at(phase);
        let exists_zero = compute_or(v, active && bit == Trit::Zero).await;
        if exists_zero {
            if bit == Trit::One {
                active = false;
            }
            min_bits.push(false);
        } else {
            min_bits.push(true);
        }
    }
    let min = min_bits.to_uint().ok_or_else(|| Fault::Decode(format!("minimum `{min_bits}`")))?;
    Ok(MinOutput { min, active, length: b })
}

/// Distinct inputs in increasing order with their multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultisetResult(pub Vec<(u64, u64)>);

impl MultisetResult {
    pub fn tally(xs: &[u64]) -> Self {
        let mut counts = std::collections::BTreeMap::new();
        for &x in xs {
            *counts.entry(x).or_insert(0u64) += 1;
        }
        MultisetResult(counts.into_iter().collect())
    }

    pub fn distinct(&self) -> usize {
        self.0.len()
    }
}

/// Every process learns the multiset of all inputs: one minimum finding
/// over the processes not yet accounted for, then a count of those holding
/// the minimum, until nobody is left. Identifiers must be distinct.
pub async fn compute_multiset(v: &RingView, id: u64, x: u64) -> Result<MultisetResult, Fault> {
    let _scope = v.ctx().instance();
    let lambda = discover_lambda(v, id).await;
    let bits = BitMessage::from_uint(x);
    let mut eligible = true;
    let mut pairs = Vec::new();
    while compute_or(v, eligible).await {
        let found = min_finding(v, &bits, eligible).await?;
        let k = aggregate_with_lambda(v, &Sum, id, found.active as u64, lambda).await?.value;
        pairs.push((found.min, k));
        eligible = eligible && !found.active;
    }
    Ok(MultisetResult(pairs))
}

/// Runs [`min_finding`] on `config.inputs` with the given competitors.
pub fn run_min_finding(
    config: &RingConfig,
    competing: &[bool],
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<MinOutput>, SimError> {
    let inputs = config.inputs.clone().unwrap_or_else(|| vec![0; config.n]);
    let competing = competing.to_vec();
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let (bits, act) = (BitMessage::from_uint(inputs[i]), competing[i]);
            Box::pin(async move { min_finding(&RingView::new(ctx, i == leader), &bits, act).await })
        },
        policy,
        opts,
    )
}

pub fn run_multiset(config: &RingConfig, policy: SchedulerPolicy, opts: &RunOptions) -> Result<ExecutionOutcome<MultisetResult>, SimError> {
    let inputs = config.inputs.clone().unwrap_or_else(|| vec![0; config.n]);
    let ids = config.ids.clone().unwrap_or_else(|| (0..config.n as u64).collect());
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let (id, x) = (ids[i], inputs[i]);
            Box::pin(async move { compute_multiset(&RingView::new(ctx, i == leader), id, x).await })
        },
        policy,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimum(inputs: Vec<u64>, competing: Vec<bool>, seed: u64) -> (Vec<MinOutput>, u64) {
        let n = inputs.len();
        let cfg = RingConfig::new(n, 0).with_inputs(inputs);
        let out = run_min_finding(&cfg, &competing, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
        let p = out.total_pulses;
        (out.unwrap_outputs(), p)
    }

    #[test]
    fn three_values() {
        let (outs, pulses) = minimum(vec![5, 3, 6], vec![true; 3], 1);
        assert!(outs.iter().all(|o| o.min == 3));
        assert_eq!(outs.iter().map(|o| o.active).collect::<Vec<_>>(), vec![false, true, false]);
        assert_eq!(pulses, 6 * 3 * 2);
    }

    #[test]
    fn equal_inputs_stay_active() {
        let (outs, _) = minimum(vec![4; 4], vec![true; 4], 2);
        assert!(outs.iter().all(|o| o.min == 4 && o.active));
    }

    #[test]
    fn only_competitors_count() {
        let (outs, _) = minimum(vec![7, 7, 2, 1], vec![true, true, true, false], 3);
        assert!(outs.iter().all(|o| o.min == 2));
        assert_eq!(outs.iter().map(|o| o.active).collect::<Vec<_>>(), vec![false, false, true, false]);
    }

    #[test]
    fn nobody_competing_is_a_fault() {
        let cfg = RingConfig::new(3, 0).with_inputs(vec![1, 2, 3]);
        let err = run_min_finding(&cfg, &[false; 3], SchedulerPolicy::fifo(), &RunOptions::quiet()).unwrap_err();
        assert!(matches!(err, SimError::ProcessFault { fault: Fault::NoActiveProcess, .. }));
    }

    #[test]
    fn multisets() {
        for (inputs, expect) in [
            (vec![2, 2, 5], vec![(2, 2), (5, 1)]),
            (vec![1, 2, 3, 4], vec![(1, 1), (2, 1), (3, 1), (4, 1)]),
            (vec![6, 6, 6], vec![(6, 3)]),
        ] {
            let n = inputs.len();
            let cfg = RingConfig::new(n, n - 1).with_inputs(inputs);
            let out = run_multiset(&cfg, SchedulerPolicy::random(5), &RunOptions::default()).unwrap();
            assert!(out.quiescent);
            assert!(out.unwrap_outputs().iter().all(|r| r.0 == expect));
        }
    }
}
