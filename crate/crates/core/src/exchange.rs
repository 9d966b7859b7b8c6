//! Neighbour message exchange on the virtual ring of active processes, and
//! round-by-round simulation of synchronous ring algorithms on top of it.

use serde::Serialize;

use crate::bits::{BitMessage, Trit};
use crate::primitives::{ccw_bit_relay, ccw_bit_send, compute_or, cw_bit_relay, cw_bit_send, RingView};
use crate::ring::{RingConfig, VirtualRing};
use crate::sim::{run_to_quiescence, ExecutionOutcome, RunOptions, SchedulerPolicy, SimError};
use crate::Fault;

/// What one active process received in an exchange.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Received {
    /// Sent counter-clockwise by the clockwise active neighbour.
    pub from_cw: BitMessage,
    /// Sent clockwise by the counter-clockwise active neighbour.
    pub from_ccw: BitMessage,
}

/// Exchanges one message with each active neighbour. Every active process
/// calls this while every relay calls [`msg_relay`].
pub async fn msg_exchange(v: &RingView, msg_cw: &BitMessage, msg_ccw: &BitMessage) -> Result<Received, Fault> {
    let _scope = v.ctx().instance();
    let mut got = Received::default();
    let mut phase = 0;
    loop {
        let b_plus = msg_cw.at(phase);
        let b_minus = msg_ccw.at(phase);
        let active = b_plus != Trit::Bot || b_minus != Trit::Bot;
        if !compute_or(v, active).await {
            break;
        }
        if let Some(bit) = cw_bit_send(v, b_plus).await?.bit() {
            got.from_ccw.push(bit);
        }
        if let Some(bit) = ccw_bit_send(v, b_minus).await?.bit() {
            got.from_cw.push(bit);
        }
        phase += 1;
    }
    Ok(got)
}

pub async fn msg_relay(v: &RingView) {
    let _scope = v.ctx().instance();
    while compute_or(v, false).await {
        cw_bit_relay(v).await;
        ccw_bit_relay(v).await;
    }
}

/// Upper bound on the pulses of one exchange with longest message `l`.
pub fn exchange_pulse_bound(n: usize, l: usize) -> u64 {
    (15 * n * l + 3 * n) as u64
}

/// One process of a synchronous algorithm on a (virtual) ring.
pub trait RoundProcess {
    /// Messages for this round: `(to clockwise, to counter-clockwise)`.
    fn messages(&mut self, round: usize) -> (BitMessage, BitMessage);
    /// Consumes the messages of the round.
    fn deliver(&mut self, round: usize, from_ccw: BitMessage, from_cw: BitMessage) -> Result<(), Fault>;
    fn halted(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rounds {
    Fixed(usize),
    /// Until every active process has halted; each round is preceded by
    /// one extra OR of "not halted yet". Fails after `max` rounds.
    UntilHalt { max: usize },
}

/// Drives `process` (or relays, when `None`) through synchronous rounds.
/// A halted process sends empty messages and ignores receipts. Returns the
/// number of simulated rounds.
pub async fn simulate_rounds<P: RoundProcess>(
    v: &RingView,
    mut process: Option<&mut P>,
    rounds: Rounds,
) -> Result<usize, Fault> {
    let _scope = v.ctx().instance();
    let mut round = 0;
    loop {
        match rounds {
            Rounds::Fixed(r) if round >= r => break,
            Rounds::Fixed(_) => {}
            Rounds::UntilHalt { max } => {
                let running = process.as_ref().is_some_and(|p| !p.halted());
                if !compute_or(v, running).await {
                    break;
                }
                if round >= max {
                    return Err(Fault::RoundLimitExceeded(max));
                }
            }
        }
        match process.as_deref_mut() {
            Some(p) => {
                let live = !p.halted();
                let (cw, ccw) = if live { p.messages(round) } else { Default::default() };
                let got = msg_exchange(v, &cw, &ccw).await?;
                if live {
                    p.deliver(round, got.from_ccw, got.from_cw)?;
                }
            }
            None => msg_relay(v).await,
        }
        round += 1;
    }
    Ok(round)
}

/// Direct synchronous execution on the virtual ring; the reference the
/// pulse simulation must agree with. `procs[k]` runs at the `k`-th active.
pub fn run_synchronous<P: RoundProcess>(procs: &mut [P], rounds: Rounds) -> Result<usize, Fault> {
    let k = procs.len();
    let mut round = 0;
    loop {
        match rounds {
            Rounds::Fixed(r) if round >= r => break,
            Rounds::Fixed(_) => {}
            Rounds::UntilHalt { max } => {
                if procs.iter().all(|p| p.halted()) {
                    break;
                }
                if round >= max {
                    return Err(Fault::RoundLimitExceeded(max));
                }
            }
        }
        let live: Vec<bool> = procs.iter().map(|p| !p.halted()).collect();
        let out: Vec<(BitMessage, BitMessage)> = procs
            .iter_mut()
            .zip(&live)
            .map(|(p, &l)| if l { p.messages(round) } else { Default::default() })
            .collect();
        for (j, p) in procs.iter_mut().enumerate() {
            if live[j] {
                let from_ccw = out[(j + k - 1) % k].0.clone();
                let from_cw = out[(j + 1) % k].1.clone();
                p.deliver(round, from_ccw, from_cw)?;
            }
        }
        round += 1;
    }
    Ok(round)
}

/// Runs one exchange; `msgs[p]` is `Some((to_cw, to_ccw))` for actives.
pub fn run_msg_exchange(
    config: &RingConfig,
    msgs: &[Option<(BitMessage, BitMessage)>],
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<Option<Received>>, SimError> {
    let msgs = msgs.to_vec();
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let m = msgs[i].clone();
            Box::pin(async move {
                let v = RingView::new(ctx, i == leader);
                match m {
                    Some((cw, ccw)) => msg_exchange(&v, &cw, &ccw).await.map(Some),
                    None => {
                        msg_relay(&v).await;
                        Ok(None)
                    }
                }
            })
        },
        policy,
        opts,
    )
}

/// Expected receipts of an exchange, indexed like `msgs`.
pub fn exchange_oracle(vr: &VirtualRing, msgs: &[Option<(BitMessage, BitMessage)>]) -> Vec<Option<Received>> {
    let mut out = vec![None; msgs.len()];
    for k in 0..vr.len() {
        let p = vr.actives[k];
        let from_ccw = msgs[vr.ccw(k)].as_ref().map(|m| m.0.clone()).unwrap_or_default();
        let from_cw = msgs[vr.cw(k)].as_ref().map(|m| m.1.clone()).unwrap_or_default();
        out[p] = Some(Received { from_cw, from_ccw });
    }
    out
}

/// Runs a synchronous algorithm with `procs[p]` at every active process
/// `p` (`None` marks relays) and returns the final processes.
pub fn run_rounds<P: RoundProcess + 'static>(
    config: &RingConfig,
    procs: Vec<Option<P>>,
    rounds: Rounds,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<Option<P>>, SimError> {
    let leader = config.leader;
    let slots: Vec<std::cell::RefCell<Option<P>>> = procs.into_iter().map(std::cell::RefCell::new).collect();
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let mut proc = slots[i].borrow_mut().take();
            Box::pin(async move {
                let v = RingView::new(ctx, i == leader);
                simulate_rounds(&v, proc.as_mut(), rounds).await?;
                Ok(proc)
            })
        },
        policy,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::virtual_ring;

    fn m(s: &str) -> BitMessage {
        BitMessage(s.chars().map(|c| c == '1').collect())
    }

    #[test]
    fn empty_messages_cost_one_or() {
        let cfg = RingConfig::new(3, 0);
        let msgs = vec![Some((BitMessage::empty(), BitMessage::empty())); 3];
        let out = run_msg_exchange(&cfg, &msgs, SchedulerPolicy::random(2), &RunOptions::default()).unwrap();
        assert_eq!(out.total_pulses, 9);
        assert!(out.unwrap_outputs().iter().all(|r| r.as_ref().unwrap() == &Received::default()));
    }

    #[test]
    fn two_ring_exchange() {
        let cfg = RingConfig::new(2, 0);
        let msgs = vec![Some((m("10"), m(""))), Some((m(""), m("1")))];
        for seed in 0..20 {
            let out = run_msg_exchange(&cfg, &msgs, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
            assert!(out.total_pulses <= exchange_pulse_bound(2, 2));
            let got = out.unwrap_outputs();
            assert_eq!(got[1].as_ref().unwrap().from_ccw, m("10"));
            assert_eq!(got[0].as_ref().unwrap().from_cw, m("1"));
            assert_eq!(got[0].as_ref().unwrap().from_ccw, m(""));
        }
    }

    #[test]
    fn relays_between_three_actives() {
        let mask = vec![true, false, true, false, true, false];
        let cfg = RingConfig::new(6, 0).with_active(mask.clone());
        let vr = virtual_ring(&cfg).unwrap();
        let msgs: Vec<_> = (0..6)
            .map(|p| mask[p].then(|| (BitMessage::from_uint_width(p as u64, 3), BitMessage::from_uint_width(7 - p as u64, 3))))
            .collect();
        let expected = exchange_oracle(&vr, &msgs);
        for seed in 0..20 {
            let out = run_msg_exchange(&cfg, &msgs, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
            assert!(out.quiescent);
            assert!(out.total_pulses <= exchange_pulse_bound(6, 3));
            assert_eq!(out.unwrap_outputs(), expected);
        }
    }

    #[test]
    fn lone_leader_with_relays() {
        let cfg = RingConfig::new(4, 1).with_active(vec![false, true, false, false]);
        let msgs = vec![None, Some((BitMessage::empty(), BitMessage::empty())), None, None];
        let out = run_msg_exchange(&cfg, &msgs, SchedulerPolicy::random(1), &RunOptions::default()).unwrap();
        assert_eq!(out.total_pulses, 12);
    }

    #[derive(Debug, Clone, PartialEq)]
    struct LearnIds {
        id: u64,
        ccw: Option<u64>,
        cw: Option<u64>,
    }

    impl RoundProcess for LearnIds {
        fn messages(&mut self, _round: usize) -> (BitMessage, BitMessage) {
            (BitMessage::from_uint(self.id), BitMessage::from_uint(self.id))
        }
        fn deliver(&mut self, _round: usize, from_ccw: BitMessage, from_cw: BitMessage) -> Result<(), Fault> {
            self.ccw = from_ccw.to_uint();
            self.cw = from_cw.to_uint();
            Ok(())
        }
        fn halted(&self) -> bool {
            self.cw.is_some()
        }
    }

    #[test]
    fn neighbour_ids_in_one_round() {
        let cfg = RingConfig::new(4, 0);
        let ids = [9u64, 4, 12, 1];
        let procs: Vec<_> = ids.iter().map(|&id| Some(LearnIds { id, ccw: None, cw: None })).collect();
        let out = run_rounds(&cfg, procs, Rounds::Fixed(1), SchedulerPolicy::random(4), &RunOptions::default()).unwrap();
        let fin: Vec<LearnIds> = out.unwrap_outputs().into_iter().map(Option::unwrap).collect();
        for j in 0..4 {
            assert_eq!(fin[j].ccw, Some(ids[(j + 3) % 4]));
            assert_eq!(fin[j].cw, Some(ids[(j + 1) % 4]));
        }
        let procs: Vec<_> = ids.iter().map(|&id| Some(LearnIds { id, ccw: None, cw: None })).collect();
        let out = run_rounds(&cfg, procs, Rounds::UntilHalt { max: 5 }, SchedulerPolicy::random(4), &RunOptions::default())
            .unwrap();
        let fin2: Vec<LearnIds> = out.unwrap_outputs().into_iter().map(Option::unwrap).collect();
        assert_eq!(fin, fin2);
    }

    struct Idle;

    impl RoundProcess for Idle {
        fn messages(&mut self, _: usize) -> (BitMessage, BitMessage) {
            Default::default()
        }
        fn deliver(&mut self, _: usize, _: BitMessage, _: BitMessage) -> Result<(), Fault> {
            Ok(())
        }
        fn halted(&self) -> bool {
            true
        }
    }

    #[test]
    fn identity_algorithm_costs_one_or() {
        let cfg = RingConfig::new(5, 0);
        let procs = (0..5).map(|_| Some(Idle)).collect();
        let out = run_rounds(&cfg, procs, Rounds::UntilHalt { max: 3 }, SchedulerPolicy::fifo(), &RunOptions::default())
            .unwrap();
        assert_eq!(out.total_pulses, 15);
    }
}
