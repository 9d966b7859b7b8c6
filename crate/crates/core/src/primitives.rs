//! Global OR and single-bit transfer between neighbouring active processes.

use crate::bits::Trit;
use crate::ring::RingConfig;
use crate::sim::{run_to_quiescence, Ctx, ExecutionOutcome, Port, RunOptions, SchedulerPolicy, SimError};
use crate::Fault;

/// A process's view of one oriented ring it sits on.
///
/// Ring port 0 faces the counter-clockwise neighbour and ring port 1 the
/// clockwise one. On a physical ring these are the process's own ports;
/// on a cycle of a larger graph they are the two ports the cycle uses.
#[derive(Clone)]
pub struct RingView {
    ctx: Ctx,
    ports: [Port; 2],
    leader: bool,
}

impl RingView {
    pub fn new(ctx: Ctx, leader: bool) -> Self {
        RingView { ctx, ports: [0, 1], leader }
    }

    pub fn on_ports(ctx: Ctx, ports: [Port; 2], leader: bool) -> Self {
        RingView { ctx, ports, leader }
    }

    /// The same ring with clockwise and counter-clockwise exchanged.
    pub fn mirrored(&self) -> Self {
        RingView { ctx: self.ctx.clone(), ports: [self.ports[1], self.ports[0]], leader: self.leader }
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn is_leader(&self) -> bool {
        self.leader
    }

    pub fn send(&self, side: usize) {
        self.ctx.send(self.ports[side]);
    }

    pub fn send_n(&self, side: usize, k: u32) {
        for _ in 0..k {
            self.send(side);
        }
    }

    pub async fn recv(&self, side: usize) {
        self.ctx.recv(self.ports[side]).await;
    }

    pub async fn recv_n(&self, side: usize, k: u32) {
        for _ in 0..k {
            self.recv(side).await;
        }
    }

    /// Waits for a pulse on either ring port and returns its side.
    pub async fn recv_any(&self) -> usize {
        let port = self.ctx.recv_either(self.ports[0], self.ports[1]).await;
        if port == self.ports[0] {
            0
        } else {
            1
        }
    }
}

/// Logical OR of every process's input, known to all. Sends exactly `3n`
/// pulses and ends with a clockwise barrier wave; the leader returns last.
pub async fn compute_or(v: &RingView, input: bool) -> bool {
    let _scope = v.ctx().instance();
    let mut ans = true;
    if v.is_leader() {
        v.send(if input { 1 } else { 0 });
    }
    let q = v.recv_any().await;
    if v.is_leader() {
        if q == 1 {
            v.send(0);
            v.recv(1).await;
            ans = false;
        } else {
            v.send(if input { 0 } else { 1 });
            v.recv(1).await;
        }
    } else if input {
        v.send(1);
        v.recv(1 - q).await;
        v.send(0);
    } else {
        v.send(1 - q);
        let u = v.recv_any().await;
        v.send(1 - u);
        if u == 1 && q == 1 {
            ans = false;
        }
    }
    if v.is_leader() {
        v.send(1);
        v.recv(0).await;
    } else {
        v.recv(0).await;
        v.send(1);
    }
    ans
}

/// Sends `bit` to the counter-clockwise active neighbour and returns the
/// bit of the clockwise one.
pub async fn ccw_bit_send(v: &RingView, bit: Trit) -> Result<Trit, Fault> {
    let _scope = v.ctx().instance();
    let mut cnt = bit.pulses() as i64;
    v.send_n(0, bit.pulses());
    if v.is_leader() {
        v.send(1);
    }
    let mut received = 0u32;
    while cnt >= 0 {
        if v.recv_any().await == 0 {
            cnt -= 1;
        } else {
            v.send(1);
            received += 1;
        }
    }
    v.send(1);
    if v.is_leader() {
        v.recv(0).await;
    } else {
        loop {
            let q = v.recv_any().await;
            v.send(1);
            if q == 1 {
                received += 1;
            } else {
                break;
            }
        }
    }
    Trit::from_pulses(received).ok_or(Fault::TritOverflow(received))
}

/// Forwards bit-sending pulses like a plain link and returns together
/// with the active processes.
pub async fn ccw_bit_relay(v: &RingView) {
    let _scope = v.ctx().instance();
    let mut cnt: i64 = 0;
    if v.is_leader() {
        v.send(1);
    }
    while cnt >= -1 {
        let q = v.recv_any().await;
        if !(v.is_leader() && q == 0 && cnt == -1) {
            v.send(1 - q);
        }
        cnt += if q == 1 { 1 } else { -1 };
    }
}

/// Sends `bit` to the clockwise active neighbour and returns the bit of
/// the counter-clockwise one.
pub async fn cw_bit_send(v: &RingView, bit: Trit) -> Result<Trit, Fault> {
    ccw_bit_send(&v.mirrored(), bit).await
}

pub async fn cw_bit_relay(v: &RingView) {
    ccw_bit_relay(&v.mirrored()).await
}

/// Runs [`compute_or`] on a ring with one input per process.
pub fn run_compute_or(
    config: &RingConfig,
    inputs: &[bool],
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<bool>, SimError> {
    let inputs = inputs.to_vec();
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let input = inputs[i];
            Box::pin(async move { Ok(compute_or(&RingView::new(ctx, i == leader), input).await) })
        },
        policy,
        opts,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDirection {
    Ccw,
    Cw,
}

/// Runs one bit-sending layer: processes with `Some(bit)` are active,
/// the others relay. Relays output `None`.
pub fn run_bit_send(
    config: &RingConfig,
    bits: &[Option<Trit>],
    dir: BitDirection,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<Option<Trit>>, SimError> {
    let bits = bits.to_vec();
    let leader = config.leader;
    run_to_quiescence(
        &config.network(),
        move |i, ctx| {
            let bit = bits[i];
            Box::pin(async move {
                let v = RingView::new(ctx, i == leader);
                let v = if dir == BitDirection::Cw { v.mirrored() } else { v };
                match bit {
                    Some(b) => ccw_bit_send(&v, b).await.map(Some),
                    None => {
                        ccw_bit_relay(&v).await;
                        Ok(None)
                    }
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
    use Trit::*;

    fn or(n: usize, leader: usize, inputs: &[bool], seed: u64) -> ExecutionOutcome<bool> {
        run_compute_or(&RingConfig::new(n, leader), inputs, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap()
    }

    #[test]
    fn all_false_on_four() {
        for seed in 0..50 {
            let out = or(4, 0, &[false; 4], seed);
            assert_eq!(out.total_pulses, 12);
            assert!(out.quiescent);
            assert_eq!(out.unwrap_outputs(), vec![false; 4]);
        }
    }

    #[test]
    fn leader_true_on_three() {
        let out = or(3, 0, &[true, false, false], 5);
        assert_eq!(out.total_pulses, 9);
        assert_eq!(out.unwrap_outputs(), vec![true; 3]);
    }

    #[test]
    fn one_non_leader_true_on_five() {
        for who in 1..5 {
            let mut inputs = [false; 5];
            inputs[who] = true;
            let out = or(5, 0, &inputs, who as u64);
            assert_eq!(out.total_pulses, 15);
            assert_eq!(out.unwrap_outputs(), vec![true; 5]);
        }
    }

    #[test]
    fn or_leader_returns_last_and_one_pulse_in_flight() {
        let out = or(6, 2, &[false, true, false, false, true, false], 9);
        assert_eq!(out.return_order.last(), Some(&2));
        assert_eq!(out.max_in_flight, 1);
    }

    fn bit_send(n: usize, bits: &[Option<Trit>], dir: BitDirection, seed: u64) -> ExecutionOutcome<Option<Trit>> {
        run_bit_send(&RingConfig::new(n, 0), bits, dir, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap()
    }

    #[test]
    fn ccw_three() {
        let out = bit_send(3, &[Some(One), Some(Zero), Some(Bot)], BitDirection::Ccw, 1);
        assert!(out.quiescent);
        assert_eq!(out.unwrap_outputs(), vec![Some(Zero), Some(Bot), Some(One)]);
    }

    #[test]
    fn cw_three() {
        let out = bit_send(3, &[Some(One), Some(Zero), Some(Bot)], BitDirection::Cw, 1);
        assert_eq!(out.unwrap_outputs(), vec![Some(Bot), Some(One), Some(Zero)]);
    }

    #[test]
    fn all_bot_within_six_n() {
        for dir in [BitDirection::Ccw, BitDirection::Cw] {
            let out = bit_send(4, &[Some(Bot); 4], dir, 3);
            assert!(out.total_pulses <= 24);
            assert_eq!(out.unwrap_outputs(), vec![Some(Bot); 4]);
        }
    }

    #[test]
    fn relays_are_transparent() {
        for seed in 0..20 {
            let out = bit_send(5, &[Some(One), None, Some(Zero), None, None], BitDirection::Ccw, seed);
            assert_eq!(out.unwrap_outputs(), vec![Some(Zero), None, Some(One), None, None]);
        }
    }

    #[test]
    fn leader_as_relay() {
        let cfg = RingConfig::new(4, 0);
        for seed in 0..20 {
            let out = run_bit_send(
                &cfg,
                &[None, Some(Bot), Some(One), Some(Zero)],
                BitDirection::Ccw,
                SchedulerPolicy::random(seed),
                &RunOptions::default(),
            )
            .unwrap();
            assert!(out.quiescent);
            assert_eq!(out.unwrap_outputs(), vec![None, Some(One), Some(Zero), Some(Bot)]);
        }
    }

    #[test]
    fn pair_exchanges_bits() {
        for dir in [BitDirection::Ccw, BitDirection::Cw] {
            let out = bit_send(2, &[Some(Zero), Some(One)], dir, 4);
            assert_eq!(out.unwrap_outputs(), vec![Some(One), Some(Zero)]);
        }
    }
}
