//! Counting the size of an anonymous ring with a leader.
//!
//! The phased algorithm probes `i` fresh processes clockwise in phase `i`
//! and hands leadership to the last one probed, so no probe travels more
//! than `O(sqrt n)` hops. Once a probe wraps around the ring, the last
//! leader broadcasts how many processes it counted in its phase.

use serde::Serialize;

use crate::bits::{from_bits_lsb, to_bits_lsb};
use crate::primitives::RingView;
use crate::ring::RingConfig;
use crate::sim::{run_to_quiescence, ExecutionOutcome, RunOptions, SchedulerPolicy, SimError};
use crate::Fault;

/// Broadcasts `bits` from the calling process to all others, which run
/// [`rcv_bits`]. Each bit is two traversals in the same direction:
/// counter-clockwise for 0, clockwise for 1. A clockwise then
/// counter-clockwise pair ends the transmission.
pub async fn snd_bits(v: &RingView, bits: &[bool]) {
    let _scope = v.ctx().instance();
    for &bit in bits {
        let (out, back) = if bit { (1, 0) } else { (0, 1) };
        v.send_n(out, 2);
        v.recv_n(back, 2).await;
    }
    v.send(1);
    v.recv(0).await;
    v.send(0);
    v.recv(1).await;
}

pub async fn rcv_bits(v: &RingView) -> Result<Vec<bool>, Fault> {
    let _scope = v.ctx().instance();
    let mut bits = Vec::new();
    loop {
        let q = v.recv_any().await;
        v.send(1 - q);
        let u = v.recv_any().await;
        v.send(1 - u);
        match (q, u) {
            (1, 1) => bits.push(false),
            (0, 0) => bits.push(true),
            (0, 1) => return Ok(bits),
            (first, second) => return Err(Fault::MalformedTraversalPair { first, second }),
        }
    }
}

/// Broadcasts `value` LSB first; see [`snd_bits`].
pub async fn snd_count(v: &RingView, value: u64) {
    snd_bits(v, &to_bits_lsb(value)).await
}

pub async fn rcv_count(v: &RingView) -> Result<u64, Fault> {
    let bits = rcv_bits(v).await?;
    from_bits_lsb(&bits).ok_or_else(|| Fault::Decode(format!("{} bit count", bits.len())))
}

/// `O(n^2)` explore-and-bounce counting. Every process returns `n`.
///
/// The leader probes clockwise; each process reflects the first probe it
/// sees and forwards everything afterwards. Pulses alternate in direction
/// at a forwarding process, so two counter-clockwise pulses in a row mark
/// the end of counting.
pub async fn naive_count(v: &RingView) -> Result<u64, Fault> {
    let counting = v.ctx().instance();
    if v.is_leader() {
        let mut count = 0u64;
        v.send(1);
        while v.recv_any().await == 1 {
            count += 1;
            v.send(1);
        }
        v.send_n(0, 2);
        v.recv_n(1, 2).await;
        drop(counting);
        let n = count + 1;
        snd_count(v, n).await;
        Ok(n)
    } else {
        v.recv(0).await;
        v.send(0);
        loop {
            let q = v.recv_any().await;
            v.send(1 - q);
            if q == 1 {
                break;
            }
            v.recv(1).await;
            v.send(0);
        }
        drop(counting);
        rcv_count(v).await
    }
}

/// Local variables of the phased algorithm at the moment a process
/// leaves counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhasedState {
    pub phase: u64,
    pub counted: bool,
    pub relayed: u64,
    pub my_phase: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhasedOutput {
    pub n: u64,
    /// Clockwise distance from the original leader.
    pub distance: u64,
    pub state: PhasedState,
    /// Phases in which this process was the temporary leader.
    pub led: Vec<u64>,
}

/// `n` from the final phase and the last leader's count.
pub fn ring_size(final_phase: u64, count: u64) -> u64 {
    final_phase * (final_phase - 1) / 2 + count + 1
}

/// Clockwise distance of a process probed in `my_phase`, `k` of whose
/// phase-mates were probed after it.
pub fn distance(n: u64, final_phase: u64, my_phase: u64, k: u64) -> u64 {
    if my_phase < final_phase {
        my_phase * (my_phase + 1) / 2 - k
    } else {
        n - k - 1
    }
}

enum Role {
    Leader,
    NonLeader,
}

/// `O(n^1.5)` phased counting. Every process returns `n` and its
/// clockwise distance from the leader.
pub async fn phased_count(v: &RingView) -> Result<PhasedOutput, Fault> {
    let ctx = v.ctx().clone();
    let original = v.is_leader();
    let counting = ctx.instance();
    let mut st = PhasedState { phase: 1, counted: original, relayed: 0, my_phase: None };
    let mut role = if original { Role::Leader } else { Role::NonLeader };
    let mut led = Vec::new();
    let mut phase_scope = ctx.instance_labeled(1);
    let last_count = 'count: loop {
        match role {
            Role::Leader => {
                led.push(st.phase);
                let mut count = 0;
                loop {
                    v.send(1);
                    if v.recv_any().await == 1 {
                        count += 1;
                        if count == st.phase {
                            break;
                        }
                    } else {
                        v.send_n(0, 3);
                        v.recv_n(1, 3).await;
                        break 'count Some(count);
                    }
                }
                v.send(0);
                v.recv(1).await;
                v.recv(0).await;
                v.send(1);
                st.phase += 1;
                st.counted = true;
                st.relayed = 0;
                role = Role::NonLeader;
            }
            Role::NonLeader => {
                let q = v.recv_any().await;
                if !st.counted && q == 0 {
                    v.send(0);
                    st.counted = true;
                    st.my_phase = Some(st.phase);
                    continue;
                } else if st.counted && q == 0 {
                    st.relayed += 1;
                    v.send(1);
                    v.recv(1).await;
                    v.send(0);
                    continue;
                }
                v.send(0);
                if st.my_phase == Some(st.phase) && st.relayed == 0 {
                    v.send(1);
                    v.recv(0).await;
                    st.phase += 1;
                    role = Role::Leader;
                } else if v.recv_any().await == 0 {
                    v.send(1);
                    st.phase += 1;
                } else {
                    v.send(0);
                    break 'count None;
                }
            }
        }
        drop(phase_scope);
        phase_scope = ctx.instance_labeled(st.phase);
    };
    drop(phase_scope);
    drop(counting);
    let last_leader = last_count.is_some();
    let count = match last_count {
        Some(count) => {
            snd_count(v, count).await;
            count
        }
        None => rcv_count(v).await?,
    };
    let n = ring_size(st.phase, count);
    let d = if original {
        0
    } else {
        let my_phase = st.my_phase.ok_or(Fault::Decode("never probed".into()))?;
        let k = if last_leader { st.relayed } else { st.relayed.checked_sub(1).ok_or(Fault::Decode("relayed = 0".into()))? };
        distance(n, st.phase, my_phase, k)
    };
    Ok(PhasedOutput { n, distance: d, state: st, led })
}

fn run_ring<T: 'static, F, Fut>(config: &RingConfig, policy: SchedulerPolicy, opts: &RunOptions, f: F) -> Result<ExecutionOutcome<T>, SimError>
where
    F: Fn(RingView) -> Fut + Clone + 'static,
    Fut: std::future::Future<Output = Result<T, Fault>> + 'static,
{
    let leader = config.leader;
    run_to_quiescence(&config.network(), move |i, ctx| Box::pin(f.clone()(RingView::new(ctx, i == leader))), policy, opts)
}

pub fn run_naive_count(config: &RingConfig, policy: SchedulerPolicy, opts: &RunOptions) -> Result<ExecutionOutcome<u64>, SimError> {
    run_ring(config, policy, opts, |v| async move { naive_count(&v).await })
}

pub fn run_phased_count(
    config: &RingConfig,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<PhasedOutput>, SimError> {
    run_ring(config, policy, opts, |v| async move { phased_count(&v).await })
}

/// The leader broadcasts `value`; every process returns it.
pub fn run_broadcast(config: &RingConfig, value: u64, policy: SchedulerPolicy, opts: &RunOptions) -> Result<ExecutionOutcome<u64>, SimError> {
    run_ring(config, policy, opts, move |v| async move {
        if v.is_leader() {
            snd_count(&v, value).await;
            Ok(value)
        } else {
            rcv_count(&v).await
        }
    })
}
