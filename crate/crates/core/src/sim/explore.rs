//! Bounded exhaustive exploration of delivery interleavings.
//!
//! Futures cannot be cloned, so every explored prefix is rebuilt by
//! replaying it from the initial state. Sleep sets prune interleavings
//! that only reorder independent deliveries; two deliveries are
//! independent when they target different processes.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::rc::Rc;

use serde::Serialize;

use super::ctx::Ctx;
use super::engine::{Engine, Program, ProgramFactory, RunOptions};
use super::network::{DirectedLink, Network};
use super::scheduler::SchedulerPolicy;
use super::SimError;

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions {
    /// Longest schedule (in deliveries) that may be explored.
    pub depth_bound: usize,
    /// Number of explored schedule prefixes before giving up.
    pub max_states: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { depth_bound: 10_000, max_states: 2_000_000 }
    }
}

/// What distinguishes two complete executions from the outside.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Fingerprint {
    pub outputs: String,
    pub total_pulses: u64,
    pub quiescent: bool,
}

struct Explorer<T> {
    net: Network,
    factories: Rc<Vec<ProgramFactory<T>>>,
    opts: ExploreOptions,
    visited: usize,
    found: BTreeSet<Fingerprint>,
}

impl<T: Debug + 'static> Explorer<T> {
    fn replay(&self, prefix: &[DirectedLink]) -> Result<Engine<T>, SimError> {
        let run = RunOptions { record_trace: false, ..RunOptions::default() };
        let mut engine = Engine::new(&self.net, self.factories.clone(), SchedulerPolicy::fifo(), &run);
        engine.start()?;
        for &d in prefix {
            engine.deliver(d)?;
        }
        Ok(engine)
    }

    fn explore(&mut self, prefix: &mut Vec<DirectedLink>, sleep: Vec<DirectedLink>) -> Result<(), SimError> {
        self.visited += 1;
        if self.visited > self.opts.max_states {
            return Err(SimError::StateSpaceTooLarge { limit: self.opts.max_states });
        }
        let engine = self.replay(prefix)?;
        let enabled = engine.enabled();
        if enabled.is_empty() {
            let outcome = engine.finish()?.pop().expect("one segment");
            self.found.insert(Fingerprint {
                outputs: format!("{:?}", outcome.outputs),
                total_pulses: outcome.total_pulses,
                quiescent: outcome.quiescent,
            });
            return Ok(());
        }
        if prefix.len() >= self.opts.depth_bound {
            return Err(SimError::DepthBoundExceeded { bound: self.opts.depth_bound });
        }
        let dest: Vec<(DirectedLink, usize)> = enabled.iter().map(|&d| (d, engine.destination_process(d))).collect();
        drop(engine);
        let dest_of = |d: DirectedLink| dest.iter().find(|&&(e, _)| e == d).map(|&(_, p)| p);
        let mut done: Vec<DirectedLink> = Vec::new();
        for &t in &enabled {
            if sleep.contains(&t) {
                continue;
            }
            let pt = dest_of(t);
            let child_sleep = sleep
                .iter()
                .chain(done.iter())
                .copied()
                .filter(|&s| dest_of(s) != pt)
                .collect();
            prefix.push(t);
            self.explore(prefix, child_sleep)?;
            prefix.pop();
            done.push(t);
        }
        Ok(())
    }
}

/// Explores every delivery interleaving of the given programs and returns
/// the distinct fingerprints of the complete executions.
pub fn enumerate_schedules<T, F>(
    net: &Network,
    programs: F,
    opts: ExploreOptions,
) -> Result<BTreeSet<Fingerprint>, SimError>
where
    T: Debug + 'static,
    F: Fn(usize, Ctx) -> Program<T> + 'static,
{
    let factories: Vec<ProgramFactory<T>> = vec![Box::new(programs)];
    let mut explorer =
        Explorer { net: net.clone(), factories: Rc::new(factories), opts, visited: 0, found: BTreeSet::new() };
    explorer.explore(&mut Vec::new(), Vec::new())?;
    Ok(explorer.found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{compute_or, RingView};

    fn or_fingerprints(inputs: [bool; 3]) -> BTreeSet<Fingerprint> {
        enumerate_schedules(
            &Network::ring(3).unwrap(),
            move |i, ctx| Box::pin(async move { Ok(compute_or(&RingView::new(ctx, i == 0), inputs[i]).await) }),
            ExploreOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn compute_or_all_false_has_one_outcome() {
        let fps = or_fingerprints([false; 3]);
        assert_eq!(fps.len(), 1);
        let fp = fps.into_iter().next().unwrap();
        assert_eq!(fp.total_pulses, 9);
        assert!(fp.quiescent);
        assert_eq!(fp.outputs, format!("{:?}", vec![Some(false); 3]));
    }

    #[test]
    fn compute_or_one_true_agrees() {
        let fps = or_fingerprints([false, true, false]);
        assert_eq!(fps.len(), 1);
        assert_eq!(fps.first().unwrap().outputs, format!("{:?}", vec![Some(true); 3]));
    }

    #[test]
    fn single_ping() {
        let fps = enumerate_schedules(
            &Network::ring(2).unwrap(),
            |i, ctx| {
                Box::pin(async move {
                    if i == 0 {
                        ctx.send(1);
                    } else {
                        ctx.recv(0).await;
                    }
                    Ok(i)
                })
            },
            ExploreOptions::default(),
        )
        .unwrap();
        assert_eq!(fps.len(), 1);
    }

    #[test]
    fn state_limit_is_reported() {
        let res = enumerate_schedules(
            &Network::ring(4).unwrap(),
            |i, ctx| Box::pin(async move { Ok(compute_or(&RingView::new(ctx, i == 0), false).await) }),
            ExploreOptions { depth_bound: 10_000, max_states: 3 },
        );
        assert_eq!(res, Err(SimError::StateSpaceTooLarge { limit: 3 }));
    }
}
