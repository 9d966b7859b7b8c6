use std::cell::RefCell;
use std::collections::VecDeque;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ctx::{Ctx, ProcessState, Pulse};
use super::network::{DirectedLink, Network};
use super::scheduler::{ReadySet, SchedulerPolicy};
use super::trace::{EventKind, TraceEvent};
use super::SimError;
use crate::Fault;

/// A process program: resumable protocol logic, suspended at receives.
pub type Program<T> = Pin<Box<dyn Future<Output = Result<T, Fault>>>>;

/// Builds the program of process `i` for one composed instance.
pub type ProgramFactory<T> = Box<dyn Fn(usize, Ctx) -> Program<T>>;

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Maximum number of deliveries before the run is aborted.
    pub step_budget: u64,
    pub record_trace: bool,
    /// Stamp every pulse with the same tag and skip the consumption check.
    pub erase_tags: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { step_budget: DEFAULT_STEP_BUDGET, record_trace: true, erase_tags: false }
    }
}

impl RunOptions {
    /// No trace, for sweeps and large runs.
    pub fn quiet() -> Self {
        RunOptions { record_trace: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecutionOutcome<T> {
    /// Return value of each process, `None` if it never returned.
    pub outputs: Vec<Option<T>>,
    pub total_pulses: u64,
    /// Pulses per link, indexed by [`super::Direction::index`].
    pub edge_pulses: Vec<[u64; 2]>,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
    pub quiescent: bool,
    pub steps: u64,
    /// Processes in the order they returned.
    pub return_order: Vec<usize>,
    /// Largest number of pulses simultaneously on links.
    pub max_in_flight: usize,
    /// Pulses delivered but never consumed.
    pub unconsumed: usize,
}

impl<T> ExecutionOutcome<T> {
    /// Outputs of a run where every process returned.
    pub fn unwrap_outputs(self) -> Vec<T> {
        self.outputs
            .into_iter()
            .enumerate()
            .map(|(i, o)| o.unwrap_or_else(|| panic!("process {i} did not return")))
            .collect()
    }

    pub fn sum_edge_pulses(&self) -> u64 {
        self.edge_pulses.iter().map(|e| e[0] + e[1]).sum()
    }
}

struct Proc<T> {
    state: Rc<RefCell<ProcessState>>,
    future: Option<Program<Vec<T>>>,
    output: Option<Vec<T>>,
}

#[derive(Default, Clone)]
struct SegmentStats {
    pulses: u64,
    deliveries: u64,
    edge: Vec<[u64; 2]>,
    returns: Vec<usize>,
}

pub(crate) struct Engine<T> {
    net: Network,
    procs: Vec<Proc<T>>,
    queues: Vec<VecDeque<(Pulse, usize)>>,
    ready: ReadySet,
    next_pulse: u64,
    next_seq: u64,
    steps: u64,
    in_flight: usize,
    max_in_flight: usize,
    halted: usize,
    segments: Vec<SegmentStats>,
    trace: Option<Vec<TraceEvent>>,
}

fn composed<T: 'static>(i: usize, ctx: Ctx, factories: Rc<Vec<ProgramFactory<T>>>) -> Program<Vec<T>> {
    Box::pin(async move {
        let mut outs = Vec::with_capacity(factories.len());
        for (k, make) in factories.iter().enumerate() {
            ctx.begin_segment(k);
            outs.push(make(i, ctx.clone()).await?);
            ctx.end_segment();
        }
        Ok(outs)
    })
}

impl<T: 'static> Engine<T> {
    pub fn new(
        net: &Network,
        factories: Rc<Vec<ProgramFactory<T>>>,
        policy: SchedulerPolicy,
        opts: &RunOptions,
    ) -> Self {
        let n = net.process_count();
        let procs = (0..n)
            .map(|i| {
                let state = Rc::new(RefCell::new(ProcessState::new(i, opts.erase_tags)));
                let ctx = Ctx::new(state.clone(), net.degree(i));
                Proc { state, future: Some(composed(i, ctx, factories.clone())), output: None }
            })
            .collect();
        let dl = 2 * net.link_count();
        let empty = SegmentStats { edge: vec![[0, 0]; net.link_count()], ..Default::default() };
        Engine {
            net: net.clone(),
            procs,
            queues: vec![VecDeque::new(); dl],
            ready: ReadySet::new(policy.kind, dl),
            next_pulse: 0,
            next_seq: 0,
            steps: 0,
            in_flight: 0,
            max_in_flight: 0,
            halted: 0,
            segments: vec![empty; factories.len().max(1)],
            trace: opts.record_trace.then(Vec::new),
        }
    }

    /// Runs every process until it first blocks.
    pub fn start(&mut self) -> Result<(), SimError> {
        for p in 0..self.procs.len() {
            self.poll(p)?;
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn pick(&self, rng: &mut ChaCha8Rng) -> Option<DirectedLink> {
        self.ready.pick(rng)
    }

    /// Directed links with a deliverable pulse, ascending.
    pub fn enabled(&self) -> Vec<DirectedLink> {
        (0..self.queues.len()).filter(|&d| !self.queues[d].is_empty()).collect()
    }

    pub fn destination_process(&self, dlink: DirectedLink) -> usize {
        self.net.destination(dlink).process
    }

    fn record(&mut self, kind: EventKind, process: usize, port: usize, dlink: DirectedLink, pulse: &Pulse, segment: usize) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                seq: self.next_seq,
                kind,
                process,
                port,
                link: dlink / 2,
                direction: if dlink.is_multiple_of(2) { super::Direction::Forward } else { super::Direction::Backward },
                instance_tag: pulse.tag,
                pulse: pulse.id,
                segment,
            });
        }
        self.next_seq += 1;
    }

    /// Delivers the head pulse of `dlink` and resumes its receiver.
    pub fn deliver(&mut self, dlink: DirectedLink) -> Result<(), SimError> {
        let (pulse, segment) = {
            let q = &mut self.queues[dlink];
            let head = q.front().expect("deliver on an empty link").0.id;
            self.ready.remove(dlink, head);
            let item = q.pop_front().expect("non-empty");
            if let Some((next, _)) = q.front() {
                self.ready.insert(dlink, next.id);
            }
            item
        };
        self.in_flight -= 1;
        self.steps += 1;
        self.segments[segment].deliveries += 1;
        let dest = self.net.destination(dlink);
        self.record(EventKind::Deliver, dest.process, dest.port, dlink, &pulse, segment);
        self.procs[dest.process].state.borrow_mut().inbox.push_back((dest.port, pulse));
        self.poll(dest.process)
    }

    fn poll(&mut self, p: usize) -> Result<(), SimError> {
        let mut finished = None;
        if let Some(fut) = self.procs[p].future.as_mut() {
            let mut cx = Context::from_waker(Waker::noop());
            match fut.as_mut().poll(&mut cx) {
                Poll::Ready(Ok(outs)) => finished = Some(outs),
                Poll::Ready(Err(fault)) => return Err(SimError::ProcessFault { process: p, fault }),
                Poll::Pending => {}
            }
        }
        if let Some(outs) = finished {
            let proc = &mut self.procs[p];
            proc.output = Some(outs);
            proc.future = None;
            self.halted += 1;
        }
        let (sends, completed, violation) = {
            let mut st = self.procs[p].state.borrow_mut();
            let sends = std::mem::take(&mut st.outbox);
            let completed = std::mem::take(&mut st.completed);
            (sends, completed, st.violations.first().cloned())
        };
        if let Some(v) = violation {
            return Err(SimError::CrossInstanceConsumption(v));
        }
        for k in completed {
            self.segments[k].returns.push(p);
        }
        for (port, tag, segment) in sends {
            let (link, dir) = self.net.outgoing(p, port);
            let dlink = Network::directed(link, dir);
            let pulse = Pulse { id: self.next_pulse, tag };
            self.next_pulse += 1;
            let stats = &mut self.segments[segment];
            stats.pulses += 1;
            stats.edge[link][dir.index()] += 1;
            self.record(EventKind::Send, p, port, dlink, &pulse, segment);
            if self.queues[dlink].is_empty() {
                self.ready.insert(dlink, pulse.id);
            }
            self.queues[dlink].push_back((pulse, segment));
            self.in_flight += 1;
        }
        self.max_in_flight = self.max_in_flight.max(self.in_flight);
        Ok(())
    }

    /// Closes a run once no pulse is deliverable; one outcome per segment.
    pub fn finish(self) -> Result<Vec<ExecutionOutcome<T>>, SimError> {
        debug_assert!(self.ready.is_empty());
        let waiting: Vec<usize> = (0..self.procs.len()).filter(|&p| self.procs[p].future.is_some()).collect();
        if !waiting.is_empty() {
            return Err(SimError::Deadlock { waiting });
        }
        let unconsumed: usize = self.procs.iter().map(|p| p.state.borrow().inbox.len()).sum();
        let quiescent = self.halted == self.procs.len() && unconsumed == 0 && self.in_flight == 0;
        let mut outputs: Vec<VecDeque<T>> =
            self.procs.into_iter().map(|p| p.output.map(VecDeque::from).unwrap_or_default()).collect();
        let trace = self.trace.unwrap_or_default();
        let nseg = self.segments.len();
        let mut result = Vec::with_capacity(nseg);
        for (k, stats) in self.segments.into_iter().enumerate() {
            let seg_trace = if nseg == 1 {
                trace.clone()
            } else {
                trace.iter().filter(|e| e.segment == k).cloned().collect()
            };
            result.push(ExecutionOutcome {
                outputs: outputs.iter_mut().map(|o| o.pop_front()).collect(),
                total_pulses: stats.pulses,
                edge_pulses: stats.edge,
                trace: seg_trace,
                quiescent,
                steps: stats.deliveries,
                return_order: stats.returns,
                max_in_flight: self.max_in_flight,
                unconsumed,
            });
        }
        Ok(result)
    }
}

/// Runs one program per process until quiescence.
///
/// `programs(i, ctx)` builds the program of process `i`. The run is a
/// pure function of `(net, programs, policy)`.
pub fn run_to_quiescence<T, F>(
    net: &Network,
    programs: F,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<T>, SimError>
where
    T: 'static,
    F: Fn(usize, Ctx) -> Program<T> + 'static,
{
    let mut outs = run_composed(net, vec![Box::new(programs)], policy, opts)?;
    Ok(outs.pop().expect("one segment"))
}

/// Runs the programs back-to-back at every process: a process starts
/// program `k + 1` as soon as it returns from program `k`. Any pulse
/// consumed by an instance other than the one that emitted it fails the
/// run with [`SimError::CrossInstanceConsumption`].
pub fn run_composed<T: 'static>(
    net: &Network,
    sequence: Vec<ProgramFactory<T>>,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<Vec<ExecutionOutcome<T>>, SimError> {
    let mut engine = Engine::new(net, Rc::new(sequence), policy, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    engine.start()?;
    while let Some(d) = engine.pick(&mut rng) {
        if engine.steps() >= opts.step_budget {
            return Err(SimError::BudgetExhausted { steps: engine.steps() });
        }
        engine.deliver(d)?;
    }
    engine.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::EventKind;

    fn traversal(n: usize) -> impl Fn(usize, Ctx) -> Program<()> {
        move |i, ctx| {
            Box::pin(async move {
                if i == 0 {
                    ctx.send(1);
                    ctx.recv(0).await;
                } else {
                    ctx.recv(0).await;
                    ctx.send(1);
                }
                let _ = n;
                Ok(())
            })
        }
    }

    #[test]
    fn halting_immediately_is_quiescent() {
        let net = Network::ring(2).unwrap();
        let out = run_to_quiescence(&net, |_, _| Box::pin(async { Ok(()) }), SchedulerPolicy::default(), &RunOptions::default())
            .unwrap();
        assert!(out.quiescent);
        assert_eq!(out.total_pulses, 0);
        assert_eq!(out.outputs.len(), 2);
    }

    #[test]
    fn single_traversal_of_a_3_ring() {
        let net = Network::ring(3).unwrap();
        let out = run_to_quiescence(&net, traversal(3), SchedulerPolicy::random(7), &RunOptions::default()).unwrap();
        assert!(out.quiescent);
        assert_eq!(out.total_pulses, 3);
        assert_eq!(out.sum_edge_pulses(), 3);
        assert_eq!(out.trace.len(), 6);
        assert_eq!(out.return_order.last(), Some(&0));
        assert_eq!(out.edge_pulses, vec![[1, 0]; 3]);
    }

    #[test]
    fn waiting_forever_is_a_deadlock() {
        let net = Network::ring(3).unwrap();
        let err = run_to_quiescence(
            &net,
            |_, ctx| {
                Box::pin(async move {
                    ctx.recv(0).await;
                    Ok(())
                })
            },
            SchedulerPolicy::fifo(),
            &RunOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, SimError::Deadlock { waiting: vec![0, 1, 2] });
    }

    #[test]
    fn budget_stops_a_livelock() {
        let net = Network::ring(2).unwrap();
        let ping = |i: usize, ctx: Ctx| -> Program<()> {
            Box::pin(async move {
                if i == 0 {
                    ctx.send(1);
                }
                loop {
                    ctx.recv(0).await;
                    ctx.send(1);
                }
            })
        };
        let opts = RunOptions { step_budget: 100, ..RunOptions::quiet() };
        let err = run_to_quiescence(&net, ping, SchedulerPolicy::fifo(), &opts).unwrap_err();
        assert_eq!(err, SimError::BudgetExhausted { steps: 100 });
    }

    #[test]
    fn fault_is_reported_with_process() {
        let net = Network::ring(2).unwrap();
        let err = run_to_quiescence(
            &net,
            |i, _| Box::pin(async move { if i == 1 { Err(Fault::NoActiveProcess) } else { Ok(()) } }),
            SchedulerPolicy::fifo(),
            &RunOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, SimError::ProcessFault { process: 1, fault: Fault::NoActiveProcess });
    }

    #[test]
    fn pulses_on_a_link_arrive_in_send_order() {
        let net = Network::ring(3).unwrap();
        let burst = |i: usize, ctx: Ctx| -> Program<()> {
            Box::pin(async move {
                if i == 0 {
                    for _ in 0..20 {
                        ctx.send(1);
                    }
                } else if i == 1 {
                    for _ in 0..20 {
                        ctx.recv(0).await;
                    }
                }
                Ok(())
            })
        };
        for seed in 0..10 {
            let out = run_to_quiescence(&net, burst, SchedulerPolicy::random(seed), &RunOptions::default()).unwrap();
            let delivered: Vec<u64> =
                out.trace.iter().filter(|e| e.kind == EventKind::Deliver).map(|e| e.pulse).collect();
            assert_eq!(delivered, (0..20).collect::<Vec<_>>());
        }
    }

    #[test]
    fn consuming_an_earlier_instance_pulse_is_caught() {
        let net = Network::ring(2).unwrap();
        let first: ProgramFactory<()> = Box::new(|i, ctx| {
            Box::pin(async move {
                if i == 0 {
                    ctx.send(1);
                }
                Ok(())
            })
        });
        let second: ProgramFactory<()> = Box::new(|i, ctx| {
            Box::pin(async move {
                if i == 1 {
                    ctx.recv(0).await;
                }
                Ok(())
            })
        });
        let err = run_composed(&net, vec![first, second], SchedulerPolicy::fifo(), &RunOptions::default()).unwrap_err();
        assert!(matches!(err, SimError::CrossInstanceConsumption(c) if c.process == 1));
    }

    #[test]
    fn erased_tags_hide_the_violation() {
        let net = Network::ring(2).unwrap();
        let mk = |sender: bool| -> ProgramFactory<()> {
            Box::new(move |i, ctx| {
                Box::pin(async move {
                    if sender && i == 0 {
                        ctx.send(1);
                    }
                    if !sender && i == 1 {
                        ctx.recv(0).await;
                    }
                    Ok(())
                })
            })
        };
        let opts = RunOptions { erase_tags: true, ..RunOptions::default() };
        let outs = run_composed(&net, vec![mk(true), mk(false)], SchedulerPolicy::fifo(), &opts).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].total_pulses, 1);
        assert_eq!(outs[1].total_pulses, 0);
    }

    #[test]
    fn composed_segments_are_reported_separately() {
        let net = Network::ring(3).unwrap();
        let seq: Vec<ProgramFactory<()>> = vec![Box::new(traversal(3)), Box::new(traversal(3))];
        let outs = run_composed(&net, seq, SchedulerPolicy::random(3), &RunOptions::default()).unwrap();
        assert_eq!(outs.iter().map(|o| o.total_pulses).collect::<Vec<_>>(), vec![3, 3]);
        assert!(outs.iter().all(|o| o.trace.len() == 6));
    }

    #[test]
    fn same_seed_same_trace() {
        let net = Network::ring(5).unwrap();
        let a = run_to_quiescence(&net, traversal(5), SchedulerPolicy::random(11), &RunOptions::default()).unwrap();
        let b = run_to_quiescence(&net, traversal(5), SchedulerPolicy::random(11), &RunOptions::default()).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}
