//! The process-side handle: send, blocking receive, and instance scoping.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll};

use serde::{Deserialize, Serialize};

use super::network::Port;

/// Opaque label of the protocol instance that emitted a pulse.
///
/// Tags never reach protocol logic; the engine only compares the tag of
/// a consumed pulse against the consumer's current instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceTag(pub u64);

impl InstanceTag {
    pub(crate) const ROOT: InstanceTag = InstanceTag(0x243f_6a88_85a3_08d3);

    fn child(self, label: u64, salt: u64) -> InstanceTag {
        // splitmix64 finalizer
        let mut z = self.0 ^ salt ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        InstanceTag(z ^ (z >> 31))
    }

    pub(crate) fn segment(k: usize) -> InstanceTag {
        Self::ROOT.child(k as u64, 0x5e9)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Pulse {
    pub id: u64,
    pub tag: InstanceTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossConsumption {
    pub process: usize,
    pub pulse: u64,
    pub expected: InstanceTag,
    pub found: InstanceTag,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    tag: InstanceTag,
    next_child: u64,
}

#[derive(Debug)]
pub(crate) struct ProcessState {
    pub process: usize,
    pub inbox: VecDeque<(Port, Pulse)>,
    pub outbox: Vec<(Port, InstanceTag, usize)>,
    pub completed: Vec<usize>,
    pub segment: usize,
    pub violations: Vec<CrossConsumption>,
    frames: Vec<Frame>,
    erase_tags: bool,
}

impl ProcessState {
    pub fn new(process: usize, erase_tags: bool) -> Self {
        ProcessState {
            process,
            inbox: VecDeque::new(),
            outbox: Vec::new(),
            completed: Vec::new(),
            segment: 0,
            violations: Vec::new(),
            frames: vec![Frame { tag: InstanceTag::segment(0), next_child: 0 }],
            erase_tags,
        }
    }

    fn current(&self) -> InstanceTag {
        if self.erase_tags {
            InstanceTag(0)
        } else {
            self.frames.last().map(|f| f.tag).unwrap_or(InstanceTag::ROOT)
        }
    }

    fn take(&mut self, filter: Filter) -> Option<Port> {
        let idx = self.inbox.iter().position(|(port, _)| filter.accepts(*port))?;
        let (port, pulse) = self.inbox.remove(idx)?;
        let expected = self.current();
        if !self.erase_tags && pulse.tag != expected {
            self.violations.push(CrossConsumption {
                process: self.process,
                pulse: pulse.id,
                expected,
                found: pulse.tag,
            });
        }
        Some(port)
    }
}

#[derive(Debug, Clone, Copy)]
enum Filter {
    Port(Port),
    Either(Port, Port),
    Any,
}

impl Filter {
    fn accepts(self, port: Port) -> bool {
        match self {
            Filter::Port(p) => p == port,
            Filter::Either(a, b) => port == a || port == b,
            Filter::Any => true,
        }
    }
}

/// Handle through which a process program talks to the network.
///
/// Cloning is cheap; all clones refer to the same process.
#[derive(Clone)]
pub struct Ctx {
    state: Rc<RefCell<ProcessState>>,
    degree: usize,
}

impl Ctx {
    pub(crate) fn new(state: Rc<RefCell<ProcessState>>, degree: usize) -> Self {
        Ctx { state, degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn send(&self, port: Port) {
        assert!(port < self.degree, "send on port {port} of a degree-{} process", self.degree);
        let mut st = self.state.borrow_mut();
        let tag = st.current();
        let segment = st.segment;
        st.outbox.push((port, tag, segment));
    }

    /// Waits for a pulse on `port`. Pulses on other ports stay buffered.
    pub fn recv(&self, port: Port) -> Recv {
        self.recv_filtered(Filter::Port(port))
    }

    /// Waits for a pulse on either port and returns the one it arrived on.
    /// Among buffered pulses the earliest arrival is taken.
    pub fn recv_either(&self, a: Port, b: Port) -> Recv {
        self.recv_filtered(Filter::Either(a, b))
    }

    pub fn recv_any(&self) -> Recv {
        self.recv_filtered(Filter::Any)
    }

    fn recv_filtered(&self, filter: Filter) -> Recv {
        Recv { ctx: self.clone(), filter }
    }

    /// Opens a nested protocol instance; it closes when the guard drops.
    /// Sibling instances are numbered in call order, so processes that
    /// run the same sequence of sub-protocols agree on their tags.
    pub fn instance(&self) -> InstanceGuard {
        let mut st = self.state.borrow_mut();
        let top = st.frames.last_mut().expect("frame stack never empty");
        let tag = top.tag.child(top.next_child, 0);
        top.next_child += 1;
        st.frames.push(Frame { tag, next_child: 0 });
        InstanceGuard { ctx: self.clone() }
    }

    /// Like [`Ctx::instance`] but with an explicit label, for instances
    /// that only a subset of processes take part in.
    pub fn instance_labeled(&self, label: u64) -> InstanceGuard {
        let mut st = self.state.borrow_mut();
        let top = st.frames.last().expect("frame stack never empty");
        let tag = top.tag.child(label, 0x1abe1);
        st.frames.push(Frame { tag, next_child: 0 });
        InstanceGuard { ctx: self.clone() }
    }

    pub(crate) fn begin_segment(&self, k: usize) {
        let mut st = self.state.borrow_mut();
        st.segment = k;
        st.frames.clear();
        st.frames.push(Frame { tag: InstanceTag::segment(k), next_child: 0 });
    }

    pub(crate) fn end_segment(&self) {
        let mut st = self.state.borrow_mut();
        let k = st.segment;
        st.completed.push(k);
    }
}

#[must_use = "the instance closes as soon as the guard is dropped"]
pub struct InstanceGuard {
    ctx: Ctx,
}

impl Drop for InstanceGuard {
    fn drop(&mut self) {
        let mut st = self.ctx.state.borrow_mut();
        if st.frames.len() > 1 {
            st.frames.pop();
        }
    }
}

/// Future returned by the receive calls on [`Ctx`]; resolves to the
/// port the consumed pulse arrived on.
pub struct Recv {
    ctx: Ctx,
    filter: Filter,
}

impl Future for Recv {
    type Output = Port;

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Port> {
        match self.ctx.state.borrow_mut().take(self.filter) {
            Some(port) => Poll::Ready(port),
            None => Poll::Pending,
        }
    }
}
