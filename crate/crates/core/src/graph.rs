//! Synchronous rounds on 2-edge-connected graphs, simulated cycle by cycle
//! over a cycle cover with the ring message exchange.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitMessage;
use crate::exchange::msg_exchange;
use crate::primitives::RingView;
use crate::sim::{run_to_quiescence, Ctx, ExecutionOutcome, Network, Port, RunOptions, SchedulerPolicy, SimError};
use crate::Fault;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) is a self-loop, out of range or repeated")]
    BadEdge(usize, usize),
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("graph has a bridge ({0}, {1})")]
    NotTwoEdgeConnected(usize, usize),
    #[error("edge ({0}, {1}) lies on no cycle of the cover")]
    UncoveredEdge(usize, usize),
    #[error("leader {0} out of range")]
    LeaderOutOfRange(usize),
}

/// Undirected simple graph. Ports of a vertex are numbered by order of
/// appearance of its edges in `edges`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphTopology {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl GraphTopology {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u >= n || v >= n || u == v || !seen.insert(key(u, v)) {
                return Err(GraphError::BadEdge(u, v));
            }
        }
        Ok(GraphTopology { n, edges })
    }

    pub fn cycle(n: usize) -> Self {
        GraphTopology::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).expect("n >= 3")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        GraphTopology::new(n, edges).expect("simple")
    }

    pub fn network(&self) -> Network {
        Network::from_edges(self.n, &self.edges).expect("validated edges")
    }

    /// Neighbours of every vertex in port order.
    pub fn ports(&self) -> Vec<Vec<usize>> {
        let mut ports = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            ports[u].push(v);
            ports[v].push(u);
        }
        ports
    }

    /// Sorted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = self.ports();
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !std::mem::replace(&mut seen[w], true) {
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Bridges by DFS low-links, as normalised `(min, max)` pairs.
    pub fn bridges(&self) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let mut disc = vec![usize::MAX; self.n];
        let mut low = vec![0; self.n];
        let mut time = 0;
        let mut out = Vec::new();
        for root in 0..self.n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (vertex, parent, next neighbour index)
            let mut stack = vec![(root, usize::MAX, 0)];
            disc[root] = time;
            low[root] = time;
            time += 1;
            while let Some(&mut (u, parent, ref mut i)) = stack.last_mut() {
                if *i < adj[u].len() {
                    let w = adj[u][*i];
                    *i += 1;
                    if w == parent {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = time;
                        low[w] = time;
                        time += 1;
                        stack.push((w, u, 0));
                    } else {
                        low[u] = low[u].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if parent != usize::MAX {
                        low[parent] = low[parent].min(low[u]);
                        if low[u] > disc[parent] {
                            out.push(key(parent, u));
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// True iff the connected graph `g` has no bridge.
pub fn is_two_edge_connected(g: &GraphTopology) -> Result<bool, GraphError> {
    if !g.is_connected() {
        return Err(GraphError::DisconnectedGraph);
    }
    Ok(g.bridges().is_empty())
}

/// Ordered simple cycles covering every edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleCover {
    /// Each cycle lists its vertices in orientation order; the last vertex
    /// is joined back to the first.
    pub cycles: Vec<Vec<usize>>,
}

impl CycleCover {
    pub fn edges_of(cycle: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..cycle.len()).map(move |k| key(cycle[k], cycle[(k + 1) % cycle.len()]))
    }

    /// Number of cycles through each edge.
    pub fn multiplicity(&self) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for c in &self.cycles {
            for e in Self::edges_of(c) {
                *m.entry(e).or_insert(0) += 1;
            }
        }
        m
    }

    /// Indices of the cycles through `v`, in cover order.
    pub fn cycles_of(&self, v: usize) -> Vec<usize> {
        (0..self.cycles.len()).filter(|&c| self.cycles[c].contains(&v)).collect()
    }

    /// First cycle through each edge.
    pub fn first_cycle(&self) -> BTreeMap<(usize, usize), usize> {
        let mut first = BTreeMap::new();
        for (i, c) in self.cycles.iter().enumerate() {
            for e in Self::edges_of(c) {
                first.entry(e).or_insert(i);
            }
        }
        first
    }

    pub fn check(&self, g: &GraphTopology) -> Result<(), GraphError> {
        let m = self.multiplicity();
        for &(u, v) in &g.edges {
            if !m.contains_key(&key(u, v)) {
                return Err(GraphError::UncoveredEdge(u, v));
            }
        }
        Ok(())
    }
}

/// Shortest path from `s` to `t` not using the edge `{s, t}`.
fn path_avoiding(adj: &[Vec<usize>], s: usize, t: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[s] = s;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if prev[w] != usize::MAX || (u == s && w == t) {
                continue;
            }
            prev[w] = u;
            if w == t {
                let mut path = vec![t];
                let mut x = t;
                while x != s {
                    x = prev[x];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(w);
        }
    }
    None
}

/// Deterministic cover: repeatedly closes a shortest cycle through the
/// smallest uncovered edge.
pub fn compute_cycle_cover(g: &GraphTopology) -> Result<CycleCover, GraphError> {
    if !g.is_connected() {
        return Err(GraphError::DisconnectedGraph);
    }
    if let Some(&(u, v)) = g.bridges().first() {
        return Err(GraphError::NotTwoEdgeConnected(u, v));
    }
    let adj = g.adjacency();
    let mut uncovered: BTreeSet<(usize, usize)> = g.edges.iter().map(|&(u, v)| key(u, v)).collect();
    let mut cycles = Vec::new();
    while let Some(&(u, v)) = uncovered.iter().next() {
        let cycle = path_avoiding(&adj, u, v).ok_or(GraphError::NotTwoEdgeConnected(u, v))?;
        for e in CycleCover::edges_of(&cycle) {
            uncovered.remove(&e);
        }
        cycles.push(cycle);
    }
    Ok(CycleCover { cycles })
}

/// Leader of each cycle: `leader` if it lies on the cycle, else the
/// smallest vertex.
pub fn cycle_leaders(cover: &CycleCover, leader: usize) -> Vec<usize> {
    cover
        .cycles
        .iter()
        .map(|c| if c.contains(&leader) { leader } else { *c.iter().min().expect("non-empty cycle") })
        .collect()
}

/// What a vertex needs to take part in the simulation; identical at every
/// vertex, since the topology is known.
pub struct SimulationPlan {
    pub topology: GraphTopology,
    pub cover: CycleCover,
    leaders: Vec<usize>,
    first: BTreeMap<(usize, usize), usize>,
    ports: Vec<Vec<usize>>,
}

impl SimulationPlan {
    pub fn new(topology: GraphTopology, leader: usize) -> Result<Self, GraphError> {
        if leader >= topology.n {
            return Err(GraphError::LeaderOutOfRange(leader));
        }
        let cover = compute_cycle_cover(&topology)?;
        cover.check(&topology)?;
        Ok(SimulationPlan {
            leaders: cycle_leaders(&cover, leader),
            first: cover.first_cycle(),
            ports: topology.ports(),
            topology,
            cover,
        })
    }

    fn port(&self, v: usize, u: usize) -> Port {
        self.ports[v].iter().position(|&w| w == u).expect("adjacent")
    }
}

/// Messages of one vertex for one round, keyed by neighbour. Absent or
/// empty entries send nothing.
pub type Mailbox = BTreeMap<usize, BitMessage>;

/// One synchronous round at vertex `v`: every message leaves on the first
/// cover cycle through its edge. Returns the non-empty messages received,
/// keyed by sender.
pub async fn graph_round(ctx: &Ctx, plan: &SimulationPlan, v: usize, outgoing: &Mailbox) -> Result<Mailbox, Fault> {
    let _scope = ctx.instance();
    let mut received = Mailbox::new();
    for c in plan.cover.cycles_of(v) {
        let cycle = &plan.cover.cycles[c];
        let len = cycle.len();
        let k = cycle.iter().position(|&w| w == v).expect("on cycle");
        let (pred, succ) = (cycle[(k + len - 1) % len], cycle[(k + 1) % len]);
        let _cycle_scope = ctx.instance_labeled(c as u64);
        let ring = RingView::on_ports(ctx.clone(), [plan.port(v, pred), plan.port(v, succ)], plan.leaders[c] == v);
        let pick = |u: usize| {
            if plan.first[&key(v, u)] == c {
                outgoing.get(&u).cloned().unwrap_or_default()
            } else {
                BitMessage::empty()
            }
        };
        let got = msg_exchange(&ring, &pick(succ), &pick(pred)).await?;
        if !got.from_cw.is_empty() {
            received.insert(succ, got.from_cw);
        }
        if !got.from_ccw.is_empty() {
            received.insert(pred, got.from_ccw);
        }
    }
    Ok(received)
}

/// What a direct synchronous round delivers.
pub fn round_oracle(outgoing: &[Mailbox]) -> Vec<Mailbox> {
    let mut received = vec![Mailbox::new(); outgoing.len()];
    for (v, out) in outgoing.iter().enumerate() {
        for (&u, msg) in out {
            if !msg.is_empty() {
                received[u].insert(v, msg.clone());
            }
        }
    }
    received
}

/// Simulates one round with the given per-vertex outgoing messages.
pub fn run_graph_round(
    plan: Rc<SimulationPlan>,
    outgoing: Vec<Mailbox>,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<Mailbox>, SimError> {
    let net = plan.topology.network();
    run_to_quiescence(
        &net,
        move |v, ctx| {
            let (plan, out) = (plan.clone(), outgoing[v].clone());
            Box::pin(async move { graph_round(&ctx, &plan, v, &out).await })
        },
        policy,
        opts,
    )
}

/// One vertex of a synchronous algorithm on a graph.
pub trait GraphRoundProcess {
    fn messages(&mut self, round: usize, neighbours: &[usize]) -> Mailbox;
    fn deliver(&mut self, round: usize, received: Mailbox) -> Result<(), Fault>;
}

/// Runs `rounds` synchronous rounds of `procs` and returns the final
/// processes.
pub fn run_graph_rounds<P: GraphRoundProcess + 'static>(
    plan: Rc<SimulationPlan>,
    procs: Vec<P>,
    rounds: usize,
    policy: SchedulerPolicy,
    opts: &RunOptions,
) -> Result<ExecutionOutcome<P>, SimError> {
    let net = plan.topology.network();
    let slots: Vec<std::cell::RefCell<Option<P>>> = procs.into_iter().map(|p| std::cell::RefCell::new(Some(p))).collect();
    run_to_quiescence(
        &net,
        move |v, ctx| {
            let plan = plan.clone();
            let mut proc = slots[v].borrow_mut().take().expect("one program per vertex");
            Box::pin(async move {
                let neighbours = plan.ports[v].clone();
                for r in 0..rounds {
                    let out = proc.messages(r, &neighbours);
                    let got = graph_round(&ctx, &plan, v, &out).await?;
                    proc.deliver(r, got)?;
                }
                Ok(proc)
            })
        },
        policy,
        opts,
    )
}

/// Upper bound on the pulses one edge carries in a round with messages of
/// at most `b` bits: each cycle through it runs at most `b` exchange
/// iterations of at most 15 pulses per edge, plus a final OR of 3.
pub fn edge_pulse_bound(b: usize, multiplicity: usize) -> u64 {
    ((15 * b + 3) * multiplicity) as u64
}

/// A cycle on `n >= 3` vertices in random order plus `chords` random extra
/// edges; always 2-edge-connected.
pub fn random_two_edge_connected<R: Rng>(n: usize, chords: usize, rng: &mut R) -> GraphTopology {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let mut present: BTreeSet<(usize, usize)> = edges.iter().map(|&(u, v)| key(u, v)).collect();
    let max_edges = n * (n - 1) / 2;
    let mut added = 0;
    while added < chords && present.len() < max_edges {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && present.insert(key(u, v)) {
            edges.push((u, v));
            added += 1;
        }
    }
    GraphTopology::new(n, edges).expect("simple by construction")
}
