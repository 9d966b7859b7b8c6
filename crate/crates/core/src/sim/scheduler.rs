use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::DirectedLink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Uniform choice among all deliverable pulses.
    UniformRandom,
    /// Oldest pending pulse first.
    FifoGlobal,
    /// Newest pending pulse first.
    LifoGlobal,
    /// Every interleaving, see [`crate::sim::enumerate_schedules`]. A
    /// single run under this policy follows the first schedule of the
    /// enumeration (lowest directed link first).
    Exhaustive,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform-random" | "random" => Ok(PolicyKind::UniformRandom),
            "fifo-global" | "fifo" => Ok(PolicyKind::FifoGlobal),
            "lifo-global" | "lifo" => Ok(PolicyKind::LifoGlobal),
            "exhaustive" | "exhaustive-enumeration" => Ok(PolicyKind::Exhaustive),
            other => Err(format!("unknown scheduler policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerPolicy {
    pub kind: PolicyKind,
    pub seed: u64,
}

impl SchedulerPolicy {
    pub fn random(seed: u64) -> Self {
        SchedulerPolicy { kind: PolicyKind::UniformRandom, seed }
    }

    pub fn fifo() -> Self {
        SchedulerPolicy { kind: PolicyKind::FifoGlobal, seed: 0 }
    }

    pub fn lifo() -> Self {
        SchedulerPolicy { kind: PolicyKind::LifoGlobal, seed: 0 }
    }
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        SchedulerPolicy::random(1)
    }
}

/// Directed links whose queue is non-empty, keyed by the pulse at the head.
pub(crate) enum ReadySet {
    Random { links: Vec<DirectedLink>, pos: Vec<usize> },
    Ordered { kind: PolicyKind, set: BTreeSet<(u64, DirectedLink)> },
}

const ABSENT: usize = usize::MAX;

impl ReadySet {
    pub fn new(kind: PolicyKind, directed_links: usize) -> Self {
        match kind {
            PolicyKind::UniformRandom => ReadySet::Random { links: Vec::new(), pos: vec![ABSENT; directed_links] },
            kind => ReadySet::Ordered { kind, set: BTreeSet::new() },
        }
    }

    fn key(kind: PolicyKind, dlink: DirectedLink, head: u64) -> u64 {
        match kind {
            PolicyKind::FifoGlobal => head,
            PolicyKind::LifoGlobal => u64::MAX - head,
            _ => dlink as u64,
        }
    }

    pub fn insert(&mut self, dlink: DirectedLink, head: u64) {
        match self {
            ReadySet::Random { links, pos } => {
                debug_assert_eq!(pos[dlink], ABSENT);
                pos[dlink] = links.len();
                links.push(dlink);
            }
            ReadySet::Ordered { kind, set } => {
                set.insert((Self::key(*kind, dlink, head), dlink));
            }
        }
    }

    pub fn remove(&mut self, dlink: DirectedLink, head: u64) {
        match self {
            ReadySet::Random { links, pos } => {
                let i = pos[dlink];
                debug_assert_ne!(i, ABSENT);
                links.swap_remove(i);
                if i < links.len() {
                    pos[links[i]] = i;
                }
                pos[dlink] = ABSENT;
            }
            ReadySet::Ordered { kind, set } => {
                set.remove(&(Self::key(*kind, dlink, head), dlink));
            }
        }
    }

    pub fn pick(&self, rng: &mut ChaCha8Rng) -> Option<DirectedLink> {
        match self {
            ReadySet::Random { links, .. } => {
                if links.is_empty() {
                    None
                } else {
                    Some(links[rng.gen_range(0..links.len())])
                }
            }
            ReadySet::Ordered { set, .. } => set.first().map(|&(_, d)| d),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            ReadySet::Random { links, .. } => links.is_empty(),
            ReadySet::Ordered { set, .. } => set.is_empty(),
        }
    }
}
