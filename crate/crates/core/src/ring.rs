//! Oriented ring configurations and the virtual ring of active processes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::bit_length;
use crate::sim::Network;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("a ring needs at least 2 processes, got {0}")]
    TooSmall(usize),
    #[error("leader {leader} out of range for n = {n}")]
    LeaderOutOfRange { leader: usize, n: usize },
    #[error("{field} has {got} entries, expected {n}")]
    LengthMismatch { field: &'static str, got: usize, n: usize },
    #[error("identifiers are not pairwise distinct")]
    DuplicateIds,
    #[error("the leader must be active")]
    LeaderInactive,
    #[error("no active process")]
    NoActiveProcess,
    #[error("distances are not a permutation of 0..n with the leader at 0")]
    NotAPermutationOfRange,
}

/// Static description of an oriented ring. Port 1 of process `j` faces
/// its clockwise successor `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingConfig {
    pub n: usize,
    #[serde(default)]
    pub leader: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<bool>>,
}

impl RingConfig {
    pub fn new(n: usize, leader: usize) -> Self {
        RingConfig { n, leader, ids: None, inputs: None, active: None }
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn with_inputs(mut self, inputs: Vec<u64>) -> Self {
        self.inputs = Some(inputs);
        self
    }

    pub fn with_active(mut self, active: Vec<bool>) -> Self {
        self.active = Some(active);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n;
        if n < 2 {
            return Err(ConfigError::TooSmall(n));
        }
        if self.leader >= n {
            return Err(ConfigError::LeaderOutOfRange { leader: self.leader, n });
        }
        let check_len = |field, got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(ConfigError::LengthMismatch { field, got, n })
            }
        };
        if let Some(ids) = &self.ids {
            check_len("ids", ids.len())?;
            if ids.iter().collect::<BTreeSet<_>>().len() != n {
                return Err(ConfigError::DuplicateIds);
            }
        }
        if let Some(inputs) = &self.inputs {
            check_len("inputs", inputs.len())?;
        }
        if let Some(active) = &self.active {
            check_len("active", active.len())?;
            if !active[self.leader] {
                return Err(ConfigError::LeaderInactive);
            }
        }
        Ok(())
    }

    pub fn network(&self) -> Network {
        Network::ring(self.n).expect("validated ring size")
    }

    pub fn is_leader(&self, p: usize) -> bool {
        p == self.leader
    }

    pub fn is_active(&self, p: usize) -> bool {
        self.active.as_ref().is_none_or(|a| a[p])
    }

    /// Clockwise distance from the leader to `p`.
    pub fn distance(&self, p: usize) -> usize {
        (p + self.n - self.leader) % self.n
    }

    /// Largest identifier bit length, if identifiers are present.
    pub fn lambda(&self) -> Option<usize> {
        self.ids.as_ref().map(|ids| ids.iter().map(|&x| bit_length(x)).max().unwrap_or(1))
    }
}

/// The ring obtained by contracting every maximal run of relays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VirtualRing {
    /// Active processes in clockwise order, starting from the lowest index.
    pub actives: Vec<usize>,
    /// `segments[k]`: relays strictly between `actives[k]` and its
    /// clockwise active successor.
    pub segments: Vec<Vec<usize>>,
}

impl VirtualRing {
    pub fn len(&self) -> usize {
        self.actives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actives.is_empty()
    }

    /// Walks the contraction back out into the physical clockwise order.
    pub fn expand(&self) -> Vec<usize> {
        self.actives.iter().zip(&self.segments).flat_map(|(&a, seg)| std::iter::once(a).chain(seg.iter().copied())).collect()
    }

    /// Position of `p` among the actives.
    pub fn position(&self, p: usize) -> Option<usize> {
        self.actives.iter().position(|&a| a == p)
    }

    /// Clockwise active neighbour of the `k`-th active.
    pub fn cw(&self, k: usize) -> usize {
        self.actives[(k + 1) % self.len()]
    }

    /// Counter-clockwise active neighbour of the `k`-th active.
    pub fn ccw(&self, k: usize) -> usize {
        self.actives[(k + self.len() - 1) % self.len()]
    }
}

/// Contracts the relay segments of `config`; without an active mask every
/// process is active.
pub fn virtual_ring(config: &RingConfig) -> Result<VirtualRing, ConfigError> {
    virtual_ring_of(&(0..config.n).map(|p| config.is_active(p)).collect::<Vec<_>>())
}

pub fn virtual_ring_of(active: &[bool]) -> Result<VirtualRing, ConfigError> {
    let actives: Vec<usize> = (0..active.len()).filter(|&p| active[p]).collect();
    if actives.is_empty() {
        return Err(ConfigError::NoActiveProcess);
    }
    let n = active.len();
    let segments = actives
        .iter()
        .map(|&a| (1..n).map(|s| (a + s) % n).take_while(|&p| !active[p]).collect())
        .collect();
    Ok(VirtualRing { actives, segments })
}

/// Names the processes by their clockwise distance from the leader.
pub fn assign_ids_from_distances(config: &RingConfig, distances: &[usize]) -> Result<RingConfig, ConfigError> {
    let n = config.n;
    if distances.len() != n {
        return Err(ConfigError::LengthMismatch { field: "distances", got: distances.len(), n });
    }
    let mut seen = vec![false; n];
    for &d in distances {
        if d >= n || std::mem::replace(&mut seen[d], true) {
            return Err(ConfigError::NotAPermutationOfRange);
        }
    }
    if distances[config.leader] != 0 {
        return Err(ConfigError::NotAPermutationOfRange);
    }
    Ok(config.clone().with_ids(distances.iter().map(|&d| d as u64).collect()))
}
