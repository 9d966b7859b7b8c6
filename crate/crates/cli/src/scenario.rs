//! Run descriptions: TOML config and graph files, and random filling of
//! whatever a file leaves out.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use copulse::graph::{random_two_edge_connected, GraphTopology};
use copulse::{BitMessage, RingConfig, Trit};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::protocols::Protocol;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub protocol: Option<String>,
    pub n: Option<usize>,
    pub leader: Option<usize>,
    pub ids: Option<Vec<u64>>,
    pub inputs: Option<Vec<u64>>,
    pub active: Option<Vec<bool>>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
    #[serde(default)]
    pub params: Params,
}

/// Protocol-specific parameters.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `ccw` or `cw`, for bit-send.
    pub direction: Option<String>,
    /// One character per process, `0`, `1` or `_` for no bit.
    pub trits: Option<String>,
    /// `[to_cw, to_ccw]` bit strings per active process, for msg-exchange.
    pub messages: Option<Vec<[String; 2]>>,
    /// `count`, `sum` or `max`.
    pub aggregate: Option<String>,
    /// Processes taking part in min-finding.
    pub competing: Option<Vec<bool>>,
    /// Bits per edge message, for graph-congest.
    pub bits: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub leader: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn load_graph(path: &Path) -> Result<(GraphTopology, Option<usize>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: GraphFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let g = GraphTopology::new(file.n, file.edges.iter().map(|e| (e[0], e[1])).collect())?;
    Ok((g, file.leader))
}

/// Everything one run needs, fully specified.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub ring: RingConfig,
    pub trits: Vec<Option<Trit>>,
    pub cw: bool,
    pub messages: Vec<Option<(BitMessage, BitMessage)>>,
    pub aggregate: String,
    pub competing: Vec<bool>,
    pub graph: Option<GraphTopology>,
    pub bits: usize,
}

fn parse_bits(s: &str) -> Result<BitMessage> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => bail!("`{s}` is not a bit string"),
        })
        .collect::<Result<Vec<_>>>()
        .map(BitMessage)
}

fn distinct_ids(rng: &mut ChaCha8Rng, n: usize) -> Vec<u64> {
    let mut seen = BTreeSet::new();
    while seen.len() < n {
        seen.insert(rng.gen_range(0..1u64 << 16));
    }
    let mut ids: Vec<u64> = seen.into_iter().collect();
    ids.shuffle(rng);
    ids
}

fn random_message(rng: &mut ChaCha8Rng) -> BitMessage {
    let len = rng.gen_range(0..=4);
    BitMessage((0..len).map(|_| rng.gen()).collect())
}

impl Scenario {
    /// Takes what `file` and `graph` specify and draws the rest from
    /// `seed`. `n` overrides the file.
    pub fn build(
        protocol: Protocol,
        file: &ConfigFile,
        n: Option<usize>,
        graph: Option<(GraphTopology, Option<usize>)>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (graph, graph_leader) = match (protocol, graph) {
            (Protocol::GraphCongest, Some((g, l))) => (Some(g), l),
            (Protocol::GraphCongest, None) => {
                let n = n.or(file.n).unwrap_or(6);
                if n < 3 {
                    bail!("graph-congest needs n >= 3");
                }
                let chords = rng.gen_range(0..=n);
                (Some(random_two_edge_connected(n, chords, &mut rng)), None)
            }
            _ => (None, None),
        };
        let n = match &graph {
            Some(g) => g.n,
            None => n.or(file.n).context("ring size missing: pass --n or set `n` in the config")?,
        };
        let leader = graph_leader.or(file.leader).unwrap_or(0);
        let mut ring = RingConfig::new(n, leader);
        ring.ids = Some(match &file.ids {
            Some(ids) => ids.clone(),
            None => distinct_ids(&mut rng, n),
        });
        ring.inputs = Some(match &file.inputs {
            Some(xs) => xs.clone(),
            None if protocol == Protocol::ComputeOr => (0..n).map(|_| rng.gen_range(0..2)).collect(),
            None => (0..n).map(|_| rng.gen_range(0..256)).collect(),
        });
        ring.active = file.active.clone();
        if graph.is_none() {
            ring.validate()?;
        } else if leader >= n {
            bail!("leader {leader} out of range");
        }

        let p = &file.params;
        let trits = match &p.trits {
            Some(s) => s
                .chars()
                .map(|c| match c {
                    '0' => Ok(Some(Trit::Zero)),
                    '1' => Ok(Some(Trit::One)),
                    '_' => Ok(Some(Trit::Bot)),
                    '.' => Ok(None),
                    _ => bail!("trit `{c}` is not one of 0, 1, _, ."),
                })
                .collect::<Result<Vec<_>>>()?,
            None => (0..n)
                .map(|q| ring.is_active(q).then(|| Trit::ALL[rng.gen_range(0..3)]))
                .collect(),
        };
        if trits.len() != n {
            bail!("{} trits for {n} processes", trits.len());
        }
        let cw = match p.direction.as_deref() {
            None | Some("ccw") => false,
            Some("cw") => true,
            Some(d) => bail!("direction `{d}` is neither ccw nor cw"),
        };
        let messages = match &p.messages {
            Some(ms) => {
                let mut it = ms.iter();
                let mut out = Vec::with_capacity(n);
                for q in 0..n {
                    out.push(if ring.is_active(q) {
                        let [cw, ccw] = it.next().context("fewer messages than active processes")?;
                        Some((parse_bits(cw)?, parse_bits(ccw)?))
                    } else {
                        None
                    });
                }
                out
            }
            None => (0..n).map(|q| ring.is_active(q).then(|| (random_message(&mut rng), random_message(&mut rng)))).collect(),
        };
        let competing = match &p.competing {
            Some(c) if c.len() == n => c.clone(),
            Some(c) => bail!("{} competing flags for {n} processes", c.len()),
            None => {
                let mut c: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                c[rng.gen_range(0..n)] = true;
                c
            }
        };
        let aggregate = p.aggregate.clone().unwrap_or_else(|| "sum".into());
        let bits = match p.bits {
            Some(b) => b,
            None => rng.gen_range(1..=3),
        };
        Ok(Scenario { ring, trits, cw, messages, aggregate, competing, graph, bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_win_over_random_ones() {
        let file: ConfigFile = toml::from_str(
            r#"
            n = 3
            leader = 1
            inputs = [0, 1, 0]
            [params]
            trits = "10_"
            direction = "cw"
            "#,
        )
        .unwrap();
        let sc = Scenario::build(Protocol::BitSend, &file, None, None, 4).unwrap();
        assert_eq!(sc.ring.leader, 1);
        assert_eq!(sc.ring.inputs, Some(vec![0, 1, 0]));
        assert_eq!(sc.trits, vec![Some(Trit::One), Some(Trit::Zero), Some(Trit::Bot)]);
        assert!(sc.cw);
    }

    #[test]
    fn same_seed_same_scenario() {
        let file = ConfigFile::default();
        let a = Scenario::build(Protocol::MsgExchange, &file, Some(6), None, 9).unwrap();
        let b = Scenario::build(Protocol::MsgExchange, &file, Some(6), None, 9).unwrap();
        assert_eq!(a.messages, b.messages);
        assert_eq!(a.ring, b.ring);
    }

    #[test]
    fn rejects_bad_input() {
        let file: ConfigFile = toml::from_str("n = 1").unwrap();
        assert!(Scenario::build(Protocol::ComputeOr, &file, None, None, 1).is_err());
        assert!(toml::from_str::<ConfigFile>("n = 3\ncolour = 2").is_err());
        assert!(Scenario::build(Protocol::PhasedCount, &ConfigFile::default(), None, None, 1).is_err());
    }
}
