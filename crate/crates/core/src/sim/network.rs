//! Static wiring of a pulse network: processes, ports and bidirectional links.

use serde::{Deserialize, Serialize};

use super::SimError;

/// Local port index at a process.
pub type Port = usize;

/// Which way a pulse crosses a link.
///
/// Every link is stored as an ordered pair of endpoints `(a, b)`;
/// `Forward` travels from `a` to `b`. On rings built by
/// [`Network::ring`] the `a` end is port 1 of `p_j`, so `Forward` is
/// clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Backward => 1,
        }
    }
}

/// One endpoint of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub process: usize,
    pub port: Port,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
}

/// Identifier of a directed link: `2 * link + direction`.
pub(crate) type DirectedLink = usize;

#[derive(Debug, Clone)]
pub struct Network {
    links: Vec<Link>,
    /// `ports[p][port] = (link, direction of pulses sent from that port)`.
    ports: Vec<Vec<(usize, Direction)>>,
}

impl Network {
    /// Oriented ring of `n >= 2` processes: port 1 of `p_j` is wired to
    /// port 0 of `p_{j+1}`. For `n = 2` this yields two parallel links.
    pub fn ring(n: usize) -> Result<Self, SimError> {
        if n < 2 {
            return Err(SimError::BadTopology(format!("ring needs at least 2 processes, got {n}")));
        }
        let links = (0..n)
            .map(|j| Link {
                a: Endpoint { process: j, port: 1 },
                b: Endpoint { process: (j + 1) % n, port: 0 },
            })
            .collect();
        Self::from_links(n, links)
    }

    /// Builds a network from undirected edges; ports are numbered per
    /// process in order of first appearance in `edges`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, SimError> {
        let mut next_port = vec![0usize; n];
        let mut links = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(SimError::BadTopology(format!("invalid edge ({u}, {v})")));
            }
            let a = Endpoint { process: u, port: next_port[u] };
            next_port[u] += 1;
            let b = Endpoint { process: v, port: next_port[v] };
            next_port[v] += 1;
            links.push(Link { a, b });
        }
        Self::from_links(n, links)
    }

    fn from_links(n: usize, links: Vec<Link>) -> Result<Self, SimError> {
        let mut ports: Vec<Vec<Option<(usize, Direction)>>> = vec![Vec::new(); n];
        for (id, link) in links.iter().enumerate() {
            for (end, dir) in [(link.a, Direction::Forward), (link.b, Direction::Backward)] {
                let slots = &mut ports[end.process];
                if slots.len() <= end.port {
                    slots.resize(end.port + 1, None);
                }
                if slots[end.port].replace((id, dir)).is_some() {
                    return Err(SimError::BadTopology(format!(
                        "port {} of process {} wired twice",
                        end.port, end.process
                    )));
                }
            }
        }
        let ports = ports
            .into_iter()
            .enumerate()
            .map(|(p, slots)| {
                slots
                    .into_iter()
                    .enumerate()
                    .map(|(port, s)| {
                        s.ok_or_else(|| SimError::BadTopology(format!("port {port} of process {p} unwired")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Network { links, ports })
    }

    pub fn process_count(&self) -> usize {
        self.ports.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn degree(&self, process: usize) -> usize {
        self.ports[process].len()
    }

    /// Link and direction taken by a pulse sent from `(process, port)`.
    pub fn outgoing(&self, process: usize, port: Port) -> (usize, Direction) {
        self.ports[process][port]
    }

    pub(crate) fn directed(link: usize, dir: Direction) -> DirectedLink {
        2 * link + dir.index()
    }

    /// Receiving endpoint of a directed link.
    pub(crate) fn destination(&self, dlink: DirectedLink) -> Endpoint {
        let link = &self.links[dlink / 2];
        if dlink.is_multiple_of(2) {
            link.b
        } else {
            link.a
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ring_has_parallel_links() {
        let net = Network::ring(2).unwrap();
        assert_eq!(net.link_count(), 2);
        assert_eq!(net.outgoing(0, 1), (0, Direction::Forward));
        assert_eq!(net.outgoing(1, 0), (0, Direction::Backward));
        assert_eq!(net.outgoing(1, 1), (1, Direction::Forward));
        assert_eq!(net.outgoing(0, 0), (1, Direction::Backward));
        assert_eq!(net.destination(Network::directed(1, Direction::Forward)), Endpoint { process: 0, port: 0 });
    }

    #[test]
    fn ring_clockwise_wiring() {
        let net = Network::ring(5).unwrap();
        for j in 0..5 {
            let (link, dir) = net.outgoing(j, 1);
            let dest = net.destination(Network::directed(link, dir));
            assert_eq!(dest, Endpoint { process: (j + 1) % 5, port: 0 });
        }
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Network::ring(1).is_err());
        assert!(Network::from_edges(3, &[(0, 0)]).is_err());
        assert!(Network::from_edges(3, &[(0, 5)]).is_err());
    }

    #[test]
    fn edge_ports_follow_appearance_order() {
        let net = Network::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(net.degree(1), 2);
        assert_eq!(net.outgoing(1, 0), (0, Direction::Backward));
        assert_eq!(net.outgoing(1, 1), (1, Direction::Forward));
        assert_eq!(net.outgoing(0, 1), (2, Direction::Backward));
    }
}
