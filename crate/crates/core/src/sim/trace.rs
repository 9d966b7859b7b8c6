use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::ctx::InstanceTag;
use super::network::{Direction, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Send,
    Deliver,
}

/// One send or delivery. For sends `process`/`port` name the sender,
/// for deliveries the receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub process: usize,
    pub port: Port,
    pub link: usize,
    pub direction: Direction,
    pub instance_tag: InstanceTag,
    /// Send sequence number of the pulse; pairs a delivery with its send.
    pub pulse: u64,
    /// Index of the composed program that emitted the pulse.
    pub segment: usize,
}

/// Writes the trace as JSON lines, one event per line.
pub fn write_trace<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
