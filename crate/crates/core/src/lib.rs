//! Content-oblivious pulse protocols on oriented rings and
//! 2-edge-connected graphs, with a deterministic simulator to run them.

pub mod aggregation;
pub mod bits;
pub mod counting;
pub mod exchange;
pub mod graph;
pub mod minfind;
mod error;
pub mod primitives;
pub mod ring;
pub mod sim;
pub mod stats;

pub use bits::{BitMessage, Trit};
pub use error::Fault;
pub use primitives::RingView;
pub use ring::{ConfigError, RingConfig, VirtualRing};
