//! Discrete-event runtime for asynchronous pulse networks.

mod ctx;
mod engine;
mod explore;
mod network;
mod scheduler;
mod trace;

use thiserror::Error;

pub use ctx::{CrossConsumption, Ctx, InstanceGuard, InstanceTag, Recv};
pub use engine::{
    run_composed, run_to_quiescence, ExecutionOutcome, Program, ProgramFactory, RunOptions, DEFAULT_STEP_BUDGET,
};
pub use explore::{enumerate_schedules, ExploreOptions, Fingerprint};
pub use network::{Direction, Endpoint, Link, Network, Port};
pub use scheduler::{PolicyKind, SchedulerPolicy};
pub use trace::{write_trace, EventKind, TraceEvent};

use crate::Fault;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("step budget exhausted after {steps} deliveries")]
    BudgetExhausted { steps: u64 },
    #[error("process {process} faulted: {fault}")]
    ProcessFault { process: usize, fault: Fault },
    #[error("process {} consumed pulse {} of another instance", .0.process, .0.pulse)]
    CrossInstanceConsumption(CrossConsumption),
    #[error("no pulse in transit but processes {waiting:?} are still waiting")]
    Deadlock { waiting: Vec<usize> },
    #[error("schedule exploration exceeded {limit} states")]
    StateSpaceTooLarge { limit: usize },
    #[error("schedule longer than the depth bound {bound}")]
    DepthBoundExceeded { bound: usize },
    #[error("bad topology: {0}")]
    BadTopology(String),
}
