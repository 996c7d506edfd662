//! A small E-net (evaluation net) engine.
//!
//! E-nets extend Petri nets with attribute-carrying tokens (kernels),
//! procedures attached to transitions, and resolution places that pick among
//! a decision transition's alternative outputs. Nets here are single-kernel
//! session nets: places have capacity one and the executor fires the unique
//! enabled transition until a terminal place is reached.

pub mod attr;
pub mod exec;
pub mod format;
pub mod guard;
pub mod marking;
pub mod net;
pub mod policy;

pub use attr::{format_attrs, AttrValue, Kernel};
pub use exec::{
    enabled_transitions, fire, resolve_decisions, run_from, run_to_terminal, EngineError,
    ProcedureContext, ProcedureError, ProcedureTable, Run, RunOutcome, RunResult, StepResult,
    TraceEvent,
};
pub use format::{dump_net, parse_net, NetFormatError};
pub use guard::{AttrDomain, Guard, GuardAtom};
pub use marking::Marking;
pub use net::{
    InitialMarking, InputArc, NetDefinition, PlaceCounts, PlaceId, PlaceKind, PlaceSpec, TransId,
    TransitionKind, TransitionSpec, ValidationReport, Violation,
};
pub use policy::{DecisionContext, FixedPolicy, PolicyError, ResolutionPolicy};
