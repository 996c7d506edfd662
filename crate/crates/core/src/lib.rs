//! Secured-mail workflow simulation on an E-net engine.
//!
//! The crate has three layers:
//!
//! - [`enet`]: a generic E-net formalism — net definitions, kernels, guarded
//!   transitions with attached procedures, resolution policies, a
//!   deterministic step executor and trace recording.
//! - [`services`]: the simulated workstation environment the procedures talk
//!   to — authentication, a toy cipher with keyed integrity tags and
//!   signatures, a key registry, a numbered append-only audit log, a message
//!   archive and an in-memory mail transport.
//! - [`nets`]: the two canonical protocol nets, ENS (prepare and send a
//!   secured message) and ENR (receive and work on one), with their
//!   transition procedures bound to the services.
//!
//! On top sit [`analysis`] (exhaustive marking-graph construction,
//! deadlock/liveness checking and audit-log reports) and the scenario
//! machinery ([`scenario`], [`runner`]) that the `secmail` command-line tool
//! drives.

pub mod analysis;
pub mod enet;
pub mod nets;
pub mod runner;
pub mod scenario;
pub mod services;
