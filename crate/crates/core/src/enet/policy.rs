//! Resolution policies: the external decider a resolution place queries.

use super::attr::Kernel;
use super::net::{PlaceId, TransId};

/// Everything a policy may look at. Policies must be deterministic for a
/// fixed context so that runs replay byte-identically.
#[derive(Debug)]
pub struct DecisionContext<'a> {
    pub net: &'a str,
    pub transition: &'a TransId,
    pub resolution_place: &'a PlaceId,
    /// Number of alternative outputs; the returned index must be below it.
    pub arity: usize,
    pub kernel: &'a Kernel,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct PolicyError {
    pub message: String,
}

impl PolicyError {
    pub fn new(message: impl Into<String>) -> Self {
        PolicyError {
            message: message.into(),
        }
    }
}

pub trait ResolutionPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError>;
}

impl<F> ResolutionPolicy for F
where
    F: FnMut(&DecisionContext<'_>) -> Result<usize, PolicyError>,
{
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        self(ctx)
    }
}

/// Always answers the same output index.
#[derive(Debug, Clone, Copy)]
pub struct FixedPolicy(pub usize);

impl ResolutionPolicy for FixedPolicy {
    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        Ok(self.0)
    }
}
