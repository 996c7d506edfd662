//! The step executor: enabledness, firing, and whole-run driving.

use std::collections::BTreeMap;

use super::attr::{AttrValue, Kernel};
use super::marking::Marking;
use super::net::{NetDefinition, PlaceId, TransId, TransitionKind, TransitionSpec};
use super::policy::{DecisionContext, PolicyError, ResolutionPolicy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ProcedureError {
    pub message: String,
}

impl ProcedureError {
    pub fn new(message: impl Into<String>) -> Self {
        ProcedureError {
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("transition {0} is not enabled")]
    NotEnabled(TransId),
    #[error("unknown transition {0}")]
    UnknownTransition(TransId),
    #[error("decision transition {0} has a satisfied input but no resolution is available")]
    UnresolvedDecision(TransId),
    #[error("decision {transition} resolved to index {index} but arity is {arity}")]
    BadDecision {
        transition: TransId,
        index: usize,
        arity: usize,
    },
    #[error("no procedure registered under name {0}")]
    UnknownProcedure(String),
    #[error("procedure {procedure} failed at {transition}: {source}")]
    Procedure {
        transition: TransId,
        procedure: String,
        source: ProcedureError,
    },
    #[error("policy failed at {transition}: {source}")]
    Policy {
        transition: TransId,
        source: PolicyError,
    },
}

/// What a transition procedure sees while firing. Procedures mutate the
/// kernel and the environment; they never move kernels between places.
pub struct ProcedureContext<'a, E> {
    pub kernel: &'a mut Kernel,
    pub env: &'a mut E,
    /// Resolved output index for decision transitions.
    pub decision: Option<usize>,
    /// The place the kernel is about to be put on.
    pub target: &'a PlaceId,
    pub target_terminal: bool,
}

type ProcedureFn<E> = dyn Fn(&mut ProcedureContext<'_, E>) -> Result<(), ProcedureError>;

/// Named procedures a net's transitions can reference.
pub struct ProcedureTable<E> {
    procs: BTreeMap<String, Box<ProcedureFn<E>>>,
}

impl<E> Default for ProcedureTable<E> {
    fn default() -> Self {
        ProcedureTable {
            procs: BTreeMap::new(),
        }
    }
}

impl<E> ProcedureTable<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: &str, f: F)
    where
        F: Fn(&mut ProcedureContext<'_, E>) -> Result<(), ProcedureError> + 'static,
    {
        self.procs.insert(name.to_string(), Box::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&ProcedureFn<E>> {
        self.procs.get(name).map(|b| b.as_ref())
    }
}

/// One firing, as recorded in a run trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    /// Gapless from 0 within a run.
    pub seq: u64,
    pub transition: TransId,
    pub consumed: Vec<PlaceId>,
    pub produced: PlaceId,
    pub decision: Option<usize>,
    /// Kernel attributes after the procedure ran.
    pub attrs_after: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// A kernel reached a terminal place.
    Terminated,
    /// The step budget ran out first.
    StepLimit,
    /// A kernel is stuck on a non-terminal place with nothing enabled.
    Deadlock,
    /// More than one transition was enabled; the canonical nets are
    /// conflict-free, so this signals a model bug.
    Nondeterminism,
}

impl std::fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunOutcome::Terminated => "TERMINATED",
            RunOutcome::StepLimit => "STEP_LIMIT",
            RunOutcome::Deadlock => "DEADLOCK",
            RunOutcome::Nondeterminism => "NONDETERMINISM",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: RunOutcome,
    pub marking: Marking,
    pub trace: Vec<TraceEvent>,
}

/// The input arc (if exactly one) whose place holds a kernel satisfying the
/// arc's guard.
fn satisfied_input<'t>(t: &'t TransitionSpec, m: &Marking) -> Option<&'t PlaceId> {
    let mut found = None;
    for arc in &t.inputs {
        let Some(kernel) = m.kernel_at(&arc.place) else {
            continue;
        };
        if arc.guard.as_ref().is_some_and(|g| !g.satisfied_by(kernel)) {
            continue;
        }
        if found.is_some() {
            return None; // more than one satisfied alternative
        }
        found = Some(&arc.place);
    }
    found
}

fn resolved_index(
    t: &TransitionSpec,
    m: &Marking,
) -> Result<Option<usize>, EngineError> {
    match t.kind {
        TransitionKind::Simple => Ok(None),
        TransitionKind::Decision => {
            let place = t.resolution.as_ref().expect("validated decision");
            match m.pending_resolution(place) {
                Some(i) if i < t.outputs.len() => Ok(Some(i)),
                Some(i) => Err(EngineError::BadDecision {
                    transition: t.id.clone(),
                    index: i,
                    arity: t.outputs.len(),
                }),
                None => Err(EngineError::UnresolvedDecision(t.id.clone())),
            }
        }
    }
}

/// Transitions enabled under `m`, ordered by transition id. A transition is
/// enabled when exactly one input alternative is satisfied and the selected
/// output place is empty. Decision transitions need a pending resolution in
/// the marking; querying a policy is the executor's job (`resolve_decisions`).
pub fn enabled_transitions(
    net: &NetDefinition,
    m: &Marking,
) -> Result<Vec<TransId>, EngineError> {
    let mut out = Vec::new();
    for t in &net.transitions {
        if satisfied_input(t, m).is_none() {
            continue;
        }
        let idx = resolved_index(t, m)?;
        let target = &t.outputs[idx.unwrap_or(0)];
        if !m.is_occupied(target) {
            out.push(t.id.clone());
        }
    }
    out.sort();
    Ok(out)
}

/// Queries the policy once for every decision transition whose input is
/// satisfied and which has no pending resolution yet, caching the answer in
/// the marking. The cached value is consumed by the firing.
pub fn resolve_decisions(
    net: &NetDefinition,
    m: &mut Marking,
    policy: &mut dyn ResolutionPolicy,
) -> Result<(), EngineError> {
    for t in &net.transitions {
        if t.kind != TransitionKind::Decision {
            continue;
        }
        let Some(input) = satisfied_input(t, m) else {
            continue;
        };
        let place = t.resolution.as_ref().expect("validated decision").clone();
        if m.pending_resolution(&place).is_some() {
            continue;
        }
        let kernel = m.kernel_at(input).expect("satisfied input holds kernel");
        let ctx = DecisionContext {
            net: &net.name,
            transition: &t.id,
            resolution_place: &place,
            arity: t.outputs.len(),
            kernel,
        };
        let index = policy.decide(&ctx).map_err(|source| EngineError::Policy {
            transition: t.id.clone(),
            source,
        })?;
        if index >= t.outputs.len() {
            return Err(EngineError::BadDecision {
                transition: t.id.clone(),
                index,
                arity: t.outputs.len(),
            });
        }
        m.set_resolution(place, index);
    }
    Ok(())
}

/// Fires `t`: consumes the satisfied input kernel, runs the procedure on it,
/// and places it on the selected output. Returns the successor marking and
/// the trace event; the input marking is untouched, so a procedure failure
/// leaves no residue.
pub fn fire<E>(
    net: &NetDefinition,
    m: &Marking,
    t_id: &TransId,
    procedures: &ProcedureTable<E>,
    env: &mut E,
    seq: u64,
) -> Result<(Marking, TraceEvent), EngineError> {
    let t = net
        .transition(t_id)
        .ok_or_else(|| EngineError::UnknownTransition(t_id.clone()))?;
    let input = satisfied_input(t, m).ok_or_else(|| EngineError::NotEnabled(t_id.clone()))?;
    let decision = resolved_index(t, m)?;
    let target = &t.outputs[decision.unwrap_or(0)];
    if m.is_occupied(target) {
        return Err(EngineError::NotEnabled(t_id.clone()));
    }
    let target_terminal = net.is_terminal(target);

    let proc_fn = procedures
        .get(&t.procedure)
        .ok_or_else(|| EngineError::UnknownProcedure(t.procedure.clone()))?;

    let mut next = m.clone();
    let mut kernel = next.take_kernel(input).expect("satisfied input holds kernel");
    let mut ctx = ProcedureContext {
        kernel: &mut kernel,
        env,
        decision,
        target,
        target_terminal,
    };
    proc_fn(&mut ctx).map_err(|source| EngineError::Procedure {
        transition: t.id.clone(),
        procedure: t.procedure.clone(),
        source,
    })?;

    let attrs_after = kernel.attributes().clone();
    next.place_kernel(target.clone(), kernel);
    if let Some(place) = &t.resolution {
        next.take_resolution(place);
    }

    let event = TraceEvent {
        seq,
        transition: t.id.clone(),
        consumed: vec![input.clone()],
        produced: target.clone(),
        decision,
        attrs_after,
    };
    Ok((next, event))
}

#[derive(Debug)]
pub enum StepResult {
    Fired,
    Done(RunOutcome),
}

/// A single session run over one net, steppable so that several runs can be
/// interleaved against a shared environment.
pub struct Run<'n> {
    net: &'n NetDefinition,
    marking: Marking,
    trace: Vec<TraceEvent>,
    max_steps: u64,
    outcome: Option<RunOutcome>,
}

impl<'n> Run<'n> {
    pub fn new(net: &'n NetDefinition, initial: Marking, max_steps: u64) -> Self {
        Run {
            net,
            marking: initial,
            trace: Vec::new(),
            max_steps,
            outcome: None,
        }
    }

    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn outcome(&self) -> Option<RunOutcome> {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    /// Advances by at most one firing.
    pub fn step<E>(
        &mut self,
        policy: &mut dyn ResolutionPolicy,
        procedures: &ProcedureTable<E>,
        env: &mut E,
    ) -> Result<StepResult, EngineError> {
        if let Some(outcome) = self.outcome {
            return Ok(StepResult::Done(outcome));
        }
        if self
            .marking
            .occupied_places()
            .any(|p| self.net.is_terminal(p))
        {
            return Ok(self.finish(RunOutcome::Terminated));
        }
        if self.trace.len() as u64 >= self.max_steps {
            return Ok(self.finish(RunOutcome::StepLimit));
        }
        resolve_decisions(self.net, &mut self.marking, policy)?;
        let enabled = enabled_transitions(self.net, &self.marking)?;
        match enabled.len() {
            0 => Ok(self.finish(RunOutcome::Deadlock)),
            1 => {
                let seq = self.trace.len() as u64;
                let (next, event) = fire(self.net, &self.marking, &enabled[0], procedures, env, seq)?;
                self.marking = next;
                self.trace.push(event);
                Ok(StepResult::Fired)
            }
            _ => Ok(self.finish(RunOutcome::Nondeterminism)),
        }
    }

    fn finish(&mut self, outcome: RunOutcome) -> StepResult {
        self.outcome = Some(outcome);
        StepResult::Done(outcome)
    }

    pub fn into_result(self) -> RunResult {
        RunResult {
            outcome: self.outcome.unwrap_or(RunOutcome::StepLimit),
            marking: self.marking,
            trace: self.trace,
        }
    }
}

/// Drives a net from M0 until a terminal place is reached, nothing is
/// enabled, two things are enabled at once, or the budget runs out.
/// Procedure and policy failures propagate as errors.
pub fn run_to_terminal<E>(
    net: &NetDefinition,
    policy: &mut dyn ResolutionPolicy,
    procedures: &ProcedureTable<E>,
    env: &mut E,
    max_steps: u64,
) -> Result<RunResult, EngineError> {
    run_from(net, Marking::initial(net), policy, procedures, env, max_steps)
}

/// As `run_to_terminal` but from an explicit starting marking (the runner
/// seeds session kernels before starting).
pub fn run_from<E>(
    net: &NetDefinition,
    initial: Marking,
    policy: &mut dyn ResolutionPolicy,
    procedures: &ProcedureTable<E>,
    env: &mut E,
    max_steps: u64,
) -> Result<RunResult, EngineError> {
    let mut run = Run::new(net, initial, max_steps);
    loop {
        match run.step(policy, procedures, env)? {
            StepResult::Fired => continue,
            StepResult::Done(_) => return Ok(run.into_result()),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::enet::net::{InitialMarking, InputArc, NetDefinition, PlaceKind, PlaceSpec, TransitionSpec};
    use crate::enet::policy::FixedPolicy;

    fn noop_procs() -> ProcedureTable<()> {
        let mut t = ProcedureTable::new();
        t.register("noop", |_ctx| Ok(()));
        t.register("fail", |_ctx| Err(ProcedureError::new("boom")));
        t.register("count", |ctx| {
            let n = ctx.kernel.int("n").unwrap_or(0);
            ctx.kernel.set("n", AttrValue::Int(n + 1));
            Ok(())
        });
        t
    }

    fn chain_net() -> NetDefinition {
        NetDefinition {
            name: "chain".into(),
            places: vec![
                PlaceSpec::new("p0", PlaceKind::Peripheral),
                PlaceSpec::new("r1", PlaceKind::Resolution),
                PlaceSpec::new("p1", PlaceKind::General),
                PlaceSpec::new("p2", PlaceKind::General).terminal(),
                PlaceSpec::new("p3", PlaceKind::General).terminal(),
            ],
            transitions: vec![
                TransitionSpec::simple("t1", InputArc::new("p0"), "p1", "count"),
                TransitionSpec::decision(
                    "t2",
                    vec![InputArc::new("p1")],
                    vec!["p2".into(), "p3".into()],
                    "r1",
                    "count",
                ),
            ],
            domains: BTreeMap::new(),
            initial: InitialMarking {
                place: "p0".into(),
                attrs: BTreeMap::new(),
            },
        }
    }

    #[test]
    fn run_reaches_terminal_and_traces_gaplessly() {
        let net = chain_net();
        assert!(net.validate().ok());
        let result =
            run_to_terminal(&net, &mut FixedPolicy(1), &noop_procs(), &mut (), 100).unwrap();
        assert_eq!(result.outcome, RunOutcome::Terminated);
        assert_eq!(result.trace.len(), 2);
        for (i, ev) in result.trace.iter().enumerate() {
            assert_eq!(ev.seq, i as u64);
        }
        assert_eq!(result.trace[1].produced, "p3".into());
        assert_eq!(result.trace[1].decision, Some(1));
        assert_eq!(result.marking.kernel_at(&"p3".into()).unwrap().int("n"), Some(2));
        assert_eq!(result.marking.kernel_count(), 1);
    }

    #[test]
    fn zero_budget_is_a_step_limit_with_empty_trace() {
        let net = chain_net();
        let result = run_to_terminal(&net, &mut FixedPolicy(0), &noop_procs(), &mut (), 0).unwrap();
        assert_eq!(result.outcome, RunOutcome::StepLimit);
        assert!(result.trace.is_empty());
    }

    #[test]
    fn terminal_place_enables_nothing() {
        let net = chain_net();
        let mut m = Marking::empty();
        m.place_kernel("p2".into(), Kernel::new(0));
        assert_eq!(enabled_transitions(&net, &m).unwrap(), Vec::<TransId>::new());
    }

    #[test]
    fn unresolved_decision_is_an_error_without_policy() {
        let net = chain_net();
        let mut m = Marking::empty();
        m.place_kernel("p1".into(), Kernel::new(0));
        match enabled_transitions(&net, &m) {
            Err(EngineError::UnresolvedDecision(t)) => assert_eq!(t, "t2".into()),
            other => panic!("expected UnresolvedDecision, got {other:?}"),
        }
    }

    #[test]
    fn firing_a_disabled_transition_fails_and_changes_nothing() {
        let net = chain_net();
        let m = Marking::initial(&net);
        let before = m.clone();
        let err = fire(&net, &m, &"t2".into(), &noop_procs(), &mut (), 0).unwrap_err();
        assert!(matches!(err, EngineError::NotEnabled(_)));
        assert_eq!(m, before);
    }

    #[test]
    fn procedure_failure_is_atomic() {
        let mut net = chain_net();
        net.transitions[0].procedure = "fail".into();
        let m = Marking::initial(&net);
        let before = m.clone();
        let err = fire(&net, &m, &"t1".into(), &noop_procs(), &mut (), 0).unwrap_err();
        assert!(matches!(err, EngineError::Procedure { .. }));
        assert_eq!(m, before);
    }

    #[test]
    fn occupied_target_disables_the_transition() {
        let net = chain_net();
        let mut m = Marking::initial(&net);
        m.place_kernel("p1".into(), Kernel::new(1));
        // t1 would move the kernel from p0 onto the occupied p1.
        assert!(!enabled_transitions(&net, &m)
            .unwrap_or_default()
            .contains(&"t1".into()));
    }

    #[test]
    fn two_enabled_transitions_end_as_nondeterminism() {
        // Not a valid net (conflicting unguarded consumers); the executor
        // must still surface the conflict rather than pick silently.
        let mut net = chain_net();
        net.transitions
            .push(TransitionSpec::simple("t9", InputArc::new("p0"), "p3", "noop"));
        let result =
            run_to_terminal(&net, &mut FixedPolicy(0), &noop_procs(), &mut (), 10).unwrap();
        assert_eq!(result.outcome, RunOutcome::Nondeterminism);
        assert!(result.trace.is_empty());
    }

    #[test]
    fn dead_marking_is_a_deadlock() {
        let mut net = chain_net();
        net.places[3] = PlaceSpec::new("p2", PlaceKind::General); // no longer terminal
        let result =
            run_to_terminal(&net, &mut FixedPolicy(0), &noop_procs(), &mut (), 10).unwrap();
        assert_eq!(result.outcome, RunOutcome::Deadlock);
        assert!(result.marking.is_occupied(&"p2".into()));
    }

    #[test]
    fn replays_are_identical() {
        let net = chain_net();
        let a = run_to_terminal(&net, &mut FixedPolicy(1), &noop_procs(), &mut (), 100).unwrap();
        let b = run_to_terminal(&net, &mut FixedPolicy(1), &noop_procs(), &mut (), 100).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}
