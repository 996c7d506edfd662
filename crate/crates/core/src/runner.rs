//! Drives scenario sessions against one shared environment and renders the
//! run artifacts (traces, audit export, archive dump, summary).

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::enet::{
    format_attrs, AttrValue, DecisionContext, Marking, NetDefinition, PlaceId, PolicyError,
    ProcedureTable, ResolutionPolicy, Run, RunOutcome, StepResult, TraceEvent,
};
use crate::nets::{self, attr, build_enr, build_ens, outbox_entry, procedures};
use crate::scenario::{
    ResolutionScript, Scenario, ScenarioError, ScenarioItem, SessionNet, SessionSpec,
    SymbolicPolicy,
};
use crate::services::{Environment, KeyRegistry, UserRecord};

/// Per-session resolution policy assembled from the scenario script.
pub enum SessionPolicy {
    Scripted {
        queues: BTreeMap<String, VecDeque<usize>>,
    },
    Symbolic {
        net: SessionNet,
        spec: SymbolicPolicy,
    },
}

impl SessionPolicy {
    pub fn for_session(session: &SessionSpec) -> SessionPolicy {
        match &session.script {
            ResolutionScript::Scripted(pairs) => {
                let mut queues: BTreeMap<String, VecDeque<usize>> = BTreeMap::new();
                for (place, index) in pairs {
                    queues.entry(place.clone()).or_default().push_back(*index);
                }
                SessionPolicy::Scripted { queues }
            }
            ResolutionScript::Symbolic(spec) => SessionPolicy::Symbolic {
                net: session.net,
                spec: spec.clone(),
            },
        }
    }
}

impl ResolutionPolicy for SessionPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        match self {
            SessionPolicy::Scripted { queues } => queues
                .get_mut(ctx.resolution_place.as_str())
                .and_then(VecDeque::pop_front)
                .ok_or_else(|| {
                    PolicyError::new(format!(
                        "resolution script exhausted at {}",
                        ctx.resolution_place
                    ))
                }),
            SessionPolicy::Symbolic { net, spec } => Ok(symbolic_decide(*net, spec, ctx)),
        }
    }
}

fn kernel_list_nonempty(ctx: &DecisionContext<'_>, name: &str) -> bool {
    ctx.kernel.list(name).is_some_and(|l| !l.is_empty())
}

fn symbolic_decide(net: SessionNet, spec: &SymbolicPolicy, ctx: &DecisionContext<'_>) -> usize {
    let place = ctx.resolution_place.as_str();
    let denied = spec.deny_at.contains(place);
    match (net, place) {
        (SessionNet::Ens, "br1") => {
            if denied {
                nets::ens::decide::BR1_DENY
            } else {
                nets::ens::decide::BR1_GRANT
            }
        }
        (SessionNet::Ens, "br2") => {
            if denied {
                nets::ens::decide::BR2_REFUSED
            } else {
                nets::ens::decide::BR2_OK
            }
        }
        (SessionNet::Ens, "br3") => {
            let sent = ctx.kernel.int(attr::SENT_COUNT).unwrap_or(0).max(0) as u64;
            let more_scripted = kernel_list_nonempty(ctx, attr::OUTBOX);
            let under_limit = spec.exit_after.is_none_or(|n| sent < n);
            if more_scripted && under_limit {
                nets::ens::decide::BR3_CONTINUE
            } else {
                nets::ens::decide::BR3_EXIT
            }
        }
        (SessionNet::Ens, "br4") => nets::ens::decide::BR4_EXIT,
        (SessionNet::Enr, "br1") => {
            if denied {
                nets::enr::decide::BR1_DENY
            } else {
                nets::enr::decide::BR1_GRANT
            }
        }
        (SessionNet::Enr, "br2") => {
            if denied {
                nets::enr::decide::BR2_REFUSED
            } else {
                nets::enr::decide::BR2_OK
            }
        }
        (SessionNet::Enr, "br3") => nets::enr::decide::BR3_EXIT,
        (SessionNet::Enr, "br4") => nets::enr::decide::BR4_EXIT,
        (SessionNet::Enr, "br5") => {
            let processed = ctx.kernel.int(attr::PROCESSED).unwrap_or(0).max(0) as u64;
            let more_pending = kernel_list_nonempty(ctx, attr::PENDING);
            let under_limit = spec.exit_after.is_none_or(|n| processed < n);
            if more_pending && under_limit {
                nets::enr::decide::BR5_CONTINUE
            } else {
                nets::enr::decide::BR5_EXIT
            }
        }
        // Unknown place on a custom net: first alternative.
        _ => 0,
    }
}

/// Wraps a session policy for the dry-run validator: it names the one
/// decision the canonical nets cannot absorb — continuing the ENR work loop
/// with nothing pending — instead of letting the run deadlock at b7. A
/// normal run does not enforce this; forced through the engine, the illegal
/// continue ends as a DEADLOCK outcome.
struct CheckedPolicy<'a> {
    inner: &'a mut SessionPolicy,
    net: SessionNet,
    enforce: bool,
}

impl ResolutionPolicy for CheckedPolicy<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        let index = self.inner.decide(ctx)?;
        if self.enforce
            && self.net == SessionNet::Enr
            && ctx.resolution_place.as_str() == "br5"
            && index == nets::enr::decide::BR5_CONTINUE
            && !kernel_list_nonempty(ctx, attr::PENDING)
        {
            return Err(PolicyError::new("continue with empty pending"));
        }
        Ok(index)
    }
}

pub fn build_environment(sc: &Scenario) -> Environment {
    let mut users = BTreeMap::new();
    for (id, seed) in &sc.users {
        users.insert(
            id.clone(),
            UserRecord::new(seed.access, seed.crypto_server_up, seed.sign_key.clone()),
        );
    }
    let mut registry = KeyRegistry::new();
    for ((sender, recipient), key) in &sc.pair_keys {
        registry.add_pair_key(sender, recipient, key.clone());
    }
    Environment::new(users, registry, sc.secmail_available)
}

fn net_for(session: &SessionSpec) -> NetDefinition {
    match session.net {
        SessionNet::Ens => build_ens(),
        SessionNet::Enr => build_enr(),
    }
}

/// M0 plus the session bindings: the acting user and, for ENS, the scripted
/// outbox.
pub fn seed_marking(net: &NetDefinition, session: &SessionSpec) -> Marking {
    let mut marking = Marking::initial(net);
    let kernel = marking
        .kernel_at_mut(&net.initial.place)
        .expect("initial marking has a kernel");
    kernel.set(attr::USER, AttrValue::Text(session.user.clone()));
    if session.net == SessionNet::Ens {
        let entries: Vec<AttrValue> = session
            .messages
            .iter()
            .map(|m| outbox_entry(&m.recipients, &m.subject, &m.body, &m.attachment))
            .collect();
        kernel.set(attr::OUTBOX, AttrValue::List(entries));
    }
    marking
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStatus {
    Outcome(RunOutcome),
    Failed(String),
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionStatus::Outcome(o) => write!(f, "{o}"),
            SessionStatus::Failed(_) => write!(f, "FAILED"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionArtifact {
    pub index: usize,
    pub net: SessionNet,
    pub user: String,
    pub status: SessionStatus,
    pub trace: Vec<TraceEvent>,
    pub final_place: Option<PlaceId>,
}

impl SessionArtifact {
    pub fn terminated(&self) -> bool {
        self.status == SessionStatus::Outcome(RunOutcome::Terminated)
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub scenario_name: String,
    pub seed: u64,
    pub sessions: Vec<SessionArtifact>,
    pub env: Environment,
    /// Set when execution stopped early (engine error, bad tamper target).
    pub error: Option<String>,
}

impl RunArtifacts {
    pub fn all_terminated(&self) -> bool {
        self.error.is_none() && self.sessions.iter().all(SessionArtifact::terminated)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub interleave: bool,
    pub max_steps_override: Option<u64>,
    pub seed_override: Option<u64>,
}

/// Executes all scenario items against one fresh environment.
pub fn execute(sc: &Scenario, opts: &RunOptions) -> RunArtifacts {
    execute_inner(sc, opts, false)
}

fn execute_inner(sc: &Scenario, opts: &RunOptions, enforce_checks: bool) -> RunArtifacts {
    let mut env = build_environment(sc);
    let procs = procedures();
    let max_steps = opts.max_steps_override.unwrap_or(sc.max_steps);
    let seed = opts.seed_override.unwrap_or(sc.seed);
    let mut artifacts = RunArtifacts {
        scenario_name: sc.name.clone(),
        seed,
        sessions: Vec::new(),
        env: env.clone(),
        error: None,
    };

    if opts.interleave {
        if sc
            .items
            .iter()
            .any(|i| matches!(i, ScenarioItem::Tamper(_)))
        {
            artifacts.error = Some("tamper directives require sequential mode".to_string());
            artifacts.env = env;
            return artifacts;
        }
        run_interleaved(sc, &mut env, &procs, max_steps, enforce_checks, &mut artifacts);
    } else {
        run_sequential(sc, &mut env, &procs, max_steps, enforce_checks, &mut artifacts);
    }
    artifacts.env = env;
    artifacts
}

fn finish_run(
    index: usize,
    session: &SessionSpec,
    run: Run<'_>,
    error: Option<String>,
) -> SessionArtifact {
    let status = match (&error, run.outcome()) {
        (Some(e), _) => SessionStatus::Failed(e.clone()),
        (None, Some(outcome)) => SessionStatus::Outcome(outcome),
        (None, None) => SessionStatus::Failed("run did not finish".to_string()),
    };
    let result = run.into_result();
    let final_place = result.marking.occupied_places().next().cloned();
    SessionArtifact {
        index,
        net: session.net,
        user: session.user.clone(),
        status,
        trace: result.trace,
        final_place,
    }
}

fn run_sequential(
    sc: &Scenario,
    env: &mut Environment,
    procs: &ProcedureTable<Environment>,
    max_steps: u64,
    enforce_checks: bool,
    artifacts: &mut RunArtifacts,
) {
    let mut session_index = 0usize;
    for item in &sc.items {
        match item {
            ScenarioItem::Tamper(t) => {
                let hit = env
                    .transport
                    .tamper(&t.sender, t.message_no, t.field, t.offset, t.mask);
                if !hit {
                    artifacts.error = Some(format!(
                        "tamper target not found: sender={} message_no={} field={} offset={}",
                        t.sender,
                        t.message_no,
                        t.field.name(),
                        t.offset
                    ));
                    return;
                }
            }
            ScenarioItem::Session(session) => {
                let net = net_for(session);
                let marking = seed_marking(&net, session);
                let mut policy = SessionPolicy::for_session(session);
                let mut checked = CheckedPolicy {
                    inner: &mut policy,
                    net: session.net,
                    enforce: enforce_checks,
                };
                let mut run = Run::new(&net, marking, max_steps);
                let mut failure: Option<String> = None;
                loop {
                    match run.step(&mut checked, procs, env) {
                        Ok(StepResult::Fired) => continue,
                        Ok(StepResult::Done(_)) => break,
                        Err(e) => {
                            failure = Some(e.to_string());
                            break;
                        }
                    }
                }
                let failed = failure.is_some();
                artifacts
                    .sessions
                    .push(finish_run(session_index, session, run, failure));
                session_index += 1;
                if failed {
                    artifacts.error = Some(format!(
                        "session {} did not complete",
                        session_index - 1
                    ));
                    return;
                }
            }
        }
    }
}

fn run_interleaved(
    sc: &Scenario,
    env: &mut Environment,
    procs: &ProcedureTable<Environment>,
    max_steps: u64,
    enforce_checks: bool,
    artifacts: &mut RunArtifacts,
) {
    let sessions: Vec<&SessionSpec> = sc.sessions().collect();
    let nets: Vec<NetDefinition> = sessions.iter().map(|s| net_for(s)).collect();
    let mut runs: Vec<Run<'_>> = sessions
        .iter()
        .zip(&nets)
        .map(|(session, net)| Run::new(net, seed_marking(net, session), max_steps))
        .collect();
    let mut policies: Vec<SessionPolicy> = sessions
        .iter()
        .map(|s| SessionPolicy::for_session(s))
        .collect();
    let mut failures: Vec<Option<String>> = vec![None; sessions.len()];

    // One firing per session per round, in declared order.
    loop {
        let mut all_done = true;
        for i in 0..runs.len() {
            if runs[i].is_done() || failures[i].is_some() {
                continue;
            }
            let mut checked = CheckedPolicy {
                inner: &mut policies[i],
                net: sessions[i].net,
                enforce: enforce_checks,
            };
            match runs[i].step(&mut checked, procs, env) {
                Ok(StepResult::Fired) => all_done = false,
                Ok(StepResult::Done(_)) => {}
                Err(e) => failures[i] = Some(e.to_string()),
            }
        }
        if all_done {
            break;
        }
    }

    for (i, (run, session)) in runs.into_iter().zip(&sessions).enumerate() {
        let failure = failures[i].clone();
        let failed = failure.is_some();
        artifacts
            .sessions
            .push(finish_run(i, session, run, failure));
        if failed && artifacts.error.is_none() {
            artifacts.error = Some(format!("session {i} did not complete"));
        }
    }
}

/// Parses, statically validates, and dry-runs a scenario. The dry-run
/// executes the whole scenario on a throwaway environment so that script
/// exhaustion, missing scripted messages and illegal continue decisions
/// surface at load time rather than mid-run.
pub fn load_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let sc = crate::scenario::parse_scenario(text)?;
    let dry = execute_inner(&sc, &RunOptions::default(), true);
    if let Some(error) = dry.error {
        for session in &dry.sessions {
            if let SessionStatus::Failed(msg) = &session.status {
                if msg.contains("continue with empty pending") {
                    return Err(ScenarioError::Validation(
                        "continue with empty pending".to_string(),
                    ));
                }
                return Err(ScenarioError::Validation(format!(
                    "session {} ({} {}): {msg}",
                    session.index, session.net, session.user
                )));
            }
        }
        return Err(ScenarioError::Validation(error));
    }
    Ok(sc)
}

pub fn render_trace(artifact: &SessionArtifact) -> String {
    let mut out = String::new();
    let final_place = artifact
        .final_place
        .as_ref()
        .map_or("-".to_string(), PlaceId::to_string);
    let _ = writeln!(
        out,
        "# session={} net={} user={} status={} firings={} final={}",
        artifact.index,
        artifact.net,
        artifact.user,
        artifact.status,
        artifact.trace.len(),
        final_place,
    );
    for ev in &artifact.trace {
        let consumed: Vec<&str> = ev.consumed.iter().map(PlaceId::as_str).collect();
        let decision = ev
            .decision
            .map_or("-".to_string(), |d| d.to_string());
        let _ = writeln!(
            out,
            "seq={} t={} from={} to={} decision={} attrs={}",
            ev.seq,
            ev.transition,
            consumed.join(","),
            ev.produced,
            decision,
            format_attrs(&ev.attrs_after),
        );
    }
    out
}

pub fn trace_file_name(artifact: &SessionArtifact) -> String {
    format!(
        "session_{:02}_{}_{}.trace",
        artifact.index, artifact.net, artifact.user
    )
}

pub fn render_summary(artifacts: &RunArtifacts) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}", artifacts.scenario_name);
    let _ = writeln!(out, "seed {}", artifacts.seed);
    let _ = writeln!(out, "sessions {}", artifacts.sessions.len());
    for s in &artifacts.sessions {
        let final_place = s.final_place.as_ref().map_or("-".to_string(), PlaceId::to_string);
        let _ = writeln!(
            out,
            "session {} {} {} status={} firings={} final={}",
            s.index,
            s.net,
            s.user,
            s.status,
            s.trace.len(),
            final_place,
        );
        if let SessionStatus::Failed(msg) = &s.status {
            let _ = writeln!(out, "session {} error {msg}", s.index);
        }
    }
    let _ = writeln!(out, "audit_records {}", artifacts.env.audit.len());
    let _ = writeln!(out, "archive_records {}", artifacts.env.archive.len());
    let _ = writeln!(
        out,
        "transport_messages {}",
        artifacts.env.transport.all_messages().count()
    );
    match &artifacts.error {
        None if artifacts.all_terminated() => {
            let _ = writeln!(out, "status ok");
        }
        None => {
            let _ = writeln!(out, "status incomplete");
        }
        Some(e) => {
            let _ = writeln!(out, "status error: {e}");
        }
    }
    out
}
