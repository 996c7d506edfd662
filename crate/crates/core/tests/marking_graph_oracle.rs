//! Confirms the abstract marking graphs against an independent brute-force
//! simulator: concrete runs through the real engine and procedures, trying
//! every resolution script to depth 50, with reached states folded through
//! the abstraction.
//!
//! The simulator re-implements enabledness from the net definition and
//! drives decisions by writing resolution values directly, so it shares no
//! code path with the declared abstract effects it is checking.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use secmail_core::analysis::{build_marking_graph, check_liveness, AbstractState, AbstractionSpec};
use secmail_core::enet::{
    fire, AttrValue, Marking, NetDefinition, PlaceId, TransitionKind, TransitionSpec,
};
use secmail_core::nets::{
    attr, build_enr, build_ens, enr_abstraction, ens_abstraction, outbox_entry, procedures,
};
use secmail_core::services::{Environment, KeyRegistry, Plaintext, UserRecord};

const ORACLE_DEPTH: u32 = 50;

fn oracle_env() -> Environment {
    let mut users = BTreeMap::new();
    users.insert("alice".to_string(), UserRecord::new(true, true, b"sk-alice".to_vec()));
    users.insert("bob".to_string(), UserRecord::new(true, true, b"sk-bob".to_vec()));
    let mut registry = KeyRegistry::new();
    registry.add_pair_key("alice", "bob", b"pk-alice-bob".to_vec());
    Environment::new(users, registry, true)
}

type VisitKey = (PlaceId, Vec<(String, AttrValue)>, Vec<u64>);

struct BruteForce<'n> {
    net: &'n NetDefinition,
    alpha: AbstractionSpec,
    states: BTreeSet<AbstractState>,
    visited: BTreeSet<VisitKey>,
}

impl<'n> BruteForce<'n> {
    fn new(net: &'n NetDefinition, alpha: AbstractionSpec) -> Self {
        BruteForce {
            net,
            alpha,
            states: BTreeSet::new(),
            visited: BTreeSet::new(),
        }
    }

    fn satisfied(&self, t: &TransitionSpec, m: &Marking) -> bool {
        t.inputs.iter().any(|arc| {
            m.kernel_at(&arc.place)
                .is_some_and(|k| arc.guard.as_ref().is_none_or(|g| g.satisfied_by(k)))
        })
    }

    /// The illegal script the scenario validator rejects: continuing the
    /// ENR work loop with a concretely empty pending list.
    fn decision_allowed(&self, t: &TransitionSpec, index: usize, m: &Marking) -> bool {
        if self.net.name != "ENR" || t.id != "t12".into() || index != 1 {
            return true;
        }
        let place = m.occupied_places().next().expect("single kernel");
        m.kernel_at(place)
            .and_then(|k| k.list(attr::PENDING))
            .is_some_and(|l| !l.is_empty())
    }

    fn run(&mut self, marking: Marking, env: Environment) {
        let procs = procedures();
        let mut queue: VecDeque<(Marking, Environment, u32)> = VecDeque::new();
        queue.push_back((marking, env, ORACLE_DEPTH));

        while let Some((m, env, depth)) = queue.pop_front() {
            let place = m.occupied_places().next().expect("single kernel").clone();
            let kernel = m.kernel_at(&place).expect("occupied");
            self.states.insert(AbstractState {
                place: place.clone(),
                attrs: self.alpha.alpha(kernel),
            });
            if self.net.is_terminal(&place) || depth == 0 {
                continue;
            }
            let key: VisitKey = (
                place.clone(),
                kernel
                    .attributes()
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
                env.transport
                    .queued(kernel.text(attr::USER).unwrap_or_default())
                    .iter()
                    .map(|h| h.0)
                    .collect(),
            );
            if !self.visited.insert(key) {
                continue;
            }
            for t in &self.net.transitions {
                if !self.satisfied(t, &m) {
                    continue;
                }
                match t.kind {
                    TransitionKind::Simple => {
                        let mut env2 = env.clone();
                        if let Ok((next, _)) = fire(self.net, &m, &t.id, &procs, &mut env2, 0) {
                            queue.push_back((next, env2, depth - 1));
                        }
                    }
                    TransitionKind::Decision => {
                        let res = t.resolution.as_ref().expect("decision");
                        for index in 0..t.outputs.len() {
                            if !self.decision_allowed(t, index, &m) {
                                continue;
                            }
                            let mut m2 = m.clone();
                            m2.set_resolution(res.clone(), index);
                            let mut env2 = env.clone();
                            if let Ok((next, _)) = fire(self.net, &m2, &t.id, &procs, &mut env2, 0)
                            {
                                queue.push_back((next, env2, depth - 1));
                            }
                        }
                    }
                }
            }
        }
    }
}

fn ens_reachable_states() -> BTreeSet<AbstractState> {
    let net = build_ens();
    let mut oracle = BruteForce::new(&net, ens_abstraction());
    for outbox_size in 0..=3usize {
        let env = oracle_env();
        let mut marking = Marking::initial(&net);
        let kernel = marking.kernel_at_mut(&"bp1".into()).unwrap();
        kernel.set(attr::USER, AttrValue::Text("alice".into()));
        let entries: Vec<AttrValue> = (0..outbox_size)
            .map(|i| {
                outbox_entry(
                    &["bob".to_string()],
                    format!("subject {i}").as_bytes(),
                    format!("body text {i}").as_bytes(),
                    b"",
                )
            })
            .collect();
        kernel.set(attr::OUTBOX, AttrValue::List(entries));
        oracle.run(marking, env);
    }
    oracle.states
}

fn enr_reachable_states() -> BTreeSet<AbstractState> {
    let net = build_enr();
    let mut oracle = BruteForce::new(&net, enr_abstraction());
    for mailbox_size in 0..=3usize {
        let mut env = oracle_env();
        for i in 0..mailbox_size {
            let msg = env
                .seal(
                    "alice",
                    "bob",
                    &Plaintext::new(format!("s{i}"), format!("mail body {i}"), ""),
                )
                .unwrap();
            env.transport_send(msg);
        }
        let mut marking = Marking::initial(&net);
        let kernel = marking.kernel_at_mut(&"bp1".into()).unwrap();
        kernel.set(attr::USER, AttrValue::Text("bob".into()));
        oracle.run(marking, env);
    }
    oracle.states
}

#[test]
fn ens_marking_graph_matches_the_brute_force_oracle() {
    let net = build_ens();
    let graph = build_marking_graph(&net, &ens_abstraction()).unwrap();
    let oracle_states = ens_reachable_states();
    assert_eq!(graph.state_set(), oracle_states);
    // One abstract state per kernel position: bp1 and b1..b15.
    assert_eq!(graph.state_count(), 16);
    assert_eq!(graph.places_visited().len(), 16);
}

#[test]
fn enr_marking_graph_matches_the_brute_force_oracle() {
    let net = build_enr();
    let graph = build_marking_graph(&net, &enr_abstraction()).unwrap();
    let oracle_states = enr_reachable_states();
    assert_eq!(graph.state_set(), oracle_states);
    assert_eq!(graph.state_count(), 27);
    // Every kernel position is reachable: bp1 and b1..b11.
    assert_eq!(graph.places_visited().len(), 12);
}

#[test]
fn ens_liveness_is_clean() {
    let net = build_ens();
    let graph = build_marking_graph(&net, &ens_abstraction()).unwrap();
    let live = check_liveness(&graph, &net);
    assert!(live.ok(), "{live:?}");
    assert_eq!(graph.terminals.len(), 1);
}

#[test]
fn enr_liveness_is_clean_under_the_continue_constraint() {
    let net = build_enr();
    let graph = build_marking_graph(&net, &enr_abstraction()).unwrap();
    let live = check_liveness(&graph, &net);
    assert!(live.ok(), "{live:?}");
    // All four abstract markings on b11 are terminal states.
    assert_eq!(graph.terminals.len(), 4);
}

#[test]
fn ens_without_the_retry_arc_stays_live() {
    let mut net = build_ens();
    // t14 becomes a plain exit: both denial places still drain to b14.
    let t14 = net
        .transitions
        .iter_mut()
        .find(|t| t.id == "t14".into())
        .unwrap();
    t14.kind = TransitionKind::Simple;
    t14.outputs = vec!["b14".into()];
    t14.resolution = None;
    let graph = build_marking_graph(&net, &ens_abstraction()).unwrap();
    let live = check_liveness(&graph, &net);
    assert!(live.deadlocks.is_empty(), "{:?}", live.deadlocks);
}

#[test]
fn ens_without_t14_deadlocks_on_the_denial_places() {
    let mut net = build_ens();
    net.transitions.retain(|t| t.id != "t14".into());
    // The net no longer validates (b3/b5 lose their consumer); the graph
    // still builds and liveness pinpoints the stuck states.
    let graph = build_marking_graph(&net, &ens_abstraction()).unwrap();
    let live = check_liveness(&graph, &net);
    let stuck: BTreeSet<&str> = live.deadlocks.iter().map(|s| s.place.as_str()).collect();
    assert!(stuck.contains("b3"), "{live:?}");
    assert!(stuck.contains("b5"), "{live:?}");
}

#[test]
fn dot_export_is_stable_and_names_all_states() {
    let net = build_enr();
    let graph = build_marking_graph(&net, &enr_abstraction()).unwrap();
    let dot = graph.to_dot();
    assert_eq!(dot, graph.to_dot());
    assert_eq!(dot.matches("label=").count(), graph.state_count() + graph.edges.len());
    assert!(dot.contains("digraph \"ENR\""));
    assert!(dot.contains("processed=>0"));
}
