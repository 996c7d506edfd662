//! Exhaustive marking-graph construction and liveness checking.
//!
//! The graph enumerates every abstract marking reachable under all
//! resolution outcomes. Kernel attributes are abstracted to the
//! guard-relevant facts a net declares (a counter being zero or positive, a
//! list being empty or not); transition procedures are never executed —
//! each transition carries a declared abstract effect instead.

pub mod report;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::enet::{
    AttrValue, Guard, GuardAtom, Kernel, NetDefinition, PlaceId, TransId, TransitionKind,
};

pub use report::{
    generate_report, Anomaly, MessageReport, MessageState, Report, ReportError, UserReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AbstractVal {
    Zero,
    Positive,
    Empty,
    NonEmpty,
}

impl AbstractVal {
    pub fn label(&self) -> &'static str {
        match self {
            AbstractVal::Zero => "0",
            AbstractVal::Positive => ">0",
            AbstractVal::Empty => "empty",
            AbstractVal::NonEmpty => "nonempty",
        }
    }
}

pub type AbstractAttrs = BTreeMap<String, AbstractVal>;

/// A kernel position plus the guard-relevant attribute facts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AbstractState {
    pub place: PlaceId,
    pub attrs: AbstractAttrs,
}

impl std::fmt::Display for AbstractState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.place)?;
        for (name, val) in &self.attrs {
            write!(f, " {name}={}", val.label())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Abstracted to zero / positive.
    Counter,
    /// Abstracted to empty / non-empty.
    Emptiness,
}

type EffectFn = Box<dyn Fn(&AbstractAttrs) -> Vec<AbstractAttrs>>;
type DecisionFilterFn = Box<dyn Fn(&PlaceId, usize, &AbstractAttrs) -> bool>;

/// Declared per net: which attributes matter, how each transition moves
/// them, and which decision outcomes are admissible in which abstract
/// states.
pub struct AbstractionSpec {
    vars: BTreeMap<String, VarKind>,
    effects: BTreeMap<TransId, EffectFn>,
    decision_filter: Option<DecisionFilterFn>,
}

impl Default for AbstractionSpec {
    fn default() -> Self {
        Self::trivial()
    }
}

impl AbstractionSpec {
    /// Place-only abstraction: no attributes, identity effects.
    pub fn trivial() -> Self {
        AbstractionSpec {
            vars: BTreeMap::new(),
            effects: BTreeMap::new(),
            decision_filter: None,
        }
    }

    pub fn counter(mut self, name: &str) -> Self {
        self.vars.insert(name.to_string(), VarKind::Counter);
        self
    }

    pub fn emptiness(mut self, name: &str) -> Self {
        self.vars.insert(name.to_string(), VarKind::Emptiness);
        self
    }

    pub fn effect<F>(mut self, transition: &str, f: F) -> Self
    where
        F: Fn(&AbstractAttrs) -> Vec<AbstractAttrs> + 'static,
    {
        self.effects.insert(transition.into(), Box::new(f));
        self
    }

    /// Restricts which decision indices the enumeration may take in a given
    /// abstract state.
    pub fn decision_filter<F>(mut self, f: F) -> Self
    where
        F: Fn(&PlaceId, usize, &AbstractAttrs) -> bool + 'static,
    {
        self.decision_filter = Some(Box::new(f));
        self
    }

    pub fn vars(&self) -> impl Iterator<Item = (&String, &VarKind)> {
        self.vars.iter()
    }

    /// Abstracts a concrete attribute map. Absent attributes abstract to
    /// Zero / Empty.
    pub fn alpha_attrs(&self, attrs: &BTreeMap<String, AttrValue>) -> AbstractAttrs {
        let mut out = AbstractAttrs::new();
        for (name, kind) in &self.vars {
            let val = match kind {
                VarKind::Counter => match attrs.get(name).and_then(AttrValue::as_int) {
                    Some(v) if v > 0 => AbstractVal::Positive,
                    _ => AbstractVal::Zero,
                },
                VarKind::Emptiness => match attrs.get(name).and_then(AttrValue::as_list) {
                    Some(l) if !l.is_empty() => AbstractVal::NonEmpty,
                    _ => AbstractVal::Empty,
                },
            };
            out.insert(name.clone(), val);
        }
        out
    }

    pub fn alpha(&self, kernel: &Kernel) -> AbstractAttrs {
        self.alpha_attrs(kernel.attributes())
    }

    fn successors(&self, transition: &TransId, attrs: &AbstractAttrs) -> Vec<AbstractAttrs> {
        match self.effects.get(transition) {
            Some(f) => f(attrs),
            None => vec![attrs.clone()],
        }
    }

    fn decision_allowed(&self, place: &PlaceId, index: usize, attrs: &AbstractAttrs) -> bool {
        self.decision_filter
            .as_ref()
            .is_none_or(|f| f(place, index, attrs))
    }

    fn guard_holds(
        &self,
        transition: &TransId,
        guard: &Guard,
        attrs: &AbstractAttrs,
    ) -> Result<bool, AnalysisError> {
        for atom in &guard.atoms {
            let name = atom.attr_name();
            let incomplete = || AnalysisError::AbstractionIncomplete {
                transition: transition.clone(),
                attr: name.to_string(),
            };
            let var = self.vars.get(name).ok_or_else(incomplete)?;
            let holds = match (atom, var) {
                (GuardAtom::IntEq(_, 0), VarKind::Counter) => attrs[name] == AbstractVal::Zero,
                (GuardAtom::IntGt(_, 0), VarKind::Counter) => attrs[name] == AbstractVal::Positive,
                (GuardAtom::ListEmpty(_), VarKind::Emptiness) => attrs[name] == AbstractVal::Empty,
                (GuardAtom::ListNonEmpty(_), VarKind::Emptiness) => {
                    attrs[name] == AbstractVal::NonEmpty
                }
                // Any other predicate is too precise for this abstraction.
                _ => return Err(incomplete()),
            };
            if !holds {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("abstraction incomplete: guard on {transition} needs unabstracted attribute {attr}")]
    AbstractionIncomplete { transition: TransId, attr: String },
}

/// An edge of the marking graph: source state index, transition, decision
/// index (for decision transitions), destination state index.
pub type Edge = (usize, TransId, Option<usize>, usize);

#[derive(Debug, Clone)]
pub struct MarkingGraph {
    pub net_name: String,
    states: Vec<AbstractState>,
    pub edges: BTreeSet<Edge>,
    pub initial: usize,
    pub terminals: BTreeSet<usize>,
}

impl MarkingGraph {
    pub fn states(&self) -> &[AbstractState] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &AbstractState) -> Option<usize> {
        self.states.binary_search(state).ok()
    }

    pub fn state_set(&self) -> BTreeSet<AbstractState> {
        self.states.iter().cloned().collect()
    }

    pub fn places_visited(&self) -> BTreeSet<PlaceId> {
        self.states.iter().map(|s| s.place.clone()).collect()
    }

    pub fn has_edge(
        &self,
        src: &AbstractState,
        transition: &TransId,
        decision: Option<usize>,
        dst: &AbstractState,
    ) -> bool {
        match (self.state_index(src), self.state_index(dst)) {
            (Some(s), Some(d)) => self.edges.contains(&(s, transition.clone(), decision, d)),
            _ => false,
        }
    }

    /// Graphviz DOT rendering with stable node and edge order.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", self.net_name);
        let _ = writeln!(out, "  rankdir=LR;");
        for (i, state) in self.states.iter().enumerate() {
            let shape = if self.terminals.contains(&i) {
                "doublecircle"
            } else if i == self.initial {
                "box"
            } else {
                "ellipse"
            };
            let _ = writeln!(out, "  s{i} [label=\"{state}\" shape={shape}];");
        }
        for (src, t, decision, dst) in &self.edges {
            let label = match decision {
                Some(d) => format!("{t}/{d}"),
                None => t.to_string(),
            };
            let _ = writeln!(out, "  s{src} -> s{dst} [label=\"{label}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first closure from the initial abstract state over all enabled
/// transitions and all admissible decision indices.
pub fn build_marking_graph(
    net: &NetDefinition,
    spec: &AbstractionSpec,
) -> Result<MarkingGraph, AnalysisError> {
    let initial = AbstractState {
        place: net.initial.place.clone(),
        attrs: spec.alpha_attrs(&net.initial.attrs),
    };

    let mut seen: BTreeSet<AbstractState> = BTreeSet::new();
    let mut raw_edges: Vec<(AbstractState, TransId, Option<usize>, AbstractState)> = Vec::new();
    let mut queue: VecDeque<AbstractState> = VecDeque::new();
    seen.insert(initial.clone());
    queue.push_back(initial.clone());

    while let Some(state) = queue.pop_front() {
        if net.is_terminal(&state.place) {
            continue;
        }
        for t in &net.transitions {
            let mut input_ok = false;
            for arc in &t.inputs {
                if arc.place != state.place {
                    continue;
                }
                match &arc.guard {
                    None => input_ok = true,
                    Some(g) => {
                        if spec.guard_holds(&t.id, g, &state.attrs)? {
                            input_ok = true;
                        }
                    }
                }
            }
            if !input_ok {
                continue;
            }
            let choices: Vec<(Option<usize>, &PlaceId)> = match t.kind {
                TransitionKind::Simple => vec![(None, &t.outputs[0])],
                TransitionKind::Decision => {
                    let place = t.resolution.as_ref().expect("validated decision");
                    t.outputs
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| spec.decision_allowed(place, *i, &state.attrs))
                        .map(|(i, out)| (Some(i), out))
                        .collect()
                }
            };
            for (decision, target) in choices {
                for attrs in spec.successors(&t.id, &state.attrs) {
                    let next = AbstractState {
                        place: target.clone(),
                        attrs,
                    };
                    raw_edges.push((state.clone(), t.id.clone(), decision, next.clone()));
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }

    let states: Vec<AbstractState> = seen.into_iter().collect();
    let index_of = |s: &AbstractState| states.binary_search(s).expect("state recorded");
    let edges = raw_edges
        .into_iter()
        .map(|(src, t, d, dst)| (index_of(&src), t, d, index_of(&dst)))
        .collect();
    let terminals = states
        .iter()
        .enumerate()
        .filter(|(_, s)| net.is_terminal(&s.place))
        .map(|(i, _)| i)
        .collect();

    Ok(MarkingGraph {
        net_name: net.name.clone(),
        initial: index_of(&initial),
        states,
        edges,
        terminals,
    })
}

#[derive(Debug, Clone)]
pub struct LivenessReport {
    /// Non-terminal states with no outgoing edge.
    pub deadlocks: Vec<AbstractState>,
    /// Kernel-capable places the graph never visits.
    pub unreachable_places: Vec<PlaceId>,
    /// States from which no terminal state is reachable.
    pub terminal_unreachable_from: Vec<AbstractState>,
}

impl LivenessReport {
    pub fn ok(&self) -> bool {
        self.deadlocks.is_empty()
            && self.unreachable_places.is_empty()
            && self.terminal_unreachable_from.is_empty()
    }

    pub fn render(&self, graph: &MarkingGraph) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "net {}: {} states, {} deadlocks, {} unreachable places, terminal reachable from {}/{} states",
            graph.net_name,
            graph.state_count(),
            self.deadlocks.len(),
            self.unreachable_places.len(),
            graph.state_count() - self.terminal_unreachable_from.len(),
            graph.state_count(),
        );
        for s in &self.deadlocks {
            let _ = writeln!(out, "deadlock: {s}");
        }
        for p in &self.unreachable_places {
            let _ = writeln!(out, "unreachable place: {p}");
        }
        for s in &self.terminal_unreachable_from {
            let _ = writeln!(out, "terminal unreachable from: {s}");
        }
        let _ = writeln!(out, "status {}", if self.ok() { "ok" } else { "defective" });
        out
    }
}

pub fn check_liveness(graph: &MarkingGraph, net: &NetDefinition) -> LivenessReport {
    let n = graph.state_count();
    let mut has_out = vec![false; n];
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (src, _, _, dst) in &graph.edges {
        has_out[*src] = true;
        reverse[*dst].push(*src);
    }

    let deadlocks = (0..n)
        .filter(|i| !has_out[*i] && !graph.terminals.contains(i))
        .map(|i| graph.states()[i].clone())
        .collect();

    let visited = graph.places_visited();
    let unreachable_places = net
        .kernel_places()
        .filter(|p| !visited.contains(&p.id))
        .map(|p| p.id.clone())
        .collect();

    // Reverse reachability from the terminal states.
    let mut can_finish = vec![false; n];
    let mut stack: Vec<usize> = graph.terminals.iter().copied().collect();
    for &t in &stack {
        can_finish[t] = true;
    }
    while let Some(i) = stack.pop() {
        for &p in &reverse[i] {
            if !can_finish[p] {
                can_finish[p] = true;
                stack.push(p);
            }
        }
    }
    let terminal_unreachable_from = (0..n)
        .filter(|i| !can_finish[*i])
        .map(|i| graph.states()[i].clone())
        .collect();

    LivenessReport {
        deadlocks,
        unreachable_places,
        terminal_unreachable_from,
    }
}
