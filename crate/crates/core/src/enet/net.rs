//! Net definitions: places, transitions, edge relations and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::attr::AttrValue;
use super::guard::{guards_overlap, AttrDomain, Guard};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId(String);

impl PlaceId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for PlaceId {
    fn from(s: &str) -> Self {
        PlaceId(s.to_string())
    }
}

impl From<String> for PlaceId {
    fn from(s: String) -> Self {
        PlaceId(s)
    }
}

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransId(String);

impl TransId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for TransId {
    fn from(s: &str) -> Self {
        TransId(s.to_string())
    }
}

impl From<String> for TransId {
    fn from(s: String) -> Self {
        TransId(s)
    }
}

impl fmt::Display for TransId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceKind {
    /// Entry place; a kernel appears here when a session starts.
    Peripheral,
    /// Holds a decision value for an attached decision transition, never a
    /// kernel.
    Resolution,
    General,
}

impl fmt::Display for PlaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlaceKind::Peripheral => "peripheral",
            PlaceKind::Resolution => "resolution",
            PlaceKind::General => "general",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceSpec {
    pub id: PlaceId,
    pub kind: PlaceKind,
    /// A kernel arriving here ends the session.
    pub terminal: bool,
}

impl PlaceSpec {
    pub fn new(id: impl Into<PlaceId>, kind: PlaceKind) -> Self {
        PlaceSpec {
            id: id.into(),
            kind,
            terminal: false,
        }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn holds_kernels(&self) -> bool {
        self.kind != PlaceKind::Resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    Simple,
    Decision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputArc {
    pub place: PlaceId,
    pub guard: Option<Guard>,
}

impl InputArc {
    pub fn new(place: impl Into<PlaceId>) -> Self {
        InputArc {
            place: place.into(),
            guard: None,
        }
    }

    pub fn guarded(place: impl Into<PlaceId>, guard: Guard) -> Self {
        InputArc {
            place: place.into(),
            guard: Some(guard),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSpec {
    pub id: TransId,
    pub kind: TransitionKind,
    /// Alternative inputs: the transition fires on whichever single arc is
    /// satisfied.
    pub inputs: Vec<InputArc>,
    /// Simple: exactly one entry. Decision: one entry per alternative,
    /// selected by the resolution value.
    pub outputs: Vec<PlaceId>,
    pub resolution: Option<PlaceId>,
    pub procedure: String,
}

impl TransitionSpec {
    pub fn simple(
        id: impl Into<TransId>,
        input: InputArc,
        output: impl Into<PlaceId>,
        procedure: &str,
    ) -> Self {
        TransitionSpec {
            id: id.into(),
            kind: TransitionKind::Simple,
            inputs: vec![input],
            outputs: vec![output.into()],
            resolution: None,
            procedure: procedure.to_string(),
        }
    }

    pub fn decision(
        id: impl Into<TransId>,
        inputs: Vec<InputArc>,
        outputs: Vec<PlaceId>,
        resolution: impl Into<PlaceId>,
        procedure: &str,
    ) -> Self {
        TransitionSpec {
            id: id.into(),
            kind: TransitionKind::Decision,
            inputs,
            outputs,
            resolution: Some(resolution.into()),
            procedure: procedure.to_string(),
        }
    }
}

/// M0: where the kernel starts and which attributes it is seeded with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialMarking {
    pub place: PlaceId,
    pub attrs: BTreeMap<String, AttrValue>,
}

/// The tuple of places, transitions, edge relations (implied by transition
/// inputs/outputs) and initial marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDefinition {
    pub name: String,
    pub places: Vec<PlaceSpec>,
    pub transitions: Vec<TransitionSpec>,
    /// Finite domains for every guarded attribute, used to prove guard
    /// exclusivity.
    pub domains: BTreeMap<String, AttrDomain>,
    pub initial: InitialMarking,
}

impl NetDefinition {
    pub fn place(&self, id: &PlaceId) -> Option<&PlaceSpec> {
        self.places.iter().find(|p| &p.id == id)
    }

    pub fn transition(&self, id: &TransId) -> Option<&TransitionSpec> {
        self.transitions.iter().find(|t| &t.id == id)
    }

    pub fn is_terminal(&self, id: &PlaceId) -> bool {
        self.place(id).is_some_and(|p| p.terminal)
    }

    /// Places that can hold a kernel (peripheral and general).
    pub fn kernel_places(&self) -> impl Iterator<Item = &PlaceSpec> {
        self.places.iter().filter(|p| p.holds_kernels())
    }

    pub fn decision_transitions(&self) -> impl Iterator<Item = &TransitionSpec> {
        self.transitions
            .iter()
            .filter(|t| t.kind == TransitionKind::Decision)
    }

    /// Checks every structural invariant and proves guard exclusivity for
    /// transitions sharing an input place. Violations are data, not errors.
    pub fn validate(&self) -> ValidationReport {
        let mut v: Vec<Violation> = Vec::new();
        let mut push = |subject: &dyn fmt::Display, message: String| {
            v.push(Violation {
                subject: subject.to_string(),
                message,
            });
        };

        let mut seen_places = BTreeSet::new();
        for p in &self.places {
            if !seen_places.insert(&p.id) {
                push(&p.id, format!("duplicate place id {}", p.id));
            }
            if p.terminal && p.kind == PlaceKind::Resolution {
                push(&p.id, format!("resolution place {} marked terminal", p.id));
            }
        }
        let mut seen_trans = BTreeSet::new();
        for t in &self.transitions {
            if !seen_trans.insert(&t.id) {
                push(&t.id, format!("duplicate transition id {}", t.id));
            }
        }

        if !self.places.iter().any(|p| p.kind == PlaceKind::Peripheral) {
            push(&self.name, "net has no peripheral place".to_string());
        }

        for t in &self.transitions {
            if t.inputs.is_empty() {
                push(&t.id, format!("transition {} has no inputs", t.id));
            }
            for arc in &t.inputs {
                match self.place(&arc.place) {
                    None => push(&t.id, format!("transition {} input {} undeclared", t.id, arc.place)),
                    Some(p) if !p.holds_kernels() => push(
                        &t.id,
                        format!("transition {} consumes resolution place {}", t.id, arc.place),
                    ),
                    Some(p) if p.terminal => push(
                        &t.id,
                        format!("terminal place {} has outgoing transition {}", arc.place, t.id),
                    ),
                    _ => {}
                }
                if let Some(g) = &arc.guard {
                    for name in g.attr_names() {
                        if !self.domains.contains_key(name) {
                            push(
                                &t.id,
                                format!(
                                    "guard on {} references attribute {name} with no declared domain",
                                    t.id
                                ),
                            );
                        }
                    }
                }
            }
            for out in &t.outputs {
                match self.place(out) {
                    None => push(&t.id, format!("transition {} output {out} undeclared", t.id)),
                    Some(p) if !p.holds_kernels() => push(
                        &t.id,
                        format!("transition {} outputs to resolution place {out}", t.id),
                    ),
                    _ => {}
                }
            }
            match t.kind {
                TransitionKind::Simple => {
                    if t.outputs.len() != 1 {
                        push(
                            &t.id,
                            format!("simple transition {} must have exactly one output", t.id),
                        );
                    }
                    if t.resolution.is_some() {
                        push(
                            &t.id,
                            format!("simple transition {} must not name a resolution place", t.id),
                        );
                    }
                }
                TransitionKind::Decision => {
                    if t.outputs.len() < 2 {
                        push(
                            &t.id,
                            format!("decision transition {} needs at least two outputs", t.id),
                        );
                    }
                    match &t.resolution {
                        None => push(&t.id, format!("decision {} without resolution place", t.id)),
                        Some(r) => match self.place(r) {
                            None => push(&t.id, format!("decision {} resolution place {r} undeclared", t.id)),
                            Some(p) if p.kind != PlaceKind::Resolution => push(
                                &t.id,
                                format!("decision {} resolution place {r} is not a resolution place", t.id),
                            ),
                            _ => {}
                        },
                    }
                }
            }
        }

        // Each resolution place answers for at most one transition.
        let mut res_users: BTreeMap<&PlaceId, Vec<&TransId>> = BTreeMap::new();
        for t in &self.transitions {
            if let Some(r) = &t.resolution {
                res_users.entry(r).or_default().push(&t.id);
            }
        }
        for (r, users) in res_users {
            if users.len() > 1 {
                push(
                    r,
                    format!(
                        "resolution place {r} attached to multiple transitions ({})",
                        users.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
                    ),
                );
            }
        }

        // Connectivity: every non-terminal kernel place is consumed by some
        // transition and produced by some transition unless it is a
        // peripheral source.
        for p in self.kernel_places() {
            if p.terminal {
                continue;
            }
            let consumed = self
                .transitions
                .iter()
                .any(|t| t.inputs.iter().any(|a| a.place == p.id));
            if !consumed {
                push(&p.id, format!("place {} is never consumed", p.id));
            }
            let produced = self.transitions.iter().any(|t| t.outputs.contains(&p.id));
            if !produced && p.kind != PlaceKind::Peripheral {
                push(&p.id, format!("place {} is never produced", p.id));
            }
        }

        // Guard exclusivity per shared input place.
        let mut consumers: BTreeMap<&PlaceId, Vec<(&TransId, Option<&Guard>)>> = BTreeMap::new();
        for t in &self.transitions {
            for arc in &t.inputs {
                consumers
                    .entry(&arc.place)
                    .or_default()
                    .push((&t.id, arc.guard.as_ref()));
            }
        }
        for (place, arcs) in consumers {
            for i in 0..arcs.len() {
                for j in (i + 1)..arcs.len() {
                    match guards_overlap(arcs[i].1, arcs[j].1, &self.domains) {
                        Ok(true) => push(
                            place,
                            format!(
                                "guards of {} and {} on shared place {place} are not mutually exclusive",
                                arcs[i].0, arcs[j].0
                            ),
                        ),
                        Ok(false) => {}
                        // Undeclared domains were already reported above.
                        Err(_) => {}
                    }
                }
            }
        }

        match self.place(&self.initial.place) {
            None => push(
                &self.initial.place,
                format!("initial place {} undeclared", self.initial.place),
            ),
            Some(p) if !p.holds_kernels() => push(
                &self.initial.place,
                format!("initial place {} cannot hold a kernel", self.initial.place),
            ),
            _ => {}
        }

        let counts = PlaceCounts {
            peripheral: self.places.iter().filter(|p| p.kind == PlaceKind::Peripheral).count(),
            resolution: self.places.iter().filter(|p| p.kind == PlaceKind::Resolution).count(),
            general: self.places.iter().filter(|p| p.kind == PlaceKind::General).count(),
        };

        ValidationReport {
            violations: v,
            place_counts: counts,
            transition_count: self.transitions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaceCounts {
    pub peripheral: usize,
    pub resolution: usize,
    pub general: usize,
}

impl PlaceCounts {
    pub fn total(&self) -> usize {
        self.peripheral + self.resolution + self.general
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub place_counts: PlaceCounts,
    pub transition_count: usize,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net() -> NetDefinition {
        NetDefinition {
            name: "tiny".into(),
            places: vec![
                PlaceSpec::new("p0", PlaceKind::Peripheral),
                PlaceSpec::new("r1", PlaceKind::Resolution),
                PlaceSpec::new("p1", PlaceKind::General),
                PlaceSpec::new("p2", PlaceKind::General).terminal(),
            ],
            transitions: vec![
                TransitionSpec::simple("t1", InputArc::new("p0"), "p1", "noop"),
                TransitionSpec::decision(
                    "t2",
                    vec![InputArc::new("p1")],
                    vec!["p2".into(), "p0".into()],
                    "r1",
                    "noop",
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
    fn tiny_net_validates() {
        let report = tiny_net().validate();
        assert!(report.ok(), "{:?}", report.violations);
        assert_eq!(report.place_counts.peripheral, 1);
        assert_eq!(report.place_counts.resolution, 1);
        assert_eq!(report.place_counts.general, 2);
        assert_eq!(report.transition_count, 2);
    }

    #[test]
    fn decision_without_resolution_place_is_flagged() {
        let mut net = tiny_net();
        net.transitions[1].resolution = None;
        let report = net.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("decision t2 without resolution place")));
    }

    #[test]
    fn unguarded_shared_place_is_a_conflict() {
        let mut net = tiny_net();
        net.transitions
            .push(TransitionSpec::simple("t3", InputArc::new("p1"), "p2", "noop"));
        let report = net.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("not mutually exclusive")));
    }

    #[test]
    fn terminal_place_with_outgoing_edge_is_flagged() {
        let mut net = tiny_net();
        net.transitions
            .push(TransitionSpec::simple("t4", InputArc::new("p2"), "p1", "noop"));
        let report = net.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("terminal place p2 has outgoing")));
    }

    #[test]
    fn orphan_place_is_flagged() {
        let mut net = tiny_net();
        net.places.push(PlaceSpec::new("p9", PlaceKind::General));
        let report = net.validate();
        assert!(report.violations.iter().any(|v| v.message.contains("p9 is never")));
    }
}
