//! Input-arc guards and the closed attribute vocabulary they range over.
//!
//! Guards are conjunctions of atoms over integer comparisons, boolean tests
//! and list emptiness. Nets declare a finite domain for every guarded
//! attribute so that mutual exclusivity of guards sharing an input place can
//! be proven by exhaustive enumeration at validation time.

use std::collections::BTreeMap;
use std::fmt;

use super::attr::{AttrValue, Kernel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardAtom {
    IntEq(String, i64),
    IntGt(String, i64),
    IntLt(String, i64),
    IntGe(String, i64),
    IntLe(String, i64),
    BoolIs(String, bool),
    ListEmpty(String),
    ListNonEmpty(String),
}

impl GuardAtom {
    pub fn attr_name(&self) -> &str {
        match self {
            GuardAtom::IntEq(n, _)
            | GuardAtom::IntGt(n, _)
            | GuardAtom::IntLt(n, _)
            | GuardAtom::IntGe(n, _)
            | GuardAtom::IntLe(n, _)
            | GuardAtom::BoolIs(n, _)
            | GuardAtom::ListEmpty(n)
            | GuardAtom::ListNonEmpty(n) => n,
        }
    }

    /// Missing or mistyped attributes make the atom false rather than
    /// erroring; validated nets seed every guarded attribute in M0.
    fn holds_for(&self, kernel: &Kernel) -> bool {
        match self {
            GuardAtom::IntEq(n, v) => kernel.int(n) == Some(*v),
            GuardAtom::IntGt(n, v) => kernel.int(n).is_some_and(|x| x > *v),
            GuardAtom::IntLt(n, v) => kernel.int(n).is_some_and(|x| x < *v),
            GuardAtom::IntGe(n, v) => kernel.int(n).is_some_and(|x| x >= *v),
            GuardAtom::IntLe(n, v) => kernel.int(n).is_some_and(|x| x <= *v),
            GuardAtom::BoolIs(n, v) => kernel.get(n).and_then(AttrValue::as_bool) == Some(*v),
            GuardAtom::ListEmpty(n) => kernel.list(n).is_some_and(|l| l.is_empty()),
            GuardAtom::ListNonEmpty(n) => kernel.list(n).is_some_and(|l| !l.is_empty()),
        }
    }

    fn holds_at(&self, point: &BTreeMap<String, DomainPoint>) -> bool {
        let Some(p) = point.get(self.attr_name()) else {
            return false;
        };
        match (self, p) {
            (GuardAtom::IntEq(_, v), DomainPoint::Int(x)) => x == v,
            (GuardAtom::IntGt(_, v), DomainPoint::Int(x)) => x > v,
            (GuardAtom::IntLt(_, v), DomainPoint::Int(x)) => x < v,
            (GuardAtom::IntGe(_, v), DomainPoint::Int(x)) => x >= v,
            (GuardAtom::IntLe(_, v), DomainPoint::Int(x)) => x <= v,
            (GuardAtom::BoolIs(_, v), DomainPoint::Bool(x)) => x == v,
            (GuardAtom::ListEmpty(_), DomainPoint::ListEmpty(e)) => *e,
            (GuardAtom::ListNonEmpty(_), DomainPoint::ListEmpty(e)) => !*e,
            _ => false,
        }
    }
}

impl fmt::Display for GuardAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardAtom::IntEq(n, v) => write!(f, "{n}={v}"),
            GuardAtom::IntGt(n, v) => write!(f, "{n}>{v}"),
            GuardAtom::IntLt(n, v) => write!(f, "{n}<{v}"),
            GuardAtom::IntGe(n, v) => write!(f, "{n}>={v}"),
            GuardAtom::IntLe(n, v) => write!(f, "{n}<={v}"),
            GuardAtom::BoolIs(n, v) => write!(f, "{n}={v}"),
            GuardAtom::ListEmpty(n) => write!(f, "{n}=empty"),
            GuardAtom::ListNonEmpty(n) => write!(f, "{n}=nonempty"),
        }
    }
}

/// A conjunction of atoms. An absent guard on an arc means "always".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub atoms: Vec<GuardAtom>,
}

impl Guard {
    pub fn new(atoms: Vec<GuardAtom>) -> Self {
        Guard { atoms }
    }

    pub fn satisfied_by(&self, kernel: &Kernel) -> bool {
        self.atoms.iter().all(|a| a.holds_for(kernel))
    }

    fn holds_at(&self, point: &BTreeMap<String, DomainPoint>) -> bool {
        self.atoms.iter().all(|a| a.holds_at(point))
    }

    pub fn attr_names(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(GuardAtom::attr_name)
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Declared finite domain of a guarded attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrDomain {
    Int { lo: i64, hi: i64 },
    Bool,
    /// Lists are abstracted to empty / non-empty for exclusivity analysis.
    List,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum DomainPoint {
    Int(i64),
    Bool(bool),
    ListEmpty(bool),
}

fn domain_points(domain: &AttrDomain) -> Vec<DomainPoint> {
    match domain {
        AttrDomain::Int { lo, hi } => (*lo..=*hi).map(DomainPoint::Int).collect(),
        AttrDomain::Bool => vec![DomainPoint::Bool(false), DomainPoint::Bool(true)],
        AttrDomain::List => vec![DomainPoint::ListEmpty(true), DomainPoint::ListEmpty(false)],
    }
}

/// Checks whether two arc guards (None = unguarded) can be satisfied
/// simultaneously under some assignment drawn from the declared domains.
/// Returns `Err(name)` when a referenced attribute has no declared domain.
pub fn guards_overlap(
    a: Option<&Guard>,
    b: Option<&Guard>,
    domains: &BTreeMap<String, AttrDomain>,
) -> Result<bool, String> {
    let mut vars: Vec<&str> = Vec::new();
    for g in [a, b].into_iter().flatten() {
        for name in g.attr_names() {
            if !vars.contains(&name) {
                vars.push(name);
            }
        }
    }
    for name in &vars {
        if !domains.contains_key(*name) {
            return Err((*name).to_string());
        }
    }
    // An unguarded pair (no variables) trivially overlaps.
    let mut assignment: BTreeMap<String, DomainPoint> = BTreeMap::new();
    Ok(search(a, b, &vars, domains, &mut assignment))
}

fn search(
    a: Option<&Guard>,
    b: Option<&Guard>,
    vars: &[&str],
    domains: &BTreeMap<String, AttrDomain>,
    assignment: &mut BTreeMap<String, DomainPoint>,
) -> bool {
    match vars.split_first() {
        None => {
            a.is_none_or(|g| g.holds_at(assignment)) && b.is_none_or(|g| g.holds_at(assignment))
        }
        Some((name, rest)) => {
            for point in domain_points(&domains[*name]) {
                assignment.insert((*name).to_string(), point);
                if search(a, b, rest, domains, assignment) {
                    return true;
                }
            }
            assignment.remove(*name);
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domains() -> BTreeMap<String, AttrDomain> {
        let mut d = BTreeMap::new();
        d.insert("processed".to_string(), AttrDomain::Int { lo: 0, hi: 3 });
        d.insert("pending".to_string(), AttrDomain::List);
        d
    }

    #[test]
    fn exclusive_counter_guards_do_not_overlap() {
        let zero = Guard::new(vec![GuardAtom::IntEq("processed".into(), 0)]);
        let pos = Guard::new(vec![
            GuardAtom::IntGt("processed".into(), 0),
            GuardAtom::ListNonEmpty("pending".into()),
        ]);
        assert!(!guards_overlap(Some(&zero), Some(&pos), &domains()).unwrap());
    }

    #[test]
    fn unguarded_overlaps_anything() {
        let zero = Guard::new(vec![GuardAtom::IntEq("processed".into(), 0)]);
        assert!(guards_overlap(None, Some(&zero), &domains()).unwrap());
        assert!(guards_overlap(None, None, &domains()).unwrap());
    }

    #[test]
    fn undeclared_domain_is_reported() {
        let g = Guard::new(vec![GuardAtom::IntEq("mystery".into(), 0)]);
        assert_eq!(
            guards_overlap(Some(&g), None, &domains()),
            Err("mystery".to_string())
        );
    }

    #[test]
    fn kernel_evaluation() {
        let mut k = Kernel::new(0);
        k.set("processed", AttrValue::Int(0));
        k.set("pending", AttrValue::List(vec![AttrValue::Int(1)]));
        let zero = Guard::new(vec![GuardAtom::IntEq("processed".into(), 0)]);
        let pos = Guard::new(vec![
            GuardAtom::IntGt("processed".into(), 0),
            GuardAtom::ListNonEmpty("pending".into()),
        ]);
        assert!(zero.satisfied_by(&k));
        assert!(!pos.satisfied_by(&k));
        k.set("processed", AttrValue::Int(2));
        assert!(!zero.satisfied_by(&k));
        assert!(pos.satisfied_by(&k));
    }
}
