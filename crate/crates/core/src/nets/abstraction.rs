//! Declared attribute abstractions for the canonical nets.
//!
//! ENS needs nothing beyond the kernel position. ENR tracks
//! processed ∈ {0, >0} and pending ∈ {empty, nonempty}, which is exactly
//! what its selector guards read.

use crate::analysis::{AbstractAttrs, AbstractVal, AbstractionSpec};
use crate::enet::PlaceId;

use super::attr;
use super::enr::decide;

pub fn ens_abstraction() -> AbstractionSpec {
    AbstractionSpec::trivial()
}

fn with(attrs: &AbstractAttrs, name: &str, val: AbstractVal) -> AbstractAttrs {
    let mut next = attrs.clone();
    next.insert(name.to_string(), val);
    next
}

pub fn enr_abstraction() -> AbstractionSpec {
    let br5: PlaceId = "br5".into();
    AbstractionSpec::trivial()
        .counter(attr::PROCESSED)
        .emptiness(attr::PENDING)
        // t3 polls the mailbox: it may come back empty or not.
        .effect("t3", |attrs| {
            vec![
                with(attrs, attr::PENDING, AbstractVal::Empty),
                with(attrs, attr::PENDING, AbstractVal::NonEmpty),
            ]
        })
        // t6 selects the first message. With nothing pending the pass is a
        // no-op; otherwise popping leaves the list either way.
        .effect("t6", |attrs| {
            if attrs[attr::PENDING] == AbstractVal::Empty {
                vec![attrs.clone()]
            } else {
                vec![
                    with(attrs, attr::PENDING, AbstractVal::Empty),
                    with(attrs, attr::PENDING, AbstractVal::NonEmpty),
                ]
            }
        })
        // t11's guard requires something pending, so it always pops.
        .effect("t11", |attrs| {
            vec![
                with(attrs, attr::PENDING, AbstractVal::Empty),
                with(attrs, attr::PENDING, AbstractVal::NonEmpty),
            ]
        })
        // t9 increments processed exactly when a message was selected. At
        // (processed=0, pending=empty) both a no-op first pass and a
        // selected-the-only-message pass reach b8, so both effects are
        // possible; any other combination implies a selected message.
        .effect("t9", |attrs| {
            if attrs[attr::PROCESSED] == AbstractVal::Zero
                && attrs[attr::PENDING] == AbstractVal::Empty
            {
                vec![
                    attrs.clone(),
                    with(attrs, attr::PROCESSED, AbstractVal::Positive),
                ]
            } else {
                vec![with(attrs, attr::PROCESSED, AbstractVal::Positive)]
            }
        })
        // Continuing at br5 with nothing pending would strand the kernel on
        // b7; the enumeration honors the same constraint the scenario
        // validator enforces.
        .decision_filter(move |place, index, attrs| {
            !(place == &br5
                && index == decide::BR5_CONTINUE
                && attrs[attr::PENDING] == AbstractVal::Empty)
        })
}
