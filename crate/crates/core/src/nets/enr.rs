//! The canonical ENR net: receiving and working on secured messages.
//!
//! Topology:
//!
//! ```text
//! t1        bp1 -> b1                     request access
//! t2 (br1)  b1  -> b2 | b3                rights granted | denied
//! t3        b2  -> b4                     poll mailbox
//! t4 (br2)  b4  -> b5 | b6                SecMail granted | refused
//! t5        b5  -> b7                     log session opened
//! t6        b7[processed=0] -> b8         select first (no-op if no mail)
//! t9        b8  -> b9                     receive + verify + decipher
//! t7        b9  -> b10                    log processed
//! t12 (br5) b10 -> b11* | b7              exit | continue
//! t11       b7[processed>0 & pending=nonempty] -> b8   select next
//! t8 (br3)  b3  -> b11* | b1              exit | retry
//! t10 (br4) b6  -> b11* | b4              exit | retry
//! ```
//!
//! b11 is terminal; br1..br5 sit at t2, t4, t8, t10 and t12. The two
//! selectors share b7: the first pass selects with nothing processed yet,
//! the loop pass needs something pending — so a continue decision with an
//! empty pending list leaves b7 dead, which the executor reports as a
//! deadlock.

use std::collections::BTreeMap;

use crate::enet::{
    AttrDomain, AttrValue, Guard, GuardAtom, InitialMarking, InputArc, NetDefinition, PlaceKind,
    PlaceSpec, TransitionSpec,
};

use super::attr;

/// Decision indices for the ENR resolution places.
pub mod decide {
    /// br1 at t2.
    pub const BR1_GRANT: usize = 0;
    pub const BR1_DENY: usize = 1;
    /// br2 at t4.
    pub const BR2_OK: usize = 0;
    pub const BR2_REFUSED: usize = 1;
    /// br3 at t8.
    pub const BR3_EXIT: usize = 0;
    pub const BR3_RETRY: usize = 1;
    /// br4 at t10.
    pub const BR4_EXIT: usize = 0;
    pub const BR4_RETRY: usize = 1;
    /// br5 at t12.
    pub const BR5_EXIT: usize = 0;
    pub const BR5_CONTINUE: usize = 1;
}

pub fn build_enr() -> NetDefinition {
    let mut places = vec![PlaceSpec::new("bp1", PlaceKind::Peripheral)];
    for i in 1..=5 {
        places.push(PlaceSpec::new(format!("br{i}").as_str(), PlaceKind::Resolution));
    }
    for i in 1..=11 {
        let p = PlaceSpec::new(format!("b{i}").as_str(), PlaceKind::General);
        places.push(if i == 11 { p.terminal() } else { p });
    }

    let first_pass = Guard::new(vec![GuardAtom::IntEq(attr::PROCESSED.to_string(), 0)]);
    let loop_pass = Guard::new(vec![
        GuardAtom::IntGt(attr::PROCESSED.to_string(), 0),
        GuardAtom::ListNonEmpty(attr::PENDING.to_string()),
    ]);

    let transitions = vec![
        TransitionSpec::simple("t1", InputArc::new("bp1"), "b1", "enr.request_access"),
        TransitionSpec::decision(
            "t2",
            vec![InputArc::new("b1")],
            vec!["b2".into(), "b3".into()],
            "br1",
            "enr.verify_rights",
        ),
        TransitionSpec::simple("t3", InputArc::new("b2"), "b4", "enr.poll_mailbox"),
        TransitionSpec::decision(
            "t4",
            vec![InputArc::new("b4")],
            vec!["b5".into(), "b6".into()],
            "br2",
            "enr.request_secmail",
        ),
        TransitionSpec::simple("t5", InputArc::new("b5"), "b7", "enr.log_session"),
        TransitionSpec::simple(
            "t6",
            InputArc::guarded("b7", first_pass),
            "b8",
            "enr.select_first",
        ),
        TransitionSpec::simple("t7", InputArc::new("b9"), "b10", "enr.log_processed"),
        TransitionSpec::decision(
            "t8",
            vec![InputArc::new("b3")],
            vec!["b11".into(), "b1".into()],
            "br3",
            "enr.exit",
        ),
        TransitionSpec::simple("t9", InputArc::new("b8"), "b9", "enr.receive_secured"),
        TransitionSpec::decision(
            "t10",
            vec![InputArc::new("b6")],
            vec!["b11".into(), "b4".into()],
            "br4",
            "enr.exit",
        ),
        TransitionSpec::simple(
            "t11",
            InputArc::guarded("b7", loop_pass),
            "b8",
            "enr.select_next",
        ),
        TransitionSpec::decision(
            "t12",
            vec![InputArc::new("b10")],
            vec!["b11".into(), "b7".into()],
            "br5",
            "enr.exit",
        ),
    ];

    let mut domains = BTreeMap::new();
    domains.insert(attr::PROCESSED.to_string(), AttrDomain::Int { lo: 0, hi: 3 });
    domains.insert(attr::PENDING.to_string(), AttrDomain::List);

    let mut seeds = BTreeMap::new();
    seeds.insert(attr::USER.to_string(), AttrValue::Text(String::new()));
    seeds.insert(attr::GRANTED.to_string(), AttrValue::Bool(false));
    seeds.insert(attr::SECMAIL.to_string(), AttrValue::Bool(false));
    seeds.insert(attr::PENDING.to_string(), AttrValue::List(Vec::new()));
    seeds.insert(attr::PROCESSED.to_string(), AttrValue::Int(0));

    NetDefinition {
        name: "ENR".to_string(),
        places,
        transitions,
        domains,
        initial: InitialMarking {
            place: "bp1".into(),
            attrs: seeds,
        },
    }
}
