//! The canonical ENS net: preparing and sending a secured message.
//!
//! Topology:
//!
//! ```text
//! t1        bp1 -> b1                     request access
//! t2 (br1)  b1  -> b2 | b3                rights granted | denied
//! t3 (br2)  b2  -> b4 | b5                SecMail granted | refused
//! t4        b4  -> b6                     log session opened
//! t5        b6  -> b7                     select recipients
//! t6        b7  -> b8                     log selection
//! t7        b8  -> b9                     cipher + sign
//! t8        b9  -> b10                    archive ciphertext
//! t9        b10 -> b11                    log archive
//! t10       b11 -> b12                    send
//! t11 (br3) b12 -> b13 | b14*             compose another | exit
//! t12       b13 -> b15                    loop pass: select+cipher+archive
//! t13       b15 -> b12                    loop pass: send
//! t14 (br4) {b3,b5} -> b14* | b1          exit | retry
//! ```
//!
//! b14 is terminal; br1..br4 sit at t2, t3, t11 and t14.

use std::collections::BTreeMap;

use crate::enet::{
    AttrValue, InitialMarking, InputArc, NetDefinition, PlaceKind, PlaceSpec, TransitionSpec,
};

use super::attr;

/// Decision indices for the ENS resolution places.
pub mod decide {
    /// br1 at t2.
    pub const BR1_GRANT: usize = 0;
    pub const BR1_DENY: usize = 1;
    /// br2 at t3.
    pub const BR2_OK: usize = 0;
    pub const BR2_REFUSED: usize = 1;
    /// br3 at t11.
    pub const BR3_CONTINUE: usize = 0;
    pub const BR3_EXIT: usize = 1;
    /// br4 at t14.
    pub const BR4_EXIT: usize = 0;
    pub const BR4_RETRY: usize = 1;
}

pub fn build_ens() -> NetDefinition {
    let mut places = vec![PlaceSpec::new("bp1", PlaceKind::Peripheral)];
    for i in 1..=4 {
        places.push(PlaceSpec::new(format!("br{i}").as_str(), PlaceKind::Resolution));
    }
    for i in 1..=15 {
        let p = PlaceSpec::new(format!("b{i}").as_str(), PlaceKind::General);
        places.push(if i == 14 { p.terminal() } else { p });
    }

    let transitions = vec![
        TransitionSpec::simple("t1", InputArc::new("bp1"), "b1", "ens.request_access"),
        TransitionSpec::decision(
            "t2",
            vec![InputArc::new("b1")],
            vec!["b2".into(), "b3".into()],
            "br1",
            "ens.verify_rights",
        ),
        TransitionSpec::decision(
            "t3",
            vec![InputArc::new("b2")],
            vec!["b4".into(), "b5".into()],
            "br2",
            "ens.request_secmail",
        ),
        TransitionSpec::simple("t4", InputArc::new("b4"), "b6", "ens.log_session"),
        TransitionSpec::simple("t5", InputArc::new("b6"), "b7", "ens.select_recipients"),
        TransitionSpec::simple("t6", InputArc::new("b7"), "b8", "ens.log_selection"),
        TransitionSpec::simple("t7", InputArc::new("b8"), "b9", "ens.cipher"),
        TransitionSpec::simple("t8", InputArc::new("b9"), "b10", "ens.archive"),
        TransitionSpec::simple("t9", InputArc::new("b10"), "b11", "ens.log_archive"),
        TransitionSpec::simple("t10", InputArc::new("b11"), "b12", "ens.send"),
        TransitionSpec::decision(
            "t11",
            vec![InputArc::new("b12")],
            vec!["b13".into(), "b14".into()],
            "br3",
            "ens.exit",
        ),
        TransitionSpec::simple("t12", InputArc::new("b13"), "b15", "ens.prepare_followup"),
        TransitionSpec::simple("t13", InputArc::new("b15"), "b12", "ens.send_followup"),
        TransitionSpec::decision(
            "t14",
            vec![InputArc::new("b3"), InputArc::new("b5")],
            vec!["b14".into(), "b1".into()],
            "br4",
            "ens.exit",
        ),
    ];

    let mut seeds = BTreeMap::new();
    seeds.insert(attr::USER.to_string(), AttrValue::Text(String::new()));
    seeds.insert(attr::GRANTED.to_string(), AttrValue::Bool(false));
    seeds.insert(attr::SECMAIL.to_string(), AttrValue::Bool(false));
    seeds.insert(attr::RECIPIENTS.to_string(), AttrValue::List(Vec::new()));
    seeds.insert(attr::OUTBOX.to_string(), AttrValue::List(Vec::new()));
    seeds.insert(attr::SEALED.to_string(), AttrValue::List(Vec::new()));
    seeds.insert(attr::SENT_COUNT.to_string(), AttrValue::Int(0));

    NetDefinition {
        name: "ENS".to_string(),
        places,
        transitions,
        domains: BTreeMap::new(),
        initial: InitialMarking {
            place: "bp1".into(),
            attrs: seeds,
        },
    }
}
