//! The canonical protocol nets and their kernel attribute schema.

pub mod abstraction;
pub mod enr;
pub mod ens;
pub mod procs;

pub use abstraction::{enr_abstraction, ens_abstraction};
pub use enr::build_enr;
pub use ens::build_ens;
pub use procs::procedures;

use crate::enet::AttrValue;
use crate::services::SecuredMessage;

/// Kernel attribute names used by the canonical nets.
pub mod attr {
    pub const USER: &str = "user";
    pub const GRANTED: &str = "granted";
    pub const SECMAIL: &str = "secmail";
    pub const REQUESTED_AT: &str = "requested_at";
    /// ENS: scripted messages not yet selected.
    pub const OUTBOX: &str = "outbox";
    pub const RECIPIENTS: &str = "recipients";
    pub const SUBJECT: &str = "subject";
    pub const BODY: &str = "body";
    pub const ATTACHMENT: &str = "attachment";
    /// ENS: sealed messages of the current pass, awaiting archive/send.
    pub const SEALED: &str = "sealed";
    pub const MESSAGE_NO: &str = "message_no";
    pub const SENT_COUNT: &str = "sent_count";
    /// ENR: transport handles still to work on.
    pub const PENDING: &str = "pending";
    pub const PROCESSED: &str = "processed";
    /// ENR: the handle selected for the current pass.
    pub const CURRENT: &str = "current";
    pub const RECEIVED_NO: &str = "received_no";
    pub const RECEIVED_FROM: &str = "received_from";
    pub const LAST_ERROR: &str = "last_error";
}

/// Encodes one scripted message for the ENS outbox attribute:
/// `[recipients, subject, body, attachment]`.
pub fn outbox_entry(recipients: &[String], subject: &[u8], body: &[u8], attachment: &[u8]) -> AttrValue {
    AttrValue::List(vec![
        AttrValue::List(
            recipients
                .iter()
                .map(|r| AttrValue::Text(r.clone()))
                .collect(),
        ),
        AttrValue::Bytes(subject.to_vec()),
        AttrValue::Bytes(body.to_vec()),
        AttrValue::Bytes(attachment.to_vec()),
    ])
}

/// Decodes the sealed-message list a kernel carries between cipher and send.
pub fn sealed_from_attr(value: &AttrValue) -> Option<Vec<SecuredMessage>> {
    value
        .as_list()?
        .iter()
        .map(|v| v.as_bytes().and_then(SecuredMessage::from_bytes))
        .collect()
}
