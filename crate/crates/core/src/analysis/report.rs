//! Reports over audit logs: per-user activity counts, per-message
//! lifecycle, and anomaly detection.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::services::{AuditAction, AuditRecord};

/// Message lifecycle. A report derives states from audit actions in seq
/// order; a state may only advance along this chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageState {
    Prepared,
    Archived,
    Sent,
    Delivered,
    Processed,
    Rejected,
}

impl MessageState {
    pub fn name(&self) -> &'static str {
        match self {
            MessageState::Prepared => "PREPARED",
            MessageState::Archived => "ARCHIVED",
            MessageState::Sent => "SENT",
            MessageState::Delivered => "DELIVERED",
            MessageState::Processed => "PROCESSED",
            MessageState::Rejected => "REJECTED",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            MessageState::Prepared => 0,
            MessageState::Archived => 1,
            MessageState::Sent => 2,
            MessageState::Delivered => 3,
            MessageState::Processed => 4,
            MessageState::Rejected => 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserReport {
    pub sessions: u64,
    pub sent: u64,
    pub received: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageReport {
    pub sender: String,
    pub message_no: u64,
    pub state: MessageState,
    pub recipient: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anomaly {
    NumberingGap { sender: String, missing: u64 },
    OrphanedArchive { sender: String, message_no: u64 },
    LifecycleRegression { sender: String, message_no: u64, from: MessageState, to: MessageState },
    MissingMessageNo { seq: u64 },
}

impl std::fmt::Display for Anomaly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Anomaly::NumberingGap { sender, missing } => {
                write!(f, "numbering gap: sender={sender} missing message_no={missing}")
            }
            Anomaly::OrphanedArchive { sender, message_no } => {
                write!(f, "orphaned archive: sender={sender} message_no={message_no} never sent")
            }
            Anomaly::LifecycleRegression { sender, message_no, from, to } => write!(
                f,
                "lifecycle regression: sender={sender} message_no={message_no} {} -> {}",
                from.name(),
                to.name()
            ),
            Anomaly::MissingMessageNo { seq } => {
                write!(f, "record seq={seq} lacks a message number")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub users: BTreeMap<String, UserReport>,
    /// Keyed by (sender, message_no); numbers are only unique per sender.
    pub messages: BTreeMap<(String, u64), MessageReport>,
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("corrupt log: expected seq {expected}, found {found}")]
    CorruptLog { expected: u64, found: u64 },
}

fn detail_field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("{key}=");
    detail
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(prefix.as_str()))
}

/// Builds the report from audit records in seq order. The sequence must be
/// gapless from 1; lifecycle states are derived solely from audit actions.
pub fn generate_report(records: &[AuditRecord]) -> Result<Report, ReportError> {
    for (i, r) in records.iter().enumerate() {
        let expected = i as u64 + 1;
        if r.seq != expected {
            return Err(ReportError::CorruptLog {
                expected,
                found: r.seq,
            });
        }
    }

    let mut report = Report::default();

    for r in records {
        match r.action {
            AuditAction::SessionOpened => {
                report.users.entry(r.actor.clone()).or_default().sessions += 1;
            }
            AuditAction::MessageArchived => {
                advance(
                    &mut report,
                    r,
                    r.actor.clone(),
                    MessageState::Archived,
                    detail_field(&r.detail, "to").map(str::to_string),
                );
            }
            AuditAction::MessageSent => {
                report.users.entry(r.actor.clone()).or_default().sent += 1;
                advance(
                    &mut report,
                    r,
                    r.actor.clone(),
                    MessageState::Sent,
                    detail_field(&r.detail, "to").map(str::to_string),
                );
            }
            AuditAction::MessageProcessed => {
                report.users.entry(r.actor.clone()).or_default().received += 1;
                let sender = detail_field(&r.detail, "from").unwrap_or("?").to_string();
                advance(&mut report, r, sender, MessageState::Processed, Some(r.actor.clone()));
            }
            AuditAction::MessageRejected => {
                report.users.entry(r.actor.clone()).or_default().rejected += 1;
                let sender = detail_field(&r.detail, "from").unwrap_or("?").to_string();
                advance(&mut report, r, sender, MessageState::Rejected, Some(r.actor.clone()));
            }
            AuditAction::SessionClosed
            | AuditAction::RecipientsSelected
            | AuditAction::AccessDenied
            | AuditAction::SecmailRefused => {}
        }
    }

    // Per-sender numbering must be gapless from 1; archives must have been
    // sent.
    let mut by_sender: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for (sender, no) in report.messages.keys() {
        by_sender.entry(sender.as_str()).or_default().push(*no);
    }
    let mut anomalies = Vec::new();
    for (sender, nos) in by_sender {
        let max = nos.iter().copied().max().unwrap_or(0);
        for expected in 1..=max {
            if !nos.contains(&expected) {
                anomalies.push(Anomaly::NumberingGap {
                    sender: sender.to_string(),
                    missing: expected,
                });
            }
        }
    }
    for ((sender, no), msg) in &report.messages {
        if msg.state == MessageState::Archived {
            anomalies.push(Anomaly::OrphanedArchive {
                sender: sender.clone(),
                message_no: *no,
            });
        }
    }
    report.anomalies.extend(anomalies);
    Ok(report)
}

fn advance(
    report: &mut Report,
    record: &AuditRecord,
    sender: String,
    to: MessageState,
    recipient: Option<String>,
) {
    let Some(no) = record.message_no else {
        report.anomalies.push(Anomaly::MissingMessageNo { seq: record.seq });
        return;
    };
    let entry = report
        .messages
        .entry((sender.clone(), no))
        .or_insert(MessageReport {
            sender,
            message_no: no,
            state: MessageState::Prepared,
            recipient: None,
        });
    if recipient.is_some() {
        entry.recipient = recipient;
    }
    if to.rank() <= entry.state.rank() && entry.state != MessageState::Prepared {
        report.anomalies.push(Anomaly::LifecycleRegression {
            sender: entry.sender.clone(),
            message_no: no,
            from: entry.state,
            to,
        });
        return;
    }
    entry.state = to;
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = String::from("secmail report\n");
        let _ = writeln!(out, "users {}", self.users.len());
        for (name, u) in &self.users {
            let _ = writeln!(
                out,
                "user {name} sessions={} sent={} received={} rejected={}",
                u.sessions, u.sent, u.received, u.rejected
            );
        }
        let _ = writeln!(out, "messages {}", self.messages.len());
        for ((sender, no), m) in &self.messages {
            let recipient = m.recipient.as_deref().unwrap_or("-");
            let _ = writeln!(
                out,
                "message sender={sender} no={no} state={} recipient={recipient}",
                m.state.name()
            );
        }
        let _ = writeln!(out, "anomalies {}", self.anomalies.len());
        for a in &self.anomalies {
            let _ = writeln!(out, "anomaly {a}");
        }
        out
    }
}
