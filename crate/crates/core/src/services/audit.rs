//! Numbered, append-only audit log of accomplished actions.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AuditAction {
    SessionOpened,
    RecipientsSelected,
    MessageArchived,
    MessageSent,
    MessageProcessed,
    MessageRejected,
    SessionClosed,
    AccessDenied,
    SecmailRefused,
}

impl AuditAction {
    pub fn name(&self) -> &'static str {
        match self {
            AuditAction::SessionOpened => "SESSION_OPENED",
            AuditAction::RecipientsSelected => "RECIPIENTS_SELECTED",
            AuditAction::MessageArchived => "MESSAGE_ARCHIVED",
            AuditAction::MessageSent => "MESSAGE_SENT",
            AuditAction::MessageProcessed => "MESSAGE_PROCESSED",
            AuditAction::MessageRejected => "MESSAGE_REJECTED",
            AuditAction::SessionClosed => "SESSION_CLOSED",
            AuditAction::AccessDenied => "ACCESS_DENIED",
            AuditAction::SecmailRefused => "SECMAIL_REFUSED",
        }
    }

    pub fn parse(s: &str) -> Option<AuditAction> {
        Some(match s {
            "SESSION_OPENED" => AuditAction::SessionOpened,
            "RECIPIENTS_SELECTED" => AuditAction::RecipientsSelected,
            "MESSAGE_ARCHIVED" => AuditAction::MessageArchived,
            "MESSAGE_SENT" => AuditAction::MessageSent,
            "MESSAGE_PROCESSED" => AuditAction::MessageProcessed,
            "MESSAGE_REJECTED" => AuditAction::MessageRejected,
            "SESSION_CLOSED" => AuditAction::SessionClosed,
            "ACCESS_DENIED" => AuditAction::AccessDenied,
            "SECMAIL_REFUSED" => AuditAction::SecmailRefused,
            _ => return None,
        })
    }
}

impl fmt::Display for AuditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Immutable once appended. `seq` is gapless from 1; `timestamp` is a
/// logical clock tick, not wall time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub seq: u64,
    pub timestamp: u64,
    pub actor: String,
    pub action: AuditAction,
    pub message_no: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct AuditFilter {
    pub actor: Option<String>,
    pub action: Option<AuditAction>,
    pub message_no: Option<u64>,
    /// Inclusive seq range; an inverted range matches nothing.
    pub seq_range: Option<(u64, u64)>,
}

impl AuditFilter {
    pub fn action(action: AuditAction) -> Self {
        AuditFilter {
            action: Some(action),
            ..Default::default()
        }
    }

    pub fn actor(actor: &str) -> Self {
        AuditFilter {
            actor: Some(actor.to_string()),
            ..Default::default()
        }
    }

    fn matches(&self, r: &AuditRecord) -> bool {
        if let Some(a) = &self.actor {
            if &r.actor != a {
                return false;
            }
        }
        if let Some(a) = self.action {
            if r.action != a {
                return false;
            }
        }
        if let Some(n) = self.message_no {
            if r.message_no != Some(n) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.seq_range {
            if r.seq < lo || r.seq > hi {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn new() -> Self {
        AuditLog::default()
    }

    /// Assigns the next gapless seq. The caller supplies the logical
    /// timestamp (the environment owns the clock).
    pub fn append(
        &mut self,
        timestamp: u64,
        actor: &str,
        action: AuditAction,
        message_no: Option<u64>,
        detail: impl Into<String>,
    ) -> &AuditRecord {
        self.records.push(AuditRecord {
            seq: self.records.len() as u64 + 1,
            timestamp,
            actor: actor.to_string(),
            action,
            message_no,
            detail: detail.into(),
        });
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Matching records in seq order.
    pub fn query(&self, filter: &AuditFilter) -> Vec<&AuditRecord> {
        self.records.iter().filter(|r| filter.matches(r)).collect()
    }

    /// Line-delimited export with a stable field order.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&export_line(r));
            out.push('\n');
        }
        out
    }
}

fn escape_detail(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn export_line(r: &AuditRecord) -> String {
    let msg = match r.message_no {
        Some(n) => n.to_string(),
        None => "-".to_string(),
    };
    format!(
        "seq={} ts={} actor={} action={} msg={} detail={}",
        r.seq,
        r.timestamp,
        r.actor,
        r.action,
        msg,
        escape_detail(&r.detail)
    )
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditParseError {
    #[error("audit export line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("audit log corrupt: expected seq {expected} at line {line}, found {found}")]
    NonGapless { line: usize, expected: u64, found: u64 },
}

/// Parses an export back into records, enforcing gapless seq from 1.
pub fn parse_export(text: &str) -> Result<Vec<AuditRecord>, AuditParseError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(raw, line_no)?;
        let expected = records.len() as u64 + 1;
        if record.seq != expected {
            return Err(AuditParseError::NonGapless {
                line: line_no,
                expected,
                found: record.seq,
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn parse_line(raw: &str, line: usize) -> Result<AuditRecord, AuditParseError> {
    let malformed = |message: String| AuditParseError::Malformed { line, message };
    let mut rest = raw.trim();
    let mut field = |key: &str| -> Result<String, AuditParseError> {
        let prefix = format!("{key}=");
        if !rest.starts_with(&prefix) {
            return Err(malformed(format!("expected field {key}")));
        }
        rest = &rest[prefix.len()..];
        if key == "detail" {
            if !rest.starts_with('"') {
                return Err(malformed("detail must be quoted".to_string()));
            }
            let mut out = String::new();
            let mut chars = rest[1..].char_indices();
            loop {
                match chars.next() {
                    None => return Err(malformed("unterminated detail".to_string())),
                    Some((i, '"')) => {
                        rest = rest[1 + i + 1..].trim_start();
                        return Ok(out);
                    }
                    Some((_, '\\')) => match chars.next() {
                        Some((_, '"')) => out.push('"'),
                        Some((_, '\\')) => out.push('\\'),
                        Some((_, 'n')) => out.push('\n'),
                        other => return Err(malformed(format!("bad escape {other:?}"))),
                    },
                    Some((_, c)) => out.push(c),
                }
            }
        }
        let end = rest.find(' ').unwrap_or(rest.len());
        let value = rest[..end].to_string();
        rest = rest[end..].trim_start();
        Ok(value)
    };

    let seq = field("seq")?
        .parse::<u64>()
        .map_err(|_| malformed("bad seq".to_string()))?;
    let timestamp = field("ts")?
        .parse::<u64>()
        .map_err(|_| malformed("bad ts".to_string()))?;
    let actor = field("actor")?;
    let action_text = field("action")?;
    let action = AuditAction::parse(&action_text)
        .ok_or_else(|| malformed(format!("unknown action {action_text:?}")))?;
    let msg_text = field("msg")?;
    let message_no = if msg_text == "-" {
        None
    } else {
        Some(
            msg_text
                .parse::<u64>()
                .map_err(|_| malformed("bad msg".to_string()))?,
        )
    };
    let detail = field("detail")?;
    Ok(AuditRecord {
        seq,
        timestamp,
        actor,
        action,
        message_no,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_log() -> AuditLog {
        let mut log = AuditLog::new();
        log.append(1, "alice", AuditAction::SessionOpened, None, "session opened");
        log.append(2, "alice", AuditAction::MessageSent, Some(1), "to=bob");
        log.append(3, "alice", AuditAction::MessageSent, Some(2), "to=bob \"quoted\"");
        log.append(4, "alice", AuditAction::SessionClosed, None, "");
        log
    }

    #[test]
    fn seq_is_gapless_from_one() {
        let log = sample_log();
        for (i, r) in log.records().iter().enumerate() {
            assert_eq!(r.seq, i as u64 + 1);
        }
    }

    #[test]
    fn query_filters_work() {
        let log = sample_log();
        assert_eq!(log.query(&AuditFilter::action(AuditAction::MessageSent)).len(), 2);
        assert_eq!(log.query(&AuditFilter::actor("bob")).len(), 0);
        let empty_range = AuditFilter {
            seq_range: Some((5, 3)),
            ..Default::default()
        };
        assert!(log.query(&empty_range).is_empty());
        let by_no = AuditFilter {
            message_no: Some(2),
            ..Default::default()
        };
        assert_eq!(log.query(&by_no).len(), 1);
    }

    #[test]
    fn export_parses_back() {
        let log = sample_log();
        let parsed = parse_export(&log.export()).unwrap();
        assert_eq!(parsed, log.records());
    }

    #[test]
    fn deleted_line_is_detected() {
        let log = sample_log();
        let export = log.export();
        let without_second: String = export
            .lines()
            .filter(|l| !l.starts_with("seq=2 "))
            .map(|l| format!("{l}\n"))
            .collect();
        match parse_export(&without_second) {
            Err(AuditParseError::NonGapless { expected: 2, found: 3, .. }) => {}
            other => panic!("expected gap detection, got {other:?}"),
        }
    }
}
