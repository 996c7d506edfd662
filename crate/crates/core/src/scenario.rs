//! Scenario files: users, keys, scripted sessions and resolution scripts.
//!
//! ```text
//! name happy_path
//! seed 1
//! max-steps 10000
//! secmail available
//! user alice access=yes server=up signkey=616c696365
//! user bob access=yes server=up signkey=626f62
//! pairkey alice bob 70616972
//! session ens alice
//!   message to=bob subject="Status" body="numbers are ready" attachment=""
//!   decide br1 grant
//!   policy exit-after:1        # decide lines OR one policy line, not both
//! session enr bob
//! tamper alice 1 body 0 01
//! ```
//!
//! Message field values are quoted text or `hex:<digits>`. Sessions run in
//! declared order; `tamper` flips one ciphertext byte in transit at its
//! position in that order.

use std::collections::{BTreeMap, BTreeSet};

use crate::nets::{enr, ens};
use crate::services::CtField;

pub const DEFAULT_MAX_STEPS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Parse {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSeed {
    pub access: bool,
    pub crypto_server_up: bool,
    pub sign_key: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedMessage {
    pub recipients: Vec<String>,
    pub subject: Vec<u8>,
    pub body: Vec<u8>,
    pub attachment: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionNet {
    Ens,
    Enr,
}

impl SessionNet {
    pub fn name(&self) -> &'static str {
        match self {
            SessionNet::Ens => "ens",
            SessionNet::Enr => "enr",
        }
    }
}

impl std::fmt::Display for SessionNet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Symbolic policy directives: grant everything except the places named in
/// deny_at, and stop composing/processing after exit_after messages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolicPolicy {
    pub deny_at: BTreeSet<String>,
    pub exit_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionScript {
    /// Ordered decisions, consumed per resolution place.
    Scripted(Vec<(String, usize)>),
    Symbolic(SymbolicPolicy),
}

impl Default for ResolutionScript {
    fn default() -> Self {
        ResolutionScript::Symbolic(SymbolicPolicy::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSpec {
    pub net: SessionNet,
    pub user: String,
    pub messages: Vec<ScriptedMessage>,
    pub script: ResolutionScript,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperSpec {
    pub sender: String,
    pub message_no: u64,
    pub field: CtField,
    pub offset: usize,
    pub mask: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioItem {
    Session(SessionSpec),
    Tamper(TamperSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub max_steps: u64,
    pub secmail_available: bool,
    pub users: BTreeMap<String, UserSeed>,
    pub pair_keys: BTreeMap<(String, String), Vec<u8>>,
    pub items: Vec<ScenarioItem>,
}

impl Scenario {
    pub fn sessions(&self) -> impl Iterator<Item = &SessionSpec> {
        self.items.iter().filter_map(|i| match i {
            ScenarioItem::Session(s) => Some(s),
            ScenarioItem::Tamper(_) => None,
        })
    }
}

fn decode_hex(s: &str, line: usize) -> Result<Vec<u8>, ScenarioError> {
    if !s.len().is_multiple_of(2) {
        return parse_err(line, format!("odd-length hex {s:?}"));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| ScenarioError::Parse {
                line,
                message: format!("bad hex {s:?}"),
            })
        })
        .collect()
}

/// Splits a line into tokens; double-quoted stretches (anywhere in a token)
/// keep their spaces. Quotes are preserved for the value parser.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<String>, ScenarioError> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '#' if !in_quotes => break,
            '"' => {
                in_quotes = !in_quotes;
                current.push(c);
            }
            '\\' if in_quotes => {
                current.push(c);
                match chars.next() {
                    Some(esc) => current.push(esc),
                    None => return parse_err(line_no, "dangling escape"),
                }
            }
            c if c.is_whitespace() && !in_quotes => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            c => current.push(c),
        }
    }
    if in_quotes {
        return parse_err(line_no, "unterminated string");
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    Ok(tokens)
}

/// A message field value: `"quoted text"` or `hex:<digits>`.
fn parse_bytes_value(raw: &str, line: usize) -> Result<Vec<u8>, ScenarioError> {
    if let Some(hex) = raw.strip_prefix("hex:") {
        return decode_hex(hex, line);
    }
    if raw.starts_with('"') && raw.ends_with('"') && raw.len() >= 2 {
        let inner = &raw[1..raw.len() - 1];
        let mut out = String::new();
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    other => return parse_err(line, format!("bad escape {other:?}")),
                }
            } else {
                out.push(c);
            }
        }
        return Ok(out.into_bytes());
    }
    parse_err(line, format!("expected a quoted string or hex:<digits>, got {raw:?}"))
}

fn split_kv(token: &str) -> Option<(&str, &str)> {
    token.split_once('=')
}

fn valid_id(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Maps a mnemonic decision to its output index for the canonical nets.
fn decision_index(
    net: SessionNet,
    place: &str,
    word: &str,
    line: usize,
) -> Result<usize, ScenarioError> {
    if let Ok(n) = word.parse::<usize>() {
        if n < 2 {
            return Ok(n);
        }
        return parse_err(line, format!("decision index {n} out of range for {place}"));
    }
    let index = match (net, place, word) {
        (SessionNet::Ens, "br1", "grant") => ens::decide::BR1_GRANT,
        (SessionNet::Ens, "br1", "deny") => ens::decide::BR1_DENY,
        (SessionNet::Ens, "br2", "ok") => ens::decide::BR2_OK,
        (SessionNet::Ens, "br2", "refused") => ens::decide::BR2_REFUSED,
        (SessionNet::Ens, "br3", "continue") => ens::decide::BR3_CONTINUE,
        (SessionNet::Ens, "br3", "exit") => ens::decide::BR3_EXIT,
        (SessionNet::Ens, "br4", "exit") => ens::decide::BR4_EXIT,
        (SessionNet::Ens, "br4", "retry") => ens::decide::BR4_RETRY,
        (SessionNet::Enr, "br1", "grant") => enr::decide::BR1_GRANT,
        (SessionNet::Enr, "br1", "deny") => enr::decide::BR1_DENY,
        (SessionNet::Enr, "br2", "ok") => enr::decide::BR2_OK,
        (SessionNet::Enr, "br2", "refused") => enr::decide::BR2_REFUSED,
        (SessionNet::Enr, "br3", "exit") => enr::decide::BR3_EXIT,
        (SessionNet::Enr, "br3", "retry") => enr::decide::BR3_RETRY,
        (SessionNet::Enr, "br4", "exit") => enr::decide::BR4_EXIT,
        (SessionNet::Enr, "br4", "retry") => enr::decide::BR4_RETRY,
        (SessionNet::Enr, "br5", "exit") => enr::decide::BR5_EXIT,
        (SessionNet::Enr, "br5", "continue") => enr::decide::BR5_CONTINUE,
        _ => return parse_err(line, format!("unknown decision {word:?} for {net} {place}")),
    };
    Ok(index)
}

fn resolution_places(net: SessionNet) -> &'static [&'static str] {
    match net {
        SessionNet::Ens => &["br1", "br2", "br3", "br4"],
        SessionNet::Enr => &["br1", "br2", "br3", "br4", "br5"],
    }
}

struct SessionBuilder {
    spec: SessionSpec,
    decides: Vec<(String, usize)>,
    policy: Option<SymbolicPolicy>,
    line: usize,
}

impl SessionBuilder {
    fn finish(self) -> Result<SessionSpec, ScenarioError> {
        let mut spec = self.spec;
        spec.script = match (self.decides.is_empty(), self.policy) {
            (false, Some(_)) => {
                return parse_err(
                    self.line,
                    format!(
                        "session for {} mixes decide lines with a policy line",
                        spec.user
                    ),
                )
            }
            (false, None) => ResolutionScript::Scripted(self.decides),
            (true, Some(p)) => ResolutionScript::Symbolic(p),
            (true, None) => ResolutionScript::default(),
        };
        Ok(spec)
    }
}

/// Parses and statically validates a scenario document. Cross-session
/// behavior (script exhaustion, continue-with-empty-pending) is checked by
/// the runner's dry-run pass on load.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut name: Option<String> = None;
    let mut seed: u64 = 0;
    let mut max_steps: u64 = DEFAULT_MAX_STEPS;
    let mut secmail_available = true;
    let mut users: BTreeMap<String, UserSeed> = BTreeMap::new();
    let mut pair_keys: BTreeMap<(String, String), Vec<u8>> = BTreeMap::new();
    let mut items: Vec<ScenarioItem> = Vec::new();
    let mut open_session: Option<SessionBuilder> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw, line)?;
        if tokens.is_empty() {
            continue;
        }
        let keyword = tokens[0].as_str();
        // Session sub-lines are handled first; everything else closes the
        // open session block.
        match keyword {
            "message" | "decide" | "policy" => {
                let Some(session) = open_session.as_mut() else {
                    return parse_err(line, format!("{keyword} outside a session block"));
                };
                match keyword {
                    "message" => {
                        if session.spec.net != SessionNet::Ens {
                            return parse_err(line, "only ens sessions script messages");
                        }
                        let mut recipients: Option<Vec<String>> = None;
                        let mut subject = Vec::new();
                        let mut body = Vec::new();
                        let mut attachment = Vec::new();
                        for token in &tokens[1..] {
                            let Some((key, value)) = split_kv(token) else {
                                return parse_err(line, format!("expected key=value, got {token:?}"));
                            };
                            match key {
                                "to" => {
                                    recipients = Some(
                                        value.split(',').map(str::to_string).collect(),
                                    )
                                }
                                "subject" => subject = parse_bytes_value(value, line)?,
                                "body" => body = parse_bytes_value(value, line)?,
                                "attachment" => attachment = parse_bytes_value(value, line)?,
                                other => {
                                    return parse_err(line, format!("unknown message field {other:?}"))
                                }
                            }
                        }
                        let Some(recipients) = recipients else {
                            return parse_err(line, "message needs to=<recipients>");
                        };
                        session.spec.messages.push(ScriptedMessage {
                            recipients,
                            subject,
                            body,
                            attachment,
                        });
                    }
                    "decide" => {
                        if tokens.len() != 3 {
                            return parse_err(line, "usage: decide <place> <choice>");
                        }
                        let place = tokens[1].as_str();
                        if !resolution_places(session.spec.net).contains(&place) {
                            return parse_err(
                                line,
                                format!("{place} is not a resolution place of {}", session.spec.net),
                            );
                        }
                        let index = decision_index(session.spec.net, place, &tokens[2], line)?;
                        session.decides.push((place.to_string(), index));
                    }
                    "policy" => {
                        if session.policy.is_some() {
                            return parse_err(line, "duplicate policy line");
                        }
                        let mut policy = SymbolicPolicy::default();
                        for token in &tokens[1..] {
                            if token == "always-grant" {
                                continue;
                            } else if let Some(place) = token.strip_prefix("deny-at:") {
                                if !resolution_places(session.spec.net).contains(&place) {
                                    return parse_err(
                                        line,
                                        format!("deny-at: {place} is not a resolution place"),
                                    );
                                }
                                policy.deny_at.insert(place.to_string());
                            } else if let Some(n) = token.strip_prefix("exit-after:") {
                                let n = n.parse::<u64>().map_err(|_| ScenarioError::Parse {
                                    line,
                                    message: format!("bad exit-after count {n:?}"),
                                })?;
                                policy.exit_after = Some(n);
                            } else {
                                return parse_err(line, format!("unknown policy directive {token:?}"));
                            }
                        }
                        session.policy = Some(policy);
                    }
                    _ => unreachable!(),
                }
                continue;
            }
            _ => {}
        }
        if let Some(done) = open_session.take() {
            items.push(ScenarioItem::Session(done.finish()?));
        }
        match keyword {
            "name" => match tokens.get(1) {
                Some(n) if tokens.len() == 2 && valid_id(n) => name = Some(n.clone()),
                _ => return parse_err(line, "usage: name <identifier>"),
            },
            "seed" => match tokens.get(1).and_then(|t| t.parse::<u64>().ok()) {
                Some(n) if tokens.len() == 2 => seed = n,
                _ => return parse_err(line, "usage: seed <u64>"),
            },
            "max-steps" => match tokens.get(1).and_then(|t| t.parse::<u64>().ok()) {
                Some(n) if tokens.len() == 2 => max_steps = n,
                _ => return parse_err(line, "usage: max-steps <u64>"),
            },
            "secmail" => match tokens.get(1).map(String::as_str) {
                Some("available") if tokens.len() == 2 => secmail_available = true,
                Some("refused") if tokens.len() == 2 => secmail_available = false,
                _ => return parse_err(line, "usage: secmail available|refused"),
            },
            "user" => {
                let id = match tokens.get(1) {
                    Some(n) if valid_id(n) => n.clone(),
                    _ => return parse_err(line, "usage: user <id> access=yes|no server=up|down signkey=<hex>"),
                };
                if users.contains_key(&id) {
                    return parse_err(line, format!("duplicate user {id}"));
                }
                let mut access = None;
                let mut server = None;
                let mut sign_key = None;
                for token in &tokens[2..] {
                    match split_kv(token) {
                        Some(("access", "yes")) => access = Some(true),
                        Some(("access", "no")) => access = Some(false),
                        Some(("server", "up")) => server = Some(true),
                        Some(("server", "down")) => server = Some(false),
                        Some(("signkey", hex)) => sign_key = Some(decode_hex(hex, line)?),
                        _ => return parse_err(line, format!("unknown user field {token:?}")),
                    }
                }
                let (Some(access), Some(server), Some(sign_key)) = (access, server, sign_key) else {
                    return parse_err(line, "user needs access=, server= and signkey=");
                };
                if sign_key.is_empty() {
                    return parse_err(line, "signkey must be non-empty");
                }
                users.insert(
                    id,
                    UserSeed {
                        access,
                        crypto_server_up: server,
                        sign_key,
                    },
                );
            }
            "pairkey" => {
                let (Some(a), Some(b), Some(hex)) = (tokens.get(1), tokens.get(2), tokens.get(3))
                else {
                    return parse_err(line, "usage: pairkey <sender> <recipient> <hex>");
                };
                if tokens.len() != 4 {
                    return parse_err(line, "usage: pairkey <sender> <recipient> <hex>");
                }
                let key = decode_hex(hex, line)?;
                if key.is_empty() {
                    return parse_err(line, "pair key must be non-empty");
                }
                pair_keys.insert((a.clone(), b.clone()), key);
            }
            "session" => {
                let net = match tokens.get(1).map(String::as_str) {
                    Some("ens") => SessionNet::Ens,
                    Some("enr") => SessionNet::Enr,
                    _ => return parse_err(line, "usage: session ens|enr <user>"),
                };
                let user = match tokens.get(2) {
                    Some(u) if tokens.len() == 3 && valid_id(u) => u.clone(),
                    _ => return parse_err(line, "usage: session ens|enr <user>"),
                };
                open_session = Some(SessionBuilder {
                    spec: SessionSpec {
                        net,
                        user,
                        messages: Vec::new(),
                        script: ResolutionScript::default(),
                    },
                    decides: Vec::new(),
                    policy: None,
                    line,
                });
            }
            "tamper" => {
                if tokens.len() != 6 {
                    return parse_err(line, "usage: tamper <sender> <message_no> <field> <offset> <mask-hex>");
                }
                let sender = tokens[1].clone();
                let message_no = tokens[2]
                    .parse::<u64>()
                    .map_err(|_| ScenarioError::Parse { line, message: "bad message_no".into() })?;
                let field = CtField::parse(&tokens[3]).ok_or_else(|| ScenarioError::Parse {
                    line,
                    message: format!("field must be subject|body|attachment, got {:?}", tokens[3]),
                })?;
                let offset = tokens[4]
                    .parse::<usize>()
                    .map_err(|_| ScenarioError::Parse { line, message: "bad offset".into() })?;
                let mask = decode_hex(&tokens[5], line)?;
                let [mask] = mask[..] else {
                    return parse_err(line, "mask must be one hex byte");
                };
                if mask == 0 {
                    return parse_err(line, "mask 00 would not flip anything");
                }
                items.push(ScenarioItem::Tamper(TamperSpec {
                    sender,
                    message_no,
                    field,
                    offset,
                    mask,
                }));
            }
            other => return parse_err(line, format!("unknown keyword {other:?}")),
        }
    }
    if let Some(done) = open_session.take() {
        items.push(ScenarioItem::Session(done.finish()?));
    }

    let scenario = Scenario {
        name: name.unwrap_or_else(|| "scenario".to_string()),
        seed,
        max_steps,
        secmail_available,
        users,
        pair_keys,
        items,
    };
    validate_static(&scenario)?;
    Ok(scenario)
}

fn validate_static(sc: &Scenario) -> Result<(), ScenarioError> {
    let invalid = |msg: String| Err(ScenarioError::Validation(msg));
    for (i, item) in sc.items.iter().enumerate() {
        match item {
            ScenarioItem::Session(s) => {
                if !sc.users.contains_key(&s.user) {
                    return invalid(format!("session {i}: user {} not declared", s.user));
                }
                for (m, msg) in s.messages.iter().enumerate() {
                    if msg.recipients.is_empty() {
                        return invalid(format!("session {i} message {m}: empty recipients"));
                    }
                    for r in &msg.recipients {
                        if !sc.users.contains_key(r) {
                            return invalid(format!(
                                "session {i} message {m}: recipient {r} not declared"
                            ));
                        }
                        if !sc.pair_keys.contains_key(&(s.user.clone(), r.clone())) {
                            return invalid(format!(
                                "session {i} message {m}: no pair key for ({}, {r})",
                                s.user
                            ));
                        }
                    }
                }
            }
            ScenarioItem::Tamper(t) => {
                if !sc.users.contains_key(&t.sender) {
                    return invalid(format!("tamper {i}: sender {} not declared", t.sender));
                }
            }
        }
    }
    Ok(())
}
