//! Line-oriented textual format for net definitions.
//!
//! One document per net. Loading a dumped net reproduces it exactly, so
//! definitions can cross tool boundaries without this crate's builders.
//!
//! ```text
//! net ENR
//! domain pending list
//! domain processed int 0 3
//! place bp1 peripheral
//! place br1 resolution
//! place b11 general terminal
//! transition t6 simple
//!   input b7 if processed=0
//!   outputs b8
//!   procedure enr.select_first
//! initial bp1
//!   seed processed int 0
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::attr::AttrValue;
use super::guard::{AttrDomain, Guard, GuardAtom};
use super::net::{
    InitialMarking, InputArc, NetDefinition, PlaceKind, PlaceSpec, TransitionKind, TransitionSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("net format error at line {line}: {message}")]
pub struct NetFormatError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, NetFormatError> {
    Err(NetFormatError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Quoted(String),
    Open,
    Close,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, NetFormatError> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                chars.next();
            }
            '[' => {
                chars.next();
                tokens.push(Token::Open);
            }
            ']' => {
                chars.next();
                tokens.push(Token::Close);
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return err(line_no, "unterminated string"),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            other => {
                                return err(line_no, format!("bad escape {other:?} in string"))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                tokens.push(Token::Quoted(s));
            }
            _ => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '[' || c == ']' || c == '"' || c == '#' {
                        break;
                    }
                    w.push(c);
                    chars.next();
                }
                tokens.push(Token::Word(w));
            }
        }
    }
    Ok(tokens)
}

fn parse_hex(s: &str, line: usize) -> Result<Vec<u8>, NetFormatError> {
    if s == "-" {
        return Ok(Vec::new());
    }
    if !s.len().is_multiple_of(2) {
        return err(line, format!("odd-length hex string {s:?}"));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| NetFormatError {
                    line,
                    message: format!("bad hex string {s:?}"),
                })
        })
        .collect()
}

fn hex_string(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        return "-".to_string();
    }
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// value := int N | bool B | text "…" | bytes HEX | list [ value … ]
fn parse_value(tokens: &[Token], pos: &mut usize, line: usize) -> Result<AttrValue, NetFormatError> {
    let kind = match tokens.get(*pos) {
        Some(Token::Word(w)) => w.clone(),
        _ => return err(line, "expected a value type (int/bool/text/bytes/list)"),
    };
    *pos += 1;
    match kind.as_str() {
        "int" => match tokens.get(*pos) {
            Some(Token::Word(w)) => {
                *pos += 1;
                w.parse::<i64>()
                    .map(AttrValue::Int)
                    .map_err(|_| NetFormatError {
                        line,
                        message: format!("bad integer {w:?}"),
                    })
            }
            _ => err(line, "int needs a literal"),
        },
        "bool" => match tokens.get(*pos) {
            Some(Token::Word(w)) if w == "true" => {
                *pos += 1;
                Ok(AttrValue::Bool(true))
            }
            Some(Token::Word(w)) if w == "false" => {
                *pos += 1;
                Ok(AttrValue::Bool(false))
            }
            _ => err(line, "bool needs true or false"),
        },
        "text" => match tokens.get(*pos) {
            Some(Token::Quoted(s)) => {
                *pos += 1;
                Ok(AttrValue::Text(s.clone()))
            }
            _ => err(line, "text needs a quoted string"),
        },
        "bytes" => match tokens.get(*pos) {
            Some(Token::Word(w)) => {
                let bytes = parse_hex(w, line)?;
                *pos += 1;
                Ok(AttrValue::Bytes(bytes))
            }
            _ => err(line, "bytes needs a hex literal or -"),
        },
        "list" => {
            if tokens.get(*pos) != Some(&Token::Open) {
                return err(line, "list needs [ … ]");
            }
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    Some(Token::Close) => {
                        *pos += 1;
                        return Ok(AttrValue::List(items));
                    }
                    None => return err(line, "unterminated list"),
                    _ => items.push(parse_value(tokens, pos, line)?),
                }
            }
        }
        other => err(line, format!("unknown value type {other:?}")),
    }
}

fn write_value(value: &AttrValue, out: &mut String) {
    match value {
        AttrValue::Int(v) => {
            let _ = write!(out, "int {v}");
        }
        AttrValue::Bool(v) => {
            let _ = write!(out, "bool {v}");
        }
        AttrValue::Text(s) => {
            out.push_str("text \"");
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    _ => out.push(c),
                }
            }
            out.push('"');
        }
        AttrValue::Bytes(b) => {
            let _ = write!(out, "bytes {}", hex_string(b));
        }
        AttrValue::List(items) => {
            out.push_str("list [");
            for item in items {
                out.push(' ');
                write_value(item, out);
            }
            out.push_str(" ]");
        }
    }
}

pub fn parse_guard(text: &str, line: usize) -> Result<Guard, NetFormatError> {
    let mut atoms = Vec::new();
    for part in text.split('&') {
        let part = part.trim();
        if part.is_empty() {
            return err(line, "empty guard atom");
        }
        let (name, op, value) = split_atom(part)
            .ok_or_else(|| NetFormatError {
                line,
                message: format!("cannot parse guard atom {part:?}"),
            })?;
        let atom = match (op, value) {
            ("=", "true") => GuardAtom::BoolIs(name.to_string(), true),
            ("=", "false") => GuardAtom::BoolIs(name.to_string(), false),
            ("=", "empty") => GuardAtom::ListEmpty(name.to_string()),
            ("=", "nonempty") => GuardAtom::ListNonEmpty(name.to_string()),
            ("=", v) => GuardAtom::IntEq(name.to_string(), parse_int(v, line)?),
            (">", v) => GuardAtom::IntGt(name.to_string(), parse_int(v, line)?),
            ("<", v) => GuardAtom::IntLt(name.to_string(), parse_int(v, line)?),
            (">=", v) => GuardAtom::IntGe(name.to_string(), parse_int(v, line)?),
            ("<=", v) => GuardAtom::IntLe(name.to_string(), parse_int(v, line)?),
            _ => return err(line, format!("cannot parse guard atom {part:?}")),
        };
        atoms.push(atom);
    }
    Ok(Guard::new(atoms))
}

fn parse_int(s: &str, line: usize) -> Result<i64, NetFormatError> {
    s.parse::<i64>().map_err(|_| NetFormatError {
        line,
        message: format!("bad integer {s:?} in guard"),
    })
}

fn split_atom(s: &str) -> Option<(&str, &str, &str)> {
    for op in [">=", "<=", "=", ">", "<"] {
        if let Some(idx) = s.find(op) {
            let (name, rest) = s.split_at(idx);
            return Some((name.trim(), op, rest[op.len()..].trim()));
        }
    }
    None
}

struct PendingTransition {
    spec: TransitionSpec,
    line: usize,
}

/// Parses one net document.
pub fn parse_net(text: &str) -> Result<NetDefinition, NetFormatError> {
    let mut name: Option<String> = None;
    let mut places: Vec<PlaceSpec> = Vec::new();
    let mut transitions: Vec<TransitionSpec> = Vec::new();
    let mut domains: BTreeMap<String, AttrDomain> = BTreeMap::new();
    let mut initial: Option<InitialMarking> = None;
    let mut pending: Option<PendingTransition> = None;
    let mut in_initial = false;
    let mut ended = false;

    let commit =
        |pending: &mut Option<PendingTransition>, transitions: &mut Vec<TransitionSpec>| -> Result<(), NetFormatError> {
            if let Some(p) = pending.take() {
                if p.spec.inputs.is_empty() {
                    return err(p.line, format!("transition {} has no input line", p.spec.id));
                }
                if p.spec.outputs.is_empty() {
                    return err(p.line, format!("transition {} has no outputs line", p.spec.id));
                }
                if p.spec.procedure.is_empty() {
                    return err(p.line, format!("transition {} has no procedure line", p.spec.id));
                }
                transitions.push(p.spec);
            }
            Ok(())
        };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if ended {
            let tokens = tokenize(raw, line_no)?;
            if !tokens.is_empty() {
                return err(line_no, "content after end");
            }
            continue;
        }
        let tokens = tokenize(raw, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let word = match &tokens[0] {
            Token::Word(w) => w.as_str(),
            _ => return err(line_no, "line must start with a keyword"),
        };
        match word {
            "net" => {
                if name.is_some() {
                    return err(line_no, "duplicate net line");
                }
                match tokens.get(1) {
                    Some(Token::Word(n)) if tokens.len() == 2 => name = Some(n.clone()),
                    _ => return err(line_no, "usage: net <name>"),
                }
            }
            "domain" => {
                commit(&mut pending, &mut transitions)?;
                in_initial = false;
                let attr = match tokens.get(1) {
                    Some(Token::Word(n)) => n.clone(),
                    _ => return err(line_no, "usage: domain <attr> int <lo> <hi> | bool | list"),
                };
                let domain = match tokens.get(2) {
                    Some(Token::Word(k)) if k == "bool" => AttrDomain::Bool,
                    Some(Token::Word(k)) if k == "list" => AttrDomain::List,
                    Some(Token::Word(k)) if k == "int" => {
                        let lo = match tokens.get(3) {
                            Some(Token::Word(w)) => parse_int(w, line_no)?,
                            _ => return err(line_no, "int domain needs lo and hi"),
                        };
                        let hi = match tokens.get(4) {
                            Some(Token::Word(w)) => parse_int(w, line_no)?,
                            _ => return err(line_no, "int domain needs lo and hi"),
                        };
                        AttrDomain::Int { lo, hi }
                    }
                    _ => return err(line_no, "domain kind must be int, bool or list"),
                };
                domains.insert(attr, domain);
            }
            "place" => {
                commit(&mut pending, &mut transitions)?;
                in_initial = false;
                let id = match tokens.get(1) {
                    Some(Token::Word(n)) => n.clone(),
                    _ => return err(line_no, "usage: place <id> <kind> [terminal]"),
                };
                let kind = match tokens.get(2) {
                    Some(Token::Word(k)) if k == "peripheral" => PlaceKind::Peripheral,
                    Some(Token::Word(k)) if k == "resolution" => PlaceKind::Resolution,
                    Some(Token::Word(k)) if k == "general" => PlaceKind::General,
                    _ => return err(line_no, "place kind must be peripheral, resolution or general"),
                };
                let terminal = match tokens.get(3) {
                    None => false,
                    Some(Token::Word(w)) if w == "terminal" => true,
                    _ => return err(line_no, "trailing tokens after place kind"),
                };
                let mut spec = PlaceSpec::new(id.as_str(), kind);
                if terminal {
                    spec = spec.terminal();
                }
                places.push(spec);
            }
            "transition" => {
                commit(&mut pending, &mut transitions)?;
                in_initial = false;
                let id = match tokens.get(1) {
                    Some(Token::Word(n)) => n.clone(),
                    _ => return err(line_no, "usage: transition <id> simple | decision <place>"),
                };
                let spec = match tokens.get(2) {
                    Some(Token::Word(k)) if k == "simple" => TransitionSpec {
                        id: id.as_str().into(),
                        kind: TransitionKind::Simple,
                        inputs: Vec::new(),
                        outputs: Vec::new(),
                        resolution: None,
                        procedure: String::new(),
                    },
                    Some(Token::Word(k)) if k == "decision" => {
                        let res = match tokens.get(3) {
                            Some(Token::Word(p)) => p.clone(),
                            _ => return err(line_no, "decision transition needs a resolution place"),
                        };
                        TransitionSpec {
                            id: id.as_str().into(),
                            kind: TransitionKind::Decision,
                            inputs: Vec::new(),
                            outputs: Vec::new(),
                            resolution: Some(res.as_str().into()),
                            procedure: String::new(),
                        }
                    }
                    _ => return err(line_no, "transition kind must be simple or decision"),
                };
                pending = Some(PendingTransition { spec, line: line_no });
            }
            "input" => {
                let Some(p) = pending.as_mut() else {
                    return err(line_no, "input outside a transition block");
                };
                let place = match tokens.get(1) {
                    Some(Token::Word(n)) => n.clone(),
                    _ => return err(line_no, "usage: input <place> [if <guard>]"),
                };
                let guard = match tokens.get(2) {
                    None => None,
                    Some(Token::Word(w)) if w == "if" => {
                        let rest: Vec<String> = tokens[3..]
                            .iter()
                            .map(|t| match t {
                                Token::Word(w) => Ok(w.clone()),
                                _ => err(line_no, "guard must be plain words"),
                            })
                            .collect::<Result<_, _>>()?;
                        if rest.is_empty() {
                            return err(line_no, "empty guard after if");
                        }
                        Some(parse_guard(&rest.join(" "), line_no)?)
                    }
                    _ => return err(line_no, "expected `if` after input place"),
                };
                p.spec.inputs.push(InputArc {
                    place: place.as_str().into(),
                    guard,
                });
            }
            "outputs" => {
                let Some(p) = pending.as_mut() else {
                    return err(line_no, "outputs outside a transition block");
                };
                if tokens.len() < 2 {
                    return err(line_no, "outputs needs at least one place");
                }
                for t in &tokens[1..] {
                    match t {
                        Token::Word(w) => p.spec.outputs.push(w.as_str().into()),
                        _ => return err(line_no, "outputs must be place ids"),
                    }
                }
            }
            "procedure" => {
                let Some(p) = pending.as_mut() else {
                    return err(line_no, "procedure outside a transition block");
                };
                match tokens.get(1) {
                    Some(Token::Word(n)) if tokens.len() == 2 => p.spec.procedure = n.clone(),
                    _ => return err(line_no, "usage: procedure <name>"),
                }
            }
            "initial" => {
                commit(&mut pending, &mut transitions)?;
                match tokens.get(1) {
                    Some(Token::Word(n)) if tokens.len() == 2 => {
                        if initial.is_some() {
                            return err(line_no, "duplicate initial line");
                        }
                        initial = Some(InitialMarking {
                            place: n.as_str().into(),
                            attrs: BTreeMap::new(),
                        });
                        in_initial = true;
                    }
                    _ => return err(line_no, "usage: initial <place>"),
                }
            }
            "seed" => {
                if !in_initial {
                    return err(line_no, "seed outside the initial block");
                }
                let attr = match tokens.get(1) {
                    Some(Token::Word(n)) => n.clone(),
                    _ => return err(line_no, "usage: seed <attr> <value>"),
                };
                let mut pos = 2;
                let value = parse_value(&tokens, &mut pos, line_no)?;
                if pos != tokens.len() {
                    return err(line_no, "trailing tokens after seed value");
                }
                initial
                    .as_mut()
                    .expect("in_initial implies initial set")
                    .attrs
                    .insert(attr, value);
            }
            "end" => {
                commit(&mut pending, &mut transitions)?;
                ended = true;
            }
            other => return err(line_no, format!("unknown keyword {other:?}")),
        }
    }
    commit(&mut pending, &mut transitions)?;

    let Some(name) = name else {
        return err(1, "missing net line");
    };
    let Some(initial) = initial else {
        return err(1, "missing initial line");
    };
    if !ended {
        return err(text.lines().count().max(1), "missing end line");
    }
    Ok(NetDefinition {
        name,
        places,
        transitions,
        domains,
        initial,
    })
}

/// Dumps a net in the canonical order: `parse_net(dump_net(n)) == n`.
pub fn dump_net(net: &NetDefinition) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "net {}", net.name);
    for (attr, domain) in &net.domains {
        match domain {
            AttrDomain::Int { lo, hi } => {
                let _ = writeln!(out, "domain {attr} int {lo} {hi}");
            }
            AttrDomain::Bool => {
                let _ = writeln!(out, "domain {attr} bool");
            }
            AttrDomain::List => {
                let _ = writeln!(out, "domain {attr} list");
            }
        }
    }
    for p in &net.places {
        let _ = write!(out, "place {} {}", p.id, p.kind);
        if p.terminal {
            out.push_str(" terminal");
        }
        out.push('\n');
    }
    for t in &net.transitions {
        match (&t.kind, &t.resolution) {
            (TransitionKind::Decision, Some(r)) => {
                let _ = writeln!(out, "transition {} decision {r}", t.id);
            }
            _ => {
                let _ = writeln!(out, "transition {} simple", t.id);
            }
        }
        for arc in &t.inputs {
            match &arc.guard {
                None => {
                    let _ = writeln!(out, "  input {}", arc.place);
                }
                Some(g) => {
                    let _ = writeln!(out, "  input {} if {g}", arc.place);
                }
            }
        }
        let outputs: Vec<&str> = t.outputs.iter().map(|p| p.as_str()).collect();
        let _ = writeln!(out, "  outputs {}", outputs.join(" "));
        let _ = writeln!(out, "  procedure {}", t.procedure);
    }
    let _ = writeln!(out, "initial {}", net.initial.place);
    for (attr, value) in &net.initial.attrs {
        let mut v = String::new();
        write_value(value, &mut v);
        let _ = writeln!(out, "  seed {attr} {v}");
    }
    out.push_str("end\n");
    out
}
