//! Kernel attributes: the typed values an E-net token carries between
//! transitions.

use std::collections::BTreeMap;
use std::fmt;

/// A single attribute value. Kernels carry maps of these; transition
/// procedures read and write them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttrValue {
    Text(String),
    Int(i64),
    Bool(bool),
    Bytes(Vec<u8>),
    List(Vec<AttrValue>),
}

impl AttrValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            AttrValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttrValue::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            AttrValue::Bytes(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[AttrValue]> {
        match self {
            AttrValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_list_mut(&mut self) -> Option<&mut Vec<AttrValue>> {
        match self {
            AttrValue::List(v) => Some(v),
            _ => None,
        }
    }
}

fn escape_text(s: &str, out: &mut String) {
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
}

impl fmt::Display for AttrValue {
    /// Stable single-line rendering used by trace files and dumps.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => {
                let mut buf = String::new();
                escape_text(s, &mut buf);
                write!(f, "text:{buf}")
            }
            AttrValue::Int(v) => write!(f, "int:{v}"),
            AttrValue::Bool(v) => write!(f, "bool:{v}"),
            AttrValue::Bytes(b) => {
                write!(f, "bytes:")?;
                if b.is_empty() {
                    write!(f, "-")?;
                }
                for byte in b {
                    write!(f, "{byte:02x}")?;
                }
                Ok(())
            }
            AttrValue::List(items) => {
                write!(f, "list:[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// The E-net token. A kernel occupies exactly one place at a time and
/// carries the session state as named attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    id: u64,
    attributes: BTreeMap<String, AttrValue>,
}

impl Kernel {
    pub fn new(id: u64) -> Self {
        Kernel {
            id,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attrs(id: u64, attrs: BTreeMap<String, AttrValue>) -> Self {
        Kernel {
            id,
            attributes: attrs,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn get(&self, name: &str) -> Option<&AttrValue> {
        self.attributes.get(name)
    }

    /// Attribute names must be non-empty.
    pub fn set(&mut self, name: &str, value: AttrValue) {
        assert!(!name.is_empty(), "attribute name must be non-empty");
        self.attributes.insert(name.to_string(), value);
    }

    pub fn remove(&mut self, name: &str) -> Option<AttrValue> {
        self.attributes.remove(name)
    }

    pub fn attributes(&self) -> &BTreeMap<String, AttrValue> {
        &self.attributes
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(AttrValue::as_int)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(AttrValue::as_text)
    }

    pub fn list(&self, name: &str) -> Option<&[AttrValue]> {
        self.get(name).and_then(AttrValue::as_list)
    }
}

/// Renders an attribute map on one line with stable key order.
pub fn format_attrs(attrs: &BTreeMap<String, AttrValue>) -> String {
    let mut out = String::from("{");
    for (i, (k, v)) in attrs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(k);
        out.push('=');
        out.push_str(&v.to_string());
    }
    out.push('}');
    out
}
