//! Immutable message archive (the "database" of sent e-mail contents).

use super::crypto::SecuredMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArchiveHandle(pub u64);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Archive {
    items: Vec<SecuredMessage>,
}

impl Archive {
    pub fn new() -> Self {
        Archive::default()
    }

    /// Storing the same message twice yields two distinct handles.
    pub fn store(&mut self, msg: SecuredMessage) -> ArchiveHandle {
        self.items.push(msg);
        ArchiveHandle(self.items.len() as u64)
    }

    pub fn get(&self, handle: ArchiveHandle) -> Option<&SecuredMessage> {
        if handle.0 == 0 {
            return None;
        }
        self.items.get(handle.0 as usize - 1)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SecuredMessage> {
        self.items.iter()
    }

    /// Hex field dump, one record per line, for inspection.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, msg) in self.items.iter().enumerate() {
            out.push_str(&format!("handle={} {}\n", i + 1, msg.dump_line()));
        }
        out
    }
}
