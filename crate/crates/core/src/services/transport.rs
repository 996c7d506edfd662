//! Lossless, ordered, in-memory mail transport between sessions.

use std::collections::{BTreeMap, VecDeque};

use super::crypto::{CtField, SecuredMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransportHandle(pub u64);

/// Messages stay fetchable by handle after polling; the per-recipient queue
/// itself drains FIFO.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transport {
    messages: Vec<SecuredMessage>,
    queues: BTreeMap<String, VecDeque<u64>>,
}

impl Transport {
    pub fn new() -> Self {
        Transport::default()
    }

    pub fn send(&mut self, msg: SecuredMessage) -> TransportHandle {
        let recipient = msg.recipient.clone();
        self.messages.push(msg);
        let handle = self.messages.len() as u64;
        self.queues.entry(recipient).or_default().push_back(handle);
        TransportHandle(handle)
    }

    /// Drains and returns the recipient's queued handles in send order.
    pub fn poll(&mut self, recipient: &str) -> Vec<TransportHandle> {
        match self.queues.get_mut(recipient) {
            None => Vec::new(),
            Some(q) => q.drain(..).map(TransportHandle).collect(),
        }
    }

    /// The recipient's queue without draining it.
    pub fn queued(&self, recipient: &str) -> Vec<TransportHandle> {
        match self.queues.get(recipient) {
            None => Vec::new(),
            Some(q) => q.iter().copied().map(TransportHandle).collect(),
        }
    }

    pub fn fetch(&self, handle: TransportHandle) -> Option<&SecuredMessage> {
        if handle.0 == 0 {
            return None;
        }
        self.messages.get(handle.0 as usize - 1)
    }

    /// Everything that ever crossed the transport, for confidentiality
    /// scans.
    pub fn all_messages(&self) -> impl Iterator<Item = &SecuredMessage> {
        self.messages.iter()
    }

    /// Flips one ciphertext byte of an in-transit message, located by
    /// sender and message number. Returns false when no such byte exists.
    pub fn tamper(
        &mut self,
        sender: &str,
        message_no: u64,
        field: CtField,
        offset: usize,
        mask: u8,
    ) -> bool {
        for msg in &mut self.messages {
            if msg.sender == sender && msg.message_no == message_no {
                let bytes = msg.field_mut(field);
                if let Some(b) = bytes.get_mut(offset) {
                    *b ^= mask;
                    return true;
                }
                return false;
            }
        }
        false
    }
}
