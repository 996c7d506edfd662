//! The simulated workstation environment: authentication and user control,
//! the crypto resource, key registry, audit log, archive and transport.
//!
//! All mutating operations go through one `&mut Environment`, which is the
//! serialization point the concurrency contract asks for: interleaved
//! session runs see atomic, linearizable service calls and a single gapless
//! audit sequence.

pub mod archive;
pub mod audit;
pub mod crypto;
pub mod transport;

use std::collections::BTreeMap;

pub use archive::{Archive, ArchiveHandle};
pub use audit::{parse_export, AuditAction, AuditFilter, AuditLog, AuditParseError, AuditRecord};
pub use crypto::{
    decipher, encipher, fnv1a64, keystream_byte, open, seal, CtField, Fnv1a64, Plaintext,
    SecuredMessage, VerifyError, FNV_OFFSET_BASIS, FNV_PRIME,
};
pub use transport::{Transport, TransportHandle};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub access: bool,
    pub crypto_server_up: bool,
    pub sign_key: Vec<u8>,
    pub send_counter: u64,
}

impl UserRecord {
    pub fn new(access: bool, crypto_server_up: bool, sign_key: Vec<u8>) -> Self {
        UserRecord {
            access,
            crypto_server_up,
            sign_key,
            send_counter: 0,
        }
    }
}

/// Static key material: symmetric pair keys per (sender, recipient) and
/// signing keys per user. Key distribution/rotation is out of scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyRegistry {
    pair_keys: BTreeMap<(String, String), Vec<u8>>,
    sign_keys: BTreeMap<String, Vec<u8>>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        KeyRegistry::default()
    }

    pub fn add_pair_key(&mut self, sender: &str, recipient: &str, key: Vec<u8>) {
        assert!(!key.is_empty(), "pair key must be non-empty");
        self.pair_keys
            .insert((sender.to_string(), recipient.to_string()), key);
    }

    pub fn add_sign_key(&mut self, user: &str, key: Vec<u8>) {
        assert!(!key.is_empty(), "sign key must be non-empty");
        self.sign_keys.insert(user.to_string(), key);
    }

    pub fn pair_key(&self, sender: &str, recipient: &str) -> Option<&[u8]> {
        self.pair_keys
            .get(&(sender.to_string(), recipient.to_string()))
            .map(Vec::as_slice)
    }

    pub fn sign_key(&self, user: &str) -> Option<&[u8]> {
        self.sign_keys.get(user).map(Vec::as_slice)
    }

    pub fn keys_bytes(&self) -> impl Iterator<Item = &[u8]> {
        self.pair_keys
            .values()
            .chain(self.sign_keys.values())
            .map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessDecision {
    pub granted: bool,
    pub crypto_server_up: bool,
}

impl AccessDecision {
    /// A session proceeds only with rights granted and the local crypto
    /// server reachable.
    pub fn effective(&self) -> bool {
        self.granted && self.crypto_server_up
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("no pair key for ({0}, {1})")]
    UnknownPair(String, String),
    #[error("unknown handle {0}")]
    UnknownHandle(u64),
    #[error("verification failed: {0}")]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    users: BTreeMap<String, UserRecord>,
    registry: KeyRegistry,
    pub secmail_available: bool,
    clock: u64,
    pub audit: AuditLog,
    pub archive: Archive,
    pub transport: Transport,
}

impl Environment {
    pub fn new(
        users: BTreeMap<String, UserRecord>,
        registry: KeyRegistry,
        secmail_available: bool,
    ) -> Self {
        let mut registry = registry;
        for (name, record) in &users {
            if !record.sign_key.is_empty() {
                registry.add_sign_key(name, record.sign_key.clone());
            }
        }
        Environment {
            users,
            registry,
            secmail_available,
            clock: 0,
            audit: AuditLog::new(),
            archive: Archive::new(),
            transport: Transport::new(),
        }
    }

    /// Advances the logical clock and returns the new tick.
    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn user(&self, id: &str) -> Option<&UserRecord> {
        self.users.get(id)
    }

    pub fn registry(&self) -> &KeyRegistry {
        &self.registry
    }

    pub fn audit_append(
        &mut self,
        actor: &str,
        action: AuditAction,
        message_no: Option<u64>,
        detail: impl Into<String>,
    ) -> u64 {
        let ts = self.tick();
        self.audit.append(ts, actor, action, message_no, detail).seq
    }

    /// Returns the user's configured flags; denial is audited.
    pub fn authenticate(&mut self, user: &str) -> Result<AccessDecision, ServiceError> {
        let record = self
            .users
            .get(user)
            .ok_or_else(|| ServiceError::UnknownUser(user.to_string()))?;
        let decision = AccessDecision {
            granted: record.access,
            crypto_server_up: record.crypto_server_up,
        };
        if !decision.effective() {
            let reason = if !decision.granted {
                "no access rights"
            } else {
                "local crypto server down"
            };
            self.audit_append(user, AuditAction::AccessDenied, None, reason);
        }
        Ok(decision)
    }

    /// Asks for the SecMail resource; refusal is audited.
    pub fn request_secmail(&mut self, user: &str) -> Result<bool, ServiceError> {
        if !self.users.contains_key(user) {
            return Err(ServiceError::UnknownUser(user.to_string()));
        }
        let available = self.secmail_available;
        if !available {
            self.audit_append(user, AuditAction::SecmailRefused, None, "resource unavailable");
        }
        Ok(available)
    }

    /// Enciphers, tags and signs a message, assigning the sender's next
    /// message number (gapless per sender across sessions).
    pub fn seal(
        &mut self,
        sender: &str,
        recipient: &str,
        plain: &Plaintext,
    ) -> Result<SecuredMessage, ServiceError> {
        let pair_key = self
            .registry
            .pair_key(sender, recipient)
            .ok_or_else(|| ServiceError::UnknownPair(sender.to_string(), recipient.to_string()))?
            .to_vec();
        let sign_key = self
            .registry
            .sign_key(sender)
            .ok_or_else(|| ServiceError::UnknownUser(sender.to_string()))?
            .to_vec();
        let record = self
            .users
            .get_mut(sender)
            .ok_or_else(|| ServiceError::UnknownUser(sender.to_string()))?;
        record.send_counter += 1;
        let message_no = record.send_counter;
        Ok(seal(&pair_key, &sign_key, sender, recipient, message_no, plain))
    }

    /// Verifies tag and signature and deciphers.
    pub fn open(&self, msg: &SecuredMessage) -> Result<Plaintext, ServiceError> {
        let pair_key = self
            .registry
            .pair_key(&msg.sender, &msg.recipient)
            .ok_or_else(|| {
                ServiceError::UnknownPair(msg.sender.clone(), msg.recipient.clone())
            })?;
        let sign_key = self
            .registry
            .sign_key(&msg.sender)
            .ok_or_else(|| ServiceError::UnknownUser(msg.sender.clone()))?;
        Ok(open(pair_key, sign_key, msg)?)
    }

    pub fn archive_store(&mut self, msg: SecuredMessage) -> ArchiveHandle {
        self.archive.store(msg)
    }

    pub fn archive_get(&self, handle: ArchiveHandle) -> Result<&SecuredMessage, ServiceError> {
        self.archive
            .get(handle)
            .ok_or(ServiceError::UnknownHandle(handle.0))
    }

    pub fn transport_send(&mut self, msg: SecuredMessage) -> TransportHandle {
        self.transport.send(msg)
    }

    pub fn transport_poll(&mut self, recipient: &str) -> Vec<TransportHandle> {
        self.transport.poll(recipient)
    }

    pub fn transport_fetch(&self, handle: TransportHandle) -> Result<&SecuredMessage, ServiceError> {
        self.transport
            .fetch(handle)
            .ok_or(ServiceError::UnknownHandle(handle.0))
    }
}
