//! Toy cryptography: an FNV-keyed XOR stream cipher plus FNV keyed tags and
//! signatures.
//!
//! Deliberately NOT secure — the point is a deterministic, dependency-free
//! transform that is bit-exact across implementations and strong enough to
//! make tamper-detection tests meaningful at desk scale.

use std::fmt::Write as _;

pub const FNV_OFFSET_BASIS: u64 = 0xcbf29ce484222325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a-64 over a byte stream.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Fnv1a64(FNV_OFFSET_BASIS)
    }
}

impl Fnv1a64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, data: &[u8]) -> &mut Self {
        for b in data {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(data: &[u8]) -> u64 {
    Fnv1a64::new().update(data).finish()
}

/// Keystream byte i for a key: the low 8 bits of
/// FNV-1a-64(key ‖ little-endian-64(i)).
pub fn keystream_byte(key: &[u8], i: u64) -> u8 {
    assert!(!key.is_empty(), "cipher key must be non-empty");
    let h = Fnv1a64::new()
        .update(key)
        .update(&i.to_le_bytes())
        .finish();
    (h & 0xff) as u8
}

/// XOR stream transform; its own inverse.
pub fn encipher(key: &[u8], data: &[u8]) -> Vec<u8> {
    data.iter()
        .enumerate()
        .map(|(i, b)| b ^ keystream_byte(key, i as u64))
        .collect()
}

pub fn decipher(key: &[u8], data: &[u8]) -> Vec<u8> {
    encipher(key, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("TAG_MISMATCH")]
    TagMismatch,
    #[error("BAD_SIGNATURE")]
    BadSignature,
}

/// Subject/Body/Attachment plaintext of one message.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plaintext {
    pub subject: Vec<u8>,
    pub body: Vec<u8>,
    pub attachment: Vec<u8>,
}

impl Plaintext {
    pub fn new(
        subject: impl Into<Vec<u8>>,
        body: impl Into<Vec<u8>>,
        attachment: impl Into<Vec<u8>>,
    ) -> Self {
        Plaintext {
            subject: subject.into(),
            body: body.into(),
            attachment: attachment.into(),
        }
    }

    fn digest(&self) -> u64 {
        Fnv1a64::new()
            .update(&self.subject)
            .update(&self.body)
            .update(&self.attachment)
            .finish()
    }
}

/// Which ciphertext field of a secured message, e.g. for targeted
/// tampering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtField {
    Subject,
    Body,
    Attachment,
}

impl CtField {
    pub const ALL: [CtField; 3] = [CtField::Subject, CtField::Body, CtField::Attachment];

    pub fn name(&self) -> &'static str {
        match self {
            CtField::Subject => "subject",
            CtField::Body => "body",
            CtField::Attachment => "attachment",
        }
    }

    pub fn parse(s: &str) -> Option<CtField> {
        match s {
            "subject" => Some(CtField::Subject),
            "body" => Some(CtField::Body),
            "attachment" => Some(CtField::Attachment),
            _ => None,
        }
    }
}

/// A numbered, enciphered, tagged and signed message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecuredMessage {
    /// Per-sender, gapless from 1.
    pub message_no: u64,
    pub sender: String,
    pub recipient: String,
    pub subject_ct: Vec<u8>,
    pub body_ct: Vec<u8>,
    pub attachment_ct: Vec<u8>,
    /// Keyed digest of (pair key ‖ subject_ct ‖ body_ct ‖ attachment_ct).
    pub tag: u64,
    /// Keyed digest of (sender sign key ‖ plaintext digest).
    pub signature: u64,
}

impl SecuredMessage {
    pub fn field(&self, f: CtField) -> &[u8] {
        match f {
            CtField::Subject => &self.subject_ct,
            CtField::Body => &self.body_ct,
            CtField::Attachment => &self.attachment_ct,
        }
    }

    pub fn field_mut(&mut self, f: CtField) -> &mut Vec<u8> {
        match f {
            CtField::Subject => &mut self.subject_ct,
            CtField::Body => &mut self.body_ct,
            CtField::Attachment => &mut self.attachment_ct,
        }
    }

    /// Stable binary encoding, used when a kernel carries sealed messages
    /// between transitions and for confidentiality byte-scans.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.message_no.to_le_bytes());
        for s in [self.sender.as_bytes(), self.recipient.as_bytes()] {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s);
        }
        for f in [&self.subject_ct, &self.body_ct, &self.attachment_ct] {
            out.extend_from_slice(&(f.len() as u64).to_le_bytes());
            out.extend_from_slice(f);
        }
        out.extend_from_slice(&self.tag.to_le_bytes());
        out.extend_from_slice(&self.signature.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<SecuredMessage> {
        fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Option<&'a [u8]> {
            let slice = bytes.get(*pos..*pos + n)?;
            *pos += n;
            Some(slice)
        }
        fn take_u64(bytes: &[u8], pos: &mut usize) -> Option<u64> {
            Some(u64::from_le_bytes(take(bytes, pos, 8)?.try_into().ok()?))
        }
        fn take_chunk(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
            let len = take_u64(bytes, pos)? as usize;
            Some(take(bytes, pos, len)?.to_vec())
        }

        let mut pos = 0usize;
        let message_no = take_u64(bytes, &mut pos)?;
        let sender = String::from_utf8(take_chunk(bytes, &mut pos)?).ok()?;
        let recipient = String::from_utf8(take_chunk(bytes, &mut pos)?).ok()?;
        let subject_ct = take_chunk(bytes, &mut pos)?;
        let body_ct = take_chunk(bytes, &mut pos)?;
        let attachment_ct = take_chunk(bytes, &mut pos)?;
        let tag = take_u64(bytes, &mut pos)?;
        let signature = take_u64(bytes, &mut pos)?;
        if pos != bytes.len() {
            return None;
        }
        Some(SecuredMessage {
            message_no,
            sender,
            recipient,
            subject_ct,
            body_ct,
            attachment_ct,
            tag,
            signature,
        })
    }

    /// One-line hex dump for archive exports.
    pub fn dump_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "no={} sender={} recipient={} subject={} body={} attachment={} tag={:016x} sig={:016x}",
            self.message_no,
            self.sender,
            self.recipient,
            hex(&self.subject_ct),
            hex(&self.body_ct),
            hex(&self.attachment_ct),
            self.tag,
            self.signature,
        );
        s
    }
}

fn hex(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        return "-".to_string();
    }
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn compute_tag(pair_key: &[u8], subject_ct: &[u8], body_ct: &[u8], attachment_ct: &[u8]) -> u64 {
    Fnv1a64::new()
        .update(pair_key)
        .update(subject_ct)
        .update(body_ct)
        .update(attachment_ct)
        .finish()
}

fn compute_signature(sign_key: &[u8], plaintext_digest: u64) -> u64 {
    Fnv1a64::new()
        .update(sign_key)
        .update(&plaintext_digest.to_le_bytes())
        .finish()
}

/// Enciphers the triple with the pair key, tags the ciphertext, and signs
/// the plaintext digest with the sender's signing key.
pub fn seal(
    pair_key: &[u8],
    sign_key: &[u8],
    sender: &str,
    recipient: &str,
    message_no: u64,
    plain: &Plaintext,
) -> SecuredMessage {
    let subject_ct = encipher(pair_key, &plain.subject);
    let body_ct = encipher(pair_key, &plain.body);
    let attachment_ct = encipher(pair_key, &plain.attachment);
    let tag = compute_tag(pair_key, &subject_ct, &body_ct, &attachment_ct);
    let signature = compute_signature(sign_key, plain.digest());
    SecuredMessage {
        message_no,
        sender: sender.to_string(),
        recipient: recipient.to_string(),
        subject_ct,
        body_ct,
        attachment_ct,
        tag,
        signature,
    }
}

/// Recomputes the tag, deciphers, and checks the signature over the
/// recovered plaintext. `open(seal(x)) = x`.
pub fn open(
    pair_key: &[u8],
    sign_key: &[u8],
    msg: &SecuredMessage,
) -> Result<Plaintext, VerifyError> {
    let tag = compute_tag(pair_key, &msg.subject_ct, &msg.body_ct, &msg.attachment_ct);
    if tag != msg.tag {
        return Err(VerifyError::TagMismatch);
    }
    let plain = Plaintext {
        subject: decipher(pair_key, &msg.subject_ct),
        body: decipher(pair_key, &msg.body_ct),
        attachment: decipher(pair_key, &msg.attachment_ct),
    };
    if compute_signature(sign_key, plain.digest()) != msg.signature {
        return Err(VerifyError::BadSignature);
    }
    Ok(plain)
}
