//! 256-bit digests and the simulation-grade keyed signature.
//!
//! Every hash in the artifact is SHA-256 over the canonical byte encodings
//! defined by the owning module, so digests are bit-exact across runs and
//! implementations.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use std::fmt;

/// A 256-bit digest. The build constant for the whole artifact is SHA-256.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }

    /// First eight bytes, used for short references in payloads and ids.
    pub fn prefix8(&self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out.copy_from_slice(&self.0[..8]);
        out
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..12])
    }
}

pub fn sha256(data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(data);
    Digest(h.finalize().into())
}

/// Hash a sequence of parts as one message (no per-part framing; callers
/// that need unambiguous framing length-prefix the parts themselves).
pub fn sha256_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Simulation-grade signature: a keyed hash over (secret, message digest).
/// Real asymmetric signatures are out of scope for the artifact.
pub fn keyed_signature(secret: &Digest, message: &Digest) -> Digest {
    sha256_parts(&[b"sig:", secret.as_bytes(), message.as_bytes()])
}
