//! Domain-separated hash oracles.
//!
//! Every oracle hashes `tag || (u32_be(len) || field)*` with SHA-512. Narrow
//! oracles keep the first 32 bytes; the wide oracle keeps all 64 and splits
//! them into a session key (left) and a confirmation key (right).

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha512};
use thiserror::Error;

/// Output length of the narrow oracles in bytes (256 bits).
pub const DIGEST_LEN: usize = 32;

/// Tag byte of the signature challenge hash. Kept outside the protocol tags.
pub(crate) const SIGNATURE_CHALLENGE_TAG: u8 = 0x07;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("the wide oracle must be evaluated with oracle_eval_wide")]
    WideTagMisuse,
    #[error("digest length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum OracleTag {
    /// Edge tokens `H(k', sid)`.
    H = 0x01,
    /// Group session key.
    Hg = 0x02,
    /// Pairwise key.
    Hp = 0x03,
    /// Subgroup session key.
    Hs = 0x04,
    /// Session key plus confirmation key, 2 * 256 bits.
    HgWide = 0x05,
    /// Confirmation message and key fingerprints.
    Hkc = 0x06,
}

impl OracleTag {
    pub const ALL: [OracleTag; 6] = [
        OracleTag::H,
        OracleTag::Hg,
        OracleTag::Hp,
        OracleTag::Hs,
        OracleTag::HgWide,
        OracleTag::Hkc,
    ];

    pub fn byte(self) -> u8 {
        self as u8
    }

    pub fn is_wide(self) -> bool {
        self == OracleTag::HgWide
    }
}

/// A 256-bit oracle output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, OracleError> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().map_err(|_| OracleError::LengthMismatch {
            expected: DIGEST_LEN,
            actual: bytes.len(),
        })?;
        Ok(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        let bytes = hex::decode(s).map_err(|e| e.to_string())?;
        Digest::from_slice(&bytes).map_err(|e| e.to_string())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", hex::encode(&self.0[..6]))
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl BitXor for Digest {
    type Output = Digest;

    fn bitxor(mut self, rhs: Digest) -> Digest {
        self ^= rhs;
        self
    }
}

impl BitXorAssign for Digest {
    fn bitxor_assign(&mut self, rhs: Digest) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a ^= b;
        }
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A 512-bit output of the wide oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WideDigest {
    pub left: Digest,
    pub right: Digest,
}

impl WideDigest {
    pub fn to_bytes(&self) -> [u8; 2 * DIGEST_LEN] {
        let mut out = [0u8; 2 * DIGEST_LEN];
        out[..DIGEST_LEN].copy_from_slice(&self.left.0);
        out[DIGEST_LEN..].copy_from_slice(&self.right.0);
        out
    }
}

/// Bitwise XOR of two equal-length byte strings.
pub fn xor(a: &[u8], b: &[u8]) -> Result<Digest, OracleError> {
    Ok(Digest::from_slice(a)? ^ Digest::from_slice(b)?)
}

/// Appends `u32_be(len) || field` for each field.
pub fn encode_fields<F: AsRef<[u8]>>(out: &mut Vec<u8>, fields: &[F]) {
    for field in fields {
        let field = field.as_ref();
        let len = u32::try_from(field.len()).expect("field longer than u32::MAX");
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(field);
    }
}

/// The exact byte string hashed for `(tag, fields)`.
pub fn preimage<F: AsRef<[u8]>>(tag: u8, fields: &[F]) -> Vec<u8> {
    let mut out = vec![tag];
    encode_fields(&mut out, fields);
    out
}

fn hash_raw<F: AsRef<[u8]>>(tag: u8, fields: &[F]) -> [u8; 64] {
    let mut hasher = Sha512::new();
    hasher.update(preimage(tag, fields));
    hasher.finalize().into()
}

pub(crate) fn eval_tag_byte<F: AsRef<[u8]>>(tag: u8, fields: &[F]) -> Digest {
    let full = hash_raw(tag, fields);
    let mut out = [0u8; DIGEST_LEN];
    out.copy_from_slice(&full[..DIGEST_LEN]);
    Digest(out)
}

/// Evaluates a narrow oracle.
pub fn oracle_eval<F: AsRef<[u8]>>(tag: OracleTag, fields: &[F]) -> Result<Digest, OracleError> {
    if tag.is_wide() {
        return Err(OracleError::WideTagMisuse);
    }
    Ok(eval_tag_byte(tag.byte(), fields))
}

/// Evaluates the wide oracle.
pub fn oracle_eval_wide<F: AsRef<[u8]>>(fields: &[F]) -> WideDigest {
    let full = hash_raw(OracleTag::HgWide.byte(), fields);
    let mut left = [0u8; DIGEST_LEN];
    let mut right = [0u8; DIGEST_LEN];
    left.copy_from_slice(&full[..DIGEST_LEN]);
    right.copy_from_slice(&full[DIGEST_LEN..]);
    WideDigest {
        left: Digest(left),
        right: Digest(right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = oracle_eval(OracleTag::Hg, &[b"x".as_slice(), b"y"]).unwrap();
        let b = oracle_eval(OracleTag::Hg, &[b"x".as_slice(), b"y"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn length_prefix_separates_splits() {
        let a = oracle_eval(OracleTag::H, &[b"ab".as_slice(), b"c"]).unwrap();
        let b = oracle_eval(OracleTag::H, &[b"a".as_slice(), b"bc"]).unwrap();
        assert_ne!(a, b);
        assert_ne!(
            preimage(1, &[b"ab".as_slice(), b"c"]),
            preimage(1, &[b"a".as_slice(), b"bc"])
        );
    }

    #[test]
    fn tags_separate_domains() {
        let fields = [b"same".as_slice()];
        assert_ne!(
            oracle_eval(OracleTag::H, &fields).unwrap(),
            oracle_eval(OracleTag::Hg, &fields).unwrap()
        );
    }

    #[test]
    fn wide_tag_misuse() {
        assert_eq!(
            oracle_eval(OracleTag::HgWide, &[b"x".as_slice()]),
            Err(OracleError::WideTagMisuse)
        );
    }

    #[test]
    fn wide_output_halves() {
        let w = oracle_eval_wide(&[b"x".as_slice()]);
        assert_eq!(w.to_bytes().len(), 64);
        assert_ne!(w.left, w.right);
        assert_eq!(w, oracle_eval_wide(&[b"x".as_slice()]));
    }

    #[test]
    fn xor_identities() {
        let d = oracle_eval(OracleTag::H, &[b"d".as_slice()]).unwrap();
        assert!((d ^ d).is_zero());
        assert_eq!(d ^ Digest::ZERO, d);
        assert_eq!(
            xor(&[1, 2], &[3]),
            Err(OracleError::LengthMismatch {
                expected: 32,
                actual: 2
            })
        );
        assert_eq!(xor(d.as_bytes(), Digest::ZERO.as_bytes()).unwrap(), d);
    }

    #[test]
    fn tag_bytes_are_distinct() {
        let mut bytes: Vec<u8> = OracleTag::ALL.iter().map(|t| t.byte()).collect();
        bytes.push(SIGNATURE_CHALLENGE_TAG);
        bytes.sort();
        bytes.dedup();
        assert_eq!(bytes, vec![1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(OracleTag::ALL.iter().filter(|t| t.is_wide()).count(), 1);
    }
}
