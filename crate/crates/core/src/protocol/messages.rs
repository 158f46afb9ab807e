//! Broadcast messages and their binary records.
//!
//! A record is `kind || u32_be(len) || identity || (u32_be(len) || field)*`
//! with kind `0x01` for round 1, `0x02` for round 2 (and the subgroup round)
//! and `0x03` for key confirmation.

use thiserror::Error;

use crate::auth::Signature;
use crate::group::{encode_element, validate_element, Element, GroupError, GroupParams};
use crate::identity::Identity;
use crate::oracle::{encode_fields, Digest};

const KIND_ROUND1: u8 = 0x01;
const KIND_ROUND2: u8 = 0x02;
const KIND_KC: u8 = 0x03;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round1Msg {
    pub identity: Identity,
    pub y: Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round2Msg {
    pub identity: Identity,
    pub z: Digest,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KcMsg {
    pub identity: Identity,
    pub m: Digest,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Round1(Round1Msg),
    Round2(Round2Msg),
    Kc(KcMsg),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("record truncated")]
    Truncated,
    #[error("unknown message kind {0:#04x}")]
    UnknownKind(u8),
    #[error("identity is not valid UTF-8")]
    BadIdentity,
    #[error("wrong number of payload fields")]
    FieldCount,
    #[error("malformed digest")]
    BadDigest,
    #[error("malformed signature")]
    BadSignature,
    #[error(transparent)]
    Element(#[from] GroupError),
}

/// Bytes covered by the round-2 and confirmation signatures:
/// `u32_be(len) || U_i || u32_be(len) || value || u32_be(len) || context`.
pub(crate) fn signed_bytes(identity: &Identity, value: &Digest, context: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    encode_fields(&mut out, &[identity.as_bytes(), value.as_bytes(), context]);
    out
}

impl WireMessage {
    pub fn identity(&self) -> &Identity {
        match self {
            WireMessage::Round1(m) => &m.identity,
            WireMessage::Round2(m) => &m.identity,
            WireMessage::Kc(m) => &m.identity,
        }
    }

    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        let (kind, identity, fields): (u8, &Identity, Vec<Vec<u8>>) = match self {
            WireMessage::Round1(m) => {
                (KIND_ROUND1, &m.identity, vec![encode_element(&m.y, params)])
            }
            WireMessage::Round2(m) => (
                KIND_ROUND2,
                &m.identity,
                vec![m.z.as_bytes().to_vec(), m.signature.to_bytes(params)],
            ),
            WireMessage::Kc(m) => (
                KIND_KC,
                &m.identity,
                vec![m.m.as_bytes().to_vec(), m.signature.to_bytes(params)],
            ),
        };
        let mut out = vec![kind];
        encode_fields(&mut out, &[identity.as_bytes()]);
        encode_fields(&mut out, &fields);
        out
    }

    pub fn from_bytes(bytes: &[u8], params: &GroupParams) -> Result<Self, DecodeError> {
        let (&kind, mut rest) = bytes.split_first().ok_or(DecodeError::Truncated)?;
        let mut fields = Vec::new();
        while !rest.is_empty() {
            if rest.len() < 4 {
                return Err(DecodeError::Truncated);
            }
            let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(DecodeError::Truncated);
            }
            fields.push(&rest[..len]);
            rest = &rest[len..];
        }
        let (id, payload) = fields.split_first().ok_or(DecodeError::FieldCount)?;
        let identity =
            Identity::new(std::str::from_utf8(id).map_err(|_| DecodeError::BadIdentity)?);
        let digest = |b: &[u8]| Digest::from_slice(b).map_err(|_| DecodeError::BadDigest);
        let signature =
            |b: &[u8]| Signature::from_bytes(b, params).ok_or(DecodeError::BadSignature);
        match (kind, payload) {
            (KIND_ROUND1, [y]) => Ok(WireMessage::Round1(Round1Msg {
                identity,
                y: validate_element(y, params)?,
            })),
            (KIND_ROUND2, [z, sig]) => Ok(WireMessage::Round2(Round2Msg {
                identity,
                z: digest(z)?,
                signature: signature(sig)?,
            })),
            (KIND_KC, [m, sig]) => Ok(WireMessage::Kc(KcMsg {
                identity,
                m: digest(m)?,
                signature: signature(sig)?,
            })),
            (KIND_ROUND1 | KIND_ROUND2 | KIND_KC, _) => Err(DecodeError::FieldCount),
            (other, _) => Err(DecodeError::UnknownKind(other)),
        }
    }
}
