//! Transcript document.
//!
//! Pretty-printed JSON with a fixed field order and a schema tag. Binary
//! values are lowercase hex. Session keys never appear, only their
//! fingerprints `Hkc("fingerprint", key)`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adversary::Role;
use crate::group::GroupParams;
use crate::identity::Identity;
use crate::oracle::{oracle_eval, Digest, OracleTag};
use crate::protocol::{AbortReason, Phase, WireMessage};

use super::bus::DeliveredRound;
use super::scenario::Scenario;
use super::SimError;

pub const SCHEMA: &str = "gke-lab/transcript/v1";

/// Byte string stored as hex.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct HexBytes(pub Vec<u8>);

impl fmt::Debug for HexBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl Serialize for HexBytes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for HexBytes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(s)
            .map(HexBytes)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundLabel {
    #[serde(rename = "group-r1")]
    GroupRound1,
    #[serde(rename = "group-r2")]
    GroupRound2,
    #[serde(rename = "group-kc")]
    GroupKc,
    #[serde(rename = "subgroup-r1")]
    SubgroupRound1,
    #[serde(rename = "subgroup-kc")]
    SubgroupKc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub name: String,
    pub p: HexBytes,
    pub q: HexBytes,
    pub g: HexBytes,
}

impl GroupRecord {
    pub fn of(params: &GroupParams) -> Self {
        GroupRecord {
            name: params.name().to_string(),
            p: HexBytes(params.modulus().to_bytes_be()),
            q: HexBytes(params.order().to_bytes_be()),
            g: HexBytes(params.generator().value().to_bytes_be()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub identity: Identity,
    pub vk: HexBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MessageRecord {
    Round1 {
        sender: Identity,
        y: HexBytes,
    },
    Round2 {
        sender: Identity,
        z: HexBytes,
        signature: HexBytes,
    },
    Confirm {
        sender: Identity,
        m: HexBytes,
        signature: HexBytes,
    },
}

impl MessageRecord {
    pub fn of(msg: &WireMessage, params: &GroupParams) -> Self {
        match msg {
            WireMessage::Round1(m) => MessageRecord::Round1 {
                sender: m.identity.clone(),
                y: HexBytes(crate::group::encode_element(&m.y, params)),
            },
            WireMessage::Round2(m) => MessageRecord::Round2 {
                sender: m.identity.clone(),
                z: HexBytes(m.z.as_bytes().to_vec()),
                signature: HexBytes(m.signature.to_bytes(params)),
            },
            WireMessage::Kc(m) => MessageRecord::Confirm {
                sender: m.identity.clone(),
                m: HexBytes(m.m.as_bytes().to_vec()),
                signature: HexBytes(m.signature.to_bytes(params)),
            },
        }
    }

    pub fn sender(&self) -> &Identity {
        match self {
            MessageRecord::Round1 { sender, .. }
            | MessageRecord::Round2 { sender, .. }
            | MessageRecord::Confirm { sender, .. } => sender,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub label: RoundLabel,
    pub messages: Vec<MessageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub phase: Phase,
    pub abort: Option<AbortReason>,
    pub fingerprint: Option<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerFingerprint {
    pub peer: Identity,
    pub fingerprint: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyOutcome {
    pub identity: Identity,
    pub role: Role,
    pub group: StageOutcome,
    pub subgroup: Option<StageOutcome>,
    pub p2p: Vec<PeerFingerprint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub generator: String,
    pub version: String,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            generator: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema: String,
    pub scenario: Scenario,
    pub group: GroupRecord,
    pub registry: Vec<RegistryEntry>,
    pub rounds: Vec<RoundRecord>,
    pub outcomes: Vec<PartyOutcome>,
    pub metadata: Metadata,
}

impl Transcript {
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let t: Transcript =
            serde_json::from_str(text).map_err(|e| SimError::MalformedTranscript(e.to_string()))?;
        if t.schema != SCHEMA {
            return Err(SimError::MalformedTranscript(format!(
                "unknown schema {:?}",
                t.schema
            )));
        }
        Ok(t)
    }

    pub fn round(&self, label: RoundLabel) -> Option<&RoundRecord> {
        self.rounds.iter().find(|r| r.label == label)
    }
}

pub(crate) fn rounds_from_log(log: &[DeliveredRound], params: &GroupParams) -> Vec<RoundRecord> {
    log.iter()
        .map(|r| RoundRecord {
            label: r.label,
            messages: r
                .messages
                .iter()
                .map(|m| MessageRecord::of(m, params))
                .collect(),
        })
        .collect()
}

/// `Hkc("fingerprint", key)`.
pub fn fingerprint(key: &Digest) -> Digest {
    oracle_eval(OracleTag::Hkc, &[b"fingerprint".as_slice(), key.as_bytes()]).expect("narrow tag")
}
