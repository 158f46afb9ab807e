//! Participant state machines for the group, pairwise and subgroup stages.
//!
//! Parties sit on a cycle given by the roster order, so `U_0 = U_n` and
//! `U_{n+1} = U_1`. Each party hashes the Diffie-Hellman values it shares
//! with its two neighbours into edge tokens, broadcasts their XOR, and later
//! walks the cycle to recover every edge token from the broadcasts.

mod cycle;
mod messages;
mod participant;
mod subgroup;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{encode_element, Element, GroupParams};
use crate::identity::Identity;
use crate::oracle::encode_fields;

pub use cycle::{recover_chain, ChainAnchor, StageKind};
pub use messages::{DecodeError, KcMsg, Round1Msg, Round2Msg, WireMessage};
pub use participant::{start_session, start_session_with_exponent, KeyOutcome, ParticipantState};
pub use subgroup::{SubgroupKeyOutcome, SubgroupOptions, SubgroupSession, SubgroupTokenContext};

pub(crate) use cycle::{derive_keys, edge_token};

/// Minimum cycle length for both the group and the subgroup stage.
pub const MIN_PARTIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Init,
    SentRound1,
    SentRound2,
    KeyComputed,
    SentKC,
    Accepted,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Key accepted right after the chain check.
    Original,
    /// Adds a signed confirmation round before acceptance.
    KeyConfirm,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbortReason {
    InvalidElement(Identity),
    XorSumNonzero,
    BadSignature(Identity),
    ConfirmationMismatch,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::InvalidElement(id) => write!(f, "invalid element from {id}"),
            AbortReason::XorSumNonzero => f.write_str("XOR of broadcast z values is nonzero"),
            AbortReason::BadSignature(id) => write!(f, "bad signature from {id}"),
            AbortReason::ConfirmationMismatch => f.write_str("key confirmation mismatch"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("a session needs at least {MIN_PARTIES} parties, got {0}")]
    RosterTooSmall(usize),
    #[error("identity {0} appears more than once")]
    DuplicateIdentity(Identity),
    #[error("identity {0} is not in the roster")]
    IdentityNotInRoster(Identity),
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("operation requires the key-confirmation variant")]
    WrongVariant,
    #[error("no round-1 message from {0}")]
    MissingRound1(Identity),
    #[error("no round-2 message from {0}")]
    MissingRound2(Identity),
    #[error("no key-confirmation message from {0}")]
    MissingKc(Identity),
    #[error("message from {0}, who is not a member of this cycle")]
    UnexpectedSender(Identity),
    #[error("more than one message from {0}")]
    DuplicateMessage(Identity),
    #[error("peer {0} is not in the roster")]
    PeerNotInRoster(Identity),
    #[error("a pairwise key needs a peer other than oneself")]
    SelfPeer,
    #[error("this party is not a member of the requested subgroup")]
    NotInSubgroup,
    #[error("a subgroup needs at least {MIN_PARTIES} members, got {0}")]
    SubgroupTooSmall(usize),
    #[error("subgroup member {0} is not in the roster (or the subgroup is not a proper subset)")]
    SubgroupNotSubsetOfRoster(Identity),
    #[error("session aborted: {0}")]
    Aborted(AbortReason),
}

/// Ordered, duplicate-free list of at least three identities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Roster(Vec<Identity>);

impl Roster {
    pub fn new(ids: impl IntoIterator<Item = Identity>) -> Result<Self, ProtocolError> {
        let ids: Vec<Identity> = ids.into_iter().collect();
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(ProtocolError::DuplicateIdentity(id.clone()));
            }
        }
        if ids.len() < MIN_PARTIES {
            return Err(ProtocolError::RosterTooSmall(ids.len()));
        }
        Ok(Roster(ids))
    }

    /// `U1, ..., Un`.
    pub fn numbered(n: usize) -> Result<Self, ProtocolError> {
        Roster::new((1..=n).map(Identity::numbered))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn members(&self) -> &[Identity] {
        &self.0
    }

    pub fn position(&self, id: &Identity) -> Option<usize> {
        self.0.iter().position(|m| m == id)
    }

    pub fn get(&self, index: usize) -> &Identity {
        &self.0[index % self.0.len()]
    }
}

/// `(U_1|y_1, ..., U_n|y_n)` in cycle order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SessionId(Vec<(Identity, Element)>);

impl SessionId {
    pub fn new(entries: Vec<(Identity, Element)>) -> Self {
        SessionId(entries)
    }

    pub fn entries(&self) -> &[(Identity, Element)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn identities(&self) -> impl Iterator<Item = &Identity> {
        self.0.iter().map(|(id, _)| id)
    }

    pub fn public_value(&self, id: &Identity) -> Option<&Element> {
        self.0.iter().find(|(m, _)| m == id).map(|(_, y)| y)
    }

    /// Concatenation of `u32_be(len) || U_j || u32_be(len) || y_j`.
    pub fn encode(&self, params: &GroupParams) -> Vec<u8> {
        let mut out = Vec::new();
        for (id, y) in &self.0 {
            encode_fields(
                &mut out,
                &[id.as_bytes(), encode_element(y, params).as_slice()],
            );
        }
        out
    }

    /// Sub-identifier over `spid`, in `spid` order.
    pub fn restrict(&self, spid: &[Identity]) -> Option<SessionId> {
        spid.iter()
            .map(|id| self.public_value(id).map(|y| (id.clone(), y.clone())))
            .collect::<Option<Vec<_>>>()
            .map(SessionId)
    }
}

/// Group key `k_i` with the session it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupKey {
    pub key: crate::oracle::Digest,
    pub sid: SessionId,
}

/// Subgroup key `k_{i,J}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupKey {
    pub key: crate::oracle::Digest,
    pub ssid: SessionId,
}

/// Pairwise key `k_{i,j}`. `pair` is ordered by roster position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct P2PKey {
    pub key: crate::oracle::Digest,
    pub pair: (Identity, Identity),
}
