//! Two colluding insiders splitting their common neighbour off the group key.
//!
//! The insiders at cycle positions `v-1` and `v+1` run the protocol honestly
//! except that both XOR the same mask `r_M` into their broadcast `z`. The
//! mask appears twice in the global XOR sum and cancels, and both insiders
//! sign what they send, so every check passes. The victim's chain walk picks
//! up the mask on every edge except its own two; everyone else's picks it up
//! on exactly the victim's two edges.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{exp, GroupParams, Scalar};
use crate::identity::Identity;
use crate::oracle::Digest;
use crate::protocol::{
    derive_keys, edge_token, ChainAnchor, ParticipantState, ProtocolError, Round1Msg, Round2Msg,
    SessionId, StageKind, SubgroupOptions, SubgroupSession, SubgroupTokenContext, Variant,
    MIN_PARTIES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("party at position {0} is not one of the victim's neighbours")]
    NotAnInsider(usize),
    #[error("attack needs a cycle of at least {MIN_PARTIES} parties, got {0}")]
    CycleTooSmall(usize),
    #[error("victim position {victim} outside a cycle of {len}")]
    VictimOutOfRange { victim: usize, len: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Honest,
    Victim,
    LeftInsider,
    RightInsider,
}

impl Role {
    pub fn is_insider(self) -> bool {
        matches!(self, Role::LeftInsider | Role::RightInsider)
    }
}

/// Victim position within the attacked cycle and the insiders' mask.
///
/// A zero mask is allowed; it turns the insiders back into honest parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdversaryConfig {
    victim: usize,
    cycle_len: usize,
    mask: Digest,
}

impl AdversaryConfig {
    pub fn new(victim: usize, cycle_len: usize, mask: Digest) -> Result<Self, AdversaryError> {
        if cycle_len < MIN_PARTIES {
            return Err(AdversaryError::CycleTooSmall(cycle_len));
        }
        if victim >= cycle_len {
            return Err(AdversaryError::VictimOutOfRange {
                victim,
                len: cycle_len,
            });
        }
        Ok(AdversaryConfig {
            victim,
            cycle_len,
            mask,
        })
    }

    pub fn victim(&self) -> usize {
        self.victim
    }

    pub fn cycle_len(&self) -> usize {
        self.cycle_len
    }

    pub fn left_insider(&self) -> usize {
        (self.victim + self.cycle_len - 1) % self.cycle_len
    }

    pub fn right_insider(&self) -> usize {
        (self.victim + 1) % self.cycle_len
    }

    pub fn mask(&self) -> Digest {
        self.mask
    }

    pub fn is_neutral(&self) -> bool {
        self.mask.is_zero()
    }

    pub fn role_of(&self, position: usize) -> Role {
        if position == self.victim {
            Role::Victim
        } else if position == self.left_insider() {
            Role::LeftInsider
        } else if position == self.right_insider() {
            Role::RightInsider
        } else {
            Role::Honest
        }
    }

    fn insider_anchor(&self, position: usize) -> Result<ChainAnchor, AdversaryError> {
        match self.role_of(position) {
            Role::LeftInsider => Ok(ChainAnchor::Left),
            Role::RightInsider => Ok(ChainAnchor::Right),
            _ => Err(AdversaryError::NotAnInsider(position)),
        }
    }
}

/// Group-stage round 2 of an insider: the honest `z` XOR the mask, signed.
pub fn malicious_round2<R: RngCore + ?Sized>(
    state: &mut ParticipantState,
    config: &AdversaryConfig,
    msgs: &[Round1Msg],
    rng: &mut R,
) -> Result<Round2Msg, AdversaryError> {
    if config.cycle_len() != state.roster().len() {
        return Err(AdversaryError::NotAnInsider(state.position()));
    }
    let anchor = config.insider_anchor(state.position())?;
    Ok(state.round2_with(msgs, config.mask(), anchor, rng)?)
}

/// Subgroup-stage round 1 of an insider; `config` indexes into `spid`.
pub fn malicious_subgroup_round1<R: RngCore + ?Sized>(
    state: &ParticipantState,
    spid: &[Identity],
    options: SubgroupOptions,
    config: &AdversaryConfig,
    rng: &mut R,
) -> Result<(SubgroupSession, Round2Msg), AdversaryError> {
    let position = spid
        .iter()
        .position(|id| id == state.identity())
        .ok_or(ProtocolError::NotInSubgroup)?;
    if config.cycle_len() != spid.len() {
        return Err(AdversaryError::NotAnInsider(position));
    }
    let anchor = config.insider_anchor(position)?;
    Ok(state.subgroup_round1_with(spid, options, config.mask(), anchor, rng)?)
}

/// Inputs to the stage key that do not depend on the chain walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageContext {
    pub kind: StageKind,
    pub variant: Variant,
    pub token_context: Vec<u8>,
    pub session_context: Vec<u8>,
}

impl StageContext {
    pub fn group(sid: &SessionId, variant: Variant, params: &GroupParams) -> Self {
        let ctx = sid.encode(params);
        StageContext {
            kind: StageKind::Group,
            variant,
            token_context: ctx.clone(),
            session_context: ctx,
        }
    }

    pub fn subgroup(
        sid: &SessionId,
        spid: &[Identity],
        options: SubgroupOptions,
        variant: Variant,
        params: &GroupParams,
    ) -> Option<Self> {
        let ssid = sid.restrict(spid)?.encode(params);
        let token_context = match options.token_context {
            SubgroupTokenContext::FullSid => sid.encode(params),
            SubgroupTokenContext::Ssid => ssid.clone(),
        };
        Some(StageContext {
            kind: StageKind::Subgroup,
            variant,
            token_context,
            session_context: ssid,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivergencePrediction {
    pub honest_tokens: Vec<Digest>,
    pub victim_tokens: Vec<Digest>,
    pub honest_key: Digest,
    pub victim_key: Digest,
}

/// Computes, from every exponent on the attacked cycle, the key the
/// non-victims end up with and the key the victim ends up with.
///
/// `exponents[k]` belongs to the member at cycle position `k`.
pub fn predict_divergence(
    exponents: &[Scalar],
    config: &AdversaryConfig,
    context: &StageContext,
    params: &GroupParams,
) -> DivergencePrediction {
    let m = exponents.len();
    assert_eq!(m, config.cycle_len(), "one exponent per cycle member");
    let true_tokens: Vec<Digest> = (0..m)
        .map(|k| {
            let y = params.base_exp(&exponents[k]);
            let shared = exp(&y, &exponents[(k + 1) % m], params).expect("subgroup member");
            edge_token(&shared, &context.token_context, params)
        })
        .collect();
    let victim_edges = [config.left_insider(), config.victim()];
    let mask = config.mask();
    let honest_tokens: Vec<Digest> = true_tokens
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if victim_edges.contains(&k) {
                *t ^ mask
            } else {
                *t
            }
        })
        .collect();
    let victim_tokens: Vec<Digest> = true_tokens
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if victim_edges.contains(&k) {
                *t
            } else {
                *t ^ mask
            }
        })
        .collect();
    let key = |tokens: &[Digest]| {
        derive_keys(
            context.kind,
            context.variant,
            tokens,
            &context.session_context,
        )
        .0
    };
    DivergencePrediction {
        honest_key: key(&honest_tokens),
        victim_key: key(&victim_tokens),
        honest_tokens,
        victim_tokens,
    }
}
