use std::collections::HashSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::cycle::{ChainAnchor, Cycle, CycleInput, StageKind};
use super::messages::{KcMsg, Round2Msg};
use super::participant::ParticipantState;
use super::{AbortReason, Phase, ProtocolError, SessionId, SubgroupKey, Variant, MIN_PARTIES};
use crate::auth::{Registry, SigningKey};
use crate::group::{Element, GroupParams};
use crate::identity::Identity;
use crate::oracle::Digest;

/// Context hashed into subgroup edge tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubgroupTokenContext {
    /// `H(k', sid)` with the full group `sid`.
    #[default]
    FullSid,
    /// `H(k', ssid)`.
    Ssid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubgroupOptions {
    pub token_context: SubgroupTokenContext,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubgroupKeyOutcome {
    Accepted(SubgroupKey),
    PendingConfirmation,
}

/// A party's run of the subgroup stage over `spid`, reusing its group-stage
/// exponent and the public values from `sid`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupSession {
    params: &'static GroupParams,
    signing_key: SigningKey,
    variant: Variant,
    phase: Phase,
    abort: Option<AbortReason>,
    ssid: SessionId,
    cycle: Cycle,
}

impl ParticipantState {
    /// Subgroup round 1: edge tokens with the new cyclic neighbours inside
    /// `spid`, signed over `ssid`.
    pub fn subgroup_round1<R: RngCore + ?Sized>(
        &self,
        spid: &[Identity],
        options: SubgroupOptions,
        rng: &mut R,
    ) -> Result<(SubgroupSession, Round2Msg), ProtocolError> {
        self.subgroup_round1_with(spid, options, Digest::ZERO, ChainAnchor::Left, rng)
    }

    pub(crate) fn subgroup_round1_with<R: RngCore + ?Sized>(
        &self,
        spid: &[Identity],
        options: SubgroupOptions,
        mask: Digest,
        anchor: ChainAnchor,
        rng: &mut R,
    ) -> Result<(SubgroupSession, Round2Msg), ProtocolError> {
        if !(Phase::SentRound2..=Phase::Accepted).contains(&self.phase()) {
            return Err(ProtocolError::WrongPhase(self.phase()));
        }
        let position = validate_spid(self, spid)?;
        let sid = self.sid().expect("sid known after round 2");
        let ssid = sid.restrict(spid).expect("spid checked against roster");
        let ys: Vec<Element> = ssid.entries().iter().map(|(_, y)| y.clone()).collect();
        let session_context = ssid.encode(self.params());
        let token_context = match options.token_context {
            SubgroupTokenContext::FullSid => sid.encode(self.params()),
            SubgroupTokenContext::Ssid => session_context.clone(),
        };
        let (cycle, msg) = Cycle::open(
            CycleInput {
                kind: StageKind::Subgroup,
                members: spid.to_vec(),
                ys: &ys,
                position,
                secret: self.exponent(),
                token_context,
                session_context,
            },
            mask,
            anchor,
            self.signing_key(),
            rng,
        );
        let session = SubgroupSession {
            params: self.params(),
            signing_key: self.signing_key().clone(),
            variant: self.variant(),
            phase: Phase::SentRound2,
            abort: None,
            ssid,
            cycle,
        };
        Ok((session, msg))
    }
}

/// Returns the caller's position inside `spid`.
fn validate_spid(state: &ParticipantState, spid: &[Identity]) -> Result<usize, ProtocolError> {
    let roster = state.roster();
    let mut seen = HashSet::new();
    for id in spid {
        if roster.position(id).is_none() {
            return Err(ProtocolError::SubgroupNotSubsetOfRoster(id.clone()));
        }
        if !seen.insert(id) {
            return Err(ProtocolError::DuplicateIdentity(id.clone()));
        }
    }
    if spid.len() < MIN_PARTIES {
        return Err(ProtocolError::SubgroupTooSmall(spid.len()));
    }
    if spid.len() >= roster.len() {
        let outsider = roster.get(0).clone();
        return Err(ProtocolError::SubgroupNotSubsetOfRoster(outsider));
    }
    spid.iter()
        .position(|id| id == state.identity())
        .ok_or(ProtocolError::NotInSubgroup)
}

impl SubgroupSession {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        self.abort.as_ref()
    }

    pub fn ssid(&self) -> &SessionId {
        &self.ssid
    }

    pub fn members(&self) -> &[Identity] {
        &self.cycle.members
    }

    pub fn position(&self) -> usize {
        self.cycle.position
    }

    pub fn identity(&self) -> &Identity {
        &self.cycle.members[self.cycle.position]
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn edge_tokens(&self) -> (Digest, Digest) {
        (self.cycle.left, self.cycle.right)
    }

    pub fn recovered_tokens(&self) -> Option<&[Digest]> {
        self.cycle.tokens.as_deref()
    }

    pub fn derived_key(&self) -> Option<Digest> {
        self.cycle.key
    }

    pub fn subgroup_key(&self) -> Option<SubgroupKey> {
        let accepted = match self.variant {
            Variant::Original => self.phase == Phase::KeyComputed,
            Variant::KeyConfirm => self.phase == Phase::Accepted,
        };
        if !accepted {
            return None;
        }
        Some(SubgroupKey {
            key: self.cycle.key?,
            ssid: self.ssid.clone(),
        })
    }

    fn abort(&mut self, reason: AbortReason) -> ProtocolError {
        self.phase = Phase::Aborted;
        self.abort = Some(reason.clone());
        ProtocolError::Aborted(reason)
    }

    /// Mirrors `compute_group_key` over the subgroup cycle with `Hs` and
    /// `ssid`.
    pub fn compute_subgroup_key(
        &mut self,
        msgs: &[Round2Msg],
        registry: &Registry,
    ) -> Result<SubgroupKeyOutcome, ProtocolError> {
        if self.phase != Phase::SentRound2 {
            return Err(ProtocolError::WrongPhase(self.phase));
        }
        let ordered = self.cycle.order_round2(msgs)?;
        let mut cycle = self.cycle.clone();
        if let Err(reason) = cycle.derive(&ordered, registry, self.params, self.variant) {
            return Err(self.abort(reason));
        }
        self.cycle = cycle;
        self.phase = Phase::KeyComputed;
        Ok(match self.variant {
            Variant::Original => {
                SubgroupKeyOutcome::Accepted(self.subgroup_key().expect("accepted"))
            }
            Variant::KeyConfirm => SubgroupKeyOutcome::PendingConfirmation,
        })
    }

    pub fn kc_message<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<KcMsg, ProtocolError> {
        if self.variant != Variant::KeyConfirm {
            return Err(ProtocolError::WrongVariant);
        }
        if self.phase != Phase::KeyComputed {
            return Err(ProtocolError::WrongPhase(self.phase));
        }
        let msg = self.cycle.confirmation_message(&self.signing_key, rng);
        self.phase = Phase::SentKC;
        Ok(msg)
    }

    pub fn finalize_kc(
        &mut self,
        msgs: &[KcMsg],
        registry: &Registry,
    ) -> Result<SubgroupKey, ProtocolError> {
        if self.variant != Variant::KeyConfirm {
            return Err(ProtocolError::WrongVariant);
        }
        if self.phase != Phase::SentKC {
            return Err(ProtocolError::WrongPhase(self.phase));
        }
        let ordered = self.cycle.order_kc(msgs)?;
        if let Err(reason) = self
            .cycle
            .check_confirmations(&ordered, registry, self.params)
        {
            return Err(self.abort(reason));
        }
        self.phase = Phase::Accepted;
        Ok(self.subgroup_key().expect("accepted"))
    }
}
