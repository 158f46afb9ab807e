use rand::RngCore;

use super::cycle::{one_per_member, ChainAnchor, Cycle, CycleInput, StageKind};
use super::messages::{KcMsg, Round1Msg, Round2Msg};
use super::{AbortReason, GroupKey, P2PKey, Phase, ProtocolError, Roster, SessionId, Variant};
use crate::auth::{Registry, SigningKey};
use crate::group::{encode_element, random_scalar, Element, GroupParams, Scalar};
use crate::identity::Identity;
use crate::oracle::{encode_fields, oracle_eval, Digest, OracleTag};

/// What `compute_group_key` produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyOutcome {
    Accepted(GroupKey),
    /// Key derived, acceptance waits for the confirmation round.
    PendingConfirmation,
}

/// One party's view of a session.
///
/// Methods take `&mut self`. Precondition failures (`WrongPhase`, missing
/// messages, ...) leave the state untouched; failed protocol checks move it
/// to [`Phase::Aborted`] and return [`ProtocolError::Aborted`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantState {
    identity: Identity,
    position: usize,
    roster: Roster,
    params: &'static GroupParams,
    signing_key: SigningKey,
    variant: Variant,
    secret: Scalar,
    y: Element,
    phase: Phase,
    abort: Option<AbortReason>,
    sid: Option<SessionId>,
    cycle: Option<Cycle>,
}

/// Round 1: draws `x_i` and emits `y_i = g^{x_i}`.
pub fn start_session<R: RngCore + ?Sized>(
    identity: Identity,
    roster: &Roster,
    signing_key: SigningKey,
    variant: Variant,
    rng: &mut R,
) -> Result<(ParticipantState, Round1Msg), ProtocolError> {
    let params = signing_key.params();
    if roster.position(&identity).is_none() {
        return Err(ProtocolError::IdentityNotInRoster(identity));
    }
    let secret = random_scalar(params, rng);
    start_session_with_exponent(identity, roster, signing_key, variant, secret)
}

/// Round 1 with a caller-chosen exponent, for reproducing fixed exponent
/// tuples in tests and oracle comparisons.
pub fn start_session_with_exponent(
    identity: Identity,
    roster: &Roster,
    signing_key: SigningKey,
    variant: Variant,
    secret: Scalar,
) -> Result<(ParticipantState, Round1Msg), ProtocolError> {
    let position = roster
        .position(&identity)
        .ok_or_else(|| ProtocolError::IdentityNotInRoster(identity.clone()))?;
    let params = signing_key.params();
    let y = params.base_exp(&secret);
    let msg = Round1Msg {
        identity: identity.clone(),
        y: y.clone(),
    };
    let state = ParticipantState {
        identity,
        position,
        roster: roster.clone(),
        params,
        signing_key,
        variant,
        secret,
        y,
        phase: Phase::SentRound1,
        abort: None,
        sid: None,
        cycle: None,
    };
    Ok((state, msg))
}

impl ParticipantState {
    pub fn identity(&self) -> &Identity {
        &self.identity
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn params(&self) -> &'static GroupParams {
        self.params
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        self.abort.as_ref()
    }

    pub fn public_value(&self) -> &Element {
        &self.y
    }

    pub fn sid(&self) -> Option<&SessionId> {
        self.sid.as_ref()
    }

    /// The secret exponent `x_i`. Never part of any message; exposed so test
    /// harnesses can compute oracle values.
    pub fn exponent(&self) -> &Scalar {
        &self.secret
    }

    pub(crate) fn signing_key(&self) -> &SigningKey {
        &self.signing_key
    }

    /// `(z'_{i-1,i}, z'_{i,i+1})`, once round 2 has been sent.
    pub fn edge_tokens(&self) -> Option<(Digest, Digest)> {
        self.cycle.as_ref().map(|c| (c.left, c.right))
    }

    /// Edge tokens recovered from the broadcasts, in canonical order.
    pub fn recovered_tokens(&self) -> Option<&[Digest]> {
        self.cycle.as_ref()?.tokens.as_deref()
    }

    /// The derived session key, accepted or still pending confirmation.
    pub fn derived_key(&self) -> Option<Digest> {
        self.cycle.as_ref()?.key
    }

    /// The confirmation key `k_i^{kc}` of the hardened variant.
    pub fn confirmation_key(&self) -> Option<Digest> {
        self.cycle.as_ref()?.kc_key
    }

    /// The group key once accepted.
    pub fn group_key(&self) -> Option<GroupKey> {
        let accepted = match self.variant {
            Variant::Original => self.phase == Phase::KeyComputed,
            Variant::KeyConfirm => self.phase == Phase::Accepted,
        };
        if !accepted {
            return None;
        }
        Some(GroupKey {
            key: self.derived_key()?,
            sid: self.sid.clone()?,
        })
    }

    fn abort(&mut self, reason: AbortReason) -> ProtocolError {
        self.phase = Phase::Aborted;
        self.abort = Some(reason.clone());
        ProtocolError::Aborted(reason)
    }

    fn expect_phase(&self, phase: Phase) -> Result<(), ProtocolError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(ProtocolError::WrongPhase(self.phase))
        }
    }

    /// Round 2: assembles `sid`, computes the edge tokens and broadcasts
    /// the signed XOR of both.
    pub fn on_round1_complete<R: RngCore + ?Sized>(
        &mut self,
        msgs: &[Round1Msg],
        rng: &mut R,
    ) -> Result<Round2Msg, ProtocolError> {
        self.round2_with(msgs, Digest::ZERO, ChainAnchor::Left, rng)
    }

    pub(crate) fn round2_with<R: RngCore + ?Sized>(
        &mut self,
        msgs: &[Round1Msg],
        mask: Digest,
        anchor: ChainAnchor,
        rng: &mut R,
    ) -> Result<Round2Msg, ProtocolError> {
        self.expect_phase(Phase::SentRound1)?;
        let ordered = one_per_member(
            self.roster.members(),
            msgs,
            |m| &m.identity,
            ProtocolError::MissingRound1,
        )?;
        if let Some(bad) = ordered.iter().find(|m| !self.params.contains(m.y.value())) {
            return Err(self.abort(AbortReason::InvalidElement(bad.identity.clone())));
        }
        let sid = SessionId::new(
            ordered
                .iter()
                .map(|m| (m.identity.clone(), m.y.clone()))
                .collect(),
        );
        let ys: Vec<Element> = ordered.iter().map(|m| m.y.clone()).collect();
        let context = sid.encode(self.params);
        let (cycle, msg) = Cycle::open(
            CycleInput {
                kind: StageKind::Group,
                members: self.roster.members().to_vec(),
                ys: &ys,
                position: self.position,
                secret: &self.secret,
                token_context: context.clone(),
                session_context: context,
            },
            mask,
            anchor,
            &self.signing_key,
            rng,
        );
        self.sid = Some(sid);
        self.cycle = Some(cycle);
        self.phase = Phase::SentRound2;
        Ok(msg)
    }

    /// Checks the round-2 broadcasts, recovers the edge-token chain and
    /// derives `k_i` (and `k_i^{kc}` for the hardened variant).
    pub fn compute_group_key(
        &mut self,
        msgs: &[Round2Msg],
        registry: &Registry,
    ) -> Result<KeyOutcome, ProtocolError> {
        self.expect_phase(Phase::SentRound2)?;
        let cycle = self.cycle.as_ref().expect("cycle opened in round 2");
        let ordered = cycle.order_round2(msgs)?;
        let mut cycle = cycle.clone();
        if let Err(reason) = cycle.derive(&ordered, registry, self.params, self.variant) {
            return Err(self.abort(reason));
        }
        self.cycle = Some(cycle);
        self.phase = Phase::KeyComputed;
        Ok(match self.variant {
            Variant::Original => KeyOutcome::Accepted(self.group_key().expect("key accepted")),
            Variant::KeyConfirm => KeyOutcome::PendingConfirmation,
        })
    }

    /// Broadcasts `M_i = Hkc(k_i^{kc}, sid)` with its signature.
    pub fn kc_message<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<KcMsg, ProtocolError> {
        if self.variant != Variant::KeyConfirm {
            return Err(ProtocolError::WrongVariant);
        }
        self.expect_phase(Phase::KeyComputed)?;
        let cycle = self.cycle.as_mut().expect("cycle opened");
        let msg = cycle.confirmation_message(&self.signing_key, rng);
        self.phase = Phase::SentKC;
        Ok(msg)
    }

    /// Accepts `k_i` iff every `M_j` equals the own `M_i` and every
    /// confirmation signature verifies.
    pub fn finalize_kc(
        &mut self,
        msgs: &[KcMsg],
        registry: &Registry,
    ) -> Result<GroupKey, ProtocolError> {
        if self.variant != Variant::KeyConfirm {
            return Err(ProtocolError::WrongVariant);
        }
        self.expect_phase(Phase::SentKC)?;
        let cycle = self.cycle.as_ref().expect("cycle opened");
        let ordered = cycle.order_kc(msgs)?;
        if let Err(reason) = cycle.check_confirmations(&ordered, registry, self.params) {
            return Err(self.abort(reason));
        }
        self.phase = Phase::Accepted;
        Ok(self.group_key().expect("key accepted"))
    }

    /// `k_{i,j} = Hp(y_j^{x_i}, U_a|y_a, U_b|y_b)` with `a` before `b` in
    /// roster order, so both ends derive the same key.
    pub fn p2p_key(&self, peer: &Identity) -> Result<P2PKey, ProtocolError> {
        if !(Phase::SentRound2..=Phase::Accepted).contains(&self.phase) {
            return Err(ProtocolError::WrongPhase(self.phase));
        }
        if peer == &self.identity {
            return Err(ProtocolError::SelfPeer);
        }
        let peer_pos = self
            .roster
            .position(peer)
            .ok_or_else(|| ProtocolError::PeerNotInRoster(peer.clone()))?;
        let sid = self.sid.as_ref().expect("sid known from round 2");
        let y_peer = sid.public_value(peer).expect("sid covers roster");
        let shared = y_peer.pow(self.secret.value(), self.params);
        let own = (&self.identity, &self.y);
        let other = (peer, y_peer);
        let (first, second) = if self.position < peer_pos {
            (own, other)
        } else {
            (other, own)
        };
        let pair_bytes = |(id, y): (&Identity, &Element)| {
            let mut out = Vec::new();
            encode_fields(
                &mut out,
                &[id.as_bytes(), encode_element(y, self.params).as_slice()],
            );
            out
        };
        let key = oracle_eval(
            OracleTag::Hp,
            &[
                encode_element(&shared, self.params),
                pair_bytes(first),
                pair_bytes(second),
            ],
        )
        .expect("narrow tag");
        Ok(P2PKey {
            key,
            pair: (first.0.clone(), second.0.clone()),
        })
    }
}
