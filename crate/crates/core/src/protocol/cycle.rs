//! The cycle round shared by the group stage and the subgroup stage.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::messages::{signed_bytes, KcMsg, Round2Msg};
use super::{AbortReason, ProtocolError, Variant};
use crate::auth::{sign, Registry, SigningKey};
use crate::group::{encode_element, Element, GroupParams, Scalar};
use crate::identity::Identity;
use crate::oracle::{oracle_eval, oracle_eval_wide, Digest, OracleTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageKind {
    Group,
    Subgroup,
}

/// Which of its own edge tokens a party starts the chain walk from.
///
/// Honest parties start from `z'_{i-1,i}`. An insider on the victim's left
/// also starts there; the insider on the victim's right starts from
/// `z'_{i+1,i+2}` so that both insiders land on the non-victims' key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainAnchor {
    #[default]
    Left,
    Right,
}

/// Recovers every edge token from one known token and all broadcast `z`.
///
/// `start_token` is the edge token entering member `start_index`, i.e.
/// `z'_{s-1,s}`. Walks `z'_{j,j+1} = z'_{j-1,j} xor z_j` for `j = s..s+n-1`
/// and returns the tokens in canonical order `z'_{1,2}, ..., z'_{n,1}`
/// (0-based: entry `k` is the edge between members `k` and `k+1`).
pub fn recover_chain(start_token: Digest, start_index: usize, zs: &[Digest]) -> Vec<Digest> {
    let n = zs.len();
    assert!(n > 0, "empty cycle");
    let mut tokens = vec![Digest::ZERO; n];
    let mut prev = start_token;
    for j in start_index..start_index + n {
        let cur = prev ^ zs[j % n];
        tokens[j % n] = cur;
        prev = cur;
    }
    tokens
}

/// `H(k', context)`.
pub(crate) fn edge_token(k_prime: &Element, context: &[u8], params: &GroupParams) -> Digest {
    oracle_eval(
        OracleTag::H,
        &[encode_element(k_prime, params).as_slice(), context],
    )
    .expect("narrow tag")
}

/// Session key and, for the hardened variant, the confirmation key.
pub(crate) fn derive_keys(
    kind: StageKind,
    variant: Variant,
    tokens: &[Digest],
    session_context: &[u8],
) -> (Digest, Option<Digest>) {
    let mut fields: Vec<&[u8]> = tokens.iter().map(|t| t.as_bytes().as_slice()).collect();
    fields.push(session_context);
    match variant {
        Variant::Original => {
            let tag = match kind {
                StageKind::Group => OracleTag::Hg,
                StageKind::Subgroup => OracleTag::Hs,
            };
            (oracle_eval(tag, &fields).expect("narrow tag"), None)
        }
        Variant::KeyConfirm => {
            let wide = oracle_eval_wide(&fields);
            (wide.left, Some(wide.right))
        }
    }
}

pub(crate) fn confirmation_value(kc_key: &Digest, session_context: &[u8]) -> Digest {
    oracle_eval(
        OracleTag::Hkc,
        &[kc_key.as_bytes().as_slice(), session_context],
    )
    .expect("narrow tag")
}

/// Orders `msgs` by cycle membership, one per member.
pub(crate) fn one_per_member<'a, M>(
    members: &[Identity],
    msgs: &'a [M],
    sender: impl Fn(&M) -> &Identity,
    missing: impl Fn(Identity) -> ProtocolError,
) -> Result<Vec<&'a M>, ProtocolError> {
    let mut slots: Vec<Option<&M>> = vec![None; members.len()];
    for m in msgs {
        let id = sender(m);
        let pos = members
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| ProtocolError::UnexpectedSender(id.clone()))?;
        if slots[pos].replace(m).is_some() {
            return Err(ProtocolError::DuplicateMessage(id.clone()));
        }
    }
    slots
        .into_iter()
        .zip(members)
        .map(|(slot, id)| slot.ok_or_else(|| missing(id.clone())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Cycle {
    pub kind: StageKind,
    pub members: Vec<Identity>,
    pub position: usize,
    /// Hashed into edge tokens.
    pub token_context: Vec<u8>,
    /// Signed, and hashed into the stage key.
    pub session_context: Vec<u8>,
    pub left: Digest,
    pub right: Digest,
    pub anchor: ChainAnchor,
    pub tokens: Option<Vec<Digest>>,
    pub key: Option<Digest>,
    pub kc_key: Option<Digest>,
    pub confirmation: Option<Digest>,
}

pub(crate) struct CycleInput<'a> {
    pub kind: StageKind,
    pub members: Vec<Identity>,
    pub ys: &'a [Element],
    pub position: usize,
    pub secret: &'a Scalar,
    pub token_context: Vec<u8>,
    pub session_context: Vec<u8>,
}

impl Cycle {
    /// Computes both edge tokens and the signed `z` broadcast, with `mask`
    /// XORed into `z` before signing.
    pub fn open<R: RngCore + ?Sized>(
        input: CycleInput<'_>,
        mask: Digest,
        anchor: ChainAnchor,
        sk: &SigningKey,
        rng: &mut R,
    ) -> (Cycle, Round2Msg) {
        let params = sk.params();
        let m = input.members.len();
        let pos = input.position;
        let y_prev = &input.ys[(pos + m - 1) % m];
        let y_next = &input.ys[(pos + 1) % m];
        let left = edge_token(
            &y_prev.pow(input.secret.value(), params),
            &input.token_context,
            params,
        );
        let right = edge_token(
            &y_next.pow(input.secret.value(), params),
            &input.token_context,
            params,
        );
        let z = left ^ right ^ mask;
        let identity = input.members[pos].clone();
        let signature = sign(
            sk,
            &signed_bytes(&identity, &z, &input.session_context),
            rng,
        );
        let cycle = Cycle {
            kind: input.kind,
            members: input.members,
            position: pos,
            token_context: input.token_context,
            session_context: input.session_context,
            left,
            right,
            anchor,
            tokens: None,
            key: None,
            kc_key: None,
            confirmation: None,
        };
        (
            cycle,
            Round2Msg {
                identity,
                z,
                signature,
            },
        )
    }

    pub fn order_round2<'a>(
        &self,
        msgs: &'a [Round2Msg],
    ) -> Result<Vec<&'a Round2Msg>, ProtocolError> {
        one_per_member(
            &self.members,
            msgs,
            |m| &m.identity,
            ProtocolError::MissingRound2,
        )
    }

    /// XOR check, signature check, chain walk and key derivation.
    pub fn derive(
        &mut self,
        ordered: &[&Round2Msg],
        registry: &Registry,
        params: &GroupParams,
        variant: Variant,
    ) -> Result<(), AbortReason> {
        let zs: Vec<Digest> = ordered.iter().map(|m| m.z).collect();
        if !zs.iter().fold(Digest::ZERO, |acc, z| acc ^ *z).is_zero() {
            return Err(AbortReason::XorSumNonzero);
        }
        for msg in ordered {
            let bytes = signed_bytes(&msg.identity, &msg.z, &self.session_context);
            if !registry.verify(&msg.identity, &bytes, &msg.signature, params) {
                return Err(AbortReason::BadSignature(msg.identity.clone()));
            }
        }
        let tokens = match self.anchor {
            ChainAnchor::Left => recover_chain(self.left, self.position, &zs),
            ChainAnchor::Right => recover_chain(self.right, self.position + 1, &zs),
        };
        let (key, kc_key) = derive_keys(self.kind, variant, &tokens, &self.session_context);
        self.tokens = Some(tokens);
        self.key = Some(key);
        self.kc_key = kc_key;
        Ok(())
    }

    pub fn confirmation_message<R: RngCore + ?Sized>(
        &mut self,
        sk: &SigningKey,
        rng: &mut R,
    ) -> KcMsg {
        let kc_key = self.kc_key.expect("confirmation key derived");
        let m = confirmation_value(&kc_key, &self.session_context);
        let identity = self.members[self.position].clone();
        let signature = sign(sk, &signed_bytes(&identity, &m, &self.session_context), rng);
        self.confirmation = Some(m);
        KcMsg {
            identity,
            m,
            signature,
        }
    }

    pub fn order_kc<'a>(&self, msgs: &'a [KcMsg]) -> Result<Vec<&'a KcMsg>, ProtocolError> {
        one_per_member(
            &self.members,
            msgs,
            |m| &m.identity,
            ProtocolError::MissingKc,
        )
    }

    pub fn check_confirmations(
        &self,
        ordered: &[&KcMsg],
        registry: &Registry,
        params: &GroupParams,
    ) -> Result<(), AbortReason> {
        let own = self.confirmation.expect("confirmation sent");
        if ordered.iter().any(|m| m.m != own) {
            return Err(AbortReason::ConfirmationMismatch);
        }
        for msg in ordered {
            let bytes = signed_bytes(&msg.identity, &msg.m, &self.session_context);
            if !registry.verify(&msg.identity, &bytes, &msg.signature, params) {
                return Err(AbortReason::BadSignature(msg.identity.clone()));
            }
        }
        Ok(())
    }
}
