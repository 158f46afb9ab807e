//! Schnorr signatures over the session group and the identity registry.
//!
//! A signature is `(e, s)` with `e = H7(R, vk, m)`, `R = g^k` and
//! `s = k + e * sk mod q`. Verification recomputes `R = g^s * vk^-e` and
//! compares the full 256-bit challenge.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::RngCore;
use thiserror::Error;

use crate::group::{encode_element, random_scalar, validate_element, Element, GroupParams, Scalar};
use crate::identity::Identity;
use crate::oracle::{eval_tag_byte, Digest, DIGEST_LEN, SIGNATURE_CHALLENGE_TAG};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("identity {0} registered twice")]
    DuplicateIdentity(Identity),
    #[error("identity {0} has no registered key")]
    UnknownIdentity(Identity),
}

#[derive(Clone, PartialEq, Eq)]
pub struct SigningKey {
    secret: Scalar,
    verify_key: VerifyKey,
    params: &'static GroupParams,
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKey")
            .field("verify_key", &self.verify_key)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VerifyKey(Element);

impl VerifyKey {
    pub fn element(&self) -> &Element {
        &self.0
    }

    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        encode_element(&self.0, params)
    }

    pub fn from_bytes(bytes: &[u8], params: &GroupParams) -> Option<Self> {
        validate_element(bytes, params).ok().map(VerifyKey)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    challenge: Digest,
    response: BigUint,
}

impl Signature {
    /// `challenge || response`, the response padded to the scalar width.
    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        let mut out = self.challenge.as_bytes().to_vec();
        let resp = self.response.to_bytes_be();
        out.resize(DIGEST_LEN + params.scalar_len() - resp.len(), 0);
        out.extend_from_slice(&resp);
        out
    }

    /// Parses the fixed-width form. The response must be reduced mod `q`.
    pub fn from_bytes(bytes: &[u8], params: &GroupParams) -> Option<Self> {
        if bytes.len() != DIGEST_LEN + params.scalar_len() {
            return None;
        }
        let challenge = Digest::from_slice(&bytes[..DIGEST_LEN]).ok()?;
        let response = BigUint::from_bytes_be(&bytes[DIGEST_LEN..]);
        if &response >= params.order() {
            return None;
        }
        Some(Signature {
            challenge,
            response,
        })
    }
}

impl SigningKey {
    pub fn from_scalar(secret: Scalar, params: &'static GroupParams) -> Self {
        let verify_key = VerifyKey(params.base_exp(&secret));
        SigningKey {
            secret,
            verify_key,
            params,
        }
    }

    pub fn verify_key(&self) -> &VerifyKey {
        &self.verify_key
    }

    pub fn params(&self) -> &'static GroupParams {
        self.params
    }
}

pub fn keypair<R: RngCore + ?Sized>(
    params: &'static GroupParams,
    rng: &mut R,
) -> (SigningKey, VerifyKey) {
    let sk = SigningKey::from_scalar(random_scalar(params, rng), params);
    let vk = sk.verify_key.clone();
    (sk, vk)
}

fn challenge(r: &Element, vk: &VerifyKey, message: &[u8], params: &GroupParams) -> Digest {
    eval_tag_byte(
        SIGNATURE_CHALLENGE_TAG,
        &[
            encode_element(r, params).as_slice(),
            vk.to_bytes(params).as_slice(),
            message,
        ],
    )
}

pub fn sign<R: RngCore + ?Sized>(sk: &SigningKey, message: &[u8], rng: &mut R) -> Signature {
    let params = sk.params;
    let nonce = random_scalar(params, rng);
    let r = params.base_exp(&nonce);
    let e = challenge(&r, &sk.verify_key, message, params);
    let e_red = BigUint::from_bytes_be(e.as_bytes()) % params.order();
    let response = (nonce.value() + e_red * sk.secret.value()) % params.order();
    Signature {
        challenge: e,
        response,
    }
}

pub fn verify(vk: &VerifyKey, message: &[u8], sig: &Signature, params: &GroupParams) -> bool {
    let q = params.order();
    if &sig.response >= q {
        return false;
    }
    let e_red = BigUint::from_bytes_be(sig.challenge.as_bytes()) % q;
    let neg_e = (q - e_red) % q;
    let gs = params.generator().pow(&sig.response, params);
    let r = gs.mul(&vk.0.pow(&neg_e, params), params);
    challenge(&r, vk, message, params) == sig.challenge
}

/// Identity to verification key map, fixed before any session starts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Registry {
    keys: BTreeMap<Identity, VerifyKey>,
}

impl Registry {
    pub fn new(
        entries: impl IntoIterator<Item = (Identity, VerifyKey)>,
    ) -> Result<Self, AuthError> {
        let mut keys = BTreeMap::new();
        for (id, vk) in entries {
            if keys.contains_key(&id) {
                return Err(AuthError::DuplicateIdentity(id));
            }
            keys.insert(id, vk);
        }
        Ok(Registry { keys })
    }

    pub fn get(&self, id: &Identity) -> Option<&VerifyKey> {
        self.keys.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Identity, &VerifyKey)> {
        self.keys.iter()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Checks `sig` against the key registered for `id`; unknown ids fail.
    pub fn verify(
        &self,
        id: &Identity,
        message: &[u8],
        sig: &Signature,
        params: &GroupParams,
    ) -> bool {
        self.keys
            .get(id)
            .is_some_and(|vk| verify(vk, message, sig, params))
    }

    pub fn require_all<'a>(
        &self,
        ids: impl IntoIterator<Item = &'a Identity>,
    ) -> Result<(), AuthError> {
        for id in ids {
            if !self.keys.contains_key(id) {
                return Err(AuthError::UnknownIdentity(id.clone()));
            }
        }
        Ok(())
    }
}
