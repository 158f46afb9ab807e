#![allow(dead_code)]

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha512};

use gke_lab::auth::{keypair, Registry, SigningKey};
use gke_lab::group::{GroupParams, Scalar};
use gke_lab::oracle::Digest;
use gke_lab::protocol::{
    start_session_with_exponent, ParticipantState, Roster, Round1Msg, Round2Msg, Variant,
};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Reference oracle written against the byte layout directly:
/// `SHA-512(tag || (u32_be(len) || field)*)`, first 32 bytes.
pub fn ref_hash(tag: u8, fields: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha512::new();
    h.update([tag]);
    for f in fields {
        h.update((f.len() as u32).to_be_bytes());
        h.update(f);
    }
    let full: [u8; 64] = h.finalize().into();
    full[..32].try_into().unwrap()
}

/// `value` as a big-endian string of exactly `width` bytes.
pub fn be_fixed(value: &BigUint, width: usize) -> Vec<u8> {
    let raw = value.to_bytes_be();
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    out
}

/// Reference `sid` bytes for identities `U1..Un` with public values `g^x`.
pub fn ref_sid(params: &GroupParams, exponents: &[BigUint]) -> Vec<u8> {
    let width = params.element_len();
    let g = params.generator().value();
    let mut out = Vec::new();
    for (k, x) in exponents.iter().enumerate() {
        let id = format!("U{}", k + 1);
        let y = be_fixed(&g.modpow(x, params.modulus()), width);
        for f in [id.as_bytes(), y.as_slice()] {
            out.extend_from_slice(&(f.len() as u32).to_be_bytes());
            out.extend_from_slice(f);
        }
    }
    out
}

/// Reference edge tokens `H(g^{x_k x_{k+1}}, ctx)` for a cycle.
pub fn ref_edge_tokens(params: &GroupParams, exponents: &[BigUint], ctx: &[u8]) -> Vec<Digest> {
    let m = exponents.len();
    let g = params.generator().value();
    (0..m)
        .map(|k| {
            let e = (&exponents[k] * &exponents[(k + 1) % m]) % params.order();
            let shared = be_fixed(&g.modpow(&e, params.modulus()), params.element_len());
            Digest::from_bytes(ref_hash(0x01, &[&shared, ctx]))
        })
        .collect()
}

pub struct Group {
    pub roster: Roster,
    pub registry: Registry,
    pub parties: Vec<ParticipantState>,
    pub round1: Vec<Round1Msg>,
    pub rng: ChaCha20Rng,
}

pub fn signing_keys(
    params: &'static GroupParams,
    n: usize,
    seed: u64,
) -> (Vec<SigningKey>, Registry) {
    let roster = Roster::numbered(n).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let keys: Vec<SigningKey> = (0..n).map(|_| keypair(params, &mut r).0).collect();
    let registry = Registry::new(
        roster
            .members()
            .iter()
            .cloned()
            .zip(keys.iter().map(|k| k.verify_key().clone())),
    )
    .unwrap();
    (keys, registry)
}

/// Round 1 for `U1..Un` with fixed exponents.
pub fn open_group(
    params: &'static GroupParams,
    variant: Variant,
    exponents: &[Scalar],
    seed: u64,
) -> Group {
    let n = exponents.len();
    let roster = Roster::numbered(n).unwrap();
    let (keys, registry) = signing_keys(params, n, seed);
    let mut parties = Vec::new();
    let mut round1 = Vec::new();
    for (k, (sk, x)) in keys.into_iter().zip(exponents).enumerate() {
        let (state, msg) =
            start_session_with_exponent(roster.get(k).clone(), &roster, sk, variant, x.clone())
                .unwrap();
        parties.push(state);
        round1.push(msg);
    }
    Group {
        roster,
        registry,
        parties,
        round1,
        rng: rng(seed),
    }
}

pub fn toy_exponents(params: &GroupParams, xs: &[u64]) -> Vec<Scalar> {
    xs.iter()
        .map(|&x| Scalar::from_u64(x, params).unwrap())
        .collect()
}

impl Group {
    pub fn round2(&mut self) -> Vec<Round2Msg> {
        let r1 = self.round1.clone();
        self.parties
            .iter_mut()
            .map(|p| p.on_round1_complete(&r1, &mut self.rng).unwrap())
            .collect()
    }

    /// Honest group stage up to the key computation.
    pub fn run_honest(&mut self) -> Vec<Round2Msg> {
        let r2 = self.round2();
        for p in &mut self.parties {
            p.compute_group_key(&r2, &self.registry).unwrap();
        }
        r2
    }
}
