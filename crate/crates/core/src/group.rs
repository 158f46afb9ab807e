//! Prime-order subgroups of `Z_p*`.
//!
//! All protocol exponentiations happen in the order-`q` subgroup generated by
//! `g`. Two fixed presets exist: a toy group small enough to enumerate and the
//! 2048-bit MODP group with `q = (p - 1) / 2`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("invalid group element: {0}")]
    InvalidElement(&'static str),
    #[error("scalar out of range [1, q-1]")]
    ScalarOutOfRange,
    #[error("invalid group parameters: {0}")]
    InvalidParams(&'static str),
    #[error("unknown group preset {0:?}")]
    UnknownPreset(String),
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "toy")]
    Toy,
    #[serde(rename = "modp-2048")]
    Modp2048,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Toy => "toy",
            Preset::Modp2048 => "modp-2048",
        }
    }

    pub fn params(self) -> &'static GroupParams {
        match self {
            Preset::Toy => &TOY,
            Preset::Modp2048 => &MODP_2048,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toy" => Ok(Preset::Toy),
            "modp-2048" => Ok(Preset::Modp2048),
            other => Err(GroupError::UnknownPreset(other.to_string())),
        }
    }
}

// RFC 3526, group 14.
const MODP_2048_P: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

static TOY: Lazy<GroupParams> = Lazy::new(|| {
    GroupParams::new(
        Preset::Toy,
        BigUint::from(23u32),
        BigUint::from(11u32),
        BigUint::from(2u32),
    )
    .expect("toy preset is well formed")
});

static MODP_2048: Lazy<GroupParams> = Lazy::new(|| {
    let p = BigUint::parse_bytes(MODP_2048_P.as_bytes(), 16).expect("hex literal");
    let q = (&p - 1u32) >> 1;
    GroupParams::new(Preset::Modp2048, p, q, BigUint::from(2u32))
        .expect("modp-2048 preset is well formed")
});

/// Order-`q` subgroup of `Z_p*` with generator `g`.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    preset: Preset,
    p: BigUint,
    q: BigUint,
    g: Element,
    element_len: usize,
    scalar_len: usize,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("preset", &self.preset)
            .field("p_bits", &self.p.bits())
            .field("q_bits", &self.q.bits())
            .finish()
    }
}

impl GroupParams {
    fn new(preset: Preset, p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        if !is_probable_prime(&p) {
            return Err(GroupError::InvalidParams("p is not prime"));
        }
        if !is_probable_prime(&q) {
            return Err(GroupError::InvalidParams("q is not prime"));
        }
        if !((&p - 1u32) % &q).is_zero() {
            return Err(GroupError::InvalidParams("q does not divide p-1"));
        }
        if g <= BigUint::one() || g >= p {
            return Err(GroupError::InvalidParams("generator out of range"));
        }
        if !g.modpow(&q, &p).is_one() {
            return Err(GroupError::InvalidParams("generator order is not q"));
        }
        let element_len = byte_len(&p);
        let scalar_len = byte_len(&q);
        Ok(GroupParams {
            preset,
            p,
            q,
            g: Element(g),
            element_len,
            scalar_len,
        })
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn name(&self) -> &'static str {
        self.preset.name()
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> &Element {
        &self.g
    }

    /// Width in bytes of an encoded element.
    pub fn element_len(&self) -> usize {
        self.element_len
    }

    /// Width in bytes of an encoded scalar.
    pub fn scalar_len(&self) -> usize {
        self.scalar_len
    }

    /// `g^s`.
    pub fn base_exp(&self, s: &Scalar) -> Element {
        Element(pow_mod(&self.g.0, &s.0, &self.p))
    }

    pub(crate) fn contains(&self, value: &BigUint) -> bool {
        *value > BigUint::one() && *value < self.p && pow_mod(value, &self.q, &self.p).is_one()
    }
}

fn byte_len(n: &BigUint) -> usize {
    (n.bits() as usize).div_ceil(8)
}

/// Miller-Rabin with the first twelve primes as bases. Deterministic below
/// 3.3 * 10^24 and probabilistic (error < 4^-12) above.
fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for b in BASES {
        let b = BigUint::from(b);
        if *n == b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for b in BASES {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// An exponent in `[1, q-1]`.
#[derive(Clone, PartialEq, Eq)]
pub struct Scalar(BigUint);

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

impl Scalar {
    pub fn new(value: BigUint, params: &GroupParams) -> Result<Self, GroupError> {
        if value.is_zero() || value >= params.q {
            return Err(GroupError::ScalarOutOfRange);
        }
        Ok(Scalar(value))
    }

    pub fn from_u64(value: u64, params: &GroupParams) -> Result<Self, GroupError> {
        Scalar::new(BigUint::from(value), params)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Fixed-width big-endian encoding, `params.scalar_len()` bytes.
    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        left_pad(&self.0.to_bytes_be(), params.scalar_len)
    }
}

/// A residue mod `p`. Values obtained from [`validate_element`], [`exp`] or
/// [`GroupParams::base_exp`] are members of the order-`q` subgroup.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Element(BigUint);

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bytes = self.0.to_bytes_be();
        if bytes.len() <= 8 {
            write!(f, "Element({})", self.0)
        } else {
            write!(f, "Element({}..)", hex::encode(&bytes[..8]))
        }
    }
}

impl Element {
    /// Wraps a raw residue without checking subgroup membership.
    pub fn new_unchecked(value: BigUint) -> Self {
        Element(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// `self^s` for an element already known to be in the subgroup.
    pub(crate) fn pow(&self, s: &BigUint, params: &GroupParams) -> Element {
        Element(pow_mod(&self.0, s, &params.p))
    }

    pub(crate) fn mul(&self, other: &Element, params: &GroupParams) -> Element {
        Element((&self.0 * &other.0) % &params.p)
    }
}

/// `base^exp mod m`. Moduli below 2^32 use native arithmetic; `BigUint::modpow`
/// has a fixed cost that dominates for one-byte toy values.
fn pow_mod(base: &BigUint, exp: &BigUint, m: &BigUint) -> BigUint {
    let Some(m) = m.to_u64().filter(|&m| m < 1 << 32) else {
        return base.modpow(exp, m);
    };
    let b = (base % m).to_u64().expect("reduced below m");
    let mut acc = 1 % m;
    for i in (0..exp.bits()).rev() {
        acc = acc * acc % m;
        if exp.bit(i) {
            acc = acc * b % m;
        }
    }
    BigUint::from(acc)
}

/// Uniform scalar in `[1, q-1]` by rejection sampling.
pub fn random_scalar<R: RngCore + ?Sized>(params: &GroupParams, rng: &mut R) -> Scalar {
    let range = &params.q - 1u32;
    let bits = range.bits();
    let nbytes = (bits as usize).div_ceil(8);
    let excess = (nbytes * 8) as u64 - bits;
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xff >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if candidate < range {
            return Scalar(candidate + 1u32);
        }
    }
}

/// `base^s mod p`, rejecting bases outside the subgroup.
pub fn exp(base: &Element, s: &Scalar, params: &GroupParams) -> Result<Element, GroupError> {
    if !params.contains(&base.0) {
        return Err(GroupError::InvalidElement(
            "not a member of the order-q subgroup",
        ));
    }
    Ok(base.pow(&s.0, params))
}

/// Decodes a fixed-width big-endian element and checks it lies in the
/// order-`q` subgroup and is not the identity.
pub fn validate_element(bytes: &[u8], params: &GroupParams) -> Result<Element, GroupError> {
    if bytes.len() != params.element_len {
        return Err(GroupError::InvalidElement("wrong encoded width"));
    }
    let value = BigUint::from_bytes_be(bytes);
    if value.is_zero() || value >= params.p {
        return Err(GroupError::InvalidElement("out of range"));
    }
    if value.is_one() {
        return Err(GroupError::InvalidElement("identity"));
    }
    if !pow_mod(&value, &params.q, &params.p).is_one() {
        return Err(GroupError::InvalidElement(
            "not a member of the order-q subgroup",
        ));
    }
    Ok(Element(value))
}

/// Fixed-width big-endian encoding, `params.element_len()` bytes.
pub fn encode_element(e: &Element, params: &GroupParams) -> Vec<u8> {
    left_pad(&e.0.to_bytes_be(), params.element_len)
}

fn left_pad(bytes: &[u8], width: usize) -> Vec<u8> {
    debug_assert!(bytes.len() <= width);
    let mut out = vec![0u8; width.saturating_sub(bytes.len())];
    out.extend_from_slice(bytes);
    out
}
