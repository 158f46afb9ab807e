//! Group key exchange lab.
//!
//! * [`group`]: prime-order subgroups of `Z_p*` (a toy preset and MODP-2048).
//! * [`oracle`]: the tagged SHA-512 oracles and digest XOR.
//! * [`auth`]: Schnorr signatures and the identity registry.
//! * [`protocol`]: per-party state machines for the group, pairwise and
//!   subgroup stages, with an optional key-confirmation round.
//! * [`adversary`]: the colluding-neighbours attack and its key predictor.
//! * [`sim`]: broadcast bus, scenario runner, transcripts and their checks.

pub mod adversary;
pub mod auth;
pub mod group;
pub mod identity;
pub mod oracle;
pub mod protocol;
pub mod sim;

pub use identity::Identity;
