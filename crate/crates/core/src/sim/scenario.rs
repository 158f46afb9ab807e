use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha512};

use crate::group::Preset;
use crate::oracle::Digest;
use crate::protocol::{SubgroupTokenContext, Variant, MIN_PARTIES};

use super::classify::Classification;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "mbd-p")]
    MbdP,
    #[serde(rename = "mbd-s")]
    MbdS,
    #[serde(rename = "mbd-p-kc")]
    MbdPKc,
    #[serde(rename = "mbd-s-kc")]
    MbdSKc,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::MbdP,
        ProtocolKind::MbdS,
        ProtocolKind::MbdPKc,
        ProtocolKind::MbdSKc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::MbdP => "mbd-p",
            ProtocolKind::MbdS => "mbd-s",
            ProtocolKind::MbdPKc => "mbd-p-kc",
            ProtocolKind::MbdSKc => "mbd-s-kc",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            ProtocolKind::MbdP | ProtocolKind::MbdS => Variant::Original,
            ProtocolKind::MbdPKc | ProtocolKind::MbdSKc => Variant::KeyConfirm,
        }
    }

    /// Subgroup stage (mBD+S) rather than pairwise stage (mBD+P).
    pub fn has_subgroup_stage(self) -> bool {
        matches!(self, ProtocolKind::MbdS | ProtocolKind::MbdSKc)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown protocol {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStage {
    Group,
    Subgroup,
}

/// The insider attack as configured in a scenario. `victim` is the 1-based
/// roster number; the insiders are its cyclic neighbours on the attacked
/// cycle (the roster, or the subgroup list).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub victim: usize,
    pub rmask: Digest,
    pub stage: AttackStage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub protocol: ProtocolKind,
    pub n: usize,
    /// 1-based roster numbers, in subgroup cycle order.
    pub subgroup: Option<Vec<usize>>,
    pub attack: Option<AttackSpec>,
    pub group: Preset,
    pub seed: u64,
    pub subgroup_token_context: SubgroupTokenContext,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl Scenario {
    pub fn honest(protocol: ProtocolKind, n: usize, group: Preset, seed: u64) -> Self {
        Scenario {
            protocol,
            n,
            subgroup: None,
            attack: None,
            group,
            seed,
            subgroup_token_context: SubgroupTokenContext::default(),
        }
    }

    pub fn with_subgroup(mut self, members: Vec<usize>) -> Self {
        self.subgroup = Some(members);
        self
    }

    pub fn with_attack(mut self, victim: usize, rmask: Digest, stage: AttackStage) -> Self {
        self.attack = Some(AttackSpec {
            victim,
            rmask,
            stage,
        });
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut issues = Vec::new();
        let mut issue = |field, message: String| issues.push(FieldIssue { field, message });
        if self.n < MIN_PARTIES {
            issue(
                "n",
                format!("need at least {MIN_PARTIES} parties, got {}", self.n),
            );
        }
        match (&self.subgroup, self.protocol.has_subgroup_stage()) {
            (None, true) => issue("subgroup", format!("{} requires a subgroup", self.protocol)),
            (Some(_), false) => issue(
                "subgroup",
                format!("{} has no subgroup stage", self.protocol),
            ),
            (Some(members), true) => {
                for &k in members {
                    if k == 0 || k > self.n {
                        issue("subgroup", format!("member {k} outside 1..={}", self.n));
                    }
                }
                let mut sorted = members.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != members.len() {
                    issue("subgroup", "members repeat".to_string());
                }
                if members.len() < MIN_PARTIES {
                    issue(
                        "subgroup",
                        format!("need at least {MIN_PARTIES} members, got {}", members.len()),
                    );
                }
                if members.len() >= self.n {
                    issue(
                        "subgroup",
                        "must be a proper subset of the roster".to_string(),
                    );
                }
            }
            (None, false) => {}
        }
        if let Some(attack) = &self.attack {
            if attack.victim == 0 || attack.victim > self.n {
                issue(
                    "attack.victim",
                    format!("{} outside 1..={}", attack.victim, self.n),
                );
            }
            if attack.stage == AttackStage::Subgroup {
                match &self.subgroup {
                    Some(members) if self.protocol.has_subgroup_stage() => {
                        if !members.contains(&attack.victim) {
                            issue(
                                "attack.victim",
                                format!("{} is not a subgroup member", attack.victim),
                            );
                        }
                    }
                    _ => issue(
                        "attack.stage",
                        format!("{} has no subgroup stage", self.protocol),
                    ),
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidScenario(issues))
        }
    }

    /// An attack with a zero mask is an honest run, so it is recorded as one.
    pub fn canonical(&self) -> Scenario {
        let mut out = self.clone();
        if out.attack.as_ref().is_some_and(|a| a.rmask.is_zero()) {
            out.attack = None;
        }
        out
    }

    pub fn active_attack(&self) -> Option<&AttackSpec> {
        self.attack.as_ref().filter(|a| !a.rmask.is_zero())
    }

    pub fn expected_classification(&self) -> Classification {
        match (self.active_attack(), self.protocol.variant()) {
            (None, _) => Classification::Agreement,
            (Some(_), Variant::Original) => Classification::VictimDivergence,
            (Some(_), Variant::KeyConfirm) => Classification::AbortDetected,
        }
    }
}

fn seed_hash(label: &[u8], seed: u64, index: u64) -> [u8; 32] {
    let mut h = Sha512::new();
    h.update(label);
    h.update(seed.to_be_bytes());
    h.update(index.to_be_bytes());
    let full: [u8; 64] = h.finalize().into();
    full[..32].try_into().unwrap()
}

/// Per-party RNG seed: `SHA-512("gke-lab/party" || seed || index)[..32]`.
pub fn party_seed(seed: u64, index: usize) -> [u8; 32] {
    seed_hash(b"gke-lab/party", seed, index as u64)
}

/// A nonzero mask derived from the master seed, for `--rmask random`.
pub fn derive_mask(seed: u64) -> Digest {
    (0u64..)
        .map(|i| Digest::from_bytes(seed_hash(b"gke-lab/rmask", seed, i)))
        .find(|d| !d.is_zero())
        .expect("nonzero mask")
}
