//! Deterministic broadcast simulator: scenarios, the round-synchronous bus,
//! transcripts, independent re-verification and outcome classification.

use std::fmt;

use thiserror::Error;

use crate::protocol::ProtocolError;

pub mod bus;
pub mod classify;
pub mod runner;
pub mod scenario;
pub mod transcript;
pub mod verify;

pub use bus::{BroadcastBus, BusError, DeliveredRound};
pub use classify::{check_agreement, Classification, OutcomeReport, StageReport};
pub use runner::{run_scenario, simulate, SimulationRun};
pub use scenario::{
    derive_mask, party_seed, AttackSpec, AttackStage, FieldIssue, ProtocolKind, Scenario,
};
pub use transcript::{fingerprint, RoundLabel, Transcript, SCHEMA};
pub use verify::{verify_transcript, VerifyReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", IssueList(.0))]
    InvalidScenario(Vec<FieldIssue>),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("bus: {0}")]
    Bus(#[from] BusError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("adversary: {0}")]
    Adversary(String),
}

struct IssueList<'a>(&'a [FieldIssue]);

impl fmt::Display for IssueList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}
