//! Outcome classification, computed from transcript contents only.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::identity::Identity;
use crate::oracle::Digest;
use crate::protocol::{AbortReason, Phase, StageKind};

use super::scenario::AttackStage;
use super::transcript::{StageOutcome, Transcript};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Every participant accepted the same key.
    Agreement,
    /// No aborts; the victim holds one key, everyone else another.
    VictimDivergence,
    /// Nobody accepted; every non-insider aborted on the confirmation check.
    AbortDetected,
    Unexpected,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::Agreement => "agreement",
            Classification::VictimDivergence => "victim-divergence",
            Classification::AbortDetected => "abort-detected",
            Classification::Unexpected => "unexpected",
        }
    }

    fn severity(self) -> u8 {
        match self {
            Classification::Agreement => 0,
            Classification::VictimDivergence => 1,
            Classification::AbortDetected => 2,
            Classification::Unexpected => 3,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageReport {
    pub stage: StageKind,
    pub classification: Classification,
    /// Participants grouped by key fingerprint, largest class first.
    pub partition: Vec<Vec<Identity>>,
    pub aborts: Vec<(Identity, AbortReason)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeReport {
    pub classification: Classification,
    pub stages: Vec<StageReport>,
}

impl fmt::Display for OutcomeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "classification: {}", self.classification)?;
        for stage in &self.stages {
            let stage_name = match stage.stage {
                StageKind::Group => "group",
                StageKind::Subgroup => "subgroup",
            };
            writeln!(f, "  {stage_name}: {}", stage.classification)?;
            for (i, class) in stage.partition.iter().enumerate() {
                let names: Vec<&str> = class.iter().map(Identity::as_str).collect();
                writeln!(f, "    key class {}: {}", i + 1, names.join(", "))?;
            }
            for (id, reason) in &stage.aborts {
                writeln!(f, "    {id} aborted: {reason}")?;
            }
        }
        Ok(())
    }
}

fn classify_stage(
    stage: StageKind,
    entries: &[(Identity, &StageOutcome, bool)],
    victim: Option<&Identity>,
) -> StageReport {
    let mut partition: Vec<(Digest, Vec<Identity>)> = Vec::new();
    let mut aborts = Vec::new();
    for (id, outcome, _) in entries {
        if let Some(fp) = outcome.fingerprint {
            match partition.iter_mut().find(|(d, _)| *d == fp) {
                Some((_, class)) => class.push(id.clone()),
                None => partition.push((fp, vec![id.clone()])),
            }
        }
        if let Some(reason) = &outcome.abort {
            aborts.push((id.clone(), reason.clone()));
        }
    }
    partition.sort_by_key(|(_, class)| std::cmp::Reverse(class.len()));
    let partition: Vec<Vec<Identity>> = partition.into_iter().map(|(_, c)| c).collect();
    let all_accepted = entries.iter().all(|(_, o, _)| o.fingerprint.is_some());
    let none_accepted = entries.iter().all(|(_, o, _)| o.fingerprint.is_none());

    let classification = if all_accepted && aborts.is_empty() {
        match (partition.as_slice(), victim) {
            ([_], _) => Classification::Agreement,
            ([rest, lone], Some(v)) if lone.as_slice() == [v.clone()] && !rest.contains(v) => {
                Classification::VictimDivergence
            }
            _ => Classification::Unexpected,
        }
    } else if none_accepted
        && entries
            .iter()
            .filter(|(_, _, insider)| !insider)
            .all(|(_, o, _)| {
                o.phase == Phase::Aborted && o.abort == Some(AbortReason::ConfirmationMismatch)
            })
    {
        Classification::AbortDetected
    } else {
        Classification::Unexpected
    };
    StageReport {
        stage,
        classification,
        partition,
        aborts,
    }
}

/// Classifies a transcript as agreement, victim divergence, detected abort
/// or unexpected.
pub fn check_agreement(t: &Transcript) -> Result<OutcomeReport, SimError> {
    let s = &t.scenario;
    s.validate()
        .map_err(|e| SimError::MalformedTranscript(format!("scenario: {e}")))?;
    if t.outcomes.len() != s.n {
        return Err(SimError::MalformedTranscript(format!(
            "{} outcomes for {} parties",
            t.outcomes.len(),
            s.n
        )));
    }
    for (k, o) in t.outcomes.iter().enumerate() {
        if o.identity != Identity::numbered(k + 1) {
            return Err(SimError::MalformedTranscript(format!(
                "outcome {} belongs to {}",
                k + 1,
                o.identity
            )));
        }
    }
    let attack = s.active_attack();
    let victim = attack.map(|a| Identity::numbered(a.victim));
    let insider = |k: usize| t.outcomes[k].role.is_insider();

    let mut stages = Vec::new();
    let group_entries: Vec<(Identity, &StageOutcome, bool)> = t
        .outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| (o.identity.clone(), &o.group, insider(k)))
        .collect();
    let group_victim = victim
        .as_ref()
        .filter(|_| attack.is_some_and(|a| a.stage == AttackStage::Group));
    stages.push(classify_stage(
        StageKind::Group,
        &group_entries,
        group_victim,
    ));

    if s.protocol.has_subgroup_stage() {
        let sub_entries: Vec<(Identity, &StageOutcome, bool)> = t
            .outcomes
            .iter()
            .enumerate()
            .filter_map(|(k, o)| {
                o.subgroup
                    .as_ref()
                    .map(|sub| (o.identity.clone(), sub, insider(k)))
            })
            .collect();
        if !sub_entries.is_empty() {
            let sub_victim = victim
                .as_ref()
                .filter(|_| attack.is_some_and(|a| a.stage == AttackStage::Subgroup));
            stages.push(classify_stage(
                StageKind::Subgroup,
                &sub_entries,
                sub_victim,
            ));
        } else if !stages[0].partition.is_empty() {
            // Someone accepted a group key, so the subgroup stage must have run.
            return Err(SimError::MalformedTranscript(
                "subgroup stage missing".to_string(),
            ));
        }
    }

    let classification = stages
        .iter()
        .map(|st| st.classification)
        .max_by_key(|c| c.severity())
        .expect("at least the group stage");
    Ok(OutcomeReport {
        classification,
        stages,
    })
}
