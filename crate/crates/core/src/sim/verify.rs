//! Independent transcript re-verification.
//!
//! Rebuilds `sid`/`ssid` from the recorded round-1 values, re-verifies every
//! recorded signature against the registry snapshot, re-checks the XOR sum of
//! every `z` round, and checks recorded outcomes against the confirmation
//! values. Uses only the transcript and the named group preset.

use crate::auth::{verify, Signature, VerifyKey};
use crate::group::{validate_element, GroupParams};
use crate::identity::Identity;
use crate::oracle::Digest;
use crate::protocol::{AbortReason, Phase, Roster, SessionId};

use super::transcript::{
    GroupRecord, MessageRecord, RoundLabel, RoundRecord, StageOutcome, Transcript,
};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub ok: bool,
    pub diagnostics: Vec<String>,
}

struct Checker {
    params: &'static GroupParams,
    keys: Vec<(Identity, VerifyKey)>,
    diagnostics: Vec<String>,
}

impl Checker {
    fn fail(&mut self, msg: String) {
        self.diagnostics.push(msg);
    }

    fn key_of(&self, id: &Identity) -> Option<&VerifyKey> {
        self.keys.iter().find(|(k, _)| k == id).map(|(_, vk)| vk)
    }

    fn check_senders(&mut self, round: &RoundRecord, expected: &[Identity], exact: bool) -> bool {
        let senders: Vec<&Identity> = round.messages.iter().map(MessageRecord::sender).collect();
        let ok = if exact {
            senders.iter().copied().eq(expected.iter())
        } else {
            // Some parties may have dropped out; the rest keep cycle order.
            let mut it = expected.iter();
            senders.iter().all(|s| it.any(|e| e == *s))
        };
        if !ok {
            let names: Vec<&str> = senders.iter().map(|s| s.as_str()).collect();
            self.fail(format!(
                "{:?}: unexpected senders [{}]",
                round.label,
                names.join(", ")
            ));
        }
        ok
    }

    /// Checks a round of `(sender, value, signature)` messages signed over
    /// `context`; returns the values if all signatures verify.
    fn check_signed_round(&mut self, round: &RoundRecord, context: &[u8]) -> Option<Vec<Digest>> {
        let mut values = Vec::new();
        let mut ok = true;
        for (idx, msg) in round.messages.iter().enumerate() {
            let (sender, value, sig) = match msg {
                MessageRecord::Round2 {
                    sender,
                    z,
                    signature,
                } => (sender, z, signature),
                MessageRecord::Confirm {
                    sender,
                    m,
                    signature,
                } => (sender, m, signature),
                MessageRecord::Round1 { .. } => {
                    self.fail(format!(
                        "{:?} message {idx}: wrong message kind",
                        round.label
                    ));
                    ok = false;
                    continue;
                }
            };
            let Ok(value) = Digest::from_slice(&value.0) else {
                self.fail(format!(
                    "{:?} message {idx} from {sender}: malformed digest",
                    round.label
                ));
                ok = false;
                continue;
            };
            let Some(signature) = Signature::from_bytes(&sig.0, self.params) else {
                self.fail(format!(
                    "{:?} message {idx} from {sender}: malformed signature",
                    round.label
                ));
                ok = false;
                continue;
            };
            let Some(vk) = self.key_of(sender) else {
                self.fail(format!(
                    "{:?} message {idx}: sender {sender} not registered",
                    round.label
                ));
                ok = false;
                continue;
            };
            let mut signed = Vec::new();
            crate::oracle::encode_fields(
                &mut signed,
                &[sender.as_bytes(), value.as_bytes(), context],
            );
            if !verify(vk, &signed, &signature, self.params) {
                self.fail(format!(
                    "{:?} message {idx} from {sender}: signature does not verify",
                    round.label
                ));
                ok = false;
            }
            values.push(value);
        }
        ok.then_some(values)
    }

    fn check_xor(&mut self, label: RoundLabel, zs: &[Digest]) {
        if !zs.iter().fold(Digest::ZERO, |acc, z| acc ^ *z).is_zero() {
            self.fail(format!("{label:?}: XOR of z values is nonzero"));
        }
    }

    /// A confirmation round with all members present either agrees, and
    /// nobody may report a mismatch, or disagrees, and nobody may accept.
    fn check_confirmation_outcomes<'o>(
        &mut self,
        label: RoundLabel,
        values: &[Digest],
        complete: bool,
        outcomes: impl Iterator<Item = (&'o Identity, &'o StageOutcome)>,
    ) {
        let agree = values.windows(2).all(|w| w[0] == w[1]);
        for (id, o) in outcomes {
            if complete && agree && o.abort == Some(AbortReason::ConfirmationMismatch) {
                self.fail(format!(
                    "{label:?}: {id} reports a mismatch but all confirmations agree"
                ));
            }
            if !agree && o.phase == Phase::Accepted {
                self.fail(format!(
                    "{label:?}: {id} accepted despite differing confirmations"
                ));
            }
        }
    }
}

fn expected_labels(t: &Transcript) -> Vec<RoundLabel> {
    let kc = t.scenario.protocol.variant() == crate::protocol::Variant::KeyConfirm;
    let mut labels = vec![RoundLabel::GroupRound1, RoundLabel::GroupRound2];
    if kc {
        labels.push(RoundLabel::GroupKc);
    }
    if t.scenario.protocol.has_subgroup_stage() {
        labels.push(RoundLabel::SubgroupRound1);
        if kc {
            labels.push(RoundLabel::SubgroupKc);
        }
    }
    labels
}

/// Re-verifies a transcript. `Err` only for documents that cannot be
/// interpreted at all; every content failure is a diagnostic.
pub fn verify_transcript(t: &Transcript) -> Result<VerifyReport, SimError> {
    let scenario = &t.scenario;
    scenario
        .validate()
        .map_err(|e| SimError::MalformedTranscript(format!("scenario: {e}")))?;
    let params = scenario.group.params();
    let roster = Roster::numbered(scenario.n)?;
    let mut c = Checker {
        params,
        keys: Vec::new(),
        diagnostics: Vec::new(),
    };

    if t.group != GroupRecord::of(params) {
        c.fail(format!(
            "group parameters differ from preset {}",
            params.name()
        ));
    }

    // Registry snapshot.
    let reg_ids: Vec<&Identity> = t.registry.iter().map(|e| &e.identity).collect();
    if !reg_ids.iter().copied().eq(roster.members().iter()) {
        c.fail("registry does not list exactly the roster".to_string());
    }
    for entry in &t.registry {
        match VerifyKey::from_bytes(&entry.vk.0, params) {
            Some(vk) => c.keys.push((entry.identity.clone(), vk)),
            None => c.fail(format!(
                "registry key of {} is not a group element",
                entry.identity
            )),
        }
    }

    // Round order.
    let expected = expected_labels(t);
    let labels: Vec<RoundLabel> = t.rounds.iter().map(|r| r.label).collect();
    if labels.len() > expected.len() || labels[..] != expected[..labels.len()] || labels.len() < 2 {
        c.fail(format!("rounds {labels:?} do not follow {expected:?}"));
        return Ok(VerifyReport {
            ok: false,
            diagnostics: c.diagnostics,
        });
    }

    // Round 1 and sid.
    let r1 = &t.rounds[0];
    let mut sid_ok = c.check_senders(r1, roster.members(), true);
    let mut entries = Vec::new();
    for msg in &r1.messages {
        match msg {
            MessageRecord::Round1 { sender, y } => match validate_element(&y.0, params) {
                Ok(y) => entries.push((sender.clone(), y)),
                Err(e) => {
                    c.fail(format!("GroupRound1 message from {sender}: {e}"));
                    sid_ok = false;
                }
            },
            _ => {
                c.fail("GroupRound1: wrong message kind".to_string());
                sid_ok = false;
            }
        }
    }
    if !sid_ok {
        return Ok(VerifyReport {
            ok: false,
            diagnostics: c.diagnostics,
        });
    }
    let sid = SessionId::new(entries);
    let sid_bytes = sid.encode(params);

    // Group round 2.
    let r2 = &t.rounds[1];
    let complete = c.check_senders(r2, roster.members(), true);
    if let Some(zs) = c.check_signed_round(r2, &sid_bytes) {
        if complete {
            c.check_xor(r2.label, &zs);
        }
    }

    let spid: Vec<Identity> = scenario
        .subgroup
        .iter()
        .flatten()
        .map(|&k| Identity::numbered(k))
        .collect();
    let ssid_bytes = sid.restrict(&spid).map(|s| s.encode(params));

    for round in &t.rounds[2..] {
        match round.label {
            RoundLabel::GroupKc => {
                let complete = c.check_senders(round, roster.members(), false)
                    && round.messages.len() == roster.len();
                if let Some(ms) = c.check_signed_round(round, &sid_bytes) {
                    let outcomes = t.outcomes.iter().map(|o| (&o.identity, &o.group));
                    c.check_confirmation_outcomes(round.label, &ms, complete, outcomes);
                }
            }
            RoundLabel::SubgroupRound1 => {
                let ctx = ssid_bytes.clone().expect("validated subgroup");
                let complete = c.check_senders(round, &spid, true);
                if let Some(zs) = c.check_signed_round(round, &ctx) {
                    if complete {
                        c.check_xor(round.label, &zs);
                    }
                }
            }
            RoundLabel::SubgroupKc => {
                let ctx = ssid_bytes.clone().expect("validated subgroup");
                let complete =
                    c.check_senders(round, &spid, false) && round.messages.len() == spid.len();
                if let Some(ms) = c.check_signed_round(round, &ctx) {
                    let outcomes = t
                        .outcomes
                        .iter()
                        .filter_map(|o| o.subgroup.as_ref().map(|s| (&o.identity, s)));
                    c.check_confirmation_outcomes(round.label, &ms, complete, outcomes);
                }
            }
            RoundLabel::GroupRound1 | RoundLabel::GroupRound2 => unreachable!("order checked"),
        }
    }

    Ok(VerifyReport {
        ok: c.diagnostics.is_empty(),
        diagnostics: c.diagnostics,
    })
}
