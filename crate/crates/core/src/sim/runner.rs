//! Scenario execution. Parties step round by round: every active party
//! emits its message for the round, then the bus delivers the full ordered
//! list to everyone.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::adversary::{
    malicious_round2, malicious_subgroup_round1, AdversaryConfig, AdversaryError, Role,
};
use crate::auth::{keypair, Registry, SigningKey};
use crate::group::GroupParams;
use crate::identity::Identity;
use crate::protocol::{
    start_session, KcMsg, P2PKey, ParticipantState, Phase, ProtocolError, Roster, Round1Msg,
    Round2Msg, SubgroupOptions, SubgroupSession, WireMessage,
};

use super::bus::BroadcastBus;
use super::scenario::{party_seed, AttackStage, Scenario};
use super::transcript::{
    fingerprint, rounds_from_log, GroupRecord, HexBytes, Metadata, PartyOutcome, PeerFingerprint,
    RegistryEntry, RoundLabel, StageOutcome, Transcript, SCHEMA,
};
use super::SimError;

/// Everything a run produced. Only `transcript` is meant to leave the
/// process; the party states carry secrets and raw keys for oracle checks.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub transcript: Transcript,
    pub registry: Registry,
    pub roles: Vec<Role>,
    pub parties: Vec<ParticipantState>,
    /// Indexed by roster position; `None` for non-members or skipped parties.
    pub subgroup_sessions: Vec<Option<SubgroupSession>>,
    pub p2p_keys: Vec<Vec<P2PKey>>,
    /// Attack configuration on the attacked cycle, if any.
    pub adversary: Option<(AttackStage, AdversaryConfig)>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<Transcript, SimError> {
    simulate(scenario).map(|run| run.transcript)
}

fn exchange(
    bus: &mut BroadcastBus,
    label: RoundLabel,
    outgoing: Vec<WireMessage>,
) -> Result<Vec<WireMessage>, SimError> {
    bus.open_round(
        label,
        outgoing.iter().map(|m| m.identity().clone()).collect(),
    )?;
    for msg in outgoing {
        bus.broadcast(msg)?;
    }
    Ok(bus.deliver()?)
}

fn round1s(msgs: Vec<WireMessage>) -> Vec<Round1Msg> {
    msgs.into_iter()
        .filter_map(|m| match m {
            WireMessage::Round1(m) => Some(m),
            _ => None,
        })
        .collect()
}

fn round2s(msgs: Vec<WireMessage>) -> Vec<Round2Msg> {
    msgs.into_iter()
        .filter_map(|m| match m {
            WireMessage::Round2(m) => Some(m),
            _ => None,
        })
        .collect()
}

fn kcs(msgs: Vec<WireMessage>) -> Vec<KcMsg> {
    msgs.into_iter()
        .filter_map(|m| match m {
            WireMessage::Kc(m) => Some(m),
            _ => None,
        })
        .collect()
}

/// Protocol aborts are outcomes; any other error means the harness drove a
/// party out of order.
fn tolerate_abort<T>(res: Result<T, ProtocolError>) -> Result<Option<T>, SimError> {
    match res {
        Ok(v) => Ok(Some(v)),
        Err(ProtocolError::Aborted(_)) => Ok(None),
        Err(ProtocolError::MissingRound2(_) | ProtocolError::MissingKc(_)) => Ok(None),
        Err(e) => Err(SimError::Protocol(e)),
    }
}

fn from_adversary<T>(res: Result<T, AdversaryError>) -> Result<T, ProtocolError> {
    res.map_err(|e| match e {
        AdversaryError::Protocol(p) => p,
        other => panic!("adversary misconfigured by the runner: {other}"),
    })
}

struct Attack {
    stage: AttackStage,
    config: AdversaryConfig,
}

fn build_attack(
    scenario: &Scenario,
    spid: Option<&[Identity]>,
) -> Result<Option<Attack>, SimError> {
    let Some(spec) = &scenario.attack else {
        return Ok(None);
    };
    let (victim, len) = match spec.stage {
        AttackStage::Group => (spec.victim - 1, scenario.n),
        AttackStage::Subgroup => {
            let spid = spid.expect("validated: subgroup present");
            let victim = Identity::numbered(spec.victim);
            (
                spid.iter()
                    .position(|id| *id == victim)
                    .expect("validated: victim in subgroup"),
                spid.len(),
            )
        }
    };
    let config = AdversaryConfig::new(victim, len, spec.rmask)
        .map_err(|e| SimError::Adversary(e.to_string()))?;
    Ok(Some(Attack {
        stage: spec.stage,
        config,
    }))
}

pub fn simulate(scenario: &Scenario) -> Result<SimulationRun, SimError> {
    scenario.validate()?;
    let params: &'static GroupParams = scenario.group.params();
    let n = scenario.n;
    let roster = Roster::numbered(n)?;
    let variant = scenario.protocol.variant();
    let spid: Option<Vec<Identity>> = scenario
        .subgroup
        .as_ref()
        .map(|v| v.iter().map(|&k| Identity::numbered(k)).collect());
    let attack = build_attack(scenario, spid.as_deref())?;
    let sub_position = |k: usize| -> Option<usize> {
        let id = roster.get(k);
        spid.as_ref()?.iter().position(|m| m == id)
    };
    let roles: Vec<Role> = (0..n)
        .map(|k| match &attack {
            Some(a) if a.stage == AttackStage::Group => a.config.role_of(k),
            Some(a) => sub_position(k).map_or(Role::Honest, |p| a.config.role_of(p)),
            None => Role::Honest,
        })
        .collect();

    let mut rngs: Vec<ChaCha20Rng> = (0..n)
        .map(|k| ChaCha20Rng::from_seed(party_seed(scenario.seed, k)))
        .collect();
    let signing_keys: Vec<SigningKey> = rngs.iter_mut().map(|rng| keypair(params, rng).0).collect();
    let registry = Registry::new(
        roster
            .members()
            .iter()
            .cloned()
            .zip(signing_keys.iter().map(|sk| sk.verify_key().clone())),
    )
    .expect("roster identities are unique");

    let mut bus = BroadcastBus::new();

    // Group stage, round 1.
    let mut parties = Vec::with_capacity(n);
    let mut outgoing = Vec::with_capacity(n);
    for (k, sk) in signing_keys.into_iter().enumerate() {
        let (state, msg) =
            start_session(roster.get(k).clone(), &roster, sk, variant, &mut rngs[k])?;
        parties.push(state);
        outgoing.push(WireMessage::Round1(msg));
    }
    let r1 = round1s(exchange(&mut bus, RoundLabel::GroupRound1, outgoing)?);

    // Group stage, round 2.
    let group_attack = attack.as_ref().filter(|a| a.stage == AttackStage::Group);
    let mut outgoing = Vec::new();
    for (k, state) in parties.iter_mut().enumerate() {
        let res = match group_attack {
            Some(a) if roles[k].is_insider() => {
                from_adversary(malicious_round2(state, &a.config, &r1, &mut rngs[k]))
            }
            _ => state.on_round1_complete(&r1, &mut rngs[k]),
        };
        if let Some(msg) = tolerate_abort(res)? {
            outgoing.push(WireMessage::Round2(msg));
        }
    }
    let r2 = round2s(exchange(&mut bus, RoundLabel::GroupRound2, outgoing)?);
    for state in parties
        .iter_mut()
        .filter(|s| s.phase() == Phase::SentRound2)
    {
        tolerate_abort(state.compute_group_key(&r2, &registry))?;
    }

    // Group stage, confirmation round.
    let mut outgoing = Vec::new();
    for (k, state) in parties.iter_mut().enumerate() {
        if state.variant() == crate::protocol::Variant::KeyConfirm
            && state.phase() == Phase::KeyComputed
        {
            outgoing.push(WireMessage::Kc(state.kc_message(&mut rngs[k])?));
        }
    }
    if !outgoing.is_empty() {
        let kc = kcs(exchange(&mut bus, RoundLabel::GroupKc, outgoing)?);
        for state in parties.iter_mut().filter(|s| s.phase() == Phase::SentKC) {
            tolerate_abort(state.finalize_kc(&kc, &registry))?;
        }
    }

    // Pairwise stage.
    let mut p2p_keys = vec![Vec::new(); n];
    if !scenario.protocol.has_subgroup_stage() {
        for (k, state) in parties.iter().enumerate() {
            if state.group_key().is_none() {
                continue;
            }
            for peer in roster.members().iter().filter(|p| *p != state.identity()) {
                p2p_keys[k].push(state.p2p_key(peer)?);
            }
        }
    }

    // Subgroup stage.
    let mut subgroup_sessions: Vec<Option<SubgroupSession>> = vec![None; n];
    if let Some(spid) = &spid {
        let options = SubgroupOptions {
            token_context: scenario.subgroup_token_context,
        };
        let sub_attack = attack.as_ref().filter(|a| a.stage == AttackStage::Subgroup);
        // Subgroup rounds run in `spid` order, which is the subgroup cycle.
        let member_indices: Vec<usize> = spid
            .iter()
            .map(|id| roster.position(id).expect("validated: member in roster"))
            .collect();
        let mut outgoing = Vec::new();
        for &k in &member_indices {
            let state = &parties[k];
            if state.group_key().is_none() {
                continue;
            }
            let res = match sub_attack {
                Some(a) if roles[k].is_insider() => from_adversary(malicious_subgroup_round1(
                    state,
                    spid,
                    options,
                    &a.config,
                    &mut rngs[k],
                )),
                _ => state.subgroup_round1(spid, options, &mut rngs[k]),
            };
            let (session, msg) = res?;
            subgroup_sessions[k] = Some(session);
            outgoing.push(WireMessage::Round2(msg));
        }
        if !outgoing.is_empty() {
            let sr1 = round2s(exchange(&mut bus, RoundLabel::SubgroupRound1, outgoing)?);
            for session in subgroup_sessions.iter_mut().flatten() {
                tolerate_abort(session.compute_subgroup_key(&sr1, &registry))?;
            }
            let mut outgoing = Vec::new();
            for &k in &member_indices {
                if let Some(s) = subgroup_sessions[k].as_mut() {
                    if s.variant() == crate::protocol::Variant::KeyConfirm
                        && s.phase() == Phase::KeyComputed
                    {
                        outgoing.push(WireMessage::Kc(s.kc_message(&mut rngs[k])?));
                    }
                }
            }
            if !outgoing.is_empty() {
                let kc = kcs(exchange(&mut bus, RoundLabel::SubgroupKc, outgoing)?);
                for session in subgroup_sessions.iter_mut().flatten() {
                    if session.phase() == Phase::SentKC {
                        tolerate_abort(session.finalize_kc(&kc, &registry))?;
                    }
                }
            }
        }
    }

    let outcomes = parties
        .iter()
        .enumerate()
        .map(|(k, state)| PartyOutcome {
            identity: state.identity().clone(),
            // A neutral attack is recorded as the honest run it is.
            role: if scenario.active_attack().is_some() {
                roles[k]
            } else {
                Role::Honest
            },
            group: StageOutcome {
                phase: state.phase(),
                abort: state.abort_reason().cloned(),
                fingerprint: state.group_key().map(|g| fingerprint(&g.key)),
            },
            subgroup: subgroup_sessions[k].as_ref().map(|s| StageOutcome {
                phase: s.phase(),
                abort: s.abort_reason().cloned(),
                fingerprint: s.subgroup_key().map(|g| fingerprint(&g.key)),
            }),
            p2p: p2p_keys[k]
                .iter()
                .map(|key| PeerFingerprint {
                    peer: if &key.pair.0 == state.identity() {
                        key.pair.1.clone()
                    } else {
                        key.pair.0.clone()
                    },
                    fingerprint: fingerprint(&key.key),
                })
                .collect(),
        })
        .collect();

    let transcript = Transcript {
        schema: SCHEMA.to_string(),
        scenario: scenario.canonical(),
        group: GroupRecord::of(params),
        registry: roster
            .members()
            .iter()
            .map(|id| RegistryEntry {
                identity: id.clone(),
                vk: HexBytes(registry.get(id).expect("registered").to_bytes(params)),
            })
            .collect(),
        rounds: rounds_from_log(bus.log(), params),
        outcomes,
        metadata: Metadata::default(),
    };

    Ok(SimulationRun {
        transcript,
        registry,
        roles,
        parties,
        subgroup_sessions,
        p2p_keys,
        adversary: attack.map(|a| (a.stage, a.config)),
    })
}
