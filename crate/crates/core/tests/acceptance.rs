//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;

use common::{open_group, ref_edge_tokens, ref_sid, rng, toy_exponents};
use gke_lab::adversary::{predict_divergence, Role, StageContext};
use gke_lab::group::Preset;
use gke_lab::oracle::Digest;
use gke_lab::protocol::{AbortReason, Phase, SubgroupOptions, Variant};
use gke_lab::sim::transcript::{HexBytes, MessageRecord};
use gke_lab::sim::{
    check_agreement, derive_mask, run_scenario, simulate, verify_transcript, AttackStage,
    Classification, ProtocolKind, RoundLabel, Scenario, SimulationRun, Transcript,
};
use gke_lab::Identity;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sim(s: &Scenario) -> Result<SimulationRun, String> {
    simulate(s).map_err(|e| format!("{s:?}: {e}"))
}

fn xor_all(zs: impl IntoIterator<Item = Digest>) -> Digest {
    zs.into_iter().fold(Digest::ZERO, |acc, z| acc ^ z)
}

fn round_zs(t: &Transcript, label: RoundLabel) -> Option<Vec<Digest>> {
    let round = t.round(label)?;
    Some(
        round
            .messages
            .iter()
            .map(|m| match m {
                MessageRecord::Round2 { z, .. } => Digest::from_slice(&z.0).unwrap(),
                other => panic!("unexpected {other:?}"),
            })
            .collect(),
    )
}

/// A subgroup of `n`, its victim and a mask, all derived from `seed`.
fn subgroup_attack(protocol: ProtocolKind, n: usize, seed: u64) -> Scenario {
    let mut r = rng(seed);
    let m = r.gen_range(3..n);
    let mut members: Vec<usize> = (1..=n).collect();
    for i in (1..members.len()).rev() {
        members.swap(i, r.gen_range(0..=i));
    }
    members.truncate(m);
    let victim = members[r.gen_range(0..m)];
    Scenario::honest(protocol, n, Preset::Toy, seed)
        .with_subgroup(members)
        .with_attack(victim, derive_mask(seed), AttackStage::Subgroup)
}

fn c1_honest_agreement() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    for n in [3, 4, 5, 8] {
        for seed in 0..50 {
            let run = sim(&Scenario::honest(ProtocolKind::MbdP, n, Preset::Toy, seed))?;
            let keys: Vec<Digest> = run
                .parties
                .iter()
                .map(|p| p.group_key().map(|k| k.key).ok_or("party without key"))
                .collect::<Result<_, _>>()?;
            ensure(keys.windows(2).all(|w| w[0] == w[1]), || {
                format!("n={n} seed={seed}: keys differ")
            })?;
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("{runs} runs took {elapsed:?}")
    })?;
    Ok(format!("{runs} runs, identical keys, {elapsed:.2?}"))
}

fn check_chain(xs: &[u64], seed: u64) -> Result<(), String> {
    let params = Preset::Toy.params();
    let mut g = open_group(params, Variant::Original, &toy_exponents(params, xs), seed);
    g.run_honest();
    let big: Vec<BigUint> = xs.iter().map(|&x| BigUint::from(x)).collect();
    let expected = ref_edge_tokens(params, &big, &ref_sid(params, &big));
    for p in &g.parties {
        ensure(p.recovered_tokens() == Some(expected.as_slice()), || {
            format!("{xs:?}: {} recovered a different chain", p.identity())
        })?;
    }
    Ok(())
}

fn c2_chain_equivalence() -> Outcome {
    let mut tuples = 0;
    for a in 1..=10 {
        for b in 1..=10 {
            for c in 1..=10 {
                check_chain(&[a, b, c], tuples)?;
                tuples += 1;
            }
        }
    }
    let exhaustive3 = tuples;
    for a in 1..=10 {
        for b in 1..=10 {
            for c in 1..=10 {
                for d in 1..=10 {
                    check_chain(&[a, b, c, d], tuples)?;
                    tuples += 1;
                }
            }
        }
    }
    let exhaustive4 = tuples - exhaustive3;
    let mut r = rng(2);
    for i in 0..2000 {
        let xs: Vec<u64> = (0..5).map(|_| r.gen_range(1..=10)).collect();
        check_chain(&xs, i)?;
    }
    Ok(format!(
        "n=3 exhaustive ({exhaustive3}), n=4 exhaustive ({exhaustive4}), n=5 sampled (2000); 0 mismatches"
    ))
}

fn c3_telescoping() -> Outcome {
    let mut checked = 0;
    for protocol in ProtocolKind::ALL {
        for n in 4..=8 {
            for seed in 0..10 {
                let mut s = Scenario::honest(protocol, n, Preset::Toy, seed);
                if protocol.has_subgroup_stage() {
                    s = s.with_subgroup((2..=n).rev().collect());
                }
                let t = run_scenario(&s).map_err(|e| e.to_string())?;
                for label in [RoundLabel::GroupRound2, RoundLabel::SubgroupRound1] {
                    if let Some(zs) = round_zs(&t, label) {
                        ensure(xor_all(zs).is_zero(), || {
                            format!("{s:?}: {label:?} does not telescope")
                        })?;
                        checked += 1;
                    }
                }
            }
        }
    }
    for n in [3, 5] {
        let t = run_scenario(&Scenario::honest(
            ProtocolKind::MbdP,
            n,
            Preset::Modp2048,
            1,
        ))
        .map_err(|e| e.to_string())?;
        ensure(
            xor_all(round_zs(&t, RoundLabel::GroupRound2).unwrap()).is_zero(),
            || format!("modp n={n}"),
        )?;
        checked += 1;
    }
    Ok(format!("{checked} group and subgroup rounds XOR to zero"))
}

/// Checks the split outcome of an Original-variant attack run against the
/// predictor. `keys[k]` is the key of cycle position `k`.
fn check_split(
    run: &SimulationRun,
    keys: &[Option<Digest>],
    exponents: Vec<gke_lab::group::Scalar>,
    ctx: &StageContext,
) -> Result<(), String> {
    let (_, cfg) = run.adversary.as_ref().ok_or("no adversary")?;
    let params = run.parties[0].params();
    let report = verify_transcript(&run.transcript).map_err(|e| e.to_string())?;
    ensure(report.ok, || format!("verify: {:?}", report.diagnostics))?;
    let aborts =
        run.transcript.outcomes.iter().any(|o| {
            o.group.abort.is_some() || o.subgroup.as_ref().is_some_and(|s| s.abort.is_some())
        });
    ensure(!aborts, || "a party aborted".to_string())?;
    let prediction = predict_divergence(&exponents, cfg, ctx, params);
    for (k, key) in keys.iter().enumerate() {
        let key = key.ok_or_else(|| format!("position {k} has no key"))?;
        let expected = if k == cfg.victim() {
            prediction.victim_key
        } else {
            prediction.honest_key
        };
        ensure(key == expected, || {
            format!("position {k} key differs from prediction")
        })?;
    }
    ensure(prediction.victim_key != prediction.honest_key, || {
        "victim key equals group key".to_string()
    })?;
    let class = check_agreement(&run.transcript)
        .map_err(|e| e.to_string())?
        .classification;
    ensure(class == Classification::VictimDivergence, || {
        format!("classified {class}")
    })
}

fn c4_group_attack() -> Outcome {
    let mut runs = 0;
    for n in [4, 5, 8] {
        for seed in 0..100 {
            let victim = 1 + (seed as usize * 7 + n) % n;
            let s = Scenario::honest(ProtocolKind::MbdP, n, Preset::Toy, seed).with_attack(
                victim,
                derive_mask(seed),
                AttackStage::Group,
            );
            let run = sim(&s)?;
            let keys: Vec<Option<Digest>> = run
                .parties
                .iter()
                .map(|p| p.group_key().map(|k| k.key))
                .collect();
            let exps = run.parties.iter().map(|p| p.exponent().clone()).collect();
            let sid = run.parties[0].sid().unwrap();
            let ctx = StageContext::group(sid, Variant::Original, run.parties[0].params());
            check_split(&run, &keys, exps, &ctx).map_err(|e| format!("n={n} seed={seed}: {e}"))?;
            runs += 1;
        }
    }
    Ok(format!(
        "{runs}/{runs} runs split exactly as predicted, no aborts"
    ))
}

fn c5_subgroup_attack() -> Outcome {
    let mut runs = 0;
    for seed in 0..100 {
        let n = 4 + (seed as usize % 5);
        let s = subgroup_attack(ProtocolKind::MbdS, n, seed);
        let run = sim(&s)?;
        let spid: Vec<Identity> = s
            .subgroup
            .as_ref()
            .unwrap()
            .iter()
            .map(|&k| Identity::numbered(k))
            .collect();
        let members: Vec<usize> = s.subgroup.as_ref().unwrap().iter().map(|k| k - 1).collect();
        let keys: Vec<Option<Digest>> = members
            .iter()
            .map(|&k| {
                run.subgroup_sessions[k]
                    .as_ref()
                    .and_then(|s| s.subgroup_key())
                    .map(|k| k.key)
            })
            .collect();
        let exps = members
            .iter()
            .map(|&k| run.parties[k].exponent().clone())
            .collect();
        let params = run.parties[0].params();
        let options = SubgroupOptions {
            token_context: s.subgroup_token_context,
        };
        let ctx = StageContext::subgroup(
            run.parties[0].sid().unwrap(),
            &spid,
            options,
            Variant::Original,
            params,
        )
        .ok_or("subgroup context")?;
        check_split(&run, &keys, exps, &ctx).map_err(|e| format!("seed={seed} {s:?}: {e}"))?;
        runs += 1;
    }
    Ok(format!(
        "{runs}/{runs} subgroup runs split exactly as predicted"
    ))
}

fn c6_key_confirmation() -> Outcome {
    let mut detected = 0;
    for seed in 0..100 {
        let n = 4 + (seed as usize % 5);
        let group = Scenario::honest(ProtocolKind::MbdPKc, n, Preset::Toy, seed).with_attack(
            1 + seed as usize % n,
            derive_mask(seed),
            AttackStage::Group,
        );
        let sub = subgroup_attack(ProtocolKind::MbdSKc, n, seed);
        for s in [group, sub] {
            let t = run_scenario(&s).map_err(|e| e.to_string())?;
            let stage =
                |o: &gke_lab::sim::transcript::PartyOutcome| match s.attack.as_ref().unwrap().stage
                {
                    AttackStage::Group => Some(o.group.clone()),
                    AttackStage::Subgroup => o.subgroup.clone(),
                };
            for o in t.outcomes.iter().filter(|o| !o.role.is_insider()) {
                let Some(st) = stage(o) else { continue };
                ensure(
                    st.phase == Phase::Aborted
                        && st.abort == Some(AbortReason::ConfirmationMismatch),
                    || format!("{s:?}: {} ended {:?} {:?}", o.identity, st.phase, st.abort),
                )?;
            }
            ensure(
                t.outcomes
                    .iter()
                    .filter_map(stage)
                    .all(|st| st.fingerprint.is_none()),
                || format!("{s:?}: someone accepted"),
            )?;
            ensure(verify_transcript(&t).map_err(|e| e.to_string())?.ok, || {
                format!("{s:?}: verify")
            })?;
            detected += 1;
        }
    }
    let mut clean = 0;
    for seed in 0..100 {
        let n = 3 + (seed as usize % 6);
        let p = Scenario::honest(ProtocolKind::MbdPKc, n, Preset::Toy, seed);
        let mut sub = subgroup_attack(ProtocolKind::MbdSKc, n.max(4), seed);
        sub.attack = None;
        for s in [p, sub] {
            let t = run_scenario(&s).map_err(|e| e.to_string())?;
            let any_abort = t.outcomes.iter().any(|o| {
                o.group.abort.is_some()
                    || o.subgroup
                        .as_ref()
                        .is_some_and(|st| st.phase != Phase::Accepted)
            });
            ensure(
                !any_abort && t.outcomes.iter().all(|o| o.group.phase == Phase::Accepted),
                || format!("false positive: {s:?}"),
            )?;
            clean += 1;
        }
    }
    Ok(format!(
        "{detected}/{detected} attacks aborted on confirmation mismatch; 0/{clean} false positives"
    ))
}

fn c7_p2p() -> Outcome {
    let mut pairs = 0;
    for seed in 0..20 {
        for protocol in [ProtocolKind::MbdP, ProtocolKind::MbdPKc] {
            let run = sim(&Scenario::honest(protocol, 5, Preset::Toy, seed))?;
            let group_key = run.parties[0].group_key().ok_or("no group key")?.key;
            for i in 0..5 {
                for j in 0..5 {
                    if i == j {
                        continue;
                    }
                    let kij = run.parties[i]
                        .p2p_key(run.parties[j].identity())
                        .map_err(|e| e.to_string())?;
                    let kji = run.parties[j]
                        .p2p_key(run.parties[i].identity())
                        .map_err(|e| e.to_string())?;
                    ensure(kij == kji, || format!("seed={seed}: k_{i}{j} != k_{j}{i}"))?;
                    ensure(kij.key != group_key, || {
                        format!("seed={seed}: k_{i}{j} equals group key")
                    })?;
                    pairs += 1;
                }
            }
            let mut all: Vec<Digest> = run.p2p_keys.iter().flatten().map(|k| k.key).collect();
            all.sort();
            all.dedup();
            ensure(all.len() == 10, || {
                format!("seed={seed}: {} distinct pair keys", all.len())
            })?;
            for (k, o) in run.transcript.outcomes.iter().enumerate() {
                ensure(o.p2p.len() == 4, || {
                    format!("seed={seed}: party {k} recorded {} pairs", o.p2p.len())
                })?;
            }
        }
    }
    Ok(format!(
        "{pairs} ordered pairs symmetric and distinct from the group key"
    ))
}

fn mutation_sweep(t: &Transcript) -> Result<usize, String> {
    let mut work = t.clone();
    let mut rejected = 0;
    for r in 0..t.rounds.len() {
        for m in 0..t.rounds[r].messages.len() {
            let field_count = match &t.rounds[r].messages[m] {
                MessageRecord::Round1 { .. } => 1,
                _ => 2,
            };
            for f in 0..field_count {
                for byte in 0..field(&mut work, r, m, f).0.len() {
                    for delta in 1..=255u8 {
                        field(&mut work, r, m, f).0[byte] ^= delta;
                        let report = verify_transcript(&work).map_err(|e| e.to_string())?;
                        field(&mut work, r, m, f).0[byte] ^= delta;
                        ensure(!report.ok, || {
                            format!("accepted mutation round {r} message {m} field {f} byte {byte} ^ {delta:#04x}")
                        })?;
                        rejected += 1;
                    }
                }
            }
        }
    }
    ensure(work == *t, || {
        "sweep did not restore the transcript".to_string()
    })?;
    Ok(rejected)
}

fn field(t: &mut Transcript, r: usize, m: usize, f: usize) -> &mut HexBytes {
    match (&mut t.rounds[r].messages[m], f) {
        (MessageRecord::Round1 { y, .. }, _) => y,
        (MessageRecord::Round2 { z, .. }, 0) => z,
        (MessageRecord::Confirm { m, .. }, 0) => m,
        (MessageRecord::Round2 { signature, .. } | MessageRecord::Confirm { signature, .. }, _) => {
            signature
        }
    }
}

fn c8_determinism() -> Outcome {
    let mut scenarios = Vec::new();
    for protocol in ProtocolKind::ALL {
        for seed in [0, 7, u64::MAX] {
            let honest = if protocol.has_subgroup_stage() {
                Scenario::honest(protocol, 6, Preset::Toy, seed).with_subgroup(vec![6, 2, 3, 5])
            } else {
                Scenario::honest(protocol, 6, Preset::Toy, seed)
            };
            scenarios.push(honest);
            scenarios.push(if protocol.has_subgroup_stage() {
                subgroup_attack(protocol, 6, seed)
            } else {
                Scenario::honest(protocol, 6, Preset::Toy, seed).with_attack(
                    3,
                    derive_mask(seed),
                    AttackStage::Group,
                )
            });
        }
    }
    scenarios.push(Scenario::honest(
        ProtocolKind::MbdPKc,
        4,
        Preset::Modp2048,
        3,
    ));
    for s in &scenarios {
        let a = run_scenario(s).map_err(|e| e.to_string())?;
        let b = run_scenario(s).map_err(|e| e.to_string())?;
        ensure(a.to_text() == b.to_text(), || {
            format!("{s:?}: reruns differ")
        })?;
        let report = verify_transcript(&a).map_err(|e| e.to_string())?;
        ensure(report.ok, || format!("{s:?}: {:?}", report.diagnostics))?;
        let reparsed = Transcript::from_text(&a.to_text()).map_err(|e| e.to_string())?;
        ensure(reparsed.to_text() == a.to_text(), || {
            format!("{s:?}: text does not round-trip")
        })?;
    }
    let honest = run_scenario(
        &Scenario::honest(ProtocolKind::MbdSKc, 5, Preset::Toy, 8).with_subgroup(vec![1, 3, 4]),
    )
    .map_err(|e| e.to_string())?;
    let attack = run_scenario(
        &Scenario::honest(ProtocolKind::MbdS, 5, Preset::Toy, 9)
            .with_subgroup(vec![5, 2, 3])
            .with_attack(2, derive_mask(9), AttackStage::Subgroup),
    )
    .map_err(|e| e.to_string())?;
    let swept = mutation_sweep(&honest)? + mutation_sweep(&attack)?;
    Ok(format!(
        "{} scenarios byte-identical on rerun and verified; {swept}/{swept} single-byte mutations rejected",
        scenarios.len()
    ))
}

fn c9_neutrality() -> Outcome {
    let mut compared = 0;
    for protocol in ProtocolKind::ALL {
        for seed in 0..10 {
            let n = 4 + seed as usize % 4;
            let honest = if protocol.has_subgroup_stage() {
                Scenario::honest(protocol, n, Preset::Toy, seed).with_subgroup(vec![1, 2, n])
            } else {
                Scenario::honest(protocol, n, Preset::Toy, seed)
            };
            let stages: &[AttackStage] = if protocol.has_subgroup_stage() {
                &[AttackStage::Group, AttackStage::Subgroup]
            } else {
                &[AttackStage::Group]
            };
            let expected = run_scenario(&honest).map_err(|e| e.to_string())?.to_text();
            for &stage in stages {
                let neutral = honest.clone().with_attack(2, Digest::ZERO, stage);
                let run = sim(&neutral)?;
                ensure(run.roles.contains(&Role::LeftInsider), || {
                    "no insider ran".to_string()
                })?;
                ensure(run.transcript.to_text() == expected, || {
                    format!("{neutral:?}: transcript differs")
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!(
        "{compared} zero-mask attack runs byte-identical to their honest runs"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("honest agreement", c1_honest_agreement),
        ("chain-recovery oracle equivalence", c2_chain_equivalence),
        ("telescoping", c3_telescoping),
        ("group-stage attack reproduction", c4_group_attack),
        ("subgroup-stage attack reproduction", c5_subgroup_attack),
        ("key-confirmation countermeasure", c6_key_confirmation),
        ("p2p symmetry and separation", c7_p2p),
        ("determinism and verification", c8_determinism),
        ("zero-mask neutrality", c9_neutrality),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
