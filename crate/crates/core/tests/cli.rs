use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gke_lab::sim::Transcript;

fn gke(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gke-lab"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn run_to(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--group",
        "toy",
        "--seed",
        "42",
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    gke(&args)
}

#[test]
fn honest_run_verifies_and_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("honest.json");
    let out = run_to(&path, &["--protocol", "mbd-p", "--n", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("classification: agreement"));
    let p = path.to_str().unwrap();
    assert_eq!(code(&gke(&["verify", p])), 0);
    let classify = gke(&["classify", p]);
    assert_eq!(code(&classify), 0);
    assert!(String::from_utf8_lossy(&classify.stdout).starts_with("classification: agreement"));
}

#[test]
fn attack_runs_report_their_expected_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 3] = [
        (
            &[
                "--protocol",
                "mbd-p",
                "--n",
                "5",
                "--attack",
                "--victim",
                "2",
                "--rmask",
                "random",
            ],
            "victim-divergence",
        ),
        (
            &[
                "--protocol",
                "mbd-s-kc",
                "--n",
                "6",
                "--subgroup",
                "1,2,4,6",
                "--attack",
                "--victim",
                "4",
                "--rmask",
                "random",
            ],
            "abort-detected",
        ),
        (
            &[
                "--protocol",
                "mbd-s",
                "--n",
                "5",
                "--subgroup",
                "1,3,5",
                "--attack",
                "--victim",
                "3",
                "--rmask",
                "random",
                "--attack-stage",
                "group",
            ],
            "victim-divergence",
        ),
    ];
    for (args, expected) in cases {
        let path = dir.path().join("t.json");
        let out = run_to(&path, args);
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(
            String::from_utf8_lossy(&out.stdout).contains(expected),
            "{args:?}"
        );
        assert_eq!(code(&gke(&["verify", path.to_str().unwrap()])), 0);
    }
}

#[test]
fn explicit_mask_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let mask = "0f".repeat(32);
    let out = run_to(
        &path,
        &[
            "--protocol",
            "mbd-p",
            "--n",
            "4",
            "--attack",
            "--victim",
            "1",
            "--rmask",
            &mask,
        ],
    );
    assert_eq!(code(&out), 0);
    let t = Transcript::from_text(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(t.scenario.attack.unwrap().rmask.to_hex(), mask);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    for args in [
        &["--protocol", "mbd-p", "--n", "2"][..],
        &["--protocol", "mbd-x", "--n", "4"],
        &["--protocol", "mbd-s", "--n", "4"],
        &[
            "--protocol",
            "mbd-p",
            "--n",
            "4",
            "--attack",
            "--victim",
            "1",
            "--rmask",
            "xyz",
        ],
        &["--protocol", "mbd-p", "--n", "4", "--victim", "1"],
    ] {
        assert_eq!(code(&run_to(&path, args)), 2, "{args:?}");
    }
    assert!(!path.exists());
    assert_eq!(
        code(&gke(&[
            "verify",
            dir.path().join("missing").to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn tampered_transcript_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    assert_eq!(
        code(&run_to(&path, &["--protocol", "mbd-p-kc", "--n", "4"])),
        0
    );
    let mut t = Transcript::from_text(&fs::read_to_string(&path).unwrap()).unwrap();
    if let gke_lab::sim::transcript::MessageRecord::Confirm { m, .. } = &mut t.rounds[2].messages[0]
    {
        m.0[0] ^= 1;
    }
    fs::write(&path, t.to_text()).unwrap();
    let out = gke(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("U1"));

    fs::write(&path, "not json").unwrap();
    assert_eq!(code(&gke(&["verify", path.to_str().unwrap()])), 1);
    assert_eq!(code(&gke(&["classify", path.to_str().unwrap()])), 1);
}

#[test]
fn classify_fails_on_an_unexpected_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    assert_eq!(
        code(&run_to(&path, &["--protocol", "mbd-p", "--n", "4"])),
        0
    );
    let mut t = Transcript::from_text(&fs::read_to_string(&path).unwrap()).unwrap();
    t.outcomes[1].group.fingerprint = Some(gke_lab::sim::derive_mask(0));
    fs::write(&path, t.to_text()).unwrap();
    let out = gke(&["classify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("unexpected"));
}
