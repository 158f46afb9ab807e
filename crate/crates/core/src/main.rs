use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gke_lab::group::Preset;
use gke_lab::oracle::Digest;
use gke_lab::protocol::SubgroupTokenContext;
use gke_lab::sim::{
    check_agreement, derive_mask, run_scenario, verify_transcript, AttackStage, ProtocolKind,
    Scenario, SimError, Transcript,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "gke-lab", version, about = "Group key exchange simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its transcript.
    Run(RunArgs),
    /// Re-verify every message of a transcript.
    Verify { path: PathBuf },
    /// Classify the outcome recorded in a transcript.
    Classify { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Group,
    Subgroup,
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenContextArg {
    FullSid,
    Ssid,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    protocol: ProtocolKind,
    #[arg(long)]
    n: usize,
    /// Comma-separated 1-based roster numbers, in cycle order.
    #[arg(long, value_delimiter = ',')]
    subgroup: Option<Vec<usize>>,
    #[arg(long, requires_all = ["victim", "rmask"])]
    attack: bool,
    #[arg(long, requires = "attack")]
    victim: Option<usize>,
    /// Mask as 64 hex digits, or `random` to derive one from the seed.
    #[arg(long, requires = "attack")]
    rmask: Option<String>,
    /// Attacked stage; defaults to subgroup for mbd-s protocols, group otherwise.
    #[arg(long, value_enum, requires = "attack")]
    attack_stage: Option<StageArg>,
    #[arg(long, value_enum, default_value = "full-sid")]
    subgroup_token_context: TokenContextArg,
    #[arg(long)]
    group: Preset,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn sim_failure(e: SimError) -> ExitCode {
    let code = match e {
        SimError::InvalidScenario(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    };
    fail(code, e)
}

fn scenario_of(args: &RunArgs) -> Result<Scenario, String> {
    let mut scenario = Scenario::honest(args.protocol, args.n, args.group, args.seed);
    scenario.subgroup = args.subgroup.clone();
    scenario.subgroup_token_context = match args.subgroup_token_context {
        TokenContextArg::FullSid => SubgroupTokenContext::FullSid,
        TokenContextArg::Ssid => SubgroupTokenContext::Ssid,
    };
    if args.attack {
        let victim = args.victim.expect("clap requires --victim");
        let rmask = match args.rmask.as_deref().expect("clap requires --rmask") {
            "random" => derive_mask(args.seed),
            hex => Digest::from_hex(hex).map_err(|e| format!("--rmask: {e}"))?,
        };
        let stage = match args.attack_stage {
            Some(StageArg::Group) => AttackStage::Group,
            Some(StageArg::Subgroup) => AttackStage::Subgroup,
            None if args.protocol.has_subgroup_stage() => AttackStage::Subgroup,
            None => AttackStage::Group,
        };
        scenario = scenario.with_attack(victim, rmask, stage);
    }
    Ok(scenario)
}

fn load(path: &Path) -> Result<Transcript, ExitCode> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    Transcript::from_text(&text).map_err(sim_failure)
}

fn run(args: RunArgs) -> ExitCode {
    let scenario = match scenario_of(&args) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let transcript = match run_scenario(&scenario) {
        Ok(t) => t,
        Err(e) => return sim_failure(e),
    };
    if let Err(e) = fs::write(&args.out, transcript.to_text()) {
        return fail(EXIT_FAILURE, format!("{}: {e}", args.out.display()));
    }
    let report = match check_agreement(&transcript) {
        Ok(r) => r,
        Err(e) => return sim_failure(e),
    };
    print!("{report}");
    let expected = scenario.expected_classification();
    if report.classification == expected {
        ExitCode::SUCCESS
    } else {
        fail(
            EXIT_FAILURE,
            format!("expected {expected}, got {}", report.classification),
        )
    }
}

fn verify(path: &Path) -> ExitCode {
    let transcript = match load(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match verify_transcript(&transcript) {
        Ok(report) if report.ok => {
            println!("ok");
            ExitCode::SUCCESS
        }
        Ok(report) => {
            for d in &report.diagnostics {
                println!("{d}");
            }
            ExitCode::from(EXIT_FAILURE)
        }
        Err(e) => sim_failure(e),
    }
}

fn classify(path: &Path) -> ExitCode {
    let transcript = match load(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match check_agreement(&transcript) {
        Ok(report) => {
            print!("{report}");
            let expected = transcript.scenario.expected_classification();
            if report.classification == expected {
                ExitCode::SUCCESS
            } else {
                fail(
                    EXIT_FAILURE,
                    format!("expected {expected}, got {}", report.classification),
                )
            }
        }
        Err(e) => sim_failure(e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Verify { path } => verify(&path),
        Command::Classify { path } => classify(&path),
    }
}
