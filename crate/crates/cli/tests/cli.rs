use std::fs;
use std::path::Path;
use std::process::Command;

use fedsim_cli::experiment::{RUN_COLUMNS, AGGREGATE_COLUMNS};
use fedsim_cli::{parse_config, run_experiment, RunSummary};

const SWEEP: &str = r#"
seeds = [1, 2, 3]

[run]
method = "consensus"
n_agents = 5
participants = 4
tau = 4
epochs = 3
epoch_len = 20
consensus_rounds = 2

[run.objective]
kind = "wells"
dim = 3
beta = 0.2

[run.timing]
tau_range = [2, 4]

[run.topology]
kind = "ring"

[[sweep]]
path = "consensus_rounds"
values = [0, 1, 2]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedsim"))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn spec_in(dir: &Path) -> fedsim_cli::ExperimentSpec {
    let mut spec = parse_config(SWEEP).unwrap();
    spec.output.dir = dir.to_path_buf();
    spec
}

#[test]
fn outputs_are_deterministic_and_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    run_experiment(&spec_in(&a), Some(1)).unwrap();
    run_experiment(&spec_in(&b), Some(1)).unwrap();
    run_experiment(&spec_in(&c), Some(4)).unwrap();
    let ta = read_tree(&a);
    assert_eq!(ta.len(), 9 + 2);
    assert_eq!(ta, read_tree(&b));
    assert_eq!(ta, read_tree(&c));
}

#[test]
fn frozen_headers_and_summary_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&spec_in(tmp.path()), None).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let run_csv = fs::read_to_string(tmp.path().join("runs/g000_s1.csv")).unwrap();
    assert_eq!(run_csv.lines().next().unwrap(), RUN_COLUMNS.join(","));
    let agg = fs::read_to_string(tmp.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().next().unwrap(), AGGREGATE_COLUMNS.join(","));
    assert_eq!(agg.lines().count(), 1 + 3);
    let text = fs::read_to_string(tmp.path().join("summary.jsonl")).unwrap();
    let parsed: Vec<RunSummary> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, outcome.summaries);
    for (s, line) in parsed.iter().zip(text.lines()) {
        assert_eq!(serde_json::to_string(s).unwrap(), line);
        assert!(s.metric.unwrap() >= 0.0);
        assert!(s.cost_counted.unwrap().total > 0.0);
    }
    // gossip rounds change the trajectory for the same seed
    let g0 = fs::read(tmp.path().join("runs/g000_s2.csv")).unwrap();
    let g1 = fs::read(tmp.path().join("runs/g001_s2.csv")).unwrap();
    assert_ne!(g0, g1);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[run]\nmethod = \"consensus\"\nconsensus_eps = 0.9\n[run.topology]\nkind = \"path\"\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1/Delta"));

    fs::write(&cfg, "[run]\ntau = [\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    // a divergent step size fails the run, not the experiment
    fs::write(&cfg, "[run]\neta = 1000.0\ntau = 2\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("div"))
        .arg("--seeds")
        .arg("1,2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let summary = fs::read_to_string(tmp.path().join("div/summary.jsonl")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.contains("diverged"));
}

#[test]
fn bounds_only_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("b.toml");
    fs::write(&cfg, "[bounds]\ntau = [1, 5, 10]\ndecay_lambda = [0.9]\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--bounds-only")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("bounds.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("bound,l,beta,sigma_sq,m,tau,eta"));
    assert!(header.ends_with("term_init,term_noise,term_local,total,feasible"));
    assert!(text.lines().skip(1).any(|l| l.starts_with("t4,")));
    assert!(!tmp.path().join("summary.jsonl").exists());
}

#[test]
fn validate_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--out")
        .arg(tmp.path())
        .arg("--validate")
        .arg("--method")
        .arg("pavg")
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS lemma1_m8"));
    assert!(stdout.contains("PASS gossip_contraction"));
}
