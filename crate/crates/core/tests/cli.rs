use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hybrid_ia::alignment::certify;
use hybrid_ia::alignment::dump::StrategyDocument;
use hybrid_ia::alignment::IaStrategy;
use hybrid_ia::channel::{apply_group_preinversion, sample_channel, Partition};
use hybrid_ia::experiment::{ASYMPTOTIC_HEADER, DOF_HEADER, ERGODIC_HEADER};
use hybrid_ia::rng::derive_seed;

const ASYMPTOTIC_ARGS: &[&str] = &["asymptotic-sinr", "--n", "4,8", "--snr", "0,10", "--trials", "20", "--seed", "3"];
const ERGODIC_ARGS: &[&str] = &[
    "ergodic-capacity",
    "--trials",
    "4",
    "--snr",
    "10",
    "--partition",
    "2,2",
    "--partition",
    "1,1,1,1",
    "--seed",
    "3",
];

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hybrid-ia"));
    cmd.env_remove("HYBRID_IA_WORKERS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn header_row(body: &str) -> &str {
    body.lines().find(|l| !l.starts_with('#')).unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has an error record");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

#[test]
fn asymptotic_output_matches_golden() {
    assert_eq!(stdout(ASYMPTOTIC_ARGS), include_str!("golden/asymptotic_small.csv"));
}

#[test]
fn ergodic_output_matches_golden() {
    assert_eq!(stdout(ERGODIC_ARGS), include_str!("golden/ergodic_small.csv"));
}

#[test]
fn worker_count_does_not_change_output() {
    let one = bin().args(ERGODIC_ARGS).env("HYBRID_IA_WORKERS", "1").output().unwrap();
    let three = bin().args(ERGODIC_ARGS).env("HYBRID_IA_WORKERS", "3").output().unwrap();
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
    assert_eq!(stdout(&[ERGODIC_ARGS, &["--workers", "2"]].concat()).as_bytes(), one.stdout.as_slice());
}

#[test]
fn csv_headers_are_exact() {
    assert_eq!(header_row(include_str!("golden/asymptotic_small.csv")), ASYMPTOTIC_HEADER.join(","));
    assert_eq!(header_row(include_str!("golden/ergodic_small.csv")), ERGODIC_HEADER.join(","));
    assert_eq!(ERGODIC_HEADER.join(","), "snr_db,partition,policy,user,dof,e_sinr_linear,rate_norm");
    assert_eq!(ASYMPTOTIC_HEADER.join(","), "n,snr_db,mean_inv_sinr,mean_sinr,thm1_pred,jensen_gap_db");
}

#[test]
fn output_file_matches_stdout_apart_from_echoed_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = run(&[ASYMPTOTIC_ARGS, &["-o", path.to_str().unwrap()]].concat());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = fs::read_to_string(&path).unwrap();
    let without_path: String = written.lines().filter(|l| !l.starts_with("# output")).map(|l| format!("{l}\n")).collect();
    assert_eq!(without_path, include_str!("golden/asymptotic_small.csv"));
}

#[test]
fn dof_table_passes_for_every_partition() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("strategies.json");
    let body = stdout(&["dof-table", "--trials", "5", "--seed", "11", "--dump-strategy", dump.to_str().unwrap()]);
    assert_eq!(header_row(&body), DOF_HEADER.join(","));
    let rows: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",pass")), "{body}");

    let docs: Vec<StrategyDocument> = serde_json::from_str(&fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(docs.len(), 5);
    for (p_index, doc) in docs.iter().enumerate() {
        let strategy = IaStrategy::try_from(doc).unwrap();
        let part: Partition = doc.partition.parse().unwrap();
        let seed = derive_seed(11, &[p_index as u64, 0]);
        let eff = apply_group_preinversion(&sample_channel(4, 5, seed), &part, 0.01, 0.01).unwrap();
        let cert = certify(&eff, &strategy).unwrap();
        assert_eq!(cert.record.dof, strategy.dof);
    }
}

#[test]
fn json_format_parses() {
    let body = stdout(&[ASYMPTOTIC_ARGS, &["--format", "json"]].concat());
    let value: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!(value.to_string().contains("mean_inv_sinr"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\ntrials = 99\nsnr-db = [0.0, 10.0]\nn = [4, 8]\n").unwrap();
    let body = stdout(&["asymptotic-sinr", "--config", cfg.to_str().unwrap(), "--trials", "20"]);
    assert_eq!(body, include_str!("golden/asymptotic_small.csv"));
    assert!(body.starts_with("# command = \"asymptotic-sinr\"\n# seed = 3\n# trials = 20\n"));
}

#[test]
fn invalid_parameters_exit_2_with_a_json_record() {
    for args in [
        &["asymptotic-sinr", "--trials", "0"][..],
        &["ergodic-capacity", "--partition", "3,2"],
        &["asymptotic-sinr", "--n", "1"],
        &["verify", "--workers", "0"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let record = error_record(&out);
        assert_eq!(record["exit_code"], 2);
        assert!(record["error"].is_string() && record["message"].is_string());
    }
    let out = run(&["dof-table", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "sead = 3\n").unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "InvalidParameter");
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("never.csv");
    let out = run(&["ergodic-capacity", "--partition", "5", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&path).exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn verify_exits_zero_when_all_suites_pass() {
    let out = run(&["verify", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body = String::from_utf8(out.stdout).unwrap();
    assert_eq!(body.lines().filter(|l| l.ends_with(",pass")).count(), 8);
}
