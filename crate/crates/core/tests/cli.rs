use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kronmag::{ColorAssignment, EdgeList};

const THETA1: &str = "0.15,0.7;0.7,0.85";

fn kronmag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronmag"))
        .args(args)
        .env_remove("KRONMAG_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_edges(path: &Path) -> EdgeList {
    EdgeList::read_from(fs::read(path).unwrap().as_slice()).unwrap()
}

#[test]
fn expected_edges_line() {
    let o = kronmag(&["expected-edges", "--d", "1", "--theta", THETA1, "--mu", "0.2", "--n", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "e_K=2.4 e_M=1.416 e_MK=1.98 e_KM=1.98");

    let o = kronmag(&["expected-edges", "--d", "3", "--theta", "0.4,0.7;0.7,0.9", "--replicate"]);
    assert_eq!(stdout(&o).trim(), "e_K=19.683");
}

#[test]
fn sample_kpgm_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.tsv");
    let o = kronmag(&[
        "sample-kpgm", "--d", "3", "--theta", "0.4,0.7;0.7,0.9", "--replicate", "--mode", "bdp",
        "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let list = read_edges(&out);
    let summary = stdout(&o);
    assert!(summary.starts_with(&format!("edges={} seconds=", list.len())), "{summary}");
    assert_eq!(list.header.mode, "bdp");
    assert_eq!(list.header.n, 8);
    assert_eq!(list.header.seed, Some(1));
    assert!(list.edges.iter().all(|&(i, j)| i < 8 && j < 8));
}

#[test]
fn zero_mu_gives_single_color() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.tsv");
    let colors = dir.path().join("c.tsv");
    let o = kronmag(&[
        "sample-magm", "--d", "2", "--n", "4", "--theta", THETA1, "--replicate", "--mu", "0.0,0.0",
        "--mode", "ar", "--seed", "7", "--out", out.to_str().unwrap(), "--emit-colors",
        colors.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = ColorAssignment::read_tsv(fs::read(&colors).unwrap().as_slice(), 2).unwrap();
    assert_eq!(c.colors(), &[0, 0, 0, 0]);
}

#[test]
fn colors_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let colors = dir.path().join("c.tsv");
    fs::write(&colors, "0\t3\n1\t3\n2\t1\n").unwrap();
    let out = dir.path().join("g.tsv");
    let emitted = dir.path().join("e.tsv");
    let o = kronmag(&[
        "sample-magm", "--d", "2", "--n", "3", "--theta", THETA1, "--replicate", "--mu", "0.7",
        "--colors", colors.to_str().unwrap(), "--emit-colors", emitted.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&colors).unwrap(), fs::read(&emitted).unwrap());

    let o = kronmag(&[
        "sample-magm", "--d", "2", "--n", "5", "--theta", THETA1, "--replicate", "--mu", "0.7",
        "--colors", colors.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn dedupe_flag_removes_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.tsv");
    let o = kronmag(&[
        "sample-kpgm", "--d", "1", "--theta", "3,3;3,3", "--mode", "bdp", "--seed", "3",
        "--dedupe", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let list = read_edges(&out);
    let mut sorted = list.edges.clone();
    sorted.dedup();
    assert_eq!(sorted, list.edges);
    assert!(list.len() <= 4);
}

#[test]
fn validity_errors_name_the_entry() {
    let o = kronmag(&[
        "sample-kpgm", "--d", "2", "--theta", "0.5,0.5;0.5,0.5\n0.5,1.5;0.5,0.5", "--mode", "exact",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("level 2") && err.contains("(0,1)") && err.contains("1.5"), "{err}");

    let o = kronmag(&[
        "sample-magm", "--d", "2", "--n", "4", "--theta", "1.2,0.5;0.5,0.5", "--replicate",
        "--mu", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("level 1 entry (0,0) = 1.2"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(kronmag(&["sample-kpgm", "--bogus"]).status.code(), Some(2));
    assert_eq!(kronmag(&["sample-magm", "--d", "2", "--theta", THETA1, "--replicate"]).status.code(), Some(2));
    assert_eq!(kronmag(&["sample-kpgm", "--d", "2", "--theta", "1,2;3"]).status.code(), Some(2));
    assert_eq!(kronmag(&["sample-kpgm", "--seed", "0xzz"]).status.code(), Some(2));
    assert_eq!(kronmag(&["bench", "--sweep", "n=1:2:1"]).status.code(), Some(2));
}

#[test]
fn seed_formats_and_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kronmag"));
        cmd.args(["sample-kpgm", "--d", "4", "--theta", "0.4,0.7;0.7,0.9", "--replicate"])
            .args(["--out", out.to_str().unwrap()])
            .env_remove("KRONMAG_SEED");
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("KRONMAG_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(out).unwrap()
    };
    let dec = run("a", Some("255"), None);
    assert_eq!(dec, run("b", Some("0xff"), None));
    assert_eq!(dec, run("c", None, Some("255")));
    assert_eq!(run("d", Some("255"), Some("9")), dec);
    assert_ne!(dec, run("e", Some("256"), None));
}

#[test]
fn theta_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("theta.txt");
    fs::write(&file, "# two levels\n0.4,0.7;0.7,0.9\n0.5,0.5;0.5,0.5\n").unwrap();
    let arg = format!("@{}", file.display());
    let o = kronmag(&["expected-edges", "--theta", &arg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "e_K=5.4");
}

#[test]
fn estimate_cost_matches_sampled_colors() {
    let o = kronmag(&[
        "estimate-cost", "--d", "6", "--n", "64", "--theta", THETA1, "--replicate", "--mu", "0.5",
        "--seed", "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.contains("FI=0 IF=0 II=0 total="), "{line}");
}

#[test]
fn validate_report_format() {
    let o = kronmag(&[
        "validate", "--check", "theorem3", "--d", "3", "--runs", "20", "--seed", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("check\tparameters\tstatistic\tp_value\tpass"));
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(row.len(), 5);
    assert_eq!(row[0], "theorem3");
    assert_eq!(row[4], "true");
}

#[test]
fn bench_csv() {
    let o = kronmag(&[
        "bench", "--d", "8", "--theta", THETA1, "--replicate", "--sweep", "mu=0.3:0.5:0.2",
        "--reps", "3", "--seed", "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "mu,d,n,mode,reps,mean_seconds,stddev_seconds,mean_edges,e_M");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.3,8,256,ar,3,"));
    assert!(lines[2].starts_with("0.5,8,256,ar,3,"));
}
