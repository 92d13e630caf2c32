use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fluxkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxkit")).args(args).output().expect("binary runs")
}

fn tmp(name: &str, content: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sessions_succeed() {
    for s in ["zeta", "knows_val", "go_go", "sense_loc", "alter"] {
        let path = root().join(format!("sessions/{s}.flux"));
        let o = fluxkit(&["query", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{s}: {}", stdout(&o));
        assert!(!stdout(&o).contains('\r'));
    }
}

#[test]
fn query_transcript_is_deterministic() {
    let path = root().join("sessions/go_go.flux");
    let a = fluxkit(&["query", path.to_str().unwrap()]);
    let b = fluxkit(&["query", path.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn empty_script() {
    let p = tmp("empty.flux", "# nothing here\n\n");
    let o = fluxkit(&["query", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn failed_expectation_exits_1() {
    let p = tmp("fail.flux", "state Z0 = [f(1) | Z]\nexpect knows f(2) Z0\nexpect knows f(1) Z0\n");
    let o = fluxkit(&["query", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAILED (line 2)"), "{out}");
    assert!(out.contains("?- expect knows f(1) Z0\nyes"), "{out}");
}

#[test]
fn inconsistency_exits_2() {
    let p = tmp("bad.flux", "state Z0 = [f(1) | Z]\nnot_holds f(1) Z0\nshow Z0\n");
    let o = fluxkit(&["query", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.ends_with("inconsistent\n"), "{out}");
    assert!(!out.contains("show Z0"));
}

#[test]
fn parse_error_names_the_line() {
    let p = tmp("syntax.flux", "state Z0 = [f(1) | Z]\n\nnot_holds f(1 Z0\n");
    let o = fluxkit(&["query", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_files_exit_3() {
    assert_eq!(fluxkit(&["query", "/nonexistent.flux"]).status.code(), Some(3));
    assert_eq!(fluxkit(&["run", "/nonexistent.txt"]).status.code(), Some(3));
}

#[test]
fn run_office_scenario() {
    let path = root().join("scenarios/office.txt");
    let o = fluxkit(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("cleaned=20 occupied-known=4 home=true\n"));

    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("office-trace.txt");
    let o = fluxkit(&["run", path.to_str().unwrap(), "--trace", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("STEP 1 clean sensed=[] pose=1,1,1\nSTEP 2 go sensed=[false] pose=1,2,1\n"));
    assert!(text.contains("LOOP (1,3) [[],[2,3,4],[2,3,4]] [1,1] TTG\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("STEP")).count(), 124);
}

#[test]
fn run_empty_two_by_two() {
    let path = root().join("scenarios/empty2x2.txt");
    let o = fluxkit(&["run", path.to_str().unwrap()]);
    assert!(stdout(&o).ends_with("cleaned=4 occupied-known=0 home=true\n"));
}

#[test]
fn run_rejects_bad_scenarios() {
    let p = tmp("bad-scenario.txt", "grid 3 3\nrobot 1 1 1\noccupied 4 1\n");
    let o = fluxkit(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_single_free_floor() {
    let o = fluxkit(&["bench", "--sizes", "5", "--runs", "1", "--occupancy", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut rd = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let h = rd.headers().unwrap().clone();
    let col = |n: &str| rows[0][h.iter().position(|x| x == n).unwrap()].to_string();
    assert_eq!(col("cleaned"), "25");
    assert!(col("actions").parse::<usize>().unwrap() >= 25);
    assert_eq!(h.len(), 19);
}

#[test]
fn bench_is_deterministic() {
    let args = ["bench", "--sizes", "4,5", "--runs", "3", "--occupancy", "0.15", "--seed", "7"];
    let mut exact = args.to_vec();
    exact.push("--no-timing");
    assert_eq!(fluxkit(&exact).stdout, fluxkit(&exact).stdout);

    let keep = |o: Output| -> Vec<String> {
        stdout(&o)
            .lines()
            .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
            .collect()
    };
    let a = keep(fluxkit(&args));
    assert_eq!(a, keep(fluxkit(&args)));
    assert_eq!(a.len(), 7);
    assert_eq!(a[1].split(',').take(2).collect::<Vec<_>>(), ["4", "0"]);
    assert_eq!(a[6].split(',').take(2).collect::<Vec<_>>(), ["5", "2"]);
}

#[test]
fn bench_rejects_bad_config() {
    assert_eq!(fluxkit(&["bench", "--sizes", "1"]).status.code(), Some(3));
    assert_eq!(fluxkit(&["bench", "--occupancy", "1.0"]).status.code(), Some(3));
}
