mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DVector;
use rand::Rng;

use dpmpqp::io::PartitionFile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpmpqp"))
}

fn problem() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/double_integrator.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("DPMPQP_SEED", "0").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn solve(dir: &Path, extra: &[&str]) -> (Output, PathBuf, PathBuf) {
    let part = dir.join("partition.json");
    let counters = dir.join("counters.csv");
    let input = problem();
    let mut args = vec![
        "solve",
        "--input",
        input.to_str().unwrap(),
        "--out-partition",
        part.to_str().unwrap(),
        "--out-counters",
        counters.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (run(&args), part, counters)
}

#[test]
fn solve_reports_finite_determination() {
    let dir = tempfile::tempdir().unwrap();
    let (out, part, counters) = solve(dir.path(), &["--n-max", "30"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("N_reached: 16"));
    assert!(text.contains("finitely_determined: true"));
    assert!(part.exists());
    let csv = std::fs::read_to_string(counters).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16);
}

#[test]
fn partition_round_trip_matches_in_memory_law() {
    let dir = tempfile::tempdir().unwrap();
    let (out, part, _) = solve(dir.path(), &["--n-max", "5"]);
    assert!(out.status.success());
    let (_, law) = common::dp_law(5);
    let reloaded = PartitionFile::load(&part).unwrap().to_law().unwrap();
    assert_eq!(reloaded.regions.len(), law.regions.len());
    let mut rng = common::rng(1);
    for _ in 0..100 {
        let x = DVector::from_fn(2, |i, _| rng.gen_range(-1.0..=1.0) * [25.0, 5.0][i]);
        assert_eq!(law.evaluate(&x), reloaded.evaluate(&x), "at {x}");
    }
    for x in ["0,0", "-3.5,1.25", "100,100"] {
        let out = run(&["eval", "--partition", part.to_str().unwrap(), "--x", x]);
        assert!(out.status.success());
        let v: Vec<f64> = x.split(',').map(|s| s.parse().unwrap()).collect();
        let expected = match law.evaluate(&DVector::from_vec(v)) {
            Some(u) => (u[0] + 0.0).to_string(),
            None => "infeasible".to_string(),
        };
        assert_eq!(stdout(&out).trim(), expected);
    }
}

#[test]
fn eval_rejects_malformed_state() {
    let dir = tempfile::tempdir().unwrap();
    let (_, part, _) = solve(dir.path(), &["--n-max", "1"]);
    let out = run(&["eval", "--partition", part.to_str().unwrap(), "--x", "1,abc"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["eval", "--partition", part.to_str().unwrap(), "--x", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_horizon_gives_single_counter_row() {
    let dir = tempfile::tempdir().unwrap();
    let (out, part, counters) = solve(dir.path(), &["--n-max", "1"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(counters).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("dp,1,"));
    let file = PartitionFile::load(&part).unwrap();
    assert_eq!(file.horizon, 1);
}

#[test]
fn both_algorithms_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _, counters) = solve(dir.path(), &["--n-max", "3", "--algorithm", "both"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for n in 1..=3 {
        assert!(text.contains(&format!("M_{n} identical: true")));
    }
    let csv = std::fs::read_to_string(counters).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("baseline,")).count(), 3);
    assert_eq!(csv.lines().filter(|l| l.starts_with("dp,")).count(), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let sub = dir.path().join(k.to_string());
        std::fs::create_dir(&sub).unwrap();
        let (out, part, counters) = solve(&sub, &["--n-max", "8", "--parallel", "--verify", "50"]);
        assert!(out.status.success());
        outputs.push((
            out.stdout,
            std::fs::read(part).unwrap(),
            std::fs::read(counters).unwrap(),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn plot_writes_svg_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (_, part, counters) = solve(dir.path(), &["--n-max", "2", "--algorithm", "both"]);
    let svg = dir.path().join("p.svg");
    let out = run(&[
        "plot",
        "--partition",
        part.to_str().unwrap(),
        "--counters",
        counters.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let body = std::fs::read_to_string(&svg).unwrap();
    for class in ["terminal_active", "last_stage_active", "interior"] {
        assert!(body.contains(&format!("class=\"{class}\"")));
    }
    let curves = std::fs::read_to_string(dir.path().join("p.curves.csv")).unwrap();
    assert!(curves.starts_with("counter,N,dp,baseline\n"));
    assert!(curves.contains("candidates,1,"));
}

#[test]
fn svg_needs_two_states() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("scalar.json");
    std::fs::write(
        &problem,
        r#"{"schema":1,"A":[[0.9]],"B":[[1.0]],"Q":[[1.0]],"R":[[1.0]],
            "U":{"C":[[1.0],[-1.0]],"d":[1.0,1.0]},"X":{"C":[[1.0],[-1.0]],"d":[5.0,5.0]}}"#,
    )
    .unwrap();
    let part = dir.path().join("part.json");
    let out = run(&[
        "solve",
        "--input",
        problem.to_str().unwrap(),
        "--n-max",
        "4",
        "--out-partition",
        part.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = dir.path().join("p.svg");
    let out = run(&[
        "plot",
        "--partition",
        part.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let table = dir.path().join("p.csv");
    let out = run(&[
        "plot",
        "--partition",
        part.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(table).unwrap().starts_with("region,"));
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema":2}"#).unwrap();
    let out = run(&["solve", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--input", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
