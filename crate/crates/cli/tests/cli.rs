//! End-to-end tests of the binary: exit codes, table/CSV output, and
//! determinism of CSV reports.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn scenario(text: &str) -> NamedTempFile {
    let mut file = NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    file
}

fn poolform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poolform"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

const EXAMPLE_OCEANIC: &str = r#"{
  "threshold": 3,
  "atomic_stakes": [2, 2],
  "oceanic_mass": 8,
  "scheme": "shapley",
  "partition": [
    {"atomic": [1], "oceanic": 2},
    {"atomic": [2], "oceanic": 2},
    {"atomic": [], "oceanic": 4}
  ]
}"#;

const EXAMPLE_POS: &str = r#"{
  "threshold": 4,
  "atomic_stakes": [3, 1, 1, 1, 1, 1],
  "partition": [
    {"atomic": [1, 2]},
    {"atomic": [3, 4, 5, 6]}
  ]
}"#;

#[test]
fn rewards_oceanic_example() {
    let file = scenario(EXAMPLE_OCEANIC);
    let out = poolform(&["rewards", "--scenario", file.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("reward 0.5"), "{text}");
    assert!(text.contains("ocean rate per unit 0.25"), "{text}");
}

#[test]
fn rewards_prints_rationals_in_table_mode() {
    let file = scenario(EXAMPLE_POS);
    let out = poolform(&[
        "rewards",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "shapley",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("reward 1/2"), "{text}");
    assert!(text.contains("reward 1/4"), "{text}");
}

#[test]
fn rewards_without_partition_exits_2() {
    let file = scenario(r#"{"threshold": 4, "atomic_stakes": [3, 1], "scheme": "shapley"}"#);
    let out = poolform(&["rewards", "--scenario", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rewards_without_scheme_exits_2() {
    let file = scenario(EXAMPLE_POS);
    let out = poolform(&["rewards", "--scenario", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_scenario_exits_2() {
    let file = scenario(r#"{"threshold": 4, "atomic_stakes": [-3]}"#);
    let out = poolform(&["opt", "--scenario", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));
}

#[test]
fn equilibrium_check_reports_deviation() {
    let file = scenario(EXAMPLE_POS);
    let out = poolform(&[
        "equilibrium",
        "check",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "shapley",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("not a Nash equilibrium"), "{text}");
    assert!(text.contains("0.5 -> 0.6"), "{text}");
}

#[test]
fn equilibrium_construct_oceanic() {
    let file = scenario(r#"{"threshold": 3, "atomic_stakes": [2, 2], "oceanic_mass": 8}"#);
    let out = poolform(&[
        "equilibrium",
        "construct",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "shapley",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("k = 2"), "{text}");
    assert!(text.contains("check_nash: equilibrium"), "{text}");
}

#[test]
fn construct_with_premise_violation_exits_3() {
    let file = scenario(r#"{"threshold": 5, "atomic_stakes": [1], "oceanic_mass": 20}"#);
    let out = poolform(&[
        "equilibrium",
        "construct",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "shapley",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("outside"), "{err}");
}

#[test]
fn opt_running_example() {
    let file = scenario(EXAMPLE_POS);
    let out = poolform(&["opt", "--scenario", file.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("OPT = 2"));
}

#[test]
fn pos_shapley_and_proportional() {
    let file = scenario(EXAMPLE_POS);
    let out = poolform(&[
        "pos",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "shapley",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("PoS = 2 (2/1)"));
    let out = poolform(&[
        "pos",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "proportional",
    ]);
    assert!(stdout(&out).contains("PoS = 1 (2/2)"));
}

#[test]
fn sybil_audit_finds_proportional_vulnerability() {
    let file = scenario(
        r#"{
          "threshold": 10,
          "atomic_stakes": [6, 6, 6, 1, 1, 1, 1],
          "partition": [{"atomic": [1, 2]}, {"atomic": [3, 4, 5, 6, 7]}]
        }"#,
    );
    let out = poolform(&[
        "sybil",
        "audit",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "proportional",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("vulnerable"), "{text}");
    assert!(text.contains("witness split"), "{text}");
}

#[test]
fn sybil_waterfill_direct_pools() {
    let out = poolform(&["sybil", "waterfill", "--pools", "4,5,7", "--budget", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("payoff 0.507398067344"), "{text}");
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let file = scenario(EXAMPLE_OCEANIC);
    let args = [
        "rewards",
        "--scenario",
        file.path().to_str().unwrap(),
        "--format",
        "csv",
        "--seed",
        "7",
    ];
    let a = poolform(&args);
    let b = poolform(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("record,pool,player,stake,value"), "{text}");
    assert!(text.contains("seed=7"), "{text}");
    assert!(text.contains("version="), "{text}");
}

#[test]
fn equilibrium_check_csv_has_deviation_columns() {
    let file = scenario(EXAMPLE_POS);
    let out = poolform(&[
        "equilibrium",
        "check",
        "--scenario",
        file.path().to_str().unwrap(),
        "--scheme",
        "shapley",
        "--format",
        "csv",
    ]);
    let text = stdout(&out);
    assert!(text.starts_with("record,player,from,to,before,after"), "{text}");
    assert!(text.contains("deviation,1,0,1,0.5,0.6"), "{text}");
}

#[test]
fn verify_subset_runs_clean() {
    // Reduced sample count keeps the full suite quick; all criteria still pass.
    let out = poolform(&["verify", "--samples", "60000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("16 of 16 criteria passed"), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}
