//! Acceptance suite: runs every verification criterion at its pinned
//! tolerance and prints one pass/fail line per criterion.

use poolform_core::verify::{run_all, VerifyConfig};

#[test]
fn acceptance_criteria() {
    let cfg = VerifyConfig::default();
    let outcomes = run_all(&cfg);
    let mut failures = Vec::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {:02}: {} — {}", o.id, o.name, o.details);
        if !o.passed {
            failures.push(o.id);
        }
    }
    assert!(
        failures.is_empty(),
        "criteria failed: {failures:?} (see lines above)"
    );
}
