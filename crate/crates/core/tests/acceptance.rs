//! End-to-end acceptance: the full verification suite at seed 7, run twice.

use std::io::Write;

use swirlmhd_core::harness::suites::criterion_title;
use swirlmhd_core::harness::{run_suite, Suite};

const SEED: u64 = 7;

#[test]
fn acceptance_criteria() {
    let first = run_suite(Suite::All, SEED).expect("suite runs");
    let second = run_suite(Suite::All, SEED).expect("suite runs");
    let (a, b) = (first.render(), second.render());

    // written to the raw handle so the lines show without --nocapture
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    let mut failed = Vec::new();
    for c in 1..=11u8 {
        let ok = first.criterion_passed(c) == Some(true);
        writeln!(out, "C{c:<2} {:<5} {}", if ok { "PASS" } else { "FAIL" }, criterion_title(c)).unwrap();
        if !ok {
            failed.push(format!("C{c}"));
        }
    }
    let identical = a == b;
    writeln!(out, "C12 {:<5} byte-identical reports for seed {SEED}", if identical { "PASS" } else { "FAIL" }).unwrap();
    if !identical {
        failed.push("C12".to_string());
    }

    if !failed.is_empty() {
        writeln!(out, "\n{a}").unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
