//! Acceptance suite: one verdict line per criterion.
//!
//! Criterion numbers given as arguments restrict the run, e.g.
//! `cargo test --test acceptance -- 6 7`.

use std::process::ExitCode;

use bp_invlab::acceptance::run_criteria;

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let outcomes = run_criteria(&only, |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
