//! Acceptance suite: one pass/fail line per criterion.
//!
//! `cargo test --test acceptance -- 3 7` runs a subset.

use std::process::ExitCode;

fn main() -> ExitCode {
    let ids: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let results = growthlab::acceptance::run(&ids);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
