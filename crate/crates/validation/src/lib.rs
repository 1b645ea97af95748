//! A tiny runner for acceptance criteria: each criterion prints one
//! `PASS`/`FAIL` line, a panic counts as a failure, and the process exits
//! nonzero if anything failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Clone, Copy)]
pub enum Check {
    /// Prints its line and returns whether it passed.
    Verdict(fn() -> bool),
    /// Prints its line but is not counted.
    Informational(fn()),
}

pub type Criterion = (&'static str, Check);

/// Prints the verdict line for one criterion and returns whether it passed,
/// counting a blown time limit as a failure.
pub fn report(
    id: &str,
    name: &str,
    pass: bool,
    detail: &str,
    elapsed: Duration,
    limit: Duration,
) -> bool {
    let ok = pass && elapsed <= limit;
    println!(
        "criterion {id:<3} {}  {name}: {detail} [{:.2}s, limit {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

/// Runs every criterion whose name contains `filter` (all when `None`).
pub fn run(criteria: &[Criterion], filter: Option<&str>) -> ExitCode {
    let mut failed = Vec::new();
    let mut ran = 0;
    for &(name, check) in criteria {
        if filter.is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let check = match check {
            Check::Verdict(f) => f,
            Check::Informational(f) => {
                f();
                continue;
            }
        };
        ran += 1;
        let ok = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(ok) => ok,
            Err(_) => {
                println!("{name}  FAIL  panicked");
                false
            }
        };
        if !ok {
            failed.push(name);
        }
    }
    println!(
        "acceptance: {} of {ran} criteria passed",
        ran - failed.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}

/// First non-flag command-line argument, used as a name filter.
pub fn filter_from_args() -> Option<String> {
    std::env::args().skip(1).find(|a| !a.starts_with('-'))
}
