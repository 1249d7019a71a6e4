//! `ordmargin check`: print one verdict line per verification suite and fail
//! the process if any suite fails.

use super::CheckArgs;
use crate::error::{CliError, Result};
use crate::verify;

pub fn run(args: &CheckArgs) -> Result<()> {
    let results = verify::run_battery(args.seed);
    let mut failures = 0usize;
    for result in &results {
        let verdict = if result.passed { "PASS" } else { "FAIL" };
        println!("check {}: {verdict} ({})", result.name, result.detail);
        if !result.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(CliError::runtime(format!(
            "{failures} of {} verification suites failed",
            results.len()
        )));
    }
    Ok(())
}
