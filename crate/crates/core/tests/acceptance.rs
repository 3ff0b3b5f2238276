//! Runs every acceptance criterion and prints one line per criterion.
//! Built without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use daylight_core::checks::{run_all, CRITERIA};

fn main() -> ExitCode {
    let outcomes = run_all(20_240_611);
    assert_eq!(outcomes.len(), CRITERIA.len());
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: {}/{} criteria passed", outcomes.len(), outcomes.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
