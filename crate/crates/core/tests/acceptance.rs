//! Full-scale acceptance run: one line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;

use ctcm::validate::{run_criterion, Criterion, Level, DEFAULT_SEED};

fn main() -> ExitCode {
    let mut failed = 0;
    for criterion in Criterion::ALL {
        let outcome = run_criterion(criterion, Level::Full, DEFAULT_SEED, None);
        println!("{outcome}");
        failed += usize::from(!outcome.passed);
    }
    println!("acceptance: {} of {} criteria passed", Criterion::ALL.len() - failed, Criterion::ALL.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
