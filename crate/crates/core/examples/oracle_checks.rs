//! The validation suite: each check compares the library against an
//! independent computation and reports its worst error.
//!
//!     cargo run --release --example oracle_checks

use kldro::validation::{run_suite, SuiteOptions};

fn main() -> kldro::Result<()> {
    let reports = run_suite(&SuiteOptions::default())?;
    for r in &reports {
        println!(
            "{:<22} {}  worst {:>10.3e}  tol {:.0e}  trials {}",
            r.name,
            if r.passed { "ok  " } else { "FAIL" },
            r.worst_error,
            r.tolerance,
            r.trials
        );
    }
    let worst = reports
        .iter()
        .find(|r| r.name == "dual_equivalence")
        .unwrap();
    println!("dual_equivalence witness: {}", worst.witness);
    Ok(())
}
