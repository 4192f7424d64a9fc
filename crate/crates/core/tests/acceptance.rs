//! Acceptance battery. Prints one pass/fail line per criterion.

use dualfol::suite::{run_suite, SuiteOptions};

#[test]
fn acceptance() {
    let criteria = run_suite(&SuiteOptions::default());
    for c in &criteria {
        println!("{}  [{:.1}s]", c.line(), c.elapsed.as_secs_f64());
        for check in c.checks.iter().filter(|k| !k.passed) {
            println!("    failed: {} = {:.3e} (tol {:.1e})", check.check, check.max_residual, check.tolerance);
        }
        for note in &c.notes {
            println!("    {note}");
        }
    }
    let failed: Vec<_> = criteria.iter().filter(|c| !c.passed()).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
