//! Runs every acceptance criterion under the default seed and prints one
//! line per criterion. `SUITE_ONLY=5,7` restricts the run, `SUITE_THREADS`
//! sets the thread budget.

use slln_core::suite::{run_suite, SuiteOptions};

fn options() -> SuiteOptions {
    let mut opts = SuiteOptions::default();
    if let Ok(only) = std::env::var("SUITE_ONLY") {
        opts.only = only.split(',').map(|s| s.trim().parse().expect("criterion id")).collect();
    }
    if let Ok(t) = std::env::var("SUITE_THREADS") {
        opts.threads = t.parse().expect("thread count");
    }
    opts
}

#[test]
fn acceptance_criteria() {
    let report = run_suite(&options()).expect("suite ran");
    println!();
    print!("{}", report.table());
    assert!(report.all_passed(), "{} criteria failed", report.failures());
}
