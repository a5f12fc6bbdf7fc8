//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
//!
//! Runs without the libtest harness so the table is always printed.

use pathology_forge::suite;

fn main() {
    println!("\nrunning acceptance criteria 1-8");
    let results = suite::run_all();
    for o in &results {
        println!("{}", suite::line(o));
    }
    let failed: Vec<u32> = results.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert_eq!(results.len(), 8);
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: {} of 8 criteria passed\n", results.len());
}
