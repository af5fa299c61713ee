//! One PASS/FAIL line per criterion. Exits nonzero on any failure that is not
//! a known, analysed one.

use rwre_cli::accept::{run_suite, CRITERIA};

fn main() {
    let ids: Vec<usize> = (1..=CRITERIA).collect();
    let outcomes = run_suite(&ids, |o| println!("{}", o.line()));
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let unexpected: Vec<usize> = outcomes.iter().filter(|o| o.unexpected()).map(|o| o.id).collect();
    println!("{passed}/{} passed", outcomes.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
