//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

mod criteria;

use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let start = Instant::now();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, run) in criteria::ALL {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let check = match std::panic::catch_unwind(run) {
            Ok(c) => c,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                let mut c = yule_validation::Check::new(*id, "panicked");
                c.require(false, msg);
                c
            }
        };
        println!("{check}\n    ({:.1} s)", t0.elapsed().as_secs_f64());
        if !check.pass {
            failed.push(check.id.clone());
        }
    }
    println!(
        "\nacceptance: {} of {ran} passed in {:.1} s",
        ran - failed.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
