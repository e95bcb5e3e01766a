//! All ten acceptance criteria at their pinned scale, one line each.
//!
//! `MASKLAB_SCALE=quick` runs the reduced smoke scale instead.

use std::process::ExitCode;
use std::time::Instant;

use masklab::harness::{run_criterion, Scale, CRITERIA};

fn main() -> ExitCode {
    let scale = match std::env::var("MASKLAB_SCALE").as_deref() {
        Ok("quick") => Scale::Quick,
        _ => Scale::Full,
    };
    let mut failed = 0;
    for &(id, name) in &CRITERIA {
        let start = Instant::now();
        let line = match run_criterion(id, scale, 1) {
            Ok(o) => {
                let detail: Vec<String> = o
                    .assertions
                    .iter()
                    .map(|a| format!("{}{}: {}", if a.passed { "" } else { "FAILED " }, a.name, a.detail))
                    .collect();
                failed += !o.passed as usize;
                format!("{} | {}", if o.passed { "pass" } else { "FAIL" }, detail.join("; "))
            }
            Err(e) => {
                failed += 1;
                format!("FAIL | error: {e}")
            }
        };
        println!("criterion {id:>2} {name}: {line} ({:.1}s)", start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
