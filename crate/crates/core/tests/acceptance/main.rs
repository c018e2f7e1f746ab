//! Acceptance criteria, one line of output per criterion.
//!
//! Run with `cargo test --test acceptance`; extra arguments filter criteria by
//! substring.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

mod determinism;
mod gradients;
mod patterns;
mod properties;

type Check = fn() -> Result<String, String>;

const CRITERIA: &[(&str, Check)] = &[
    ("gradient-oracle", gradients::gradient_oracle),
    ("loss-forward", properties::loss_forward_properties),
    ("metric-oracle", properties::metric_oracle),
    ("triage", properties::triage_properties),
    ("learnability", patterns::learnability),
    ("zero-shot", patterns::zero_shot),
    ("ablation", patterns::ablation),
    ("aux-objective", patterns::aux_objective),
    ("popularity", patterns::popularity),
    ("entity-coverage", patterns::coverage),
    ("cli-determinism", determinism::cli_determinism),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name:<22} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name:<22} {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
