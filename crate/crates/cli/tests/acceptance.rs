//! One pass/fail line per acceptance criterion. Set `ACCEPTANCE_ONLY=7,8` to run a
//! subset and `ACCEPTANCE_SCALE=quick` for the smoke budgets.

use sparsedom_cli::suite::{run_criterion, Scale};
use std::process::ExitCode;

const SEED: u64 = 20_261_014;

fn main() -> ExitCode {
    let scale = match std::env::var("ACCEPTANCE_SCALE").as_deref() {
        Ok("quick") => Scale::Quick,
        _ => Scale::Acceptance,
    };
    let only: Option<Vec<u8>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for id in 1..=9u8 {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        match run_criterion(id, scale, SEED.wrapping_add(1000 * id as u64)) {
            Ok(r) => {
                println!("{}", r.line());
                if !r.pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("criterion {id} [FAIL] error: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
