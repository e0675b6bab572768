//! Runs the closed-form oracles and the finite-difference gradient checks
//! for every differentiable loss, including the full stylization pipeline
//! back to the SIREN parameters.
//!
//! ```text
//! cargo run --release --example gradient_check -- 32
//! ```

use avstyle::selftest::{gradient_suite, oracle_suite};

fn main() -> avstyle::Result<()> {
    let probes = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let mut reports = oracle_suite(0)?;
    reports.extend(gradient_suite(probes, 0)?);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {failed} failed", reports.len());
    Ok(())
}
