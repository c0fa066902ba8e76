//! Random collective attacks checked against the phase-error bound.
//!
//! Usage: `cargo run --release --example soundness_audit [TRIALS] [SEED]`

use mbqkd::attack::soundness_audit;
use mbqkd::security::OptimizerConfig;

fn main() -> mbqkd::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let report = soundness_audit(trials, seed, &OptimizerConfig::default())?;
    println!(
        "{} trials, {} sound, {} violations, {} skipped",
        report.trials, report.passes, report.failures, report.skipped
    );
    if let Some(w) = &report.worst {
        println!(
            "tightest: trial {} ({:?}), e_p = {:.4} <= bound {:.4}",
            w.trial, w.attack.kind, w.e_p_actual, w.bound
        );
    }
    Ok(())
}
