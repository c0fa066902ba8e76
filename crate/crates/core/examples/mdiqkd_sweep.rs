//! Single-photon MDIQKD rate against per-arm loss, next to the trusted-source reference.

use mbqkd::sweep::{run_sweep, LossRange, SweepConfig};

fn main() -> mbqkd::Result<()> {
    let cfg = SweepConfig {
        loss_db: LossRange {
            start: 0.0,
            stop: 36.0,
            step: 4.0,
        },
        ..SweepConfig::default()
    };
    println!("{:>8} {:>12} {:>12} {:>12}", "loss_dB", "e_b", "rate", "reference");
    for row in &run_sweep(&cfg)?[0].rows {
        println!(
            "{:>8.1} {:>12.3e} {:>12.3e} {:>12.3e}",
            row.loss_db,
            row.e_b.unwrap_or(f64::NAN),
            row.rate_per_pulse,
            row.reference_rate
        );
    }
    Ok(())
}
