//! BB84 with misaligned encoding angles a = b = c, never characterized by the parties.

use mbqkd::channel::{bb84_stats, loss_db_to_eta, Bb84ChannelParams};
use mbqkd::security::{key_rate, OptimizerConfig};

fn main() -> mbqkd::Result<()> {
    let cfg = OptimizerConfig::default();
    println!("{:>6} {:>8} {:>10} {:>10} {:>12}", "angle", "loss_dB", "e_b", "epsilon", "rate");
    for angle in [0.0, 3.0, 6.0, 9.0] {
        for loss in [0.0, 10.0, 20.0] {
            let p = Bb84ChannelParams::new(loss_db_to_eta(loss)?, 1e-5, angle, angle, angle)?;
            let r = key_rate(&bb84_stats(&p)?, &cfg)?;
            println!(
                "{angle:>6} {loss:>8} {:>10.3e} {:>10.3e} {:>12.3e}",
                r.e_b, r.epsilon, r.rate_per_pulse
            );
        }
    }
    Ok(())
}
