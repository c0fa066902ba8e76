//! Coherent-source BB84: infinite decoy states against three intensities with
//! finite pulse counts.

use mbqkd::channel::{loss_db_to_eta, Bb84ChannelParams};
use mbqkd::decoy::{infinite_decoy_rate, three_decoy_rate, DecoyChannel, DecoyParams};
use mbqkd::security::OptimizerConfig;

fn main() -> mbqkd::Result<()> {
    let cfg = OptimizerConfig::default();
    let counts = [None, Some(10_000_000_000), Some(100_000_000), Some(1_000_000)];
    print!("{:>8} {:>11}", "loss_dB", "infinite");
    for n in counts {
        print!(" {:>11}", n.map_or("N=inf".to_string(), |n| format!("N=1e{}", (n as f64).log10())));
    }
    println!();
    for loss in [0.0, 10.0, 20.0, 25.0] {
        let p = Bb84ChannelParams::new(loss_db_to_eta(loss)?, 1e-5, 0.0, 0.0, 0.0)?;
        let inf = infinite_decoy_rate(&DecoyChannel::Bb84(p), &DecoyParams::default(), &cfg)?;
        print!("{loss:>8} {:>11.3e}", inf.rate_per_pulse);
        for n in counts {
            let d = DecoyParams {
                n_pulses: n,
                ..DecoyParams::default()
            };
            let rate = three_decoy_rate(&p, &d, &cfg).map_or(0.0, |t| t.result.rate_per_pulse);
            print!(" {rate:>11.3e}");
        }
        println!();
    }
    Ok(())
}
