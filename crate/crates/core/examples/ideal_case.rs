//! Perfect single-photon MDIQKD with no loss: the deviation vanishes and every
//! sifted bit is secret.

use mbqkd::channel::{mdiqkd_stats, MdiChannelParams};
use mbqkd::security::{key_rate, OptimizerConfig};

fn main() -> mbqkd::Result<()> {
    let stats = mdiqkd_stats(&MdiChannelParams::new(1.0, 0.0)?)?;
    let r = key_rate(&stats, &OptimizerConfig::default())?;
    println!("e_b     = {}", r.e_b);
    println!("epsilon = {:.3e}", r.epsilon);
    println!("rate    = {} per sifted bit", r.rate_per_sifted_bit);
    println!("argmax  = {:?}", r.argmax);
    Ok(())
}
