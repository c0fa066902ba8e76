//! Writes a BB84 statistics file and analyzes it the way `mbqkd analyze` does.
//!
//! Usage: `cargo run --example analyze_table [FILE]`

use std::path::PathBuf;

use mbqkd::channel::{bb84_stats, loss_db_to_eta, Bb84ChannelParams};
use mbqkd::commands::{analyze, to_json};
use mbqkd::security::OptimizerConfig;

fn main() -> mbqkd::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("mbqkd-bb84-20db.json");
            let params = Bb84ChannelParams::new(loss_db_to_eta(20.0)?, 1e-5, 0.0, 0.0, 0.0)?;
            bb84_stats(&params)?.write(&p)?;
            eprintln!("wrote {}", p.display());
            p
        }
    };
    let r = analyze(&path, &OptimizerConfig::default(), false)?;
    print!("{}", to_json(&r));
    Ok(())
}
