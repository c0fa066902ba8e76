//! Both parties send |0> for x = 0, 2 and |1> for x = 1, 3. Matched-basis data
//! look perfect, but the mismatched-basis entries expose the attack.

use mbqkd::quantum::{ideal_stats, SourceSpec};
use mbqkd::security::{bit_error_rate, key_rate, OptimizerConfig};

fn main() -> mbqkd::Result<()> {
    let stats = ideal_stats(&SourceSpec::collapse())?;
    println!("e_b = {}", bit_error_rate(&stats)?);
    for (x, y) in [(3, 0), (3, 1), (0, 2), (1, 2)] {
        println!("p(1|{x},{y}) = {}", stats.p1(x, y).unwrap_or(f64::NAN));
    }
    let r = key_rate(&stats, &OptimizerConfig::default())?;
    println!("epsilon = {}", r.epsilon);
    println!("rate    = {}", r.rate_per_sifted_bit);
    Ok(())
}
