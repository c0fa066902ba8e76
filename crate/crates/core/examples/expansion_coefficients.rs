//! Expresses basis-1 states in terms of basis-0 states for a slightly tilted source.

use mbqkd::quantum::{expansion_coefficients, QubitState};
use std::f64::consts::FRAC_PI_4;

fn main() -> mbqkd::Result<()> {
    let tilt = 5f64.to_radians();
    let phi0 = QubitState::real(0.0);
    let phi1 = QubitState::real(std::f64::consts::FRAC_PI_2 - tilt);
    for (name, t) in [("phi2", FRAC_PI_4 + tilt), ("phi3", -FRAC_PI_4 + tilt)] {
        let c = expansion_coefficients(&QubitState::real(t), &phi0, &phi1)?;
        println!("{name} = {:.6} |phi0> + {:.6} e^(i {:.4}) |phi1>", c.c0, c.c1, c.theta);
    }
    Ok(())
}
