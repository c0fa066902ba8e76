//! Qubit states, Bell-state projections and non-orthogonal basis expansions.
//!
//! Everything here is exact small-dimension linear algebra on `Complex64`.
//! Global phases of [`QubitState`] carry no meaning; comparisons go through
//! fidelities.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ConditionalStats;

const NORM_TOL: f64 = 1e-12;
const GRAM_TOL: f64 = 1e-12;

/// A pure qubit state `a0|0> + a1|1>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    amplitudes: [Complex64; 2],
}

impl QubitState {
    /// Builds a state, rejecting inputs whose norm deviates from 1 by more than 1e-12.
    pub fn new(a0: Complex64, a1: Complex64) -> Result<Self> {
        let norm_sq = a0.norm_sqr() + a1.norm_sqr();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self {
            amplitudes: [a0, a1],
        })
    }

    /// Builds a state from arbitrary nonzero amplitudes by rescaling.
    pub fn normalized(a0: Complex64, a1: Complex64) -> Result<Self> {
        let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized {
                norm_sq: norm * norm,
            });
        }
        Ok(Self {
            amplitudes: [a0 / norm, a1 / norm],
        })
    }

    /// Real-amplitude state `cos(t)|0> + sin(t)|1>`.
    pub fn real(theta: f64) -> Self {
        Self {
            amplitudes: [Complex64::new(theta.cos(), 0.0), Complex64::new(theta.sin(), 0.0)],
        }
    }

    /// Point on the Bloch sphere with polar angle `theta` and azimuth `phi`.
    pub fn bloch(theta: f64, phi: f64) -> Self {
        Self {
            amplitudes: [
                Complex64::new((theta / 2.0).cos(), 0.0),
                Complex64::from_polar((theta / 2.0).sin(), phi),
            ],
        }
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self {
            amplitudes: [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        }
    }

    pub fn plus() -> Self {
        Self {
            amplitudes: [
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(FRAC_1_SQRT_2, 0.0),
            ],
        }
    }

    pub fn minus() -> Self {
        Self {
            amplitudes: [
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(-FRAC_1_SQRT_2, 0.0),
            ],
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amplitudes
    }

    pub fn a0(&self) -> Complex64 {
        self.amplitudes[0]
    }

    pub fn a1(&self) -> Complex64 {
        self.amplitudes[1]
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.amplitudes[0].conj() * other.amplitudes[0]
            + self.amplitudes[1].conj() * other.amplitudes[1]
    }

    /// `|<self|other>|^2`, insensitive to global phases.
    pub fn fidelity(&self, other: &QubitState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn conj(&self) -> Self {
        Self {
            amplitudes: [self.amplitudes[0].conj(), self.amplitudes[1].conj()],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes[0].norm_sqr() + self.amplitudes[1].norm_sqr()
    }

    fn check(&self) -> Result<()> {
        let norm_sq = self.norm_sqr();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(())
    }
}

/// The four encoding states of each party, indexed by `x` (Alice) and `y` (Bob).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub alice_states: [QubitState; 4],
    pub bob_states: [QubitState; 4],
}

impl SourceSpec {
    /// `|0>, |1>, |+>, |->` on both sides.
    pub fn ideal_bb84() -> Self {
        let s = [
            QubitState::zero(),
            QubitState::one(),
            QubitState::plus(),
            QubitState::minus(),
        ];
        Self {
            alice_states: s,
            bob_states: s,
        }
    }

    /// Basis-1 states collapsed onto basis 0: `|phi_2> = |0>`, `|phi_3> = |1>` on both sides.
    ///
    /// Matched-basis statistics look perfect, but Eve can read every key bit.
    pub fn collapse() -> Self {
        let s = [
            QubitState::zero(),
            QubitState::one(),
            QubitState::zero(),
            QubitState::one(),
        ];
        Self {
            alice_states: s,
            bob_states: s,
        }
    }

    pub fn symmetric(states: [QubitState; 4]) -> Self {
        Self {
            alice_states: states,
            bob_states: states,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alice_states
            .iter()
            .chain(self.bob_states.iter())
            .try_for_each(QubitState::check)
    }
}

/// Non-negative expansion `target = c0 |base0> + c1 e^{i theta} |base1>` (up to a global phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub c0: f64,
    pub c1: f64,
    /// Relative phase in `[0, 2pi)`; reported as 0 whenever `c0` or `c1` vanishes.
    pub theta: f64,
}

impl ExpansionCoefficients {
    /// Rebuilds the target from the coefficients (with the global phase fixed so the
    /// `base0` coefficient is real).
    pub fn reconstruct(&self, base0: &QubitState, base1: &QubitState) -> [Complex64; 2] {
        let phase = Complex64::from_polar(self.c1, self.theta);
        let b0 = base0.amplitudes();
        let b1 = base1.amplitudes();
        [
            b0[0] * self.c0 + b1[0] * phase,
            b0[1] * self.c0 + b1[1] * phase,
        ]
    }
}

/// Probability `|<phi+|a (x) b>|^2` that an honest Bell-state measurement projects
/// the pair onto `(|00> + |11>)/sqrt 2`. Lies in `[0, 1/2]`.
pub fn bell_projection_prob(a: &QubitState, b: &QubitState) -> Result<f64> {
    a.check()?;
    b.check()?;
    Ok(bell_prob(a, b))
}

/// `|a0 b0 + a1 b1|^2 / 2`, divided by the squared norms so rounding in the
/// amplitudes (e.g. `1/sqrt(2)`) does not leak into the probability.
fn bell_prob(a: &QubitState, b: &QubitState) -> f64 {
    let amp = (a.a0() * b.a0() + a.a1() * b.a1()).norm_sqr();
    (amp / (2.0 * a.norm_sqr() * b.norm_sqr())).min(0.5)
}

/// Expands `target` in the (generally non-orthogonal) pair `base0`, `base1`.
pub fn expansion_coefficients(
    target: &QubitState,
    base0: &QubitState,
    base1: &QubitState,
) -> Result<ExpansionCoefficients> {
    target.check()?;
    base0.check()?;
    base1.check()?;
    let [b00, b01] = base0.amplitudes();
    let [b10, b11] = base1.amplitudes();
    let det = b00 * b11 - b10 * b01;
    // For normalized inputs |det|^2 = 1 - |<b0|b1>|^2, the Gram determinant.
    let gram = det.norm_sqr();
    if gram <= GRAM_TOL {
        return Err(Error::DegenerateBasis { gram });
    }
    let [t0, t1] = target.amplitudes();
    let alpha = (t0 * b11 - b10 * t1) / det;
    let beta = (b00 * t1 - t0 * b01) / det;
    let c0 = alpha.norm();
    let c1 = beta.norm();
    let theta = if c0 == 0.0 || c1 == 0.0 {
        0.0
    } else {
        (beta.arg() - alpha.arg()).rem_euclid(TAU)
    };
    // rem_euclid can return TAU itself for tiny negative inputs.
    let theta = if theta >= TAU { 0.0 } else { theta };
    Ok(ExpansionCoefficients { c0, c1, theta })
}

/// Lossless statistics of an honest single-Bell-state measurement unit.
pub fn ideal_stats(sources: &SourceSpec) -> Result<ConditionalStats> {
    sources.validate()?;
    let mut p1 = [[0.0; 4]; 4];
    for (x, a) in sources.alice_states.iter().enumerate() {
        for (y, b) in sources.bob_states.iter().enumerate() {
            p1[x][y] = bell_prob(a, b);
        }
    }
    Ok(ConditionalStats::full(p1))
}
