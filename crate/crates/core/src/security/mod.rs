//! Phase-error bound and secret-key rate from observed click statistics.
//!
//! The bound maximizes an objective over the expansion coefficients
//! `C30, C31, C'20, C'21` of the mismatched-basis states, subject to
//! constraints set by the mismatched-basis click probabilities.

mod region;
mod search;

use serde::{Deserialize, Serialize};

use crate::channel::gain_basis0;
use crate::error::{Error, Result};
use crate::stats::{ConditionalStats, RequiredEntries, StatsIntervals};

pub(crate) use region::{ConvexRegion, PairConstraint};
pub use search::IncumbentRecord;

/// Products below this are evaluated under both adjacent cases of the objective.
pub const NEAR_ZERO: f64 = 1e-12;

/// Default absolute tolerance for [`ConditionalStats::is_symmetric_case`] in [`key_rate_with`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub c_max: f64,
    pub coarse_grid: usize,
    pub refine_rounds: usize,
    pub refine_shrink: f64,
    pub multistarts: usize,
    pub feasibility_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            c_max: 10.0,
            coarse_grid: 41,
            refine_rounds: 4,
            refine_shrink: 0.2,
            multistarts: 32,
            feasibility_tol: 1e-9,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::param("c_max", format!("{} must be positive and finite", self.c_max)));
        }
        if self.coarse_grid < 3 {
            return Err(Error::param("coarse_grid", format!("{} must be at least 3", self.coarse_grid)));
        }
        if self.refine_rounds == 0 {
            return Err(Error::param("refine_rounds", "must be positive"));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(Error::param("refine_shrink", format!("{} must lie in (0, 1)", self.refine_shrink)));
        }
        if self.multistarts == 0 {
            return Err(Error::param("multistarts", "must be positive"));
        }
        if !(self.feasibility_tol > 0.0 && self.feasibility_tol.is_finite()) {
            return Err(Error::param("feasibility_tol", "must be positive"));
        }
        Ok(())
    }

    /// Width of one coarse grid cell.
    pub fn cell(&self) -> f64 {
        self.c_max / (self.coarse_grid - 1) as f64
    }
}

/// Search diagnostics, serializable as a JSON block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub history: Vec<IncumbentRecord>,
    pub boundary_hit: bool,
    pub feasible_points: u64,
    pub evaluations: u64,
    /// Objective maximum before clamping to `[0, 1]`.
    pub raw_max: f64,
}

/// Result of one constrained maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonOutcome {
    pub epsilon: f64,
    pub argmax: [f64; 4],
    pub boundary_hit: bool,
    pub diagnostics: OptimizerDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityResult {
    pub e_b: f64,
    pub epsilon: f64,
    pub e_p: f64,
    pub gain: f64,
    pub rate_per_sifted_bit: f64,
    pub rate_per_pulse: f64,
    pub argmax: [f64; 4],
    pub boundary_hit: bool,
    /// `1 - H(e_b) - H(e_p)` before clamping at 0.
    pub raw_rate_per_sifted_bit: f64,
    pub symmetric: bool,
    pub diagnostics: OptimizerDiagnostics,
}

/// Base-2 binary entropy.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param("x", format!("{x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

fn bit_error_rate_of(r: &RequiredEntries) -> Result<f64> {
    let d = r.basis0_sum();
    if d <= 0.0 {
        return Err(Error::NoClicks);
    }
    Ok((r.p01 + r.p10) / d)
}

/// Basis-0 bit error rate `(p(1|0,1) + p(1|1,0)) / (p(1|0,0) + p(1|1,1) + p(1|0,1) + p(1|1,0))`.
pub fn bit_error_rate(stats: &ConditionalStats) -> Result<f64> {
    bit_error_rate_of(&stats.required()?)
}

/// Coefficients of the four-case objective.
///
/// The general form is
/// `(s32 + s01 C30 C'21 + s10 C31 C'20 + s_k |P - Q|)^2 / (denom * R^2)`
/// with `P = C30 C'20`, `Q = C31 C'21`, `(s_k, R) = (s11, P)` or `(s00, Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Objective {
    pub s32: f64,
    pub s01: f64,
    pub s10: f64,
    pub s11: f64,
    pub s00: f64,
    pub denom: f64,
    pub one_minus_eb: f64,
}

impl Objective {
    fn general(r: &RequiredEntries) -> Result<Self> {
        let eb = bit_error_rate_of(r)?;
        Ok(Self {
            s32: r.p32.sqrt(),
            s01: r.p01.sqrt(),
            s10: r.p10.sqrt(),
            s11: r.p11.sqrt(),
            s00: r.p00.sqrt(),
            denom: 2.0 * r.basis0_sum(),
            one_minus_eb: 1.0 - eb,
        })
    }

    fn symmetric(r: &RequiredEntries) -> Result<Self> {
        let eb = bit_error_rate_of(r)?;
        let norm = r.p00 + r.p01;
        let eb_prime = r.p32 / norm;
        Ok(Self {
            s32: eb_prime.sqrt(),
            s01: eb.sqrt(),
            s10: eb.sqrt(),
            s11: (1.0 - eb).sqrt(),
            s00: (1.0 - eb).sqrt(),
            denom: 4.0,
            one_minus_eb: 1.0 - eb,
        })
    }

    /// Widest-reading objective over an interval table: numerators at their upper
    /// ends, denominator at its lower end, `e_b` at its lower end.
    pub(crate) fn interval(iv: &StatsIntervals) -> Result<Self> {
        let (lo, hi) = (&iv.lo, &iv.hi);
        let d_lo = lo[0][0] + lo[1][1] + lo[0][1] + lo[1][0];
        if d_lo <= 0.0 {
            return Err(Error::NoClicks);
        }
        let err_lo = lo[0][1] + lo[1][0];
        let eb_lo = err_lo / (err_lo + hi[0][0] + hi[1][1]);
        Ok(Self {
            s32: hi[3][2].sqrt(),
            s01: hi[0][1].sqrt(),
            s10: hi[1][0].sqrt(),
            s11: hi[1][1].sqrt(),
            s00: hi[0][0].sqrt(),
            denom: 2.0 * d_lo,
            one_minus_eb: 1.0 - eb_lo,
        })
    }

    fn ratio(num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Value under a forced case: `p_zero` / `q_zero` select which products count as zero.
    fn case_value(&self, c: [f64; 4], p_zero: bool, q_zero: bool) -> f64 {
        let [c30, c31, cp20, cp21] = c;
        let p = c30 * cp20;
        let q = c31 * cp21;
        let base = self.s32 + self.s01 * c30 * cp21 + self.s10 * c31 * cp20;
        let diff = (p - q).abs();
        let f1 = || Self::ratio((base + self.s11 * diff).powi(2), self.denom * p * p);
        let f2 = || Self::ratio((base + self.s00 * diff).powi(2), self.denom * q * q);
        match (p_zero, q_zero) {
            (false, false) => f1().min(f2()),
            (false, true) => f1(),
            (true, false) => f2(),
            (true, true) => self.one_minus_eb,
        }
    }

    pub(crate) fn value(&self, c: [f64; 4]) -> f64 {
        let p = c[0] * c[2];
        let q = c[1] * c[3];
        let options = |x: f64| -> &'static [bool] {
            if x == 0.0 {
                &[true]
            } else if x.abs() < NEAR_ZERO {
                &[false, true]
            } else {
                &[false]
            }
        };
        let mut best = f64::NEG_INFINITY;
        for &pz in options(p) {
            for &qz in options(q) {
                best = best.max(self.case_value(c, pz, qz));
            }
        }
        best
    }
}

/// The four-case objective at `(C30, C31, C'20, C'21)`.
pub fn f_objective(c30: f64, c31: f64, cp20: f64, cp21: f64, stats: &ConditionalStats) -> Result<f64> {
    let c = [c30, c31, cp20, cp21];
    if c.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("coefficients", "must be non-negative"));
    }
    Ok(Objective::general(&stats.required()?)?.value(c))
}

fn general_constraints(r: &RequiredEntries) -> ([PairConstraint; 2], [PairConstraint; 2]) {
    let s = |p: f64| p.sqrt();
    (
        [
            PairConstraint::point(s(r.p00), s(r.p10), r.p30),
            PairConstraint::point(s(r.p01), s(r.p11), r.p31),
        ],
        [
            PairConstraint::point(s(r.p00), s(r.p01), r.p02),
            PairConstraint::point(s(r.p10), s(r.p11), r.p12),
        ],
    )
}

fn symmetric_constraints(eb: f64) -> ([PairConstraint; 2], [PairConstraint; 2]) {
    let (a, b) = ((1.0 - eb).sqrt(), eb.sqrt());
    let pair = [PairConstraint::point(a, b, 0.5), PairConstraint::point(b, a, 0.5)];
    (pair, pair)
}

pub(crate) fn interval_constraints(iv: &StatsIntervals) -> ([PairConstraint; 2], [PairConstraint; 2]) {
    let (lo, hi) = (&iv.lo, &iv.hi);
    let pc = |a: (usize, usize), b: (usize, usize), t: (usize, usize)| PairConstraint {
        a: (lo[a.0][a.1].sqrt(), hi[a.0][a.1].sqrt()),
        b: (lo[b.0][b.1].sqrt(), hi[b.0][b.1].sqrt()),
        target: (lo[t.0][t.1], hi[t.0][t.1]),
    };
    (
        [pc((0, 0), (1, 0), (3, 0)), pc((0, 1), (1, 1), (3, 1))],
        [pc((0, 0), (0, 1), (0, 2)), pc((1, 0), (1, 1), (1, 2))],
    )
}

/// Slack pairs `(lower, upper)` of the four constraints at a point.
///
/// Order: `(C30, C31)` against `p(1|3,0)` and `p(1|3,1)`, then `(C'20, C'21)` against
/// `p(1|0,2)` and `p(1|1,2)`. A point is feasible iff all eight are `>= -tol`.
pub fn constraints_residuals(
    c30: f64,
    c31: f64,
    cp20: f64,
    cp21: f64,
    stats: &ConditionalStats,
) -> Result<[(f64, f64); 4]> {
    let (a, b) = general_constraints(&stats.required()?);
    Ok([
        a[0].residuals(c30, c31),
        a[1].residuals(c30, c31),
        b[0].residuals(cp20, cp21),
        b[1].residuals(cp20, cp21),
    ])
}

/// Whether every constraint slack is at least `-tol`.
pub fn is_feasible(c: [f64; 4], stats: &ConditionalStats, tol: f64) -> Result<bool> {
    let res = constraints_residuals(c[0], c[1], c[2], c[3], stats)?;
    Ok(res.iter().all(|(lo, hi)| *lo >= -tol && *hi >= -tol))
}

pub(crate) fn maximize(
    objective: &Objective,
    constraints: &([PairConstraint; 2], [PairConstraint; 2]),
    cfg: &OptimizerConfig,
) -> Result<EpsilonOutcome> {
    cfg.validate()?;
    let infeasible = || Error::Infeasible { c_max: cfg.c_max };
    let build = |pcs: &[PairConstraint]| {
        [1e-13, 1e-11, 0.1 * cfg.feasibility_tol]
            .iter()
            .find_map(|&slack| ConvexRegion::from_constraints(pcs, cfg.c_max, slack))
    };
    let region_a = build(&constraints.0).ok_or_else(infeasible)?;
    let region_b = build(&constraints.1).ok_or_else(infeasible)?;
    let problem = search::Problem {
        region_a: &region_a,
        region_b: &region_b,
        constraints_a: &constraints.0,
        constraints_b: &constraints.1,
        tol: cfg.feasibility_tol,
        objective: |c: [f64; 4]| objective.value(c),
    };
    let out = problem.maximize(cfg).ok_or_else(infeasible)?;
    let edge = cfg.c_max - cfg.cell();
    let boundary_hit = out.argmax.iter().any(|&v| v >= edge);
    Ok(EpsilonOutcome {
        epsilon: out.value.clamp(0.0, 1.0),
        argmax: out.argmax,
        boundary_hit,
        diagnostics: OptimizerDiagnostics {
            history: out.history,
            boundary_hit,
            feasible_points: out.feasible_points,
            evaluations: out.evaluations,
            raw_max: out.value,
        },
    })
}

/// Maximum of [`f_objective`] over the feasible coefficients in `[0, c_max]^4`.
pub fn epsilon_max(stats: &ConditionalStats, cfg: &OptimizerConfig) -> Result<EpsilonOutcome> {
    let r = stats.required()?;
    let obj = Objective::general(&r)?;
    maximize(&obj, &general_constraints(&r), cfg)
}

/// Simplified maximization for tables meeting the symmetric conditions within `tol`.
pub fn epsilon_max_symmetric(stats: &ConditionalStats, cfg: &OptimizerConfig, tol: f64) -> Result<EpsilonOutcome> {
    let r = stats.required()?;
    if !stats.is_symmetric_case(tol) {
        return Err(Error::NotSymmetric { tol });
    }
    let obj = Objective::symmetric(&r)?;
    maximize(&obj, &symmetric_constraints(bit_error_rate_of(&r)?), cfg)
}

/// `min(e_b + epsilon, 1/2)`.
pub fn phase_error_bound(e_b: f64, epsilon: f64) -> f64 {
    (e_b + epsilon).min(0.5)
}

/// `1 - H(e_b) - H(e_p)`, unclamped.
pub fn raw_rate(e_b: f64, e_p: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(e_b)? - binary_entropy(e_p)?)
}

/// Perfect-source reference `1 - 2 H(e_b)` per sifted bit, clamped at 0.
pub fn trusted_source_rate(e_b: f64) -> Result<f64> {
    Ok((1.0 - 2.0 * binary_entropy(e_b)?).max(0.0))
}

pub(crate) fn assemble(e_b: f64, gain: f64, eps: EpsilonOutcome, symmetric: bool) -> Result<SecurityResult> {
    let e_p = phase_error_bound(e_b, eps.epsilon);
    let raw = raw_rate(e_b.min(1.0), e_p)?;
    let rate = raw.max(0.0);
    Ok(SecurityResult {
        e_b,
        epsilon: eps.epsilon,
        e_p,
        gain,
        rate_per_sifted_bit: rate,
        rate_per_pulse: gain * rate,
        argmax: eps.argmax,
        boundary_hit: eps.boundary_hit,
        raw_rate_per_sifted_bit: raw,
        symmetric,
        diagnostics: eps.diagnostics,
    })
}

/// Key rate using the general maximization.
pub fn key_rate(stats: &ConditionalStats, cfg: &OptimizerConfig) -> Result<SecurityResult> {
    key_rate_with(stats, cfg, false)
}

/// Key rate; with `prefer_symmetric`, tables meeting the symmetric conditions
/// (within [`SYMMETRY_TOL`]) use the simplified maximization.
pub fn key_rate_with(stats: &ConditionalStats, cfg: &OptimizerConfig, prefer_symmetric: bool) -> Result<SecurityResult> {
    let e_b = bit_error_rate(stats)?;
    let gain = gain_basis0(stats)?;
    let symmetric = prefer_symmetric && stats.is_symmetric_case(SYMMETRY_TOL);
    let eps = if symmetric {
        epsilon_max_symmetric(stats, cfg, SYMMETRY_TOL)?
    } else {
        epsilon_max(stats, cfg)?
    };
    assemble(e_b, gain, eps, symmetric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ideal() -> ConditionalStats {
        let mut p1 = [[0.25; 4]; 4];
        p1[0][0] = 0.5;
        p1[1][1] = 0.5;
        p1[0][1] = 0.0;
        p1[1][0] = 0.0;
        p1[3][2] = 0.0;
        p1[2][3] = 0.0;
        ConditionalStats::full(p1)
    }

    fn collapse() -> ConditionalStats {
        let mut s = ideal();
        s.set(3, 0, 0.0);
        s.set(1, 2, 0.0);
        s.set(3, 1, 0.5);
        s.set(0, 2, 0.5);
        s
    }

    fn quarter() -> ConditionalStats {
        ConditionalStats::full([[0.25; 4]; 4])
    }

    fn symmetric_noisy(eb: f64, eb_prime: f64) -> ConditionalStats {
        // Normalized so that p(1|0,0) + p(1|0,1) = 1/2.
        let s = 0.5;
        let mut t = ConditionalStats::empty();
        t.set(0, 0, s * (1.0 - eb));
        t.set(1, 1, s * (1.0 - eb));
        t.set(0, 1, s * eb);
        t.set(1, 0, s * eb);
        for (x, y) in [(3, 0), (3, 1), (0, 2), (1, 2)] {
            t.set(x, y, s / 2.0);
        }
        t.set(3, 2, s * eb_prime);
        t
    }

    fn fast() -> OptimizerConfig {
        OptimizerConfig {
            coarse_grid: 21,
            multistarts: 8,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-12);
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn bit_error_rate_values() {
        assert_eq!(bit_error_rate(&ideal()).unwrap(), 0.0);
        let mut t = quarter();
        t.set(0, 0, 0.45);
        t.set(1, 1, 0.45);
        t.set(0, 1, 0.05);
        t.set(1, 0, 0.05);
        assert!((bit_error_rate(&t).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(bit_error_rate(&quarter()).unwrap(), 0.5);
        let mut dark = quarter();
        for (x, y) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            dark.set(x, y, 0.0);
        }
        assert_eq!(bit_error_rate(&dark), Err(Error::NoClicks));
    }

    #[test]
    fn objective_cases() {
        let h = FRAC_1_SQRT_2;
        assert!(f_objective(h, h, h, h, &ideal()).unwrap().abs() < 1e-30);
        assert_eq!(f_objective(0.0, 0.0, 0.0, 0.0, &quarter()).unwrap(), 0.5);
        assert_eq!(f_objective(0.0, 1.0, 1.0, 0.0, &collapse()).unwrap(), 1.0);
        assert!(f_objective(-1.0, 0.0, 0.0, 0.0, &quarter()).is_err());
    }

    #[test]
    fn near_zero_products_take_larger_case() {
        let t = quarter();
        // P tiny but nonzero, Q = 0: the doubly-zero case 1 - e_b competes with f1.
        let v = f_objective(1e-7, 0.0, 1e-7, 1.0, &t).unwrap();
        assert!(v >= 0.5);
    }

    #[test]
    fn residual_examples() {
        let h = FRAC_1_SQRT_2;
        for (lo, hi) in constraints_residuals(h, h, h, h, &ideal()).unwrap() {
            assert!(lo.abs() < 1e-15 && hi.abs() < 1e-15);
        }
        let r = constraints_residuals(1.0, 1.0, 1.0, 1.0, &ideal()).unwrap();
        assert!((r[0].0 - (0.25 - 0.5)).abs() < 1e-15);
        assert!(is_feasible([h, h, h, h], &quarter(), 1e-9).unwrap());
        assert!(!is_feasible([1.0; 4], &ideal(), 1e-9).unwrap());
    }

    #[test]
    fn ideal_epsilon_is_zero() {
        let out = epsilon_max(&ideal(), &fast()).unwrap();
        assert!(out.epsilon < 1e-9, "{}", out.epsilon);
        for v in out.argmax {
            assert!((v - FRAC_1_SQRT_2).abs() < 1e-9);
        }
        assert!(!out.boundary_hit);
    }

    #[test]
    fn collapse_epsilon_is_one() {
        let out = epsilon_max(&collapse(), &fast()).unwrap();
        assert_eq!(out.epsilon, 1.0);
        let expect = [0.0, 1.0, 1.0, 0.0];
        for (v, e) in out.argmax.iter().zip(expect) {
            assert!((v - e).abs() < 1e-6, "{:?}", out.argmax);
        }
    }

    #[test]
    fn infeasible_table_is_reported() {
        let mut t = ideal();
        // p(1|3,0) above what any (C30, C31) in the box can reach is impossible
        // only with a tiny box.
        t.set(3, 0, 1.0);
        let cfg = OptimizerConfig { c_max: 1.0, ..fast() };
        assert_eq!(epsilon_max(&t, &cfg).unwrap_err(), Error::Infeasible { c_max: 1.0 });
    }

    #[test]
    fn symmetric_matches_general() {
        let t = symmetric_noisy(0.02, 0.02);
        assert!(t.is_symmetric_case(1e-12));
        let g = epsilon_max(&t, &fast()).unwrap();
        let s = epsilon_max_symmetric(&t, &fast(), 1e-12).unwrap();
        assert!((g.epsilon - s.epsilon).abs() < 1e-3, "{} vs {}", g.epsilon, s.epsilon);
        let s0 = epsilon_max_symmetric(&ideal(), &fast(), 1e-12).unwrap();
        assert!(s0.epsilon < 1e-9);
        let half = epsilon_max_symmetric(&symmetric_noisy(0.5, 0.5), &fast(), 1e-12).unwrap();
        assert!(half.epsilon <= 1.0);
    }

    #[test]
    fn symmetric_rejects_asymmetric_table() {
        assert_eq!(
            epsilon_max_symmetric(&collapse(), &fast(), 1e-12).unwrap_err(),
            Error::NotSymmetric { tol: 1e-12 }
        );
    }

    #[test]
    fn phase_error_examples() {
        assert_eq!(phase_error_bound(0.0, 0.0), 0.0);
        assert_eq!(phase_error_bound(0.0, 1.0), 0.5);
        assert!((phase_error_bound(0.05, 0.1) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn key_rate_examples() {
        let r = key_rate(&ideal(), &fast()).unwrap();
        assert_eq!(r.e_b, 0.0);
        assert!(r.epsilon < 1e-9);
        assert!((r.rate_per_sifted_bit - 1.0).abs() < 1e-9);
        assert!((r.rate_per_pulse - 0.25).abs() < 1e-9);
        let c = key_rate(&collapse(), &fast()).unwrap();
        assert_eq!(c.rate_per_sifted_bit, 0.0);
        assert!(c.raw_rate_per_sifted_bit <= 0.0);
    }

    #[test]
    fn diagnostics_serialize() {
        let out = epsilon_max(&quarter(), &fast()).unwrap();
        let json = serde_json::to_string(&out.diagnostics).unwrap();
        assert!(json.contains("history") && json.contains("feasible_points"));
        assert_eq!(out.diagnostics.history.last().unwrap().stage, "polish");
    }
}
