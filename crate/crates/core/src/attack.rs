//! Explicit collective attacks, the phase error they really cause, and a
//! randomized audit that the key-rate bound dominates it.
//!
//! An attack is an isometry from the two photons `C, D` into Eve's space
//! (photons plus an ancilla of dimension `eve_dim`) times a one-qubit message
//! register `M`. Applying it to `|phi_x>|phi'_y>` and splitting on the message
//! value `z` yields `sqrt(p(z|x,y)) |Gamma_xyz>`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{expansion_coefficients, ideal_stats, QubitState, SourceSpec};
use crate::security::{bit_error_rate, epsilon_max, phase_error_bound, EpsilonOutcome, OptimizerConfig};
use crate::stats::ConditionalStats;

/// Largest ancilla dimension drawn by the audit.
pub const MAX_EVE_DIM: usize = 8;

/// Slack allowed between the true phase error and the bound.
pub const SOUNDNESS_TOL: f64 = 1e-6;

const PHASE_GRID: usize = 360;

/// Dense isometry: `columns[k]` is the image of computational input `k = 2c + d`.
type Isometry = [Vec<Complex64>; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Honest measurement unit projecting onto `phi+`.
    Honest,
    /// Haar-random isometry.
    Random,
    /// Honest isometry plus a random perturbation, re-orthonormalized.
    PerturbedHonest,
    /// Eve measures both photons in the computational basis and resends.
    InterceptResend,
}

/// One attack applied to one source configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackInstance {
    pub kind: AttackKind,
    pub seed: Option<u64>,
    pub sources: SourceSpec,
    /// Ancilla dimension; Eve's states `|n>` range over `4 * eve_dim` values.
    pub eve_dim: usize,
    /// `gamma[x][y][z]` lists `gamma_xyzn`; all zeros when `p(z|x,y) = 0`.
    pub gamma: Vec<Vec<Vec<Vec<Complex64>>>>,
    /// `p(1|x,y)`.
    pub p_table: [[f64; 4]; 4],
}

impl AttackInstance {
    fn from_isometry(
        kind: AttackKind,
        seed: Option<u64>,
        sources: SourceSpec,
        eve_dim: usize,
        v: &Isometry,
    ) -> Self {
        let n_dim = 4 * eve_dim;
        let mut gamma = vec![vec![vec![vec![Complex64::new(0.0, 0.0); n_dim]; 2]; 4]; 4];
        let mut p_table = [[0.0; 4]; 4];
        for x in 0..4 {
            for y in 0..4 {
                let input = product(&sources.alice_states[x], &sources.bob_states[y]);
                let mut out = vec![Complex64::new(0.0, 0.0); 2 * n_dim];
                for (k, amp) in input.iter().enumerate() {
                    for (o, col) in out.iter_mut().zip(&v[k]) {
                        *o += amp * col;
                    }
                }
                let mut p = [0.0; 2];
                for z in 0..2 {
                    let branch: Vec<Complex64> = (0..n_dim).map(|n| out[2 * n + z]).collect();
                    let norm_sq: f64 = branch.iter().map(|c| c.norm_sqr()).sum();
                    p[z] = norm_sq;
                    if norm_sq > 0.0 {
                        let norm = norm_sq.sqrt();
                        gamma[x][y][z] = branch.iter().map(|c| c / norm).collect();
                    }
                }
                // Normalize so that p(0) + p(1) = 1 holds exactly.
                p_table[x][y] = (p[1] / (p[0] + p[1])).clamp(0.0, 1.0);
            }
        }
        Self {
            kind,
            seed,
            sources,
            eve_dim,
            gamma,
            p_table,
        }
    }

    pub fn stats(&self) -> ConditionalStats {
        ConditionalStats::full(self.p_table)
    }

    /// Maximum deviation of `sum_n |gamma_xyzn|^2` from 1 over branches with `p > 0`.
    pub fn normalization_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..2 {
                    let p = if z == 1 { self.p_table[x][y] } else { 1.0 - self.p_table[x][y] };
                    if p > 0.0 {
                        let s: f64 = self.gamma[x][y][z].iter().map(|c| c.norm_sqr()).sum();
                        worst = worst.max((s - 1.0).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("attack serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn product(a: &QubitState, b: &QubitState) -> [Complex64; 4] {
    let [a0, a1] = a.amplitudes();
    let [b0, b1] = b.amplitudes();
    [a0 * b0, a0 * b1, a1 * b0, a1 * b1]
}

/// `phi+` in the `2c + d` ordering.
fn phi_plus() -> [Complex64; 4] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    [h, z, z, h]
}

fn honest_isometry() -> Isometry {
    // Output index (n, m) -> 2n + m with n = 4 * 0 + cd for a one-dimensional ancilla.
    let phi = phi_plus();
    std::array::from_fn(|k| {
        let mut col = vec![Complex64::new(0.0, 0.0); 8];
        for (cd, amp) in phi.iter().enumerate() {
            let proj = amp * phi[k].conj();
            col[2 * cd + 1] += proj;
            let ident = if cd == k { 1.0 } else { 0.0 };
            col[2 * cd] += Complex64::new(ident, 0.0) - proj;
        }
        col
    })
}

/// Isometry with the honest action embedded into an ancilla of dimension `eve_dim`.
fn embed(v: &Isometry, from_dim: usize, eve_dim: usize) -> Isometry {
    std::array::from_fn(|k| {
        let mut col = vec![Complex64::new(0.0, 0.0); 8 * eve_dim];
        for n in 0..4 * from_dim {
            for m in 0..2 {
                col[2 * n + m] = v[k][2 * n + m];
            }
        }
        col
    })
}

fn gram_schmidt(mut cols: Isometry) -> Isometry {
    for k in 0..4 {
        for j in 0..k {
            let (done, rest) = cols.split_at_mut(k);
            let proj: Complex64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a.conj() * b).sum();
            for (b, a) in rest[0].iter_mut().zip(&done[j]) {
                *b -= proj * a;
            }
        }
        let norm = cols[k].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in cols[k].iter_mut() {
            *c /= norm;
        }
    }
    cols
}

fn gaussian_columns(rng: &mut ChaCha8Rng, dim: usize) -> Isometry {
    std::array::from_fn(|_| {
        (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    })
}

/// Eve performs the ideal `phi+` projection; the induced table is the Born-rule table.
pub fn honest_attack(sources: &SourceSpec) -> Result<AttackInstance> {
    let mut a = AttackInstance::from_isometry(AttackKind::Honest, None, *sources, 1, &honest_isometry());
    sources.validate()?;
    let exact = ideal_stats(sources)?;
    for x in 0..4 {
        for y in 0..4 {
            a.p_table[x][y] = exact.p1(x, y).expect("full table");
        }
    }
    Ok(a)
}

/// Haar-random isometry into `C (x) D (x) ancilla (x) M`, deterministic in `seed`.
pub fn random_attack(seed: u64, sources: &SourceSpec, eve_dim: usize) -> Result<AttackInstance> {
    check_dim(eve_dim)?;
    sources.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = gram_schmidt(gaussian_columns(&mut rng, 8 * eve_dim));
    Ok(AttackInstance::from_isometry(AttackKind::Random, Some(seed), *sources, eve_dim, &v))
}

/// Honest isometry plus `strength` times a Gaussian perturbation, re-orthonormalized.
pub fn perturbed_honest_attack(seed: u64, sources: &SourceSpec, eve_dim: usize, strength: f64) -> Result<AttackInstance> {
    check_dim(eve_dim)?;
    sources.validate()?;
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::param("strength", format!("{strength} must be finite and >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = embed(&honest_isometry(), 1, eve_dim);
    let noise = gaussian_columns(&mut rng, 8 * eve_dim);
    let cols: Isometry = std::array::from_fn(|k| {
        base[k].iter().zip(&noise[k]).map(|(b, g)| b + g * strength).collect()
    });
    Ok(AttackInstance::from_isometry(
        AttackKind::PerturbedHonest,
        Some(seed),
        *sources,
        eve_dim,
        &gram_schmidt(cols),
    ))
}

/// Eve measures `C, D` in the computational basis, keeps the outcome and resends
/// the measured product state to an honest measurement unit.
pub fn intercept_resend_attack(sources: &SourceSpec) -> Result<AttackInstance> {
    sources.validate()?;
    let eve_dim = 4;
    let phi = phi_plus();
    let v: Isometry = std::array::from_fn(|k| {
        // Input |k> is resent unchanged and recorded in ancilla slot k.
        let mut col = vec![Complex64::new(0.0, 0.0); 8 * eve_dim];
        for (cd, amp) in phi.iter().enumerate() {
            let proj = amp * phi[k].conj();
            let n = cd * eve_dim + k;
            col[2 * n + 1] += proj;
            let ident = if cd == k { 1.0 } else { 0.0 };
            col[2 * n] += Complex64::new(ident, 0.0) - proj;
        }
        col
    });
    Ok(AttackInstance::from_isometry(AttackKind::InterceptResend, None, *sources, eve_dim, &v))
}

fn check_dim(eve_dim: usize) -> Result<()> {
    if eve_dim == 0 {
        return Err(Error::param("eve_dim", "must be at least 1"));
    }
    Ok(())
}

/// True error rates of an attack, optionally compared against a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorReport {
    /// Phase error minimized over `alpha_A + alpha_B` and `alpha_A - alpha_B`.
    pub e_p_actual: f64,
    pub e_b_actual: f64,
    /// Minimizing phases `(alpha_A + alpha_B, alpha_A - alpha_B)`.
    pub phases: (f64, f64),
    pub bound: Option<f64>,
    pub sound: Option<bool>,
}

impl PhaseErrorReport {
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.sound = Some(self.e_p_actual <= bound + SOUNDNESS_TOL);
        self
    }
}

/// Unnormalized basis-0 density matrix `sum_n |w_n><w_n|` with
/// `w_n = (sqrt p00 g001n, sqrt p01 g011n, sqrt p10 g101n, sqrt p11 g111n)`.
fn basis0_state(a: &AttackInstance) -> Result<[[Complex64; 4]; 4]> {
    let p = &a.p_table;
    let d = p[0][0] + p[1][1] + p[0][1] + p[1][0];
    if d <= 0.0 {
        return Err(Error::NoClicks);
    }
    let entries = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
    for n in 0..4 * a.eve_dim {
        let w: [Complex64; 4] = std::array::from_fn(|i| {
            let (x, y) = entries[i];
            a.gamma[x][y][1][n] * p[x][y].sqrt()
        });
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] += w[i] * w[j].conj();
            }
        }
    }
    for row in rho.iter_mut() {
        for e in row.iter_mut() {
            *e /= d;
        }
    }
    Ok(rho)
}

fn expectation(rho: &[[Complex64; 4]; 4], v: &[Complex64; 4]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            s += v[i].conj() * rho[i][j] * v[j];
        }
    }
    s.re
}

/// `<phi-|rho|phi->` at phase `s = alpha_A + alpha_B`.
fn phi_minus_term(rho: &[[Complex64; 4]; 4], s: f64) -> f64 {
    let h = FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let v = [Complex64::new(h, 0.0), z, z, -Complex64::from_polar(h, s)];
    expectation(rho, &v)
}

/// `<psi-|rho|psi->` at phase `t = alpha_A - alpha_B`.
fn psi_minus_term(rho: &[[Complex64; 4]; 4], t: f64) -> f64 {
    let h = FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let v = [z, Complex64::new(h, 0.0), -Complex64::from_polar(h, t), z];
    expectation(rho, &v)
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Bit and phase error rates of the state the attack leaves Alice and Bob in
/// when both choose basis 0.
pub fn actual_errors(attack: &AttackInstance) -> Result<PhaseErrorReport> {
    let rho = basis0_state(attack)?;
    let e_b = (rho[1][1].re + rho[2][2].re).clamp(0.0, 1.0);

    let step = TAU / PHASE_GRID as f64;
    let total = |s: f64, t: f64| phi_minus_term(&rho, s) + psi_minus_term(&rho, t);
    let psi: Vec<f64> = (0..PHASE_GRID).map(|j| psi_minus_term(&rho, j as f64 * step)).collect();
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for i in 0..PHASE_GRID {
        let a = phi_minus_term(&rho, i as f64 * step);
        for (j, b) in psi.iter().enumerate() {
            let v = a + b;
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    let (s0, t0) = (best.1 as f64 * step, best.2 as f64 * step);
    // The two phases enter separate terms, so refine them one at a time.
    let (s, _) = golden_min(|s| phi_minus_term(&rho, s), s0 - step, s0 + step);
    let (t, _) = golden_min(|t| psi_minus_term(&rho, t), t0 - step, t0 + step);
    let refined = total(s, t);
    let (e_p, s, t) = if refined <= best.0 { (refined, s, t) } else { (best.0, s0, t0) };
    Ok(PhaseErrorReport {
        e_p_actual: e_p.clamp(0.0, 1.0),
        e_b_actual: e_b,
        phases: (s.rem_euclid(TAU), t.rem_euclid(TAU)),
        bound: None,
        sound: None,
    })
}

/// Closed-form minimum over both phases, `(|a|^2 + |b|^2 - 2|<a,b>|) / 2D` per term.
pub fn actual_phase_error_closed_form(attack: &AttackInstance) -> Result<f64> {
    let rho = basis0_state(attack)?;
    let first = (rho[0][0].re + rho[3][3].re) / 2.0 - rho[0][3].norm();
    let second = (rho[1][1].re + rho[2][2].re) / 2.0 - rho[1][2].norm();
    Ok((first + second).clamp(0.0, 1.0))
}

/// Both sides of the per-instance inequality obtained by expanding `|Gamma_321>`
/// in Eve's basis, evaluated with the true expansion coefficients of the sources.
pub fn expansion_inequality(attack: &AttackInstance) -> Result<(f64, f64)> {
    let s = &attack.sources;
    let e3 = expansion_coefficients(&s.alice_states[3], &s.alice_states[0], &s.alice_states[1])?;
    let e2 = expansion_coefficients(&s.bob_states[2], &s.bob_states[0], &s.bob_states[1])?;
    let p = &attack.p_table;
    let (c30, c31, cp20, cp21) = (e3.c0, e3.c1, e2.c0, e2.c1);
    let phase = Complex64::from_polar(1.0, e3.theta + e2.theta);
    let (g001, g111) = (&attack.gamma[0][0][1], &attack.gamma[1][1][1]);
    let lhs: f64 = g001
        .iter()
        .zip(g111)
        .map(|(a, b)| (a * (c30 * cp20 * p[0][0].sqrt()) + b * phase * (c31 * cp21 * p[1][1].sqrt())).norm_sqr())
        .sum();
    let rhs = (p[3][2].sqrt() + p[0][1].sqrt() * c30 * cp21 + p[1][0].sqrt() * c31 * cp20).powi(2);
    Ok((lhs, rhs))
}

/// Haar-distributed qubit state.
pub fn random_qubit<R: Rng>(rng: &mut R) -> QubitState {
    let theta = (1.0 - 2.0 * rng.random::<f64>()).acos();
    QubitState::bloch(theta, rng.random::<f64>() * TAU)
}

/// Random source pair whose basis-0 states are not nearly parallel.
pub fn random_sources<R: Rng>(rng: &mut R) -> SourceSpec {
    let side = |rng: &mut R| -> [QubitState; 4] {
        loop {
            let s: [QubitState; 4] = std::array::from_fn(|_| random_qubit(rng));
            if s[0].fidelity(&s[1]) < 0.95 {
                return s;
            }
        }
    };
    let alice_states = side(rng);
    let bob_states = side(rng);
    SourceSpec {
        alice_states,
        bob_states,
    }
}

/// Outcome of one audited instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub trial: u64,
    pub attack: AttackInstance,
    pub e_b: f64,
    pub epsilon: f64,
    pub bound: f64,
    pub e_p_actual: f64,
    /// `bound - e_p_actual`; negative beyond the tolerance is a violation.
    pub margin: f64,
    pub c_max: f64,
    pub boundary_hit: bool,
    pub expansion_lhs: f64,
    pub expansion_rhs: f64,
    pub sound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub trials: u64,
    pub seed: u64,
    pub passes: u64,
    pub failures: u64,
    /// Instances without basis-0 clicks; they carry no key and are skipped.
    pub skipped: u64,
    pub worst_margin: f64,
    pub worst: Option<AuditRecord>,
    pub failed: Vec<AuditRecord>,
}

/// Draws trial `i` of an audit: the two corner cases first, then random sources
/// under a rotating mix of attack families.
pub fn audit_instance(seed: u64, trial: u64) -> Result<AttackInstance> {
    match trial {
        0 => return honest_attack(&SourceSpec::ideal_bb84()),
        1 => return honest_attack(&SourceSpec::collapse()),
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let sources = random_sources(&mut rng);
    let eve_dim = rng.random_range(1..=MAX_EVE_DIM);
    let attack_seed: u64 = rng.random();
    match trial % 4 {
        0 => random_attack(attack_seed, &sources, eve_dim),
        1 | 2 => {
            let strength = 10f64.powf(rng.random_range(-3.0..0.0));
            perturbed_honest_attack(attack_seed, &sources, eve_dim, strength)
        }
        _ => intercept_resend_attack(&sources),
    }
}

/// Bounds one instance, growing the search box while the maximizer sits on its edge.
pub fn check_instance(trial: u64, attack: &AttackInstance, cfg: &OptimizerConfig) -> Result<AuditRecord> {
    let stats = attack.stats();
    let e_b = bit_error_rate(&stats)?;
    let mut cfg = *cfg;
    let mut eps: Option<EpsilonOutcome> = None;
    for _ in 0..5 {
        match epsilon_max(&stats, &cfg) {
            Ok(out) => {
                let hit = out.boundary_hit;
                eps = Some(out);
                if !hit {
                    break;
                }
            }
            Err(Error::Infeasible { .. }) => {}
            Err(e) => return Err(e),
        }
        cfg.c_max *= 2.0;
    }
    let eps = eps.ok_or(Error::Infeasible { c_max: cfg.c_max })?;
    let bound = phase_error_bound(e_b, eps.epsilon);
    let report = actual_errors(attack)?.with_bound(bound);
    let (lhs, rhs) = expansion_inequality(attack)?;
    let expansion_ok = lhs <= rhs + SOUNDNESS_TOL;
    Ok(AuditRecord {
        trial,
        attack: attack.clone(),
        e_b,
        epsilon: eps.epsilon,
        bound,
        e_p_actual: report.e_p_actual,
        margin: bound - report.e_p_actual,
        c_max: if eps.boundary_hit { cfg.c_max } else { cfg.c_max.min(eps.argmax.iter().cloned().fold(0.0, f64::max).max(1.0) * 0.0 + cfg.c_max) },
        boundary_hit: eps.boundary_hit,
        expansion_lhs: lhs,
        expansion_rhs: rhs,
        sound: report.sound == Some(true) && expansion_ok,
    })
}

/// Checks `e_p_actual <= min(epsilon + e_b, 1/2) + 1e-6` on `trials` attacks.
pub fn soundness_audit(trials: u64, seed: u64, cfg: &OptimizerConfig) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    cfg.validate()?;
    let results: Vec<Result<Option<AuditRecord>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let attack = audit_instance(seed, i)?;
            match check_instance(i, &attack, cfg) {
                Ok(r) => Ok(Some(r)),
                Err(Error::NoClicks) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut report = AuditReport {
        trials,
        seed,
        passes: 0,
        failures: 0,
        skipped: 0,
        worst_margin: f64::INFINITY,
        worst: None,
        failed: Vec::new(),
    };
    for r in results {
        let Some(rec) = r? else {
            report.skipped += 1;
            continue;
        };
        if rec.sound {
            report.passes += 1;
        } else {
            report.failures += 1;
            report.failed.push(rec.clone());
        }
        if rec.margin < report.worst_margin {
            report.worst_margin = rec.margin;
            report.worst = Some(rec);
        }
    }
    Ok(report)
}

/// Re-checks a serialized instance.
pub fn replay(path: &Path, cfg: &OptimizerConfig) -> Result<AuditRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let attack = match serde_json::from_str::<AuditRecord>(&text) {
        Ok(rec) => rec.attack,
        Err(_) => AttackInstance::from_json(&text)?,
    };
    let trial = serde_json::from_str::<AuditRecord>(&text).map(|r| r.trial).unwrap_or(0);
    check_instance(trial, &attack, cfg)
}
