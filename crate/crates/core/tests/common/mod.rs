//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use mbqkd::channel::{bb84_stats, loss_db_to_eta, Bb84ChannelParams};
use mbqkd::quantum::{ideal_stats, QubitState, SourceSpec};
use mbqkd::stats::ConditionalStats;
use num_rational::Ratio;

/// Required entries `p(1|x,y)` of a table, read directly.
pub struct Entries {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub p30: f64,
    pub p31: f64,
    pub p02: f64,
    pub p12: f64,
    pub p32: f64,
}

impl Entries {
    pub fn of(s: &ConditionalStats) -> Self {
        let g = |x, y| s.p1(x, y).expect("required entry");
        Self {
            p00: g(0, 0),
            p01: g(0, 1),
            p10: g(1, 0),
            p11: g(1, 1),
            p30: g(3, 0),
            p31: g(3, 1),
            p02: g(0, 2),
            p12: g(1, 2),
            p32: g(3, 2),
        }
    }
}

/// `|p - a x^2 - b y^2| <= 2 sqrt(ab) x y`, written out as in the constraint list.
fn band(p: f64, a: f64, b: f64, x: f64, y: f64, tol: f64) -> bool {
    let mid = p - a * x * x - b * y * y;
    let w = 2.0 * (a * b).sqrt() * x * y;
    mid >= -w - tol && mid <= w + tol
}

pub fn feasible_a(e: &Entries, c30: f64, c31: f64, tol: f64) -> bool {
    band(e.p30, e.p00, e.p10, c30, c31, tol) && band(e.p31, e.p01, e.p11, c30, c31, tol)
}

pub fn feasible_b(e: &Entries, c20: f64, c21: f64, tol: f64) -> bool {
    band(e.p02, e.p00, e.p01, c20, c21, tol) && band(e.p12, e.p10, e.p11, c20, c21, tol)
}

/// Piecewise objective with the `min` of both branches when both products are nonzero.
pub fn objective(e: &Entries, c30: f64, c31: f64, c20: f64, c21: f64) -> f64 {
    let d = e.p00 + e.p11 + e.p01 + e.p10;
    let p = c30 * c20;
    let q = c31 * c21;
    let head = e.p32.sqrt() + e.p01.sqrt() * c30 * c21 + e.p10.sqrt() * c31 * c20;
    let gap = (p - q).abs();
    let f1 = || (head + e.p11.sqrt() * gap).powi(2) / (2.0 * d * p * p);
    let f2 = || (head + e.p00.sqrt() * gap).powi(2) / (2.0 * d * q * q);
    let v = match (p != 0.0, q != 0.0) {
        (true, true) => f1().min(f2()),
        (true, false) => f1(),
        (false, true) => f2(),
        (false, false) => 1.0 - (e.p01 + e.p10) / d,
    };
    v.clamp(0.0, 1.0)
}

/// Dense grid maximum over `[0, c_max]^4` with `n` points per axis.
///
/// Feasibility separates into the `(C30, C31)` and `(C'20, C'21)` pairs, so
/// the two filtered planes are scanned as a product.
pub fn brute_force(stats: &ConditionalStats, c_max: f64, n: usize, tol: f64) -> Option<(f64, [f64; 4])> {
    let e = Entries::of(stats);
    let axis: Vec<f64> = (0..n).map(|i| c_max * i as f64 / (n - 1) as f64).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &x in &axis {
        for &y in &axis {
            if feasible_a(&e, x, y, tol) {
                a.push((x, y));
            }
            if feasible_b(&e, x, y, tol) {
                b.push((x, y));
            }
        }
    }
    let mut best: Option<(f64, [f64; 4])> = None;
    for &(c30, c31) in &a {
        for &(c20, c21) in &b {
            let v = objective(&e, c30, c31, c20, c21);
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, [c30, c31, c20, c21]));
            }
        }
    }
    best
}

/// Brute force followed by a finer grid of half-width one coarse cell around the coarse winner.
pub fn brute_force_two_level(stats: &ConditionalStats, c_max: f64, n: usize, fine: usize, tol: f64) -> Option<f64> {
    let (v0, c) = brute_force(stats, c_max, n, tol)?;
    let e = Entries::of(stats);
    let h = c_max / (n - 1) as f64;
    let ax = |k: usize| -> Vec<f64> {
        let lo = (c[k] - h).max(0.0);
        let hi = (c[k] + h).min(c_max);
        (0..fine).map(|i| lo + (hi - lo) * i as f64 / (fine - 1) as f64).collect()
    };
    let (a0, a1, b0, b1) = (ax(0), ax(1), ax(2), ax(3));
    let mut best = v0;
    for &x in &a0 {
        for &y in &a1 {
            if !feasible_a(&e, x, y, tol) {
                continue;
            }
            for &u in &b0 {
                for &w in &b1 {
                    if feasible_b(&e, u, w, tol) {
                        best = best.max(objective(&e, x, y, u, w));
                    }
                }
            }
        }
    }
    Some(best)
}

/// Tables meeting the symmetric conditions, normalized so `p(1|0,0) + p(1|0,1) = s`.
pub fn symmetric_table(s: f64, eb: f64, eb_prime: f64) -> ConditionalStats {
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

/// Deterministic family of 50 symmetric tables.
pub fn symmetric_family() -> Vec<ConditionalStats> {
    let mut out = Vec::new();
    for i in 0..50 {
        let s = [0.5, 0.25, 0.1, 0.01, 1e-4][i % 5];
        let eb = 0.002 * (i / 5) as f64 + 0.001 * (i % 3) as f64;
        let ebp = 0.003 * ((i * 7) % 10) as f64;
        out.push(symmetric_table(s, eb, ebp));
    }
    out
}

/// Ten noisy tables whose feasible sets have interior: misaligned BB84,
/// symmetric tables and Born-rule tables of tilted sources.
pub fn brute_force_family() -> Vec<(String, ConditionalStats)> {
    // Dark counts well above the figure settings keep the error bands wide
    // enough for a 0.01 lattice to sample them.
    let bb84 = |loss: f64, ang: f64| {
        let p = Bb84ChannelParams::new(loss_db_to_eta(loss).unwrap(), 1e-2, ang, ang, ang).unwrap();
        (format!("bb84 {loss} dB {ang} deg"), bb84_stats(&p).unwrap())
    };
    let tilted = |t: [f64; 4]| {
        let s = SourceSpec::symmetric(t.map(|d: f64| QubitState::real(d.to_radians())));
        (format!("tilted {t:?}"), ideal_stats(&s).unwrap())
    };
    vec![
        bb84(3.0, 0.0),
        bb84(3.0, 6.0),
        bb84(6.0, 9.0),
        ("symmetric eb 0.02".into(), symmetric_table(0.5, 0.02, 0.03)),
        ("symmetric eb 0.05".into(), symmetric_table(0.25, 0.05, 0.01)),
        tilted([0.0, 80.0, 50.0, -40.0]),
        tilted([5.0, 93.0, 40.0, -50.0]),
        tilted([-4.0, 84.0, 48.0, -37.0]),
        tilted([3.0, 87.0, 47.0, -42.0]),
        tilted([0.0, 84.0, 39.0, -44.0]),
    ]
}

/// Exact numbers `a + b sqrt(2)` with rational `a`, `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QSqrt2 {
    pub a: Ratio<i64>,
    pub b: Ratio<i64>,
}

impl QSqrt2 {
    pub fn rational(n: i64, d: i64) -> Self {
        Self {
            a: Ratio::new(n, d),
            b: Ratio::from_integer(0),
        }
    }

    /// `k / sqrt(2)`.
    pub fn over_sqrt2(k: i64) -> Self {
        Self {
            a: Ratio::from_integer(0),
            b: Ratio::new(k, 2),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self {
            a: self.a + o.a,
            b: self.b + o.b,
        }
    }

    pub fn mul(self, o: Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.b * 2,
            b: self.a * o.b + self.b * o.a,
        }
    }

    /// The value as a rational, when the `sqrt(2)` part vanishes.
    pub fn as_rational(self) -> Option<Ratio<i64>> {
        (self.b == Ratio::from_integer(0)).then_some(self.a)
    }
}

/// Real BB84 amplitudes `|0>, |1>, |+>, |->` in `Q(sqrt 2)`.
pub fn bb84_amplitudes() -> [[QSqrt2; 2]; 4] {
    let z = QSqrt2::rational(0, 1);
    let one = QSqrt2::rational(1, 1);
    [
        [one, z],
        [z, one],
        [QSqrt2::over_sqrt2(1), QSqrt2::over_sqrt2(1)],
        [QSqrt2::over_sqrt2(1), QSqrt2::over_sqrt2(-1)],
    ]
}

/// Exact `p(1|x,y) = |<phi+|a_x b_y>|^2 = (a0 b0 + a1 b1)^2 / 2` for real amplitudes.
pub fn exact_bell_table() -> [[Ratio<i64>; 4]; 4] {
    let s = bb84_amplitudes();
    let half = QSqrt2::rational(1, 2);
    let mut out = [[Ratio::from_integer(0); 4]; 4];
    for x in 0..4 {
        for y in 0..4 {
            let amp = s[x][0].mul(s[y][0]).add(s[x][1].mul(s[y][1]));
            out[x][y] = amp.mul(amp).mul(half).as_rational().expect("rational probability");
        }
    }
    out
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
