//! Click-probability models for MDIQKD (four detectors at the measurement unit) and
//! BB84 (loss, dark counts, encoding misalignment).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{QubitState, SourceSpec};
use crate::stats::ConditionalStats;

/// Converts a loss in dB to a transmission efficiency.
pub fn loss_db_to_eta(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(Error::param("loss_db", format!("{loss_db} must be a finite value >= 0")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// MDIQKD channel: per-arm transmission `eta` and per-detector dark-count probability `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdiChannelParams {
    pub eta: f64,
    pub d: f64,
}

impl MdiChannelParams {
    pub fn new(eta: f64, d: f64) -> Result<Self> {
        let p = Self { eta, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("{} outside [0, 1]", self.eta)));
        }
        if !(0.0..1.0).contains(&self.d) {
            return Err(Error::param("d", format!("{} outside [0, 1)", self.d)));
        }
        Ok(())
    }
}

/// BB84 channel: efficiency, dark-count probability and misalignment angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bb84ChannelParams {
    pub eta: f64,
    pub p_d: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Bb84ChannelParams {
    pub fn new(eta: f64, p_d: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        let p = Self { eta, p_d, a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("{} outside [0, 1]", self.eta)));
        }
        if !(0.0..1.0).contains(&self.p_d) {
            return Err(Error::param("p_d", format!("{} outside [0, 1)", self.p_d)));
        }
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !v.is_finite() {
                return Err(Error::param(name, "angle must be finite"));
            }
        }
        Ok(())
    }

    /// Alice's misaligned encodings `|0>`, `sin a|0> + cos a|1>`,
    /// `cos(pi/4+b)|0> + sin(pi/4+b)|1>`, `sin(pi/4+c)|0> - cos(pi/4+c)|1>`.
    pub fn alice_states(&self) -> [QubitState; 4] {
        let (a, b, c) = (self.a.to_radians(), self.b.to_radians(), self.c.to_radians());
        let q = std::f64::consts::FRAC_PI_4;
        [
            QubitState::zero(),
            QubitState::real(2.0 * q - a),
            QubitState::real(q + b),
            QubitState::real(c - q),
        ]
    }
}

/// Honest-channel statistics of the MDIQKD detector model.
///
/// The four mismatched-basis entries are set to `(p(1|0,0) + p(1|0,1)) / 2`.
pub fn mdiqkd_stats(params: &MdiChannelParams) -> Result<ConditionalStats> {
    params.validate()?;
    let (eta, d) = (params.eta, params.d);
    let nd = (1.0 - d) * (1.0 - d);
    let two_dark = 2.0 * (1.0 - eta) * (1.0 - eta) * d * d * nd;
    let one_dark = 2.0 * eta * (1.0 - eta) * d * nd;
    let matched = eta * eta * nd / 2.0 + one_dark + two_dark;
    let error = two_dark + one_dark;
    let mismatched = (matched + error) / 2.0;

    let mut s = ConditionalStats::empty();
    s.set(0, 0, matched);
    s.set(1, 1, matched);
    s.set(0, 1, error);
    s.set(1, 0, error);
    s.set(3, 2, error);
    for (x, y) in [(3, 0), (3, 1), (0, 2), (1, 2)] {
        s.set(x, y, mismatched);
    }
    Ok(s)
}

/// BB84 statistics from the closed-form misalignment formulas. Angle `b` does not
/// enter any of the nine required entries.
pub fn bb84_stats(params: &Bb84ChannelParams) -> Result<ConditionalStats> {
    params.validate()?;
    let (eta, pd) = (params.eta, params.p_d);
    let a = params.a.to_radians();
    let c = params.c.to_radians();
    let q = std::f64::consts::FRAC_PI_4;
    let dark = (1.0 - eta) * pd * (1.0 - pd);
    let sig = (1.0 - pd) * eta;
    let sq = |v: f64| v * v;

    let mut s = ConditionalStats::empty();
    s.set(0, 0, eta * (1.0 - pd) + dark);
    s.set(1, 1, sig * sq(a.cos()) + dark);
    s.set(0, 1, dark);
    s.set(1, 0, sig * sq(a.sin()) + dark);
    s.set(3, 2, sig * sq((q + c).sin() - (q + c).cos()) / 2.0 + dark);
    s.set(3, 0, sig * sq((q + c).sin()) + dark);
    s.set(3, 1, sig * sq((q + c).cos()) + dark);
    s.set(0, 2, sig / 2.0 + dark);
    s.set(1, 2, sig * sq(a.sin() + a.cos()) / 2.0 + dark);
    Ok(s)
}

/// Bob's ideal BB84 measurement projectors `|0>, |1>, |+>, |->`.
pub fn ideal_measurements() -> [QubitState; 4] {
    SourceSpec::ideal_bb84().bob_states
}

/// Probability that Bob's ideal measurement `y` clicks on Alice's misaligned state `x`.
pub fn bb84_transition(params: &Bb84ChannelParams) -> [[f64; 4]; 4] {
    let alice = params.alice_states();
    let bob = ideal_measurements();
    let mut t = [[0.0; 4]; 4];
    for x in 0..4 {
        for y in 0..4 {
            t[x][y] = bob[y].fidelity(&alice[x]);
        }
    }
    t
}

/// Full 16-entry BB84 table computed from the misaligned states and the click model
/// `eta (1-p_d) tr(rho_x M_y) + (1-eta) p_d (1-p_d)`. Here angle `b` shapes the
/// `x = 2` row.
pub fn bb84_stats_from_states(params: &Bb84ChannelParams) -> Result<ConditionalStats> {
    params.validate()?;
    let (eta, pd) = (params.eta, params.p_d);
    let t = bb84_transition(params);
    let mut p1 = [[0.0; 4]; 4];
    for x in 0..4 {
        for y in 0..4 {
            p1[x][y] = eta * (1.0 - pd) * t[x][y] + (1.0 - eta) * pd * (1.0 - pd);
        }
    }
    Ok(ConditionalStats::full(p1))
}

/// Probability of a `z = 1` announcement per basis-0 pulse pair,
/// `(p(1|0,0) + p(1|0,1) + p(1|1,0) + p(1|1,1)) / 4`.
pub fn gain_basis0(stats: &ConditionalStats) -> Result<f64> {
    let r = stats.required()?;
    Ok(r.basis0_sum() / 4.0)
}
