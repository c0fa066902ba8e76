//! Coherent-source key rates: infinite decoy, vacuum + weak + signal decoy bounds,
//! and `k`-sigma finite-size widening.

use serde::{Deserialize, Serialize};

use crate::channel::{bb84_stats, bb84_transition, gain_basis0, mdiqkd_stats, Bb84ChannelParams, MdiChannelParams};
use crate::error::{Error, Result};
use crate::security::{
    assemble, bit_error_rate, epsilon_max, interval_constraints, maximize, EpsilonOutcome, Objective, OptimizerConfig,
    SecurityResult,
};
use crate::stats::{fluctuation_interval, StatsIntervals};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoyParams {
    pub mu: f64,
    pub nu: f64,
    /// Pulses per encoding pair and intensity; `None` is the infinite-size limit.
    #[serde(with = "pulses")]
    pub n_pulses: Option<u64>,
    pub k_sigma: f64,
}

impl Default for DecoyParams {
    fn default() -> Self {
        Self {
            mu: 0.5,
            nu: 0.1,
            n_pulses: None,
            k_sigma: 5.0,
        }
    }
}

impl DecoyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::param("mu", format!("{} must be positive", self.mu)));
        }
        if !(self.nu > 0.0 && self.nu < self.mu) {
            return Err(Error::param("nu", format!("{} must satisfy 0 < nu < mu = {}", self.nu, self.mu)));
        }
        if self.n_pulses == Some(0) {
            return Err(Error::param("n_pulses", "must be positive"));
        }
        if !(self.k_sigma >= 0.0 && self.k_sigma.is_finite()) {
            return Err(Error::param("k_sigma", format!("{} must be >= 0", self.k_sigma)));
        }
        Ok(())
    }
}

/// Parses a pulse count: a positive integer (plain or in exponent form such as
/// `1e10`) or `inf`.
pub fn parse_pulses(text: &str) -> Result<Option<u64>> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(None);
    }
    if let Ok(n) = t.parse::<u64>() {
        return Ok(Some(n));
    }
    match t.parse::<f64>() {
        Ok(v) => pulses_from_f64(v),
        Err(_) => Err(Error::param("n_pulses", format!("'{t}' is neither an integer nor 'inf'"))),
    }
}

fn pulses_from_f64(v: f64) -> Result<Option<u64>> {
    if v.is_infinite() && v > 0.0 {
        return Ok(None);
    }
    if v.fract() == 0.0 && v >= 1.0 && v < u64::MAX as f64 {
        return Ok(Some(v as u64));
    }
    Err(Error::param("n_pulses", format!("{v} is not a positive integer")))
}

mod pulses {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match n {
            Some(v) => s.serialize_u64(*v),
            None => s.serialize_str("inf"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Float(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let parsed = match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Int(n)) => Ok(Some(n)),
            Some(Repr::Float(v)) => super::pulses_from_f64(v),
            Some(Repr::Text(t)) => super::parse_pulses(&t),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Channel whose single-photon statistics are known exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum DecoyChannel {
    Bb84(Bb84ChannelParams),
    Mdiqkd(MdiChannelParams),
}

/// Probability of emitting exactly one photon (BB84) or one photon from each
/// source (MDIQKD).
pub fn single_photon_weight(channel: &DecoyChannel, mu: f64) -> f64 {
    let w = mu * (-mu).exp();
    match channel {
        DecoyChannel::Bb84(_) => w,
        DecoyChannel::Mdiqkd(_) => w * w,
    }
}

/// Key rate with exactly known single-photon statistics, scaled by the
/// single-photon emission weight.
pub fn infinite_decoy_rate(channel: &DecoyChannel, decoy: &DecoyParams, cfg: &OptimizerConfig) -> Result<SecurityResult> {
    decoy.validate()?;
    let stats = match channel {
        DecoyChannel::Bb84(p) => bb84_stats(p)?,
        DecoyChannel::Mdiqkd(p) => mdiqkd_stats(p)?,
    };
    let e_b = bit_error_rate(&stats)?;
    let gain = gain_basis0(&stats)? * single_photon_weight(channel, decoy.mu);
    assemble(e_b, gain, epsilon_max(&stats, cfg)?, false)
}

/// Yield of an `n`-photon pulse: a click on detector `y` with the other detector silent.
///
/// `t` is the single-photon probability of reaching detector `y`.
pub fn n_photon_yield(n: u32, eta: f64, p_d: f64, t: f64) -> f64 {
    let n = n as i32;
    (1.0 - p_d) * ((1.0 - eta * (1.0 - t)).powi(n) - (1.0 - eta).powi(n) * (1.0 - p_d))
}

/// Gain of a Poisson pulse of mean `k` under the same click model.
pub fn poisson_gain(k: f64, eta: f64, p_d: f64, t: f64) -> f64 {
    (1.0 - p_d) * ((-k * eta * (1.0 - t)).exp() - (-k * eta).exp() * (1.0 - p_d))
}

/// Observed gains for the vacuum, weak and signal intensities, and error gains
/// for the vacuum and weak ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyObservations {
    pub q_vacuum: f64,
    pub q_nu: f64,
    pub q_mu: f64,
    pub eq_vacuum: f64,
    pub eq_nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    pub y1_upper: f64,
    pub e1_upper: f64,
    /// The lower yield bound was negative (or the configuration degenerate) and got clamped.
    pub degenerate: bool,
}

/// Vacuum + weak decoy bounds on the single-photon yield and error rate.
///
/// Every observation is first widened by `k_sigma` standard deviations for
/// `n_pulses` samples; each bound then takes the worst end of every interval.
pub fn three_decoy_bounds(obs: &DecoyObservations, decoy: &DecoyParams) -> Result<DecoyBounds> {
    decoy.validate()?;
    let widen = |p: f64| fluctuation_interval(p, decoy.n_pulses, decoy.k_sigma);
    let (y0_lo, y0_hi) = widen(obs.q_vacuum)?;
    let (qn_lo, qn_hi) = widen(obs.q_nu)?;
    let (_, qm_hi) = widen(obs.q_mu)?;
    let (e0_lo, _) = widen(obs.eq_vacuum)?;
    let (_, en_hi) = widen(obs.eq_nu)?;
    let (mu, nu) = (decoy.mu, decoy.nu);

    let raw_lower = mu / (mu * nu - nu * nu)
        * (qn_lo * nu.exp() - qm_hi * mu.exp() * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0_hi);
    let upper = ((qn_hi * nu.exp() - y0_lo) / nu)
        .min((qm_hi * mu.exp() - y0_lo) / mu)
        .clamp(0.0, 1.0);
    let degenerate = !(raw_lower > 0.0) || (mu - nu) < 1e-9;
    let y1_lower = if degenerate { 0.0 } else { raw_lower.min(upper) };
    let e1_upper = if y1_lower > 0.0 {
        ((en_hi * nu.exp() - e0_lo) / (nu * y1_lower)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecoyBounds {
        y1_lower,
        y1_upper: upper,
        e1_upper,
        degenerate,
    })
}

/// Maximum of the objective over the coefficients and over every table inside the box.
pub fn epsilon_max_interval(intervals: &StatsIntervals, cfg: &OptimizerConfig) -> Result<EpsilonOutcome> {
    intervals.validate()?;
    maximize(&Objective::interval(intervals)?, &interval_constraints(intervals), cfg)
}

/// Per-entry single-photon yield intervals of a BB84 channel observed with
/// vacuum, weak and signal pulses.
///
/// The flag reports a collapsed lower bound on a sifted-key entry `(0,0)` or
/// `(1,1)`; error entries near zero collapse routinely and are not flagged.
pub fn bb84_yield_intervals(channel: &Bb84ChannelParams, decoy: &DecoyParams) -> Result<(StatsIntervals, bool)> {
    channel.validate()?;
    decoy.validate()?;
    let t = bb84_transition(channel);
    let (eta, pd) = (channel.eta, channel.p_d);
    let mut lo = [[0.0; 4]; 4];
    let mut hi = [[0.0; 4]; 4];
    let mut degenerate = false;
    for x in 0..4 {
        for y in 0..4 {
            let obs = DecoyObservations {
                q_vacuum: poisson_gain(0.0, eta, pd, t[x][y]),
                q_nu: poisson_gain(decoy.nu, eta, pd, t[x][y]),
                q_mu: poisson_gain(decoy.mu, eta, pd, t[x][y]),
                eq_vacuum: 0.0,
                eq_nu: 0.0,
            };
            let b = three_decoy_bounds(&obs, decoy)?;
            lo[x][y] = b.y1_lower;
            hi[x][y] = b.y1_upper.max(b.y1_lower);
            if x == y && x < 2 {
                degenerate |= b.degenerate;
            }
        }
    }
    Ok((StatsIntervals::new(lo, hi)?, degenerate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeDecoyResult {
    pub result: SecurityResult,
    pub yields: StatsIntervals,
    pub degenerate: bool,
}

/// BB84 key rate from decoy-bounded single-photon statistics.
///
/// `e_b` is the upper end over the yield box, the gain its lower end times the
/// single-photon weight `mu e^-mu`.
pub fn three_decoy_rate(channel: &Bb84ChannelParams, decoy: &DecoyParams, cfg: &OptimizerConfig) -> Result<ThreeDecoyResult> {
    let (iv, degenerate) = bb84_yield_intervals(channel, decoy)?;
    let (lo, hi) = (&iv.lo, &iv.hi);
    let err_hi = hi[0][1] + hi[1][0];
    let denom = err_hi + lo[0][0] + lo[1][1];
    if denom <= 0.0 {
        return Err(Error::NoClicks);
    }
    let e_b = err_hi / denom;
    let gain_lo = (lo[0][0] + lo[0][1] + lo[1][0] + lo[1][1]) / 4.0;
    let gain = gain_lo * decoy.mu * (-decoy.mu).exp();
    let eps = epsilon_max_interval(&iv, cfg)?;
    Ok(ThreeDecoyResult {
        result: assemble(e_b.min(1.0), gain, eps, false)?,
        yields: iv,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::loss_db_to_eta;
    use crate::stats::ConditionalStats;

    fn fast() -> OptimizerConfig {
        OptimizerConfig {
            coarse_grid: 21,
            multistarts: 8,
            ..OptimizerConfig::default()
        }
    }

    fn bb84(loss_db: f64, p_d: f64) -> Bb84ChannelParams {
        Bb84ChannelParams::new(loss_db_to_eta(loss_db).unwrap(), p_d, 0.0, 0.0, 0.0).unwrap()
    }

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

    #[test]
    fn params_validate() {
        assert!(DecoyParams::default().validate().is_ok());
        let bad = DecoyParams { nu: 0.6, ..DecoyParams::default() };
        assert!(bad.validate().is_err());
        let zero = DecoyParams { n_pulses: Some(0), ..DecoyParams::default() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn pulse_counts_parse() {
        assert_eq!(parse_pulses("inf").unwrap(), None);
        assert_eq!(parse_pulses("1000000").unwrap(), Some(1_000_000));
        assert_eq!(parse_pulses("1e10").unwrap(), Some(10_000_000_000));
        assert!(parse_pulses("0.5").is_err());
        assert!(parse_pulses("many").is_err());
        let d: DecoyParams = serde_json::from_str(r#"{"mu":0.5,"nu":0.1,"n_pulses":"inf","k_sigma":5}"#).unwrap();
        assert_eq!(d.n_pulses, None);
        let d: DecoyParams = serde_json::from_str(r#"{"mu":0.5,"nu":0.1,"n_pulses":1e8,"k_sigma":5}"#).unwrap();
        assert_eq!(d.n_pulses, Some(100_000_000));
        let back: DecoyParams = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn gain_is_poisson_mixture_of_yields() {
        for &(k, eta, pd, t) in &[(0.5, 0.3, 1e-5, 0.7), (0.1, 0.01, 1e-3, 0.0), (2.0, 1.0, 0.0, 0.5)] {
            let mut s = 0.0;
            let mut w = (-k as f64).exp();
            for n in 0..60u32 {
                s += w * n_photon_yield(n, eta, pd, t);
                w *= k / (n + 1) as f64;
            }
            assert!((s - poisson_gain(k, eta, pd, t)).abs() < 1e-14);
        }
        // One photon reproduces the single-photon click model.
        let y1 = n_photon_yield(1, 0.2, 1e-4, 0.3);
        assert!((y1 - (0.2 * (1.0 - 1e-4) * 0.3 + 0.8 * 1e-4 * (1.0 - 1e-4))).abs() < 1e-16);
    }

    #[test]
    fn infinite_decoy_composition() {
        let ch = DecoyChannel::Bb84(bb84(0.0, 0.0));
        let d = DecoyParams::default();
        let r = infinite_decoy_rate(&ch, &d, &fast()).unwrap();
        let single = crate::security::key_rate(&bb84_stats(&bb84(0.0, 0.0)).unwrap(), &fast()).unwrap();
        assert!((r.rate_per_pulse - 0.5 * (-0.5f64).exp() * single.rate_per_pulse).abs() < 1e-15);
        let tiny = DecoyParams { mu: 1e-9, nu: 1e-10, ..d };
        assert!(infinite_decoy_rate(&ch, &tiny, &fast()).unwrap().rate_per_pulse < 1e-9);
    }

    #[test]
    fn bounds_contain_truth() {
        let d = DecoyParams::default();
        for i in 0..100 {
            let eta = 10f64.powf(-(i as f64) * 0.05);
            let pd = 10f64.powf(-3.0 - (i % 5) as f64);
            let t = (i as f64 * 0.37).sin().abs();
            let obs = DecoyObservations {
                q_vacuum: poisson_gain(0.0, eta, pd, t) + poisson_gain(0.0, eta, pd, 1.0 - t),
                q_nu: poisson_gain(d.nu, eta, pd, t) + poisson_gain(d.nu, eta, pd, 1.0 - t),
                q_mu: poisson_gain(d.mu, eta, pd, t) + poisson_gain(d.mu, eta, pd, 1.0 - t),
                eq_vacuum: poisson_gain(0.0, eta, pd, 1.0 - t),
                eq_nu: poisson_gain(d.nu, eta, pd, 1.0 - t),
            };
            let y1 = n_photon_yield(1, eta, pd, t) + n_photon_yield(1, eta, pd, 1.0 - t);
            let e1 = n_photon_yield(1, eta, pd, 1.0 - t) / y1;
            let b = three_decoy_bounds(&obs, &d).unwrap();
            assert!(b.y1_lower <= y1 + 1e-15 && y1 <= b.y1_upper + 1e-15, "{i}: {b:?} vs {y1}");
            assert!(b.e1_upper >= e1 - 1e-12, "{i}: {} < {e1}", b.e1_upper);
        }
    }

    #[test]
    fn finite_size_widens_bounds() {
        let ch = bb84(10.0, 1e-5);
        let at = |n: Option<u64>| {
            bb84_yield_intervals(&ch, &DecoyParams { n_pulses: n, ..DecoyParams::default() }).unwrap().0
        };
        let (inf, big, small) = (at(None), at(Some(10_000_000_000)), at(Some(1_000_000)));
        assert!(big.contains_box(&inf));
        assert!(small.contains_box(&big));
        assert!(small.hi[0][0] - small.lo[0][0] > big.hi[0][0] - big.lo[0][0]);
    }

    #[test]
    fn degenerate_decoy_is_flagged() {
        // Dark counts only, with the weak intensity pushed onto the signal one.
        let pd = 1e-5;
        let d = DecoyParams {
            nu: 0.5 - 1e-12,
            ..DecoyParams::default()
        };
        let q = poisson_gain(0.0, 0.0, pd, 0.5);
        let obs = DecoyObservations {
            q_vacuum: q,
            q_nu: q,
            q_mu: q,
            eq_vacuum: q / 2.0,
            eq_nu: q / 2.0,
        };
        let b = three_decoy_bounds(&obs, &d).unwrap();
        assert!(b.degenerate);
        assert_eq!(b.y1_lower, 0.0);
        assert_eq!(b.e1_upper, 1.0);
    }

    #[test]
    fn point_intervals_match_point_table() {
        let s = bb84_stats(&bb84(5.0, 1e-5)).unwrap();
        let a = epsilon_max(&s, &fast()).unwrap().epsilon;
        let b = epsilon_max_interval(&StatsIntervals::point(&s), &fast()).unwrap().epsilon;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn widening_ideal_table_opens_epsilon() {
        let s = ideal();
        let mut prev = 0.0;
        for w in [0.0, 0.005, 0.01, 0.02] {
            let e = epsilon_max_interval(&StatsIntervals::widened(&s, w), &fast()).unwrap().epsilon;
            assert!(e + 1e-6 >= prev, "{w}: {e} < {prev}");
            if w == 0.01 {
                assert!(e > 0.0);
            }
            prev = e;
        }
    }

    #[test]
    fn infinite_dominates_three_decoy() {
        let d = DecoyParams::default();
        for loss in [0.0, 5.0, 10.0, 20.0] {
            let ch = bb84(loss, 1e-5);
            let inf = infinite_decoy_rate(&DecoyChannel::Bb84(ch), &d, &fast()).unwrap();
            let three = three_decoy_rate(&ch, &d, &fast()).unwrap();
            assert!(inf.rate_per_pulse >= three.result.rate_per_pulse, "{loss}");
        }
    }
}
