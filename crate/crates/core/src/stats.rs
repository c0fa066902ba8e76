//! Conditional click-probability tables `p(1|x,y)` and their interval variants.
//!
//! Only `p(1|x,y)` is stored; `p(0|x,y) = 1 - p(1|x,y)`. Entries not consumed by the
//! key-rate bound may be absent.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine `(x, y)` pairs the key-rate bound consumes.
pub const REQUIRED_ENTRIES: [(usize, usize); 9] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (1, 1),
    (3, 2),
    (3, 0),
    (3, 1),
    (0, 2),
    (1, 2),
];

/// Table of announcement probabilities `p(1|x,y)` for `x, y` in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConditionalStats {
    p1: [[Option<f64>; 4]; 4],
    n_pulses: Option<u64>,
}

/// The nine required probabilities, extracted from a validated table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequiredEntries {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub p32: f64,
    pub p30: f64,
    pub p31: f64,
    pub p02: f64,
    pub p12: f64,
}

impl RequiredEntries {
    /// `p(1|0,0) + p(1|1,1) + p(1|0,1) + p(1|1,0)`.
    pub fn basis0_sum(&self) -> f64 {
        self.p00 + self.p11 + self.p01 + self.p10
    }
}

impl ConditionalStats {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(p1: [[f64; 4]; 4]) -> Self {
        let mut s = Self::empty();
        for (x, row) in p1.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                s.p1[x][y] = Some(v);
            }
        }
        s
    }

    /// Builds a table holding only the nine required entries.
    pub fn from_required(r: &RequiredEntries) -> Self {
        let mut s = Self::empty();
        let vals = [r.p00, r.p01, r.p10, r.p11, r.p32, r.p30, r.p31, r.p02, r.p12];
        for (&(x, y), v) in REQUIRED_ENTRIES.iter().zip(vals) {
            s.p1[x][y] = Some(v);
        }
        s
    }

    pub fn p1(&self, x: usize, y: usize) -> Option<f64> {
        self.p1[x][y]
    }

    pub fn p0(&self, x: usize, y: usize) -> Option<f64> {
        self.p1[x][y].map(|p| 1.0 - p)
    }

    pub fn set(&mut self, x: usize, y: usize, p: f64) {
        self.p1[x][y] = Some(p);
    }

    pub fn remove(&mut self, x: usize, y: usize) {
        self.p1[x][y] = None;
    }

    pub fn n_pulses(&self) -> Option<u64> {
        self.n_pulses
    }

    pub fn with_n_pulses(mut self, n: Option<u64>) -> Self {
        self.n_pulses = n;
        self
    }

    /// Checks ranges of all present entries and presence of the required ones.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                if let Some(p) = self.p1[x][y] {
                    if !(0.0..=1.0).contains(&p) {
                        errs.push(format!("entry ({x},{y}) = {p} outside [0, 1]"));
                    }
                }
            }
        }
        for &(x, y) in &REQUIRED_ENTRIES {
            if self.p1[x][y].is_none() {
                errs.push(format!("missing required entry ({x},{y})"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Validates and extracts the nine probabilities the bound uses.
    pub fn required(&self) -> Result<RequiredEntries> {
        self.validate().map_err(Error::InvalidStats)?;
        let g = |x: usize, y: usize| self.p1[x][y].expect("validated");
        Ok(RequiredEntries {
            p00: g(0, 0),
            p01: g(0, 1),
            p10: g(1, 0),
            p11: g(1, 1),
            p32: g(3, 2),
            p30: g(3, 0),
            p31: g(3, 1),
            p02: g(0, 2),
            p12: g(1, 2),
        })
    }

    /// Whether `p(1|00)=p(1|11)`, `p(1|01)=p(1|10)` and all four mismatched entries
    /// equal `(p(1|00)+p(1|01))/2`, each within absolute `tol`.
    pub fn is_symmetric_case(&self, tol: f64) -> bool {
        let Ok(r) = self.required() else {
            return false;
        };
        let half = (r.p00 + r.p01) / 2.0;
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        close(r.p00, r.p11)
            && close(r.p01, r.p10)
            && [r.p30, r.p31, r.p02, r.p12].iter().all(|&p| close(p, half))
    }

    pub fn to_json(&self) -> String {
        let file = StatsFile::from(self);
        serde_json::to_string_pretty(&file).expect("stats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StatsFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// On-disk form: `{"p1": {"0,0": 0.5, ...}, "n_pulses": 1000000}`.
#[derive(Debug, Serialize, Deserialize)]
struct StatsFile {
    p1: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_pulses: Option<u64>,
}

impl From<&ConditionalStats> for StatsFile {
    fn from(s: &ConditionalStats) -> Self {
        let mut p1 = BTreeMap::new();
        for x in 0..4 {
            for y in 0..4 {
                if let Some(p) = s.p1[x][y] {
                    p1.insert(format!("{x},{y}"), p);
                }
            }
        }
        StatsFile {
            p1,
            n_pulses: s.n_pulses,
        }
    }
}

impl TryFrom<StatsFile> for ConditionalStats {
    type Error = Error;

    fn try_from(f: StatsFile) -> Result<Self> {
        let mut s = ConditionalStats::empty();
        for (key, p) in f.p1 {
            let (x, y) = parse_key(&key)
                .ok_or_else(|| Error::Parse(format!("bad entry key {key:?}, expected \"x,y\" with x,y in 0..4")))?;
            s.p1[x][y] = Some(p);
        }
        s.n_pulses = f.n_pulses;
        Ok(s)
    }
}

fn parse_key(key: &str) -> Option<(usize, usize)> {
    let (a, b) = key.split_once(',')?;
    let x: usize = a.trim().parse().ok()?;
    let y: usize = b.trim().parse().ok()?;
    (x < 4 && y < 4).then_some((x, y))
}

/// Per-entry probability intervals `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsIntervals {
    pub lo: [[f64; 4]; 4],
    pub hi: [[f64; 4]; 4],
}

impl StatsIntervals {
    pub fn new(lo: [[f64; 4]; 4], hi: [[f64; 4]; 4]) -> Result<Self> {
        let s = Self { lo, hi };
        s.validate()?;
        Ok(s)
    }

    /// Degenerate box `lo = hi` around a table; absent entries become 0.
    pub fn point(stats: &ConditionalStats) -> Self {
        let mut v = [[0.0; 4]; 4];
        for (x, row) in v.iter_mut().enumerate() {
            for (y, e) in row.iter_mut().enumerate() {
                *e = stats.p1(x, y).unwrap_or(0.0);
            }
        }
        Self { lo: v, hi: v }
    }

    /// Widens every entry by `+-width`, clamped to `[0, 1]`.
    pub fn widened(stats: &ConditionalStats, width: f64) -> Self {
        let mut s = Self::point(stats);
        for x in 0..4 {
            for y in 0..4 {
                s.lo[x][y] = (s.lo[x][y] - width).max(0.0);
                s.hi[x][y] = (s.hi[x][y] + width).min(1.0);
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                let (lo, hi) = (self.lo[x][y], self.hi[x][y]);
                if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                    errs.push(format!("interval ({x},{y}) = [{lo}, {hi}] not within 0 <= lo <= hi <= 1"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidStats(errs))
        }
    }

    pub fn contains(&self, stats: &ConditionalStats) -> bool {
        REQUIRED_ENTRIES.iter().all(|&(x, y)| {
            stats
                .p1(x, y)
                .is_some_and(|p| self.lo[x][y] <= p && p <= self.hi[x][y])
        })
    }

    pub fn contains_box(&self, inner: &StatsIntervals) -> bool {
        (0..4).all(|x| {
            (0..4).all(|y| self.lo[x][y] <= inner.lo[x][y] && inner.hi[x][y] <= self.hi[x][y])
        })
    }
}

/// `p_hat -+ k_sigma * sqrt(p_hat (1 - p_hat) / n)` clamped to `[0, 1]`.
///
/// `n = None` stands for infinitely many pulses and returns the point interval.
pub fn fluctuation_interval(p_hat: f64, n: Option<u64>, k_sigma: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::param("p_hat", format!("{p_hat} outside [0, 1]")));
    }
    if !(k_sigma >= 0.0) {
        return Err(Error::param("k_sigma", format!("{k_sigma} must be non-negative")));
    }
    let Some(n) = n else {
        return Ok((p_hat, p_hat));
    };
    if n == 0 {
        return Err(Error::param("n", "pulse count must be positive"));
    }
    let half = k_sigma * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(((p_hat - half).max(0.0), (p_hat + half).min(1.0)))
}
