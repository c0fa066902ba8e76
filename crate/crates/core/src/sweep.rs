//! Loss sweeps driven by JSON recipes, written as CSV.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{bb84_stats, loss_db_to_eta, mdiqkd_stats, Bb84ChannelParams, MdiChannelParams};
use crate::decoy::{infinite_decoy_rate, three_decoy_rate, DecoyChannel, DecoyParams};
use crate::error::{Error, Result};
use crate::security::{key_rate, trusted_source_rate, OptimizerConfig, SecurityResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Mdiqkd,
    Bb84,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    SinglePhoton,
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DecoyMethod {
    Infinite,
    ThreeDecoy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl LossRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::param("loss_db.step", format!("{} must be positive", self.step)));
        }
        if !(self.start >= 0.0 && self.start <= self.stop && self.stop.is_finite()) {
            return Err(Error::param(
                "loss_db",
                format!("need 0 <= start <= stop, got {}..{}", self.start, self.stop),
            ));
        }
        Ok(())
    }

    /// Grid points `start + i * step` up to `stop` (inclusive within rounding).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Channel parameters shared by both protocols. `dark` is `d` for MDIQKD and
/// `p_d` for BB84; the misalignment angles (degrees) only apply to BB84.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub dark: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            dark: 1e-5,
            a: 0.0,
            b: 0.0,
            c: 0.0,
        }
    }
}

/// One labelled variant of a recipe; `set` is merged into the base recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub label: String,
    #[serde(default)]
    pub set: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub protocol: Protocol,
    pub source: SourceKind,
    pub decoy_method: DecoyMethod,
    /// Loss per arm for MDIQKD, Alice-to-Bob loss for BB84.
    pub loss_db: LossRange,
    pub channel: ChannelConfig,
    pub decoy: DecoyParams,
    pub optimizer: OptimizerConfig,
    pub output: Option<PathBuf>,
    pub curves: Vec<Curve>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Mdiqkd,
            source: SourceKind::SinglePhoton,
            decoy_method: DecoyMethod::Infinite,
            loss_db: LossRange {
                start: 0.0,
                stop: 40.0,
                step: 2.0,
            },
            channel: ChannelConfig::default(),
            decoy: DecoyParams::default(),
            optimizer: OptimizerConfig::default(),
            output: None,
            curves: Vec::new(),
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_db.validate()?;
        self.optimizer.validate()?;
        if self.source == SourceKind::Coherent {
            self.decoy.validate()?;
        }
        if self.protocol == Protocol::Mdiqkd
            && self.source == SourceKind::Coherent
            && self.decoy_method == DecoyMethod::ThreeDecoy
        {
            return Err(Error::param("decoy_method", "MDIQKD supports only the infinite-decoy limit"));
        }
        if !(0.0..1.0).contains(&self.channel.dark) {
            return Err(Error::param("channel.dark", format!("{} outside [0, 1)", self.channel.dark)));
        }
        let mut labels = std::collections::BTreeSet::new();
        for c in &self.curves {
            if sanitize(&c.label).is_empty() || !labels.insert(sanitize(&c.label)) {
                return Err(Error::param("curves", format!("label '{}' is empty or repeated", c.label)));
            }
        }
        Ok(())
    }

    /// Expands the recipe into one concrete configuration per curve.
    pub fn expand(&self) -> Result<Vec<(Option<String>, SweepConfig)>> {
        self.validate()?;
        if self.curves.is_empty() {
            return Ok(vec![(None, self.clone())]);
        }
        let mut base = self.clone();
        base.curves.clear();
        let base_value = serde_json::to_value(&base).map_err(|e| Error::Parse(e.to_string()))?;
        self.curves
            .iter()
            .map(|c| {
                let mut v = base_value.clone();
                merge(&mut v, &c.set);
                let cfg: SweepConfig = serde_json::from_value(v)
                    .map_err(|e| Error::Parse(format!("curve '{}': {e}", c.label)))?;
                if !cfg.curves.is_empty() {
                    return Err(Error::param("curves", "curves cannot nest"));
                }
                cfg.validate()?;
                Ok((Some(c.label.clone()), cfg))
            })
            .collect()
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub loss_db: f64,
    pub eta: f64,
    pub e_b: Option<f64>,
    pub epsilon: Option<f64>,
    pub e_p: Option<f64>,
    pub gain: Option<f64>,
    pub rate_per_pulse: f64,
    pub boundary_hit: bool,
    /// Same gain and `e_b` with a trusted source: `gain (1 - 2 H(e_b))`.
    pub reference_rate: f64,
    /// `ok`, `infeasible`, `no-clicks` or `decoy-degenerate`.
    pub status: String,
}

impl SweepRow {
    fn from_result(loss_db: f64, eta: f64, r: &SecurityResult, status: &str) -> Result<Self> {
        Ok(Self {
            loss_db,
            eta,
            e_b: Some(r.e_b),
            epsilon: Some(r.epsilon),
            e_p: Some(r.e_p),
            gain: Some(r.gain),
            rate_per_pulse: r.rate_per_pulse,
            boundary_hit: r.boundary_hit,
            reference_rate: r.gain * trusted_source_rate(r.e_b)?,
            status: status.to_string(),
        })
    }

    fn failed(loss_db: f64, eta: f64, status: &str) -> Self {
        Self {
            loss_db,
            eta,
            e_b: None,
            epsilon: None,
            e_p: None,
            gain: None,
            rate_per_pulse: 0.0,
            boundary_hit: false,
            reference_rate: 0.0,
            status: status.to_string(),
        }
    }
}

/// Evaluates one loss point of a concrete (curve-free) configuration.
pub fn evaluate_point(cfg: &SweepConfig, loss_db: f64) -> Result<SweepRow> {
    let eta = loss_db_to_eta(loss_db)?;
    let ch = &cfg.channel;
    let opt = &cfg.optimizer;
    let outcome: Result<(SecurityResult, &str)> = match (cfg.protocol, cfg.source) {
        (Protocol::Mdiqkd, SourceKind::SinglePhoton) => {
            key_rate(&mdiqkd_stats(&MdiChannelParams::new(eta, ch.dark)?)?, opt).map(|r| (r, "ok"))
        }
        (Protocol::Mdiqkd, SourceKind::Coherent) => {
            let c = DecoyChannel::Mdiqkd(MdiChannelParams::new(eta, ch.dark)?);
            infinite_decoy_rate(&c, &cfg.decoy, opt).map(|r| (r, "ok"))
        }
        (Protocol::Bb84, source) => {
            let p = Bb84ChannelParams::new(eta, ch.dark, ch.a, ch.b, ch.c)?;
            match (source, cfg.decoy_method) {
                (SourceKind::SinglePhoton, _) => key_rate(&bb84_stats(&p)?, opt).map(|r| (r, "ok")),
                (SourceKind::Coherent, DecoyMethod::Infinite) => {
                    infinite_decoy_rate(&DecoyChannel::Bb84(p), &cfg.decoy, opt).map(|r| (r, "ok"))
                }
                (SourceKind::Coherent, DecoyMethod::ThreeDecoy) => match three_decoy_rate(&p, &cfg.decoy, opt) {
                    Ok(t) => Ok((t.result, if t.degenerate { "decoy-degenerate" } else { "ok" })),
                    // Every sifted lower yield collapsed to zero.
                    Err(Error::NoClicks) => return Ok(SweepRow::failed(loss_db, eta, "decoy-degenerate")),
                    Err(e) => Err(e),
                },
            }
        }
    };
    match outcome {
        Ok((r, status)) => SweepRow::from_result(loss_db, eta, &r, status),
        Err(Error::Infeasible { .. }) => Ok(SweepRow::failed(loss_db, eta, "infeasible")),
        Err(Error::NoClicks) => Ok(SweepRow::failed(loss_db, eta, "no-clicks")),
        Err(e) => Err(e),
    }
}

/// Rows of one curve, in loss order.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRows {
    pub label: Option<String>,
    pub rows: Vec<SweepRow>,
}

/// Runs every curve of a recipe. Points are evaluated in parallel.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CurveRows>> {
    let curves = cfg.expand()?;
    let jobs: Vec<(usize, f64)> = curves
        .iter()
        .enumerate()
        .flat_map(|(i, (_, c))| c.loss_db.points().into_iter().map(move |l| (i, l)))
        .collect();
    let rows: Vec<Result<SweepRow>> = jobs
        .par_iter()
        .map(|&(i, loss)| evaluate_point(&curves[i].1, loss))
        .collect();
    let mut out: Vec<CurveRows> = curves
        .iter()
        .map(|(label, _)| CurveRows {
            label: label.clone(),
            rows: Vec::new(),
        })
        .collect();
    for (&(i, _), row) in jobs.iter().zip(rows) {
        out[i].rows.push(row?);
    }
    Ok(out)
}

/// Output path of a curve: `<stem>-<label>.<ext>` next to `base`.
pub fn curve_path(base: &Path, label: Option<&str>) -> PathBuf {
    let Some(label) = label else {
        return base.to_path_buf();
    };
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}-{}.{ext}", sanitize(label)))
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let io = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    r.deserialize().map(|row| row.map_err(io)).collect()
}

/// Writes every curve and returns the paths written.
pub fn write_sweep(curves: &[CurveRows], base: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for c in curves {
        let path = curve_path(base, c.label.as_deref());
        let text = rows_to_csv(&c.rows)?;
        std::fs::write(&path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        written.push(path);
    }
    Ok(written)
}
