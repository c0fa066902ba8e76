//! Command implementations behind the `mbqkd` binary.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::attack::{replay, soundness_audit, AuditRecord, AuditReport};
use crate::channel::{bb84_stats, bb84_stats_from_states, loss_db_to_eta, mdiqkd_stats, Bb84ChannelParams, MdiChannelParams};
use crate::error::{Error, Result};
use crate::security::{key_rate_with, OptimizerConfig, SecurityResult};
use crate::stats::ConditionalStats;
use crate::sweep::{run_sweep, rows_to_csv, write_sweep, DecoyMethod, Protocol, SourceKind, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        _ => EXIT_VALIDATION,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Command-line values that take precedence over a sweep recipe.
#[derive(Debug, Clone, Default)]
pub struct SweepOverrides {
    pub protocol: Option<Protocol>,
    pub source: Option<SourceKind>,
    pub decoy_method: Option<DecoyMethod>,
    pub loss_start: Option<f64>,
    pub loss_stop: Option<f64>,
    pub loss_step: Option<f64>,
    pub dark: Option<f64>,
    pub mis_a: Option<f64>,
    pub mis_b: Option<f64>,
    pub mis_c: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub pulses: Option<Option<u64>>,
    pub k_sigma: Option<f64>,
    pub c_max: Option<f64>,
    pub grid: Option<usize>,
    pub output: Option<PathBuf>,
}

impl SweepOverrides {
    pub fn apply(&self, cfg: &mut SweepConfig) {
        fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *dst = v.clone();
            }
        }
        set(&mut cfg.protocol, &self.protocol);
        set(&mut cfg.source, &self.source);
        set(&mut cfg.decoy_method, &self.decoy_method);
        set(&mut cfg.loss_db.start, &self.loss_start);
        set(&mut cfg.loss_db.stop, &self.loss_stop);
        set(&mut cfg.loss_db.step, &self.loss_step);
        set(&mut cfg.channel.dark, &self.dark);
        set(&mut cfg.channel.a, &self.mis_a);
        set(&mut cfg.channel.b, &self.mis_b);
        set(&mut cfg.channel.c, &self.mis_c);
        set(&mut cfg.decoy.mu, &self.mu);
        set(&mut cfg.decoy.nu, &self.nu);
        set(&mut cfg.decoy.n_pulses, &self.pulses);
        set(&mut cfg.decoy.k_sigma, &self.k_sigma);
        set(&mut cfg.optimizer.c_max, &self.c_max);
        set(&mut cfg.optimizer.coarse_grid, &self.grid);
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
    }
}

/// Output of a sweep: the CSV text when no file was requested, else the paths written.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutput {
    Stdout(String),
    Files(Vec<PathBuf>),
}

pub fn sweep(config: Option<&Path>, overrides: &SweepOverrides) -> Result<SweepOutput> {
    let mut cfg = match config {
        Some(p) => SweepConfig::read(p)?,
        None => SweepConfig::default(),
    };
    overrides.apply(&mut cfg);
    let curves = run_sweep(&cfg)?;
    match &cfg.output {
        Some(path) => Ok(SweepOutput::Files(write_sweep(&curves, path)?)),
        None if curves.len() == 1 => Ok(SweepOutput::Stdout(rows_to_csv(&curves[0].rows)?)),
        None => Err(Error::param("output", "recipes with several curves need an output path")),
    }
}

pub fn analyze(path: &Path, cfg: &OptimizerConfig, symmetric: bool) -> Result<SecurityResult> {
    let stats = ConditionalStats::read(path)?;
    key_rate_with(&stats, cfg, symmetric)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmission {
    Eta(f64),
    LossDb(f64),
}

impl Transmission {
    pub fn eta(self) -> Result<f64> {
        match self {
            Transmission::Eta(e) => Ok(e),
            Transmission::LossDb(l) => loss_db_to_eta(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub protocol: Protocol,
    pub transmission: Transmission,
    pub dark: f64,
    /// Misalignment angles in degrees (BB84 only).
    pub mis: [f64; 3],
    pub from_states: bool,
    pub pulses: Option<u64>,
}

pub fn simulate(args: &SimulateArgs) -> Result<ConditionalStats> {
    let eta = args.transmission.eta()?;
    let stats = match args.protocol {
        Protocol::Mdiqkd => {
            if args.mis.iter().any(|&m| m != 0.0) || args.from_states {
                return Err(Error::param("protocol", "misalignment and --from-states apply to bb84 only"));
            }
            mdiqkd_stats(&MdiChannelParams::new(eta, args.dark)?)?
        }
        Protocol::Bb84 => {
            let [a, b, c] = args.mis;
            let p = Bb84ChannelParams::new(eta, args.dark, a, b, c)?;
            if args.from_states {
                bb84_stats_from_states(&p)?
            } else {
                bb84_stats(&p)?
            }
        }
    };
    Ok(stats.with_n_pulses(args.pulses))
}

/// Result of `attack-audit`: either a fresh audit or one replayed record.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AuditOutcome {
    Audit(AuditReport),
    Replay(AuditRecord),
}

impl AuditOutcome {
    pub fn sound(&self) -> bool {
        match self {
            AuditOutcome::Audit(r) => r.failures == 0,
            AuditOutcome::Replay(r) => r.sound,
        }
    }
}

/// Runs an audit, or replays a dumped record when `replay_path` is given.
///
/// With `dump`, failing records go to `<dump>/failure-<trial>.json` and the
/// smallest-margin record to `<dump>/worst.json`.
pub fn attack_audit(
    trials: u64,
    seed: u64,
    replay_path: Option<&Path>,
    dump: Option<&Path>,
    cfg: &OptimizerConfig,
) -> Result<AuditOutcome> {
    if let Some(p) = replay_path {
        return Ok(AuditOutcome::Replay(replay(p, cfg)?));
    }
    let report = soundness_audit(trials, seed, cfg)?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        for rec in &report.failed {
            write_text(&dir.join(format!("failure-{}.json", rec.trial)), &to_json(rec))?;
        }
        if let Some(w) = &report.worst {
            write_text(&dir.join("worst.json"), &to_json(w))?;
        }
    }
    Ok(AuditOutcome::Audit(report))
}
