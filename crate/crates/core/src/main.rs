use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbqkd::commands::{
    self, attack_audit, exit_code, to_json, write_text, AuditOutcome, SimulateArgs, SweepOutput, SweepOverrides,
    Transmission, EXIT_AUDIT, EXIT_OK, EXIT_USAGE,
};
use mbqkd::decoy::parse_pulses;
use mbqkd::security::OptimizerConfig;
use mbqkd::sweep::{DecoyMethod, Protocol, SourceKind};

/// Key rates for MDIQKD and BB84 with uncharacterized qubit sources.
#[derive(Parser)]
#[command(name = "mbqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate versus loss as CSV.
    Sweep(SweepArgs),
    /// Key rate of a statistics file, as JSON.
    Analyze(AnalyzeArgs),
    /// Write the statistics table of a channel model.
    Simulate(SimulateCli),
    /// Check the phase-error bound against explicit collective attacks.
    AttackAudit(AuditArgs),
}

#[derive(Args)]
struct OptimizerFlags {
    /// Upper bound of each expansion coefficient.
    #[arg(long)]
    c_max: Option<f64>,
    /// Points per axis of the coarse grid.
    #[arg(long)]
    grid: Option<usize>,
}

impl OptimizerFlags {
    fn config(&self) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::default();
        if let Some(c) = self.c_max {
            cfg.c_max = c;
        }
        if let Some(g) = self.grid {
            cfg.coarse_grid = g;
        }
        cfg
    }
}

#[derive(Args)]
struct SweepArgs {
    /// JSON recipe; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    protocol: Option<Protocol>,
    #[arg(long, value_enum)]
    source: Option<SourceKind>,
    #[arg(long, value_enum)]
    decoy_method: Option<DecoyMethod>,
    #[arg(long)]
    loss_start: Option<f64>,
    #[arg(long)]
    loss_stop: Option<f64>,
    #[arg(long)]
    loss_step: Option<f64>,
    /// Dark count probability (`d` for MDIQKD, `p_d` for BB84).
    #[arg(long)]
    dark: Option<f64>,
    /// Misalignment angles in degrees.
    #[arg(long)]
    mis_a: Option<f64>,
    #[arg(long)]
    mis_b: Option<f64>,
    #[arg(long)]
    mis_c: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Pulses per setting and intensity: an integer or "inf".
    #[arg(long)]
    pulses: Option<String>,
    #[arg(long)]
    ksigma: Option<f64>,
    #[command(flatten)]
    opt: OptimizerFlags,
    /// CSV path; several curves write `<stem>-<label>.csv`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    /// Use the simplified maximization when the table is symmetric.
    #[arg(long)]
    symmetric: bool,
    #[command(flatten)]
    opt: OptimizerFlags,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateCli {
    #[arg(value_enum)]
    protocol: Protocol,
    #[arg(long, conflicts_with = "loss_db", required_unless_present = "loss_db")]
    eta: Option<f64>,
    #[arg(long)]
    loss_db: Option<f64>,
    /// Dark count probability.
    #[arg(long, visible_alias = "pd", default_value_t = 0.0)]
    dark: f64,
    #[arg(long, default_value_t = 0.0)]
    mis_a: f64,
    #[arg(long, default_value_t = 0.0)]
    mis_b: f64,
    #[arg(long, default_value_t = 0.0)]
    mis_c: f64,
    /// BB84 table from the misaligned states instead of the closed-form model.
    #[arg(long)]
    from_states: bool,
    /// Record a finite pulse count in the file.
    #[arg(long)]
    pulses: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Re-check one dumped record or attack instance.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Directory for failing and worst-case records.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    opt: OptimizerFlags,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn emit(text: &str, output: Option<&PathBuf>) -> mbqkd::Result<()> {
    match output {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> mbqkd::Result<i32> {
    match cli.command {
        Command::Sweep(a) => {
            let o = SweepOverrides {
                protocol: a.protocol,
                source: a.source,
                decoy_method: a.decoy_method,
                loss_start: a.loss_start,
                loss_stop: a.loss_stop,
                loss_step: a.loss_step,
                dark: a.dark,
                mis_a: a.mis_a,
                mis_b: a.mis_b,
                mis_c: a.mis_c,
                mu: a.mu,
                nu: a.nu,
                pulses: a.pulses.as_deref().map(parse_pulses).transpose()?,
                k_sigma: a.ksigma,
                c_max: a.opt.c_max,
                grid: a.opt.grid,
                output: a.output,
            };
            match commands::sweep(a.config.as_deref(), &o)? {
                SweepOutput::Stdout(csv) => print!("{csv}"),
                SweepOutput::Files(paths) => {
                    for p in paths {
                        eprintln!("wrote {}", p.display());
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Analyze(a) => {
            let r = commands::analyze(&a.file, &a.opt.config(), a.symmetric)?;
            emit(&to_json(&r), a.output.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => {
            let transmission = match (a.eta, a.loss_db) {
                (Some(e), None) => Transmission::Eta(e),
                (None, Some(l)) => Transmission::LossDb(l),
                _ => unreachable!("clap enforces exactly one of --eta and --loss-db"),
            };
            let args = SimulateArgs {
                protocol: a.protocol,
                transmission,
                dark: a.dark,
                mis: [a.mis_a, a.mis_b, a.mis_c],
                from_states: a.from_states,
                pulses: a.pulses.as_deref().map(parse_pulses).transpose()?.flatten(),
            };
            let stats = commands::simulate(&args)?;
            emit(&stats.to_json(), a.output.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::AttackAudit(a) => {
            let out = attack_audit(a.trials, a.seed, a.replay.as_deref(), a.dump.as_deref(), &a.opt.config())?;
            emit(&to_json(&out), a.output.as_ref())?;
            match &out {
                AuditOutcome::Audit(r) => eprintln!(
                    "{} trials: {} sound, {} violations, {} skipped, worst margin {:.3e}",
                    r.trials, r.passes, r.failures, r.skipped, r.worst_margin
                ),
                AuditOutcome::Replay(r) => eprintln!("trial {}: sound = {}, margin {:.3e}", r.trial, r.sound, r.margin),
            }
            Ok(if out.sound() { EXIT_OK } else { EXIT_AUDIT })
        }
    }
}

fn threads() -> Result<Option<usize>, String> {
    match std::env::var("MBQKD_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("MBQKD_THREADS must be a positive integer, got '{v}'")),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match threads() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
