//! Command-line front end: single runs, knn-versus-fifo comparisons, direct
//! path-condition solving and a listing of the bundled units.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use pathsel_core::corpus::{self, UNITS};
use pathsel_core::engine::{self, Clock, EngineConfig, Mode, RunReport};
use pathsel_core::generator::{solve, SearchBudget, SolveOutcome};
use pathsel_core::ir::{parse_unit, UnitDef};
use pathsel_core::selector::BucketProbs;
use pathsel_core::symcore::PathCondition;

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXHAUSTED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pathsel", version, about = "Concolic test generation with learned path selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its report.
    Run {
        program: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run knn and fifo modes once per seed and tabulate the results.
    Compare {
        program: PathBuf,
        /// Comma-separated master seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Search for arguments satisfying one path condition.
    SolvePc {
        program: PathBuf,
        pc: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// List the bundled benchmark units.
    CorpusList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Knn,
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Wall,
    Virtual,
}

/// Engine flags. Anything left unset takes the desk-scale default, or the
/// original study's value under `--paper-scale`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Time budget of the whole run, in minutes.
    #[arg(long)]
    pub budget_min: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Time budget of one search, in seconds.
    #[arg(long)]
    pub pc_budget_s: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub recache_threshold: Option<usize>,
    /// Four comma-separated bucket probabilities.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub bucket_probs: Option<Vec<f64>>,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV summary path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// 30 minute runs, 5 workers, 180 s per search.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, value_enum)]
    pub clock: Option<ClockArg>,
    /// Fitness evaluations per simulated second under `--clock virtual`.
    #[arg(long, default_value_t = 10_000)]
    pub evals_per_sec: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Input(_) | CliError::Io(_) => EXIT_INPUT,
        }
    }
}

fn duration_from(value: f64, what: &str, scale: f64) -> Result<Duration, CliError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CliError::Config(format!("{what} must be positive, got {value}")));
    }
    Ok(Duration::from_secs_f64(value * scale))
}

impl Flags {
    pub fn resolve(&self) -> Result<EngineConfig, CliError> {
        let mut c = if self.paper_scale {
            EngineConfig::paper_scale()
        } else {
            EngineConfig::default()
        };
        if let Some(m) = self.mode {
            c.mode = match m {
                ModeArg::Knn => Mode::Knn,
                ModeArg::Fifo => Mode::Fifo,
            };
        }
        if let Some(b) = self.budget_min {
            c.time_budget = duration_from(b, "--budget-min", 60.0)?;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(p) = self.pc_budget_s {
            c.pc_budget = duration_from(p, "--pc-budget-s", 1.0)?;
        }
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if let Some(t) = self.recache_threshold {
            c.recache_threshold = t;
        }
        if let Some(p) = &self.bucket_probs {
            let p: [f64; 4] = p
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Config(format!("--bucket-probs needs 4 values, got {}", p.len())))?;
            c.bucket_probs = BucketProbs::new(p).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.clock == Some(ClockArg::Virtual) {
            c.clock = Clock::Virtual {
                evals_per_sec: self.evals_per_sec,
            };
        }
        c.validate().map_err(CliError::Config)?;
        Ok(c)
    }
}

/// Reads and parses a unit. A path that does not exist but names a bundled
/// unit (`sample_class.tu` or `sample_class`) loads the bundled copy.
pub fn load_unit(path: &Path) -> Result<UnitDef, CliError> {
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let bundled = corpus::unit(name).or_else(|| corpus::unit(&format!("{name}.tu")));
            match bundled {
                Some(u) if path.parent().map_or(true, |p| p.as_os_str().is_empty() || p.ends_with("corpus")) => {
                    u.source.to_string()
                }
                _ => return Err(CliError::Input(format!("cannot read {}: {e}", path.display()))),
            }
        }
    };
    parse_unit(&source).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn cmd_run(unit: &UnitDef, flags: &Flags) -> Result<RunReport, CliError> {
    let config = flags.resolve()?;
    let report = engine::run(unit, &config);
    if let Some(p) = &flags.out {
        std::fs::write(p, report.to_json())?;
    }
    if let Some(p) = &flags.csv {
        std::fs::write(p, report.to_csv())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub knn_feasible: u64,
    pub knn_infeasible: u64,
    pub fifo_feasible: u64,
    pub fifo_infeasible: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub config: EngineConfig,
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub reports: Vec<(RunReport, RunReport)>,
}

fn mean(xs: impl Iterator<Item = u64>) -> f64 {
    let v: Vec<u64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<u64>() as f64 / v.len() as f64
    }
}

impl Comparison {
    pub fn knn_feasible_mean(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.knn_feasible))
    }

    pub fn fifo_feasible_mean(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.fifo_feasible))
    }

    pub fn knn_infeasible_mean(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.knn_infeasible))
    }

    pub fn fifo_infeasible_mean(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.fifo_infeasible))
    }

    /// knn over fifo mean feasible count; infinite when fifo found none.
    pub fn ratio(&self) -> f64 {
        self.knn_feasible_mean() / self.fifo_feasible_mean()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:>6} {:>12} {:>14} {:>13} {:>15}", "seed", "knn feasible", "knn infeasible", "fifo feasible", "fifo infeasible").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:>6} {:>12} {:>14} {:>13} {:>15}",
                r.seed, r.knn_feasible, r.knn_infeasible, r.fifo_feasible, r.fifo_infeasible
            )
            .unwrap();
        }
        writeln!(
            s,
            "{:>6} {:>12.2} {:>14.2} {:>13.2} {:>15.2}",
            "mean",
            self.knn_feasible_mean(),
            self.knn_infeasible_mean(),
            self.fifo_feasible_mean(),
            self.fifo_infeasible_mean()
        )
        .unwrap();
        writeln!(s, "feasible ratio knn/fifo: {:.3}", self.ratio()).unwrap();
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,knn_feasible,knn_infeasible,fifo_feasible,fifo_infeasible\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.seed, r.knn_feasible, r.knn_infeasible, r.fifo_feasible, r.fifo_infeasible
            )
            .unwrap();
        }
        s
    }
}

/// Runs both modes for every seed with otherwise identical settings.
pub fn compare(unit: &UnitDef, seeds: &[u64], base: &EngineConfig) -> Result<Comparison, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("at least one seed is needed".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &seed in seeds {
        let with = |mode| EngineConfig {
            mode,
            master_seed: seed,
            ..base.clone()
        };
        let knn = engine::run(unit, &with(Mode::Knn));
        let fifo = engine::run(unit, &with(Mode::Fifo));
        rows.push(ComparisonRow {
            seed,
            knn_feasible: knn.counters.feasible_analyzed,
            knn_infeasible: knn.counters.infeasible_analyzed,
            fifo_feasible: fifo.counters.feasible_analyzed,
            fifo_infeasible: fifo.counters.infeasible_analyzed,
        });
        reports.push((knn, fifo));
    }
    Ok(Comparison {
        config: base.clone(),
        rows,
        reports,
    })
}

pub fn cmd_compare(unit: &UnitDef, seeds: &[u64], flags: &Flags) -> Result<Comparison, CliError> {
    let c = compare(unit, seeds, &flags.resolve()?)?;
    if let Some(p) = &flags.out {
        std::fs::write(p, serde_json::to_string_pretty(&c).expect("comparison serializes"))?;
    }
    if let Some(p) = &flags.csv {
        std::fs::write(p, c.to_csv())?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvePcResult {
    /// Solving arguments, or `None` when the budget ran out.
    pub args: Option<Vec<i64>>,
    pub evaluations: u64,
    pub elapsed: Duration,
}

/// Parses `pc_text` against the unit's fields and runs one search.
pub fn cmd_solve_pc(unit: &UnitDef, pc_text: &str, flags: &Flags) -> Result<SolvePcResult, CliError> {
    let config = flags.resolve()?;
    let pc = PathCondition::parse(pc_text)
        .and_then(|pc| pc.resolve_against(unit))
        .map_err(|e| CliError::Input(format!("bad path condition: {e}")))?;
    let mut search = config.search.clone();
    search.step_limit = config.step_limit;
    search.budget = match config.clock {
        Clock::Wall => SearchBudget::Wall(config.pc_budget),
        Clock::Virtual { evals_per_sec } => {
            SearchBudget::Evaluations((config.pc_budget.as_secs_f64() * evals_per_sec as f64).ceil() as u64)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let started = Instant::now();
    let report = solve(unit, &pc, &search, &mut rng);
    Ok(SolvePcResult {
        args: match report.outcome {
            SolveOutcome::Solved(t) => Some(t.args),
            SolveOutcome::Exhausted => None,
        },
        evaluations: report.evaluations,
        elapsed: started.elapsed(),
    })
}

fn summary(r: &RunReport) -> String {
    let c = &r.counters;
    format!(
        "{} {}: {} feasible, {} infeasible, {} tests, {} alternatives ({} duplicates), coverage {}/{}\n",
        r.unit,
        r.config.mode.name(),
        c.feasible_analyzed,
        c.infeasible_analyzed,
        c.tests_generated,
        c.alternatives_synthesized,
        c.duplicates_suppressed,
        r.coverage.covered,
        r.coverage.total,
    )
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Run { program, flags } => {
            let unit = load_unit(&program)?;
            let report = cmd_run(&unit, &flags)?;
            out.write_all(summary(&report).as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Compare { program, seeds, flags } => {
            let unit = load_unit(&program)?;
            let c = cmd_compare(&unit, &seeds, &flags)?;
            out.write_all(c.to_text().as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::SolvePc { program, pc, flags } => {
            let unit = load_unit(&program)?;
            let r = cmd_solve_pc(&unit, &pc, &flags)?;
            match r.args {
                Some(args) => {
                    let args: Vec<String> = args.iter().map(i64::to_string).collect();
                    writeln!(out, "solved: {}", args.join(" "))?;
                    Ok(EXIT_OK)
                }
                None => {
                    writeln!(out, "exhausted after {} evaluations", r.evaluations)?;
                    Ok(EXIT_EXHAUSTED)
                }
            }
        }
        Command::CorpusList => {
            for u in UNITS {
                let def = u.parse();
                writeln!(out, "{:<18} {} ({} parameters)", u.file, def.name, def.params.len())?;
            }
            Ok(EXIT_OK)
        }
    }
}

/// Entry point shared by the binary and tests. Returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
