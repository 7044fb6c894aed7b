//! Command-line front end. Every command reads one JSON config, runs, and
//! emits a versioned report envelope (JSON and/or a flat CSV table).
//!
//! Exit codes: 0 success; 2 configuration errors (unreadable or malformed
//! config, invalid weights, bad parameter grids, CLI misuse); 3 the trace
//! vertex budget was exceeded mid-run; 4 the model rejected the operation
//! (e.g. no finite tilt root where one is required) or an internal failure.

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use config::{family_weights, Config};
use tracewalk::analysis::{classify, conductance_direction};
use tracewalk::experiments::backtrack::{backtrack_probabilities, BacktrackError};
use tracewalk::experiments::cutpoints::{potential_series, PotentialError};
use tracewalk::experiments::fluctuation::{
    fluctuation_experiment, FluctuationError, MIN_GRID_POINTS, MIN_REPLICAS,
};
use tracewalk::experiments::resistance::resistance_series;
use tracewalk::experiments::tail::{tail_experiment, TailError, MIN_ORDER_STATISTICS, MIN_SAMPLES};
use tracewalk::experiments::trap::{trap_frequencies, TrapError};
use tracewalk::nested::{estimate_velocity, NestedError, DEFAULT_VERTEX_BUDGET};
use tracewalk::report::{Report, TableRow};
use tracewalk::trace::TraceGraph;
use tracewalk::walk::{Layer, RandomSeed, StepDistribution};
use tracewalk::Regime;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<NestedError> for CliError {
    fn from(e: NestedError) -> Self {
        match e {
            NestedError::VertexBudgetExceeded { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<FluctuationError> for CliError {
    fn from(e: FluctuationError) -> Self {
        match e {
            FluctuationError::Nested(inner) => inner.into(),
            FluctuationError::InsufficientGrid => CliError::Internal(e.to_string()),
        }
    }
}

macro_rules! internal_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Internal(e.to_string())
            }
        }
    )*};
}
internal_from!(BacktrackError, TailError, TrapError, PotentialError, serde_json::Error, std::io::Error);

#[derive(Parser)]
#[command(
    name = "tracewalk",
    version,
    about = "Simulator and analysis toolkit for a biased walk on the trace of a biased walk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form profile of a parameter pair: conductance
    /// direction, tilt, root, transport regime
    Classify(CommonArgs),
    /// Run one Monte Carlo experiment
    Run {
        /// Which experiment to run
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Estimate velocities over a grid of layer-1 family gammas
    Sweep(CommonArgs),
    /// Generate a trace and write its binary dump to --out
    DumpTrace(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config file; default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per CPU)
    #[arg(long)]
    workers: Option<usize>,
    /// Output format; `both` writes JSON to --out and CSV alongside it
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Backtrack,
    Tail,
    Resistance,
    Trap,
    Cutpoints,
    Fluctuations,
    Velocity,
}

/// What one command produces besides the envelope: resolved parameters for
/// the config echo and an optional flat table for CSV output.
struct Outcome {
    params: serde_json::Value,
    results: serde_json::Value,
    table: Table,
}

enum Table {
    None,
    Rows(Vec<TableRow>),
    Sweep(Vec<SweepRow>),
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    gamma1: f64,
    regime: String,
    /// True when the pair sits on the ballistic/sub-ballistic boundary;
    /// velocity estimation is skipped there (the scaling limit is not a
    /// plain law of large numbers).
    boundary: bool,
    v_parallel: Option<f64>,
    parallel_stderr: Option<f64>,
    orthogonal_norm: Option<f64>,
    orthogonal_stderr: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Classify(args) => run_command(args, Op::Classify),
        Command::Run { experiment, args } => run_command(args, Op::Experiment(experiment)),
        Command::Sweep(args) => run_command(args, Op::Sweep),
        Command::DumpTrace(args) => run_command(args, Op::DumpTrace),
    }
}

enum Op {
    Classify,
    Experiment(Experiment),
    Sweep,
    DumpTrace,
}

fn run_command(args: CommonArgs, op: Op) -> Result<(), CliError> {
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    let cfg = Config::load(&args.config)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let start = Instant::now();
    let outcome = execute(&cfg, seed, &op, args.out.as_deref())?;

    let mut echo = serde_json::json!({
        "d": cfg.d,
        "layer0": cfg.layer0,
        "seed": seed,
        "params": outcome.params,
    });
    if let Some(l1) = &cfg.layer1 {
        echo["layer1"] = serde_json::to_value(l1)?;
    }
    let report = Report::new(echo, seed, outcome.results)
        .with_runtime(start.elapsed().as_secs_f64());

    if matches!(op, Op::DumpTrace) {
        // --out already holds the binary dump; the summary goes to stdout
        emit(&report.to_json_pretty()?)?;
        return Ok(());
    }
    write_outputs(&args, &report, &outcome.table)
}

/// Print to stdout, treating a closed pipe as a normal exit rather than an
/// error (so `tracewalk ... | head` stays quiet).
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn write_outputs(args: &CommonArgs, report: &Report, table: &Table) -> Result<(), CliError> {
    let json_text = report.to_json_pretty()?;
    match (args.format, &args.out) {
        (Format::Json, Some(path)) => {
            std::fs::write(path, json_text + "\n")?;
        }
        (Format::Json, None) => emit(&json_text)?,
        (Format::Csv, Some(path)) => {
            let mut file = std::fs::File::create(path)?;
            write_csv(&mut file, table)?;
        }
        (Format::Csv, None) => {
            let mut out = Vec::new();
            write_csv(&mut out, table)?;
            emit(String::from_utf8_lossy(&out).trim_end())?;
        }
        (Format::Both, Some(path)) => {
            std::fs::write(path, json_text + "\n")?;
            let mut file = std::fs::File::create(path.with_extension("csv"))?;
            write_csv(&mut file, table)?;
        }
        (Format::Both, None) => {
            return Err(CliError::Config("--format both needs --out".into()));
        }
    }
    Ok(())
}

fn write_csv<W: std::io::Write>(w: &mut W, table: &Table) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    match table {
        Table::None => {
            return Err(CliError::Config(
                "this command has no tabular output; use --format json".into(),
            ))
        }
        Table::Rows(rows) => {
            if rows.is_empty() {
                wtr.write_record(["x", "value", "stderr", "count"])
                    .map_err(|e| CliError::Internal(e.to_string()))?;
            }
            for row in rows {
                wtr.serialize(row)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
            }
        }
        Table::Sweep(rows) => {
            for row in rows {
                wtr.serialize(row)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

fn execute(cfg: &Config, seed: u64, op: &Op, out: Option<&Path>) -> Result<Outcome, CliError> {
    match op {
        Op::Classify => {
            let d0 = cfg.layer0_dist()?;
            let d1 = cfg.layer1_dist()?;
            let profile = classify(&d0, &d1);
            Ok(Outcome {
                params: serde_json::json!({}),
                results: serde_json::to_value(&profile)?,
                table: Table::None,
            })
        }
        Op::Experiment(which) => run_experiment(cfg, seed, *which),
        Op::Sweep => run_sweep(cfg, seed),
        Op::DumpTrace => dump_trace(cfg, seed, out),
    }
}

fn budget_of(cfg: &Config) -> usize {
    cfg.params.vertex_budget.unwrap_or(DEFAULT_VERTEX_BUDGET)
}

fn check_increasing<T: PartialOrd>(grid: &[T], what: &str) -> Result<(), CliError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!(
            "{what} must be nonempty and strictly increasing"
        )));
    }
    Ok(())
}

fn run_experiment(cfg: &Config, seed: u64, which: Experiment) -> Result<Outcome, CliError> {
    let d0 = cfg.layer0_dist()?;
    let d1 = cfg.layer1_dist()?;
    let p = &cfg.params;

    match which {
        Experiment::Backtrack => {
            let depths = p
                .depths
                .clone()
                .unwrap_or_else(|| (1..=8).map(|x| x as f64).collect());
            check_increasing(&depths, "params.depths")?;
            if depths[0] <= 0.0 || !depths.iter().all(|x| x.is_finite()) {
                return Err(CliError::Config("params.depths must be positive".into()));
            }
            let n = p.n.unwrap_or(0);
            let replicas = p.replicas.unwrap_or(10_000);
            if replicas == 0 {
                return Err(CliError::Config("params.replicas must be positive".into()));
            }
            let ell = conductance_direction(&d1).ell;
            let res = backtrack_probabilities(&d0, &ell, &depths, n, replicas, seed)?;
            let rows = res
                .points
                .iter()
                .map(|pt| TableRow {
                    x: pt.depth,
                    value: pt.probability,
                    stderr: Some(pt.stderr),
                    count: Some(pt.hits),
                })
                .collect();
            Ok(Outcome {
                params: serde_json::json!({"depths": depths, "n": n, "replicas": replicas}),
                results: serde_json::to_value(&res)?,
                table: Table::Rows(rows),
            })
        }
        Experiment::Tail => {
            let n = p.n.unwrap_or(0);
            let replicas = p.replicas.unwrap_or(20_000);
            let k = p.hill_k.unwrap_or(0);
            if replicas < MIN_SAMPLES {
                return Err(CliError::Config(format!(
                    "params.replicas must be at least {MIN_SAMPLES} for tail estimation"
                )));
            }
            if k > 0 && (k < MIN_ORDER_STATISTICS || k + 1 > replicas) {
                return Err(CliError::Config(format!(
                    "params.hill_k must lie in {MIN_ORDER_STATISTICS}..replicas"
                )));
            }
            let res = tail_experiment(&d0, &d1, n, replicas, k, seed)?;
            let rows = res
                .estimates
                .iter()
                .map(|est| TableRow {
                    x: est.k as f64,
                    value: est.kappa,
                    stderr: Some(est.stderr),
                    count: None,
                })
                .collect();
            Ok(Outcome {
                params: serde_json::json!({"n": n, "replicas": replicas, "hill_k": k}),
                results: serde_json::to_value(&res)?,
                table: Table::Rows(rows),
            })
        }
        Experiment::Resistance => {
            let checkpoints = p.checkpoints.clone().unwrap_or_else(|| {
                let n = p.n.unwrap_or(100_000);
                [16, 8, 4, 2, 1].iter().map(|div| n / div).collect()
            });
            check_increasing(&checkpoints, "params.checkpoints")?;
            if checkpoints[0] == 0 {
                return Err(CliError::Config(
                    "params.checkpoints must start at 1 or later".into(),
                ));
            }
            let res = resistance_series(&d0, &d1, &checkpoints, &RandomSeed::new(seed, 0));
            let rows = res
                .checkpoints
                .iter()
                .zip(&res.sums)
                .map(|(&n, &s)| TableRow {
                    x: n as f64,
                    value: s,
                    stderr: None,
                    count: None,
                })
                .collect();
            Ok(Outcome {
                params: serde_json::json!({"checkpoints": checkpoints}),
                results: serde_json::to_value(&res)?,
                table: Table::Rows(rows),
            })
        }
        Experiment::Trap => {
            let heights = p.heights.clone().unwrap_or_else(|| vec![1, 2, 3]);
            check_increasing(&heights, "params.heights")?;
            if heights[0] < 1 {
                return Err(CliError::Config("params.heights must be at least 1".into()));
            }
            let width = p.width.unwrap_or(3);
            let replicas = p.replicas.unwrap_or(10_000);
            if replicas == 0 {
                return Err(CliError::Config("params.replicas must be positive".into()));
            }
            let res = trap_frequencies(&d0, &d1, &heights, width, replicas, seed)?;
            let rows = res
                .points
                .iter()
                .map(|pt| TableRow {
                    x: pt.height as f64,
                    value: pt.frequency,
                    stderr: Some(pt.stderr),
                    count: Some(pt.hits),
                })
                .collect();
            Ok(Outcome {
                params: serde_json::json!({
                    "heights": heights, "width": width, "replicas": replicas
                }),
                results: serde_json::to_value(&res)?,
                table: Table::Rows(rows),
            })
        }
        Experiment::Cutpoints => {
            let n = p.n.unwrap_or(100_000);
            if n < 2 {
                return Err(CliError::Config("params.n must be at least 2".into()));
            }
            let graph = TraceGraph::generate(&d0, n, &RandomSeed::new(seed, 0));
            let series = potential_series(&graph, &d1)?;
            let rows = series
                .values
                .iter()
                .map(|v| TableRow {
                    x: v.trajectory_index as f64,
                    value: v.potential,
                    stderr: None,
                    count: None,
                })
                .collect();
            let results = serde_json::json!({
                "log_beta": series.log_beta,
                "count": series.len(),
                "vertices": graph.vertex_count(),
                "mean_index_gap": series.mean_index_gap(),
                "mean_potential_gap": series.mean_potential_gap(),
                "values": series.values,
            });
            Ok(Outcome {
                params: serde_json::json!({"n": n}),
                results,
                table: Table::Rows(rows),
            })
        }
        Experiment::Fluctuations => {
            let grid = p.grid.clone().unwrap_or_else(|| {
                let n = p.n.unwrap_or(80_000);
                vec![n / 8, n / 4, n / 2, n]
            });
            check_increasing(&grid, "params.grid")?;
            let replicas = p.replicas.unwrap_or(200);
            if grid.len() < MIN_GRID_POINTS || grid[0] < 1 || replicas < MIN_REPLICAS {
                return Err(CliError::Config(format!(
                    "fluctuations need at least {MIN_GRID_POINTS} increasing horizons \
                     and {MIN_REPLICAS} replicas"
                )));
            }
            let budget = budget_of(cfg);
            let res = fluctuation_experiment(&d0, &d1, &grid, replicas, seed, budget)?;
            let rows = res
                .grid
                .iter()
                .zip(&res.medians)
                .map(|(&n, &m)| TableRow {
                    x: n as f64,
                    value: m,
                    stderr: None,
                    count: None,
                })
                .collect();
            Ok(Outcome {
                params: serde_json::json!({
                    "grid": grid, "replicas": replicas, "vertex_budget": budget
                }),
                results: serde_json::to_value(&res)?,
                table: Table::Rows(rows),
            })
        }
        Experiment::Velocity => {
            let n = p.n.unwrap_or(100_000);
            let replicas = p.replicas.unwrap_or(32);
            if n == 0 {
                return Err(CliError::Config("params.n must be at least 1".into()));
            }
            if replicas < 2 {
                return Err(CliError::Config("params.replicas must be at least 2".into()));
            }
            let budget = budget_of(cfg);
            let res = estimate_velocity(&d0, &d1, n, replicas, seed, budget)?;
            let rows = res
                .vhat
                .iter()
                .zip(&res.stderr)
                .enumerate()
                .map(|(j, (&v, &se))| TableRow {
                    x: j as f64,
                    value: v,
                    stderr: Some(se),
                    count: None,
                })
                .collect();
            Ok(Outcome {
                params: serde_json::json!({
                    "n": n, "replicas": replicas, "vertex_budget": budget
                }),
                results: serde_json::to_value(&res)?,
                table: Table::Rows(rows),
            })
        }
    }
}

fn run_sweep(cfg: &Config, seed: u64) -> Result<Outcome, CliError> {
    let d0 = cfg.layer0_dist()?;
    let grid = cfg
        .params
        .gamma1_grid
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs params.gamma1_grid".into()))?;
    if grid.is_empty() || !grid.iter().all(|g| g.is_finite() && *g > 0.0) {
        return Err(CliError::Config(
            "params.gamma1_grid must be nonempty, positive, and finite".into(),
        ));
    }
    let k = match &cfg.layer1 {
        None => 1,
        Some(spec) => match (&spec.family, &spec.weights) {
            (Some(f), None) => f.k,
            _ => {
                return Err(CliError::Config(
                    "sweep varies a family layer 1: give layer1.family or omit layer1".into(),
                ))
            }
        },
    };
    let n = cfg.params.n.unwrap_or(100_000);
    let replicas = cfg.params.replicas.unwrap_or(32);
    if n == 0 || replicas < 2 {
        return Err(CliError::Config(
            "sweep needs params.n >= 1 and params.replicas >= 2".into(),
        ));
    }
    let budget = budget_of(cfg);

    let mut rows = Vec::with_capacity(grid.len());
    for (i, &gamma1) in grid.iter().enumerate() {
        let w = family_weights(cfg.d, gamma1, k)
            .map_err(|e| CliError::Config(format!("gamma1_grid[{i}]: {e}")))?;
        let d1 = StepDistribution::validate(&w, Layer::One)
            .map_err(|e| CliError::Config(format!("gamma1_grid[{i}]: {e}")))?;
        let profile = classify(&d0, &d1);
        if profile.regime == Regime::Boundary {
            rows.push(SweepRow {
                gamma1,
                regime: profile.regime.to_string(),
                boundary: true,
                v_parallel: None,
                parallel_stderr: None,
                orthogonal_norm: None,
                orthogonal_stderr: None,
            });
            continue;
        }
        // each grid row gets its own master seed so replica streams never
        // collide across rows
        let v = estimate_velocity(&d0, &d1, n, replicas, seed + i as u64, budget)?;
        rows.push(SweepRow {
            gamma1,
            regime: profile.regime.to_string(),
            boundary: false,
            v_parallel: Some(v.parallel_component),
            parallel_stderr: Some(v.parallel_stderr),
            orthogonal_norm: Some(v.orthogonal_norm),
            orthogonal_stderr: Some(v.orthogonal_stderr),
        });
    }

    Ok(Outcome {
        params: serde_json::json!({
            "gamma1_grid": grid, "n": n, "replicas": replicas, "vertex_budget": budget
        }),
        results: serde_json::to_value(&rows)?,
        table: Table::Sweep(rows),
    })
}

fn dump_trace(cfg: &Config, seed: u64, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = out.ok_or_else(|| {
        CliError::Config("dump-trace writes a binary file and needs --out".into())
    })?;
    let d0 = cfg.layer0_dist()?;
    let n = cfg.params.n.unwrap_or(100_000);
    if n == 0 {
        return Err(CliError::Config("params.n must be at least 1".into()));
    }
    let graph = TraceGraph::generate(&d0, n, &RandomSeed::new(seed, 0));
    let file = std::fs::File::create(out)?;
    let mut writer = std::io::BufWriter::new(file);
    graph.dump(&mut writer)?;
    writer.flush()?;
    let results = serde_json::json!({
        "path": out.display().to_string(),
        "vertices": graph.vertex_count(),
        "edges": graph.edge_count(),
        "steps": n,
    });
    Ok(Outcome {
        params: serde_json::json!({"n": n}),
        results,
        table: Table::None,
    })
}
