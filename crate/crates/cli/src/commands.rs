use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context};
use bclm_core::acs::{run_acs, seed_ensemble, DEFAULT_ACS_TOL, DEFAULT_MAX_ROUNDS};
use bclm_core::analysis::{eps_max, literature_bounds, lower_bound, lower_bound_check};
use bclm_core::{acs_solve, evaluate, Error, SolveConfig, SolveResult};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::format::{build_ensemble, read_file, LoadedFile, SolutionFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Environment variable that takes precedence over `--jobs`.
pub const JOBS_ENV: &str = "BCLM_JOBS";

#[derive(Debug, Parser)]
#[command(name = "bclm", version, about = "Search for BCLM experiments with small certified bounds on k0")]
pub struct Cli {
    /// Worker threads (overridden by BCLM_JOBS).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the multi-restart search for one (d, n).
    Solve(SolveArgs),
    /// Validate a solution or ensemble file and recompute its bound.
    Eval {
        path: PathBuf,
    },
    /// Solve every (d, n) cell of a grid and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Time independent single-restart runs for histogramming.
    Bench(BenchArgs),
    /// Print known bounds from the literature and the convex-relaxation floor.
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Average tolerated error ε̄.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Base seed; restart k uses stream k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optimize the reference state as well (seeded mixed).
    #[arg(long)]
    pub free_reference: bool,
    /// Rank of the random reference seed (default d).
    #[arg(long)]
    pub reference_rank: Option<usize>,
    /// Run restarts sequentially in a fixed order.
    #[arg(long)]
    pub deterministic: bool,
    /// Round near-projective measurements to exact projectors.
    #[arg(long)]
    pub purify: bool,
    /// Stop once a round improves the bound by less than this.
    #[arg(long, default_value_t = DEFAULT_ACS_TOL)]
    pub acs_tol: f64,
    /// Round limit per restart.
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    pub max_rounds: usize,
}

impl SearchArgs {
    fn config(&self, d: usize, n: usize, restarts: usize) -> SolveConfig {
        SolveConfig {
            d,
            n,
            eps_bar: self.epsilon,
            restarts,
            free_reference: self.free_reference,
            reference_rank: self.reference_rank,
            seed: self.seed,
            acs_tol: self.acs_tol,
            max_rounds: self.max_rounds,
            deterministic: self.deterministic,
            purify: self.purify,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Hilbert-space dimension.
    #[arg(long)]
    pub d: usize,
    /// Number of states besides the reference.
    #[arg(long)]
    pub n: usize,
    /// Independent random starts.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Where to write the solution file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Inclusive range `a:b`.
    #[arg(long, value_parser = parse_range)]
    pub d_range: (usize, usize),
    /// Inclusive range `a:b`.
    #[arg(long, value_parser = parse_range)]
    pub n_range: (usize, usize),
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long)]
    pub csv: PathBuf,
    /// Directory for one solution file per cell.
    #[arg(long)]
    pub solutions_dir: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub d: usize,
    /// Inclusive range `a:b`.
    #[arg(long, value_parser = parse_range)]
    pub n_range: (usize, usize),
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub csv: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

/// Parses an inclusive range `a:b` (or a single value `a`).
pub fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// One CSV row of `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub n: usize,
    pub eps_bar: f64,
    pub best_bound: f64,
    pub eps_max: f64,
    pub restarts: usize,
    pub wall_time_ms: u64,
    pub rounds: usize,
}

/// One CSV row of `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub trial: usize,
    pub objective: f64,
    pub wall_time_ms: f64,
    pub rounds: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(cli.jobs) {
        eprintln!("error: {e:#}");
        return EXIT_USAGE;
    }
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Eval { path } => cmd_eval(&path),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Bounds { d, n, epsilon } => cmd_bounds(d, n, epsilon),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn configure_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let jobs = match std::env::var(JOBS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("{JOBS_ENV}={v} is not a count"))?),
        Err(_) => flag,
    };
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

fn solver_exit(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    }
}

fn print_summary(res: &SolveResult, n: usize, eps_bar: f64) {
    let b = &res.breakdown;
    println!("bound        {:.6}", b.bound);
    println!("A            {:.6}", b.numerator_a);
    println!("B            {:.6}", b.denominator_b);
    println!("eps_max      {:.6}", res.eps_max);
    println!("lower bound  {:.6}", lower_bound(n, eps_bar));
    println!(
        "restart {} of {}, {} rounds, partially optimal: {}",
        res.restart_index,
        res.restart_bounds.len(),
        res.rounds,
        res.partially_optimal
    );
}

pub fn cmd_solve(args: &SolveArgs) -> anyhow::Result<i32> {
    let cfg = args.search.config(args.d, args.n, args.restarts);
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return Ok(EXIT_USAGE);
    }
    let res = match acs_solve(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(solver_exit(&e));
        }
    };
    print_summary(&res, cfg.n, cfg.eps_bar);
    if let Some(out) = &args.out {
        SolutionFile::from_result(&cfg, &res).write(out)?;
        println!("wrote {}", out.display());
    }
    Ok(EXIT_OK)
}

pub fn cmd_eval(path: &Path) -> anyhow::Result<i32> {
    let loaded = match read_file(path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_USAGE);
        }
    };
    let ens = match build_ensemble(loaded.ensemble()) {
        Ok(ens) => ens,
        Err(issues) => {
            for issue in &issues {
                println!("invalid: {issue}");
            }
            return Ok(EXIT_INVARIANT);
        }
    };
    let b = match evaluate(&ens) {
        Ok(b) => b,
        Err(e) => {
            println!("invalid: {e}");
            return Ok(EXIT_INVARIANT);
        }
    };
    let n = ens.n();
    println!("d = {}, n = {}, eps_bar = {}", ens.dim(), n, ens.eps_bar());
    for ((i, j), v) in &b.antidist {
        println!("  A[{},{}] = {v:.6}", i + 1, j + 1);
    }
    for (k, o) in b.overlaps.iter().enumerate() {
        println!("  overlap[{}] = {o:.6}", k + 1);
    }
    println!("A            {:.6}", b.numerator_a);
    println!("B            {:.6}", b.denominator_b);
    println!("bound        {:.6}", b.bound);
    println!("eps_max      {:.6}", eps_max(&b, n));
    println!("lower bound  {:.6}", lower_bound(n, ens.eps_bar()));

    let mut issues = Vec::new();
    if !lower_bound_check(&b) {
        issues.push(format!("bound {} is below the floor {}", b.bound, lower_bound(n, ens.eps_bar())));
    }
    if let LoadedFile::Solution(file) = &loaded {
        let stored = file.breakdown.bound;
        if (stored - b.bound).abs() > 1e-9 * (1.0 + b.bound.abs()) {
            issues.push(format!("stored bound {stored} disagrees with recomputed {}", b.bound));
        }
    }
    for issue in &issues {
        println!("invalid: {issue}");
    }
    Ok(if issues.is_empty() { EXIT_OK } else { EXIT_INVARIANT })
}

fn flush_row<T: Serialize>(writer: &Mutex<csv::Writer<std::fs::File>>, row: &T) -> anyhow::Result<()> {
    let mut w = writer.lock().expect("csv writer poisoned");
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

fn elapsed_ms(start: Instant, deterministic: bool) -> u64 {
    // Timings are zeroed under --deterministic so that CSV output is reproducible.
    if deterministic {
        0
    } else {
        start.elapsed().as_millis() as u64
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<i32> {
    let cells: Vec<(usize, usize)> = (args.d_range.0..=args.d_range.1)
        .flat_map(|d| (args.n_range.0..=args.n_range.1).map(move |n| (d, n)))
        .collect();
    for &(d, n) in &cells {
        if let Err(e) = args.search.config(d, n, args.restarts).validate() {
            eprintln!("error: {e}");
            return Ok(EXIT_USAGE);
        }
    }
    if let Some(dir) = &args.solutions_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let writer = Mutex::new(csv::Writer::from_path(&args.csv).with_context(|| format!("creating {}", args.csv.display()))?);
    let deterministic = args.search.deterministic;

    let run_cell = |&(d, n): &(usize, usize)| -> anyhow::Result<bool> {
        let cfg = args.search.config(d, n, args.restarts);
        let start = Instant::now();
        let res = match acs_solve(&cfg) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("cell d={d} n={n} failed: {e}");
                return Ok(false);
            }
        };
        let row = SweepRow {
            d,
            n,
            eps_bar: cfg.eps_bar,
            best_bound: res.breakdown.bound,
            eps_max: res.eps_max,
            restarts: cfg.restarts,
            wall_time_ms: elapsed_ms(start, deterministic),
            rounds: res.rounds,
        };
        if let Some(dir) = &args.solutions_dir {
            SolutionFile::from_result(&cfg, &res).write(&dir.join(format!("d{d}_n{n}.json")))?;
        }
        flush_row(&writer, &row)?;
        println!("d={d} n={n} bound={:.6} eps_max={:.6}", row.best_bound, row.eps_max);
        Ok(true)
    };
    let results: Vec<anyhow::Result<bool>> = if deterministic {
        cells.iter().map(run_cell).collect()
    } else {
        cells.par_iter().map(run_cell).collect()
    };
    let mut all_ok = true;
    for r in results {
        all_ok &= r?;
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_SOLVER })
}

pub fn cmd_bench(args: &BenchArgs) -> anyhow::Result<i32> {
    if args.trials == 0 {
        eprintln!("error: --trials must be at least 1");
        return Ok(EXIT_USAGE);
    }
    let ns: Vec<usize> = (args.n_range.0..=args.n_range.1).collect();
    for &n in &ns {
        if let Err(e) = args.search.config(args.d, n, args.trials).validate() {
            eprintln!("error: {e}");
            return Ok(EXIT_USAGE);
        }
    }
    let writer = Mutex::new(csv::Writer::from_path(&args.csv).with_context(|| format!("creating {}", args.csv.display()))?);
    let deterministic = args.search.deterministic;
    let jobs: Vec<(usize, usize)> = ns.iter().flat_map(|&n| (0..args.trials).map(move |t| (n, t))).collect();

    let run_trial = |&(n, trial): &(usize, usize)| -> anyhow::Result<Option<BenchRow>> {
        let cfg = args.search.config(args.d, n, args.trials);
        let opts = cfg.step_options();
        let start = Instant::now();
        let outcome = seed_ensemble(&cfg, trial)
            .and_then(|ens| run_acs(&ens, cfg.free_reference, cfg.acs_tol, cfg.max_rounds, &opts));
        let wall = if deterministic { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
        match outcome {
            Ok(run) => {
                let row = BenchRow {
                    n,
                    trial,
                    objective: run.breakdown.bound,
                    wall_time_ms: wall,
                    rounds: run.rounds,
                };
                flush_row(&writer, &row)?;
                Ok(Some(row))
            }
            Err(e) => {
                eprintln!("trial n={n} #{trial} failed: {e}");
                Ok(None)
            }
        }
    };
    let results: Vec<anyhow::Result<Option<BenchRow>>> = if deterministic {
        jobs.iter().map(run_trial).collect()
    } else {
        jobs.par_iter().map(run_trial).collect()
    };
    let mut rows = Vec::new();
    let mut failed = false;
    for r in results {
        match r? {
            Some(row) => rows.push(row),
            None => failed = true,
        }
    }
    for &n in &ns {
        let times: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.wall_time_ms).collect();
        if times.is_empty() {
            continue;
        }
        let best = rows.iter().filter(|r| r.n == n).map(|r| r.objective).fold(f64::INFINITY, f64::min);
        println!(
            "n={n} trials={} mean_ms={:.1} best={best:.6}",
            times.len(),
            times.iter().sum::<f64>() / times.len() as f64
        );
    }
    Ok(if failed { EXIT_SOLVER } else { EXIT_OK })
}

pub fn cmd_bounds(d: usize, n: usize, epsilon: f64) -> anyhow::Result<i32> {
    if d < 2 || n < 1 || !(epsilon >= 0.0) {
        eprintln!("error: need d >= 2, n >= 1 and epsilon >= 0");
        return Ok(EXIT_USAGE);
    }
    println!("lower bound (n={n}, eps_bar={epsilon}): {:.6}", lower_bound(n, epsilon));
    let known = literature_bounds(d, n);
    if known.is_empty() {
        println!("no known bound applies to d={d}, n={n}");
    }
    for b in known {
        let rel = if b.strict { "<" } else { "<=" };
        println!("{:<18} k0 {rel} {:.6}   ({})", b.name, b.value, b.applicability);
    }
    Ok(EXIT_OK)
}
