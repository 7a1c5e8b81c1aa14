//! Alternating convex search with random restarts.
//!
//! A restart seeds Haar-random pure states, then alternates the measurement
//! half-step and the state half-step until a full round moves the bound by
//! at most `acs_tol`. The result is certified partially optimal when neither
//! half-step alone, applied to the returned design, improves it by
//! `acs_tol` or more.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{eps_max, lower_bound_check};
use crate::error::{Error, Result};
use crate::quantum::{evaluate, random_density, random_pure, DensityMatrix, Ensemble, ObjectiveBreakdown, PureState};
use crate::subsolvers::{optimize_measurements, optimize_states, StepOptions};

pub const DEFAULT_ACS_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ROUNDS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub d: usize,
    pub n: usize,
    pub eps_bar: f64,
    pub restarts: usize,
    pub free_reference: bool,
    /// Rank of the random reference seed when `free_reference`; `None` means `d`.
    pub reference_rank: Option<usize>,
    pub seed: u64,
    pub acs_tol: f64,
    pub max_rounds: usize,
    /// Sequential, fixed-order execution.
    pub deterministic: bool,
    pub purify: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n: 3,
            eps_bar: 0.0,
            restarts: 1,
            free_reference: false,
            reference_rank: None,
            seed: 0,
            acs_tol: DEFAULT_ACS_TOL,
            max_rounds: DEFAULT_MAX_ROUNDS,
            deterministic: false,
            purify: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.eps_bar >= 0.0) || !self.eps_bar.is_finite() {
            return bad(format!("eps_bar must be finite and >= 0, got {}", self.eps_bar));
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if let Some(r) = self.reference_rank {
            if r == 0 || r > self.d {
                return bad(format!("reference rank {r} outside 1..={}", self.d));
            }
        }
        if !(self.acs_tol > 0.0) {
            return bad(format!("acs_tol must be positive, got {}", self.acs_tol));
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        Ok(())
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            parallel: !self.deterministic,
            purify: self.purify,
            ..StepOptions::default()
        }
    }
}

/// One alternating-search run from a given starting design.
#[derive(Debug, Clone)]
pub struct AcsRun {
    pub ensemble: Ensemble,
    pub breakdown: ObjectiveBreakdown,
    /// Bound of the input followed by the bound after every round.
    pub trace: Vec<f64>,
    /// Bound after every half-step, starting with the input.
    pub half_step_trace: Vec<f64>,
    pub rounds: usize,
    pub partially_optimal: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best: Ensemble,
    pub breakdown: ObjectiveBreakdown,
    pub eps_max: f64,
    pub rounds: usize,
    pub restart_index: usize,
    pub trace: Vec<f64>,
    pub half_step_trace: Vec<f64>,
    pub partially_optimal: bool,
    pub lower_bound_ok: bool,
    /// Final bound of every restart (`None` when that restart failed).
    pub restart_bounds: Vec<Option<f64>>,
}

/// Improvement of each half-step applied once to `ens`: `(measurements, states)`.
pub fn half_step_gains(ens: &Ensemble, free_reference: bool, opts: &StepOptions) -> Result<(f64, f64)> {
    let base = evaluate(ens)?.bound;
    let m = evaluate(&optimize_measurements(ens, opts)?)?.bound;
    let s = evaluate(&optimize_states(ens, free_reference, opts)?)?.bound;
    Ok((base - m, base - s))
}

/// Alternates half-steps from `start` (measurements first).
pub fn run_acs(start: &Ensemble, free_reference: bool, acs_tol: f64, max_rounds: usize, opts: &StepOptions) -> Result<AcsRun> {
    let mut ens = start.clone();
    let mut bound = evaluate(&ens)?.bound;
    let mut trace = vec![bound];
    let mut half_step_trace = vec![bound];
    let mut partially_optimal = false;
    let mut rounds = 0;

    while rounds < max_rounds {
        rounds += 1;
        let measured = optimize_measurements(&ens, opts)?;
        let mid = evaluate(&measured)?.bound;
        half_step_trace.push(mid);
        let stated = optimize_states(&measured, free_reference, opts)?;
        let after = evaluate(&stated)?.bound;
        half_step_trace.push(after);
        trace.push(after);
        let change = (bound - after).abs();
        ens = stated;
        bound = after;
        if change > acs_tol {
            continue;
        }
        // Certify: a single measurement step must not help either. The state
        // step was just applied to these measurements, so it is already optimal.
        let remeasured = optimize_measurements(&ens, opts)?;
        let gain = bound - evaluate(&remeasured)?.bound;
        if gain < acs_tol {
            partially_optimal = true;
            break;
        }
        // Not yet stationary; continue from the improved measurements.
        ens = remeasured;
        bound -= gain;
        half_step_trace.push(bound);
    }

    let breakdown = evaluate(&ens)?;
    Ok(AcsRun {
        ensemble: ens,
        breakdown,
        trace,
        half_step_trace,
        rounds,
        partially_optimal,
    })
}

/// Random generator of restart `index`: ChaCha8 keyed by `seed` on stream `index`.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Random starting design for restart `index`.
pub fn seed_ensemble(cfg: &SolveConfig, index: usize) -> Result<Ensemble> {
    let mut rng = restart_rng(cfg.seed, index);
    let rho_c = if cfg.free_reference {
        random_density(cfg.d, cfg.reference_rank.unwrap_or(cfg.d), &mut rng)?
    } else {
        default_reference(cfg.d)
    };
    let states = (0..cfg.n).map(|_| random_pure(cfg.d, &mut rng).to_density()).collect();
    Ensemble::with_uniform_povms(rho_c, states, cfg.eps_bar)
}

/// `|0⟩⟨0|`
pub fn default_reference(d: usize) -> DensityMatrix {
    PureState::basis(d, 0).to_density()
}

fn finish(run: AcsRun, restart_index: usize, restart_bounds: Vec<Option<f64>>) -> SolveResult {
    let n = run.ensemble.n();
    SolveResult {
        eps_max: eps_max(&run.breakdown, n),
        lower_bound_ok: lower_bound_check(&run.breakdown),
        best: run.ensemble,
        breakdown: run.breakdown,
        rounds: run.rounds,
        restart_index,
        trace: run.trace,
        half_step_trace: run.half_step_trace,
        partially_optimal: run.partially_optimal,
        restart_bounds,
    }
}

/// Multi-restart alternating convex search; returns the best restart.
pub fn acs_solve(cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let opts = cfg.step_options();
    let attempt = |index: usize| -> Result<AcsRun> {
        let start = seed_ensemble(cfg, index)?;
        run_acs(&start, cfg.free_reference, cfg.acs_tol, cfg.max_rounds, &opts)
    };
    let runs: Vec<Result<AcsRun>> = if cfg.deterministic {
        (0..cfg.restarts).map(attempt).collect()
    } else {
        (0..cfg.restarts).into_par_iter().map(attempt).collect()
    };

    let restart_bounds: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.as_ref().ok().map(|run| run.breakdown.bound))
        .collect();
    let mut best: Option<(usize, AcsRun)> = None;
    let mut last_err = None;
    for (index, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| run.breakdown.bound < b.breakdown.bound);
                if better {
                    best = Some((index, run));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((index, run)) => Ok(finish(run, index, restart_bounds)),
        None => Err(Error::AllRestartsFailed {
            restarts: cfg.restarts,
            last: Box::new(last_err.expect("at least one restart ran")),
        }),
    }
}

/// Polishes an existing design; the result is never worse than `ens`.
pub fn warm_solve(ens: &Ensemble, cfg: &SolveConfig) -> Result<SolveResult> {
    if !(cfg.acs_tol > 0.0) || cfg.max_rounds == 0 {
        return Err(Error::InvalidConfig("acs_tol must be positive and max_rounds at least 1".into()));
    }
    let run = run_acs(ens, cfg.free_reference, cfg.acs_tol, cfg.max_rounds, &cfg.step_options())?;
    let bound = run.breakdown.bound;
    Ok(finish(run, 0, vec![Some(bound)]))
}
