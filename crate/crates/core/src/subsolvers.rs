//! The two half-steps of the alternating search.
//!
//! * Measurements with states fixed: the objective is linear in the POVMs
//!   and separates into one three-block SDP per pair.
//! * States with measurements fixed: `A/B` is convex over concave, solved by
//!   Dinkelbach iterations whose parametric problems are SDPs with the
//!   nuclear norm in epigraph form `ρ_c − ρ_i = P_i − N_i`, `P_i, N_i ⪰ 0`.
//!
//! Both steps keep the incoming block whenever the candidate does not
//! strictly improve the exactly evaluated objective, so neither step can
//! increase the bound.

use rayon::prelude::*;

use crate::dinkelbach::{dinkelbach, DinkelbachState, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::matcore::{polar_unitary, ComplexMatrix, HermitianMatrix};
use crate::quantum::{antidist, evaluate, pairs, DensityMatrix, Ensemble, PovmTriple};
use crate::sdp::{matrix_equality, solve_sdp, EqConstraint, SdpOptions, SdpProblem, SdpSolution};

/// Eigenvalues within this distance of 0 or 1 are rounded by purification.
pub const PURIFY_EIG_TOL: f64 = 1e-4;
/// Largest objective change a purified POVM may introduce.
pub const PURIFY_OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub sdp: SdpOptions,
    pub dinkelbach_tol: f64,
    pub dinkelbach_max_iter: usize,
    /// Solve independent SDPs on the rayon pool. Results do not depend on it.
    pub parallel: bool,
    /// Round near-projective POVMs to exact projective measurements.
    pub purify: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            dinkelbach_tol: DEFAULT_TOL,
            dinkelbach_max_iter: DEFAULT_MAX_ITER,
            parallel: false,
            purify: false,
        }
    }
}

/// `min tr(E₁ρ_i) + tr(E₂ρ_j) + tr(E₃ρ_c)` over POVMs `ΣE_k = I, E_k ⪰ 0`.
pub fn measurement_subproblem(rho_i: &DensityMatrix, rho_j: &DensityMatrix, rho_c: &DensityMatrix) -> SdpProblem {
    let d = rho_c.dim();
    let cons = matrix_equality(&[(0, 1.0), (1, 1.0), (2, 1.0)], &HermitianMatrix::identity(d));
    SdpProblem {
        blocks: vec![d; 3],
        cost: vec![rho_i.matrix().clone(), rho_j.matrix().clone(), rho_c.matrix().clone()],
        constraints: cons,
    }
}

/// Optimal measurement for one triple together with the raw SDP certificate.
pub fn optimal_povm(
    rho_i: &DensityMatrix,
    rho_j: &DensityMatrix,
    rho_c: &DensityMatrix,
    opts: &SdpOptions,
) -> Result<(PovmTriple, SdpSolution)> {
    let problem = measurement_subproblem(rho_i, rho_j, rho_c);
    let sol = solve_sdp(&problem, opts)?;
    let povm = PovmTriple::repaired([sol.primal[0].clone(), sol.primal[1].clone(), sol.primal[2].clone()])?;
    Ok((povm, sol))
}

/// Rounds a numerically projective POVM to an exact projective one.
///
/// Returns `None` when some eigenvalue is not within [`PURIFY_EIG_TOL`] of
/// 0 or 1, when the rank-one parts do not form a basis, or when the
/// objective would move by more than [`PURIFY_OBJECTIVE_TOL`].
pub fn purify_povm(
    povm: &PovmTriple,
    rho_i: &DensityMatrix,
    rho_j: &DensityMatrix,
    rho_c: &DensityMatrix,
) -> Option<PovmTriple> {
    let d = povm.dim();
    let mut columns: Vec<(usize, Vec<num_complex::Complex64>)> = Vec::with_capacity(d);
    for (k, e) in povm.elements().iter().enumerate() {
        let eig = e.eig();
        for (idx, &l) in eig.eigenvalues.iter().enumerate() {
            if (l - 1.0).abs() <= PURIFY_EIG_TOL {
                columns.push((k, eig.eigenvectors.column(idx)));
            } else if l.abs() > PURIFY_EIG_TOL {
                return None;
            }
        }
    }
    if columns.len() != d {
        return None;
    }
    let mut basis = ComplexMatrix::zeros(d);
    for (c, (_, v)) in columns.iter().enumerate() {
        for r in 0..d {
            basis[(r, c)] = v[r];
        }
    }
    let unitary = polar_unitary(&basis).ok()?;
    let mut elements = [0, 1, 2].map(|_| HermitianMatrix::zeros(d));
    for (c, (k, _)) in columns.iter().enumerate() {
        elements[*k] = &elements[*k] + &HermitianMatrix::projector(&unitary.column(c));
    }
    let purified = PovmTriple::new(elements[0].clone(), elements[1].clone(), elements[2].clone()).ok()?;
    let before = antidist(povm, rho_i, rho_j, rho_c).ok()?;
    let after = antidist(&purified, rho_i, rho_j, rho_c).ok()?;
    ((after - before).abs() <= PURIFY_OBJECTIVE_TOL).then_some(purified)
}

fn map_maybe_parallel<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Re-optimizes every pair's POVM with the states held fixed.
pub fn optimize_measurements(ens: &Ensemble, opts: &StepOptions) -> Result<Ensemble> {
    let states = ens.states();
    let rho_c = ens.reference();
    let pair_list: Vec<(usize, usize)> = pairs(ens.n()).collect();
    let updated = map_maybe_parallel(&pair_list, opts.parallel, |&(i, j)| -> Result<PovmTriple> {
        let current = ens.povm(i, j);
        let (candidate, _) = optimal_povm(&states[i], &states[j], rho_c, &opts.sdp).map_err(|e| Error::PairFailed {
            i,
            j,
            source: Box::new(e),
        })?;
        let candidate = if opts.purify {
            purify_povm(&candidate, &states[i], &states[j], rho_c).unwrap_or(candidate)
        } else {
            candidate
        };
        let old = antidist(current, &states[i], &states[j], rho_c)?;
        let new = antidist(&candidate, &states[i], &states[j], rho_c)?;
        Ok(if new < old { candidate } else { current.clone() })
    });
    let povms = updated.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = ens.clone();
    out.replace_povms(povms);
    Ok(out)
}

/// `F_i = Σ_{j<i} E_{ij1} + Σ_{j>i} E_{ji2}`: the cost multiplying `ρ_i` in the numerator.
pub fn state_costs(ens: &Ensemble) -> Vec<HermitianMatrix> {
    let mut costs = vec![HermitianMatrix::zeros(ens.dim()); ens.n()];
    for (i, j) in pairs(ens.n()) {
        let e = ens.povm(i, j).elements();
        costs[i] = &costs[i] + &e[0];
        costs[j] = &costs[j] + &e[1];
    }
    costs
}

/// `Σ_{i>j} E_{ij3}`: the cost multiplying `ρ_c`.
pub fn reference_cost(ens: &Ensemble) -> HermitianMatrix {
    let mut acc = HermitianMatrix::zeros(ens.dim());
    for p in ens.povms() {
        acc = &acc + p.element(2);
    }
    acc
}

/// Parametric problem for one state with the reference fixed:
/// `min tr(F ρ) + (θ/2)·tr(P + N)` s.t. `ρ + P − N = ρ_c`, `tr ρ = 1`.
/// Blocks are `[ρ, P, N]`.
pub fn fixed_reference_subproblem(cost: &HermitianMatrix, rho_c: &DensityMatrix, theta: f64) -> SdpProblem {
    let d = rho_c.dim();
    let half = HermitianMatrix::identity(d).scale(0.5 * theta);
    let mut cons = vec![EqConstraint::trace(0, d, 1.0)];
    cons.extend(matrix_equality(&[(0, 1.0), (1, 1.0), (2, -1.0)], rho_c.matrix()));
    SdpProblem {
        blocks: vec![d; 3],
        cost: vec![cost.clone(), half.clone(), half],
        constraints: cons,
    }
}

/// Joint parametric problem with the reference free. Blocks are
/// `[ρ_c, ρ_1..ρ_n, P_1..P_n, N_1..N_n]` with `ρ_c − ρ_i − P_i + N_i = 0`.
pub fn free_reference_subproblem(costs: &[HermitianMatrix], ref_cost: &HermitianMatrix, theta: f64) -> SdpProblem {
    let n = costs.len();
    let d = ref_cost.dim();
    let half = HermitianMatrix::identity(d).scale(0.5 * theta);
    let mut cost = Vec::with_capacity(3 * n + 1);
    cost.push(ref_cost.clone());
    cost.extend(costs.iter().cloned());
    cost.extend(std::iter::repeat_n(half, 2 * n));
    let mut cons = Vec::with_capacity(1 + n * (d * d + 1));
    cons.push(EqConstraint::trace(0, d, 1.0));
    for i in 0..n {
        cons.push(EqConstraint::trace(1 + i, d, 1.0));
    }
    let zero = HermitianMatrix::zeros(d);
    for i in 0..n {
        cons.extend(matrix_equality(
            &[(0, 1.0), (1 + i, -1.0), (1 + n + i, -1.0), (1 + 2 * n + i, 1.0)],
            &zero,
        ));
    }
    SdpProblem {
        blocks: vec![d; 3 * n + 1],
        cost,
        constraints: cons,
    }
}

/// Outcome of a state half-step.
#[derive(Debug, Clone)]
pub struct StateStep {
    pub ensemble: Ensemble,
    pub dinkelbach: DinkelbachState<()>,
}

/// Re-optimizes the states (and the reference when `free_reference`) with
/// the measurements held fixed.
pub fn optimize_states(ens: &Ensemble, free_reference: bool, opts: &StepOptions) -> Result<Ensemble> {
    optimize_states_traced(ens, free_reference, opts).map(|s| s.ensemble)
}

pub fn optimize_states_traced(ens: &Ensemble, free_reference: bool, opts: &StepOptions) -> Result<StateStep> {
    let costs = state_costs(ens);
    let ref_cost = reference_cost(ens);
    let ratio = |e: &Ensemble| -> Result<(f64, f64)> {
        let b = evaluate(e)?;
        Ok((b.numerator_a, b.denominator_b))
    };

    let parametric = |theta: f64, current: &Ensemble| -> Result<Ensemble> {
        let mut next = current.clone();
        if free_reference {
            let problem = free_reference_subproblem(&costs, &ref_cost, theta);
            let sol = solve_sdp(&problem, &opts.sdp)?;
            let n = current.n();
            let rho_c = DensityMatrix::repaired(&sol.primal[0])?;
            let states = (0..n)
                .map(|i| DensityMatrix::repaired(&sol.primal[1 + i]))
                .collect::<Result<Vec<_>>>()?;
            next.replace_states(Some(rho_c), states);
        } else {
            let rho_c = current.reference();
            let states = map_maybe_parallel(&costs, opts.parallel, |cost| -> Result<DensityMatrix> {
                let problem = fixed_reference_subproblem(cost, rho_c, theta);
                let sol = solve_sdp(&problem, &opts.sdp)?;
                DensityMatrix::repaired(&sol.primal[0])
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            next.replace_states(None, states);
        }
        Ok(next)
    };

    let state = dinkelbach(parametric, ratio, ens.clone(), opts.dinkelbach_tol, opts.dinkelbach_max_iter)?;
    let DinkelbachState {
        theta,
        iterate,
        residual,
        iter,
        converged,
        thetas,
    } = state;
    Ok(StateStep {
        ensemble: iterate,
        dinkelbach: DinkelbachState {
            theta,
            iterate: (),
            residual,
            iter,
            converged,
            thetas,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{random_pure, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(d: usize, k: usize) -> DensityMatrix {
        PureState::basis(d, k).to_density()
    }

    #[test]
    fn orthogonal_triple_is_antidistinguished() {
        let (povm, sol) = optimal_povm(&basis(3, 0), &basis(3, 1), &basis(3, 2), &SdpOptions::default()).unwrap();
        assert!(sol.primal_obj.abs() < 1e-6);
        assert!(antidist(&povm, &basis(3, 0), &basis(3, 1), &basis(3, 2)).unwrap() < 1e-6);
        // The optimum is a whole face here; the interior point sits at its centre.
        assert!(purify_povm(&povm, &basis(3, 0), &basis(3, 1), &basis(3, 2)).is_none());
    }

    #[test]
    fn near_projective_povm_is_rounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let u = crate::quantum::random_unitary(3, &mut rng);
            let proj = |k: usize| HermitianMatrix::projector(&u.column(k));
            // Move 1e-6 of weight from the third element into the first.
            let leak = proj(2).scale(1e-6);
            let povm = PovmTriple::new(&proj(0) + &leak, proj(1), &proj(2) - &leak).unwrap();
            let [a, b, c] = [0, 1, 2].map(|_| random_pure(3, &mut rng).to_density());
            let pure = purify_povm(&povm, &a, &b, &c).expect("near projective");
            assert!(pure.completeness_defect() < 1e-12);
            for (k, e) in pure.elements().iter().enumerate() {
                assert!((e - &proj(k)).frobenius_norm() < 1e-5);
            }
        }
    }

    #[test]
    fn identical_states_force_unit_antidist() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_pure(3, &mut rng).to_density();
        let (povm, _) = optimal_povm(&rho, &rho, &rho, &SdpOptions::default()).unwrap();
        assert!((antidist(&povm, &rho, &rho, &rho).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_measurements_pull_states_onto_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 3;
        let rho_c = basis(3, 0);
        let states = (0..n).map(|_| random_pure(3, &mut rng).to_density()).collect();
        let ens = Ensemble::with_uniform_povms(rho_c, states, 0.0).unwrap();
        let out = optimize_states(&ens, false, &StepOptions::default()).unwrap();
        let b = evaluate(&out).unwrap();
        let a = 1.0 + crate::quantum::pair_count(n) as f64;
        assert!((b.denominator_b - n as f64).abs() < 1e-6, "B = {}", b.denominator_b);
        assert!((b.bound - a / n as f64).abs() < 1e-6);
    }

    #[test]
    fn single_state_moves_onto_pure_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho_c = random_pure(3, &mut rng).to_density();
        let start = random_pure(3, &mut rng).to_density();
        let ens = Ensemble::new(rho_c, vec![start], vec![], 0.0).unwrap();
        let out = optimize_states(&ens, false, &StepOptions::default()).unwrap();
        assert!((evaluate(&out).unwrap().bound - 1.0).abs() < 1e-6);
    }

    #[test]
    fn half_steps_never_increase_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 3;
        let states = (0..n).map(|_| random_pure(3, &mut rng).to_density()).collect();
        let mut ens = Ensemble::with_uniform_povms(basis(3, 0), states, 0.0).unwrap();
        let opts = StepOptions::default();
        let mut prev = evaluate(&ens).unwrap().bound;
        for free in [false, false, true, true] {
            ens = optimize_measurements(&ens, &opts).unwrap();
            let b = evaluate(&ens).unwrap().bound;
            assert!(b <= prev + 1e-12);
            ens = optimize_states(&ens, free, &opts).unwrap();
            let s = evaluate(&ens).unwrap().bound;
            assert!(s <= b + 1e-12);
            prev = s;
        }
    }

    #[test]
    fn state_costs_collect_pair_elements() {
        let ens = Ensemble::with_uniform_povms(basis(2, 0), vec![basis(2, 0); 3], 0.0).unwrap();
        let costs = state_costs(&ens);
        // state 0 appears as j in (1,0),(2,0); state 2 as i in (2,0),(2,1)
        for c in &costs {
            assert!((c.trace() - 2.0 * 2.0 / 3.0).abs() < 1e-12);
        }
        assert!((reference_cost(&ens).trace() - 3.0 * 2.0 / 3.0).abs() < 1e-12);
    }
}
