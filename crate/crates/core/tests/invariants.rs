use bclm_core::matcore::{frob_inner, is_psd, nuclear_norm, psd_project, ComplexMatrix, HermitianMatrix};
use bclm_core::quantum::{overlap_general, overlap_pure, random_density, random_pure, random_unitary};
use bclm_core::{evaluate, DensityMatrix, Ensemble, PovmTriple};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hermitian_from(dim: usize, raw: &[f64]) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    let mut k = 0;
    for r in 0..dim {
        for c in r..dim {
            let z = if r == c {
                Complex64::new(raw[k], 0.0)
            } else {
                Complex64::new(raw[k], raw[k + 1])
            };
            k += 2;
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
        }
    }
    HermitianMatrix::try_new(m).unwrap()
}

fn hermitian_strategy() -> impl Strategy<Value = HermitianMatrix> {
    (2usize..=5).prop_flat_map(|d| {
        prop::collection::vec(-3.0f64..3.0, d * (d + 1)).prop_map(move |raw| hermitian_from(d, &raw))
    })
}

fn pair_strategy() -> impl Strategy<Value = (HermitianMatrix, HermitianMatrix)> {
    (2usize..=5).prop_flat_map(|d| {
        (
            prop::collection::vec(-3.0f64..3.0, d * (d + 1)),
            prop::collection::vec(-3.0f64..3.0, d * (d + 1)),
        )
            .prop_map(move |(a, b)| (hermitian_from(d, &a), hermitian_from(d, &b)))
    })
}

fn entrywise_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let d = a.dim();
    let mut acc = 0.0;
    for r in 0..d {
        for c in 0..d {
            acc += (a[(r, c)].conj() * b[(r, c)]).re;
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eig_reconstructs(a in hermitian_strategy()) {
        let e = a.eig();
        let err = (&e.reconstruct() - &a).frobenius_norm();
        prop_assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()), "error {err}");
        prop_assert!(e.eigenvectors.is_unitary(1e-10));
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nuclear_norm_triangle((a, b) in pair_strategy()) {
        let lhs = nuclear_norm(&(&a + &b));
        prop_assert!(lhs <= nuclear_norm(&a) + nuclear_norm(&b) + 1e-10);
    }

    #[test]
    fn trace_distance_is_at_most_two(seed in any::<u64>(), d in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(d, 1 + (seed as usize) % d, &mut rng).unwrap();
        let sigma = random_density(d, d, &mut rng).unwrap();
        let t = nuclear_norm(&(rho.matrix() - sigma.matrix()));
        prop_assert!((0.0..=2.0 + 1e-12).contains(&t));
    }

    #[test]
    fn psd_project_is_idempotent(a in hermitian_strategy()) {
        let p = psd_project(&a);
        prop_assert!(is_psd(&p, 1e-10));
        let pp = psd_project(&p);
        prop_assert!((&pp - &p).frobenius_norm() <= 1e-10 * (1.0 + p.frobenius_norm()));
    }

    #[test]
    fn psd_project_beats_perturbed_candidates(a in hermitian_strategy(), seed in any::<u64>()) {
        let p = psd_project(&a);
        let best = (&a - &p).frobenius_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let q = random_density(a.dim(), a.dim(), &mut rng).unwrap().matrix().scale(0.3);
            let candidate = psd_project(&(&p + &q));
            prop_assert!((&a - &candidate).frobenius_norm() >= best - 1e-10);
        }
    }

    #[test]
    fn frob_inner_matches_entrywise((a, b) in pair_strategy()) {
        let fast = frob_inner(&a, &b).unwrap();
        prop_assert!((fast - entrywise_inner(&a, &b)).abs() <= 1e-10 * (1.0 + fast.abs()));
        let norm = a.frobenius_norm();
        prop_assert!((frob_inner(&a, &a).unwrap() - norm * norm).abs() <= 1e-10 * (1.0 + norm * norm));
    }

    #[test]
    fn overlap_general_matches_pure(seed in any::<u64>(), d in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_pure(d, &mut rng);
        let phi = random_pure(d, &mut rng);
        let general = overlap_general(&psi.to_density(), &phi.to_density()).unwrap();
        prop_assert!((general - overlap_pure(&psi, &phi).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn bound_is_unitarily_invariant(seed in any::<u64>(), d in 2usize..=4, n in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho_c = random_pure(d, &mut rng).to_density();
        let states: Vec<DensityMatrix> = (0..n).map(|_| random_density(d, d, &mut rng).unwrap()).collect();
        let povms: Vec<PovmTriple> = (0..n * (n - 1) / 2)
            .map(|_| {
                let u = random_unitary(d, &mut rng);
                let e1 = HermitianMatrix::projector(&u.column(0));
                let e2 = HermitianMatrix::projector(&u.column(1));
                let e3 = &(&HermitianMatrix::identity(d) - &e1) - &e2;
                PovmTriple::new(e1, e2, e3).unwrap()
            })
            .collect();
        let ens = Ensemble::new(rho_c, states, povms, 0.01).unwrap();
        let u = random_unitary(d, &mut rng);
        let a = evaluate(&ens).unwrap();
        let b = evaluate(&ens.conjugated(&u)).unwrap();
        prop_assert!((a.numerator_a - b.numerator_a).abs() <= 1e-10);
        prop_assert!((a.denominator_b - b.denominator_b).abs() <= 1e-10);
        prop_assert!((a.bound - b.bound).abs() <= 1e-9 * (1.0 + a.bound));
    }
}

#[test]
fn eigenvalues_match_prescribed_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in 2..=6 {
        for _ in 0..20 {
            let spectrum: Vec<f64> = (0..d).map(|k| k as f64 * 0.7 - 1.3 + 0.01 * (k * k) as f64).collect();
            let u = random_unitary(d, &mut rng);
            let a = HermitianMatrix::from_real_diag(&spectrum).transform(&u);
            let got = a.eigenvalues();
            for (g, want) in got.iter().zip(&spectrum) {
                assert!((g - want).abs() < 1e-11, "d={d}: {g} vs {want}");
            }
        }
    }
}

#[test]
fn two_by_two_closed_form() {
    let cases = [(1.0, -2.0, Complex64::new(0.5, 1.5)), (0.0, 0.0, Complex64::new(0.0, 1.0)), (3.0, 3.0, Complex64::new(1e-9, 0.0))];
    for (a, c, b) in cases {
        let m = ComplexMatrix::from_rows(&[vec![Complex64::new(a, 0.0), b], vec![b.conj(), Complex64::new(c, 0.0)]]).unwrap();
        let h = HermitianMatrix::try_new(m).unwrap();
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
        let ev = h.eigenvalues();
        assert!((ev[0] - (mean - rad)).abs() < 1e-13);
        assert!((ev[1] - (mean + rad)).abs() < 1e-13);
    }
}

#[test]
fn haar_states_have_uniform_second_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = 20_000;
    for d in [2usize, 3, 5] {
        let mean: f64 = (0..samples)
            .map(|_| random_pure(d, &mut rng).as_slice()[0].norm_sqr())
            .sum::<f64>()
            / samples as f64;
        // Var |ψ_0|² = (d−1)/(d²(d+1)); allow five standard errors.
        let sd = ((d - 1) as f64 / ((d * d * (d + 1)) as f64) / samples as f64).sqrt();
        assert!((mean - 1.0 / d as f64).abs() < 5.0 * sd, "d={d}: mean {mean}");
    }
}

#[test]
fn random_density_has_requested_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in 2..=5 {
        for rank in 1..=d {
            let rho = random_density(d, rank, &mut rng).unwrap();
            assert_eq!(rho.rank(1e-9), rank);
            assert!((rho.matrix().trace() - 1.0).abs() < 1e-12);
        }
    }
}
