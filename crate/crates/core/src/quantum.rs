//! States, three-outcome measurements, ensembles and exact evaluation of the
//! BCLM bound `k₀ ≤ A/B`.
//!
//! Pairs are always ordered `(i, j)` with `i > j` (0-based). For a pair the
//! measurement outcome `e1` tests `ρ_i`, `e2` tests `ρ_j` and `e3` tests the
//! reference `ρ_c`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matcore::{frob_inner, nuclear_norm, ComplexMatrix, HermitianMatrix, MatError};

/// Tolerance for PSD-ness and unit trace of density matrices.
pub const STATE_TOL: f64 = 1e-8;
/// Tolerance for POVM positivity and completeness.
pub const POVM_TOL: f64 = 1e-7;
/// Smallest denominator accepted by [`evaluate`].
pub const DELTA_B: f64 = 1e-6;

const PURE_NORM_TOL: f64 = 1e-10;

/// Unit vector in `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(Vec<Complex64>);

impl PureState {
    pub fn new(vec: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::InvalidState(format!("vector norm {norm} is not 1")));
        }
        Ok(Self(vec))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(vec: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize zero vector".into()));
        }
        Ok(Self(vec.into_iter().map(|z| z / norm).collect()))
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[k] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(MatError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            }
            .into());
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(HermitianMatrix::projector(&self.0))
    }
}

/// Positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(mat: HermitianMatrix) -> Result<Self> {
        Self::with_tolerance(mat, STATE_TOL)
    }

    /// Validates with a caller-chosen tolerance (used for transcribed data).
    pub fn with_tolerance(mat: HermitianMatrix, tol: f64) -> Result<Self> {
        let trace = mat.trace();
        if (trace - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1 by more than {tol:e}")));
        }
        let min = mat.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} below -{tol:e}")));
        }
        Ok(Self(mat))
    }

    /// Clips negative eigenvalues and renormalizes the trace.
    pub fn repaired(mat: &HermitianMatrix) -> Result<Self> {
        let projected = crate::matcore::psd_project(mat);
        let trace = projected.trace();
        if !(trace > 0.0) {
            return Err(Error::InvalidState("no positive spectrum to repair".into()));
        }
        Ok(Self(projected.scale(1.0 / trace)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        frob_inner(&self.0, &self.0).unwrap_or(f64::NAN)
    }

    /// Number of eigenvalues above `cutoff`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.0.eig().eigenvalues.iter().filter(|&&l| l > cutoff).count()
    }

    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        Self(self.0.transform(u))
    }
}

/// Three-outcome POVM `{E₁, E₂, E₃}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmTriple {
    elements: [HermitianMatrix; 3],
}

impl PovmTriple {
    pub fn new(e1: HermitianMatrix, e2: HermitianMatrix, e3: HermitianMatrix) -> Result<Self> {
        Self::with_tolerance([e1, e2, e3], POVM_TOL)
    }

    pub fn with_tolerance(elements: [HermitianMatrix; 3], tol: f64) -> Result<Self> {
        let d = elements[0].dim();
        if elements.iter().any(|e| e.dim() != d) {
            return Err(Error::InvalidPovm("elements have different dimensions".into()));
        }
        for (k, e) in elements.iter().enumerate() {
            let min = e.min_eigenvalue();
            if min < -tol {
                return Err(Error::InvalidPovm(format!(
                    "element {} has eigenvalue {min:.3e} below -{tol:e}",
                    k + 1
                )));
            }
        }
        let defect = completeness_defect(&elements);
        if defect > tol {
            return Err(Error::InvalidPovm(format!(
                "E1+E2+E3 deviates from identity by {defect:.3e} (tolerance {tol:e})"
            )));
        }
        Ok(Self { elements })
    }

    /// Projective measurement onto the columns of `u`: `E_k = |u_k⟩⟨u_k|`.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        if u.dim() != 3 {
            return Err(Error::InvalidPovm(format!(
                "a unitary presentation needs exactly 3 columns, got dimension {}",
                u.dim()
            )));
        }
        let elements = [0, 1, 2].map(|k| HermitianMatrix::projector(&u.column(k)));
        Self::with_tolerance(elements, POVM_TOL)
    }

    /// Trivial measurement `{I/3, I/3, I/3}`.
    pub fn uniform(dim: usize) -> Self {
        let e = HermitianMatrix::identity(dim).scale(1.0 / 3.0);
        Self {
            elements: [e.clone(), e.clone(), e],
        }
    }

    /// Clips each element to the PSD cone and renormalizes by `S^{-1/2}·E_k·S^{-1/2}`
    /// with `S = ΣE_k`, restoring exact completeness.
    pub fn repaired(elements: [HermitianMatrix; 3]) -> Result<Self> {
        let clipped = elements.map(|e| crate::matcore::psd_project(&e));
        let sum = &(&clipped[0] + &clipped[1]) + &clipped[2];
        let e = sum.eig();
        if e.eigenvalues[0] <= 1e-12 {
            return Err(Error::InvalidPovm("POVM elements do not span the space".into()));
        }
        let inv_sqrt = e.rebuild_with(&e.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect::<Vec<_>>());
        Ok(Self {
            elements: clipped.map(|c| c.congruence(&inv_sqrt)),
        })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[HermitianMatrix; 3] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &HermitianMatrix {
        &self.elements[k]
    }

    pub fn completeness_defect(&self) -> f64 {
        completeness_defect(&self.elements)
    }

    /// The same measurement with outcomes 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        let [e1, e2, e3] = self.elements.clone();
        Self { elements: [e2, e1, e3] }
    }

    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        Self {
            elements: [0, 1, 2].map(|k| self.elements[k].transform(u)),
        }
    }
}

fn completeness_defect(elements: &[HermitianMatrix; 3]) -> f64 {
    let d = elements[0].dim();
    let sum = &(&elements[0] + &elements[1]) + &elements[2];
    (sum.as_matrix() - &ComplexMatrix::identity(d)).max_abs()
}

/// Number of unordered pairs among `n` states.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Index of pair `(i, j)`, `i > j`, in the canonical order
/// `(1,0), (2,0), (2,1), (3,0), ...`.
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// All pairs `(i, j)` with `i > j` in canonical order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..n).flat_map(|i| (0..i).map(move |j| (i, j)))
}

/// A complete candidate design: reference, states and one measurement per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    rho_c: DensityMatrix,
    states: Vec<DensityMatrix>,
    povms: Vec<PovmTriple>,
    eps_bar: f64,
}

impl Ensemble {
    pub fn new(
        rho_c: DensityMatrix,
        states: Vec<DensityMatrix>,
        povms: Vec<PovmTriple>,
        eps_bar: f64,
    ) -> Result<Self> {
        let dim = rho_c.dim();
        if states.is_empty() {
            return Err(Error::InvalidEnsemble("no states".into()));
        }
        if let Some(s) = states.iter().find(|s| s.dim() != dim) {
            return Err(MatError::DimensionMismatch { left: dim, right: s.dim() }.into());
        }
        if povms.len() != pair_count(states.len()) {
            return Err(Error::InvalidEnsemble(format!(
                "{} states need {} measurements, got {}",
                states.len(),
                pair_count(states.len()),
                povms.len()
            )));
        }
        if let Some(p) = povms.iter().find(|p| p.dim() != dim) {
            return Err(MatError::DimensionMismatch { left: dim, right: p.dim() }.into());
        }
        if !(eps_bar >= 0.0) || !eps_bar.is_finite() {
            return Err(Error::InvalidEnsemble(format!("eps_bar must be finite and >= 0, got {eps_bar}")));
        }
        Ok(Self {
            dim,
            rho_c,
            states,
            povms,
            eps_bar,
        })
    }

    /// States with uniform `{I/3, I/3, I/3}` measurements on every pair.
    pub fn with_uniform_povms(rho_c: DensityMatrix, states: Vec<DensityMatrix>, eps_bar: f64) -> Result<Self> {
        let dim = rho_c.dim();
        let povms = vec![PovmTriple::uniform(dim); pair_count(states.len())];
        Self::new(rho_c, states, povms, eps_bar)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_bar
    }

    pub fn reference(&self) -> &DensityMatrix {
        &self.rho_c
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn povms(&self) -> &[PovmTriple] {
        &self.povms
    }

    pub fn povm(&self, i: usize, j: usize) -> &PovmTriple {
        &self.povms[pair_index(i, j)]
    }

    pub fn with_eps_bar(&self, eps_bar: f64) -> Result<Self> {
        Self::new(self.rho_c.clone(), self.states.clone(), self.povms.clone(), eps_bar)
    }

    pub(crate) fn replace_povms(&mut self, povms: Vec<PovmTriple>) {
        debug_assert_eq!(povms.len(), self.povms.len());
        self.povms = povms;
    }

    pub(crate) fn replace_states(&mut self, rho_c: Option<DensityMatrix>, states: Vec<DensityMatrix>) {
        debug_assert_eq!(states.len(), self.states.len());
        if let Some(r) = rho_c {
            self.rho_c = r;
        }
        self.states = states;
    }

    /// Applies `X ↦ U·X·U†` to every state and measurement element.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        Self {
            dim: self.dim,
            rho_c: self.rho_c.conjugated(u),
            states: self.states.iter().map(|s| s.conjugated(u)).collect(),
            povms: self.povms.iter().map(|p| p.conjugated(u)).collect(),
            eps_bar: self.eps_bar,
        }
    }

    /// ε-term added to the numerator: `(3/2)·n(n−1)·ε̄`.
    pub fn noise_term(&self) -> f64 {
        noise_term(self.n(), self.eps_bar)
    }
}

pub(crate) fn noise_term(n: usize, eps_bar: f64) -> f64 {
    1.5 * (n * n.saturating_sub(1)) as f64 * eps_bar
}

/// Every term of the bound for one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBreakdown {
    /// `1 + Σ𝒜ᵢⱼ + (3/2)n(n−1)ε̄`
    pub numerator_a: f64,
    /// `Σᵢ ω_Q(ρ_c, ρᵢ)`
    pub denominator_b: f64,
    pub bound: f64,
    /// `((i, j), 𝒜ᵢⱼ)` in canonical pair order.
    pub antidist: Vec<((usize, usize), f64)>,
    pub overlaps: Vec<f64>,
    pub eps_bar: f64,
}

impl ObjectiveBreakdown {
    pub fn n(&self) -> usize {
        self.overlaps.len()
    }

    /// Numerator without the ε-term.
    pub fn noiseless_numerator(&self) -> f64 {
        self.numerator_a - noise_term(self.n(), self.eps_bar)
    }

    /// A bound of one or more says nothing about `k₀`.
    pub fn is_vacuous(&self) -> bool {
        self.bound >= 1.0
    }
}

/// `1 − sqrt(1 − |⟨ψ|φ⟩|²)`
pub fn overlap_pure(psi: &PureState, phi: &PureState) -> Result<f64> {
    let f = psi.inner(phi)?.norm_sqr().min(1.0);
    Ok(1.0 - (1.0 - f).sqrt())
}

/// `1 − ½‖ρ − σ‖_*`
pub fn overlap_general(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(MatError::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        }
        .into());
    }
    let diff = rho.matrix() - sigma.matrix();
    Ok(1.0 - 0.5 * nuclear_norm(&diff))
}

/// `trace(E₁ρᵢ) + trace(E₂ρⱼ) + trace(E₃ρ_c)`
pub fn antidist(
    povm: &PovmTriple,
    rho_i: &DensityMatrix,
    rho_j: &DensityMatrix,
    rho_c: &DensityMatrix,
) -> Result<f64> {
    let e = povm.elements();
    Ok(frob_inner(&e[0], rho_i.matrix())?
        + frob_inner(&e[1], rho_j.matrix())?
        + frob_inner(&e[2], rho_c.matrix())?)
}

/// Evaluates `A`, `B` and `A/B`; fails when `B ≤ δ_B`.
pub fn evaluate(ens: &Ensemble) -> Result<ObjectiveBreakdown> {
    let breakdown = evaluate_unchecked(ens)?;
    if breakdown.denominator_b <= DELTA_B {
        return Err(Error::DegenerateDenominator {
            value: breakdown.denominator_b,
            threshold: DELTA_B,
        });
    }
    Ok(breakdown)
}

/// Like [`evaluate`] but reports `bound = A/B` even for a degenerate denominator.
pub fn evaluate_unchecked(ens: &Ensemble) -> Result<ObjectiveBreakdown> {
    let states = ens.states();
    let rho_c = ens.reference();
    let mut antidists = Vec::with_capacity(pair_count(ens.n()));
    for (i, j) in pairs(ens.n()) {
        let a = antidist(ens.povm(i, j), &states[i], &states[j], rho_c)?;
        antidists.push(((i, j), a));
    }
    let overlaps = states
        .iter()
        .map(|s| overlap_general(rho_c, s))
        .collect::<Result<Vec<_>>>()?;
    let numerator_a = 1.0 + antidists.iter().map(|(_, a)| a).sum::<f64>() + ens.noise_term();
    let denominator_b: f64 = overlaps.iter().sum();
    Ok(ObjectiveBreakdown {
        numerator_a,
        denominator_b,
        bound: numerator_a / denominator_b,
        antidist: antidists,
        overlaps,
        eps_bar: ens.eps_bar(),
    })
}

/// Haar-random pure state: normalized vector of complex standard normals.
pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(p) = PureState::normalized(v) {
            return p;
        }
    }
}

/// Random density matrix `G·G†/trace(G·G†)` with `G` a `d × rank` complex Gaussian matrix.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::InvalidRank { rank, dim });
    }
    let mut acc = HermitianMatrix::zeros(dim);
    for _ in 0..rank {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        acc = &acc + &HermitianMatrix::projector(&v);
    }
    let trace = acc.trace();
    Ok(DensityMatrix(acc.scale(1.0 / trace)))
}

/// Haar-random unitary via polar decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let data = (0..dim * dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let g = ComplexMatrix::from_vec(dim, data).expect("square by construction");
        if let Ok(u) = crate::matcore::polar_unitary(&g) {
            return u;
        }
    }
}

/// Real parameters of the pure-state/projective formulation:
/// `(2d−1)·n + (d²−1)·(n²−n)/2`. Diagnostic only.
pub fn param_count(d: usize, n: usize) -> usize {
    (2 * d - 1) * n + (d * d - 1) * (n * n - n) / 2
}
