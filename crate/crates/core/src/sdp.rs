//! Small dense semidefinite programs over Hermitian blocks.
//!
//! Primal: `min Σ_b Re tr(C_b X_b)` s.t. `Σ_b Re tr(A_{ib} X_b) = b_i`, `X_b ⪰ 0`.
//! Dual:   `max bᵀy` s.t. `S_b = C_b − Σ_i y_i A_{ib} ⪰ 0`.
//!
//! The solver is an infeasible primal-dual path-following method using the
//! Nesterov-Todd scaling `W = L (Lᴴ S L)^{-1/2} Lᴴ` (with `X = L Lᴴ`) and a
//! Mehrotra-style centering parameter. Every block is at most a few dozen
//! rows, so all linear algebra is dense.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{trace_product, ComplexMatrix, HermitianMatrix};

const PIVOT_THRESHOLD: f64 = 1e-10;

/// One scalar equality `Σ_b Re tr(A_b X_b) = rhs`; blocks not listed have zero coefficients.
#[derive(Debug, Clone)]
pub struct EqConstraint {
    pub terms: Vec<(usize, HermitianMatrix)>,
    pub rhs: f64,
}

impl EqConstraint {
    pub fn new(terms: Vec<(usize, HermitianMatrix)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }

    /// `trace(X_block) = rhs`
    pub fn trace(block: usize, dim: usize, rhs: f64) -> Self {
        Self::new(vec![(block, HermitianMatrix::identity(dim))], rhs)
    }
}

/// A basis coefficient and the part of the right-hand side entry it reads.
type Part = (Complex64, fn(Complex64) -> f64);

/// Real scalar constraints equivalent to the Hermitian matrix equation
/// `Σ_k c_k X_{b_k} = R`: one per diagonal entry plus a real and an
/// imaginary part per strictly upper entry, `d²` in total.
pub fn matrix_equality(terms: &[(usize, f64)], rhs: &HermitianMatrix) -> Vec<EqConstraint> {
    let d = rhs.dim();
    let mut out = Vec::with_capacity(d * d);
    for p in 0..d {
        for q in p..d {
            let parts: &[Part] = if p == q {
                &[(Complex64::new(1.0, 0.0), |z| z.re)]
            } else {
                &[
                    (Complex64::new(0.5, 0.0), |z| z.re),
                    (Complex64::new(0.0, 0.5), |z| z.im),
                ]
            };
            for &(coef, part) in parts {
                // Re tr(B X) picks Re X_pq (or Im X_pq) for this basis matrix B.
                let mut basis = ComplexMatrix::zeros(d);
                if p == q {
                    basis[(p, p)] = coef;
                } else {
                    basis[(q, p)] = coef.conj();
                    basis[(p, q)] = coef;
                }
                let basis = HermitianMatrix::symmetrize(basis);
                let terms = terms.iter().map(|&(b, c)| (b, basis.scale(c))).collect();
                out.push(EqConstraint::new(terms, part(rhs[(p, q)])));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub cost: Vec<HermitianMatrix>,
    pub constraints: Vec<EqConstraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>, cost: Vec<HermitianMatrix>, constraints: Vec<EqConstraint>) -> Result<Self> {
        let p = Self {
            blocks,
            cost,
            constraints,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.cost.len() != self.blocks.len() {
            return Err(Error::InvalidConfig(format!(
                "{} cost blocks for {} variable blocks",
                self.cost.len(),
                self.blocks.len()
            )));
        }
        for (b, (c, &d)) in self.cost.iter().zip(&self.blocks).enumerate() {
            if c.dim() != d {
                return Err(Error::InvalidConfig(format!("cost block {b} has dim {} not {d}", c.dim())));
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            for (b, a) in &con.terms {
                match self.blocks.get(*b) {
                    Some(&d) if d == a.dim() => {}
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "constraint {i} references block {b} with a mismatched coefficient"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ_b Re tr(C_b X_b)`
    pub fn objective(&self, x: &[HermitianMatrix]) -> f64 {
        self.cost
            .iter()
            .zip(x)
            .map(|(c, x)| trace_product(c.as_matrix(), x.as_matrix()))
            .sum()
    }

    /// `A_i(X) − b_i` for every constraint.
    pub fn residuals(&self, x: &[HermitianMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|con| {
                con.terms
                    .iter()
                    .map(|(b, a)| trace_product(a.as_matrix(), x[*b].as_matrix()))
                    .sum::<f64>()
                    - con.rhs
            })
            .collect()
    }

    /// `Σ_i y_i A_{ib}` restricted to block `block` over the constraint range `range`.
    pub fn dual_operator(&self, y: &[f64], block: usize, range: std::ops::Range<usize>) -> HermitianMatrix {
        let mut out = HermitianMatrix::zeros(self.blocks[block]);
        for i in range {
            for (b, a) in &self.constraints[i].terms {
                if *b == block {
                    out.axpy(y[i], a);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Relative duality gap `|p − d| / (1 + |p| + |d|)`.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility.
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-9,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub primal: Vec<HermitianMatrix>,
    /// One multiplier per original constraint; redundant constraints get 0.
    pub dual: Vec<f64>,
    /// `S_b = C_b − Σ_i y_i A_{ib}`.
    pub dual_slack: Vec<HermitianMatrix>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub max_primal_residual: f64,
}

/// Nonzero entries `(row, col, value)` of a constraint coefficient.
struct Sparse(Vec<(usize, usize, Complex64)>);

impl Sparse {
    fn new(a: &HermitianMatrix) -> Self {
        let d = a.dim();
        let mut entries = Vec::new();
        for r in 0..d {
            for c in 0..d {
                let v = a[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self(entries)
    }

    /// `Re tr(A X)`
    fn trace_with(&self, x: &ComplexMatrix) -> f64 {
        self.0
            .iter()
            .map(|&(r, c, v)| {
                let z = x[(c, r)];
                v.re * z.re - v.im * z.im
            })
            .sum()
    }

    /// `out += alpha·A`
    fn add_to(&self, alpha: f64, out: &mut HermitianMatrix) {
        let m = out.as_matrix_mut();
        for &(r, c, v) in &self.0 {
            m[(r, c)] += v * alpha;
        }
    }

    /// `out = W A W` for Hermitian `W`.
    fn congruence_into(&self, w: &ComplexMatrix, out: &mut ComplexMatrix) {
        let d = w.dim();
        out.as_mut_slice().fill(Complex64::new(0.0, 0.0));
        let ws = w.as_slice();
        let os = out.as_mut_slice();
        for &(r, c, v) in &self.0 {
            for a in 0..d {
                let war = ws[a * d + r] * v;
                let row = &ws[c * d..(c + 1) * d];
                for (o, wcb) in os[a * d..(a + 1) * d].iter_mut().zip(row) {
                    *o += war * wcb;
                }
            }
        }
    }
}

/// Real symmetric positive definite matrix stored row-major.
struct RealSym {
    n: usize,
    a: Vec<f64>,
}

impl RealSym {
    fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    /// In-place Cholesky; returns the lower factor or `None`.
    fn cholesky(&self, shift: f64) -> Option<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = self.a[j * n + j] + shift;
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) {
                return None;
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = self.a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Some(l)
    }
}

fn cholesky_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut z = rhs.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// `Z + α·D` for the largest `α = alpha·0.8^k` whose blocks all admit a
/// Cholesky factorization; `None` once `α` drops below 1e-10.
fn interior_step(z: &[HermitianMatrix], dir: &[HermitianMatrix], mut alpha: f64) -> Option<(Vec<HermitianMatrix>, f64)> {
    while alpha >= 1e-10 {
        let next: Vec<HermitianMatrix> = z
            .iter()
            .zip(dir)
            .map(|(zb, db)| {
                let mut nb = zb.clone();
                nb.axpy(alpha, db);
                nb
            })
            .collect();
        if next.iter().all(|b| b.cholesky().is_ok()) {
            return Some((next, alpha));
        }
        alpha *= 0.8;
    }
    None
}

/// Largest `α` keeping `diag(v) + α·D ⪰ 0` (infinite when `D ⪰ 0`).
fn max_step(v: &[f64], dir: &HermitianMatrix) -> f64 {
    let d = v.len();
    let inv_sqrt: Vec<f64> = v.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut scaled = dir.clone();
    let m = scaled.as_matrix_mut();
    for r in 0..d {
        for c in 0..d {
            m[(r, c)] *= inv_sqrt[r] * inv_sqrt[c];
        }
    }
    let lmin = scaled.min_eigenvalue();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Coordinates of a Hermitian matrix in which the Euclidean inner product is `Re tr(AB)`.
fn push_coords(out: &mut Vec<f64>, a: &HermitianMatrix) {
    let d = a.dim();
    let r2 = std::f64::consts::SQRT_2;
    for p in 0..d {
        out.push(a[(p, p)].re);
        for q in (p + 1)..d {
            out.push(r2 * a[(p, q)].re);
            out.push(r2 * a[(p, q)].im);
        }
    }
}

/// Drops constraints that are linear combinations of earlier ones (modified
/// Gram-Schmidt with reorthogonalization). Returns the kept indices, or
/// `Infeasible` when a dependent constraint contradicts the others.
fn independent_constraints(p: &SdpProblem) -> Result<Vec<usize>> {
    let offsets: Vec<usize> = p
        .blocks
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d * d;
            Some(o)
        })
        .collect();
    let total: usize = p.blocks.iter().map(|d| d * d).sum();
    let rhs_scale = 1.0 + p.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);

    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    for (idx, con) in p.constraints.iter().enumerate() {
        let mut v = vec![0.0; total];
        for (b, a) in &con.terms {
            let mut coords = Vec::with_capacity(a.dim() * a.dim());
            push_coords(&mut coords, a);
            for (k, c) in coords.into_iter().enumerate() {
                v[offsets[*b] + k] += c;
            }
        }
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut rhs = con.rhs;
        if norm0 == 0.0 {
            if rhs.abs() > 1e-9 * rhs_scale {
                return Err(Error::Infeasible { residual: rhs.abs() });
            }
            continue;
        }
        for _ in 0..2 {
            for (q, beta) in &basis {
                let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
                rhs -= proj * beta;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= PIVOT_THRESHOLD * norm0 {
            if rhs.abs() > 1e-8 * rhs_scale {
                return Err(Error::Infeasible { residual: rhs.abs() });
            }
            continue;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        basis.push((v, rhs / norm));
        kept.push(idx);
    }
    Ok(kept)
}

/// Solves `p` to the tolerances in `opts`.
///
/// Inconsistent equality constraints yield `Err(Infeasible)`; running out of
/// iterations yields the last iterate with status `MaxIter`.
pub fn solve_sdp(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    let kept = independent_constraints(p)?;
    if kept.is_empty() {
        return Err(Error::NumericalFailure("problem has no constraints".into()));
    }
    let m = kept.len();
    let nb = p.blocks.len();
    let cons: Vec<&EqConstraint> = kept.iter().map(|&i| &p.constraints[i]).collect();
    let b: Vec<f64> = cons.iter().map(|c| c.rhs).collect();

    // per block: (local constraint index, coefficient)
    let mut by_block: Vec<Vec<(usize, &HermitianMatrix, Sparse)>> = (0..nb).map(|_| Vec::new()).collect();
    for (i, c) in cons.iter().enumerate() {
        for (blk, a) in &c.terms {
            by_block[*blk].push((i, a, Sparse::new(a)));
        }
    }

    let total_dim: f64 = p.blocks.iter().sum::<usize>() as f64;
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c_norm = p.cost.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>().sqrt();

    let mut x = Vec::with_capacity(nb);
    let mut s = Vec::with_capacity(nb);
    for (blk, &d) in p.blocks.iter().enumerate() {
        let df = d as f64;
        let mut xi = 10.0f64.max(df.sqrt());
        let mut eta = 10.0f64.max(df.sqrt()).max(p.cost[blk].frobenius_norm());
        for &(i, a, _) in &by_block[blk] {
            let an = a.frobenius_norm();
            xi = xi.max(df * (1.0 + b[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(HermitianMatrix::identity(d).scale(xi));
        s.push(HermitianMatrix::identity(d).scale(eta));
    }
    let mut y = vec![0.0; m];

    let apply_a = |mats: &[HermitianMatrix]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (blk, terms) in by_block.iter().enumerate() {
            for (i, _, a) in terms {
                out[*i] += a.trace_with(mats[blk].as_matrix());
            }
        }
        out
    };
    let apply_at = |v: &[f64], blk: usize| -> HermitianMatrix {
        let mut out = HermitianMatrix::zeros(p.blocks[blk]);
        for (i, _, a) in &by_block[blk] {
            a.add_to(v[*i], &mut out);
        }
        out
    };

    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    'newton: for iter in 0..opts.max_iter {
        iterations = iter;
        let ax = apply_a(&x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rd: Vec<HermitianMatrix> = (0..nb)
            .map(|blk| &(&p.cost[blk] - &s[blk]) - &apply_at(&y, blk))
            .collect();
        let pobj = p.objective(&x);
        let dobj: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
        let xs: f64 = (0..nb)
            .map(|blk| trace_product(x[blk].as_matrix(), s[blk].as_matrix()))
            .sum();
        let mu = xs / total_dim;

        let rel_p = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
        let rel_d = rd.iter().map(|r| r.frobenius_norm().powi(2)).sum::<f64>().sqrt() / (1.0 + c_norm);
        let rel_gap = (pobj - dobj).abs().max(xs.abs()) / (1.0 + pobj.abs() + dobj.abs());
        if rel_p <= opts.feas_tol && rel_d <= opts.feas_tol && rel_gap <= opts.gap_tol {
            status = SdpStatus::Optimal;
            break;
        }
        if !mu.is_finite() || !pobj.is_finite() || !dobj.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite iterate at iteration {iter}")));
        }

        // Scaling: W = G Gᴴ with G = L_x U κ^{-1/4}, where L_xᴴ S L_x = U κ Uᴴ.
        // In scaled coordinates X̃ = G⁻¹ X G⁻ᴴ and S̃ = Gᴴ S G both equal V = diag(√κ),
        // so the Newton step below works with D_x = G⁻¹ ΔX G⁻ᴴ and D_s = Gᴴ ΔS G.
        let mut w = Vec::with_capacity(nb);
        let mut g = Vec::with_capacity(nb);
        let mut g_adj = Vec::with_capacity(nb);
        let mut v = Vec::with_capacity(nb);
        for blk in 0..nb {
            let d = p.blocks[blk];
            let Ok(lx) = x[blk].cholesky() else {
                if iter == 0 {
                    return Err(Error::NumericalFailure(format!("primal block {blk} is not positive definite")));
                }
                break 'newton;
            };
            let k = HermitianMatrix::symmetrize(lx.adjoint().matmul(s[blk].as_matrix()).matmul(&lx));
            let ke = k.eig();
            if !(ke.eigenvalues[0] > 0.0) {
                if iter == 0 {
                    return Err(Error::NumericalFailure(format!("dual block {blk} is not positive definite")));
                }
                break 'newton;
            }
            let mut gb = lx.matmul(&ke.eigenvectors);
            for c in 0..d {
                let shrink = ke.eigenvalues[c].powf(-0.25);
                for r in 0..d {
                    gb[(r, c)] *= shrink;
                }
            }
            let ga = gb.adjoint();
            w.push(HermitianMatrix::symmetrize(gb.matmul(&ga)));
            v.push(ke.eigenvalues.iter().map(|k| k.sqrt()).collect::<Vec<f64>>());
            g.push(gb);
            g_adj.push(ga);
        }
        // G Z Gᴴ and Gᴴ Z G
        let unscale = |blk: usize, z: &HermitianMatrix| z.transform(&g[blk]);
        let scale = |blk: usize, z: &HermitianMatrix| z.transform(&g_adj[blk]);

        // Schur complement M_ij = Σ_b Re tr(A_ib W A_jb W).
        let mut schur = RealSym::zeros(m);
        for blk in 0..nb {
            let terms = &by_block[blk];
            let mut g = ComplexMatrix::zeros(p.blocks[blk]);
            for (j, _, aj) in terms {
                aj.congruence_into(w[blk].as_matrix(), &mut g);
                for (i, _, ai) in terms {
                    if i <= j {
                        schur.a[i * m + j] += ai.trace_with(&g);
                    }
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur.a[i * m + j] = schur.a[j * m + i];
            }
        }
        let max_diag = (0..m).map(|i| schur.a[i * m + i]).fold(0.0, f64::max);
        let mut shift = 0.0;
        let chol = loop {
            if let Some(l) = schur.cholesky(shift) {
                break l;
            }
            shift = if shift == 0.0 { 1e-14 * max_diag.max(1e-300) } else { shift * 100.0 };
            if shift > 1e-2 * max_diag.max(1.0) {
                return Err(Error::NumericalFailure(format!("Schur complement singular at iteration {iter}")));
            }
        };

        let rd_s: Vec<HermitianMatrix> = (0..nb).map(|blk| scale(blk, &rd[blk])).collect();
        // D_x + D_s = R̃c,  D_s = R̃d − Gᴴ Aᵀ(Δy) G,  A(G D_x Gᴴ) = Rp.
        let direction = |rc_s: &[HermitianMatrix]| {
            let tmp_s: Vec<HermitianMatrix> = (0..nb).map(|blk| &rc_s[blk] - &rd_s[blk]).collect();
            let tmp: Vec<HermitianMatrix> = (0..nb).map(|blk| unscale(blk, &tmp_s[blk])).collect();
            let a_tmp = apply_a(&tmp);
            let rhs: Vec<f64> = rp.iter().zip(&a_tmp).map(|(r, t)| r - t).collect();
            let dy = cholesky_solve(&chol, m, &rhs);
            let dx_s: Vec<HermitianMatrix> = (0..nb)
                .map(|blk| &tmp_s[blk] + &scale(blk, &apply_at(&dy, blk)))
                .collect();
            let ds_s: Vec<HermitianMatrix> = (0..nb).map(|blk| &rc_s[blk] - &dx_s[blk]).collect();
            (dx_s, dy, ds_s)
        };
        let steps = |dx_s: &[HermitianMatrix], ds_s: &[HermitianMatrix]| {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for blk in 0..nb {
                ap = ap.min(max_step(&v[blk], &dx_s[blk]));
                ad = ad.min(max_step(&v[blk], &ds_s[blk]));
            }
            (ap, ad)
        };
        let diag_v = |blk: usize, f: &dyn Fn(f64) -> f64| {
            HermitianMatrix::from_real_diag(&v[blk].iter().map(|&vi| f(vi)).collect::<Vec<_>>())
        };

        // Predictor.
        let rc_aff: Vec<HermitianMatrix> = (0..nb).map(|blk| diag_v(blk, &|vi| -vi)).collect();
        let (dx_aff, _, ds_aff) = direction(&rc_aff);
        let (ap, ad) = steps(&dx_aff, &ds_aff);
        let (ap_aff, ad_aff) = (ap.min(1.0), ad.min(1.0));
        let mut xs_aff = 0.0;
        for blk in 0..nb {
            let mut xn = diag_v(blk, &|vi| vi);
            xn.axpy(ap_aff, &dx_aff[blk]);
            let mut sn = diag_v(blk, &|vi| vi);
            sn.axpy(ad_aff, &ds_aff[blk]);
            xs_aff += trace_product(xn.as_matrix(), sn.as_matrix());
        }
        let sigma = ((xs_aff / total_dim) / mu).clamp(0.0, 1.0).powi(3).max(if rel_p > 1e-6 || rel_d > 1e-6 { 1e-3 } else { 0.0 });

        // Corrector: R̃c = σμV⁻¹ − V − L_V⁻¹(D_x D_s + D_s D_x), with L_V(Z) = VZ + ZV
        // and D_x, D_s the predictor steps (Mehrotra's second-order term).
        let rc_s: Vec<HermitianMatrix> = (0..nb)
            .map(|blk| {
                let d = p.blocks[blk];
                let prod = dx_aff[blk].as_matrix().matmul(ds_aff[blk].as_matrix());
                let mut z = &prod + &prod.adjoint();
                for r in 0..d {
                    for c in 0..d {
                        z[(r, c)] /= v[blk][r] + v[blk][c];
                    }
                }
                let mut r = diag_v(blk, &|vi| sigma * mu / vi - vi);
                r.axpy(-1.0, &HermitianMatrix::symmetrize(z));
                r
            })
            .collect();
        let (dx_s, dy, ds_s) = direction(&rc_s);
        let (ap, ad) = steps(&dx_s, &ds_s);
        let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
        let dx: Vec<HermitianMatrix> = (0..nb).map(|blk| unscale(blk, &dx_s[blk])).collect();
        let ds: Vec<HermitianMatrix> = (0..nb).map(|blk| &rd[blk] - &apply_at(&dy, blk)).collect();
        // Near the boundary roundoff can leave the computed step just outside
        // the cone; shorten it until every block factors.
        let (Some((x_new, _)), Some((s_new, alpha_d))) = (
            interior_step(&x, &dx, (gamma * ap).min(1.0)),
            interior_step(&s, &ds, (gamma * ad).min(1.0)),
        ) else {
            break;
        };
        x = x_new;
        s = s_new;
        for (yi, dyi) in y.iter_mut().zip(&dy) {
            *yi += alpha_d * dyi;
        }
        iterations = iter + 1;
    }

    let pobj = p.objective(&x);
    let dobj: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
    let mut dual = vec![0.0; p.constraints.len()];
    for (local, &orig) in kept.iter().enumerate() {
        dual[orig] = y[local];
    }
    let max_primal_residual = p.residuals(&x).iter().map(|r| r.abs()).fold(0.0, f64::max);
    let dual_slack = (0..nb)
        .map(|blk| &p.cost[blk] - &p.dual_operator(&dual, blk, 0..p.constraints.len()))
        .collect();
    Ok(SdpSolution {
        primal: x,
        dual,
        dual_slack,
        primal_obj: pobj,
        dual_obj: dobj,
        gap: (pobj - dobj).abs(),
        status,
        iterations,
        max_primal_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{is_psd, ComplexMatrix};

    fn proj(d: usize, k: usize) -> HermitianMatrix {
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        v[k] = Complex64::new(1.0, 0.0);
        HermitianMatrix::projector(&v)
    }

    fn povm_problem(costs: [HermitianMatrix; 3]) -> SdpProblem {
        let d = costs[0].dim();
        let cons = matrix_equality(&[(0, 1.0), (1, 1.0), (2, 1.0)], &HermitianMatrix::identity(d));
        SdpProblem::new(vec![d; 3], costs.to_vec(), cons).unwrap()
    }

    #[test]
    fn min_eigenvalue_program() {
        let c = HermitianMatrix::from_real_diag(&[3.0, 1.0, 2.0]);
        let p = SdpProblem::new(vec![3], vec![c], vec![EqConstraint::trace(0, 3, 1.0)]).unwrap();
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_obj - 1.0).abs() < 1e-6);
        assert!((&sol.primal[0] - &proj(3, 1)).frobenius_norm() < 1e-5);
    }

    #[test]
    fn orthogonal_povm_program() {
        let p = povm_problem([proj(3, 0), proj(3, 1), proj(3, 2)]);
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.primal_obj.abs() < 1e-6);
        assert!(sol.max_primal_residual < 1e-7);
        for blk in &sol.primal {
            assert!(is_psd(blk, 1e-7));
        }
    }

    #[test]
    fn matrix_equality_reads_entries() {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 0)] = Complex64::new(0.3, 0.0);
        m[(1, 1)] = Complex64::new(0.7, 0.0);
        m[(0, 1)] = Complex64::new(0.1, -0.2);
        m[(1, 0)] = Complex64::new(0.1, 0.2);
        let h = HermitianMatrix::try_new(m).unwrap();
        let cons = matrix_equality(&[(0, 1.0)], &h);
        assert_eq!(cons.len(), 4);
        for c in &cons {
            let val = trace_product(c.terms[0].1.as_matrix(), h.as_matrix());
            assert!((val - c.rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn redundant_constraints_are_dropped() {
        let c = HermitianMatrix::from_real_diag(&[2.0, 1.0]);
        let cons = vec![EqConstraint::trace(0, 2, 1.0), EqConstraint::trace(0, 2, 1.0)];
        let p = SdpProblem::new(vec![2], vec![c], cons).unwrap();
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_obj - 1.0).abs() < 1e-6);
        assert_eq!(sol.dual[1], 0.0);
    }

    #[test]
    fn inconsistent_constraints_are_infeasible() {
        let c = HermitianMatrix::identity(2);
        let cons = vec![EqConstraint::trace(0, 2, 1.0), EqConstraint::trace(0, 2, 2.0)];
        let p = SdpProblem::new(vec![2], vec![c], cons).unwrap();
        assert!(matches!(solve_sdp(&p, &SdpOptions::default()), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let r = SdpProblem::new(vec![2], vec![HermitianMatrix::identity(3)], vec![]);
        assert!(r.is_err());
    }
}
