//! On-disk formats: versioned solution files and bare ensembles.
//!
//! Matrices are row-major nested arrays of `[re, im]` pairs. Floats are
//! written in shortest round-trip form, so reading a file back reproduces
//! every entry bit for bit.
//!
//! State labels in files are 1-based. A measurement record for `pair: [p, q]`
//! uses outcome 1 to test state `p`, outcome 2 to test state `q` and outcome 3
//! to test the reference; `p` and `q` may come in either order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::Context;
use bclm_core::matcore::{polar_unitary, ComplexMatrix, HermitianMatrix};
use bclm_core::quantum::{pair_index, pairs, POVM_TOL, STATE_TOL};
use bclm_core::{DensityMatrix, Ensemble, ObjectiveBreakdown, PovmTriple, SolveConfig, SolveResult};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

/// Largest `max|UᴴU − I|` accepted before a unitary is re-orthonormalized.
pub const UNITARY_REPAIR_TOL: f64 = 1e-3;

pub type MatrixRepr = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema_version: String,
    pub config: SolveConfig,
    pub ensemble: EnsembleRecord,
    pub breakdown: BreakdownRecord,
    pub eps_max: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub d: usize,
    #[serde(default)]
    pub eps_bar: f64,
    /// Precision of the stored matrices; replaces the default validation
    /// tolerances for states and measurements when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub reference: MatrixRepr,
    pub states: Vec<MatrixRepr>,
    pub measurements: Vec<MeasurementRecord>,
}

/// One three-outcome measurement, given either by its elements or by a 3×3
/// unitary whose columns are the projector vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub pair: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<[MatrixRepr; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<MatrixRepr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    /// `[i, j]`, 1-based, `i > j`.
    pub pair: [usize; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRecord {
    pub numerator_a: f64,
    pub denominator_b: f64,
    pub bound: f64,
    pub antidist: Vec<PairValue>,
    pub overlaps: Vec<f64>,
    pub eps_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub restart_index: usize,
    pub rounds: usize,
    pub partially_optimal: bool,
    pub tool_version: String,
}

/// Contents of a file accepted by `eval`.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedFile {
    Solution(Box<SolutionFile>),
    Bare(EnsembleRecord),
}

impl LoadedFile {
    pub fn ensemble(&self) -> &EnsembleRecord {
        match self {
            LoadedFile::Solution(s) => &s.ensemble,
            LoadedFile::Bare(e) => e,
        }
    }
}

pub fn matrix_to_repr(m: &ComplexMatrix) -> MatrixRepr {
    m.rows()
        .into_iter()
        .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_repr(repr: &MatrixRepr, d: usize) -> Result<ComplexMatrix, String> {
    if repr.len() != d || repr.iter().any(|row| row.len() != d) {
        let shape: Vec<usize> = repr.iter().map(Vec::len).collect();
        return Err(format!("expected a {d}x{d} matrix, got rows of lengths {shape:?}"));
    }
    let rows: Vec<Vec<Complex64>> = repr
        .iter()
        .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn ensemble_record(ens: &Ensemble) -> EnsembleRecord {
    let measurements = pairs(ens.n())
        .map(|(i, j)| {
            let p = ens.povm(i, j);
            MeasurementRecord {
                pair: [i + 1, j + 1],
                elements: Some([0, 1, 2].map(|k| matrix_to_repr(p.element(k).as_matrix()))),
                unitary: None,
            }
        })
        .collect();
    EnsembleRecord {
        d: ens.dim(),
        eps_bar: ens.eps_bar(),
        tolerance: None,
        reference: matrix_to_repr(ens.reference().matrix().as_matrix()),
        states: ens.states().iter().map(|s| matrix_to_repr(s.matrix().as_matrix())).collect(),
        measurements,
    }
}

pub fn breakdown_record(b: &ObjectiveBreakdown) -> BreakdownRecord {
    BreakdownRecord {
        numerator_a: b.numerator_a,
        denominator_b: b.denominator_b,
        bound: b.bound,
        antidist: b
            .antidist
            .iter()
            .map(|&((i, j), value)| PairValue {
                pair: [i + 1, j + 1],
                value,
            })
            .collect(),
        overlaps: b.overlaps.clone(),
        eps_bar: b.eps_bar,
    }
}

impl SolutionFile {
    pub fn from_result(config: &SolveConfig, res: &SolveResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            config: config.clone(),
            ensemble: ensemble_record(&res.best),
            breakdown: breakdown_record(&res.breakdown),
            eps_max: res.eps_max,
            provenance: Provenance {
                seed: config.seed,
                restart_index: res.restart_index,
                rounds: res.rounds,
                partially_optimal: res.partially_optimal,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution files always serialize")
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_json() + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Parses a solution file or a bare ensemble (distinguished by `schema_version`).
pub fn parse_file(text: &str) -> anyhow::Result<LoadedFile> {
    let value: serde_json::Value = serde_json::from_str(text).context("not valid JSON")?;
    if let Some(version) = value.get("schema_version") {
        if version.as_str() != Some(SCHEMA_VERSION) {
            anyhow::bail!("unsupported schema_version {version}, expected \"{SCHEMA_VERSION}\"");
        }
        let file: SolutionFile = serde_json::from_value(value).context("malformed solution file")?;
        Ok(LoadedFile::Solution(Box::new(file)))
    } else {
        let rec: EnsembleRecord = serde_json::from_value(value).context("malformed ensemble file")?;
        Ok(LoadedFile::Bare(rec))
    }
}

pub fn read_file(path: &Path) -> anyhow::Result<LoadedFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_file(&text).with_context(|| format!("parsing {}", path.display()))
}

fn hermitian(m: ComplexMatrix, tol: Option<f64>) -> Result<HermitianMatrix, String> {
    match tol {
        Some(t) => {
            let defect = m.hermitian_defect();
            if defect > t {
                Err(format!("not Hermitian (defect {defect:.3e} above {t:e})"))
            } else {
                Ok(HermitianMatrix::symmetrize(m))
            }
        }
        None => HermitianMatrix::try_new(m).map_err(|e| e.to_string()),
    }
}

fn density(repr: &MatrixRepr, d: usize, tol: Option<f64>) -> Result<DensityMatrix, String> {
    let m = hermitian(matrix_from_repr(repr, d)?, tol)?;
    DensityMatrix::with_tolerance(m, tol.unwrap_or(STATE_TOL)).map_err(|e| e.to_string())
}

fn measurement(rec: &MeasurementRecord, d: usize, tol: Option<f64>) -> Result<PovmTriple, String> {
    match (&rec.elements, &rec.unitary) {
        (Some(elements), None) => {
            let mut mats = Vec::with_capacity(3);
            for (k, e) in elements.iter().enumerate() {
                let m = matrix_from_repr(e, d).and_then(|m| hermitian(m, tol));
                mats.push(m.map_err(|msg| format!("element {}: {msg}", k + 1))?);
            }
            let [e1, e2, e3]: [HermitianMatrix; 3] = mats.try_into().expect("three elements");
            PovmTriple::with_tolerance([e1, e2, e3], tol.unwrap_or(POVM_TOL)).map_err(|e| e.to_string())
        }
        (None, Some(u)) => {
            let u = matrix_from_repr(u, d)?;
            let defect = (&u.adjoint().matmul(&u) - &ComplexMatrix::identity(d)).max_abs();
            if defect > UNITARY_REPAIR_TOL {
                return Err(format!("unitarity defect {defect:.3e} exceeds {UNITARY_REPAIR_TOL:e}"));
            }
            let repaired = polar_unitary(&u).map_err(|e| e.to_string())?;
            PovmTriple::from_unitary(&repaired).map_err(|e| e.to_string())
        }
        _ => Err("exactly one of `elements` or `unitary` must be given".into()),
    }
}

/// Builds and validates an ensemble, collecting every violated invariant.
pub fn build_ensemble(rec: &EnsembleRecord) -> Result<Ensemble, Vec<String>> {
    let d = rec.d;
    let tol = rec.tolerance;
    let mut issues = Vec::new();
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            issues.push(format!("tolerance must be positive, got {t}"));
            return Err(issues);
        }
    }
    let n = rec.states.len();
    if n == 0 {
        issues.push("no states".to_string());
    }

    let reference = density(&rec.reference, d, tol).map_err(|e| issues.push(format!("reference: {e}"))).ok();
    let mut states = Vec::with_capacity(n);
    for (k, s) in rec.states.iter().enumerate() {
        match density(s, d, tol) {
            Ok(rho) => states.push(rho),
            Err(e) => issues.push(format!("state {}: {e}", k + 1)),
        }
    }

    let mut povms: BTreeMap<usize, PovmTriple> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for m in &rec.measurements {
        let [p, q] = m.pair;
        let label = format!("pair ({p}, {q})");
        if p == q || p == 0 || q == 0 || p > n || q > n {
            issues.push(format!("{label}: labels must be distinct and within 1..={n}"));
            continue;
        }
        let (i, j) = (p.max(q) - 1, p.min(q) - 1);
        let idx = pair_index(i, j);
        if !seen.insert(idx) {
            issues.push(format!("{label}: measurement given more than once"));
            continue;
        }
        match measurement(m, d, tol) {
            // Internally outcome 1 tests the larger index.
            Ok(povm) => {
                povms.insert(idx, if p > q { povm } else { povm.swapped() });
            }
            Err(e) => issues.push(format!("{label}: {e}")),
        }
    }
    for (i, j) in pairs(n) {
        if !seen.contains(&pair_index(i, j)) {
            issues.push(format!("pair ({}, {}): no measurement given", j + 1, i + 1));
        }
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    let povms: Vec<PovmTriple> = povms.into_values().collect();
    Ensemble::new(reference.expect("validated"), states, povms, rec.eps_bar).map_err(|e| vec![e.to_string()])
}
