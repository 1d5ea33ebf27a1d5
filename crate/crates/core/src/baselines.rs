//! Full-tomography baseline (linear inversion followed by projection onto
//! density matrices) and simplex-constrained readout-error mitigation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pauli::{all_settings, pooled_expectations, simulate_records, ExpectationSample, PauliMonomial};
use crate::sensing::CMatrix;
use crate::states::PureState;

/// Largest register the dense `d × d` routines accept.
pub const MAX_DENSE_QUBITS: usize = 8;

const DENSITY_TOL: f64 = 1e-10;

/// Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return domain("density matrix must be square");
        }
        if hermitian_defect(&entries) > DENSITY_TOL {
            return domain("density matrix must be Hermitian");
        }
        let trace = entries.trace().re;
        if (trace - 1.0).abs() > DENSITY_TOL {
            return domain(format!("density matrix trace is {trace}, expected 1"));
        }
        let min_eig = entries.clone().symmetric_eigenvalues().min();
        if min_eig < -DENSITY_TOL {
            return domain(format!("density matrix has eigenvalue {min_eig}"));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// ⟨ψ|ρ|ψ⟩
    pub fn fidelity(&self, psi: &PureState) -> Result<f64> {
        if psi.dim() != self.0.nrows() {
            return domain("state dimension does not match the density matrix");
        }
        let v = psi.as_factor();
        Ok((v.adjoint() * &self.0 * &v)[0].re)
    }
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = m.norm().max(1.0);
    (m - m.adjoint()).norm() / scale
}

/// Euclidean projection onto {w ≥ 0, Σw = 1} (sort-based).
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "simplex projection of an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// ρ_raw = (1/d) Σ_P value(P)·P from a complete set of unnormalized expectations.
pub fn pauli_linear_inversion(samples: &[ExpectationSample]) -> Result<CMatrix> {
    let n = match samples.first() {
        Some(s) => s.monomial.num_qubits(),
        None => return domain("no expectation values given"),
    };
    if n > MAX_DENSE_QUBITS {
        return Err(Error::MemoryGuard(format!(
            "linear inversion on {n} qubits exceeds the {MAX_DENSE_QUBITS}-qubit dense limit"
        )));
    }
    let d = 1usize << n;
    let total = d * d;
    let mut values: Vec<Option<f64>> = vec![None; total];
    for s in samples {
        if s.monomial.num_qubits() != n {
            return domain("expectation values act on different registers");
        }
        let slot = &mut values[s.monomial.index()];
        if slot.replace(s.value).is_some() {
            return domain(format!("monomial {} given twice", s.monomial));
        }
    }
    let mut rho = CMatrix::zeros(d, d);
    for (idx, v) in values.iter().enumerate() {
        let Some(v) = v else {
            return domain(format!("missing monomial {}", PauliMonomial::from_index(n, idx)));
        };
        let action = PauliMonomial::from_index(n, idx).action();
        // Column j of P is ±phase·e_{j ⊕ xmask}.
        let w = action.phase * (v / d as f64);
        for j in 0..d {
            let sign = if (j & action.zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            rho[(j ^ action.xmask, j)] += w * sign;
        }
    }
    Ok(rho)
}

/// Nearest density matrix in Frobenius norm: eigenvalues projected onto the simplex.
pub fn project_to_density(h: &CMatrix) -> Result<DensityMatrix> {
    if !h.is_square() {
        return domain("matrix must be square");
    }
    if h.nrows() > 1 << MAX_DENSE_QUBITS {
        return Err(Error::MemoryGuard(format!("{0}×{0} projection exceeds the dense limit", h.nrows())));
    }
    if hermitian_defect(h) > 1e-8 {
        return domain("projection onto density matrices needs a Hermitian input");
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let projected = simplex_project(eig.eigenvalues.as_slice());
    let diag = DVector::from_iterator(projected.len(), projected.iter().map(|&x| Complex64::new(x, 0.0)));
    let v = &eig.eigenvectors;
    let rho = v * DMatrix::from_diagonal(&diag) * v.adjoint();
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(rho)
}

/// Full tomography: all 3^n settings with `shots` each, every monomial
/// pooled over its compatible settings, inverted linearly and projected
/// onto density matrices.
pub fn linear_inversion_baseline(state: &PureState, shots: u64, seed: u64) -> Result<DensityMatrix> {
    let n = state.num_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::MemoryGuard(format!("full tomography on {n} qubits refused")));
    }
    let records = simulate_records(state, &all_settings(n)?, shots, seed)?;
    let samples = pooled_expectations(&records, &PauliMonomial::all(n)?)?;
    project_to_density(&pauli_linear_inversion(&samples)?)
}

/// Column `j` holds the measured outcome distribution of prepared basis state `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub n: usize,
    pub columns: Vec<Vec<f64>>,
}

impl CalibrationMatrix {
    pub fn new(n: usize, entries: DMatrix<f64>) -> Result<Self> {
        let d = 1usize << n;
        if entries.shape() != (d, d) {
            return domain(format!("calibration matrix must be {d}×{d}"));
        }
        if entries.iter().any(|&x| !(x >= 0.0)) {
            return domain("calibration entries must be nonnegative");
        }
        for (j, col) in entries.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > 1e-8 {
                return domain(format!("calibration column {j} sums to {s}"));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_file(file: &CalibrationFile) -> Result<Self> {
        let d = 1usize << file.n;
        if file.columns.len() != d || file.columns.iter().any(|c| c.len() != d) {
            return domain(format!("calibration file must hold {d} columns of length {d}"));
        }
        let flat: Vec<f64> = file.columns.iter().flatten().copied().collect();
        Self::new(file.n, DMatrix::from_column_slice(d, d, &flat))
    }

    pub fn to_file(&self) -> CalibrationFile {
        CalibrationFile {
            n: self.n,
            columns: self.entries.column_iter().map(|c| c.iter().copied().collect()).collect(),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

const MITIGATE_REL_TOL: f64 = 1e-10;
const MITIGATE_MAX_ITER: usize = 100_000;

/// ‖C v − v_meas‖²
pub fn mitigation_objective(c: &DMatrix<f64>, v: &[f64], v_meas: &[f64]) -> f64 {
    let r = c * DVector::from_column_slice(v) - DVector::from_column_slice(v_meas);
    r.norm_squared()
}

/// argmin ‖C v − v_meas‖² over the probability simplex, by projected gradient
/// with step 1/‖C‖₂² started at the projection of `v_meas`.
pub fn readout_mitigate(c: &CalibrationMatrix, v_meas: &[f64]) -> Result<Vec<f64>> {
    mitigate_dense(&c.entries, v_meas)
}

pub(crate) fn mitigate_dense(c: &DMatrix<f64>, v_meas: &[f64]) -> Result<Vec<f64>> {
    if c.nrows() != v_meas.len() || !c.is_square() {
        return domain(format!("calibration is {:?} but the vector has length {}", c.shape(), v_meas.len()));
    }
    let lipschitz = c.singular_values().max().powi(2);
    if !(lipschitz > 0.0) {
        return domain("calibration matrix is zero");
    }
    let step = 1.0 / lipschitz;
    let target = DVector::from_column_slice(v_meas);
    let ct = c.transpose();
    let mut x = simplex_project(v_meas);
    let mut f = mitigation_objective(c, &x, v_meas);
    for _ in 0..MITIGATE_MAX_ITER {
        let xv = DVector::from_column_slice(&x);
        let grad = &ct * (c * &xv - &target);
        let moved: Vec<f64> = x.iter().zip(grad.iter()).map(|(a, g)| a - step * g).collect();
        let next = simplex_project(&moved);
        let f_next = mitigation_objective(c, &next, v_meas);
        let stalled = next == x;
        let small = (f - f_next).abs() <= MITIGATE_REL_TOL * f.max(1e-20);
        x = next;
        f = f_next;
        if stalled || small || f == 0.0 {
            return Ok(x);
        }
    }
    Err(Error::NotConverged { what: "readout mitigation", iterations: MITIGATE_MAX_ITER, residual: f })
}
