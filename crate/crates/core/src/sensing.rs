//! Matrix-free Pauli sensing operator acting directly on factors.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::pauli::{
    expectations_from_records, exact_expectation, group_by_setting, simulate_records,
    PauliAction, PauliMonomial,
};
use crate::states::PureState;

pub type CMatrix = DMatrix<Complex64>;

/// Linear map from Hermitian `d × d` matrices to `R^m`, applied to ρ = UU†
/// without forming ρ.
///
/// Implementations must be usable from several threads at once; the parallel
/// engine relies on it.
pub trait SensingOperator: Sync {
    /// Matrix dimension `d`.
    fn dim(&self) -> usize;

    /// Number of measurements `m`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A(UU†)
    fn forward_factored(&self, u: &CMatrix) -> Result<Vec<f64>>;

    /// A†(x) · Z
    fn adjoint_times(&self, x: &[f64], z: &CMatrix) -> Result<CMatrix>;

    /// A†(A(ZZ†) − y) · Z
    fn residual_gradient(&self, y: &[f64], z: &CMatrix) -> Result<CMatrix> {
        let mut residual = self.forward_factored(z)?;
        if residual.len() != y.len() {
            return domain(format!("expected {} observations, got {}", residual.len(), y.len()));
        }
        residual.iter_mut().zip(y).for_each(|(r, yi)| *r -= yi);
        self.adjoint_times(&residual, z)
    }
}

/// Pauli monomials in a fixed order with optional `d/√m` scaling.
#[derive(Debug, Clone)]
pub struct SensingMap {
    n: usize,
    monomials: Vec<PauliMonomial>,
    actions: Vec<PauliAction>,
    normalized: bool,
}

impl SensingMap {
    pub fn new(n: usize, monomials: Vec<PauliMonomial>, normalized: bool) -> Result<Self> {
        if monomials.is_empty() {
            return domain("a sensing map needs at least one monomial");
        }
        if let Some(p) = monomials.iter().find(|p| p.num_qubits() != n) {
            return domain(format!("monomial {p} does not act on {n} qubits"));
        }
        let actions = monomials.iter().map(PauliMonomial::action).collect();
        Ok(Self { n, monomials, actions, normalized })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn monomials(&self) -> &[PauliMonomial] {
        &self.monomials
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `d/√m` when normalized, 1 otherwise.
    pub fn scale(&self) -> f64 {
        if self.normalized {
            (1usize << self.n) as f64 / (self.monomials.len() as f64).sqrt()
        } else {
            1.0
        }
    }

    fn check_rows(&self, z: &CMatrix) -> Result<()> {
        if z.nrows() != 1 << self.n {
            return domain(format!(
                "factor has {} rows, expected {}",
                z.nrows(),
                1usize << self.n
            ));
        }
        Ok(())
    }

    /// Forward entries for the monomials in `range`, written into `out`.
    pub(crate) fn forward_range(&self, range: std::ops::Range<usize>, u: &CMatrix, out: &mut [f64]) {
        let s = self.scale();
        for (o, action) in out.iter_mut().zip(&self.actions[range]) {
            *o = s * u.column_iter().map(|col| action.quadratic_form(col.as_slice())).sum::<f64>();
        }
    }

    /// acc += s · Σ_{i ∈ range} x_i P_i z; `x` is indexed relative to the range start.
    pub(crate) fn adjoint_range(
        &self,
        range: std::ops::Range<usize>,
        x: &[f64],
        z: &CMatrix,
        acc: &mut CMatrix,
    ) {
        let s = self.scale();
        for (action, &xi) in self.actions[range].iter().zip(x) {
            if xi == 0.0 {
                continue;
            }
            let w = Complex64::new(s * xi, 0.0);
            for (zc, mut ac) in z.column_iter().zip(acc.column_iter_mut()) {
                action.accumulate(zc.as_slice(), w, ac.as_mut_slice());
            }
        }
    }
}

impl SensingOperator for SensingMap {
    fn dim(&self) -> usize {
        1 << self.n
    }

    fn len(&self) -> usize {
        self.monomials.len()
    }

    fn forward_factored(&self, u: &CMatrix) -> Result<Vec<f64>> {
        self.check_rows(u)?;
        let mut out = vec![0.0; self.len()];
        self.forward_range(0..self.len(), u, &mut out);
        Ok(out)
    }

    fn adjoint_times(&self, x: &[f64], z: &CMatrix) -> Result<CMatrix> {
        self.check_rows(z)?;
        if x.len() != self.len() {
            return domain(format!("coefficient vector has length {}, expected {}", x.len(), self.len()));
        }
        let mut acc = CMatrix::zeros(z.nrows(), z.ncols());
        self.adjoint_range(0..self.len(), x, z, &mut acc);
        Ok(acc)
    }
}

/// How observations are produced from a known state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationMode {
    /// Exact Pauli expectations (infinite shots).
    Exact,
    /// One simulated record per distinct setting, `shots` each.
    Sampled { shots: u64, seed: u64 },
}

/// Simulated data `y` for `state` under `map`, scaled like the map.
pub fn observe(state: &PureState, map: &SensingMap, mode: ObservationMode) -> Result<Vec<f64>> {
    if state.num_qubits() != map.num_qubits() {
        return domain("state and sensing map act on different registers");
    }
    let s = map.scale();
    let raw: Vec<f64> = match mode {
        ObservationMode::Exact => map
            .monomials()
            .iter()
            .map(|p| exact_expectation(state, p))
            .collect::<Result<_>>()?,
        ObservationMode::Sampled { shots, seed } => {
            let (settings, _) = group_by_setting(map.monomials());
            let records = simulate_records(state, &settings, shots, seed)?;
            expectations_from_records(&records, map.monomials())?
                .into_iter()
                .map(|e| e.value)
                .collect()
        }
    };
    Ok(raw.into_iter().map(|v| s * v).collect())
}
