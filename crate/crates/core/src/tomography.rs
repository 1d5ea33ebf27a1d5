//! End-to-end tomography pipeline: prepare a circuit state, sample Pauli
//! monomials, simulate measurement records and reconstruct with MiFGD.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::mifgd::{self, frobenius_error, ConvergenceTrace, Factor, OptimizerConfig, Target};
use crate::parallel::parallel_run;
use crate::pauli::{
    exact_expectation, expectations_from_records, group_by_setting, monomial_count, sample_monomials,
    simulate_records, ExpectationSample, MeasurementRecord, PauliMonomial,
};
use crate::sensing::SensingMap;
use crate::states::{Circuit, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub circuit: Circuit,
    pub n: usize,
    /// Gate count for random circuits.
    pub depth: usize,
    /// Percentage of the 4^n monomials measured, in (0, 100].
    pub measpc: f64,
    /// Shots per setting; `None` uses exact expectations.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Experiment {
    pub fn state(&self) -> Result<PureState> {
        self.circuit.build(self.n, self.depth, self.seed)
    }

    pub fn measure(&self) -> Result<Measurements> {
        let state = self.state()?;
        let m = monomial_count(self.n, self.measpc)?;
        let monomials = sample_monomials(self.n, m, self.seed)?;
        measure_state(&state, &monomials, self.shots, self.seed)
    }
}

/// Records (empty for exact data) and the per-monomial expectation values.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub n: usize,
    pub shots: Option<u64>,
    pub records: Vec<MeasurementRecord>,
    pub expectations: Vec<ExpectationSample>,
}

pub fn measure_state(
    state: &PureState,
    monomials: &[PauliMonomial],
    shots: Option<u64>,
    seed: u64,
) -> Result<Measurements> {
    let n = state.num_qubits();
    let (records, expectations) = match shots {
        Some(shots) => {
            let (settings, _) = group_by_setting(monomials);
            let records = simulate_records(state, &settings, shots, seed)?;
            let expectations = expectations_from_records(&records, monomials)?;
            (records, expectations)
        }
        None => {
            let expectations = monomials
                .iter()
                .map(|p| Ok(ExpectationSample { monomial: p.clone(), value: exact_expectation(state, p)? }))
                .collect::<Result<_>>()?;
            (Vec::new(), expectations)
        }
    };
    Ok(Measurements { n, shots, records, expectations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub m: usize,
    pub factor: Factor,
    pub trace: ConvergenceTrace,
    pub final_fidelity: Option<f64>,
    pub final_frobenius_error: Option<f64>,
}

/// Runs MiFGD on normalized Pauli data. `target` is used only for metrics.
pub fn reconstruct(
    n: usize,
    expectations: &[ExpectationSample],
    config: &OptimizerConfig,
    workers: usize,
    target: Option<&PureState>,
) -> Result<Reconstruction> {
    if let Some(t) = target {
        if t.num_qubits() != n {
            return domain("target state acts on a different register");
        }
    }
    let monomials: Vec<PauliMonomial> = expectations.iter().map(|e| e.monomial.clone()).collect();
    let map = SensingMap::new(n, monomials, true)?;
    let s = map.scale();
    let y: Vec<f64> = expectations.iter().map(|e| s * e.value).collect();
    let target_spec = target.map(|t| Target::State(t.clone()));
    let (factor, trace) = parallel_run(&map, &y, config, workers, target_spec.as_ref())?;
    let (final_fidelity, final_frobenius_error) = match target {
        Some(t) => (Some(mifgd::fidelity_rank1(&factor, t)?), Some(frobenius_error(&factor, &t.as_factor())?)),
        None => (None, None),
    };
    Ok(Reconstruction { m: expectations.len(), factor, trace, final_fidelity, final_frobenius_error })
}
