//! JSON and CSV file formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::mifgd::{Factor, IterationRecord, OptimizerConfig};
use crate::pauli::{outcome_string, parse_outcome, ExpectationSample, MeasurementRecord};
use crate::states::PureState;
use crate::tomography::{Measurements, Reconstruction};

pub const FORMAT_VERSION: u32 = 1;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn pairs(values: &[Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|c| [c.re, c.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub n: usize,
    pub amplitudes: Vec<[f64; 2]>,
}

impl StateFile {
    pub fn from_state(state: &PureState) -> Self {
        Self { n: state.num_qubits(), amplitudes: pairs(state.amplitudes()) }
    }

    pub fn to_state(&self) -> Result<PureState> {
        PureState::new(self.n, self.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub setting: String,
    /// Bit string (qubit 0 first) → count.
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub version: u32,
    pub n: usize,
    pub shots: u64,
    pub records: Vec<RecordEntry>,
}

impl MeasurementFile {
    pub fn from_records(n: usize, shots: u64, records: &[MeasurementRecord]) -> Self {
        let records = records
            .iter()
            .map(|r| RecordEntry {
                setting: r.setting.to_string(),
                counts: r.counts.iter().map(|(&k, &c)| (outcome_string(n, k), c)).collect(),
            })
            .collect();
        Self { version: FORMAT_VERSION, n, shots, records }
    }

    pub fn to_records(&self) -> Result<Vec<MeasurementRecord>> {
        check_version(self.version)?;
        self.records
            .iter()
            .map(|e| {
                let setting = e.setting.parse()?;
                let mut counts = BTreeMap::new();
                for (bits, &c) in &e.counts {
                    if bits.len() != self.n {
                        return domain(format!("outcome {bits:?} does not have {} bits", self.n));
                    }
                    if c > 0 {
                        counts.insert(parse_outcome(bits)?, c);
                    }
                }
                let record = MeasurementRecord::new(setting, self.shots, counts)?;
                if record.setting.num_qubits() != self.n {
                    return domain(format!("setting {} does not act on {} qubits", e.setting, self.n));
                }
                Ok(record)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationFile {
    pub version: u32,
    pub n: usize,
    /// Whether the reconstruction applies the `d/√m` scale.
    pub normalized: bool,
    pub items: Vec<ExpectationSample>,
}

impl ExpectationFile {
    pub fn from_measurements(data: &Measurements) -> Self {
        Self { version: FORMAT_VERSION, n: data.n, normalized: true, items: data.expectations.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        if !self.normalized {
            return domain("only normalized expectation files can be reconstructed");
        }
        if let Some(e) = self.items.iter().find(|e| e.monomial.num_qubits() != self.n) {
            return domain(format!("monomial {} does not act on {} qubits", e.monomial, self.n));
        }
        Ok(())
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return domain(format!("unsupported format version {version}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub config: OptimizerConfig,
    pub m: usize,
    pub eta: f64,
    pub mu: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_fidelity: Option<f64>,
    pub final_frobenius_error: Option<f64>,
    pub trace: Vec<IterationRecord>,
    /// Columns of the final factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<Vec<Vec<[f64; 2]>>>,
}

impl ResultFile {
    pub fn new(config: &OptimizerConfig, rec: &Reconstruction, with_factor: bool) -> Self {
        Self {
            config: config.clone(),
            m: rec.m,
            eta: rec.trace.eta,
            mu: rec.trace.mu,
            converged: rec.trace.converged,
            iterations: rec.trace.iterations(),
            final_fidelity: rec.final_fidelity,
            final_frobenius_error: rec.final_frobenius_error,
            trace: rec.trace.records.clone(),
            factor: with_factor.then(|| factor_columns(&rec.factor)),
        }
    }
}

pub fn factor_columns(u: &Factor) -> Vec<Vec<[f64; 2]>> {
    u.column_iter().map(|c| pairs(c.as_slice())).collect()
}

#[derive(Serialize)]
struct CsvRow {
    iter: usize,
    change: f64,
    error: Option<f64>,
    fidelity: Option<f64>,
    time_s: f64,
}

/// Columns `iter,change,error,fidelity,time_s`; missing metrics are empty.
pub fn write_trace_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in records {
        w.serialize(CsvRow { iter: r.iter, change: r.change, error: r.error, fidelity: r.fidelity, time_s: r.time_s })
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}
