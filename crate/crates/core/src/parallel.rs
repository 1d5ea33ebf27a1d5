//! Data-parallel gradient evaluation over contiguous blocks of measurement
//! labels, reduced by a fixed-order sum.
//!
//! Each worker owns one block of monomials, computes its forward entries and
//! its partial adjoint sum into a private `d × r` accumulator, and the caller
//! adds the partial matrices in ascending worker order. Z is shared read-only.

use std::ops::Range;
use std::thread;

use crate::error::{domain, Error, Result};
use crate::mifgd::{self, ConvergenceTrace, Factor, OptimizerConfig, Target};
use crate::sensing::{CMatrix, SensingMap, SensingOperator};

/// Balanced contiguous split of `[0, m)` into `p` ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkPartition {
    ranges: Vec<Range<usize>>,
}

impl WorkPartition {
    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

/// The first `m mod p` ranges get ⌈m/p⌉ labels, the rest ⌊m/p⌋.
pub fn partition(m: usize, p: usize) -> Result<WorkPartition> {
    if p == 0 || p > m {
        return domain(format!("cannot split {m} labels across {p} workers"));
    }
    let (base, extra) = (m / p, m % p);
    let mut start = 0;
    let ranges = (0..p)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(WorkPartition { ranges })
}

fn join_all<T>(handles: Vec<thread::ScopedJoinHandle<'_, T>>) -> Result<Vec<T>> {
    handles
        .into_iter()
        .enumerate()
        .map(|(w, h)| h.join().map_err(|_| Error::Engine(format!("worker {w} panicked"))))
        .collect()
}

fn reduce(partials: Vec<CMatrix>, rows: usize, cols: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(rows, cols);
    for part in &partials {
        acc += part;
    }
    acc
}

/// A Pauli sensing map whose evaluations are split across worker threads.
#[derive(Debug, Clone)]
pub struct ParallelSensing<'a> {
    map: &'a SensingMap,
    partition: WorkPartition,
}

impl<'a> ParallelSensing<'a> {
    pub fn new(map: &'a SensingMap, workers: usize) -> Result<Self> {
        Ok(Self { map, partition: partition(map.len(), workers)? })
    }

    pub fn partition(&self) -> &WorkPartition {
        &self.partition
    }

    fn check(&self, z: &CMatrix, coeffs: usize) -> Result<()> {
        if z.nrows() != self.map.dim() {
            return domain(format!("factor has {} rows, expected {}", z.nrows(), self.map.dim()));
        }
        if coeffs != self.map.len() {
            return domain(format!("expected {} coefficients, got {coeffs}", self.map.len()));
        }
        Ok(())
    }
}

impl SensingOperator for ParallelSensing<'_> {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn len(&self) -> usize {
        self.map.len()
    }

    fn forward_factored(&self, u: &CMatrix) -> Result<Vec<f64>> {
        self.check(u, self.map.len())?;
        let mut out = vec![0.0; self.map.len()];
        thread::scope(|s| {
            let mut rest = out.as_mut_slice();
            let mut handles = Vec::with_capacity(self.partition.workers());
            for range in self.partition.ranges.iter().cloned() {
                let (chunk, tail) = rest.split_at_mut(range.len());
                rest = tail;
                handles.push(s.spawn(move || self.map.forward_range(range, u, chunk)));
            }
            join_all(handles)
        })?;
        Ok(out)
    }

    fn adjoint_times(&self, x: &[f64], z: &CMatrix) -> Result<CMatrix> {
        self.check(z, x.len())?;
        let partials = thread::scope(|s| {
            let handles = self
                .partition
                .ranges
                .iter()
                .cloned()
                .map(|range| {
                    s.spawn(move || {
                        let mut acc = CMatrix::zeros(z.nrows(), z.ncols());
                        self.map.adjoint_range(range.clone(), &x[range], z, &mut acc);
                        acc
                    })
                })
                .collect();
            join_all(handles)
        })?;
        Ok(reduce(partials, z.nrows(), z.ncols()))
    }

    fn residual_gradient(&self, y: &[f64], z: &CMatrix) -> Result<CMatrix> {
        self.check(z, y.len())?;
        let partials = thread::scope(|s| {
            let handles = self
                .partition
                .ranges
                .iter()
                .cloned()
                .map(|range| {
                    s.spawn(move || {
                        let mut residual = vec![0.0; range.len()];
                        self.map.forward_range(range.clone(), z, &mut residual);
                        residual.iter_mut().zip(&y[range.clone()]).for_each(|(r, yi)| *r -= yi);
                        let mut acc = CMatrix::zeros(z.nrows(), z.ncols());
                        self.map.adjoint_range(range, &residual, z, &mut acc);
                        acc
                    })
                })
                .collect();
            join_all(handles)
        })?;
        Ok(reduce(partials, z.nrows(), z.ncols()))
    }
}

/// A†(A(ZZ†) − y)·Z evaluated by `workers` threads.
pub fn parallel_gradient(map: &SensingMap, y: &[f64], z: &CMatrix, workers: usize) -> Result<CMatrix> {
    ParallelSensing::new(map, workers)?.residual_gradient(y, z)
}

/// [`mifgd::run`] with every sensing evaluation delegated to `workers` threads.
pub fn parallel_run(
    map: &SensingMap,
    y: &[f64],
    config: &OptimizerConfig,
    workers: usize,
    target: Option<&Target>,
) -> Result<(Factor, ConvergenceTrace)> {
    if workers == 0 {
        return domain("at least one worker is required");
    }
    mifgd::run(&ParallelSensing::new(map, workers)?, y, config, target)
}
