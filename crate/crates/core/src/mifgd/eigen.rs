//! Power iteration for Hermitian operators given only as matrix-vector products.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

pub type CVector = DVector<Complex64>;

/// A Hermitian linear operator on `C^dim`.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &CVector) -> Result<CVector>;
}

/// Wraps a closure as a [`HermitianOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&CVector) -> Result<CVector>> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&CVector) -> Result<CVector>> HermitianOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &CVector) -> Result<CVector> {
        (self.f)(v)
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: CVector,
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> CVector {
    let v = CVector::from_fn(dim, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

fn orthogonalize(v: &mut CVector, basis: &[EigenPair]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for p in basis {
            let c = p.vector.dotc(v);
            v.axpy(-c, &p.vector, Complex64::new(1.0, 0.0));
        }
    }
}

/// Spectral norm max|λ| by power iteration.
///
/// The estimate is ‖Mv‖ for the current unit iterate; iteration stops once
/// two successive estimates agree to relative precision `tol`.
pub fn spectral_norm<O: HermitianOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = substream(seed, Stream::Eigen, u64::MAX);
    let mut v = random_unit(op.dim(), &mut rng);
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        let w = op.apply(&v)?;
        let est = w.norm();
        if est == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= tol * est {
            return Ok(est);
        }
        prev = est;
        v = w / Complex64::new(est, 0.0);
    }
    Err(Error::NotConverged {
        what: "spectral-norm power iteration",
        iterations: max_iter,
        residual: prev,
    })
}

/// Top-`k` eigenpairs (largest eigenvalues first) by shifted power iteration
/// with deflation, followed by a Rayleigh-Ritz pass over the found vectors.
///
/// The operator is shifted by its spectral norm so that the dominant eigenvalue
/// of the shifted operator is the algebraically largest one. A pair is accepted
/// once its residual, taken orthogonal to the pairs already found, satisfies
/// ‖Mv − λv‖ ≤ tol·max(|λ|, √ε·‖M‖).
pub fn top_eigen<O: HermitianOperator + ?Sized>(
    op: &O,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::Domain(format!("cannot extract {k} eigenpairs from a {dim}-dimensional operator")));
    }
    let norm = spectral_norm(op, 1e-10, max_iter.max(1000), seed)?;
    let floor = f64::EPSILON.sqrt() * norm;
    let mut rng = substream(seed, Stream::Eigen, 0);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = random_unit(dim, &mut rng);
        orthogonalize(&mut v, &pairs);
        v /= Complex64::new(v.norm(), 0.0);
        let mut found = None;
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let mv = op.apply(&v)?;
            let lambda = v.dotc(&mv).re;
            let mut r = &mv - &v * Complex64::new(lambda, 0.0);
            orthogonalize(&mut r, &pairs);
            residual = r.norm();
            if residual <= tol * lambda.abs().max(floor) {
                found = Some(EigenPair { value: lambda, vector: v.clone() });
                break;
            }
            let mut w = mv + &v * Complex64::new(norm, 0.0);
            orthogonalize(&mut w, &pairs);
            let wn = w.norm();
            if wn == 0.0 {
                found = Some(EigenPair { value: lambda, vector: v.clone() });
                break;
            }
            v = w / Complex64::new(wn, 0.0);
        }
        match found {
            Some(p) => pairs.push(p),
            None => {
                return Err(Error::NotConverged {
                    what: "deflated power iteration",
                    iterations: max_iter,
                    residual,
                })
            }
        }
    }
    rayleigh_ritz(op, pairs)
}

/// Re-diagonalizes `op` on the span of the given vectors.
fn rayleigh_ritz<O: HermitianOperator + ?Sized>(op: &O, pairs: Vec<EigenPair>) -> Result<Vec<EigenPair>> {
    let k = pairs.len();
    let basis = DMatrix::from_columns(&pairs.iter().map(|p| p.vector.clone()).collect::<Vec<_>>());
    let images = DMatrix::from_columns(
        &pairs.iter().map(|p| op.apply(&p.vector)).collect::<Result<Vec<_>>>()?,
    );
    let h = basis.adjoint() * &images;
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let rotated = &basis * &eig.eigenvectors;
    let mut out: Vec<EigenPair> = (0..k)
        .map(|j| {
            let v = rotated.column(j).into_owned();
            let n = v.norm();
            EigenPair { value: eig.eigenvalues[j], vector: v / Complex64::new(n, 0.0) }
        })
        .collect();
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(out)
}
