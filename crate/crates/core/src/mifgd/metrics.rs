//! Reconstruction metrics computed from factors, never from d×d matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::sensing::CMatrix;
use crate::states::PureState;

fn frob_sq(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// min over unitary R of ‖u − vR‖_F.
pub fn procrustes_distance(u: &CMatrix, v: &CMatrix) -> Result<f64> {
    if u.shape() != v.shape() {
        return domain(format!("factor shapes differ: {:?} vs {:?}", u.shape(), v.shape()));
    }
    let r = procrustes_rotation(u, v)?;
    Ok(frob_sq(&(u - v * r)).sqrt())
}

/// The unitary R minimizing ‖u − vR‖_F (from the SVD of v†u).
pub fn procrustes_rotation(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    if u.shape() != v.shape() {
        return domain("factor shapes differ");
    }
    let svd = (v.adjoint() * u).svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(a), Some(bt)) => Ok(a * bt),
        _ => domain("SVD failed to produce singular vectors"),
    }
}

/// ‖uu† − vv†‖_F via ‖u†u‖² + ‖v†v‖² − 2‖u†v‖². Ranks may differ.
pub fn frobenius_error(u: &CMatrix, v: &CMatrix) -> Result<f64> {
    if u.nrows() != v.nrows() {
        return domain(format!("row counts differ: {} vs {}", u.nrows(), v.nrows()));
    }
    Ok(gram_distance_sq(u, v).sqrt())
}

pub(crate) fn gram_distance_sq(u: &CMatrix, v: &CMatrix) -> f64 {
    let uu = frob_sq(&(u.adjoint() * u));
    let vv = frob_sq(&(v.adjoint() * v));
    let uv = frob_sq(&(u.adjoint() * v));
    (uu + vv - 2.0 * uv).max(0.0)
}

/// ‖uu†‖_F
pub fn factor_density_norm(u: &CMatrix) -> f64 {
    frob_sq(&(u.adjoint() * u)).sqrt()
}

/// ⟨ψ|uu†|ψ⟩ = ‖u†ψ‖².
pub fn fidelity_rank1(u: &CMatrix, psi: &PureState) -> Result<f64> {
    if u.nrows() != psi.dim() {
        return domain(format!("factor has {} rows, state has dimension {}", u.nrows(), psi.dim()));
    }
    Ok(u.column_iter()
        .map(|c| c.iter().zip(psi.amplitudes()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr())
        .sum())
}
