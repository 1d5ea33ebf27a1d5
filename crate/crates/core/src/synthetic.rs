//! Low-rank matrix sensing benchmark with random real functionals of
//! Hermitian matrices, used to compare momentum values head to head.
//!
//! A Hermitian `X` is flattened to `w = [vec Re X; vec Im X] ∈ R^{2d²}`,
//! which is an isometry for the Frobenius norm, and each measurement is a
//! real linear functional of `w`.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mifgd::{self, frobenius_error, ConvergenceTrace, Factor, Init, MomentumParams, OptimizerConfig, StepSize, Target};
use crate::rng::{substream, Stream};
use crate::sensing::{CMatrix, SensingOperator};

/// Entry budget for the dense Gaussian ensemble (8 bytes each).
pub const MAX_DENSE_ENTRIES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// i.i.d. N(0, 1/m) functionals stored densely.
    Gaussian,
    /// Randomly subsampled rows of a sign-randomized Walsh–Hadamard transform.
    Hadamard,
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "hadamard" => Ok(Self::Hadamard),
            _ => domain(format!("unknown ensemble {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProblem {
    pub d: usize,
    pub r: usize,
    /// Oversampling: m = c·d·r.
    pub c: usize,
    pub noise_norm: f64,
    pub seed: u64,
    pub ensemble: Ensemble,
}

impl SyntheticProblem {
    pub fn measurements(&self) -> usize {
        self.c * self.d * self.r
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.r == 0 || self.c == 0 {
            return domain("d, r and c must be positive");
        }
        if self.r > self.d {
            return domain(format!("rank {} exceeds dimension {}", self.r, self.d));
        }
        let m = self.measurements();
        if m > self.d * self.d {
            return domain(format!("m = {m} exceeds d² = {}", self.d * self.d));
        }
        if !(self.noise_norm >= 0.0 && self.noise_norm.is_finite()) {
            return domain("noise norm must be finite and nonnegative");
        }
        if self.ensemble == Ensemble::Hadamard && !self.d.is_power_of_two() {
            return domain("the Hadamard ensemble needs a power-of-two dimension");
        }
        if self.ensemble == Ensemble::Gaussian && m.saturating_mul(2 * self.d * self.d) > MAX_DENSE_ENTRIES {
            return Err(Error::MemoryGuard(format!(
                "dense Gaussian sensing with m = {m}, d = {} needs more than {MAX_DENSE_ENTRIES} entries",
                self.d
            )));
        }
        Ok(())
    }
}

fn flatten(x: &CMatrix) -> Vec<f64> {
    x.iter().map(|c| c.re).chain(x.iter().map(|c| c.im)).collect()
}

/// Inverse of `flatten` followed by the Hermitian part.
fn unflatten_hermitian(d: usize, w: &[f64]) -> CMatrix {
    let dd = d * d;
    let g = CMatrix::from_fn(d, d, |i, j| Complex64::new(w[j * d + i], w[dd + j * d + i]));
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

fn check_factor(d: usize, u: &CMatrix) -> Result<()> {
    if u.nrows() != d {
        return domain(format!("factor has {} rows, expected {d}", u.nrows()));
    }
    Ok(())
}

/// Dense real functionals `A(X)_i = ⟨a_i, w(X)⟩`.
#[derive(Debug, Clone)]
pub struct DenseSensing {
    d: usize,
    rows: DMatrix<f64>,
}

impl DenseSensing {
    pub fn gaussian(d: usize, m: usize, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::Sensing, 0);
        let sd = 1.0 / (m as f64).sqrt();
        let rows = DMatrix::from_fn(m, 2 * d * d, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        Self { d, rows }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }
}

impl SensingOperator for DenseSensing {
    fn dim(&self) -> usize {
        self.d
    }

    fn len(&self) -> usize {
        self.rows.nrows()
    }

    fn forward_factored(&self, u: &CMatrix) -> Result<Vec<f64>> {
        check_factor(self.d, u)?;
        let w = nalgebra::DVector::from_vec(flatten(&(u * u.adjoint())));
        Ok((&self.rows * w).data.into())
    }

    fn adjoint_times(&self, x: &[f64], z: &CMatrix) -> Result<CMatrix> {
        check_factor(self.d, z)?;
        if x.len() != self.len() {
            return domain(format!("expected {} coefficients, got {}", self.len(), x.len()));
        }
        let w = self.rows.tr_mul(&nalgebra::DVector::from_column_slice(x));
        Ok(unflatten_hermitian(self.d, w.as_slice()) * z)
    }
}

/// In-place orthonormal fast Walsh–Hadamard transform.
fn fwht(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, t) = (*x + *y, *x - *y);
                *x = s;
                *y = t;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
}

/// `A(X) = √(N/m) · S H D w(X)` with random signs `D`, orthonormal Walsh–Hadamard
/// `H` and a uniformly random row subset `S`.
#[derive(Debug, Clone)]
pub struct HadamardSensing {
    d: usize,
    signs: Vec<f64>,
    rows: Vec<usize>,
    scale: f64,
}

impl HadamardSensing {
    pub fn new(d: usize, m: usize, seed: u64) -> Result<Self> {
        if !d.is_power_of_two() {
            return domain("the Hadamard ensemble needs a power-of-two dimension");
        }
        let n = 2 * d * d;
        if m == 0 || m > n {
            return domain(format!("m must lie in [1, {n}]"));
        }
        let mut rng = substream(seed, Stream::Sensing, 0);
        let signs = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut rows = sample(&mut rng, n, m).into_vec();
        rows.sort_unstable();
        Ok(Self { d, signs, rows, scale: (n as f64 / m as f64).sqrt() })
    }

    fn apply_flat(&self, w: &mut [f64]) -> Vec<f64> {
        w.iter_mut().zip(&self.signs).for_each(|(x, s)| *x *= s);
        fwht(w);
        self.rows.iter().map(|&k| self.scale * w[k]).collect()
    }

    fn adjoint_flat(&self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.signs.len()];
        for (&k, &xi) in self.rows.iter().zip(x) {
            w[k] = self.scale * xi;
        }
        fwht(&mut w);
        w.iter_mut().zip(&self.signs).for_each(|(x, s)| *x *= s);
        w
    }
}

impl SensingOperator for HadamardSensing {
    fn dim(&self) -> usize {
        self.d
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn forward_factored(&self, u: &CMatrix) -> Result<Vec<f64>> {
        check_factor(self.d, u)?;
        Ok(self.apply_flat(&mut flatten(&(u * u.adjoint()))))
    }

    fn adjoint_times(&self, x: &[f64], z: &CMatrix) -> Result<CMatrix> {
        check_factor(self.d, z)?;
        if x.len() != self.len() {
            return domain(format!("expected {} coefficients, got {}", self.len(), x.len()));
        }
        Ok(unflatten_hermitian(self.d, &self.adjoint_flat(x)) * z)
    }
}

pub enum SyntheticSensing {
    Gaussian(DenseSensing),
    Hadamard(HadamardSensing),
}

impl SyntheticSensing {
    pub fn as_operator(&self) -> &dyn SensingOperator {
        match self {
            Self::Gaussian(op) => op,
            Self::Hadamard(op) => op,
        }
    }
}

pub struct SyntheticInstance {
    pub sensing: SyntheticSensing,
    pub y: Vec<f64>,
    /// Ground truth with ‖U*U*†‖_F = 1.
    pub truth: Factor,
}

pub fn generate_synthetic(p: &SyntheticProblem) -> Result<SyntheticInstance> {
    p.validate()?;
    let m = p.measurements();
    let sensing = match p.ensemble {
        Ensemble::Gaussian => SyntheticSensing::Gaussian(DenseSensing::gaussian(p.d, m, p.seed)),
        Ensemble::Hadamard => SyntheticSensing::Hadamard(HadamardSensing::new(p.d, m, p.seed)?),
    };
    let mut rng = substream(p.seed, Stream::State, 0);
    let mut truth = CMatrix::from_fn(p.d, p.r, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0));
    let scale = mifgd::factor_density_norm(&truth).sqrt();
    truth /= Complex64::new(scale, 0.0);

    let mut y = sensing.as_operator().forward_factored(&truth)?;
    if p.noise_norm > 0.0 {
        let mut rng = substream(p.seed, Stream::Noise, 0);
        let w: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        y.iter_mut().zip(&w).for_each(|(yi, wi)| *yi += p.noise_norm * wi / norm);
    }
    Ok(SyntheticInstance { sensing, y, truth })
}

/// μ from the momentum bound with τ taken from the planted ρ* and κ = 11/9.
pub fn synthetic_theoretical_mu(instance: &SyntheticInstance, epsilon: f64) -> Result<f64> {
    let sv = instance.truth.singular_values();
    let (max, min) = (sv.max(), sv.min());
    let params = MomentumParams { rank: instance.truth.ncols(), tau: (max / min).powi(2), ..MomentumParams::pure_state(epsilon) };
    params.validate()?;
    Ok(mifgd::theoretical_mu(&params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSettings {
    pub tol: f64,
    pub maxiters: usize,
    pub seed: u64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        Self { tol: 1e-3, maxiters: 4000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRun {
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ‖ρ̂ − ρ*‖_F / ‖ρ*‖_F
    pub final_error: f64,
    pub wall_time_s: f64,
    pub trace: ConvergenceTrace,
}

/// One run per μ from the same random start and step size rule.
pub fn run_synthetic_comparison(
    problem: &SyntheticProblem,
    mus: &[f64],
    settings: &SyntheticSettings,
) -> Result<Vec<SyntheticRun>> {
    let instance = generate_synthetic(problem)?;
    run_on_instance(&instance, mus, settings)
}

pub fn run_on_instance(instance: &SyntheticInstance, mus: &[f64], settings: &SyntheticSettings) -> Result<Vec<SyntheticRun>> {
    let op = instance.sensing.as_operator();
    let target = Target::Factor(instance.truth.clone());
    mus.iter()
        .map(|&mu| {
            let config = OptimizerConfig {
                rank: instance.truth.ncols(),
                eta: StepSize::Auto,
                mu: mifgd::Momentum::Fixed(mu),
                maxiters: settings.maxiters,
                reltol: settings.tol,
                seed: settings.seed,
                init: Init::Random,
                ..OptimizerConfig::default()
            };
            let start = Instant::now();
            let (u, trace) = mifgd::run(op, &instance.y, &config, Some(&target))?;
            Ok(SyntheticRun {
                mu,
                iterations: trace.iterations(),
                converged: trace.converged,
                final_error: frobenius_error(&u, &instance.truth)?,
                wall_time_s: start.elapsed().as_secs_f64(),
                trace,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_factor(rng: &mut ChaCha8Rng, d: usize, r: usize) -> CMatrix {
        CMatrix::from_fn(d, r, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
    }

    fn problem(ensemble: Ensemble, noise_norm: f64) -> SyntheticProblem {
        SyntheticProblem { d: 16, r: 2, c: 5, noise_norm, seed: 3, ensemble }
    }

    fn dense_hadamard(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| (if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }) / (n as f64).sqrt())
    }

    #[test]
    fn fwht_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..32).map(|_| rng.sample(StandardNormal)).collect();
        let mut fast = v.clone();
        fwht(&mut fast);
        let dense = dense_hadamard(32) * nalgebra::DVector::from_vec(v);
        for (a, b) in fast.iter().zip(dense.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn flatten_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_factor(&mut rng, 5, 2);
        let x = &u * u.adjoint();
        let w = flatten(&x);
        assert_abs_diff_eq!(w.iter().map(|a| a * a).sum::<f64>().sqrt(), x.norm(), epsilon = 1e-12);
        assert_abs_diff_eq!((unflatten_hermitian(5, &w) - &x).norm(), 0.0, epsilon = 1e-12);
    }

    /// ⟨A(UU†), x⟩ = Re Tr(U† A†(x) U) for both ensembles.
    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for ensemble in [Ensemble::Gaussian, Ensemble::Hadamard] {
            let inst = generate_synthetic(&problem(ensemble, 0.0)).unwrap();
            let op = inst.sensing.as_operator();
            for _ in 0..5 {
                let u = random_factor(&mut rng, 16, 2);
                let x: Vec<f64> = (0..op.len()).map(|_| rng.sample(StandardNormal)).collect();
                let lhs: f64 = op.forward_factored(&u).unwrap().iter().zip(&x).map(|(a, b)| a * b).sum();
                let rhs = (u.adjoint() * op.adjoint_times(&x, &u).unwrap()).trace().re;
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn hadamard_rows_match_dense_construction() {
        let d = 4;
        let op = HadamardSensing::new(d, 10, 9).unwrap();
        let n = 2 * d * d;
        let dense = dense_hadamard(n) * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(op.signs.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_factor(&mut rng, d, 1);
        let w = nalgebra::DVector::from_vec(flatten(&(&u * u.adjoint())));
        let full = dense * w;
        let fast = op.forward_factored(&u).unwrap();
        for (k, &row) in op.rows.iter().enumerate() {
            assert_abs_diff_eq!(fast[k], op.scale * full[row], epsilon = 1e-12);
        }
    }

    #[test]
    fn generation_contract() {
        for ensemble in [Ensemble::Gaussian, Ensemble::Hadamard] {
            let clean = generate_synthetic(&problem(ensemble, 0.0)).unwrap();
            assert_abs_diff_eq!(mifgd::factor_density_norm(&clean.truth), 1.0, epsilon = 1e-12);
            assert_eq!(clean.y, clean.sensing.as_operator().forward_factored(&clean.truth).unwrap());
            let again = generate_synthetic(&problem(ensemble, 0.0)).unwrap();
            assert_eq!(clean.y, again.y);

            let noisy = generate_synthetic(&problem(ensemble, 0.01)).unwrap();
            let w: f64 = noisy.y.iter().zip(&clean.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert_abs_diff_eq!(w, 0.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn validation() {
        let bad = SyntheticProblem { d: 4, r: 2, c: 5, noise_norm: 0.0, seed: 0, ensemble: Ensemble::Gaussian };
        assert!(matches!(generate_synthetic(&bad), Err(Error::Domain(_))));
        let huge = SyntheticProblem { d: 256, r: 5, c: 5, noise_norm: 0.0, seed: 0, ensemble: Ensemble::Gaussian };
        assert!(matches!(generate_synthetic(&huge), Err(Error::MemoryGuard(_))));
        let odd = SyntheticProblem { d: 12, r: 1, c: 3, noise_norm: 0.0, seed: 0, ensemble: Ensemble::Hadamard };
        assert!(generate_synthetic(&odd).is_err());
        assert!(generate_synthetic(&SyntheticProblem { noise_norm: -1.0, ..problem(Ensemble::Gaussian, 0.0) }).is_err());
    }

    #[test]
    fn small_problem_recovers() {
        for ensemble in [Ensemble::Gaussian, Ensemble::Hadamard] {
            let p = SyntheticProblem { c: 8, ..problem(ensemble, 0.0) };
            let settings = SyntheticSettings { tol: 1e-6, maxiters: 4000, seed: 1 };
            let runs = run_synthetic_comparison(&p, &[0.0, 2.0 / 3.0], &settings).unwrap();
            for run in &runs {
                assert!(run.converged, "{ensemble:?} μ={} did not converge", run.mu);
                assert!(run.final_error < 1e-3, "{ensemble:?} μ={} error {}", run.mu, run.final_error);
            }
            assert!(runs[1].iterations < runs[0].iterations);
        }
    }

    #[test]
    fn theoretical_mu_for_planted_factor() {
        let inst = generate_synthetic(&problem(Ensemble::Hadamard, 0.0)).unwrap();
        let mu = synthetic_theoretical_mu(&inst, 1.0).unwrap();
        let sv = inst.truth.singular_values();
        let tau = (sv.max() / sv.min()).powi(2);
        assert_abs_diff_eq!(mu, 1.0 / (2000.0 * 2.0 * tau * (11.0f64 / 9.0).sqrt()), epsilon = 1e-15);
    }
}
