//! Momentum-inspired factored gradient descent (MiFGD) and its μ = 0
//! specialization, factored gradient descent (FGD).
//!
//! The iteration is
//!
//! ```text
//! U_{i+1} = Z_i − η · A†(A(Z_i Z_i†) − y) · Z_i
//! Z_{i+1} = U_{i+1} + μ (U_{i+1} − U_i),      Z_0 = U_0
//! ```
//!
//! with η fixed for the whole run.

pub mod eigen;
pub mod metrics;

use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{substream, Stream};
use crate::sensing::{CMatrix, SensingOperator};
use crate::states::PureState;
use eigen::{spectral_norm, top_eigen, CVector, FnOperator};
pub use metrics::{factor_density_norm, fidelity_rank1, frobenius_error, procrustes_distance, procrustes_rotation};

/// `d × r` complex factor U with ρ = UU†.
pub type Factor = CMatrix;

pub const DEFAULT_L_HAT: f64 = 1.1;
const EIGEN_TOL: f64 = 1e-6;
const NORM_TOL: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// η = 1/(4(L̂‖Z0Z0†‖₂ + ‖A†(A(Z0Z0†) − y)‖₂)).
    Auto,
    Fixed(f64),
}

/// Quantities entering the momentum bound μ = ε/(2·10³ r τ √κ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumParams {
    pub rank: usize,
    /// Condition number σ₁(ρ*)/σ_r(ρ*).
    pub tau: f64,
    /// Sensing condition number (1 + δ)/(1 − δ).
    pub kappa: f64,
    pub epsilon: f64,
}

impl MomentumParams {
    /// Pure target (τ = 1) with κ at its bound 11/9 for δ ≤ 1/10.
    pub fn pure_state(epsilon: f64) -> Self {
        Self { rank: 1, tau: 1.0, kappa: 11.0 / 9.0, epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || !(self.tau >= 1.0) || !(self.kappa >= 1.0) {
            return domain("momentum parameters need rank ≥ 1, τ ≥ 1, κ ≥ 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return domain(format!("ε must lie in (0, 1], got {}", self.epsilon));
        }
        Ok(())
    }
}

/// μ* = ε / (2000 · r · τ · √κ).
pub fn theoretical_mu(p: &MomentumParams) -> f64 {
    p.epsilon / (2000.0 * p.rank as f64 * p.tau * p.kappa.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    Fixed(f64),
    Theoretical(MomentumParams),
}

impl Momentum {
    pub fn value(&self) -> Result<f64> {
        match self {
            Momentum::Fixed(mu) => Ok(*mu),
            Momentum::Theoretical(p) => {
                p.validate()?;
                Ok(theoretical_mu(p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Spectral,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rank: usize,
    pub eta: StepSize,
    pub mu: Momentum,
    pub maxiters: usize,
    pub reltol: f64,
    pub seed: u64,
    pub init: Init,
    pub l_hat: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            eta: StepSize::Fixed(1e-3),
            mu: Momentum::Fixed(0.75),
            maxiters: 1000,
            reltol: 5e-4,
            seed: 0,
            init: Init::Random,
            l_hat: DEFAULT_L_HAT,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return domain("rank must be at least 1");
        }
        if self.maxiters == 0 {
            return domain("maxiters must be at least 1");
        }
        if !(self.reltol > 0.0) {
            return domain("reltol must be positive");
        }
        if !(self.l_hat > 1.0 && self.l_hat <= 1.1) {
            return domain(format!("L̂ must lie in (1, 1.1], got {}", self.l_hat));
        }
        if let StepSize::Fixed(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return domain(format!("step size must be positive, got {eta}"));
            }
        }
        let mu = self.mu.value()?;
        if !(0.0..1.0).contains(&mu) {
            return domain(format!("μ must lie in [0, 1), got {mu}"));
        }
        Ok(())
    }
}

/// Ground truth used only for trace metrics.
#[derive(Debug, Clone)]
pub enum Target {
    State(PureState),
    Factor(Factor),
}

impl Target {
    fn factor(&self) -> Factor {
        match self {
            Target::State(s) => s.as_factor(),
            Target::Factor(f) => f.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub change: f64,
    pub error: Option<f64>,
    pub fidelity: Option<f64>,
    pub time_s: f64,
    pub grad_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub eta: f64,
    pub mu: f64,
    /// True when the run stopped on `reltol` rather than `maxiters`.
    pub converged: bool,
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// w ↦ A†(x)·w as a Hermitian operator on C^d.
fn adjoint_operator<'a, S: SensingOperator + ?Sized>(
    op: &'a S,
    x: &'a [f64],
) -> FnOperator<impl Fn(&CVector) -> Result<CVector> + 'a> {
    let d = op.dim();
    FnOperator::new(d, move |v: &CVector| {
        let z = CMatrix::from_column_slice(d, 1, v.as_slice());
        let out = op.adjoint_times(x, &z)?;
        Ok(DVector::from_column_slice(out.as_slice()))
    })
}

/// U0 from the top-r PSD part of A†(y), scaled by 1/L̂.
pub fn spectral_init<S: SensingOperator + ?Sized>(
    op: &S,
    y: &[f64],
    rank: usize,
    l_hat: f64,
    seed: u64,
) -> Result<Factor> {
    if y.len() != op.len() {
        return domain(format!("expected {} observations, got {}", op.len(), y.len()));
    }
    let m = adjoint_operator(op, y);
    let pairs = top_eigen(&m, rank, EIGEN_TOL, EIGEN_MAX_ITER, seed)?;
    let mut u = Factor::zeros(op.dim(), rank);
    for (j, p) in pairs.iter().enumerate() {
        if p.value > 0.0 {
            let w = Complex64::new((p.value / l_hat).sqrt(), 0.0);
            u.set_column(j, &(&p.vector * w));
        }
    }
    Ok(u)
}

/// Complex Gaussian entries scaled to unit Frobenius norm.
pub fn random_init(d: usize, rank: usize, seed: u64) -> Factor {
    let mut rng = substream(seed, Stream::Init, 0);
    let u = Factor::from_fn(d, rank, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = u.norm();
    u / Complex64::new(norm, 0.0)
}

/// η = 1/(4(L̂·‖Z0Z0†‖₂ + ‖A†(A(Z0Z0†) − y)‖₂)).
pub fn compute_step_size<S: SensingOperator + ?Sized>(
    op: &S,
    y: &[f64],
    z0: &Factor,
    l_hat: f64,
    seed: u64,
) -> Result<f64> {
    if z0.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return domain("step size is undefined at the zero factor");
    }
    let gram = z0.adjoint() * z0;
    let top = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    let mut residual = op.forward_factored(z0)?;
    if residual.len() != y.len() {
        return domain(format!("expected {} observations, got {}", residual.len(), y.len()));
    }
    residual.iter_mut().zip(y).for_each(|(r, yi)| *r -= yi);
    let grad_norm = spectral_norm(&adjoint_operator(op, &residual), NORM_TOL, EIGEN_MAX_ITER, seed)?;
    Ok(1.0 / (4.0 * (l_hat * top + grad_norm)))
}

/// The starting factor selected by `config.init`.
pub fn initialize<S: SensingOperator + ?Sized>(op: &S, y: &[f64], config: &OptimizerConfig) -> Result<Factor> {
    match config.init {
        Init::Spectral => spectral_init(op, y, config.rank, config.l_hat, config.seed),
        Init::Random => Ok(random_init(op.dim(), config.rank, config.seed)),
    }
}

/// ‖U1U1† − U0U0†‖_F / max(‖U0U0†‖_F, 1e-15).
pub fn relative_change(prev: &Factor, next: &Factor) -> f64 {
    metrics::gram_distance_sq(next, prev).sqrt() / factor_density_norm(prev).max(1e-15)
}

/// Full run: initialization, step size, then the momentum iteration.
pub fn run<S: SensingOperator + ?Sized>(
    op: &S,
    y: &[f64],
    config: &OptimizerConfig,
    target: Option<&Target>,
) -> Result<(Factor, ConvergenceTrace)> {
    config.validate()?;
    if y.len() != op.len() {
        return domain(format!("expected {} observations, got {}", op.len(), y.len()));
    }
    let start = Instant::now();
    let u0 = initialize(op, y, config)?;
    let eta = match config.eta {
        StepSize::Fixed(eta) => eta,
        StepSize::Auto => compute_step_size(op, y, &u0, config.l_hat, config.seed)?,
    };
    iterate(op, y, u0, eta, config.mu.value()?, config.maxiters, config.reltol, target, start)
}

/// The momentum iteration from a given U0 with fixed η and μ.
#[allow(clippy::too_many_arguments)]
pub fn iterate<S: SensingOperator + ?Sized>(
    op: &S,
    y: &[f64],
    u0: Factor,
    eta: f64,
    mu: f64,
    maxiters: usize,
    reltol: f64,
    target: Option<&Target>,
    start: Instant,
) -> Result<(Factor, ConvergenceTrace)> {
    if maxiters == 0 {
        return domain("maxiters must be at least 1");
    }
    let target_factor = target.map(Target::factor);
    if let Some(t) = &target_factor {
        if t.nrows() != u0.nrows() {
            return domain("target dimension does not match the factor");
        }
    }
    let mut trace = ConvergenceTrace { eta, mu, ..Default::default() };
    let mut u_prev = u0;
    let mut z = u_prev.clone();
    for i in 0..maxiters {
        let t_grad = Instant::now();
        let grad = op.residual_gradient(y, &z)?;
        let grad_time_s = t_grad.elapsed().as_secs_f64();

        let u_next = &z - grad * Complex64::new(eta, 0.0);
        if u_next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Diverged { iteration: i + 1 });
        }
        z = &u_next + (&u_next - &u_prev) * Complex64::new(mu, 0.0);

        let change = relative_change(&u_prev, &u_next);
        let error = target_factor.as_ref().map(|t| metrics::gram_distance_sq(&u_next, t).sqrt());
        let fidelity = match target {
            Some(Target::State(psi)) => Some(fidelity_rank1(&u_next, psi)?),
            _ => None,
        };
        trace.records.push(IterationRecord {
            iter: i + 1,
            change,
            error,
            fidelity,
            time_s: start.elapsed().as_secs_f64(),
            grad_time_s,
        });
        u_prev = u_next;
        if change <= reltol {
            trace.converged = true;
            break;
        }
    }
    Ok((u_prev, trace))
}
