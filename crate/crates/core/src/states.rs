//! Target pure states and a minimal state-vector simulator.
//!
//! Basis index `i` is read as an `n`-bit string with qubit 0 as the most
//! significant bit. Every module in the crate shares this ordering.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{substream, Stream};

const NORM_TOL: f64 = 1e-10;

/// Bit position of qubit `q` inside a basis index of an `n`-qubit register.
#[inline]
pub(crate) fn qubit_bit(n: usize, q: usize) -> usize {
    n - 1 - q
}

/// A normalized pure state on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > 30 {
            return domain(format!("qubit count {n} out of range"));
        }
        if amplitudes.len() != 1usize << n {
            return domain(format!(
                "expected {} amplitudes for {n} qubits, got {}",
                1usize << n,
                amplitudes.len()
            ));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return domain(format!("state is not normalized (norm² = {norm_sq})"));
        }
        Ok(Self { n, amplitudes })
    }

    /// |0…0⟩
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > 30 {
            return domain(format!("qubit count {n} out of range"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// The state as a `d × 1` factor, i.e. ρ = ψψ†.
    pub fn as_factor(&self) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(self.dim(), 1, &self.amplitudes)
    }

    fn apply_single(&mut self, q: usize, g: [[Complex64; 2]; 2]) {
        let bit = 1usize << qubit_bit(self.n, q);
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = g[0][0] * a0 + g[0][1] * a1;
                self.amplitudes[i | bit] = g[1][0] * a0 + g[1][1] * a1;
            }
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let cbit = 1usize << qubit_bit(self.n, control);
        let tbit = 1usize << qubit_bit(self.n, target);
        for i in 0..self.amplitudes.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
    }
}

/// Single-qubit unitary with three Euler angles:
/// U(θ,φ,λ) = [[cos(θ/2), −e^{iλ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(φ+λ)} cos(θ/2)]].
pub fn euler_rotation(theta: f64, phi: f64, lambda: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [
            Complex64::new(c, 0.0),
            -Complex64::from_polar(s, lambda),
        ],
        [
            Complex64::from_polar(s, phi),
            Complex64::from_polar(c, phi + lambda),
        ],
    ]
}

/// (|0…0⟩ + |1…1⟩)/√2, defined for n > 2.
pub fn ghz(n: usize) -> Result<PureState> {
    ghz_signed(n, 1.0)
}

/// (|0…0⟩ − |1…1⟩)/√2, defined for n > 2.
pub fn ghz_minus(n: usize) -> Result<PureState> {
    ghz_signed(n, -1.0)
}

fn ghz_signed(n: usize, sign: f64) -> Result<PureState> {
    if n <= 2 {
        return domain(format!("GHZ states need more than 2 qubits, got {n}"));
    }
    let mut state = PureState::zero(n)?;
    let last = state.dim() - 1;
    state.amplitudes[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    state.amplitudes[last] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
    Ok(state)
}

/// Hadamard on every qubit of |0…0⟩: the uniform superposition.
pub fn hadamard_all(n: usize) -> Result<PureState> {
    let mut state = PureState::zero(n)?;
    let amp = Complex64::new((state.dim() as f64).sqrt().recip(), 0.0);
    state.amplitudes.iter_mut().for_each(|a| *a = amp);
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomCircuitSpec {
    pub n: usize,
    pub depth: usize,
    pub seed: u64,
}

/// Runs `depth` randomly chosen gates on |0…0⟩.
///
/// Each step picks, with equal probability, either a U(θ,φ,λ) rotation on a
/// uniform qubit with angles uniform in [0, 1] radians, or a CX on a uniform
/// ordered pair of distinct qubits. Single-qubit registers only get rotations.
pub fn random_state(spec: RandomCircuitSpec) -> Result<PureState> {
    let mut state = PureState::zero(spec.n)?;
    let mut rng = substream(spec.seed, Stream::State, 0);
    for _ in 0..spec.depth {
        let rotation = spec.n == 1 || rng.gen_bool(0.5);
        if rotation {
            let q = rng.gen_range(0..spec.n);
            let (theta, phi, lambda) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            state.apply_single(q, euler_rotation(theta, phi, lambda));
        } else {
            let control = rng.gen_range(0..spec.n);
            let mut target = rng.gen_range(0..spec.n - 1);
            if target >= control {
                target += 1;
            }
            state.apply_cx(control, target);
        }
    }
    // Renormalize away rounding drift from long circuits.
    let norm = state.norm();
    state.amplitudes.iter_mut().for_each(|a| *a /= norm);
    Ok(state)
}

/// ρ = |ψ⟩⟨ψ| as a dense matrix.
pub fn density_of(state: &PureState) -> DMatrix<Complex64> {
    let psi = state.as_factor();
    &psi * psi.adjoint()
}

/// Named circuits accepted by the CLI and config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Circuit {
    Ghz,
    GhzMinus,
    Hadamard,
    Random,
}

impl Circuit {
    pub fn build(self, n: usize, depth: usize, seed: u64) -> Result<PureState> {
        match self {
            Circuit::Ghz => ghz(n),
            Circuit::GhzMinus => ghz_minus(n),
            Circuit::Hadamard => hadamard_all(n),
            Circuit::Random => random_state(RandomCircuitSpec { n, depth, seed }),
        }
    }
}

impl std::str::FromStr for Circuit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ghz" => Ok(Circuit::Ghz),
            "ghz_minus" | "ghz-minus" | "ghzminus" => Ok(Circuit::GhzMinus),
            "hadamard" => Ok(Circuit::Hadamard),
            "random" => Ok(Circuit::Random),
            other => Err(format!("unknown circuit '{other}'")),
        }
    }
}
