//! Pauli monomials, Pauli-basis measurements and the conversion from basis
//! counts to monomial expectation values.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{substream, Stream};
use crate::states::{qubit_bit, PureState};

/// Largest register handled by the exhaustive (4^n-indexed) helpers.
pub const MAX_QUBITS: usize = 15;

/// Tensor product of single-qubit Paulis; label k ∈ {0,1,2,3} = {𝟙, σx, σy, σz}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliMonomial {
    labels: Vec<u8>,
}

impl PauliMonomial {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if labels.is_empty() {
            return domain("a monomial needs at least one qubit");
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 3) {
            return domain(format!("invalid Pauli label {bad}"));
        }
        Ok(Self { labels })
    }

    pub fn identity(n: usize) -> Self {
        Self { labels: vec![0; n] }
    }

    /// Decodes a base-4 index (qubit 0 is the most significant digit).
    pub fn from_index(n: usize, mut idx: usize) -> Self {
        let mut labels = vec![0u8; n];
        for l in labels.iter_mut().rev() {
            *l = (idx % 4) as u8;
            idx /= 4;
        }
        Self { labels }
    }

    pub fn index(&self) -> usize {
        self.labels.iter().fold(0, |acc, &l| acc * 4 + l as usize)
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn is_identity(&self) -> bool {
        self.labels.iter().all(|&l| l == 0)
    }

    /// Every monomial on `n` qubits in index order.
    pub fn all(n: usize) -> Result<Vec<Self>> {
        check_register(n)?;
        Ok((0..1usize << (2 * n)).map(|i| Self::from_index(n, i)).collect())
    }

    pub(crate) fn action(&self) -> PauliAction {
        PauliAction::new(self)
    }

    /// Bits of the outcome string that enter the parity (non-identity qubits).
    fn support_mask(&self) -> usize {
        let n = self.labels.len();
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .fold(0, |m, (q, _)| m | 1 << qubit_bit(n, q))
    }
}

impl fmt::Display for PauliMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.labels {
            f.write_str(["I", "X", "Y", "Z"][l as usize])?;
        }
        Ok(())
    }
}

impl FromStr for PauliMonomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                other => Err(Error::Domain(format!("invalid Pauli letter '{other}'"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(labels)
    }
}

/// Matrix-free form of a monomial: P|j⟩ = phase · i^{#Y} · (−1)^{|j ∧ zmask|} |j ⊕ xmask⟩.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PauliAction {
    pub xmask: usize,
    pub zmask: usize,
    pub phase: Complex64,
}

impl PauliAction {
    fn new(p: &PauliMonomial) -> Self {
        let n = p.labels.len();
        let (mut xmask, mut zmask, mut ny) = (0usize, 0usize, 0u32);
        for (q, &l) in p.labels.iter().enumerate() {
            let bit = 1 << qubit_bit(n, q);
            match l {
                1 => xmask |= bit,
                2 => {
                    xmask |= bit;
                    zmask |= bit;
                    ny += 1;
                }
                3 => zmask |= bit,
                _ => {}
            }
        }
        let phase = match ny % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Self { xmask, zmask, phase }
    }

    /// out += scale · P v
    #[inline]
    pub fn accumulate(&self, v: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        let (plus, minus) = (scale * self.phase, -scale * self.phase);
        for (j, &vj) in v.iter().enumerate() {
            let c = if (j & self.zmask).count_ones() % 2 == 0 { plus } else { minus };
            out[j ^ self.xmask] += c * vj;
        }
    }

    /// Re ⟨v, P v⟩ (the imaginary part vanishes since P is Hermitian).
    #[inline]
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let mut even = Complex64::new(0.0, 0.0);
        let mut odd = Complex64::new(0.0, 0.0);
        for (j, &vj) in v.iter().enumerate() {
            let t = v[j ^ self.xmask].conj() * vj;
            if (j & self.zmask).count_ones() % 2 == 0 {
                even += t;
            } else {
                odd += t;
            }
        }
        (self.phase * (even - odd)).re
    }
}

/// Returns P·v without forming P.
pub fn apply_monomial(p: &PauliMonomial, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.len() != 1usize << p.num_qubits() {
        return domain(format!(
            "vector length {} does not match a {}-qubit monomial",
            v.len(),
            p.num_qubits()
        ));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    p.action().accumulate(v, Complex64::new(1.0, 0.0), &mut out);
    Ok(out)
}

/// ⟨ψ|P|ψ⟩
pub fn exact_expectation(state: &PureState, p: &PauliMonomial) -> Result<f64> {
    if state.num_qubits() != p.num_qubits() {
        return domain(format!(
            "{}-qubit monomial applied to a {}-qubit state",
            p.num_qubits(),
            state.num_qubits()
        ));
    }
    Ok(p.action().quadratic_form(state.amplitudes()))
}

/// Number of monomials for a measurement percentage: round-half-up of
/// `measpc/100 · 4^n`, clamped to `[1, 4^n]`.
pub fn monomial_count(n: usize, measpc: f64) -> Result<usize> {
    check_register(n)?;
    if !(measpc > 0.0 && measpc <= 100.0) {
        return domain(format!("measpc must lie in (0, 100], got {measpc}"));
    }
    let total = 1usize << (2 * n);
    let m = (measpc * total as f64 / 100.0 + 0.5).floor() as usize;
    Ok(m.clamp(1, total))
}

/// Draws `m` distinct monomials uniformly without replacement.
pub fn sample_monomials(n: usize, m: usize, seed: u64) -> Result<Vec<PauliMonomial>> {
    check_register(n)?;
    let total = 1usize << (2 * n);
    if m == 0 || m > total {
        return domain(format!("cannot draw {m} distinct monomials out of {total}"));
    }
    let mut rng = substream(seed, Stream::Monomials, 0);
    Ok(index::sample(&mut rng, total, m)
        .into_iter()
        .map(|i| PauliMonomial::from_index(n, i))
        .collect())
}

fn check_register(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return domain(format!("qubit count {n} out of range 1..={MAX_QUBITS}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Measurement basis per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliSetting {
    axes: Vec<Axis>,
}

impl PauliSetting {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return domain("a setting needs at least one qubit");
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn num_qubits(&self) -> usize {
        self.axes.len()
    }
}

impl fmt::Display for PauliSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.axes.iter().try_for_each(|a| write!(f, "{}", a.letter()))
    }
}

impl FromStr for PauliSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'x' => Ok(Axis::X),
                'y' => Ok(Axis::Y),
                'z' => Ok(Axis::Z),
                other => Err(Error::Domain(format!("invalid basis letter '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }
}

/// Identity positions are read out in the σz basis.
pub fn setting_of(p: &PauliMonomial) -> PauliSetting {
    let axes = p
        .labels
        .iter()
        .map(|&l| match l {
            1 => Axis::X,
            2 => Axis::Y,
            _ => Axis::Z,
        })
        .collect();
    PauliSetting { axes }
}

/// Outcome distribution of measuring `state` in the product basis `setting`.
///
/// Outcome bit 0 corresponds to the +1 eigenvector of the measured Pauli.
pub fn born_probabilities(state: &PureState, setting: &PauliSetting) -> Result<Vec<f64>> {
    let n = state.num_qubits();
    if setting.num_qubits() != n {
        return domain(format!(
            "{}-qubit setting applied to a {n}-qubit state",
            setting.num_qubits()
        ));
    }
    let mut amps = state.amplitudes().to_vec();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (q, axis) in setting.axes.iter().enumerate() {
        // x: H;  y: H·S†;  z: nothing.
        let conj_phase = match axis {
            Axis::Z => continue,
            Axis::X => Complex64::new(1.0, 0.0),
            Axis::Y => Complex64::new(0.0, -1.0),
        };
        let bit = 1usize << qubit_bit(n, q);
        for i in 0..amps.len() {
            if i & bit == 0 {
                let a0 = amps[i];
                let a1 = amps[i | bit] * conj_phase;
                amps[i] = (a0 + a1) * h;
                amps[i | bit] = (a0 - a1) * h;
            }
        }
    }
    Ok(amps.iter().map(|a| a.norm_sqr()).collect())
}

/// Outcome counts of one measurement setting.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub setting: PauliSetting,
    pub shots: u64,
    /// Outcome index (qubit 0 = most significant bit) → count. Zero counts are omitted.
    pub counts: BTreeMap<usize, u64>,
}

impl MeasurementRecord {
    pub fn new(setting: PauliSetting, shots: u64, counts: BTreeMap<usize, u64>) -> Result<Self> {
        let n = setting.num_qubits();
        if shots == 0 {
            return domain("a record needs at least one shot");
        }
        if let Some(k) = counts.keys().find(|&&k| k >> n != 0) {
            return domain(format!("outcome {k} does not fit in {n} bits"));
        }
        let total: u64 = counts.values().sum();
        if total != shots {
            return domain(format!("counts sum to {total}, expected {shots}"));
        }
        Ok(Self { setting, shots, counts })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; 1 << self.setting.num_qubits()];
        for (&k, &c) in &self.counts {
            f[k] = c as f64 / self.shots as f64;
        }
        f
    }
}

/// Formats an outcome index as a bit string, qubit 0 first.
pub fn outcome_string(n: usize, outcome: usize) -> String {
    (0..n)
        .map(|q| if outcome >> qubit_bit(n, q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_outcome(s: &str) -> Result<usize> {
    s.chars().try_fold(0usize, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        other => domain(format!("invalid outcome character '{other}'")),
    })
}

/// Multinomial draw of `shots` outcomes from `probs`.
///
/// Each shot is an independent categorical draw: one uniform `f64` from `rng`
/// located by binary search in the cumulative distribution.
pub fn sample_record<R: Rng + ?Sized>(
    setting: &PauliSetting,
    probs: &[f64],
    shots: u64,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    if probs.len() != 1usize << setting.num_qubits() {
        return domain("distribution length does not match the setting");
    }
    if shots == 0 {
        return domain("shots must be at least 1");
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return domain("probabilities must be finite and nonnegative");
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return domain(format!("probabilities sum to {total}, expected 1"));
    }
    let cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let last = cdf.iter().rposition(|_| true).unwrap_or(0);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(last);
        *counts.entry(k).or_insert(0) += 1;
    }
    MeasurementRecord::new(setting.clone(), shots, counts)
}

fn check_compatible(setting: &PauliSetting, p: &PauliMonomial) -> Result<()> {
    if setting.num_qubits() != p.num_qubits() {
        return domain("setting and monomial act on different registers");
    }
    let expected = setting_of(p);
    for (q, (&l, (a, b))) in p.labels.iter().zip(setting.axes.iter().zip(&expected.axes)).enumerate() {
        if l != 0 && a != b {
            return domain(format!(
                "qubit {q}: monomial {p} needs basis {} but the record used {}",
                b.letter(),
                a.letter()
            ));
        }
    }
    Ok(())
}

/// Σ_ℓ (−1)^{parity(f(ℓ))} · prob(ℓ), where f zeroes the identity positions of `p`.
pub fn expectation_from_distribution(
    setting: &PauliSetting,
    probs: &[f64],
    p: &PauliMonomial,
) -> Result<f64> {
    check_compatible(setting, p)?;
    if probs.len() != 1usize << p.num_qubits() {
        return domain("distribution length does not match the monomial");
    }
    let mask = p.support_mask();
    Ok(probs
        .iter()
        .enumerate()
        .map(|(l, &pr)| if (l & mask).count_ones() % 2 == 0 { pr } else { -pr })
        .sum())
}

/// Pauli expectation value estimated from a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSample {
    pub monomial: PauliMonomial,
    pub value: f64,
}

pub fn expectation_from_record(
    record: &MeasurementRecord,
    p: &PauliMonomial,
) -> Result<ExpectationSample> {
    Ok(ExpectationSample {
        monomial: p.clone(),
        value: signed_count(record, p)? as f64 / record.shots as f64,
    })
}

/// Σ_ℓ ±count(ℓ) with the parity sign of `p` on outcome ℓ.
fn signed_count(record: &MeasurementRecord, p: &PauliMonomial) -> Result<i64> {
    check_compatible(&record.setting, p)?;
    let mask = p.support_mask();
    Ok(record
        .counts
        .iter()
        .map(|(&l, &c)| if (l & mask).count_ones() % 2 == 0 { c as i64 } else { -(c as i64) })
        .sum())
}

/// All 3^n settings, qubit 0 varying slowest in the order x, y, z.
pub fn all_settings(n: usize) -> Result<Vec<PauliSetting>> {
    if n == 0 || n > MAX_QUBITS {
        return domain(format!("n must lie in [1, {MAX_QUBITS}], got {n}"));
    }
    let axes = [Axis::X, Axis::Y, Axis::Z];
    (0..3usize.pow(n as u32))
        .map(|mut k| {
            let mut v = vec![Axis::X; n];
            for q in (0..n).rev() {
                v[q] = axes[k % 3];
                k /= 3;
            }
            PauliSetting::new(v)
        })
        .collect()
}

/// Expectation of every monomial pooled over all compatible records,
/// i.e. every record whose basis agrees with the monomial on its support.
pub fn pooled_expectations(
    records: &[MeasurementRecord],
    monomials: &[PauliMonomial],
) -> Result<Vec<ExpectationSample>> {
    monomials
        .iter()
        .map(|p| {
            let (mut signed, mut shots) = (0i64, 0u64);
            for r in records.iter().filter(|r| check_compatible(&r.setting, p).is_ok()) {
                signed += signed_count(r, p)?;
                shots += r.shots;
            }
            if shots == 0 {
                return domain(format!("no record is compatible with monomial {p}"));
            }
            Ok(ExpectationSample { monomial: p.clone(), value: signed as f64 / shots as f64 })
        })
        .collect()
}

/// Distinct settings in order of first appearance, plus each monomial's setting index.
pub fn group_by_setting(monomials: &[PauliMonomial]) -> (Vec<PauliSetting>, Vec<usize>) {
    let mut settings = Vec::new();
    let mut seen = std::collections::HashMap::new();
    let assignment = monomials
        .iter()
        .map(|p| {
            let s = setting_of(p);
            *seen.entry(s.clone()).or_insert_with(|| {
                settings.push(s);
                settings.len() - 1
            })
        })
        .collect();
    (settings, assignment)
}

/// Simulates one record per setting; setting `k` draws its shots from
/// shot stream `k` of `seed`.
pub fn simulate_records(
    state: &PureState,
    settings: &[PauliSetting],
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    settings
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let probs = born_probabilities(state, s)?;
            let mut rng = substream(seed, Stream::Shots, k as u64);
            sample_record(s, &probs, shots, &mut rng)
        })
        .collect()
}

/// Expectation of every monomial from the record of its setting.
pub fn expectations_from_records(
    records: &[MeasurementRecord],
    monomials: &[PauliMonomial],
) -> Result<Vec<ExpectationSample>> {
    let by_setting: std::collections::HashMap<&PauliSetting, &MeasurementRecord> =
        records.iter().map(|r| (&r.setting, r)).collect();
    monomials
        .iter()
        .map(|p| {
            let s = setting_of(p);
            let record = by_setting
                .get(&s)
                .ok_or_else(|| Error::Domain(format!("no record for setting {s} (monomial {p})")))?;
            expectation_from_record(record, p)
        })
        .collect()
}

impl Serialize for PauliMonomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliMonomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
