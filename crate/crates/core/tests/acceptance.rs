//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use mifgd::baselines::{
    linear_inversion_baseline, mitigation_objective, project_to_density, readout_mitigate, simplex_project,
    CalibrationMatrix,
};
use mifgd::mifgd::{
    self as opt, frobenius_error, procrustes_distance, Init, Momentum, MomentumParams, OptimizerConfig, StepSize,
    Target,
};
use mifgd::parallel::{parallel_gradient, parallel_run};
use mifgd::pauli::{
    born_probabilities, exact_expectation, expectation_from_distribution, expectation_from_record, sample_monomials,
    setting_of, MeasurementRecord, PauliMonomial,
};
use mifgd::sensing::{observe, CMatrix, ObservationMode, SensingMap, SensingOperator};
use mifgd::states::{density_of, ghz, hadamard_all, random_state, Circuit, PureState, RandomCircuitSpec};
use mifgd::synthetic::{run_synthetic_comparison, Ensemble, SyntheticProblem, SyntheticSettings};
use mifgd::tomography::{reconstruct, Experiment};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(id: u32, name: &str, ok: bool, detail: String, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {verdict}: {name}: {detail} [{:.2}s of {}s]", elapsed.as_secs_f64(), budget.as_secs());
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its {}s budget", budget.as_secs());
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Kronecker product of single-qubit Paulis, qubit 0 leftmost.
fn dense_pauli(p: &PauliMonomial) -> CMatrix {
    let single = |l: u8| -> CMatrix {
        let (a, b, cc, d) = match l {
            0 => (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
            1 => (c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
            2 => (c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
            _ => (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        };
        DMatrix::from_row_slice(2, 2, &[a, b, cc, d])
    };
    p.labels().iter().fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, &l| acc.kronecker(&single(l)))
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Record whose counts reproduce `probs` to within one part in 2^52.
fn near_exact_record(state: &PureState, p: &PauliMonomial) -> MeasurementRecord {
    let setting = setting_of(p);
    let probs = born_probabilities(state, &setting).unwrap();
    let shots = 1u64 << 52;
    let mut counts: BTreeMap<usize, u64> =
        probs.iter().enumerate().map(|(k, q)| (k, (q * shots as f64).floor() as u64)).collect();
    let top = (0..probs.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
    let total: u64 = counts.values().sum();
    let entry = counts.get_mut(&top).unwrap();
    *entry = (*entry + shots).checked_sub(total).unwrap();
    counts.retain(|_, v| *v > 0);
    MeasurementRecord::new(setting, shots, counts).unwrap()
}

#[test]
fn criterion_01_measurement_pipeline_oracles() {
    let start = Instant::now();
    let states = [
        ("ghz(3)", ghz(3).unwrap()),
        ("hadamard(3)", hadamard_all(3).unwrap()),
        ("random(3,10,7)", random_state(RandomCircuitSpec { n: 3, depth: 10, seed: 7 }).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (_, s) in &states {
        let rho = density_of(s);
        for p in PauliMonomial::all(3).unwrap() {
            let dense = (dense_pauli(&p) * &rho).trace();
            let exact = exact_expectation(s, &p).unwrap();
            let setting = setting_of(&p);
            let from_dist = expectation_from_distribution(&setting, &born_probabilities(s, &setting).unwrap(), &p).unwrap();
            let from_record = expectation_from_record(&near_exact_record(s, &p), &p).unwrap().value;
            for v in [exact, from_dist, from_record] {
                worst = worst.max((v - dense.re).abs());
            }
            worst = worst.max(dense.im.abs());
        }
    }
    report(1, "measurement pipeline vs dense Tr(Pρ)", worst <= 1e-10, format!("max deviation {worst:.2e} over 3 states × 64 monomials"), start, Duration::from_secs(5));
}

#[test]
fn criterion_02_noiseless_exact_recovery() {
    let start = Instant::now();
    let g = ghz(4).unwrap();
    let map = SensingMap::new(4, PauliMonomial::all(4).unwrap(), true).unwrap();
    let y = observe(&g, &map, ObservationMode::Exact).unwrap();
    let config = OptimizerConfig {
        eta: StepSize::Auto,
        mu: Momentum::Theoretical(MomentumParams::pure_state(1.0)),
        init: Init::Spectral,
        l_hat: 1.1,
        maxiters: 1000,
        reltol: 1e-8,
        ..OptimizerConfig::default()
    };
    let (u, trace) = opt::run(&map, &y, &config, Some(&Target::State(g.clone()))).unwrap();
    let fidelity = opt::fidelity_rank1(&u, &g).unwrap();
    let error = frobenius_error(&u, &g.as_factor()).unwrap();

    let pts: Vec<(f64, f64)> = trace.records.iter().map(|r| (r.iter as f64, r.error.unwrap().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);

    let ok = fidelity >= 0.9999 && error <= 1e-4 && trace.iterations() <= 1000 && r2 >= 0.95;
    let detail = format!(
        "fidelity {fidelity:.8}, error {error:.2e}, {} iterations, μ {:.3e}, log-error fit R² {r2:.4}",
        trace.iterations(),
        trace.mu
    );
    report(2, "noiseless GHZ(4) recovery", ok, detail, start, Duration::from_secs(30));
}

fn table_config(seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        eta: StepSize::Fixed(1e-3),
        mu: Momentum::Fixed(0.75),
        reltol: 1e-5,
        maxiters: 1000,
        init: Init::Random,
        seed,
        ..OptimizerConfig::default()
    }
}

#[test]
fn criterion_03_fidelity_table() {
    let start = Instant::now();
    let cases = [(Circuit::Ghz, 3, 0.985), (Circuit::Hadamard, 4, 0.985), (Circuit::Ghz, 6, 0.97)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (circuit, n, threshold) in cases {
        let fids: Vec<f64> = (0..5)
            .map(|seed| {
                let exp = Experiment { circuit, n, depth: 0, measpc: 50.0, shots: Some(2048), seed };
                let data = exp.measure().unwrap();
                let state = exp.state().unwrap();
                reconstruct(n, &data.expectations, &table_config(seed), 1, Some(&state)).unwrap().final_fidelity.unwrap()
            })
            .collect();
        let med = median(fids);
        ok &= med >= threshold;
        parts.push(format!("{circuit:?}({n}) median {med:.4} (≥ {threshold})"));
    }
    report(3, "fidelity at measpc 50%, 2048 shots", ok, parts.join(", "), start, Duration::from_secs(180));
}

#[test]
fn criterion_04_momentum_acceleration() {
    let start = Instant::now();
    let iterations = |mu: f64| -> Vec<f64> {
        (0..5)
            .map(|seed| {
                let exp = Experiment { circuit: Circuit::Ghz, n: 6, depth: 0, measpc: 20.0, shots: None, seed };
                let data = exp.measure().unwrap();
                let config = OptimizerConfig {
                    eta: StepSize::Fixed(1e-3),
                    mu: Momentum::Fixed(mu),
                    init: Init::Random,
                    seed,
                    ..OptimizerConfig::default()
                };
                reconstruct(6, &data.expectations, &config, 1, None).unwrap().trace.iterations() as f64
            })
            .collect()
    };
    let (fgd, mifgd) = (iterations(0.0), iterations(0.75));
    let (mf, mm) = (median(fgd.clone()), median(mifgd.clone()));
    report(
        4,
        "momentum acceleration on GHZ(6), measpc 20%",
        mm < mf,
        format!("median iterations μ=0.75: {mm} {mifgd:?}, μ=0: {mf} {fgd:?}"),
        start,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_05_full_tomography_baseline() {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3, 4] {
        let g = ghz(n).unwrap();
        let f = linear_inversion_baseline(&g, 2048, 0).unwrap().fidelity(&g).unwrap();
        ok &= f >= 0.99;
        parts.push(format!("GHZ({n}) fidelity {f:.4}"));
    }
    report(5, "linear inversion + projection, 2048 shots, threshold 0.99", ok, parts.join(", "), start, Duration::from_secs(30));
}

#[test]
fn criterion_06_adjointness_and_matrix_free() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let n = rng.gen_range(1..=3);
        let r = rng.gen_range(1..=2);
        let d = 1usize << n;
        let m = rng.gen_range(1..=d * d);
        let map = SensingMap::new(n, sample_monomials(n, m, k).unwrap(), rng.gen()).unwrap();
        let s = map.scale();
        let u = gaussian(&mut rng, d, r);
        let x: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();

        let forward = map.forward_factored(&u).unwrap();
        let adjoint = map.adjoint_times(&x, &u).unwrap();
        let lhs: f64 = forward.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rhs = (u.adjoint() * &adjoint).trace();
        let scale = 1.0 + lhs.abs();
        worst = worst.max((lhs - rhs.re).abs() / scale).max(rhs.im.abs() / scale);

        let gram = &u * u.adjoint();
        let mut dense_adj = CMatrix::zeros(d, d);
        for (i, p) in map.monomials().iter().enumerate() {
            let dp = dense_pauli(p);
            let f = s * (&dp * &gram).trace().re;
            worst = worst.max((f - forward[i]).abs() / (1.0 + f.abs()));
            dense_adj += dp * c(s * x[i], 0.0);
        }
        let dense = dense_adj * &u;
        let largest = |m: &CMatrix| m.iter().map(|e| e.norm()).fold(0.0, f64::max);
        worst = worst.max(largest(&(dense - &adjoint)) / (1.0 + largest(&adjoint)));
    }
    report(6, "adjoint identity and dense-oracle equality", worst <= 1e-8, format!("max relative deviation {worst:.2e} over 100 instances"), start, Duration::from_secs(10));
}

#[test]
fn criterion_07_parallel_determinism() {
    let start = Instant::now();
    let exp = Experiment { circuit: Circuit::Hadamard, n: 6, depth: 0, measpc: 100.0, shots: Some(2048), seed: 7 };
    let state = exp.state().unwrap();
    let data = exp.measure().unwrap();
    let map = SensingMap::new(6, data.expectations.iter().map(|e| e.monomial.clone()).collect(), true).unwrap();
    let y: Vec<f64> = data.expectations.iter().map(|e| map.scale() * e.value).collect();
    let z = opt::random_init(64, 1, 3);
    let serial_grad = map.residual_gradient(&y, &z).unwrap();
    let config = OptimizerConfig { seed: 7, ..OptimizerConfig::default() };
    let target = Target::State(state.clone());
    let (u_serial, _) = opt::run(&map, &y, &config, Some(&target)).unwrap();
    let f_serial = opt::fidelity_rank1(&u_serial, &state).unwrap();

    let (mut grad_dev, mut fid_dev): (f64, f64) = (0.0, 0.0);
    for p in [1, 2, 4, 8] {
        let g = parallel_gradient(&map, &y, &z, p).unwrap();
        grad_dev = grad_dev.max((g - &serial_grad).iter().map(|e| e.norm()).fold(0.0, f64::max));
        let (u, _) = parallel_run(&map, &y, &config, p, Some(&target)).unwrap();
        fid_dev = fid_dev.max((opt::fidelity_rank1(&u, &state).unwrap() - f_serial).abs());
    }
    report(
        7,
        "parallel gradient and run match serial for p in {1,2,4,8}",
        grad_dev <= 1e-10 && fid_dev <= 1e-6,
        format!("max gradient entry deviation {grad_dev:.2e}, fidelity deviation {fid_dev:.2e} (serial fidelity {f_serial:.4})"),
        start,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_08_synthetic_benchmark() {
    let start = Instant::now();
    let base = SyntheticProblem { d: 256, r: 5, c: 5, noise_norm: 0.0, seed: 0, ensemble: Ensemble::Hadamard };
    let settings = SyntheticSettings { tol: 1e-3, maxiters: 4000, seed: 0 };
    let clean = run_synthetic_comparison(&base, &[0.0, 2.0 / 3.0], &settings).unwrap();
    let noisy = run_synthetic_comparison(&SyntheticProblem { noise_norm: 0.01, ..base }, &[0.0, 2.0 / 3.0], &settings).unwrap();
    let (fgd, mifgd) = (&clean[0], &clean[1]);
    let noisy_ok = noisy.iter().all(|r| (1e-3..=1e-1).contains(&r.final_error));
    let ok = fgd.converged && mifgd.converged && mifgd.iterations < fgd.iterations && noisy_ok;
    let detail = format!(
        "noiseless FGD {} it (converged {}), MiFGD μ=2/3 {} it (converged {}); noisy final errors {:.2e}, {:.2e}",
        fgd.iterations,
        fgd.converged,
        mifgd.iterations,
        mifgd.converged,
        noisy[0].final_error,
        noisy[1].final_error
    );
    report(8, "synthetic d=256, r=5, c=5", ok, detail, start, Duration::from_secs(300));
}

/// Minimum of ‖C v − v_meas‖² over a uniform grid on the probability simplex.
fn grid_minimum(c: &DMatrix<f64>, v_meas: &[f64], steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            for k in 0..=steps - i - j {
                let l = steps - i - j - k;
                let v = [i as f64 * h, j as f64 * h, k as f64 * h, l as f64 * h];
                best = best.min(mitigation_objective(c, &v, v_meas));
            }
        }
    }
    best
}

#[test]
fn criterion_09_mitigation() {
    let start = Instant::now();
    let mut ok = true;

    let id = CalibrationMatrix::new(1, DMatrix::identity(2, 2)).unwrap();
    ok &= readout_mitigate(&id, &[0.3, 0.7]).unwrap().iter().zip([0.3, 0.7]).all(|(a, b)| (a - b).abs() < 1e-12);
    ok &= readout_mitigate(&id, &[1.3, -0.1]).unwrap() == simplex_project(&[1.3, -0.1]);
    let cal = CalibrationMatrix::new(1, DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8])).unwrap();
    let v = readout_mitigate(&cal, &[0.7, 0.3]).unwrap();
    let best_t = (0..=1_000_000)
        .map(|i| i as f64 / 1e6)
        .min_by(|a, b| {
            let fa = mitigation_objective(cal.entries(), &[*a, 1.0 - a], &[0.7, 0.3]);
            let fb = mitigation_objective(cal.entries(), &[*b, 1.0 - b], &[0.7, 0.3]);
            fa.total_cmp(&fb)
        })
        .unwrap();
    ok &= (v[0] - best_t).abs() < 1e-4 && (v[1] - (1.0 - best_t)).abs() < 1e-4;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..50 {
        let raw = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 + rng.gen::<f64>() * 4.0 } else { rng.gen::<f64>() });
        let sums: Vec<f64> = raw.column_iter().map(|col| col.sum()).collect();
        let entries = DMatrix::from_fn(4, 4, |i, j| raw[(i, j)] / sums[j]);
        let cal = CalibrationMatrix::new(2, entries).unwrap();
        let v_meas: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 0.6 - 0.05).collect();
        let v = readout_mitigate(&cal, &v_meas).unwrap();
        ok &= v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-8;
        let ours = mitigation_objective(cal.entries(), &v, &v_meas);
        let grid = grid_minimum(cal.entries(), &v_meas, 100);
        ok &= ours <= grid + 1e-12;
        worst_gap = worst_gap.max((grid - ours).abs());
    }
    ok &= worst_gap <= 1e-3;
    report(9, "readout mitigation vs line and grid search", ok, format!("3 examples and 50 random 4-d instances, worst grid gap {worst_gap:.2e}"), start, Duration::from_secs(30));
}

#[test]
fn criterion_10_property_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();

    for _ in 0..100 {
        let (d, r) = (rng.gen_range(2..=8), rng.gen_range(1..=3));
        let (u, v, w) = (gaussian(&mut rng, d, r), gaussian(&mut rng, d, r), gaussian(&mut rng, d, r));
        let dist = |a: &CMatrix, b: &CMatrix| procrustes_distance(a, b).unwrap();
        let (duv, dvw, duw) = (dist(&u, &v), dist(&v, &w), dist(&u, &w));
        let rot = gaussian(&mut rng, r, r).qr().q();
        let pseudometric = dist(&u, &u) < 1e-7
            && (duv - dist(&v, &u)).abs() < 1e-9 * (1.0 + duv)
            && duw <= duv + dvw + 1e-8
            && (dist(&(&u * rot), &v) - duv).abs() < 1e-9 * (1.0 + duv);
        if !pseudometric {
            failures.push("procrustes");
        }
    }

    for _ in 0..100 {
        let (d, r) = (rng.gen_range(2..=8), rng.gen_range(1..=3));
        let (u, v) = (gaussian(&mut rng, d, r), gaussian(&mut rng, d, r));
        let (a, b) = (gaussian(&mut rng, r, r).qr().q(), gaussian(&mut rng, r, r).qr().q());
        let e = frobenius_error(&u, &v).unwrap();
        if (frobenius_error(&(&u * a), &(&v * b)).unwrap() - e).abs() > 1e-10 * (1.0 + e) {
            failures.push("frobenius invariance");
        }
    }

    for _ in 0..100 {
        let len = rng.gen_range(1..=12);
        let v: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect();
        let w = simplex_project(&v);
        let theta = v.iter().zip(&w).find(|(_, &wi)| wi > 0.0).map(|(vi, wi)| vi - wi).unwrap();
        let kkt = w.iter().all(|&x| x >= 0.0)
            && (w.iter().sum::<f64>() - 1.0).abs() < 1e-10
            && v.iter().zip(&w).all(|(vi, wi)| if *wi > 0.0 { (vi - wi - theta).abs() < 1e-10 } else { *vi <= theta + 1e-10 });
        if !kkt {
            failures.push("simplex KKT");
        }
    }

    for _ in 0..100 {
        let d = rng.gen_range(1..=6);
        let a = gaussian(&mut rng, d, d);
        let h = (&a + a.adjoint()) * c(0.5, 0.0);
        let p = project_to_density(&h).unwrap();
        let pp = project_to_density(p.entries()).unwrap();
        if (p.entries() - pp.entries()).norm() > 1e-10 {
            failures.push("projection idempotence");
        }
    }

    report(
        10,
        "Procrustes, Frobenius invariance, simplex KKT, projection idempotence",
        failures.is_empty(),
        format!("4 × 100 instances, failures: {failures:?}"),
        start,
        Duration::from_secs(60),
    );
}
