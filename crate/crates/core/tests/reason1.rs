mod common;

use eadmm::datagen::gen_sparse_regression;
use eadmm::harness::{execute, ExperimentConfig, ProblemKind};
use eadmm::losses::{LeastSquaresOracle, ProblemConstants};
use eadmm::reason1::{
    plan_epochs, reason1_solve, theory_schedule, LambdaSchedule, Reason1Config, RhoRule,
};

/// Batch lasso `min ½θᵀAθ − cᵀθ + λ‖θ‖₁` by proximal gradient until the step
/// falls below `tol`.
fn batch_lasso(a: &[Vec<f64>], c: &[f64], lambda: f64, tol: f64) -> Vec<f64> {
    let d = c.len();
    // Gershgorin bound on the largest eigenvalue.
    let lip = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lip;
    let mut theta = vec![0.0; d];
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..d)
            .map(|i| {
                let g = (0..d).map(|j| a[i][j] * theta[j]).sum::<f64>() - c[i];
                let v = theta[i] - step * g;
                v.signum() * (v.abs() - step * lambda).max(0.0)
            })
            .collect();
        let moved = next
            .iter()
            .zip(&theta)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        theta = next;
        if moved < tol {
            break;
        }
    }
    theta
}

/// Empirical second moments `(Σ xxᵀ/n, Σ xy/n)` of the first `n` samples.
fn moments(stream: &eadmm::datagen::SparseStream, d: usize, n: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = vec![vec![0.0; d]; d];
    let mut c = vec![0.0; d];
    for t in 0..n {
        let (x, y) = stream.sample(t);
        for i in 0..d {
            c[i] += x[i] * y / n as f64;
            for j in 0..d {
                a[i][j] += x[i] * x[j] / n as f64;
            }
        }
    }
    (a, c)
}

#[test]
fn epoch_average_matches_batch_lasso() {
    // A seed whose instance is θ* = (1, 0).
    let (inst, stream) = (0..100)
        .map(|s| gen_sparse_regression(2, 1, 1.0, 0.0, s).unwrap())
        .find(|(i, _)| i.theta_star == vec![1.0, 0.0])
        .expect("some seed puts +1 on the first coordinate");
    let t0 = 50_000;
    let lambda = 0.01;
    let cfg = Reason1Config {
        epoch_length: t0,
        num_epochs: 1,
        initial_radius: 10.0,
        lambda: LambdaSchedule::Fixed { lambda },
        rho: RhoRule::Fixed { rho: 2.0 },
        ..Reason1Config::default()
    };
    let mut oracle = LeastSquaresOracle::new(stream.clone(), inst.d);
    let out = reason1_solve(&mut oracle, vec![0.0; 2], &cfg, &mut |_| {}).unwrap();
    let (a, c) = moments(&stream, 2, t0 as u64);
    let want = batch_lasso(&a, &c, lambda, 1e-10);
    for j in 0..2 {
        assert!(
            (out.theta_hat[j] - want[j]).abs() < 1e-3,
            "coordinate {j}: got {:?}, batch lasso {want:?}",
            out.theta_hat
        );
    }
}

#[test]
fn noiseless_support_recovery_matches_batch_oracle() {
    for seed in 1..=3 {
        let cfg = ExperimentConfig {
            problem: ProblemKind::Sparse,
            seed,
            dim: 20,
            sparsity: 1,
            noise_var: 0.0,
            epoch_len: 2000,
            epochs: 5,
            lambda: 0.01,
            ..ExperimentConfig::default()
        };
        let out = execute(&cfg).unwrap();
        let got = out.estimate.as_vector().unwrap();
        let truth = out.truth.as_vector().unwrap();
        // Batch lasso on the first epoch's samples at the final λ.
        let (_, stream) =
            gen_sparse_regression(20, 1, cfg.bound, 0.0, eadmm::harness::generator_seed(seed))
                .unwrap();
        let (a, c) = moments(&stream, 20, 2000);
        let final_lambda = 0.01 * std::f64::consts::FRAC_1_SQRT_2.powi(4);
        let batch = batch_lasso(&a, &c, final_lambda, 1e-12);
        let support = |v: &[f64], thr: f64| -> Vec<usize> {
            (0..v.len()).filter(|&j| v[j].abs() > thr).collect()
        };
        let true_support = support(truth, 0.0);
        assert_eq!(
            support(&batch, 0.0),
            true_support,
            "batch oracle support, seed {seed}"
        );
        assert_eq!(
            support(got, 0.1),
            true_support,
            "solver support, seed {seed}: {got:?}"
        );
    }
}

#[test]
fn applied_lambda_never_increases() {
    let mut r = common::rng(11);
    for _ in 0..50 {
        use rand::Rng;
        let k = ProblemConstants {
            gamma: r.random_range(0.1..2.0),
            sigma: r.random_range(0.0..3.0),
            lipschitz_g: r.random_range(0.1..10.0),
            beta_p: 1.0,
            alpha: 1.0,
            sparsity_s: r.random_range(1..10),
            rank_r: 1,
            w: r.random_range(0.5..2.0),
        };
        let cfg = Reason1Config {
            num_epochs: 20,
            epoch_length: 1000,
            initial_radius: r.random_range(0.5..10.0),
            lambda: LambdaSchedule::Theory { scale: 1.0 },
            constants: Some(k),
            ..Reason1Config::default()
        };
        let plan = plan_epochs(&cfg, 500).unwrap();
        assert_eq!(plan.len(), 20);
        for w in plan.windows(2) {
            assert!(w[1].lambda <= w[0].lambda);
            assert!(
                (w[1].radius * std::f64::consts::SQRT_2 - w[0].radius).abs() < 1e-12 * w[0].radius
            );
        }
    }
}

#[test]
fn theory_lambda_decreases_with_radius_when_noise_term_is_small() {
    let k = ProblemConstants {
        gamma: 1.0,
        sigma: 0.05,
        lipschitz_g: 1.0,
        beta_p: 1.0,
        alpha: 1.0,
        sparsity_s: 3,
        rank_r: 1,
        w: 1.0,
    };
    let mut r = 4.0;
    let mut prev = f64::INFINITY;
    for i in 1..=20 {
        let (lambda, rho, tau) = theory_schedule(&k, i, r, 2000, (200f64).ln(), 1.0).unwrap();
        assert!(lambda <= prev, "epoch {i}: {lambda} > {prev}");
        assert_eq!(rho, tau);
        prev = lambda;
        r /= std::f64::consts::SQRT_2;
    }
}

#[test]
fn debug_run_has_no_invariant_violations() {
    let (inst, stream) = gen_sparse_regression(50, 3, 1.0, 0.5, 9).unwrap();
    let cfg = Reason1Config {
        epoch_length: 500,
        num_epochs: 4,
        initial_radius: 12.0,
        lambda: LambdaSchedule::Geometric {
            lambda1: 0.05,
            decay: std::f64::consts::FRAC_1_SQRT_2,
        },
        rho: RhoRule::Fixed { rho: 50.0 / 3.0 },
        constants: Some(ProblemConstants::least_squares(1.0, 12.0, 0.5, 3)),
        debug_checks: true,
        ..Reason1Config::default()
    };
    let mut oracle = LeastSquaresOracle::new(stream, inst.d);
    let out = reason1_solve(&mut oracle, vec![0.0; 50], &cfg, &mut |_| {}).unwrap();
    assert!(out.report.checks > 4 * 500);
    assert_eq!(out.report.violations, 0, "{:?}", out.report.messages);
}

#[test]
fn telescoped_dual_matches_running_gap() {
    let (inst, stream) = gen_sparse_regression(10, 2, 1.0, 0.5, 4).unwrap();
    let cfg = Reason1Config {
        epoch_length: 300,
        num_epochs: 1,
        initial_radius: 8.0,
        lambda: LambdaSchedule::Fixed { lambda: 0.05 },
        rho: RhoRule::Fixed { rho: 4.0 },
        tau: Some(1.5),
        ..Reason1Config::default()
    };
    let plan = plan_epochs(&cfg, inst.d).unwrap();
    let mut state = eadmm::reason1::Reason1State::start(vec![0.0; 10], plan[0].radius, 1);
    let mut oracle = LeastSquaresOracle::new(stream, inst.d);
    let mut gap = vec![0.0; 10];
    for _ in 0..300 {
        use eadmm::losses::GradientOracle;
        let g = oracle.grad(&state.theta).unwrap();
        let theta = eadmm::reason1::theta_update(&state, &g, plan[0].rho, 0.0).unwrap();
        let y = eadmm::reason1::y_update(&theta, &state.z, plan[0].lambda, plan[0].rho).unwrap();
        state.z = eadmm::reason1::z_update(&state.z, &theta, &y, 1.5);
        for j in 0..10 {
            gap[j] += theta[j] - y[j];
        }
        state.theta = theta;
        state.y = y;
    }
    for j in 0..10 {
        assert!((state.z[j] + 1.5 * gap[j]).abs() < 1e-9 * (1.0 + gap[j].abs()));
    }
}

#[test]
fn same_seed_same_bits() {
    let run = || {
        let (inst, stream) = gen_sparse_regression(30, 2, 1.0, 0.5, 21).unwrap();
        let cfg = Reason1Config {
            epoch_length: 400,
            num_epochs: 3,
            initial_radius: 8.0,
            ..Reason1Config::default()
        };
        let mut oracle = LeastSquaresOracle::new(stream, inst.d);
        let mut iterates = Vec::new();
        let out = reason1_solve(&mut oracle, vec![0.0; 30], &cfg, &mut |v| {
            iterates.push(v.theta.to_vec())
        })
        .unwrap();
        (out.theta_hat, iterates)
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(ta, tb);
}

#[test]
fn baseline_is_worse_than_epochs_on_a_noiseless_instance() {
    let base = ExperimentConfig {
        problem: ProblemKind::Sparse,
        seed: 5,
        dim: 100,
        sparsity: 2,
        noise_var: 0.0,
        epoch_len: 2000,
        epochs: 5,
        lambda: 0.01,
        ..ExperimentConfig::default()
    };
    let epoch = execute(&base).unwrap();
    let st = execute(&ExperimentConfig {
        solver: Some(eadmm::harness::SolverKind::StAdmm),
        ..base
    })
    .unwrap();
    assert!(
        epoch.final_sq_err < st.final_sq_err,
        "{} vs {}",
        epoch.final_sq_err,
        st.final_sq_err
    );
}
