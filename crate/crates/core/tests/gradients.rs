mod common;

use eadmm::losses::*;
use nalgebra::DMatrix;
use rand::Rng;

const CASES: usize = 100;
const TOL: f64 = 1e-5;

#[test]
fn least_squares_gradient_matches_finite_differences() {
    let mut r = common::rng(1);
    for _ in 0..CASES {
        let d = r.random_range(1..=10);
        let theta = common::uniform_vec(&mut r, d, 2.0);
        let x = common::uniform_vec(&mut r, d, 1.0);
        let y: f64 = r.random_range(-2.0..2.0);
        let f = |t: &[f64]| 0.5 * (t.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - y).powi(2);
        let g = least_squares_grad(&theta, &x, y).unwrap();
        let fd = common::fd_grad(f, &theta, 1e-5);
        assert!(common::rel_diff(&g, &fd) < TOL, "{g:?} vs {fd:?}");
    }
}

#[test]
fn matrix_square_gradient_matches_finite_differences() {
    let mut r = common::rng(2);
    for _ in 0..CASES {
        let (n, m) = (r.random_range(1..=3), r.random_range(1..=3));
        let mm = common::uniform_mat(&mut r, n, m, 2.0);
        let x = common::uniform_mat(&mut r, n, m, 2.0);
        let f = |v: &[f64]| 0.5 * (DMatrix::from_column_slice(n, m, v) - &x).norm_squared();
        let g = matrix_square_grad(&mm, &x).unwrap();
        let fd = common::fd_grad(f, mm.as_slice(), 1e-5);
        assert!(common::rel_diff(g.as_slice(), &fd) < TOL);
    }
}

/// The log-det loss is differentiated along symmetric directions, since Θ
/// lives in the symmetric cone: perturbing (i, j) and (j, i) together gives
/// twice the off-diagonal gradient entry.
#[test]
fn logdet_gradient_matches_finite_differences() {
    let mut r = common::rng(3);
    for _ in 0..CASES {
        let p = r.random_range(1..=3);
        let theta = common::random_spd(&mut r, p);
        let x = common::uniform_vec(&mut r, p, 1.5);
        let loss = |t: &DMatrix<f64>| {
            let xv = nalgebra::DVector::from_column_slice(&x);
            (xv.transpose() * t * &xv)[(0, 0)] - common::logdet(t)
        };
        let g = logdet_grad(&theta, &x).unwrap();
        let h = 1e-5;
        let mut fd = Vec::new();
        let mut an = Vec::new();
        for j in 0..p {
            for i in 0..=j {
                let mut e = DMatrix::zeros(p, p);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                fd.push((loss(&(&theta + &e * h)) - loss(&(&theta - &e * h))) / (2.0 * h));
                an.push(if i == j { g[(i, i)] } else { 2.0 * g[(i, j)] });
            }
        }
        assert!(common::rel_diff(&an, &fd) < TOL, "{an:?} vs {fd:?}");
        assert!((&g - g.transpose()).amax() <= 1e-12);
    }
}

#[test]
fn direct_observation_gradient_is_the_sample() {
    // With M ← X substituted, the linearized objective ⟨X, M⟩ has gradient X.
    let mut r = common::rng(4);
    for _ in 0..CASES {
        let n = r.random_range(1..=3);
        let mm = common::uniform_mat(&mut r, n, n, 2.0);
        let x = common::uniform_mat(&mut r, n, n, 2.0);
        let f = |v: &[f64]| x.as_slice().iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let g = direct_observation_grad(&mm, &x).unwrap();
        let fd = common::fd_grad(f, mm.as_slice(), 1e-5);
        assert!(common::rel_diff(g.as_slice(), &fd) < TOL);
    }
}

#[test]
fn logdet_rejects_indefinite_input() {
    let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(
        logdet_grad(&t, &[0.0, 1.0]),
        Err(eadmm::Error::NotPositiveDefinite(_))
    ));
}

#[test]
fn least_squares_gradient_error_stays_below_configured_bound() {
    // e_k = ∇f(θ; x, y) − E∇f(θ) is bounded by B(B·R + |n|) per coordinate when
    // ‖θ − θ*‖₁ ≤ R; the configured G and σ take |n| at three standard deviations.
    let (d, s, b, eta2, radius) = (50, 3, 1.0, 0.5, 2.0);
    let (inst, mut stream) = eadmm::datagen::gen_sparse_regression(d, s, b, eta2, 4).unwrap();
    let k = ProblemConstants::least_squares(b, radius, eta2, s);
    let mut r = common::rng(9);
    let mut within = 0usize;
    let n = 5000;
    for _ in 0..n {
        let mut theta = inst.theta_star.clone();
        let delta = common::uniform_vec(&mut r, d, 1.0);
        let scale = radius / delta.iter().map(|v| v.abs()).sum::<f64>();
        for (t, dv) in theta.iter_mut().zip(&delta) {
            *t += dv * scale;
        }
        let (x, y) = stream.next_sample().unwrap();
        let g = least_squares_grad(&theta, &x, y).unwrap();
        // E∇f(θ) = (B²/3)(θ − θ*).
        let worst = (0..d)
            .map(|j| (g[j] - b * b / 3.0 * (theta[j] - inst.theta_star[j])).abs())
            .fold(0.0f64, f64::max);
        let noise = y - x
            .iter()
            .zip(&inst.theta_star)
            .map(|(a, c)| a * c)
            .sum::<f64>();
        assert!(worst <= b * (b * radius + noise.abs()) + b * b / 3.0 * radius + 1e-12);
        if worst <= k.lipschitz_g + b * b / 3.0 * radius {
            within += 1;
        }
    }
    assert!(within as f64 >= 0.99 * n as f64, "{within}/{n}");
}
