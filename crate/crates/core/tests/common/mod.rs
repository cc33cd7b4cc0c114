//! Reference implementations shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn uniform_mat(r: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| r.random_range(-scale..scale))
}

/// ℓ1-ball projection by bisection on the KKT multiplier: the projection is
/// `c + shrink(v − c, θ)` with `θ` solving `Σ max(|v_i − c_i| − θ, 0) = R`.
pub fn l1_projection_bisection(v: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let u: Vec<f64> = v.iter().zip(c).map(|(a, b)| a - b).collect();
    let mass = |t: f64| u.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>();
    if mass(0.0) <= r {
        return v.to_vec();
    }
    let (mut lo, mut hi) = (0.0, u.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    u.iter()
        .zip(c)
        .map(|(x, ci)| ci + x.signum() * (x.abs() - t).max(0.0))
        .collect()
}

/// Central finite-difference gradient.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    num / den
}

/// Random symmetric positive-definite matrix with eigenvalues in `[1, 3]`.
pub fn random_spd(r: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = uniform_mat(r, p, p, 1.0);
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(p, |_, _| {
        r.random_range(1.0..3.0)
    }));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn logdet(m: &DMatrix<f64>) -> f64 {
    let c = nalgebra::Cholesky::new(m.clone()).expect("positive definite");
    2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

pub fn nuclear(m: &DMatrix<f64>) -> f64 {
    eadmm::linalg::nuclear_norm(m).unwrap()
}

pub fn fro_dist(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}
