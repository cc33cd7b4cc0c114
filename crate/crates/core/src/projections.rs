//! Shrinkage and the three ball projections used by both solvers.

use nalgebra::DMatrix;

use crate::error::{arg, Result};
use crate::linalg;

/// Relative tolerance for feasibility checks after a projection.
pub const PROJ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct L1BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuclearBallSpec {
    pub center: DMatrix<f64>,
    pub radius: f64,
}

#[inline]
pub fn shrink_scalar(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Entrywise soft thresholding `sign(v)·max(|v| − κ, 0)`.
pub fn shrink(v: &[f64], kappa: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    Ok(v.iter().map(|&x| shrink_scalar(x, kappa)).collect())
}

pub fn shrink_mat(v: &DMatrix<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    check_kappa(kappa)?;
    Ok(v.map(|x| shrink_scalar(x, kappa)))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return arg(format!(
            "shrinkage threshold must be finite and >= 0, got {kappa}"
        ));
    }
    Ok(())
}

pub fn project_l1_ball(v: &[f64], ball: &L1BallSpec) -> Result<Vec<f64>> {
    project_l1(v, &ball.center, ball.radius)
}

/// Euclidean projection of `v` onto `{w : ‖w − center‖₁ ≤ radius}`.
///
/// Points already inside the ball come back unchanged. Otherwise the shifted
/// magnitudes are sorted (stable, so ties keep index order) and soft-thresholded
/// at the level that puts the result on the sphere.
pub fn project_l1(v: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>> {
    if v.len() != center.len() {
        return arg(format!(
            "length mismatch: v has {}, center has {}",
            v.len(),
            center.len()
        ));
    }
    if !(radius >= 0.0) {
        return arg(format!("l1 radius must be >= 0, got {radius}"));
    }
    if !v.iter().chain(center).all(|x| x.is_finite()) {
        return arg("non-finite input to l1 projection");
    }
    if linalg::l1_dist(v, center) <= radius {
        return Ok(v.to_vec());
    }
    let u: Vec<f64> = v.iter().zip(center).map(|(a, c)| a - c).collect();
    let zeta = match l1_threshold(&u, radius) {
        Some(z) => z,
        None => return Ok(center.to_vec()),
    };
    Ok(u.iter()
        .zip(center)
        .map(|(&ui, &c)| c + shrink_scalar(ui, zeta))
        .collect())
}

/// Threshold ζ with `‖shrink(u, ζ)‖₁ = radius`, or `None` if no sorted prefix
/// qualifies (only possible at radius 0).
fn l1_threshold(u: &[f64], radius: f64) -> Option<f64> {
    let mut mu: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut best = None;
    for (j, &m) in mu.iter().enumerate() {
        cum += m;
        let z = (cum - radius) / (j + 1) as f64;
        if m - z > 0.0 {
            best = Some(z);
        }
    }
    best.map(|z| z.max(0.0))
}

/// Entrywise clamp to `[−bound, bound]`.
pub fn project_linf_box(v: &DMatrix<f64>, bound: f64) -> Result<DMatrix<f64>> {
    if !(bound >= 0.0) {
        return arg(format!("box bound must be >= 0, got {bound}"));
    }
    Ok(v.map(|x| x.clamp(-bound, bound)))
}

/// Projection onto `{L : ‖L − center‖_* ≤ radius}` via a dense SVD of the
/// shifted matrix and an ℓ1 projection of its singular values.
pub fn project_nuclear_ball(l: &DMatrix<f64>, ball: &NuclearBallSpec) -> Result<DMatrix<f64>> {
    if l.shape() != ball.center.shape() {
        return arg(format!(
            "shape mismatch: {:?} vs center {:?}",
            l.shape(),
            ball.center.shape()
        ));
    }
    if !(ball.radius >= 0.0) {
        return arg(format!("nuclear radius must be >= 0, got {}", ball.radius));
    }
    let d = l - &ball.center;
    let dec = linalg::svd(&d, "nuclear projection")?;
    project_nuclear_from_svd(l, &ball.center, ball.radius, &dec)
}

/// Same as [`project_nuclear_ball`] when the SVD of `l − center` is already known.
pub(crate) fn project_nuclear_from_svd(
    l: &DMatrix<f64>,
    center: &DMatrix<f64>,
    radius: f64,
    dec: &linalg::Svd,
) -> Result<DMatrix<f64>> {
    if dec.s.iter().sum::<f64>() <= radius {
        return Ok(l.clone());
    }
    let zero = vec![0.0; dec.s.len()];
    let s_new = project_l1(&dec.s, &zero, radius)?;
    Ok(center + linalg::rebuild(&dec.u, &s_new, &dec.v_t))
}
