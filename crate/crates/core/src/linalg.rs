//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn l1(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).sum()
}

pub fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn l2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn linf(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Thin SVD `m = U diag(s) Vᵀ` with `s` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

/// Dense thin SVD. Computed with faer: nalgebra 0.35's bidiagonal QR loses
/// accuracy on rank-deficient inputs, which are routine here.
pub fn svd(m: &DMatrix<f64>, context: &str) -> Result<Svd> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical(format!(
            "{context}: non-finite input to SVD"
        )));
    }
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(r, 0),
            s: Vec::new(),
            v_t: DMatrix::zeros(0, c),
        });
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("{context}: SVD did not converge ({e:?})")))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    Ok(Svd {
        u: DMatrix::from_fn(r, k, |i, j| fu[(i, j)]),
        s: (0..k).map(|i| fs[i]).collect(),
        v_t: DMatrix::from_fn(k, c, |i, j| fv[(j, i)]),
    })
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(svd(m, "nuclear norm")?.s.iter().sum())
}

/// `U diag(s) Vᵀ` from the factors of a thin SVD.
pub fn rebuild(u: &DMatrix<f64>, s: &[f64], v_t: &DMatrix<f64>) -> DMatrix<f64> {
    let mut us = u.clone();
    for (j, sj) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(*sj);
    }
    us * v_t
}
