//! Per-sample gradients and the oracles that feed them to the solvers.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::datagen::{dot, BayesNetStream, GgmStream, MatrixStream, SparseStream};
use crate::error::{arg, ensure_finite, Error, Result};

/// Analysis constants consumed by the theory schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub gamma: f64,
    pub sigma: f64,
    pub lipschitz_g: f64,
    pub beta_p: f64,
    pub alpha: f64,
    pub w: f64,
    pub sparsity_s: usize,
    pub rank_r: usize,
}

impl ProblemConstants {
    /// Conservative constants for least squares with `x ~ Unif[−B, B]^d`,
    /// iterates within ℓ1 distance `r1` of `θ*` and noise variance `eta2`.
    ///
    /// `γ = B²/3` is the smallest eigenvalue of `E[x xᵀ]`. The per-coordinate
    /// gradient error is at most `B(B·r1 + |n|)`; `|n|` is taken at three
    /// standard deviations.
    pub fn least_squares(b: f64, r1: f64, eta2: f64, s: usize) -> Self {
        let g = b * (b * r1 + 3.0 * eta2.sqrt());
        ProblemConstants {
            gamma: b * b / 3.0,
            sigma: g,
            lipschitz_g: g,
            beta_p: 1.0,
            alpha: 0.0,
            w: 1.0,
            sparsity_s: s,
            rank_r: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.gamma,
            self.sigma,
            self.lipschitz_g,
            self.beta_p,
            self.w,
        ];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return arg("gamma, sigma, G, beta_p and w must be positive and finite");
        }
        if !(self.alpha >= 0.0) || self.sparsity_s == 0 {
            return arg("alpha must be >= 0 and s >= 1");
        }
        Ok(())
    }
}

/// Gradient of `½(⟨θ, x⟩ − y)²`.
pub fn least_squares_grad(theta: &[f64], x: &[f64], y: f64) -> Result<Vec<f64>> {
    if theta.len() != x.len() {
        return arg(format!(
            "dimension mismatch: theta {} vs x {}",
            theta.len(),
            x.len()
        ));
    }
    let r = dot(theta, x) - y;
    Ok(x.iter().map(|xi| xi * r).collect())
}

/// Gradient of `½‖X − M‖_F²` with respect to `M`.
pub fn matrix_square_grad(m: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    same_shape(m, x)?;
    Ok(m - x)
}

/// Gradient of `Tr(x xᵀ Θ) − log det Θ`, i.e. `x xᵀ − Θ⁻¹`.
pub fn logdet_grad(theta: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    let p = theta.nrows();
    if theta.ncols() != p || x.len() != p {
        return arg(format!(
            "need square Theta matching x, got {:?} and {}",
            theta.shape(),
            x.len()
        ));
    }
    let inv = spd_inverse(theta)?;
    let mut g = -inv;
    for j in 0..p {
        for i in 0..p {
            g[(i, j)] += x[i] * x[j];
        }
    }
    // Θ⁻¹ from the Cholesky solve is symmetric only up to rounding.
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

pub fn spd_inverse(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = (theta - theta.transpose()).amax();
    if asym > 1e-10 * theta.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "matrix is not symmetric (gap {asym:e})"
        )));
    }
    Cholesky::new(theta.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))
}

/// Direct observation: the solver substitutes `M ← X`, so the oracle passes
/// the sample through.
pub fn direct_observation_grad(m: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    same_shape(m, x)?;
    Ok(x.clone())
}

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return arg(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Oracles

/// Streaming source of per-sample gradients at a query vector.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    /// Draws the next sample and returns the gradient at `theta`.
    fn grad(&mut self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// Streaming source of per-sample matrix gradients (or observations).
pub trait MatrixOracle {
    fn shape(&self) -> (usize, usize);
    /// True when [`MatrixOracle::grad`] returns the observation itself.
    fn is_direct(&self) -> bool {
        false
    }
    fn grad(&mut self, m: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

pub struct LeastSquaresOracle {
    pub stream: SparseStream,
    dim: usize,
}

impl LeastSquaresOracle {
    pub fn new(stream: SparseStream, dim: usize) -> Self {
        LeastSquaresOracle { stream, dim }
    }
}

impl GradientOracle for LeastSquaresOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn grad(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        let (x, y) = self.stream.next_sample()?;
        least_squares_grad(theta, &x, y)
    }
}

/// Log-determinant loss over a vectorized (column-major) `p × p` precision matrix.
pub struct LogDetOracle {
    pub stream: GgmStream,
    p: usize,
}

impl LogDetOracle {
    pub fn new(stream: GgmStream, p: usize) -> Self {
        LogDetOracle { stream, p }
    }
}

impl GradientOracle for LogDetOracle {
    fn dim(&self) -> usize {
        self.p * self.p
    }

    fn grad(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.p * self.p {
            return arg("theta length must be p^2");
        }
        let x = self.stream.next_sample()?;
        let t = DMatrix::from_column_slice(self.p, self.p, theta);
        let g = logdet_grad(&t, x.as_slice())?;
        Ok(g.as_slice().to_vec())
    }
}

/// Square loss against matrix observations from any matrix source.
pub struct SquareLossOracle<S> {
    source: S,
    shape: (usize, usize),
}

/// Direct-observation oracle: hands each sample to the solver unchanged.
pub struct DirectOracle<S> {
    source: S,
    shape: (usize, usize),
}

pub trait MatrixSource {
    fn next_matrix(&mut self) -> Result<DMatrix<f64>>;
}

impl MatrixSource for MatrixStream {
    fn next_matrix(&mut self) -> Result<DMatrix<f64>> {
        self.next_sample()
    }
}

impl MatrixSource for BayesNetStream {
    fn next_matrix(&mut self) -> Result<DMatrix<f64>> {
        self.next_outer()
    }
}

impl<S: MatrixSource> SquareLossOracle<S> {
    pub fn new(source: S, shape: (usize, usize)) -> Self {
        SquareLossOracle { source, shape }
    }
}

impl<S: MatrixSource> DirectOracle<S> {
    pub fn new(source: S, shape: (usize, usize)) -> Self {
        DirectOracle { source, shape }
    }
}

impl<S: MatrixSource> MatrixOracle for SquareLossOracle<S> {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn grad(&mut self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.source.next_matrix()?;
        let g = matrix_square_grad(m, &x)?;
        ensure_finite(g.as_slice(), "square-loss gradient")?;
        Ok(g)
    }
}

impl<S: MatrixSource> MatrixOracle for DirectOracle<S> {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn is_direct(&self) -> bool {
        true
    }

    fn grad(&mut self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.source.next_matrix()?;
        direct_observation_grad(m, &x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_examples() {
        assert_eq!(least_squares_grad(&[0.0], &[1.0], 2.0).unwrap(), vec![-2.0]);
        let th = [1.0, -2.0, 0.5];
        let x = [0.3, 0.1, -0.7];
        let y = dot(&th, &x);
        assert!(least_squares_grad(&th, &x, y)
            .unwrap()
            .iter()
            .all(|g| *g == 0.0));
        assert!(least_squares_grad(&th, &[1.0], 0.0).is_err());
    }

    #[test]
    fn matrix_square_examples() {
        let x = DMatrix::from_element(2, 3, 1.0);
        assert_eq!(matrix_square_grad(&x, &x).unwrap(), DMatrix::zeros(2, 3));
        assert_eq!(
            matrix_square_grad(&DMatrix::zeros(2, 3), &x).unwrap(),
            -x.clone()
        );
        assert!(matrix_square_grad(&DMatrix::zeros(3, 2), &x).is_err());
    }

    #[test]
    fn logdet_identity() {
        let g = logdet_grad(&DMatrix::identity(3, 3), &[0.0; 3]).unwrap();
        assert_eq!(g, -DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn logdet_rejects_indefinite() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            logdet_grad(&t, &[1.0, 0.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn direct_passes_through() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            direct_observation_grad(&DMatrix::zeros(2, 2), &x).unwrap(),
            x
        );
    }

    #[test]
    fn least_squares_constants() {
        let c = ProblemConstants::least_squares(1.0, 3.0, 0.0, 3);
        assert!((c.gamma - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.lipschitz_g, 3.0);
        assert!(c.validate().is_ok());
    }
}
