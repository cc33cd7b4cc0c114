use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProblemKind};
use super::run::execute;
use crate::error::{arg, Result};

/// Final squared error of one run in a dimension sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub dim: usize,
    pub sparsity: usize,
    pub total_iters: usize,
    pub sq_err: f64,
}

impl RatePoint {
    /// Regressor `log(s·log d)`.
    pub fn x(&self) -> f64 {
        (self.sparsity as f64 * (self.dim as f64).ln()).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub points: Vec<RatePoint>,
}

/// Least-squares fit of `log(sq_err)` on `log(s·log d)` at a common budget.
pub fn fit_rate(points: &[RatePoint]) -> Result<RateReport> {
    let mut dims: Vec<usize> = points.iter().map(|p| p.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    if dims.len() < 3 {
        return arg(format!(
            "rate fit needs at least 3 distinct dimensions, got {}",
            dims.len()
        ));
    }
    if points
        .iter()
        .any(|p| p.total_iters != points[0].total_iters)
    {
        return arg("rate fit needs a common iteration budget");
    }
    if points
        .iter()
        .any(|p| !(p.sq_err > 0.0) || !p.sq_err.is_finite() || p.dim < 2 || p.sparsity == 0)
    {
        return arg("rate fit needs positive finite errors, d >= 2 and s >= 1");
    }
    let xs: Vec<f64> = points.iter().map(RatePoint::x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sq_err.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-12 {
        return arg("rate fit needs distinct values of s·log d");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(RateReport {
        slope,
        intercept,
        residuals,
        points: points.to_vec(),
    })
}

/// Runs `base` once per `(d, s)` pair and fits the rate.
pub fn rate_sweep(base: &ExperimentConfig, dims: &[(usize, usize)]) -> Result<RateReport> {
    if base.problem != ProblemKind::Sparse {
        return arg("rate sweeps run on sparse regression");
    }
    let mut points = Vec::with_capacity(dims.len());
    for &(dim, sparsity) in dims {
        let cfg = ExperimentConfig {
            dim,
            sparsity,
            ..base.clone()
        };
        let out = execute(&cfg)?;
        points.push(RatePoint {
            dim,
            sparsity,
            total_iters: out.summary.total_iters,
            sq_err: out.final_sq_err,
        });
    }
    fit_rate(&points)
}
