//! Epoch-based inexact stochastic ADMM for ℓ1-regularized estimation.
//!
//! Each epoch runs `T0` linearized ADMM steps on the split `θ = y`, with θ
//! confined to an ℓ1 ball around the previous epoch's average. After the
//! epoch the average becomes the new center and the squared radius halves.

use serde::{Deserialize, Serialize};

use crate::error::{arg, ensure_finite, Result};
use crate::linalg::{l1, l1_dist, linf};
use crate::losses::{GradientOracle, ProblemConstants};
use crate::projections::{project_l1, shrink, shrink_scalar};

/// Radius used for the unprojected baseline.
pub const BASELINE_RADIUS: f64 = 1e18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LambdaSchedule {
    /// `λ_i` from the analysis constants; `scale` multiplies the formula.
    Theory {
        scale: f64,
    },
    /// `λ_i = λ₁·decay^(i−1)`.
    Geometric {
        lambda1: f64,
        decay: f64,
    },
    Fixed {
        lambda: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RhoRule {
    Fixed {
        rho: f64,
    },
    /// `ρ = c·√(T0·log d)/R_i`.
    Formula {
        c: f64,
    },
}

/// Epoch lengths that grow as the radius shrinks,
/// `T_i = C·(s²/γ²)·(log d + 12σ²·log(3/δ))/R_i²`, truncated at `budget`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableEpochs {
    pub c: f64,
    pub delta: f64,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reason1Config {
    pub epoch_length: usize,
    pub variable_epochs: Option<VariableEpochs>,
    pub initial_radius: f64,
    pub lambda: LambdaSchedule,
    pub rho: RhoRule,
    pub rho_x: f64,
    /// Dual step; `None` means `τ = ρ`.
    pub tau: Option<f64>,
    pub num_epochs: usize,
    pub baseline_mode: bool,
    /// Average over `θ_0..θ_{T0−1}` instead of `θ_1..θ_{T0}`.
    pub include_initial: bool,
    pub constants: Option<ProblemConstants>,
    pub debug_checks: bool,
}

impl Default for Reason1Config {
    fn default() -> Self {
        Reason1Config {
            epoch_length: 2000,
            variable_epochs: None,
            initial_radius: 1.0,
            lambda: LambdaSchedule::Geometric {
                lambda1: 0.1,
                decay: std::f64::consts::FRAC_1_SQRT_2,
            },
            rho: RhoRule::Formula { c: 1.0 },
            rho_x: 0.0,
            tau: None,
            num_epochs: 5,
            baseline_mode: false,
            include_initial: false,
            constants: None,
            debug_checks: false,
        }
    }
}

impl Reason1Config {
    pub fn validate(&self) -> Result<()> {
        if self.epoch_length == 0 || self.num_epochs == 0 {
            return arg("epoch length and number of epochs must be positive");
        }
        if !(self.initial_radius > 0.0) {
            return arg("initial radius must be positive");
        }
        if !(self.rho_x >= 0.0) {
            return arg("rho_x must be >= 0");
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return arg("tau must be positive");
            }
        }
        match self.rho {
            RhoRule::Fixed { rho } if !(rho > 0.0) => return arg("rho must be positive"),
            RhoRule::Formula { c } if !(c > 0.0) => return arg("rho constant must be positive"),
            _ => {}
        }
        match self.lambda {
            LambdaSchedule::Theory { scale } => {
                if !(scale > 0.0) {
                    return arg("theory lambda scale must be positive");
                }
                match &self.constants {
                    Some(c) => c.validate()?,
                    None => return arg("theory schedule needs problem constants"),
                }
            }
            LambdaSchedule::Geometric { lambda1, decay } => {
                if !(lambda1 >= 0.0) || !(decay > 0.0 && decay <= 1.0) {
                    return arg("geometric schedule needs lambda1 >= 0 and decay in (0, 1]");
                }
            }
            LambdaSchedule::Fixed { lambda } => {
                if !(lambda >= 0.0) {
                    return arg("lambda must be >= 0");
                }
            }
        }
        if let Some(v) = &self.variable_epochs {
            if !(v.c > 0.0) || !(v.delta > 0.0 && v.delta < 3.0) || v.budget == 0 {
                return arg("variable epochs need c > 0, delta in (0, 3) and a positive budget");
            }
            if self.constants.is_none() {
                return arg("variable epochs need problem constants");
            }
        }
        Ok(())
    }
}

/// Solver parameters for epoch `i` (1-based) with radius `r_i`:
///
/// `λ_i² = γ/(s√T0) · √(R_i² log d + G²R_i²/T0 + σ²R_i²w_i²)` with
/// `w_i² = w² + 24 ln i`, `ρ = c_ρ√(T0 log d)/R_i` and `τ = ρ`.
pub fn theory_schedule(
    k: &ProblemConstants,
    epoch: usize,
    r_i: f64,
    t0: usize,
    log_d: f64,
    c_rho: f64,
) -> Result<(f64, f64, f64)> {
    if !(r_i > 0.0) {
        return arg("theory schedule needs a positive radius");
    }
    if epoch == 0 || t0 == 0 || !(log_d > 0.0) {
        return arg("theory schedule needs epoch >= 1, T0 >= 1 and log d > 0");
    }
    let t0f = t0 as f64;
    let r2 = r_i * r_i;
    let w_i2 = k.w * k.w + 24.0 * (epoch as f64).ln();
    let inner = r2 * log_d + k.lipschitz_g.powi(2) * r2 / t0f + k.sigma.powi(2) * r2 * w_i2;
    let lambda2 = k.gamma / (k.sparsity_s as f64 * t0f.sqrt()) * inner.sqrt();
    let rho = c_rho * (t0f * log_d).sqrt() / r_i;
    Ok((lambda2.sqrt(), rho, rho))
}

/// Resolved parameters for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochParams {
    pub epoch: usize,
    pub length: usize,
    pub radius: f64,
    pub lambda: f64,
    pub rho: f64,
    pub rho_x: f64,
    pub tau: f64,
}

fn rho_for(cfg: &Reason1Config, r: f64, t0: usize, d: usize) -> f64 {
    match cfg.rho {
        RhoRule::Fixed { rho } => rho,
        RhoRule::Formula { c } => c * (t0 as f64 * (d.max(2) as f64).ln()).sqrt() / r,
    }
}

fn lambda_for(cfg: &Reason1Config, epoch: usize, r: f64, t0: usize, d: usize) -> Result<f64> {
    Ok(match cfg.lambda {
        LambdaSchedule::Theory { scale } => {
            let k = cfg.constants.as_ref().expect("validated");
            scale * theory_schedule(k, epoch, r, t0, (d.max(2) as f64).ln(), 1.0)?.0
        }
        LambdaSchedule::Geometric { lambda1, decay } => lambda1 * decay.powi(epoch as i32 - 1),
        LambdaSchedule::Fixed { lambda } => lambda,
    })
}

fn epoch_length(cfg: &Reason1Config, r: f64, d: usize, used: u64) -> usize {
    match &cfg.variable_epochs {
        None => cfg.epoch_length,
        Some(v) => {
            let k = cfg.constants.as_ref().expect("validated");
            let s = k.sparsity_s as f64;
            let want = v.c * s * s / (k.gamma * k.gamma)
                * ((d.max(2) as f64).ln() + 12.0 * k.sigma * k.sigma * (3.0 / v.delta).ln())
                / (r * r);
            let left = v.budget.saturating_sub(used);
            (want.ceil().max(1.0) as u64).min(left) as usize
        }
    }
}

/// Parameters for every epoch of a run, in order.
pub fn plan_epochs(cfg: &Reason1Config, d: usize) -> Result<Vec<EpochParams>> {
    cfg.validate()?;
    if cfg.baseline_mode {
        let t0 = cfg.epoch_length;
        let total = match &cfg.variable_epochs {
            Some(v) => v.budget as usize,
            None => t0 * cfg.num_epochs,
        };
        let lambda = lambda_for(cfg, 1, cfg.initial_radius, t0, d)?;
        let rho = rho_for(cfg, cfg.initial_radius, t0, d);
        return Ok(vec![EpochParams {
            epoch: 1,
            length: total,
            radius: BASELINE_RADIUS,
            lambda,
            rho,
            rho_x: cfg.rho_x,
            tau: cfg.tau.unwrap_or(rho),
        }]);
    }
    let mut out = Vec::with_capacity(cfg.num_epochs);
    let mut r = cfg.initial_radius;
    let mut used = 0u64;
    let mut prev_lambda = f64::INFINITY;
    for i in 1..=cfg.num_epochs {
        let len = epoch_length(cfg, r, d, used);
        if len == 0 {
            break;
        }
        let t0 = if cfg.variable_epochs.is_some() {
            len
        } else {
            cfg.epoch_length
        };
        let lambda = lambda_for(cfg, i, r, t0, d)?.min(prev_lambda);
        prev_lambda = lambda;
        let rho = rho_for(cfg, r, t0, d);
        out.push(EpochParams {
            epoch: i,
            length: len,
            radius: r,
            lambda,
            rho,
            rho_x: cfg.rho_x,
            tau: cfg.tau.unwrap_or(rho),
        });
        used += len as u64;
        r /= std::f64::consts::SQRT_2;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reason1State {
    pub theta: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub prox_center: Vec<f64>,
    pub radius: f64,
    pub epoch: usize,
    pub iter: usize,
    pub running_sum: Vec<f64>,
}

impl Reason1State {
    /// Epoch-start state: `θ₀ = y₀ = center`, `z₀ = 0`.
    pub fn start(center: Vec<f64>, radius: f64, epoch: usize) -> Self {
        let d = center.len();
        Reason1State {
            theta: center.clone(),
            y: center.clone(),
            z: vec![0.0; d],
            prox_center: center,
            radius,
            epoch,
            iter: 0,
            running_sum: vec![0.0; d],
        }
    }
}

/// Unconstrained minimizer of the linearized θ subproblem.
pub fn theta_unconstrained(
    state: &Reason1State,
    grad: &[f64],
    rho: f64,
    rho_x: f64,
) -> Result<Vec<f64>> {
    if grad.len() != state.theta.len() {
        return arg("gradient length does not match theta");
    }
    if !(rho + rho_x > 0.0) {
        return arg("rho + rho_x must be positive");
    }
    ensure_finite(grad, "gradient")?;
    let den = rho + rho_x;
    let out: Vec<f64> = (0..grad.len())
        .map(|j| (rho * state.y[j] + rho_x * state.theta[j] + state.z[j] - grad[j]) / den)
        .collect();
    ensure_finite(&out, "theta step")?;
    Ok(out)
}

pub fn theta_update(state: &Reason1State, grad: &[f64], rho: f64, rho_x: f64) -> Result<Vec<f64>> {
    let u = theta_unconstrained(state, grad, rho, rho_x)?;
    project_l1(&u, &state.prox_center, state.radius)
}

pub fn y_update(theta_next: &[f64], z: &[f64], lambda: f64, rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return arg("rho must be positive");
    }
    let v: Vec<f64> = theta_next
        .iter()
        .zip(z)
        .map(|(t, zj)| t - zj / rho)
        .collect();
    shrink(&v, lambda / rho)
}

pub fn z_update(z: &[f64], theta_next: &[f64], y_next: &[f64], tau: f64) -> Vec<f64> {
    z.iter()
        .zip(theta_next.iter().zip(y_next))
        .map(|(zj, (t, y))| zj - tau * (t - y))
        .collect()
}

/// Tally of runtime invariant checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantReport {
    pub checks: u64,
    pub violations: u64,
    pub messages: Vec<String>,
}

impl InvariantReport {
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            if self.messages.len() < 20 {
                self.messages.push(msg());
            }
        }
    }

    pub fn merge(&mut self, other: InvariantReport) {
        self.checks += other.checks;
        self.violations += other.violations;
        for m in other.messages {
            if self.messages.len() < 20 {
                self.messages.push(m);
            }
        }
    }
}

/// What the observer sees after each iteration.
pub struct IterView<'a> {
    /// Global 1-based iteration count.
    pub iter: usize,
    pub epoch: usize,
    pub radius: f64,
    pub lambda: f64,
    pub theta: &'a [f64],
}

fn rel_tol(scale: f64) -> f64 {
    1e-10 * scale.max(1.0)
}

/// Runs one epoch from `state` (already initialized for the epoch). Returns
/// the epoch average and leaves `state` at the next epoch's start.
pub fn run_epoch(
    state: &mut Reason1State,
    oracle: &mut dyn GradientOracle,
    params: &EpochParams,
    cfg: &Reason1Config,
    report: &mut InvariantReport,
    global_iter: &mut usize,
    observer: &mut dyn FnMut(&IterView),
) -> Result<Vec<f64>> {
    let d = state.theta.len();
    let debug = cfg.debug_checks;
    let dual_cap = cfg
        .constants
        .map(|k| k.lipschitz_g + 2.0 * (params.rho + params.rho_x) * params.radius);
    let mut stored: Vec<Vec<f64>> = Vec::new();
    let mut gap_sum = vec![0.0; d];
    if cfg.include_initial {
        add_into(&mut state.running_sum, &state.theta);
        if debug {
            stored.push(state.theta.clone());
        }
    }
    for k in 0..params.length {
        let grad = oracle.grad(&state.theta)?;
        let u = theta_unconstrained(state, &grad, params.rho, params.rho_x)?;
        if debug {
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..d {
                let r = grad[j] - state.z[j]
                    + params.rho * (u[j] - state.y[j])
                    + params.rho_x * (u[j] - state.theta[j]);
                worst = worst.max(r.abs());
                scale = scale.max(grad[j].abs()).max(state.z[j].abs());
            }
            report.check(worst <= rel_tol(scale), || {
                format!("theta stationarity residual {worst:e}")
            });
        }
        let theta = project_l1(&u, &state.prox_center, state.radius)?;
        let theta_lambda = params.lambda / params.rho;
        let y: Vec<f64> = (0..d)
            .map(|j| shrink_scalar(theta[j] - state.z[j] / params.rho, theta_lambda))
            .collect();
        let z = z_update(&state.z, &theta, &y, params.tau);
        ensure_finite(&z, "dual")?;
        if debug {
            let dist = l1_dist(&theta, &state.prox_center);
            report.check(dist <= state.radius * (1.0 + 1e-10), || {
                format!("l1 feasibility: {dist} > {}", state.radius)
            });
            if let Some(cap) = dual_cap {
                let zn = l1(&z);
                report.check(zn <= cap, || format!("dual bound: |z|_1 = {zn} > {cap}"));
            }
            for j in 0..d {
                gap_sum[j] += theta[j] - y[j];
            }
        }
        state.theta = theta;
        state.y = y;
        state.z = z;
        state.iter = k + 1;
        let include = !cfg.include_initial || k + 1 < params.length;
        if include {
            add_into(&mut state.running_sum, &state.theta);
            if debug {
                stored.push(state.theta.clone());
            }
        }
        *global_iter += 1;
        observer(&IterView {
            iter: *global_iter,
            epoch: params.epoch,
            radius: params.radius,
            lambda: params.lambda,
            theta: &state.theta,
        });
    }
    let n = params.length as f64;
    let avg: Vec<f64> = state.running_sum.iter().map(|s| s / n).collect();
    if debug {
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let mean = stored.iter().map(|t| t[j]).sum::<f64>() / stored.len() as f64;
            worst = worst.max((mean - avg[j]).abs());
        }
        let scale = linf(&avg);
        report.check(worst <= 1e-12 * scale.max(1.0), || {
            format!("averaging identity gap {worst:e}")
        });
        let mut worst: f64 = 0.0;
        for j in 0..d {
            worst = worst.max((state.z[j] + params.tau * gap_sum[j]).abs());
        }
        let scale = linf(&state.z);
        report.check(worst <= rel_tol(scale) * n, || {
            format!("dual telescoping gap {worst:e}")
        });
    }
    Ok(avg)
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub params: EpochParams,
    pub average: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Reason1Output {
    pub theta_hat: Vec<f64>,
    pub epochs: Vec<EpochSummary>,
    pub report: InvariantReport,
}

/// Runs all epochs starting from `center`.
pub fn reason1_solve(
    oracle: &mut dyn GradientOracle,
    center: Vec<f64>,
    cfg: &Reason1Config,
    observer: &mut dyn FnMut(&IterView),
) -> Result<Reason1Output> {
    let d = oracle.dim();
    if center.len() != d {
        return arg(format!(
            "initial center has length {}, oracle dimension is {d}",
            center.len()
        ));
    }
    let plan = plan_epochs(cfg, d)?;
    let mut report = InvariantReport::default();
    let mut epochs = Vec::with_capacity(plan.len());
    let mut c = center;
    let mut global = 0usize;
    for params in plan {
        let mut state = Reason1State::start(c, params.radius, params.epoch);
        let avg = run_epoch(
            &mut state,
            oracle,
            &params,
            cfg,
            &mut report,
            &mut global,
            observer,
        )?;
        epochs.push(EpochSummary {
            params,
            average: avg.clone(),
        });
        c = avg;
    }
    Ok(Reason1Output {
        theta_hat: c,
        epochs,
        report,
    })
}
