//! Epoch-based multi-block stochastic ADMM for sparse + low-rank decomposition.
//!
//! Blocks per iteration: `M` (observation or linearized loss step), `S` (ℓ1 prox
//! inside an ℓ1 ball), `L` (singular-value shrinkage inside a nuclear ball),
//! `Y` (a copy of `L` kept in the ℓ∞ box `α/p`), then the duals `Z` for
//! `M = S + L` and `U` for `L = Y`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg, ensure_finite, Result};
use crate::linalg::{self, l1, l1_dist};
use crate::losses::{MatrixOracle, ProblemConstants};
use crate::projections::{project_l1, project_linf_box, project_nuclear_from_svd, shrink_scalar};
use crate::reason1::{InvariantReport, LambdaSchedule, RhoRule, BASELINE_RADIUS};

/// How the S subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerSolver {
    /// Entrywise closed form plus bisection on the ball multiplier.
    Exact,
    /// Projected subgradient steps `η_t = τ_k/(ρ√t)`.
    Subgradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reason2Config {
    pub epoch_length: usize,
    pub num_epochs: usize,
    /// ℓ1 radius `R₁` of the sparse ball.
    pub initial_radius: f64,
    /// `R̃₁ = c_r·R₁` for the nuclear ball.
    pub radius_ratio: f64,
    pub lambda: LambdaSchedule,
    /// `μ_i² = c_μ·λ_i²`.
    pub mu_ratio: f64,
    pub rho: RhoRule,
    pub rho_x: f64,
    /// Dual step; `None` means `τ = ρ`.
    pub tau: Option<f64>,
    /// Proximal step of the S and Y subproblems.
    pub tau_k: f64,
    pub inner_solver: InnerSolver,
    /// Step budget of the subgradient S solver.
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub alpha: f64,
    pub dual_period: usize,
    pub direct_observation: bool,
    /// Optional ℓ1 ball on `M` around `S̃ + L̃`.
    pub m_l1_radius: Option<f64>,
    pub baseline_mode: bool,
    pub include_initial: bool,
    /// Keep `Z` and `U` across epochs instead of restarting them at zero.
    pub carry_duals: bool,
    /// Use `ρ_x(R² + R̃²)/T0` instead of `ρ_x²(R² + R̃²)/T0` in the theory λ.
    pub linear_rho_x_term: bool,
    pub constants: Option<ProblemConstants>,
    pub debug_checks: bool,
}

impl Default for Reason2Config {
    fn default() -> Self {
        Reason2Config {
            epoch_length: 500,
            num_epochs: 4,
            initial_radius: 1.0,
            radius_ratio: 1.0,
            lambda: LambdaSchedule::Fixed { lambda: 0.1 },
            mu_ratio: 1.0,
            rho: RhoRule::Fixed { rho: 1.0 },
            rho_x: 0.0,
            tau: None,
            tau_k: 0.5,
            inner_solver: InnerSolver::Exact,
            inner_iters: 20,
            inner_tol: 1e-9,
            alpha: 1.0,
            dual_period: 4,
            direct_observation: true,
            m_l1_radius: None,
            baseline_mode: false,
            include_initial: false,
            carry_duals: false,
            linear_rho_x_term: false,
            constants: None,
            debug_checks: false,
        }
    }
}

impl Reason2Config {
    pub fn validate(&self) -> Result<()> {
        if self.epoch_length == 0
            || self.num_epochs == 0
            || self.inner_iters == 0
            || self.dual_period == 0
        {
            return arg("epoch length, epochs, inner iterations and dual period must be positive");
        }
        if !(self.initial_radius > 0.0) || !(self.radius_ratio > 0.0 && self.radius_ratio <= 1.0) {
            return arg("need R1 > 0 and c_r in (0, 1]");
        }
        if !(self.tau_k > 0.0 && self.tau_k <= 0.5) {
            return arg("inner step tau_k must lie in (0, 1/2]");
        }
        if !(self.mu_ratio > 0.0) || !(self.alpha > 0.0) || !(self.rho_x >= 0.0) {
            return arg("need c_mu > 0, alpha > 0, rho_x >= 0");
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return arg("tau must be positive");
            }
        }
        if let Some(r) = self.m_l1_radius {
            if !(r > 0.0) {
                return arg("M-ball radius must be positive");
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
        Ok(())
    }
}

/// `λ_i` from the analysis constants for matrix dimension `p`, epoch `i` and
/// radii `(R_i, R̃_i)`; `ρ = c_ρ√(T0 log p/(R_i² + R̃_i²))` and `τ = ρ`.
#[allow(clippy::too_many_arguments)]
pub fn theory_schedule2(
    k: &ProblemConstants,
    epoch: usize,
    r: f64,
    r_tilde: f64,
    t0: usize,
    p: usize,
    rho_x: f64,
    linear_rho_x_term: bool,
    c_rho: f64,
) -> Result<(f64, f64, f64)> {
    if !(r > 0.0 && r_tilde > 0.0) || epoch == 0 || t0 == 0 || p < 2 {
        return arg("theory schedule needs positive radii, epoch >= 1, T0 >= 1, p >= 2");
    }
    let log_p = (p as f64).ln();
    let t0f = t0 as f64;
    let rr = r * r + r_tilde * r_tilde;
    let w_i2 = k.w * k.w + 24.0 * (epoch as f64).ln();
    let bs2 = k.beta_p.powi(2) * k.sigma.powi(2);
    let sr = (k.sparsity_s + k.rank_r) as f64;
    let rho_x_term = if linear_rho_x_term {
        rho_x * rr / t0f
    } else {
        rho_x * rho_x * rr / t0f
    };
    let lambda2 = k.gamma * rr.sqrt() / (sr * t0f.sqrt())
        * (log_p + k.lipschitz_g.powi(2) / t0f + bs2 * w_i2).sqrt()
        + rho_x_term
        + (k.alpha / p as f64).powi(2)
        + bs2 / t0f * (log_p + w_i2);
    let rho = c_rho * (t0f * log_p / rr).sqrt();
    Ok((lambda2.sqrt(), rho, rho))
}

/// True while `R_i² > 2(s + r + (s+r)²/(pγ²))·α²/p`, i.e. the radii should
/// keep halving.
pub fn check_stop(r_i: f64, k: &ProblemConstants, p: usize) -> bool {
    let sr = (k.sparsity_s + k.rank_r) as f64;
    let pf = p as f64;
    let floor = 2.0 * (sr + sr * sr / (pf * k.gamma * k.gamma)) * k.alpha * k.alpha / pf;
    r_i * r_i > floor
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochParams2 {
    pub epoch: usize,
    pub length: usize,
    pub radius: f64,
    pub radius_nuclear: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub rho_x: f64,
    pub tau: f64,
}

fn params_for(
    cfg: &Reason2Config,
    epoch: usize,
    r: f64,
    rt: f64,
    p: usize,
    len: usize,
) -> Result<EpochParams2> {
    let rho = match cfg.rho {
        RhoRule::Fixed { rho } => rho,
        RhoRule::Formula { c } => {
            c * (cfg.epoch_length as f64 * (p.max(2) as f64).ln() / (r * r + rt * rt)).sqrt()
        }
    };
    let lambda = match cfg.lambda {
        LambdaSchedule::Theory { scale } => {
            let k = cfg.constants.as_ref().expect("validated");
            scale
                * theory_schedule2(
                    k,
                    epoch,
                    r,
                    rt,
                    cfg.epoch_length,
                    p,
                    cfg.rho_x,
                    cfg.linear_rho_x_term,
                    1.0,
                )?
                .0
        }
        LambdaSchedule::Geometric { lambda1, decay } => lambda1 * decay.powi(epoch as i32 - 1),
        LambdaSchedule::Fixed { lambda } => lambda,
    };
    Ok(EpochParams2 {
        epoch,
        length: len,
        radius: r,
        radius_nuclear: rt,
        lambda,
        mu: cfg.mu_ratio.sqrt() * lambda,
        rho,
        rho_x: cfg.rho_x,
        tau: cfg.tau.unwrap_or(rho),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reason2State {
    pub m: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub s_center: DMatrix<f64>,
    pub l_center: DMatrix<f64>,
    pub radius: f64,
    pub radius_nuclear: f64,
    pub epoch: usize,
    pub iter: usize,
    pub s_sum: DMatrix<f64>,
    pub l_sum: DMatrix<f64>,
}

impl Reason2State {
    /// Epoch start: `S₀ = S̃`, `L₀ = L̃`, `M₀ = S₀ + L₀`, `Y₀ = box(L̃)`, zero duals.
    pub fn start(
        s_center: DMatrix<f64>,
        l_center: DMatrix<f64>,
        radius: f64,
        radius_nuclear: f64,
        alpha: f64,
        epoch: usize,
    ) -> Self {
        let (p, q) = s_center.shape();
        let bound = alpha / p as f64;
        Reason2State {
            m: &s_center + &l_center,
            s: s_center.clone(),
            l: l_center.clone(),
            y: l_center.map(|v| v.clamp(-bound, bound)),
            z: DMatrix::zeros(p, q),
            u: DMatrix::zeros(p, q),
            s_center,
            l_center,
            radius,
            radius_nuclear,
            epoch,
            iter: 0,
            s_sum: DMatrix::zeros(p, q),
            l_sum: DMatrix::zeros(p, q),
        }
    }
}

/// Closed-form M step from the gradient at `M_k`.
pub fn m_update(
    state: &Reason2State,
    grad: &DMatrix<f64>,
    rho: f64,
    rho_x: f64,
) -> Result<DMatrix<f64>> {
    if grad.shape() != state.m.shape() {
        return arg("gradient shape does not match M");
    }
    if !(rho + rho_x > 0.0) {
        return arg("rho + rho_x must be positive");
    }
    ensure_finite(grad.as_slice(), "M gradient")?;
    let num = -grad + &state.z + (&state.s + &state.l) * rho + &state.m * rho_x;
    Ok(num / (rho + rho_x))
}

/// `G = M_{k+1} − S_k − L_k − Z_k/ρ`, with `M_{k+1}` already in `state.m`.
pub fn g_m(state: &Reason2State, rho: f64) -> DMatrix<f64> {
    &state.m - &state.s - &state.l - &state.z / rho
}

/// Approximate solution of
/// `min λ‖S‖₁ + ρ/(2τ_k)‖S − (S_k + τ_k G)‖²` over `‖S − S̃‖₁ ≤ R`
/// by projected subgradient steps `η_t = τ_k/(ρ√t)`, using the minimum-norm
/// subgradient at zero entries. Converges like `1/√t`.
pub fn s_update(
    s_k: &DMatrix<f64>,
    g: &DMatrix<f64>,
    center: &DMatrix<f64>,
    radius: f64,
    lambda: f64,
    rho: f64,
    tau_k: f64,
    iters: usize,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let n = s_k.len();
    let c = center.as_slice();
    let target: Vec<f64> = s_k
        .iter()
        .zip(g.iter())
        .map(|(s, gv)| s + tau_k * gv)
        .collect();
    let weight = rho / tau_k;
    let mut w: Vec<f64> = s_k.iter().zip(c).map(|(s, cv)| s - cv).collect();
    let mut v = vec![0.0; n];
    for t in 1..=iters {
        let eta = 1.0 / (weight * (t as f64).sqrt());
        for j in 0..n {
            let a = w[j] + c[j];
            let quad = weight * (a - target[j]);
            let sub = if a != 0.0 {
                lambda * a.signum() + quad
            } else {
                shrink_scalar(quad, lambda)
            };
            v[j] = w[j] - eta * sub;
        }
        let w_next = project_l1(&v, &vec![0.0; n], radius)?;
        let step = linalg::l2_dist(&w_next, &w);
        w = w_next;
        if step < tol {
            break;
        }
    }
    let out: Vec<f64> = w.iter().zip(c).map(|(wv, cv)| wv + cv).collect();
    Ok(DMatrix::from_column_slice(s_k.nrows(), s_k.ncols(), &out))
}

/// Minimizer of `λ|s| + ν|s − c| + (w/2)(s − t)²`. The derivative is
/// monotone with jumps at `min(0, c)` and `max(0, c)`, so walk the three
/// linear pieces from the left.
fn two_kink_prox(t: f64, c: f64, lambda: f64, nu: f64, w: f64) -> f64 {
    let (a, wa, b, wb) = if c < 0.0 {
        (c, nu, 0.0, lambda)
    } else {
        (0.0, lambda, c, nu)
    };
    let left = t + (wa + wb) / w;
    if left < a {
        return left;
    }
    let mid = t - (wa - wb) / w;
    if mid <= a {
        return a;
    }
    if mid < b {
        return mid;
    }
    let right = t - (wa + wb) / w;
    if right <= b {
        b
    } else {
        right
    }
}

/// Exact solution of the S subproblem
/// `min λ‖S‖₁ + ρ/(2τ_k)‖S − (S_k + τ_k G)‖²` over `‖S − S̃‖₁ ≤ R`.
///
/// For a multiplier `ν` on the ball the problem splits into scalar
/// [`two_kink_prox`] problems; `‖S(ν) − S̃‖₁` is nonincreasing in `ν`, so
/// bisection finds the smallest feasible `ν`.
pub fn s_update_exact(
    s_k: &DMatrix<f64>,
    g: &DMatrix<f64>,
    center: &DMatrix<f64>,
    radius: f64,
    lambda: f64,
    rho: f64,
    tau_k: f64,
) -> Result<DMatrix<f64>> {
    if !(radius >= 0.0) || !(lambda >= 0.0) || !(rho > 0.0) || !(tau_k > 0.0) {
        return arg("S update needs radius >= 0, lambda >= 0, rho > 0, tau_k > 0");
    }
    let w = rho / tau_k;
    let target = s_k + g * tau_k;
    ensure_finite(target.as_slice(), "S target")?;
    let solve = |nu: f64| target.zip_map(center, |t, c| two_kink_prox(t, c, lambda, nu, w));
    let dist = |s: &DMatrix<f64>| l1_dist(s.as_slice(), center.as_slice());
    let free = solve(0.0);
    if dist(&free) <= radius {
        return Ok(free);
    }
    // At this multiplier every entry sits on its center.
    let mut hi = lambda + w * (&target - center).amax();
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist(&solve(mid)) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let out = solve(hi);
    if dist(&out) <= radius {
        return Ok(out);
    }
    // Guard against rounding at the boundary.
    let v = project_l1(out.as_slice(), center.as_slice(), radius)?;
    Ok(DMatrix::from_column_slice(s_k.nrows(), s_k.ncols(), &v))
}

/// Result of the L step: the projected iterate, plus the pre-projection
/// singular values and the input's singular values for diagnostics.
pub struct LStep {
    pub l: DMatrix<f64>,
    pub shrunk: DMatrix<f64>,
    pub input_sv: Vec<f64>,
}

/// `L = Π_{‖L − L̃‖_* ≤ R̃}(SVT(Y + U/ρ, μ/ρ))`.
pub fn l_update(
    y: &DMatrix<f64>,
    u: &DMatrix<f64>,
    center: &DMatrix<f64>,
    center_nuclear_norm: f64,
    radius: f64,
    mu: f64,
    rho: f64,
) -> Result<LStep> {
    let b = y + u / rho;
    let dec = linalg::svd(&b, "L update")?;
    let input_sv = dec.s.clone();
    let kappa = mu / rho;
    let shrunk_sv: Vec<f64> = input_sv.iter().map(|s| (s - kappa).max(0.0)).collect();
    let shrunk = linalg::rebuild(&dec.u, &shrunk_sv, &dec.v_t);
    let norm: f64 = shrunk_sv.iter().sum();
    let l = if norm + center_nuclear_norm <= radius {
        shrunk.clone()
    } else if center_nuclear_norm == 0.0 {
        // Center is zero, so the SVD of the shifted matrix is the one at hand.
        let d2 = linalg::Svd {
            s: shrunk_sv,
            ..dec
        };
        project_nuclear_from_svd(&shrunk, center, radius, &d2)?
    } else {
        let shifted = &shrunk - center;
        let d2 = linalg::svd(&shifted, "nuclear projection")?;
        project_nuclear_from_svd(&shrunk, center, radius, &d2)?
    };
    Ok(LStep {
        l,
        shrunk,
        input_sv,
    })
}

/// `Y = box(((L_k + τ_k G) + τ_k(L_{k+1} − U/ρ))/(1 + τ_k), α/p)`.
pub fn y_update(
    l_k: &DMatrix<f64>,
    g: &DMatrix<f64>,
    l_next: &DMatrix<f64>,
    u: &DMatrix<f64>,
    rho: f64,
    tau_k: f64,
    bound: f64,
) -> Result<DMatrix<f64>> {
    let a = l_k + g * tau_k;
    let b = l_next - u / rho;
    let unc = (a + b * tau_k) / (1.0 + tau_k);
    project_linf_box(&unc, bound)
}

/// Both dual recurrences; callers decide when to apply them.
pub fn dual_updates(
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    m: &DMatrix<f64>,
    s: &DMatrix<f64>,
    l: &DMatrix<f64>,
    y: &DMatrix<f64>,
    tau: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let z_next = z - (m - s - l) * tau;
    let u_next = u - (l - y) * tau;
    (z_next, u_next)
}

pub struct IterView2<'a> {
    pub iter: usize,
    pub epoch: usize,
    pub radius: f64,
    pub s: &'a DMatrix<f64>,
    pub l: &'a DMatrix<f64>,
}

/// One epoch from an initialized `state`. Returns the epoch means `(S̄, L̄)`.
#[allow(clippy::too_many_arguments)]
pub fn run_epoch2(
    state: &mut Reason2State,
    oracle: &mut dyn MatrixOracle,
    params: &EpochParams2,
    cfg: &Reason2Config,
    report: &mut InvariantReport,
    global_iter: &mut usize,
    observer: &mut dyn FnMut(&IterView2),
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = state.s.nrows();
    let bound = cfg.alpha / p as f64;
    let debug = cfg.debug_checks;
    let direct = cfg.direct_observation;
    if direct != oracle.is_direct() {
        return arg("direct-observation mode and oracle kind disagree");
    }
    let center_nuc = if state.l_center.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        linalg::nuclear_norm(&state.l_center)?
    };
    let m_center = &state.s_center + &state.l_center;
    let dual_cap = cfg
        .constants
        .map(|k| k.lipschitz_g + 2.0 * (params.rho + params.rho_x) * params.radius);
    if cfg.include_initial {
        state.s_sum += &state.s;
        state.l_sum += &state.l;
    }
    for k in 0..params.length {
        let obs = oracle.grad(&state.m)?;
        let mut m_next = if direct {
            obs
        } else {
            let m = m_update(state, &obs, params.rho, params.rho_x)?;
            if debug && cfg.m_l1_radius.is_none() {
                let res = &obs - &state.z
                    + (&m - &state.s - &state.l) * params.rho
                    + (&m - &state.m) * params.rho_x;
                let scale = obs.amax().max(state.z.amax()).max(1.0);
                let worst = res.amax();
                report.check(worst <= 1e-10 * scale, || {
                    format!("M stationarity residual {worst:e}")
                });
            }
            m
        };
        if let Some(rb) = cfg.m_l1_radius {
            let v = project_l1(m_next.as_slice(), m_center.as_slice(), rb)?;
            m_next = DMatrix::from_column_slice(p, p, &v);
        }
        state.m = m_next;
        let g = g_m(state, params.rho);
        let s_next = match cfg.inner_solver {
            InnerSolver::Exact => s_update_exact(
                &state.s,
                &g,
                &state.s_center,
                state.radius,
                params.lambda,
                params.rho,
                cfg.tau_k,
            )?,
            InnerSolver::Subgradient => s_update(
                &state.s,
                &g,
                &state.s_center,
                state.radius,
                params.lambda,
                params.rho,
                cfg.tau_k,
                cfg.inner_iters,
                cfg.inner_tol,
            )?,
        };
        let step = l_update(
            &state.y,
            &state.u,
            &state.l_center,
            center_nuc,
            state.radius_nuclear,
            params.mu,
            params.rho,
        )?;
        let y_next = y_update(
            &state.l, &g, &step.l, &state.u, params.rho, cfg.tau_k, bound,
        )?;
        if debug {
            check_iterate(report, state, &s_next, &step, &y_next, params, bound)?;
        }
        let (z_next, u_next) = if (k + 1) % cfg.dual_period == 0 {
            dual_updates(
                &state.z, &state.u, &state.m, &s_next, &step.l, &y_next, params.tau,
            )
        } else {
            (state.z.clone(), state.u.clone())
        };
        ensure_finite(z_next.as_slice(), "dual Z")?;
        ensure_finite(u_next.as_slice(), "dual U")?;
        if debug {
            if let Some(cap) = dual_cap {
                let zn = l1(z_next.as_slice());
                report.check(zn <= cap, || format!("dual bound: |Z|_1 = {zn} > {cap}"));
            }
        }
        state.s = s_next;
        state.l = step.l;
        state.y = y_next;
        state.z = z_next;
        state.u = u_next;
        state.iter = k + 1;
        if !cfg.include_initial || k + 1 < params.length {
            state.s_sum += &state.s;
            state.l_sum += &state.l;
        }
        *global_iter += 1;
        observer(&IterView2 {
            iter: *global_iter,
            epoch: params.epoch,
            radius: params.radius,
            s: &state.s,
            l: &state.l,
        });
    }
    let n = params.length as f64;
    Ok((&state.s_sum / n, &state.l_sum / n))
}

fn check_iterate(
    report: &mut InvariantReport,
    state: &Reason2State,
    s_next: &DMatrix<f64>,
    step: &LStep,
    y_next: &DMatrix<f64>,
    params: &EpochParams2,
    bound: f64,
) -> Result<()> {
    let ds = l1_dist(s_next.as_slice(), state.s_center.as_slice());
    report.check(ds <= state.radius * (1.0 + 1e-10), || {
        format!("S feasibility {ds} > {}", state.radius)
    });
    let dl = linalg::nuclear_norm(&(&step.l - &state.l_center))?;
    report.check(dl <= state.radius_nuclear * (1.0 + 1e-10) + 1e-12, || {
        format!("L feasibility {dl} > {}", state.radius_nuclear)
    });
    let yi = y_next.amax();
    report.check(yi <= bound * (1.0 + 1e-10), || {
        format!("Y box {yi} > {bound}")
    });
    let mut got: Vec<f64> = linalg::svd(&step.shrunk, "shrinkage check")?.s;
    let mut want: Vec<f64> = step
        .input_sv
        .iter()
        .map(|s| (s - params.mu / params.rho).max(0.0))
        .collect();
    got.sort_by(|a, b| b.total_cmp(a));
    want.sort_by(|a, b| b.total_cmp(a));
    let gap = got
        .iter()
        .zip(&want)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    report.check(
        gap <= 1e-8 * want.first().copied().unwrap_or(0.0).max(1.0),
        || format!("shrinkage consistency gap {gap:e}"),
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary2 {
    pub params: EpochParams2,
    pub s_mean: DMatrix<f64>,
    pub l_mean: DMatrix<f64>,
    /// Whether the radii were halved after this epoch.
    pub halved: bool,
}

#[derive(Debug, Clone)]
pub struct Reason2Output {
    pub s_hat: DMatrix<f64>,
    pub l_hat: DMatrix<f64>,
    pub epochs: Vec<EpochSummary2>,
    pub report: InvariantReport,
}

/// Runs up to `num_epochs` epochs from zero centers (or the baseline's single
/// long epoch with effectively unbounded balls).
pub fn reason2_solve(
    oracle: &mut dyn MatrixOracle,
    cfg: &Reason2Config,
    observer: &mut dyn FnMut(&IterView2),
) -> Result<Reason2Output> {
    cfg.validate()?;
    let (p, q) = oracle.shape();
    if p != q {
        return arg("decomposition expects square matrices");
    }
    let mut s_c = DMatrix::zeros(p, p);
    let mut l_c = DMatrix::zeros(p, p);
    let mut report = InvariantReport::default();
    let mut epochs = Vec::new();
    let mut global = 0usize;
    let (count, len) = if cfg.baseline_mode {
        (1, cfg.epoch_length * cfg.num_epochs)
    } else {
        (cfg.num_epochs, cfg.epoch_length)
    };
    let mut r = cfg.initial_radius;
    let mut rt = cfg.radius_ratio * cfg.initial_radius;
    let mut duals: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    for i in 1..=count {
        let mut params = params_for(cfg, i, r, rt, p, len)?;
        if cfg.baseline_mode {
            params.radius = BASELINE_RADIUS;
            params.radius_nuclear = BASELINE_RADIUS;
        }
        let mut state =
            Reason2State::start(s_c, l_c, params.radius, params.radius_nuclear, cfg.alpha, i);
        if let Some((z, u)) = duals.take() {
            state.z = z;
            state.u = u;
        }
        let (s_mean, l_mean) = run_epoch2(
            &mut state,
            oracle,
            &params,
            cfg,
            &mut report,
            &mut global,
            observer,
        )?;
        if cfg.carry_duals {
            duals = Some((state.z, state.u));
        }
        let halved = match &cfg.constants {
            Some(k) => check_stop(r, k, p),
            None => true,
        };
        if halved {
            r /= std::f64::consts::SQRT_2;
            rt /= std::f64::consts::SQRT_2;
        }
        epochs.push(EpochSummary2 {
            params,
            s_mean: s_mean.clone(),
            l_mean: l_mean.clone(),
            halved,
        });
        s_c = s_mean;
        l_c = l_mean;
    }
    Ok(Reason2Output {
        s_hat: s_c,
        l_hat: l_c,
        epochs,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, n, 1.0)
    }

    fn blank(n: usize) -> Reason2State {
        Reason2State::start(
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            10.0,
            10.0,
            1.0,
            1,
        )
    }

    #[test]
    fn m_update_examples() {
        let mut st = blank(2);
        st.s = j(2);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(m_update(&st, &zero, 1.0, 0.0).unwrap(), j(2));
        assert_eq!(m_update(&st, &zero, 1.0, 1.0).unwrap(), j(2) * 0.5);
    }

    #[test]
    fn g_m_examples() {
        let mut st = blank(2);
        st.s = j(2);
        st.m = j(2);
        assert_eq!(g_m(&st, 2.0), DMatrix::zeros(2, 2));
        st.z = j(2) * 2.0;
        assert_eq!(g_m(&st, 2.0), -j(2));
    }

    #[test]
    fn s_update_interior_without_penalty() {
        let sk = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, -0.2, 0.3]);
        let g = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.0, -0.4]);
        let out = s_update(
            &sk,
            &g,
            &DMatrix::zeros(2, 2),
            100.0,
            0.0,
            1.0,
            0.5,
            20,
            1e-12,
        )
        .unwrap();
        let want = &sk + &g * 0.5;
        assert!((out - want).amax() < 1e-12);
    }

    #[test]
    fn s_update_zero_radius() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let out = s_update(&j(2), &j(2), &c, 0.0, 0.3, 1.0, 0.5, 20, 1e-9).unwrap();
        assert_eq!(out, c);
        assert_eq!(
            s_update_exact(&j(2), &j(2), &c, 0.0, 0.3, 1.0, 0.5).unwrap(),
            c
        );
    }

    #[test]
    fn exact_s_update_examples() {
        let sk = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, -0.2, 0.3]);
        let g = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.0, -0.4]);
        let zero = DMatrix::zeros(2, 2);
        let out = s_update_exact(&sk, &g, &zero, 100.0, 0.0, 1.0, 0.5).unwrap();
        assert!((out - (&sk + &g * 0.5)).amax() < 1e-15);
        // Large ball: entrywise soft threshold at λτ_k/ρ.
        let t = DMatrix::from_row_slice(1, 3, &[1.0, -0.05, -0.6]);
        let out = s_update_exact(
            &t,
            &DMatrix::zeros(1, 3),
            &DMatrix::zeros(1, 3),
            100.0,
            0.2,
            1.0,
            0.5,
        )
        .unwrap();
        assert!((out - DMatrix::from_row_slice(1, 3, &[0.9, 0.0, -0.5])).amax() < 1e-15);
        // Active ball around zero: threshold grows until the ℓ1 norm is R.
        let out = s_update_exact(
            &t,
            &DMatrix::zeros(1, 3),
            &DMatrix::zeros(1, 3),
            0.5,
            0.0,
            1.0,
            0.5,
        )
        .unwrap();
        assert!((out - DMatrix::from_row_slice(1, 3, &[0.45, 0.0, -0.05])).amax() < 1e-12);
    }

    #[test]
    fn two_kink_prox_pieces() {
        // c > 0: left of 0, at 0, between, at c, right of c.
        assert_eq!(two_kink_prox(-2.0, 1.0, 0.5, 0.5, 1.0), -1.0);
        assert_eq!(two_kink_prox(0.2, 1.0, 0.5, 0.25, 1.0), 0.0);
        assert_eq!(two_kink_prox(0.5, 1.0, 0.5, 0.25, 1.0), 0.25);
        assert_eq!(two_kink_prox(1.5, 1.0, 0.5, 0.5, 1.0), 1.0);
        assert_eq!(two_kink_prox(3.0, 1.0, 0.5, 0.5, 1.0), 2.0);
        // c < 0 mirrors c > 0.
        assert_eq!(two_kink_prox(-0.5, -1.0, 0.5, 0.25, 1.0), -0.25);
        // c = 0 is a single threshold at λ + ν.
        assert_eq!(two_kink_prox(2.0, 0.0, 0.5, 0.5, 2.0), 1.5);
    }

    #[test]
    fn l_update_examples() {
        let y = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.2, 0.05]);
        let z = DMatrix::zeros(2, 2);
        let out = l_update(&y, &z, &z, 0.0, 100.0, 0.0, 1.0).unwrap();
        assert!((out.l - y).amax() < 1e-12);
        let y = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        let out = l_update(&y, &z, &z, 0.0, 100.0, 1.0, 1.0).unwrap();
        assert!((out.l - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn y_update_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, -0.2, 0.05, 0.0]);
        let zero = DMatrix::zeros(2, 2);
        // a = b when G = 0, U = 0 and L_{k+1} = L_k.
        let out = y_update(&a, &zero, &a, &zero, 1.0, 0.5, 1.0).unwrap();
        assert!((out - &a).amax() < 1e-15);
        let g = j(2);
        let out = y_update(&a, &g, &zero, &zero, 1.0, 1e-12, 0.1).unwrap();
        let want = project_linf_box(&(&a + &g * 1e-12), 0.1).unwrap();
        assert!((out - want).amax() < 1e-11);
    }

    #[test]
    fn dual_examples() {
        let zero = DMatrix::zeros(2, 2);
        let (z, u) = dual_updates(&j(2), &j(2), &j(2), &zero, &j(2), &j(2), 3.0);
        assert_eq!((z, u), (j(2), j(2)));
        let (z, u) = dual_updates(&zero, &zero, &j(2), &zero, &zero, &j(2), 1.0);
        assert_eq!(z, -j(2));
        assert_eq!(u, j(2));
    }

    #[test]
    fn stop_rule() {
        let mut k = ProblemConstants {
            gamma: 1.0,
            sigma: 1.0,
            lipschitz_g: 1.0,
            beta_p: 1.0,
            alpha: 1.0,
            w: 1.0,
            sparsity_s: 1,
            rank_r: 1,
        };
        // 2·(2 + 4/4)·(1/4) = 1.5
        assert!(check_stop(1.5f64.sqrt() * 1.0001, &k, 4));
        assert!(!check_stop(1.5f64.sqrt() * 0.9999, &k, 4));
        k.alpha = 0.0;
        assert!(check_stop(1e-9, &k, 4));
    }
}
