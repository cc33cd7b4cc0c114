use std::path::Path;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use super::config::{ExperimentConfig, ProblemKind};
use super::manifest::{revision, Outputs, RunManifest, Summary, MANIFEST_FILE, TRAJECTORY_FILE};
use super::trajectory::{checkpoint_indices, DecompositionRecord, SparseRecord, Trajectory};
use crate::datagen::{gen_ggm, gen_independent_noise, gen_sparse_regression};
use crate::error::{Error, Result};
use crate::linalg::{l1, l2, l2_dist};
use crate::losses::{DirectOracle, LeastSquaresOracle, LogDetOracle, ProblemConstants};
use crate::reason1::{reason1_solve, InvariantReport, IterView};
use crate::reason2::{reason2_solve, IterView2};
use crate::rng::sub_seed;

const TAG_GENERATOR: u64 = 0x10;

/// Final estimate of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Vector(Vec<f64>),
    Matrices { s: DMatrix<f64>, l: DMatrix<f64> },
}

impl Estimate {
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Estimate::Vector(v) => Some(v),
            Estimate::Matrices { .. } => None,
        }
    }

    pub fn as_matrices(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        match self {
            Estimate::Matrices { s, l } => Some((s, l)),
            Estimate::Vector(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub summary: Summary,
    pub report: InvariantReport,
    pub estimate: Estimate,
    /// Epoch averages in order; the last one equals `estimate`.
    pub epoch_estimates: Vec<Estimate>,
    /// Ground truth in the estimate's layout (`θ*`, `Θ*` or `S*`/`L*`).
    pub truth: Estimate,
    /// Squared ℓ2 (Frobenius) distance of the headline estimate to the truth.
    pub final_sq_err: f64,
}

/// Seed handed to the instance generator for master seed `seed`.
pub fn generator_seed(seed: u64) -> u64 {
    sub_seed(seed, TAG_GENERATOR, 0)
}

/// Largest admissible initial radius for the log-det loss, `0.25/‖Σ*‖_F`.
pub fn ggm_radius_cap(sigma_star: &DMatrix<f64>) -> f64 {
    0.25 / sigma_star.norm()
}

struct Clock {
    start: Instant,
    enabled: bool,
}

impl Clock {
    fn ms(&self) -> f64 {
        if self.enabled {
            self.start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

/// Running mean of the iterates seen so far in the current epoch.
struct EpochMean {
    epoch: usize,
    count: usize,
    sum: Vec<f64>,
}

impl EpochMean {
    fn new(n: usize) -> Self {
        EpochMean {
            epoch: 0,
            count: 0,
            sum: vec![0.0; n],
        }
    }

    fn push(&mut self, epoch: usize, x: &[f64]) -> Vec<f64> {
        if epoch != self.epoch {
            self.epoch = epoch;
            self.count = 0;
            self.sum.iter_mut().for_each(|v| *v = 0.0);
        }
        self.count += 1;
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s += v;
        }
        let n = self.count as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

/// Runs the configured experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let clock = Clock {
        start: Instant::now(),
        enabled: cfg.wall_clock,
    };
    let mut outcome = match cfg.problem {
        ProblemKind::Sparse => run_sparse(cfg, &clock)?,
        ProblemKind::Ggm => run_ggm(cfg, &clock)?,
        ProblemKind::Decompose => run_decompose(cfg, &clock)?,
    };
    outcome.summary.wall_ms_total = clock.start.elapsed().as_secs_f64() * 1e3;
    Ok(outcome)
}

/// Runs the experiment and writes `trajectory.csv` and `manifest.toml` into
/// `out_dir`, creating it if needed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let outcome = execute(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let traj_path = out_dir.join(TRAJECTORY_FILE);
    let manifest_path = out_dir.join(MANIFEST_FILE);
    outcome.trajectory.write_csv(&traj_path)?;
    let manifest = RunManifest {
        seed: cfg.seed,
        revision: revision(),
        config: ExperimentConfig {
            solver: Some(cfg.solver()),
            ..cfg.clone()
        },
        summary: outcome.summary,
        outputs: Outputs {
            trajectory: traj_path.display().to_string(),
            manifest: manifest_path.display().to_string(),
        },
    };
    manifest.write(&manifest_path)?;
    Ok(manifest)
}

fn summarize(
    traj: &Trajectory,
    final_error: f64,
    components: Option<(f64, f64)>,
    epochs: usize,
    report: &InvariantReport,
) -> Summary {
    let errs = traj.errors();
    let [a, b, c] = checkpoint_indices(errs.len());
    let at = |i: usize| errs.get(i).copied().unwrap_or(f64::NAN);
    Summary {
        final_error,
        final_err_s: components.map(|c| c.0),
        final_err_l: components.map(|c| c.1),
        e002T: at(a),
        e02T: at(b),
        eT: at(c),
        epochs_completed: epochs,
        total_iters: errs.len(),
        wall_ms_total: 0.0,
        invariant_checks: report.checks,
        invariant_violations: report.violations,
    }
}

fn run_sparse(cfg: &ExperimentConfig, clock: &Clock) -> Result<RunOutcome> {
    let d = cfg.dim;
    let (inst, stream) = gen_sparse_regression(
        d,
        cfg.sparsity,
        cfg.bound,
        cfg.noise_var,
        generator_seed(cfg.seed),
    )?;
    let r1 = cfg.initial_radius();
    let mut k = ProblemConstants::least_squares(cfg.bound, r1, cfg.noise_var, cfg.sparsity);
    k.w = cfg.w;
    let solver_cfg = cfg.reason1_config(r1, k);
    let truth = inst.theta_star.clone();
    let norm = l2(&truth);
    let curvature = cfg.bound * cfg.bound / 3.0;
    let noise_floor = 0.5 * cfg.noise_var;
    let mut oracle = LeastSquaresOracle::new(stream, d);
    let mut rows = Vec::new();
    let mut mean = EpochMean::new(d);
    let out = reason1_solve(
        &mut oracle,
        vec![0.0; d],
        &solver_cfg,
        &mut |v: &IterView| {
            let m = mean.push(v.epoch, v.theta);
            let dist = l2_dist(&m, &truth);
            rows.push(SparseRecord {
                iter: v.iter,
                epoch: v.epoch,
                wall_ms: clock.ms(),
                rel_err: dist / norm,
                objective: 0.5 * curvature * dist * dist + noise_floor + v.lambda * l1(&m),
                radius: v.radius,
            });
        },
    )
    .map_err(numerical)?;
    let sq = l2_dist(&out.theta_hat, &truth).powi(2);
    let traj = Trajectory::Sparse(rows);
    let summary = summarize(&traj, sq.sqrt() / norm, None, out.epochs.len(), &out.report);
    Ok(RunOutcome {
        trajectory: traj,
        summary,
        report: out.report,
        epoch_estimates: out
            .epochs
            .iter()
            .map(|e| Estimate::Vector(e.average.clone()))
            .collect(),
        estimate: Estimate::Vector(out.theta_hat),
        truth: Estimate::Vector(truth),
        final_sq_err: sq,
    })
}

/// `Tr(ΣΘ) − log det Θ`, or `+∞` when `Θ` is not positive definite.
fn logdet_objective(theta: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    match Cholesky::new(theta.clone()) {
        Some(c) => {
            let logdet: f64 = 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            (sigma.component_mul(theta)).sum() - logdet
        }
        None => f64::INFINITY,
    }
}

fn run_ggm(cfg: &ExperimentConfig, clock: &Clock) -> Result<RunOutcome> {
    let p = cfg.p;
    let (inst, stream) = gen_ggm(p, cfg.ggm_structure(), generator_seed(cfg.seed))?;
    let cap = ggm_radius_cap(&inst.sigma_star);
    let r1 = cfg.radius.unwrap_or(cap);
    if r1 > cap * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "initial radius {r1} exceeds 0.25/|Sigma*|_F = {cap}; the log-det loss is only strongly convex near Theta*"
        )));
    }
    // γ = 1/β² for Θ ⪯ βI on the ball; σ and G are taken at three standard
    // deviations of the largest entry of x xᵀ.
    let beta = SymmetricEigen::new(inst.theta_star.clone())
        .eigenvalues
        .max()
        + r1;
    let spread = 3.0 * inst.sigma_star.diagonal().max();
    let k = ProblemConstants {
        gamma: 1.0 / (beta * beta),
        sigma: spread,
        lipschitz_g: spread,
        beta_p: 1.0,
        alpha: 0.0,
        w: cfg.w,
        sparsity_s: inst.edges().len() * 2 + p,
        rank_r: 0,
    };
    let solver_cfg = cfg.reason1_config(r1, k);
    let truth = inst.theta_star.as_slice().to_vec();
    let norm = l2(&truth);
    let mut oracle = LogDetOracle::new(stream, p);
    let mut rows = Vec::new();
    let mut mean = EpochMean::new(p * p);
    let center = DMatrix::<f64>::identity(p, p).as_slice().to_vec();
    let out = reason1_solve(&mut oracle, center, &solver_cfg, &mut |v: &IterView| {
        let m = mean.push(v.epoch, v.theta);
        let theta = DMatrix::from_column_slice(p, p, &m);
        rows.push(SparseRecord {
            iter: v.iter,
            epoch: v.epoch,
            wall_ms: clock.ms(),
            rel_err: l2_dist(&m, &truth) / norm,
            objective: logdet_objective(&theta, &inst.sigma_star) + v.lambda * l1(&m),
            radius: v.radius,
        });
    })
    .map_err(numerical)?;
    let sq = l2_dist(&out.theta_hat, &truth).powi(2);
    let traj = Trajectory::Sparse(rows);
    let summary = summarize(&traj, sq.sqrt() / norm, None, out.epochs.len(), &out.report);
    Ok(RunOutcome {
        trajectory: traj,
        summary,
        report: out.report,
        epoch_estimates: out
            .epochs
            .iter()
            .map(|e| Estimate::Vector(e.average.clone()))
            .collect(),
        estimate: Estimate::Vector(out.theta_hat),
        truth: Estimate::Vector(truth),
        final_sq_err: sq,
    })
}

fn run_decompose(cfg: &ExperimentConfig, clock: &Clock) -> Result<RunOutcome> {
    let p = cfg.p;
    let (inst, stream) = gen_independent_noise(
        p,
        cfg.sparsity,
        cfg.rank,
        cfg.alpha,
        cfg.noise_var,
        generator_seed(cfg.seed),
    )?;
    let r1 = cfg.initial_radius();
    // Direct observation: the loss ½‖M − X‖² has unit curvature, and its
    // gradient at M* is the noise, at most 3σ per entry.
    let sd = cfg.noise_var.sqrt();
    let k = ProblemConstants {
        gamma: 1.0,
        sigma: sd,
        lipschitz_g: 3.0 * sd * (p * p) as f64,
        beta_p: 1.0,
        alpha: cfg.alpha,
        w: cfg.w,
        sparsity_s: cfg.sparsity.max(1),
        rank_r: cfg.rank,
    };
    let solver_cfg = cfg.reason2_config(r1, k);
    let m_star = inst.m_star();
    let (nm, ns, nl) = (m_star.norm(), inst.s_star.norm(), inst.l_star.norm());
    let rel = |e: f64, n: f64| if n > 0.0 { e / n } else { e };
    let mut oracle = DirectOracle::new(stream, (p, p));
    let mut rows = Vec::new();
    let mut mean_s = EpochMean::new(p * p);
    let mut mean_l = EpochMean::new(p * p);
    let out = reason2_solve(&mut oracle, &solver_cfg, &mut |v: &IterView2| {
        let s = DMatrix::from_vec(p, p, mean_s.push(v.epoch, v.s.as_slice()));
        let l = DMatrix::from_vec(p, p, mean_l.push(v.epoch, v.l.as_slice()));
        rows.push(DecompositionRecord {
            iter: v.iter,
            epoch: v.epoch,
            wall_ms: clock.ms(),
            err_recon: rel((&s + &l - &m_star).norm(), nm),
            err_s: rel((&s - &inst.s_star).norm(), ns),
            err_l: rel((&l - &inst.l_star).norm(), nl),
            radius: v.radius,
        });
    })
    .map_err(numerical)?;
    let recon = (&out.s_hat + &out.l_hat - &m_star).norm();
    let es = rel((&out.s_hat - &inst.s_star).norm(), ns);
    let el = rel((&out.l_hat - &inst.l_star).norm(), nl);
    let traj = Trajectory::Decomposition(rows);
    let summary = summarize(
        &traj,
        rel(recon, nm),
        Some((es, el)),
        out.epochs.len(),
        &out.report,
    );
    Ok(RunOutcome {
        trajectory: traj,
        summary,
        report: out.report,
        epoch_estimates: out
            .epochs
            .iter()
            .map(|e| Estimate::Matrices {
                s: e.s_mean.clone(),
                l: e.l_mean.clone(),
            })
            .collect(),
        estimate: Estimate::Matrices {
            s: out.s_hat,
            l: out.l_hat,
        },
        truth: Estimate::Matrices {
            s: inst.s_star,
            l: inst.l_star,
        },
        final_sq_err: recon * recon,
    })
}

/// Solver-level argument errors after a validated config point at a bad
/// parameter combination; they are reported as configuration errors.
fn numerical(e: Error) -> Error {
    match e {
        Error::Argument(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SolverKind;

    fn small_sparse() -> ExperimentConfig {
        ExperimentConfig {
            dim: 20,
            sparsity: 1,
            epoch_len: 200,
            epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn sparse_run_has_one_row_per_iteration() {
        let out = execute(&small_sparse()).unwrap();
        assert_eq!(out.trajectory.len(), 600);
        assert_eq!(out.summary.total_iters, 600);
        assert_eq!(out.summary.epochs_completed, 3);
        // Last row is the final epoch mean.
        assert!((out.summary.eT - out.summary.final_error).abs() < 1e-12);
    }

    #[test]
    fn decomposition_rows_and_components() {
        let cfg = ExperimentConfig {
            problem: ProblemKind::Decompose,
            p: 10,
            sparsity: 5,
            rank: 1,
            alpha: 3.0,
            noise_var: 0.01,
            lambda: 0.2,
            mu_ratio: 5.0,
            epoch_len: 30,
            epochs: 2,
            ..Default::default()
        };
        let out = execute(&cfg).unwrap();
        assert_eq!(out.trajectory.len(), 60);
        assert!(out.summary.final_err_s.is_some() && out.summary.final_err_l.is_some());
    }

    #[test]
    fn ggm_radius_precondition() {
        let cfg = ExperimentConfig {
            problem: ProblemKind::Ggm,
            p: 5,
            radius: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(execute(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            problem: ProblemKind::Ggm,
            p: 5,
            ggm_strength: 0.01,
            epoch_len: 50,
            epochs: 2,
            lambda: 0.0,
            ..Default::default()
        };
        let out = execute(&cfg).unwrap();
        assert_eq!(out.trajectory.len(), 100);
    }

    #[test]
    fn baseline_runs_one_long_epoch() {
        let cfg = ExperimentConfig {
            solver: Some(SolverKind::StAdmm),
            ..small_sparse()
        };
        let out = execute(&cfg).unwrap();
        assert_eq!(out.summary.epochs_completed, 1);
        assert_eq!(out.trajectory.len(), 600);
    }
}
