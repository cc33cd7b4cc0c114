use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{sparse_magnitude, GgmStructure};
use crate::error::{Error, Result};
use crate::losses::ProblemConstants;
use crate::reason1::{LambdaSchedule, Reason1Config, RhoRule};
use crate::reason2::{InnerSolver, Reason2Config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Sparse,
    Decompose,
    Ggm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Reason1,
    StAdmm,
    Reason2,
    Unprojected,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Reason1 => "reason1",
            SolverKind::StAdmm => "st-admm",
            SolverKind::Reason2 => "reason2",
            SolverKind::Unprojected => "unprojected",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reason1" => Ok(SolverKind::Reason1),
            "st-admm" => Ok(SolverKind::StAdmm),
            "reason2" => Ok(SolverKind::Reason2),
            "unprojected" => Ok(SolverKind::Unprojected),
            _ => Err(Error::Config(format!("unknown solver `{s}`"))),
        }
    }

    fn is_baseline(self) -> bool {
        matches!(self, SolverKind::StAdmm | SolverKind::Unprojected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Theory,
    Geometric,
    Fixed,
}

impl ScheduleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(ScheduleKind::Theory),
            "geometric" => Ok(ScheduleKind::Geometric),
            "fixed" => Ok(ScheduleKind::Fixed),
            _ => Err(Error::Config(format!("unknown schedule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GgmShape {
    Identity,
    Chain,
    Grid,
    Random,
}

/// Everything needed to reproduce one run. Unset optional fields fall back
/// to the rules documented on each accessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Defaults to the projected solver for the problem kind.
    pub solver: Option<SolverKind>,
    pub seed: u64,

    pub dim: usize,
    pub p: usize,
    pub sparsity: usize,
    pub rank: usize,
    pub noise_var: f64,
    /// Covariate bound `B` for the sparse model.
    pub bound: f64,
    pub alpha: f64,
    pub ggm_shape: GgmShape,
    pub ggm_strength: f64,
    pub ggm_edges: usize,

    pub epoch_len: usize,
    pub epochs: usize,
    pub radius: Option<f64>,
    pub radius_ratio: f64,
    pub schedule: ScheduleKind,
    pub lambda: f64,
    pub lambda_decay: f64,
    pub lambda_scale: f64,
    pub mu_ratio: f64,
    /// Fixed ρ; overrides the formula when set.
    pub rho: Option<f64>,
    /// Constant `c` of the ρ formula.
    pub rho_const: Option<f64>,
    /// ρ at the first epoch; fixes the formula constant when set.
    pub rho_first: Option<f64>,
    pub rho_x: f64,
    pub tau: Option<f64>,
    pub tau_k: f64,
    pub inner_solver: InnerSolver,
    pub inner_iters: usize,
    pub dual_period: usize,
    pub carry_duals: bool,
    pub include_initial: bool,
    pub w: f64,

    pub debug_checks: bool,
    /// Write measured wall time into trajectories. Off by default so reruns
    /// produce byte-identical files.
    pub wall_clock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Sparse,
            solver: None,
            seed: 1,
            dim: 20,
            p: 20,
            sparsity: 1,
            rank: 2,
            noise_var: 0.5,
            bound: 1.0,
            alpha: 1.0,
            ggm_shape: GgmShape::Chain,
            ggm_strength: 0.4,
            ggm_edges: 0,
            epoch_len: 2000,
            epochs: 5,
            radius: None,
            radius_ratio: 1.0,
            schedule: ScheduleKind::Geometric,
            lambda: 0.01,
            lambda_decay: std::f64::consts::FRAC_1_SQRT_2,
            lambda_scale: 1.0,
            mu_ratio: 1.0,
            rho: None,
            rho_const: None,
            rho_first: None,
            rho_x: 0.0,
            tau: None,
            tau_k: 0.5,
            inner_solver: InnerSolver::Exact,
            inner_iters: 20,
            dual_period: 4,
            carry_duals: false,
            include_initial: false,
            w: 1.0,
            debug_checks: false,
            wall_clock: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file, or a run manifest whose `config` table is used.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let table = match table.get("config") {
            Some(toml::Value::Table(inner)) if table.contains_key("summary") => inner.clone(),
            _ => table,
        };
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn solver(&self) -> SolverKind {
        self.solver.unwrap_or(match self.problem {
            ProblemKind::Sparse | ProblemKind::Ggm => SolverKind::Reason1,
            ProblemKind::Decompose => SolverKind::Reason2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let solver = self.solver();
        let solver_ok = match self.problem {
            ProblemKind::Sparse | ProblemKind::Ggm => {
                matches!(solver, SolverKind::Reason1 | SolverKind::StAdmm)
            }
            ProblemKind::Decompose => {
                matches!(solver, SolverKind::Reason2 | SolverKind::Unprojected)
            }
        };
        if !solver_ok {
            return bad(&format!(
                "solver {} does not apply to {:?} problems",
                solver.name(),
                self.problem
            ));
        }
        for v in [self.rho, self.rho_first, self.rho_const, self.tau]
            .into_iter()
            .flatten()
        {
            if !(v > 0.0) {
                return bad("rho, rho_first, rho_const and tau must be positive");
            }
        }
        if self.epoch_len == 0 || self.epochs == 0 {
            return bad("epoch_len and epochs must be positive");
        }
        if !(self.noise_var >= 0.0) || !(self.bound > 0.0) || !(self.alpha > 0.0) {
            return bad("need noise_var >= 0, bound > 0, alpha > 0");
        }
        if !(self.lambda >= 0.0) || !(self.lambda_decay > 0.0 && self.lambda_decay <= 1.0) {
            return bad("need lambda >= 0 and lambda_decay in (0, 1]");
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return bad("radius must be positive");
            }
        }
        match self.problem {
            ProblemKind::Sparse => {
                if self.sparsity == 0 || self.sparsity > self.dim || self.dim < 2 {
                    return bad("sparse problems need 2 <= dim and 1 <= sparsity <= dim");
                }
            }
            ProblemKind::Decompose => {
                if self.p < 2 || self.sparsity > self.p * self.p || self.rank > self.p {
                    return bad("decomposition needs p >= 2, sparsity <= p^2, rank <= p");
                }
            }
            ProblemKind::Ggm => {
                if self.p < 2 {
                    return bad("ggm needs p >= 2");
                }
            }
        }
        Ok(())
    }

    /// Initial ℓ1 radius. Sparse default `4s` (θ* has `s` unit entries);
    /// decomposition default `2ms`, an upper bound on `‖S*‖₁` from the
    /// generator's magnitude range.
    pub fn initial_radius(&self) -> f64 {
        if let Some(r) = self.radius {
            return r;
        }
        match self.problem {
            ProblemKind::Sparse => 4.0 * self.sparsity as f64,
            ProblemKind::Decompose => {
                2.0 * sparse_magnitude(self.alpha, self.p) * self.sparsity.max(1) as f64
            }
            ProblemKind::Ggm => 0.0,
        }
    }

    pub fn ggm_structure(&self) -> GgmStructure {
        let strength = self.ggm_strength;
        match self.ggm_shape {
            GgmShape::Identity => GgmStructure::Identity,
            GgmShape::Chain => GgmStructure::Chain { strength },
            GgmShape::Grid => GgmStructure::Grid { strength },
            GgmShape::Random => GgmStructure::Random {
                edges: self.ggm_edges,
                strength,
            },
        }
    }

    fn lambda_schedule(&self) -> LambdaSchedule {
        match self.schedule {
            ScheduleKind::Theory => LambdaSchedule::Theory {
                scale: self.lambda_scale,
            },
            ScheduleKind::Geometric => LambdaSchedule::Geometric {
                lambda1: self.lambda,
                decay: self.lambda_decay,
            },
            ScheduleKind::Fixed => LambdaSchedule::Fixed {
                lambda: self.lambda,
            },
        }
    }

    /// Solver dimension for vector problems.
    pub fn vector_dim(&self) -> usize {
        match self.problem {
            ProblemKind::Ggm => self.p * self.p,
            _ => self.dim,
        }
    }

    /// Resolution order: fixed `rho`, then `rho_const`, then `rho_first`,
    /// then the problem default. Sparse regression defaults to
    /// `ρ₁ = d·B²/3 = E‖x‖²`, below which the linearized θ step diverges;
    /// decompositions default to a fixed `ρ = 1`; the log-det loss to `c = 1`.
    fn rho_rule(&self, r1: f64, log_dim: f64) -> RhoRule {
        if let Some(rho) = self.rho {
            return RhoRule::Fixed { rho };
        }
        if let Some(c) = self.rho_const {
            return RhoRule::Formula { c };
        }
        let first = match (self.rho_first, self.problem) {
            (Some(first), _) => first,
            (None, ProblemKind::Sparse) => self.dim as f64 * self.bound * self.bound / 3.0,
            (None, ProblemKind::Decompose) => return RhoRule::Fixed { rho: 1.0 },
            (None, ProblemKind::Ggm) => return RhoRule::Formula { c: 1.0 },
        };
        RhoRule::Formula {
            c: first * r1 / (self.epoch_len as f64 * log_dim).sqrt(),
        }
    }

    pub fn reason1_config(&self, r1: f64, constants: ProblemConstants) -> Reason1Config {
        let log_d = (self.vector_dim().max(2) as f64).ln();
        Reason1Config {
            epoch_length: self.epoch_len,
            variable_epochs: None,
            initial_radius: r1,
            lambda: self.lambda_schedule(),
            rho: self.rho_rule(r1, log_d),
            rho_x: self.rho_x,
            tau: self.tau,
            num_epochs: self.epochs,
            baseline_mode: self.solver().is_baseline(),
            include_initial: self.include_initial,
            constants: Some(constants),
            debug_checks: self.debug_checks,
        }
    }

    pub fn reason2_config(&self, r1: f64, constants: ProblemConstants) -> Reason2Config {
        let log_p = (self.p.max(2) as f64).ln();
        let rr = (1.0 + self.radius_ratio * self.radius_ratio).sqrt() * r1;
        Reason2Config {
            epoch_length: self.epoch_len,
            num_epochs: self.epochs,
            initial_radius: r1,
            radius_ratio: self.radius_ratio,
            lambda: self.lambda_schedule(),
            mu_ratio: self.mu_ratio,
            rho: self.rho_rule(rr, log_p),
            rho_x: self.rho_x,
            tau: self.tau,
            tau_k: self.tau_k,
            inner_solver: self.inner_solver,
            inner_iters: self.inner_iters,
            inner_tol: 1e-9,
            alpha: self.alpha,
            dual_period: self.dual_period,
            direct_observation: true,
            m_l1_radius: None,
            baseline_mode: self.solver().is_baseline(),
            include_initial: self.include_initial,
            carry_duals: self.carry_duals,
            linear_rho_x_term: false,
            constants: Some(constants),
            debug_checks: self.debug_checks,
        }
    }
}
