use std::fmt::Write;

use super::config::{ExperimentConfig, SolverKind};
use super::run::{execute, RunOutcome};
use crate::error::{arg, Result};

#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct ComparisonRow {
    pub solver: SolverKind,
    pub e002T: f64,
    pub e02T: f64,
    pub eT: f64,
    pub final_error: f64,
    pub final_err_s: Option<f64>,
    pub final_err_l: Option<f64>,
    pub total_iters: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub outcomes: Vec<RunOutcome>,
}

impl Comparison {
    pub fn row(&self, solver: SolverKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.solver == solver)
    }

    /// Aligned text table. Columns are errors after fixed iteration counts;
    /// wall time is not compared.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "solver", "iters", "e(0.02T)", "e(0.2T)", "e(T)", "err_S", "err_L"
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12} {:>12}",
                r.solver.name(),
                r.total_iters,
                r.e002T,
                r.e02T,
                r.eT,
                opt(r.final_err_s),
                opt(r.final_err_l)
            );
        }
        out
    }
}

/// Runs every solver on the same configuration. The generator seed depends
/// only on `base.seed`, so all variants see identical sample streams.
pub fn compare_solvers(base: &ExperimentConfig, solvers: &[SolverKind]) -> Result<Comparison> {
    if solvers.len() < 2 {
        return arg("comparison needs at least two solver variants");
    }
    let mut rows = Vec::with_capacity(solvers.len());
    let mut outcomes = Vec::with_capacity(solvers.len());
    for &solver in solvers {
        let cfg = ExperimentConfig {
            solver: Some(solver),
            ..base.clone()
        };
        let out = execute(&cfg)?;
        let s = &out.summary;
        rows.push(ComparisonRow {
            solver,
            e002T: s.e002T,
            e02T: s.e02T,
            eT: s.eT,
            final_error: s.final_error,
            final_err_s: s.final_err_s,
            final_err_l: s.final_err_l,
            total_iters: s.total_iters,
        });
        outcomes.push(out);
    }
    Ok(Comparison { rows, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_two_variants() {
        assert!(compare_solvers(&ExperimentConfig::default(), &[SolverKind::Reason1]).is_err());
    }

    #[test]
    fn identical_variants_give_identical_columns() {
        let cfg = ExperimentConfig {
            dim: 20,
            epoch_len: 100,
            epochs: 2,
            ..Default::default()
        };
        let c = compare_solvers(&cfg, &[SolverKind::Reason1, SolverKind::Reason1]).unwrap();
        assert_eq!(c.rows[0], c.rows[1]);
        assert_eq!(c.outcomes[0].trajectory, c.outcomes[1].trajectory);
        assert_eq!(c.to_table().lines().count(), 3);
    }
}
