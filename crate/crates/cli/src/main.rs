use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eadmm::harness::config::{ProblemKind, ScheduleKind};
use eadmm::harness::{compare_solvers, rate_sweep, run_experiment, ExperimentConfig, SolverKind};
use eadmm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "eadmm",
    version,
    about = "Epoch-annealed stochastic ADMM experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparse least-squares regression.
    Sparse(Common),
    /// Sparse + low-rank decomposition under independent noise.
    Decompose(Common),
    /// Sparse precision-matrix estimation with the log-det loss.
    Ggm(Common),
    /// Run several solvers on identical streams and print checkpoint errors.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Problem kind when no config file sets one.
        #[arg(long, value_parser = parse_problem)]
        problem: Option<ProblemKind>,
        /// Comma-separated solver list; defaults to projected vs unprojected.
        #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
        solvers: Vec<SolverKind>,
    },
    /// Sweep sparse regression over dimensions and fit the error rate.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 500, 5000])]
        dims: Vec<usize>,
        /// Sparsity per dimension; a single value applies to all.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5])]
        sparsities: Vec<usize>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(short = 'd', long)]
    dim: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    epoch_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<ScheduleKind>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Config file, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_solver(s: &str) -> std::result::Result<SolverKind, String> {
    SolverKind::parse(s).map_err(|e| e.to_string())
}

fn parse_schedule(s: &str) -> std::result::Result<ScheduleKind, String> {
    ScheduleKind::parse(s).map_err(|e| e.to_string())
}

fn parse_problem(s: &str) -> std::result::Result<ProblemKind, String> {
    match s {
        "sparse" => Ok(ProblemKind::Sparse),
        "decompose" => Ok(ProblemKind::Decompose),
        "ggm" => Ok(ProblemKind::Ggm),
        _ => Err(format!("unknown problem `{s}`")),
    }
}

impl Common {
    /// File first, then flags on top.
    fn resolve(&self, problem: Option<ProblemKind>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = problem {
            cfg.problem = p;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(dim, p, sparsity, rank, noise_var, epoch_len, epochs, lambda, schedule, seed);
        if self.radius.is_some() {
            cfg.radius = self.radius;
        }
        if self.solver.is_some() {
            cfg.solver = self.solver;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sparse(c) => single(&c, ProblemKind::Sparse),
        Command::Decompose(c) => single(&c, ProblemKind::Decompose),
        Command::Ggm(c) => single(&c, ProblemKind::Ggm),
        Command::Compare {
            common,
            problem,
            solvers,
        } => {
            let cfg = common.resolve(problem)?;
            let solvers = if solvers.is_empty() {
                match cfg.problem {
                    ProblemKind::Decompose => vec![SolverKind::Reason2, SolverKind::Unprojected],
                    _ => vec![SolverKind::Reason1, SolverKind::StAdmm],
                }
            } else {
                solvers
            };
            let cmp = compare_solvers(&cfg, &solvers)?;
            print!("{}", cmp.to_table());
            Ok(())
        }
        Command::Rate {
            common,
            dims,
            sparsities,
        } => {
            let cfg = common.resolve(Some(ProblemKind::Sparse))?;
            let pairs: Vec<(usize, usize)> = match sparsities.len() {
                1 => dims.iter().map(|&d| (d, sparsities[0])).collect(),
                n if n == dims.len() => dims.iter().copied().zip(sparsities).collect(),
                _ => {
                    return Err(Error::Config(
                        "--sparsities must have one entry or one per dimension".into(),
                    ))
                }
            };
            let report = rate_sweep(&cfg, &pairs)?;
            println!("{:>8} {:>4} {:>12} {:>12}", "d", "s", "sq_err", "residual");
            for (pt, res) in report.points.iter().zip(&report.residuals) {
                println!(
                    "{:>8} {:>4} {:>12.4e} {:>12.4e}",
                    pt.dim, pt.sparsity, pt.sq_err, res
                );
            }
            println!(
                "slope {:.4} intercept {:.4}",
                report.slope, report.intercept
            );
            Ok(())
        }
    }
}

fn single(c: &Common, problem: ProblemKind) -> Result<()> {
    let cfg = c.resolve(Some(problem))?;
    let m = run_experiment(&cfg, &c.out)?;
    let s = &m.summary;
    println!(
        "{} iterations, {} epochs: e(0.02T) {:.4e}  e(0.2T) {:.4e}  e(T) {:.4e}",
        s.total_iters, s.epochs_completed, s.e002T, s.e02T, s.eT
    );
    if let (Some(es), Some(el)) = (s.final_err_s, s.final_err_l) {
        println!("err_S {es:.4e}  err_L {el:.4e}");
    }
    if s.invariant_violations > 0 {
        eprintln!("warning: {} invariant violations", s.invariant_violations);
    }
    println!("wrote {} and {}", m.outputs.trajectory, m.outputs.manifest);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout with status 0; bad flags are config errors.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
