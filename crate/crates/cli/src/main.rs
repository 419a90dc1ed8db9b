//! Command-line front end for the partial-update solvers.

mod output;
mod reproduce;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use partial_updates::{
    alternate_minimize_multistart, average_age, best_at_beta_with, brute_force_frontier_with,
    greedy_partition, optimal_lengths, optimal_pmf, simulate_age, zipf, AltMinSolution, BetaRule,
    BruteForceOptions, CodeLengths, Error, IterTrace, PartitionPointRecord, Pmf, SolverConfig,
    DEFAULT_BUDGET, DEFAULT_TOL_BETA,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use output::{to_json, Csv, Field};

#[derive(Parser)]
#[command(
    name = "partial-updates",
    version,
    about = "Age-optimal partial updates"
)]
struct Cli {
    #[command(flatten)]
    solver: SolverArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Root-finding tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_root: f64,
    /// Stationarity tolerance for alternating minimization.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_kkt: f64,
    /// Probabilities at or below this count as zero.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_prob: f64,
    /// Round limit for alternating minimization.
    #[arg(long, global = true, default_value_t = 5000)]
    max_iters: usize,
    /// Seed for random restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self, fixed_point_mean_len: bool) -> Result<SolverConfig, CliError> {
        let cfg = SolverConfig {
            tol_root: self.tol_root,
            tol_kkt: self.tol_kkt,
            tol_prob: self.tol_prob,
            max_iters: self.max_iters,
            seed: self.seed,
            fixed_point_mean_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print a Zipf(s, n) pmf as a JSON array.
    Zipf {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        n: usize,
    },
    /// Age-optimal real-valued lengths for a pmf.
    SolveLengths {
        #[arg(long)]
        pmf: PathBuf,
    },
    /// Entropy-constrained pmf step for fixed lengths.
    SolvePmf {
        #[arg(long)]
        lengths: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        mean_len: f64,
        #[arg(long)]
        lambda: f64,
        /// Re-solve until E[L] is consistent with the returned pmf.
        #[arg(long)]
        fixed_point_el: bool,
    },
    /// Alternating minimization from an initial pmf.
    Altmin {
        #[arg(long)]
        pmf: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Extra random starting pmfs.
        #[arg(long, default_value_t = 0)]
        restarts: usize,
        #[arg(long)]
        fixed_point_el: bool,
        /// Write the trace CSV here instead of after the JSON on stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exhaustive search over partitions into k blocks.
    BruteForce {
        #[arg(long)]
        pmf: PathBuf,
        #[arg(long)]
        k: usize,
        /// Report the point selected at this entropy.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_TOL_BETA)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Select::Nearest)]
        select: Select,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Refuse runs that would visit more partitions than this.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        /// Write the points CSV here instead of stdout.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Greedy partition towards a target pmf.
    Greedy {
        #[arg(long)]
        pmf: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Monte-Carlo age against the analytic value.
    Simulate {
        #[arg(long)]
        pmf: PathBuf,
        #[arg(long)]
        lengths: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        updates: u64,
    },
    /// Write the data files behind the figures.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Select {
    /// Entropy closest to beta, then lowest age.
    Nearest,
    /// Lowest age within the window.
    MinAge,
}

impl From<Select> for BetaRule {
    fn from(s: Select) -> Self {
        match s {
            Select::Nearest => BetaRule::NearestEntropy,
            Select::MinAge => BetaRule::MinAge,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    FigFrontier,
    FigPartitions,
    FigAltmin,
    All,
}

#[derive(Debug)]
pub enum CliError {
    Solver(Error),
    Io(PathBuf, io::Error),
    Parse(PathBuf, serde_json::Error),
    Json(serde_json::Error),
    /// Output was produced but the solver did not converge.
    NotConverged,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Parse(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Json(e) => write!(f, "{e}"),
            CliError::NotConverged => write!(f, "did not reach the stationarity tolerance"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(..) | CliError::Json(_) => 1,
            CliError::Parse(..) => 2,
            CliError::NotConverged => 3,
            CliError::Solver(e) => match e {
                Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::BudgetExceeded { .. } => 2,
                Error::NonConvergence { .. } | Error::NoRoot { .. } => 3,
                Error::Infeasible(_) | Error::NoPointNearBeta { .. } => 4,
            },
        }
    }
}

/// Pmf files written by this tool carry six significant digits, so sums
/// within this distance of one are renormalized on input.
const PMF_INPUT_SLACK: f64 = 1e-5;

fn read_pmf(path: &Path) -> Result<Pmf, CliError> {
    let raw: Vec<f64> = read_json(path)?;
    let total: f64 = raw.iter().sum();
    if (total - 1.0).abs() <= PMF_INPUT_SLACK && raw.iter().all(|&x| x >= 0.0) {
        Ok(Pmf::from_weights(raw)?)
    } else {
        Ok(Pmf::new(raw)?)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(path.to_path_buf(), e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn print(s: &str) -> Result<(), CliError> {
    io::stdout()
        .write_all(s.as_bytes())
        .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e))
}

#[derive(Serialize)]
struct SimulateReport {
    analytic: f64,
    empirical: f64,
    abs_err: f64,
}

#[derive(Serialize)]
pub struct AltMinReport {
    pub beta: f64,
    pub converged: bool,
    pub rounds: usize,
    pub start: usize,
    pub age: f64,
    pub entropy: f64,
    pub pmf: Pmf,
    pub lengths: CodeLengths,
    pub lambda: f64,
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub res9: f64,
    pub res10: f64,
    pub age_monotone_after_feasible: bool,
}

impl AltMinReport {
    pub fn new(beta: f64, s: &AltMinSolution) -> Self {
        AltMinReport {
            beta,
            converged: s.converged,
            rounds: s.rounds,
            start: s.start,
            age: s.age(),
            entropy: s.pmf.pmf.entropy(),
            pmf: s.pmf.pmf.clone(),
            lengths: s.lengths.lengths.clone(),
            lambda: s.lengths.lambda,
            theta: s.lengths.theta,
            gamma: s.pmf.gamma,
            sigma: s.pmf.sigma,
            res9: s.res_lengths,
            res10: s.res_pmf,
            age_monotone_after_feasible: s.trace.age_monotone_after_feasible(),
        }
    }
}

pub fn trace_csv(trace: &IterTrace, beta: Option<f64>) -> Csv {
    let header: &[&str] = if beta.is_some() {
        &["beta", "iter", "age", "entropy", "res9", "res10"]
    } else {
        &["iter", "age", "entropy", "res9", "res10"]
    };
    let mut csv = Csv::new(header);
    for r in &trace.records {
        let mut fields = Vec::with_capacity(6);
        if let Some(b) = beta {
            fields.push(Field::Num(b));
        }
        fields.extend([
            Field::Int(r.iter as u64),
            Field::Num(r.age),
            Field::Num(r.entropy),
            Field::Num(r.res_lengths),
            Field::Num(r.res_pmf),
        ]);
        csv.row(&fields);
    }
    csv
}

pub fn points_csv<'a>(
    points: impl IntoIterator<Item = &'a partial_updates::PartitionPoint>,
) -> Csv {
    let mut csv = Csv::new(&["rgs", "entropy", "age"]);
    for pt in points {
        let rgs = pt.partition.rgs_string();
        csv.row(&[
            Field::Text(&rgs),
            Field::Num(pt.entropy),
            Field::Num(pt.age),
        ]);
    }
    csv
}

fn run(cli: Cli) -> Result<(), CliError> {
    let solver = &cli.solver;
    match cli.command {
        Command::Zipf { s, n } => print(&to_json(&zipf(s, n)?)?),
        Command::SolveLengths { pmf } => {
            let p = read_pmf(&pmf)?;
            print(&to_json(&optimal_lengths(&p, &solver.config(false)?)?)?)
        }
        Command::SolvePmf {
            lengths,
            beta,
            mean_len,
            lambda,
            fixed_point_el,
        } => {
            let l: CodeLengths = read_json(&lengths)?;
            let cfg = solver.config(fixed_point_el)?;
            print(&to_json(&optimal_pmf(&l, beta, mean_len, lambda, &cfg)?)?)
        }
        Command::Altmin {
            pmf,
            beta,
            restarts,
            fixed_point_el,
            trace,
        } => {
            let p = read_pmf(&pmf)?;
            let cfg = solver.config(fixed_point_el)?;
            let sol = alternate_minimize_multistart(&p, beta, restarts, &cfg)?;
            let csv = trace_csv(&sol.trace, None).finish();
            let json = to_json(&AltMinReport::new(beta, &sol))?;
            match trace {
                Some(path) => {
                    write_file(&path, &csv)?;
                    print(&json)?;
                }
                None => print(&format!("{json}\n{csv}"))?,
            }
            if sol.converged {
                Ok(())
            } else {
                Err(CliError::NotConverged)
            }
        }
        Command::BruteForce {
            pmf,
            k,
            beta,
            tol,
            select,
            jobs,
            budget,
            points,
        } => {
            let p = read_pmf(&pmf)?;
            let cfg = solver.config(false)?;
            let frontier =
                brute_force_frontier_with(&p, k, &cfg, &BruteForceOptions { budget, jobs })?;
            let csv = points_csv(&frontier.points).finish();
            let best = beta
                .map(|b| best_at_beta_with(&frontier.points, b, tol, select.into()))
                .transpose()?;
            let json = best
                .as_ref()
                .map(|b| to_json(&PartitionPointRecord::from(b)))
                .transpose()?;
            match (points, json) {
                (Some(path), json) => {
                    write_file(&path, &csv)?;
                    if let Some(j) = json {
                        print(&j)?;
                    }
                }
                (None, Some(j)) => print(&format!("{csv}\n{j}"))?,
                (None, None) => print(&csv)?,
            }
            Ok(())
        }
        Command::Greedy { pmf, target } => {
            let p = read_pmf(&pmf)?;
            let t = read_pmf(&target)?;
            let pt = greedy_partition(&p, &t, &solver.config(false)?)?;
            print(&to_json(&PartitionPointRecord::from(&pt))?)
        }
        Command::Simulate {
            pmf,
            lengths,
            updates,
        } => {
            let p = read_pmf(&pmf)?;
            let l: CodeLengths = read_json(&lengths)?;
            let analytic = average_age(&p, &l)?.delta;
            let empirical = simulate_age(&p, &l, updates, solver.seed)?;
            print(&to_json(&SimulateReport {
                analytic,
                empirical,
                abs_err: (empirical - analytic).abs(),
            })?)
        }
        Command::Reproduce {
            figure,
            out_dir,
            jobs,
        } => {
            let written = reproduce::run(figure, &out_dir, jobs, &solver.config(false)?)?;
            let mut listing = String::new();
            for path in written {
                listing.push_str(&path.display().to_string());
                listing.push('\n');
            }
            print(&listing)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
