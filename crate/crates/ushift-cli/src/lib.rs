//! `ushift` command line: one subcommand per experiment, shared TOML config,
//! deterministic CSV + summary outputs.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid configuration, 4 experiment
//! failure (including the degenerate-variance refusal).

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use ushift_core::dependence::{
    self, bounds_available, summability_report, TheoremHypothesis, Verdict,
};
use ushift_core::hoeffding::{generalized_decomposition, DecomposeConfig};
use ushift_core::limits::{
    clt_experiment, lil_statistic, lln_experiment, remainder_decay,
};
use ushift_core::processes::generate_path;
use ushift_core::report::ExperimentReport;
use ushift_core::rng::RngStream;

pub use config::{load_config, BuiltConfig};
pub use output::write_report;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
}

impl From<ushift_core::Error> for AppError {
    fn from(e: ushift_core::Error) -> Self {
        AppError::Run(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ushift",
    version,
    about = "Simulation and verification toolkit for U-statistics of functionals of i.i.d. sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// TOML configuration with [process], [kernel] and [experiment] sections
    #[arg(long)]
    config: PathBuf,
    /// root seed; every statistic is a pure function of (config, seed)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// output directory (default: $USHIFT_OUT or the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads; affects wall-clock only, never results
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a sample path X_1..X_n
    Simulate(CommonArgs),
    /// Per-level block decomposition with the exact-identity check
    Decompose(CommonArgs),
    /// Dependence coefficients theta_{l,p} with their analytic bounds
    Theta(CommonArgs),
    /// Central limit theorem experiment at the n^(-3/2) normalization
    Clt(CommonArgs),
    /// Marcinkiewicz law of large numbers trend experiment
    Lln(CommonArgs),
    /// Bounded law of the iterated logarithm sup statistic
    Lil(CommonArgs),
    /// Decay of the decomposition remainder terms along an n grid
    Remainders(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(c)
            | Command::Decompose(c)
            | Command::Theta(c)
            | Command::Clt(c)
            | Command::Lln(c)
            | Command::Lil(c)
            | Command::Remainders(c) => c,
        }
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(AppError::Config(msg)) => {
            eprintln!("ushift: config error: {msg}");
            3
        }
        Err(AppError::Run(msg)) => {
            eprintln!("ushift: {msg}");
            4
        }
    }
}

fn execute(command: &Command) -> Result<(), AppError> {
    let common = command.common();
    let built = load_config(&common.config)?;
    let out_dir = common
        .out
        .clone()
        .or_else(|| std::env::var_os("USHIFT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let started = std::time::Instant::now();
    let mut report = with_worker_pool(common.workers, || dispatch(command, &built, common.seed))??;
    report.runtime = started.elapsed();
    let (csv, summary) = write_report(&out_dir, &report, &built.hash, &built.echo_toml)?;
    eprintln!(
        "ushift {}: wrote {} and {} in {:?}",
        report.kind,
        csv.display(),
        summary.display(),
        report.runtime
    );
    Ok(())
}

fn with_worker_pool<R: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> R + Send,
) -> Result<R, AppError> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            if w == 0 {
                return Err(AppError::Config("--workers must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| AppError::Run(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn dispatch(command: &Command, built: &BuiltConfig, seed: u64) -> Result<ExperimentReport, AppError> {
    let stream = RngStream::root(seed);
    let exp = &built.experiment;
    let cfg = exp.experiment_config();
    let w = built.process.window_halfwidth();
    match command {
        Command::Simulate(_) => {
            let n = exp.require("n", "simulate")?;
            let path = generate_path(&built.process, n, stream)?;
            let mut report =
                ExperimentReport::new("simulate", seed, vec!["j".into(), "x".into()]);
            report.rows = path
                .values
                .iter()
                .enumerate()
                .map(|(i, &x)| vec![(i + 1) as f64, x])
                .collect();
            report.push_summary("n", n);
            report.push_summary("window_halfwidth", w);
            report.push_summary("mean", ushift_core::numeric::mean(&path.values));
            report.push_summary("variance", ushift_core::numeric::sample_variance(&path.values));
            Ok(report)
        }
        Command::Decompose(_) => {
            let n = exp.require("n", "decompose")?;
            let l_max = exp.l_max.unwrap_or(w);
            let dc = DecomposeConfig {
                tail_samples: cfg.tail_samples,
                moment_reps: cfg.moment_reps,
                ensemble_size: cfg.ensemble_size,
            };
            let g = generalized_decomposition(&built.kernel, &built.process, n, l_max, &dc, stream)?;
            let mut report = ExperimentReport::new(
                "decompose",
                seed,
                vec![
                    "level".into(),
                    "block_size".into(),
                    "blocks".into(),
                    "linear".into(),
                    "linear_adjust".into(),
                    "degenerate_sum".into(),
                    "r11".into(),
                    "r12".into(),
                    "r2".into(),
                    "r3".into(),
                    "r4".into(),
                    "r5".into(),
                    "r6".into(),
                    "direct".into(),
                    "residual".into(),
                    "relative_residual".into(),
                ],
            );
            for lvl in &g.levels {
                let (bs, m) = lvl.block.map_or((0, 0), |b| (b.block_size, b.m));
                let mut row = vec![
                    lvl.ell as f64,
                    bs as f64,
                    m as f64,
                    lvl.linear_part,
                    lvl.linear_adjust,
                    lvl.degenerate_total(),
                ];
                row.extend(lvl.remainders.as_array());
                row.push(lvl.direct);
                row.push(lvl.residual);
                row.push(lvl.relative_residual());
                report.rows.push(row);
            }
            report.push_summary("n", n);
            report.push_summary("l_max", l_max);
            report.push_summary("u_n", g.u_n);
            report.push_summary("expected_u", g.expected_u);
            report.push_summary("centered", g.centered);
            report.push_summary("parts_total", g.parts_total);
            report.push_summary("total_residual", g.total_residual);
            report.push_summary("relative_residual", g.relative_residual);
            Ok(report)
        }
        Command::Theta(_) => {
            let p = exp.p.unwrap_or(2.0);
            if p < 1.0 {
                return Err(AppError::Config(format!("experiment.p must be >= 1, got {p}")));
            }
            let l_max = exp.l_max.unwrap_or(w + 1);
            let reps = exp.replications.unwrap_or(100_000);
            if reps < 30 {
                return Err(AppError::Config(format!(
                    "experiment.replications must be at least 30 for theta, got {reps}"
                )));
            }
            let profile = dependence::dependence_profile(
                &built.kernel,
                &built.process,
                l_max,
                p,
                reps,
                cfg.tail_samples,
                stream,
            )?;
            let (has_holder, has_variance) = bounds_available(&built.kernel);
            let mut report = ExperimentReport::new(
                "theta",
                seed,
                vec![
                    "level".into(),
                    "p".into(),
                    "theta_hat".into(),
                    "se".into(),
                    "j_star".into(),
                    "holder_bound".into(),
                    "holder_bound_se".into(),
                    "variance_bound_printed".into(),
                    "variance_bound_printed_se".into(),
                    "variance_bound_proof".into(),
                    "variance_bound_proof_se".into(),
                ],
            );
            for entry in &profile.entries {
                let mut row = vec![
                    entry.ell as f64,
                    p,
                    entry.theta_hat,
                    entry.se,
                    entry.j_star as f64,
                ];
                if has_holder && entry.ell >= 1 {
                    let b = dependence::holder_theta_bound(
                        &built.kernel,
                        &built.process,
                        entry.ell,
                        p,
                        reps.min(50_000),
                        cfg.tail_samples,
                        stream.child(0xb0).child(entry.ell as u64),
                    )?;
                    row.push(b.value);
                    row.push(b.se);
                } else {
                    row.push(f64::NAN);
                    row.push(f64::NAN);
                }
                if has_variance && entry.ell >= 1 {
                    let b = dependence::variance_kernel_theta_bound(
                        &built.process,
                        entry.ell,
                        p,
                        reps.min(50_000),
                        cfg.tail_samples,
                        stream.child(0xb1).child(entry.ell as u64),
                    )?;
                    row.extend([b.printed.value, b.printed.se, b.proof.value, b.proof.se]);
                } else {
                    row.extend([f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
                }
                report.rows.push(row);
            }
            report.push_summary("p", p);
            report.push_summary("l_max", l_max);
            report.push_summary("replications", reps);
            let hypotheses: Vec<(&str, TheoremHypothesis)> = if (p - 1.0).abs() <= 1e-12 {
                vec![("clt_l2_theta1", TheoremHypothesis::Clt), ("lln", TheoremHypothesis::Lln { p })]
            } else if (p - 2.0).abs() <= 1e-12 {
                vec![("clt_sqrt_theta2", TheoremHypothesis::Clt), ("lil", TheoremHypothesis::Lil)]
            } else if (1.0..2.0).contains(&p) {
                vec![("lln", TheoremHypothesis::Lln { p })]
            } else {
                vec![]
            };
            for (name, hyp) in hypotheses {
                let rep = summability_report(&profile, hyp)?;
                report.push_summary(
                    &format!("summability_{name}"),
                    rep.partial_sums.last().copied().unwrap_or(0.0),
                );
                report.push_summary(
                    &format!("verdict_{name}"),
                    match rep.verdict {
                        Verdict::FiniteExact => "finite (exact)",
                        Verdict::Plateau => "plateau",
                        Verdict::NonPlateau => "non-plateau",
                    },
                );
            }
            Ok(report)
        }
        Command::Clt(_) => {
            let n = exp.require("n", "clt")?;
            let reps = exp.require("replications", "clt")?;
            let k_max = exp.k_max.unwrap_or(2 * w + 2);
            Ok(clt_experiment(&built.kernel, &built.process, n, reps, k_max, &cfg, stream)?)
        }
        Command::Lln(_) => {
            let p = exp.require_p("lln")?;
            if !(1.0..2.0).contains(&p) {
                return Err(AppError::Config(format!("experiment.p: p in [1,2) required, got {p}")));
            }
            let n_max = exp.require("n_max", "lln")?;
            let reps = exp.require("replications", "lln")?;
            Ok(lln_experiment(
                &built.kernel,
                &built.process,
                p,
                n_max,
                exp.checkpoints.as_deref(),
                reps,
                &cfg,
                stream,
            )?)
        }
        Command::Lil(_) => {
            let n_max = exp.require("n_max", "lil")?;
            let reps = exp.require("replications", "lil")?;
            Ok(lil_statistic(&built.kernel, &built.process, n_max, reps, &cfg, stream)?)
        }
        Command::Remainders(_) => {
            let grid = exp
                .n_grid
                .clone()
                .unwrap_or_else(|| vec![200, 400, 800, 1600]);
            let l_max = exp.l_max.unwrap_or(w.max(1));
            let reps = exp.replications.unwrap_or(48);
            Ok(remainder_decay(&built.kernel, &built.process, &grid, l_max, reps, &cfg, stream)?)
        }
    }
}
