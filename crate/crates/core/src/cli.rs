//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use nalgebra::DVector;

use crate::condense::condense;
use crate::enumeration::{alg1_baseline, alg4_dp, Schedule};
use crate::io::{read_counters, write_counters, CounterRow, PartitionFile, ProblemFile};
use crate::plot::{curves_csv, partition_svg, region_csv};
use crate::qp::{sample_feasible_states, solve_qp};
use crate::regions::{build_pwa, PwaLaw};
use crate::Error;

/// Environment variable overriding the sampling seed.
pub const SEED_VAR: &str = "DPMPQP_SEED";
/// Largest absolute deviation accepted by `solve --verify`.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "dpmpqp",
    version,
    about = "Explicit constrained LQR by active-set enumeration"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> &'static str {
        match self.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the explicit solution and operation counters.
    Solve(SolveArgs),
    /// Evaluate a stored partition at a state.
    Eval(EvalArgs),
    /// Write partition drawings and counter curves.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Dp,
    Baseline,
    Both,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "dp")]
    pub algorithm: Algorithm,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_max: u64,
    #[arg(long)]
    pub out_partition: Option<PathBuf>,
    #[arg(long)]
    pub out_counters: Option<PathBuf>,
    /// Largest horizon for which `both` also runs the baseline.
    #[arg(long, default_value_t = 8)]
    pub baseline_max: usize,
    /// Evaluate candidates of one cardinality layer on all cores.
    #[arg(long)]
    pub parallel: bool,
    /// Compare the law with the online QP at this many sampled feasible states.
    #[arg(long, default_value_t = 0)]
    pub verify: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub partition: PathBuf,
    /// Comma-separated state, e.g. "1.5,-0.2".
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub counters: Option<PathBuf>,
    /// Partition drawing; `.svg` for a picture (two states only), anything else for a region
    /// table in CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Counter curves; defaults to the `--out` path with extension `curves.csv`.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

macro_rules! lift {
    ($e:expr) => {
        $e.map_err(|e| Failure::from(Error::from(e)))
    };
}

pub fn seed() -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs the command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli.command, &mut out) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Solve(a) => solve(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Plot(a) => plot(a, out),
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })
}

fn file_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let problem = lift!(ProblemFile::load(&args.input))?;
    let ocp = lift!(problem.to_ocp())?;
    let schedule = if args.parallel {
        Schedule::Parallel
    } else {
        Schedule::Serial
    };
    let n_max = args.n_max as usize;
    let mut rows = Vec::new();

    let (law, label) = match args.algorithm {
        Algorithm::Dp | Algorithm::Both => {
            let dp = lift!(alg4_dp(&ocp, n_max, schedule))?;
            for h in &dp.history {
                rows.push(CounterRow::new("dp", h.horizon, &h.counters, Some(h.s_size), h.m_size));
            }
            let mut law = lift!(build_pwa(&dp.qp, &dp.explicit))?;
            law.finitely_determined = dp.finitely_determined;
            law.n_reached = dp.n_reached;
            law.counters = Some(dp.counters());
            emit(out, format_args!("N_reached: {}", dp.n_reached))?;
            emit(out, format_args!("finitely_determined: {}", dp.finitely_determined))?;
            emit(out, format_args!("regions: {}", law.regions.len()))?;
            if args.algorithm == Algorithm::Both {
                let upto = n_max.min(args.baseline_max);
                for n in 1..=upto {
                    let qp = lift!(condense(&ocp, n))?;
                    let base = lift!(alg1_baseline(&qp, schedule))?;
                    rows.push(CounterRow::new(
                        "baseline",
                        n,
                        &base.counters,
                        None,
                        base.explicit.len(),
                    ));
                    // beyond the fixed point the dp solution stays that of the last horizon
                    let dp_sets = &dp.history[(n - 1).min(dp.history.len() - 1)].m_sets;
                    let same = *dp_sets == base.explicit;
                    emit(out, format_args!("M_{n} identical: {same}"))?;
                    if !same {
                        return Err(Failure {
                            code: 3,
                            message: format!("dp and baseline disagree on M_{n}"),
                        });
                    }
                }
                if upto < n_max {
                    info!("baseline capped at N = {upto}");
                }
            }
            (law, "dp")
        }
        Algorithm::Baseline => {
            let mut last = None;
            for n in 1..=n_max {
                let qp = lift!(condense(&ocp, n))?;
                let base = lift!(alg1_baseline(&qp, schedule))?;
                rows.push(CounterRow::new(
                    "baseline",
                    n,
                    &base.counters,
                    None,
                    base.explicit.len(),
                ));
                last = Some((qp, base));
            }
            let (qp, base) = last.expect("n_max >= 1");
            let mut law = lift!(build_pwa(&qp, &base.explicit))?;
            law.counters = Some(base.counters);
            emit(out, format_args!("N_reached: {n_max}"))?;
            emit(out, format_args!("finitely_determined: not checked by baseline"))?;
            emit(out, format_args!("regions: {}", law.regions.len()))?;
            (law, "baseline")
        }
    };

    if args.verify > 0 {
        let qp = lift!(condense(&ocp, law.horizon))?;
        let states = lift!(sample_feasible_states(&qp, ocp.x_set(), args.verify, seed()))?;
        let mut worst = 0.0f64;
        for x in &states {
            let Some(sol) = lift!(solve_qp(&qp, x))? else { continue };
            worst = match law.evaluate(x) {
                Some(u) => worst.max((u - sol.first_input(law.m)).amax()),
                None => f64::INFINITY,
            };
        }
        emit(
            out,
            format_args!("verify: {} states, max deviation {worst:e}", states.len()),
        )?;
        if worst > VERIFY_TOL {
            return Err(Failure {
                code: 3,
                message: format!("explicit law deviates from the online QP by {worst:e}"),
            });
        }
    }
    if let Some(path) = &args.out_partition {
        lift!(PartitionFile::from_law(&law, label).save(path))?;
    }
    if let Some(path) = &args.out_counters {
        lift!(write_counters(path, &rows))?;
    }
    Ok(())
}

fn parse_state(text: &str, n: usize) -> Result<DVector<f64>, Failure> {
    let malformed = |m: String| Failure { code: 2, message: m };
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| malformed(format!("malformed state {text:?}: {e}")))?;
    if values.len() != n || values.iter().any(|v| !v.is_finite()) {
        return Err(malformed(format!("state must have {n} finite entries, got {text:?}")));
    }
    Ok(DVector::from_vec(values))
}

fn load_law(path: &std::path::Path) -> Result<PwaLaw, Failure> {
    let file = lift!(PartitionFile::load(path))?;
    lift!(file.to_law())
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let law = load_law(&args.partition)?;
    let x = parse_state(&args.x, law.n)?;
    match law.evaluate(&x) {
        Some(u) => {
            // adding zero turns -0 into 0
            let parts: Vec<String> = u.iter().map(|v| (v + 0.0).to_string()).collect();
            emit(out, format_args!("{}", parts.join(",")))
        }
        None => emit(out, format_args!("infeasible")),
    }
}

fn plot(args: &PlotArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let law = load_law(&args.partition)?;
    let wants_svg = args.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    let body = if wants_svg {
        partition_svg(&law).ok_or_else(|| Failure {
            code: 4,
            message: format!("an SVG drawing needs two states, the partition has {}", law.n),
        })?
    } else {
        region_csv(&law)
    };
    std::fs::write(&args.out, body).map_err(|e| file_failure(&args.out, e))?;
    emit(out, format_args!("wrote {}", args.out.display()))?;
    if let Some(counters) = &args.counters {
        let rows = lift!(read_counters(counters))?;
        let path = args
            .curves
            .clone()
            .unwrap_or_else(|| args.out.with_extension("curves.csv"));
        std::fs::write(&path, curves_csv(&rows)).map_err(|e| file_failure(&path, e))?;
        emit(out, format_args!("wrote {}", path.display()))?;
    } else if args.curves.is_some() {
        warn!("--curves ignored without --counters");
    }
    Ok(())
}
