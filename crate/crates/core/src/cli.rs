//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::attainability::{check_attainable, optimal_ratio, optimal_ratio_lp, Limits, Method};
use crate::benchmark::{limited_supply_bounds, Builtin};
use crate::error::{Error, Result};
use crate::evaluate::competitive_ratio;
use crate::grid::EnumerationLimits;
use crate::io::{
    read_benchmark, read_profile, to_json, BenchmarkDoc, OptimalDoc, ProfileDoc, RatioDoc, SimulationDoc,
    SupplyBoundsDoc, VerdictDoc,
};
use crate::rational::parse_rational;
use crate::ratios::{builtin_on_reals, mc_expected, ratio_table};
use crate::synthesis::{render_trace, synthesize, x_to_z, SynthesisConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "optauction", version, about = "Optimal competitive ratios and auctions for digital goods")]
pub struct Cli {
    /// Worker threads for parallel scans (0 lets the runtime decide).
    #[arg(long, global = true, env = "OPTAUCTION_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Upset enumeration, falling back to the LP on grids above the cap.
    Auto,
    Enumeration,
    Lp,
    /// Run both and require agreement.
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check whether a benchmark is attainable at a given ratio.
    Check {
        benchmark: PathBuf,
        #[arg(long)]
        lambda: String,
        /// Only test symmetric upsets (needs a symmetric benchmark).
        #[arg(long)]
        symmetric: bool,
        /// Largest grid handled by upset enumeration.
        #[arg(long, default_value_t = 16)]
        max_points: usize,
    },
    /// Compute the optimal competitive ratio of a benchmark.
    Optimal {
        benchmark: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long)]
        symmetric: bool,
        #[arg(long, default_value_t = 16)]
        max_points: usize,
    },
    /// Build an auction achieving a ratio (the optimal one by default).
    Synthesize {
        benchmark: PathBuf,
        #[arg(long)]
        lambda: Option<String>,
        /// Profile destination; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the per-step tables to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        max_points: usize,
    },
    /// Competitive ratio of an auction profile against a benchmark.
    Evaluate { auction: PathBuf, benchmark: PathBuf },
    /// CSV of the closed-form ratios for n = 2..=max-n.
    Ratios {
        #[arg(long, default_value_t = 10)]
        max_n: usize,
    },
    /// Monte-Carlo expectation of a benchmark under equal-revenue values.
    Simulate {
        #[arg(long)]
        benchmark: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        blocks: usize,
    },
    /// Limited-supply upper and lower benchmarks for supply k.
    Reduce {
        benchmark: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotAttainable { .. } => EXIT_NEGATIVE,
        Error::InvariantViolation(_) | Error::IterationCapExceeded(_) => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

/// Runs a parsed command, writing documents to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if cli.threads > 0 {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match dispatch(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn limits(max_points: usize) -> Limits {
    Limits { enumeration: EnumerationLimits { max_points }, ..Limits::default() }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Check { benchmark, lambda, symmetric, max_points } => {
            let f = read_benchmark(benchmark)?;
            let lambda = parse_rational(lambda)?;
            let verdict = check_attainable(&f, &lambda, *symmetric, limits(*max_points))?;
            emit(out, &to_json(&VerdictDoc::from_verdict(f.grid(), &verdict))?)?;
            Ok(if verdict.attainable { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Optimal { benchmark, method, symmetric, max_points } => {
            let f = read_benchmark(benchmark)?;
            let lim = limits(*max_points);
            let enumerated = |strict: bool| -> Result<_> {
                if strict && !lim.enumeration.admits(f.grid()) {
                    return Err(Error::DomainTooLarge { points: f.grid().num_points(), cap: *max_points });
                }
                optimal_ratio(&f, *symmetric, lim)
            };
            let doc = match method {
                MethodArg::Auto => OptimalDoc::from_optimal(f.grid(), &enumerated(false)?),
                MethodArg::Enumeration => OptimalDoc::from_optimal(f.grid(), &enumerated(true)?),
                MethodArg::Lp => OptimalDoc::new(f.grid(), &optimal_ratio_lp(&f, lim)?, None, Method::Lp.name()),
                MethodArg::Both => {
                    let by_upsets = enumerated(true)?;
                    let by_lp = optimal_ratio_lp(&f, lim)?;
                    if by_upsets.lambda != by_lp {
                        return Err(Error::InvariantViolation(format!(
                            "enumeration gives {} but the LP gives {}",
                            by_upsets.lambda, by_lp
                        )));
                    }
                    OptimalDoc::new(f.grid(), &by_lp, by_upsets.witness.as_ref(), "both")
                }
            };
            emit(out, &to_json(&doc)?)?;
            Ok(EXIT_OK)
        }
        Command::Synthesize { benchmark, lambda, output, trace, max_points } => {
            let f = read_benchmark(benchmark)?;
            let lim = limits(*max_points);
            let lambda = match lambda {
                Some(text) => parse_rational(text)?,
                None => optimal_ratio(&f, false, lim)?.lambda,
            };
            let config =
                SynthesisConfig { limits: lim.enumeration, record_trace: trace.is_some(), ..Default::default() };
            let result = synthesize(&f, &lambda, &config)?;
            if let Some(path) = trace {
                std::fs::write(path, render_trace(f.grid(), &result.trace))?;
            }
            let doc = to_json(&ProfileDoc::from_profile(&x_to_z(&result.revenue)?))?;
            match output {
                Some(path) => std::fs::write(path, doc + "\n")?,
                None => emit(out, &doc)?,
            }
            Ok(EXIT_OK)
        }
        Command::Evaluate { auction, benchmark } => {
            let profile = read_profile(auction)?;
            let f = read_benchmark(benchmark)?;
            emit(out, &to_json(&RatioDoc::from_ratio(&competitive_ratio(&profile, &f)?))?)?;
            Ok(EXIT_OK)
        }
        Command::Ratios { max_n } => {
            emit(out, &ratio_table(*max_n)?)?;
            Ok(EXIT_OK)
        }
        Command::Simulate { benchmark, n, samples, seed, blocks } => {
            let which: Builtin = benchmark.parse()?;
            if *n < 2 {
                return Err(Error::TooFewBidders(*n));
            }
            let est = mc_expected(|b| builtin_on_reals(which, b), *n, *samples, *blocks, *seed)?;
            let doc = SimulationDoc {
                benchmark: which.name().to_string(),
                n: *n,
                samples: *samples,
                blocks: *blocks,
                seed: *seed,
                estimate: est.estimate,
                error: est.error.is_finite().then_some(est.error),
            };
            emit(out, &to_json(&doc)?)?;
            Ok(EXIT_OK)
        }
        Command::Reduce { benchmark, k } => {
            let f = read_benchmark(benchmark)?;
            let (upper, lower) = limited_supply_bounds(&f, *k)?;
            let doc = SupplyBoundsDoc {
                k: *k,
                upper: BenchmarkDoc::from_table(&upper),
                lower: BenchmarkDoc::from_table(&lower),
            };
            emit(out, &to_json(&doc)?)?;
            Ok(EXIT_OK)
        }
    }
}
