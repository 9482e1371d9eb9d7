//! The `bellforge` command-line front end.
//!
//! Every command returns an exit code: 0 when its assertions hold, 1 when they do not
//! and 2 for usage, file or schema errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{create_file, read_file, Error, Result};
use crate::fock::Occupation;
use crate::interferometer::Circuit;
use crate::optimize::{certify, fmt17, optimize, GradientMode, OptimizerConfig};
use crate::permanent::{permanent_naive, permanent_ryser, ComplexMatrix};
use crate::schemes::SchemeSpec;
use crate::simulate::{evolve, outcome_table, AmplitudeEntry, OutcomeEntry};

/// Largest matrix accepted by `bench-permanent`.
pub const MAX_BENCH_SIZE: usize = 14;
/// Sizes up to this are cross-checked against the naive permanent.
pub const NAIVE_CHECK_SIZE: usize = 7;

#[derive(Debug, Parser)]
#[command(
    name = "bellforge",
    version,
    about = "Heralded linear-optical Bell-state sources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify a circuit (or circuit pair) against a scheme.
    Verify(VerifyArgs),
    /// Search for a circuit realizing a scheme.
    Optimize(OptimizeArgs),
    /// Evolve a Fock basis state through a circuit.
    Evolve(EvolveArgs),
    /// Time the Ryser permanent.
    BenchPermanent(BenchArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Circuit file; give two for a two-stage scheme, or one file holding both.
    #[arg(long, num_args = 1..=2, required = true)]
    pub circuit: Vec<PathBuf>,
    /// Scheme name (six-mode, five-mode, two-stage) or scheme config file.
    #[arg(long)]
    pub scheme: String,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GradientArg {
    Analytic,
    Fd,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Scheme name or scheme config file.
    #[arg(long)]
    pub scheme: String,
    /// Probability exponent; defaults per scheme.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Sparsity penalty weight.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = GradientArg::Analytic)]
    pub gradient: GradientArg,
    #[arg(long, default_value_t = 5000)]
    pub max_iterations: usize,
    /// Skip refinement and element removal.
    #[arg(long)]
    pub no_refine: bool,
    /// Circuit output (a JSON array for two-stage schemes).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Certification report of the best circuit.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    /// Input occupation, one digit per mode (spaces allowed) or comma-separated.
    #[arg(long)]
    pub input: String,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Scheme whose auxiliary modes define the outcome table.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Auxiliary modes for the outcome table when no scheme is given.
    #[arg(long, value_delimiter = ',')]
    pub aux: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// A size or an inclusive range such as `2..12` or `2-12`.
    #[arg(long, default_value = "2..12")]
    pub sizes: String,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Output of `evolve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub input: String,
    pub norm: f64,
    pub amplitudes: Vec<AmplitudeEntry>,
    pub aux_modes: Vec<usize>,
    pub outcome_table: Vec<OutcomeEntry>,
}

/// Reads circuits from one or two files; a file may hold a single circuit or an array.
pub fn load_circuits(paths: &[PathBuf]) -> Result<Vec<Circuit>> {
    let mut out = Vec::new();
    for path in paths {
        let text = read_file(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        match value {
            serde_json::Value::Array(items) => {
                for item in items {
                    out.push(Circuit::from_json_str(&item.to_string())?);
                }
            }
            _ => out.push(Circuit::from_json_str(&text)?),
        }
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create_file(path)?;
    writeln!(f, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Parses `n`, `a..b`, `a..=b` or `a-b` (inclusive).
pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let t = text.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad size range {text:?}")))
    };
    let (lo, hi) = if let Some((a, b)) = t.split_once("..") {
        (num(a)?, num(b.trim_start_matches('='))?)
    } else if let Some((a, b)) = t.split_once('-') {
        (num(a)?, num(b)?)
    } else {
        let n = num(t)?;
        (n, n)
    };
    if lo == 0 || lo > hi || hi > MAX_BENCH_SIZE {
        return Err(Error::Parse(format!(
            "sizes must satisfy 1 ≤ lo ≤ hi ≤ {MAX_BENCH_SIZE}, got {text:?}"
        )));
    }
    Ok((lo..=hi).collect())
}

pub fn random_matrix<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let scheme = SchemeSpec::resolve(&args.scheme)?;
    let circuits = load_circuits(&args.circuit)?;
    let report = certify(&circuits, &scheme)?;
    if let Some(path) = &args.report {
        report.save(path)?;
    }
    println!("scheme {}", scheme.kind);
    println!("success_probability {}", fmt17(report.success_probability));
    if let Some(p) = &report.stage_probabilities {
        for (i, v) in p.iter().enumerate() {
            println!("stage{}_probability {}", i + 1, fmt17(*v));
        }
    }
    match report.fidelity {
        Some(f) => println!("fidelity {}", fmt17(f)),
        None => println!("fidelity undefined"),
    }
    println!("byproduct_weight {}", fmt17(report.byproduct_weight));
    let splitters: usize = report.elements.iter().map(|e| e.beam_splitters).sum();
    println!("beam_splitters {splitters}");
    println!("certified {}", report.certified);
    Ok(if report.certified { 0 } else { 1 })
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<i32> {
    let scheme = SchemeSpec::resolve(&args.scheme)?;
    let mut config = OptimizerConfig::for_scheme(scheme.kind);
    if let Some(mu) = args.mu {
        config.mu = mu;
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    config.restarts = args.restarts as usize;
    config.seed = args.seed;
    config.refine = !args.no_refine;
    config.lbfgs.max_iterations = args.max_iterations;
    config.gradient = match args.gradient {
        GradientArg::Analytic => GradientMode::Analytic,
        GradientArg::Fd => GradientMode::FiniteDifference,
    };
    let result = optimize(&scheme, &config)?;
    if let Some(path) = &args.out {
        result.write_circuits(path)?;
    }
    if let Some(path) = &args.trace {
        result.write_trace(path)?;
    }
    if let Some(path) = &args.report {
        result.certification.save(path)?;
    }
    let c = &result.certification;
    println!("scheme {}", scheme.kind);
    println!("best_restart {}", result.best_restart);
    println!("success_probability {}", fmt17(c.success_probability));
    if let Some(p) = &c.stage_probabilities {
        for (i, v) in p.iter().enumerate() {
            println!("stage{}_probability {}", i + 1, fmt17(*v));
        }
    }
    println!("fidelity {}", fmt17(c.fidelity.unwrap_or(0.0)));
    println!("infidelity {}", fmt17(c.infidelity()));
    let splitters: usize = c.elements.iter().map(|e| e.beam_splitters).sum();
    let phases: usize = c.elements.iter().map(|e| e.phase_shifts).sum();
    println!("beam_splitters {splitters}");
    println!("phase_shifts {phases}");
    for (i, e) in c.elements.iter().enumerate() {
        let taus: Vec<String> = e.transmissivities.iter().map(|t| fmt17(*t)).collect();
        println!("transmissivities[{i}] {}", taus.join(" "));
    }
    println!("converged {}", result.converged);
    if !result.converged {
        eprintln!("warning: no restart reached fidelity 0.99");
    }
    Ok(if result.converged { 0 } else { 1 })
}

fn cmd_evolve(args: &EvolveArgs) -> Result<i32> {
    let circuits = load_circuits(std::slice::from_ref(&args.circuit))?;
    let [circuit] = circuits.as_slice() else {
        return Err(Error::InvalidCircuit(
            "evolve takes a single circuit".into(),
        ));
    };
    let input: Occupation = args.input.parse()?;
    let aux_modes = match &args.scheme {
        Some(s) => SchemeSpec::resolve(s)?.aux_modes,
        None => args.aux.clone(),
    };
    let output = evolve(&circuit.compose()?, &input)?;
    let table = if aux_modes.is_empty() {
        Vec::new()
    } else {
        outcome_table(&output, &aux_modes)?
    };
    let report = EvolveReport {
        input: input.to_string(),
        norm: output.norm_sqr(),
        amplitudes: AmplitudeEntry::listing(&output),
        aux_modes,
        outcome_table: table,
    };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    println!("norm {}", fmt17(report.norm));
    for a in &report.amplitudes {
        println!("{} {} {}", a.occupation, fmt17(a.re), fmt17(a.im));
    }
    for o in &report.outcome_table {
        println!("aux {} {}", o.pattern, fmt17(o.probability));
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let sizes = parse_sizes(&args.sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut ok = true;
    println!("n mean_seconds stddev_seconds naive_check");
    for n in sizes {
        let mut times = Vec::with_capacity(args.reps as usize);
        let mut check = if n <= NAIVE_CHECK_SIZE {
            "pass"
        } else {
            "skipped"
        };
        for _ in 0..args.reps {
            let a = random_matrix(n, &mut rng);
            let start = Instant::now();
            let p = permanent_ryser(&a)?;
            times.push(start.elapsed().as_secs_f64());
            if n <= NAIVE_CHECK_SIZE {
                let q = permanent_naive(&a)?;
                if (p - q).norm() > 1e-10 * q.norm().max(1.0) {
                    check = "FAIL";
                    ok = false;
                }
            }
        }
        let k = times.len() as f64;
        let mean = times.iter().sum::<f64>() / k;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / k;
        println!("{n} {} {} {check}", fmt17(mean), fmt17(var.sqrt()));
    }
    Ok(if ok { 0 } else { 1 })
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::BenchPermanent(a) => cmd_bench(a),
    }
}
