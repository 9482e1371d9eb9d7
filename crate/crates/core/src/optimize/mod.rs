//! Multistart search for heralded Bell-state circuits.
//!
//! Each restart draws random mesh parameters from its own ChaCha8 stream and minimizes
//! the heralding cost with L-BFGS. Restarts that reach a high fidelity are refined
//! (see [`refine`]). The winner is then re-simulated through the full Fock-space path
//! and the reported numbers come from that independent pass.

pub mod cost;
pub mod lbfgs;
pub mod refine;

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{create_file, Error, Result};
use crate::interferometer::{prune_trivial, Circuit, PruneSummary};
use crate::schemes::{SchemeKind, SchemeSpec};
use crate::simulate::{evolve, herald, run_two_stage, AmplitudeEntry, OutcomeEntry, Report};

pub use cost::{CostModel, CostWeights, GradientMode, Objective};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsOutcome, Termination};
pub use refine::{refine, Refined};

/// A restart counts as converged above this fidelity.
pub const CONVERGED_FIDELITY: f64 = 0.99;
/// Certification threshold on `1 − F`.
pub const CERTIFY_INFIDELITY: f64 = 1e-8;
/// Certification threshold on the byproduct weight `p̃·(1 − F)`.
pub const PURITY_TOLERANCE: f64 = 1e-10;
/// Tolerance used when counting elements of the final circuit.
pub const PRUNE_TOLERANCE: f64 = 1e-6;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BELLFORGE_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub mu: f64,
    pub eps: f64,
    pub restarts: usize,
    pub seed: u64,
    pub gradient: GradientMode,
    pub lbfgs: LbfgsConfig,
    /// Refine converged restarts and strip removable elements.
    pub refine: bool,
    /// Worker threads; `None` reads [`THREADS_ENV`] and falls back to all cores.
    pub threads: Option<usize>,
}

impl OptimizerConfig {
    pub fn for_scheme(kind: SchemeKind) -> Self {
        let mu = match kind {
            SchemeKind::SixMode => 1e-3,
            SchemeKind::FiveMode => 1e-4,
            SchemeKind::TwoStage => 1e-2,
        };
        OptimizerConfig {
            mu,
            eps: 1e-5,
            restarts: 20,
            seed: 42,
            gradient: GradientMode::Analytic,
            lbfgs: LbfgsConfig {
                f_tol_patience: 50,
                ..LbfgsConfig::default()
            },
            refine: true,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !self.eps.is_finite() || self.eps < 0.0 {
            return bad(format!("eps must be non-negative, got {}", self.eps));
        }
        if self.restarts == 0 {
            return bad("at least one restart is required".into());
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive".into());
        }
        Ok(())
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            mu: self.mu,
            eps: self.eps,
            objective: Objective::Heralding,
        }
    }
}

/// One accepted L-BFGS iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub restart: usize,
    pub iteration: usize,
    pub cost: f64,
    pub infidelity: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub cost: f64,
    pub probability: f64,
    pub fidelity: f64,
    /// Probability and fidelity after refinement, when it ran.
    pub refined: Option<(f64, f64)>,
    pub beam_splitters: usize,
    pub phase_shifts: usize,
}

#[derive(Clone, Debug)]
struct RestartRun {
    summary: RestartSummary,
    params: Vec<f64>,
    trace: Vec<TraceRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub scheme: SchemeKind,
    pub config: OptimizerConfig,
    pub best_restart: usize,
    /// False when no restart reached [`CONVERGED_FIDELITY`].
    pub converged: bool,
    pub circuits: Vec<Circuit>,
    pub certification: CertificationReport,
    pub restarts: Vec<RestartSummary>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl OptimizationResult {
    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_writer(create_file(path)?);
        w.write_record(["restart", "iteration", "cost", "infidelity", "probability"])?;
        for r in &self.trace {
            w.write_record([
                r.restart.to_string(),
                r.iteration.to_string(),
                fmt17(r.cost),
                fmt17(r.infidelity),
                fmt17(r.probability),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `circuits` as a single circuit object or, for two meshes, an array.
    pub fn write_circuits(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = if self.circuits.len() == 1 {
            self.circuits[0].to_json_string()?
        } else {
            serde_json::to_string_pretty(&self.circuits)?
        };
        let mut f = create_file(path)?;
        writeln!(f, "{text}")?;
        Ok(())
    }
}

/// A number with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn thread_count(config: &OptimizerConfig) -> Option<usize> {
    config.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n: &usize| n > 0)
    })
}

/// Parameters for restart `r`: stream `r` of a ChaCha8 generator seeded with `seed`.
pub fn initial_parameters(model: &CostModel, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    model
        .layouts()
        .iter()
        .flat_map(|l| l.random_parameters(&mut rng))
        .collect()
}

fn element_counts(circuits: &[Circuit]) -> (usize, usize) {
    circuits.iter().fold((0, 0), |(b, p), c| {
        let (_, s) = prune_trivial(c, PRUNE_TOLERANCE);
        (b + s.beam_splitters, p + s.phase_shifts)
    })
}

fn run_restart(model: &CostModel, config: &OptimizerConfig, restart: usize) -> Result<RestartRun> {
    let weights = config.weights();
    let x0 = initial_parameters(model, config.seed, restart);
    let mut trace = Vec::new();
    let out = lbfgs_minimize(
        |x| {
            model
                .evaluate(x, &weights, config.gradient)
                .unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; x.len()]))
        },
        &x0,
        &config.lbfgs,
        |iteration, x, cost| {
            if let Ok((p, f)) = model.probability_and_fidelity(x) {
                trace.push(TraceRow {
                    restart,
                    iteration,
                    cost,
                    infidelity: 1.0 - f.unwrap_or(0.0),
                    probability: p,
                });
            }
        },
    );
    let (p, f) = model.probability_and_fidelity(&out.x)?;
    let f = f.unwrap_or(0.0);
    let mut params = out.x.clone();
    let mut refined = None;
    if config.refine && f > CONVERGED_FIDELITY {
        let r = refine(model, &out.x, &config.lbfgs)?;
        if r.fidelity >= f {
            refined = Some((r.probability, r.fidelity));
            params = r.params;
        }
    }
    let (beam_splitters, phase_shifts) = element_counts(&model.circuits(&params)?);
    Ok(RestartRun {
        summary: RestartSummary {
            restart,
            iterations: out.iterations,
            termination: out.termination,
            cost: out.f,
            probability: p,
            fidelity: f,
            refined,
            beam_splitters,
            phase_shifts,
        },
        params,
        trace,
    })
}

/// Final `(p̃, F)` of a restart.
fn final_scores(s: &RestartSummary) -> (f64, f64) {
    s.refined.unwrap_or((s.probability, s.fidelity))
}

/// Exact circuits (to [`CERTIFY_INFIDELITY`]) beat inexact ones; among exact circuits
/// higher probability wins, ties within `1e-9` going to fewer elements; inexact
/// circuits are ranked by fidelity.
fn better(a: &RestartSummary, b: &RestartSummary) -> bool {
    let (pa, fa) = final_scores(a);
    let (pb, fb) = final_scores(b);
    let (ea, eb) = (
        1.0 - fa <= CERTIFY_INFIDELITY,
        1.0 - fb <= CERTIFY_INFIDELITY,
    );
    if ea != eb {
        return ea;
    }
    if !ea {
        return fa > fb;
    }
    if (pa - pb).abs() > 1e-9 {
        return pa > pb;
    }
    (a.beam_splitters, a.phase_shifts) < (b.beam_splitters, b.phase_shifts)
}

/// Runs every restart (in parallel, results independent of thread count) and
/// certifies the best circuit.
pub fn optimize(scheme: &SchemeSpec, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let model = CostModel::new(scheme)?;
    let work = || {
        (0..config.restarts)
            .into_par_iter()
            .map(|r| run_restart(&model, config, r))
            .collect::<Result<Vec<_>>>()
    };
    let runs = match thread_count(config) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if better(&run.summary, &runs[best].summary) {
            best = i;
        }
    }
    let converged = runs
        .iter()
        .any(|r| final_scores(&r.summary).1 > CONVERGED_FIDELITY);
    let label = format!("{} restart {}", scheme.kind, best);
    let circuits: Vec<Circuit> = model
        .circuits(&runs[best].params)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let c = c.wrap_phases();
            if runs[best].params.len() == model.layouts()[0].parameter_count() {
                c.with_label(label.clone())
            } else {
                c.with_label(format!("{label} stage {}", i + 1))
            }
        })
        .collect();
    let certification = certify(&circuits, scheme)?;
    let mut restarts = Vec::with_capacity(runs.len());
    let mut trace = Vec::new();
    for run in runs {
        restarts.push(run.summary);
        trace.extend(run.trace);
    }
    Ok(OptimizationResult {
        scheme: scheme.kind,
        config: config.clone(),
        best_restart: best,
        converged,
        circuits,
        certification,
        restarts,
        trace,
    })
}

/// Independent check of a circuit (or circuit pair) by full Fock-space simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub scheme: SchemeKind,
    /// Overall heralding probability `p̃`.
    pub success_probability: f64,
    pub fidelity: Option<f64>,
    /// Two-stage schemes: `[p₁, p₂]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_probabilities: Option<Vec<f64>>,
    /// `p̃·(1 − F)`: heralded weight outside the target.
    pub byproduct_weight: f64,
    /// Auxiliary-pattern distribution of the final interferometer.
    pub outcome_table: Vec<OutcomeEntry>,
    /// Two-stage schemes: auxiliary-pattern distribution after the first interferometer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate_outcome_table: Option<Vec<OutcomeEntry>>,
    pub conditional_amplitudes: Vec<AmplitudeEntry>,
    pub elements: Vec<PruneSummary>,
    /// `1 − F ≤ 1e-8` and byproduct weight below `1e-10`.
    pub certified: bool,
}

impl CertificationReport {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity.unwrap_or(0.0)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = create_file(path)?;
        writeln!(f, "{}", self.to_json_string()?)?;
        Ok(())
    }
}

pub fn certify(circuits: &[Circuit], scheme: &SchemeSpec) -> Result<CertificationReport> {
    scheme.validate()?;
    let stages = if scheme.is_two_stage() { 2 } else { 1 };
    if circuits.len() != stages {
        return Err(Error::InvalidCircuit(format!(
            "{} needs {stages} circuit(s), got {}",
            scheme.kind,
            circuits.len()
        )));
    }
    for c in circuits {
        if c.n_modes != scheme.n_modes {
            return Err(Error::InvalidCircuit(format!(
                "circuit has {} modes, scheme has {}",
                c.n_modes, scheme.n_modes
            )));
        }
    }
    let elements = circuits
        .iter()
        .map(|c| prune_trivial(c, PRUNE_TOLERANCE).1)
        .collect();
    let finish =
        |report: Report, stage_probabilities, byproduct_weight: f64, intermediate_outcome_table| {
            let certified = 1.0 - report.fidelity.unwrap_or(0.0) <= CERTIFY_INFIDELITY
                && byproduct_weight < PURITY_TOLERANCE;
            CertificationReport {
                scheme: scheme.kind,
                success_probability: report.success_probability,
                fidelity: report.fidelity,
                stage_probabilities,
                byproduct_weight,
                outcome_table: report.outcome_table,
                intermediate_outcome_table,
                conditional_amplitudes: report.conditional_amplitudes,
                elements,
                certified,
            }
        };

    if !scheme.is_two_stage() {
        let output = evolve(&circuits[0].compose()?, &scheme.input)?;
        let result = herald(&output, scheme)?;
        let byproduct = result.designated.byproduct_weight();
        return Ok(finish(Report::from_herald(&result), None, byproduct, None));
    }

    let run = run_two_stage(&circuits[0].compose()?, &circuits[1].compose()?, scheme)?;
    let intermediate = herald(&run.intermediate, scheme)?;
    let (report, byproduct) = match (&run.stage2_output, &run.final_outcome) {
        (Some(out), Some(last)) => {
            let second = scheme.second_stage.as_ref().expect("two-stage scheme");
            let mut stage2 = scheme.clone();
            stage2.herald = second.herald.clone();
            let table = herald(out, &stage2)?.table;
            let report = Report {
                success_probability: run.overall_probability,
                fidelity: run.fidelity,
                outcome_table: table,
                conditional_amplitudes: last
                    .conditional_state
                    .as_ref()
                    .map(AmplitudeEntry::listing)
                    .unwrap_or_default(),
            };
            // Weight in the un-renormalized two-stage output.
            (report, run.stage1_probability * last.byproduct_weight())
        }
        _ => (
            Report {
                success_probability: 0.0,
                fidelity: None,
                outcome_table: Vec::new(),
                conditional_amplitudes: Vec::new(),
            },
            0.0,
        ),
    };
    Ok(finish(
        report,
        Some(vec![run.stage1_probability, run.stage2_probability]),
        byproduct,
        Some(intermediate.table),
    ))
}
