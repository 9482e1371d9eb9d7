//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::process::ExitCode;
use std::time::Instant;

use bellforge::fock::{enumerate_basis, Occupation};
use bellforge::interferometer::{
    bs_matrix, pack_parameters, unpack_parameters, Circuit, Gate, MeshLayout,
};
use bellforge::optimize::{
    optimize, CertificationReport, CostModel, GradientMode, OptimizationResult, OptimizerConfig,
};
use bellforge::permanent::{permanent_naive, permanent_ryser, ComplexMatrix};
use bellforge::schemes::{SchemeKind, SchemeSpec};
use bellforge::simulate::{evolve, outcome_table, reference};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIX_MODE_P: f64 = 2.0 / 27.0;
const FIVE_MODE_P: f64 = 1.0 / 9.0;
const STAGE1_P: f64 = 5.0 / 18.0;
const STAGE2_P: f64 = 4.0 / 15.0;

struct Outcome {
    id: &'static str,
    passed: Option<bool>,
    detail: String,
}

impl Outcome {
    fn new(id: &'static str, passed: bool, detail: String) -> Self {
        Outcome {
            id,
            passed: Some(passed),
            detail,
        }
    }

    fn skipped(id: &'static str, detail: String) -> Self {
        Outcome {
            id,
            passed: None,
            detail,
        }
    }
}

fn run_scheme(kind: SchemeKind) -> (OptimizationResult, f64) {
    let scheme = SchemeSpec::of_kind(kind);
    let mut config = OptimizerConfig::for_scheme(kind);
    config.seed = 42;
    config.restarts = 20;
    let start = Instant::now();
    let result = optimize(&scheme, &config).expect("optimization runs");
    (result, start.elapsed().as_secs_f64())
}

/// Largest gap between the cost model's `(p̃, F)` and the independent certification.
fn certification_gap(result: &OptimizationResult) -> f64 {
    let scheme = SchemeSpec::of_kind(result.scheme);
    let model = CostModel::new(&scheme).unwrap();
    let params: Vec<f64> = result.circuits.iter().flat_map(pack_parameters).collect();
    let (p, f) = model.probability_and_fidelity(&params).unwrap();
    let c = &result.certification;
    (p - c.success_probability)
        .abs()
        .max((f.unwrap_or(0.0) - c.fidelity.unwrap_or(0.0)).abs())
}

fn splitters(c: &CertificationReport) -> usize {
    c.elements.iter().map(|e| e.beam_splitters).sum()
}

fn restarts_at(result: &OptimizationResult, p: f64) -> Vec<usize> {
    result
        .restarts
        .iter()
        .filter(|r| {
            let (q, f) = r.refined.unwrap_or((r.probability, r.fidelity));
            (q - p).abs() <= 1e-6 && 1.0 - f <= 1e-8
        })
        .map(|r| r.restart)
        .collect()
}

fn criterion_1(r: &OptimizationResult, secs: f64) -> Outcome {
    let c = &r.certification;
    let gap = certification_gap(r);
    let ok = c.infidelity() <= 1e-8
        && (c.success_probability - SIX_MODE_P).abs() <= 1e-6
        && gap <= 1e-12;
    Outcome::new(
        "1 six-mode reproduction",
        ok,
        format!(
            "best restart {}: p = {:.17e} (target {:.17e}, |Δ| = {:.2e}), 1-F = {:.2e}, {} splitters, \
             certify gap {:.1e}, {:.0} s; restarts reaching 2/27 at F = 1: {:?}",
            r.best_restart,
            c.success_probability,
            SIX_MODE_P,
            (c.success_probability - SIX_MODE_P).abs(),
            c.infidelity(),
            splitters(c),
            gap,
            secs,
            restarts_at(r, SIX_MODE_P),
        ),
    )
}

fn criterion_2(r: &OptimizationResult, six: &OptimizationResult, secs: f64) -> Outcome {
    let c = &r.certification;
    let gap = certification_gap(r);
    let (n5, n6) = (splitters(c), splitters(&six.certification));
    let ok = c.infidelity() <= 1e-8
        && (c.success_probability - FIVE_MODE_P).abs() <= 1e-6
        && gap <= 1e-12
        && n5 == n6;
    let taus: Vec<String> = c.elements[0]
        .transmissivities
        .iter()
        .map(|t| format!("{t:.6}"))
        .collect();
    Outcome::new(
        "2 five-mode reproduction",
        ok,
        format!(
            "p = {:.17e} (|Δ| = {:.2e}), 1-F = {:.2e}, {} splitters (six-mode circuit: {}), τ = [{}], \
             certify gap {:.1e}, {:.0} s",
            c.success_probability,
            (c.success_probability - FIVE_MODE_P).abs(),
            c.infidelity(),
            n5,
            n6,
            taus.join(", "),
            gap,
            secs,
        ),
    )
}

fn criterion_3(r: &OptimizationResult, secs: f64) -> Outcome {
    let c = &r.certification;
    let gap = certification_gap(r);
    let stages = c.stage_probabilities.clone().unwrap_or_default();
    let ok = stages.len() == 2
        && (stages[0] - STAGE1_P).abs() <= 1e-6
        && (stages[1] - STAGE2_P).abs() <= 1e-6
        && (c.success_probability - SIX_MODE_P).abs() <= 1e-6
        && c.infidelity() <= 1e-8
        && gap <= 1e-12;
    Outcome::new(
        "3 two-stage reproduction",
        ok,
        format!(
            "p1 = {:.17e}, p2 = {:.17e}, overall = {:.17e}, 1-F = {:.2e}, certify gap {:.1e}, {:.0} s",
            stages.first().copied().unwrap_or(f64::NAN),
            stages.get(1).copied().unwrap_or(f64::NAN),
            c.success_probability,
            c.infidelity(),
            gap,
            secs,
        ),
    )
}

fn criterion_4(results: &[&OptimizationResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    let mut ok = true;
    for r in results {
        let c = &r.certification;
        let converged = c.infidelity() < 0.01;
        ok &= converged && c.byproduct_weight < 1e-10;
        worst = worst.max(c.byproduct_weight);
        parts.push(format!("{}: {:.2e}", r.scheme, c.byproduct_weight));
    }
    Outcome::new(
        "4 byproduct purity",
        ok,
        format!(
            "weight outside target under the herald pattern: {}",
            parts.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let circuit = Circuit {
        n_modes: 2,
        gates: vec![Gate::new(0, std::f64::consts::FRAC_PI_4, 0.0)],
        output_phases: vec![0.0],
        label: None,
    };
    let u = circuit.compose().unwrap();
    let out = evolve(&u, &Occupation::from([1, 1])).unwrap();
    let a11 = out.amplitude(&Occupation::from([1, 1])).norm();
    let p20 = out.amplitude(&Occupation::from([2, 0])).norm_sqr();
    let p02 = out.amplitude(&Occupation::from([0, 2])).norm_sqr();
    // The block itself, as an independent sanity check of the 2x2 convention.
    let b = bs_matrix(std::f64::consts::FRAC_PI_4, 0.0);
    let perm = b[0][0] * b[1][1] + b[0][1] * b[1][0];
    let ok = a11 <= 1e-12
        && (p20 - 0.5).abs() <= 1e-12
        && (p02 - 0.5).abs() <= 1e-12
        && perm.norm() <= 1e-12;
    Outcome::new(
        "5 Hong-Ou-Mandel",
        ok,
        format!("|c11| = {a11:.2e}, p20 = {p20:.17}, p02 = {p02:.17}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = 1 + k % 7;
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let p = permanent_ryser(&a).unwrap();
        let q = permanent_naive(&a).unwrap();
        worst = worst.max((p - q).norm() / q.norm().max(f64::MIN_POSITIVE));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        "6 permanent oracle equivalence",
        worst <= 1e-10 && secs < 10.0,
        format!("200 matrices n = 1..7, max relative error {worst:.2e}, {secs:.3} s"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut defect, mut norm_err, mut table_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..1000 {
        let n = 2 + k % 5;
        let layout = MeshLayout::clements(n);
        let x: Vec<f64> = (0..layout.parameter_count())
            .map(|_| rng.gen_range(-7.0..7.0))
            .collect();
        let u = unpack_parameters(&x, &layout).unwrap().compose().unwrap();
        defect = defect.max(u.unitarity_defect());
        let photons = rng.gen_range(1..=n.min(4));
        let basis = enumerate_basis(photons, n);
        let input = &basis[rng.gen_range(0..basis.len())];
        let out = evolve(&u, input).unwrap();
        norm_err = norm_err.max((out.norm_sqr() - 1.0).abs());
        let aux: Vec<usize> = (n - (n - 1).min(2)..n).collect();
        let total: f64 = outcome_table(&out, &aux)
            .unwrap()
            .iter()
            .map(|e| e.probability)
            .sum();
        table_err = table_err.max((total - 1.0).abs());
    }
    Outcome::new(
        "7 unitarity and normalization",
        defect < 1e-12 && norm_err <= 1e-10 && table_err <= 1e-10,
        format!(
            "1000 meshes N = 2..6: max defect {defect:.2e}, max |norm-1| {norm_err:.2e}, \
             max |Σ outcomes - 1| {table_err:.2e}"
        ),
    )
}

fn criterion_8(two_stage: &OptimizationResult) -> Outcome {
    let sums = [
        ("R6", reference::six_mode_residual().weight_sum()),
        ("R5,2", reference::five_mode_residual().weight_sum()),
        ("psi'", reference::two_stage_intermediate().weight_sum()),
        (
            "final",
            reference::two_stage_output_coefficients()
                .iter()
                .map(|c| c.norm_sqr())
                .sum(),
        ),
    ];
    let r511 = reference::two_stage_residual().weight_sum();
    let normalized = sums.iter().all(|(_, s)| (s - 1.0).abs() <= 1e-12);
    let discrepancy = (r511 - 17.0 / 11.0).abs() <= 1e-12 && (r511 - 1.0).abs() > 1e-3;
    let table: Vec<String> = two_stage
        .certification
        .outcome_table
        .iter()
        .map(|e| format!("{}: {:.12}", e.pattern, e.probability))
        .collect();
    let listed: Vec<String> = sums.iter().map(|(n, s)| format!("{n} {s:.15}")).collect();
    Outcome::new(
        "8 reference state tables",
        normalized && discrepancy,
        format!(
            "{}; R5,1,1 sums to {r511:.15} (17/11, not normalized); simulated stage-2 outcome \
             distribution in its place: {{{}}}",
            listed.join(", "),
            table.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [
        SchemeKind::SixMode,
        SchemeKind::FiveMode,
        SchemeKind::TwoStage,
    ] {
        let scheme = SchemeSpec::of_kind(kind);
        let model = CostModel::new(&scheme).unwrap();
        let weights = OptimizerConfig::for_scheme(kind).weights();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let x: Vec<f64> = model
                .layouts()
                .iter()
                .flat_map(|l| l.random_parameters(&mut rng))
                .collect();
            let (_, ga) = model
                .evaluate(&x, &weights, GradientMode::Analytic)
                .unwrap();
            let (_, gf) = model
                .evaluate(&x, &weights, GradientMode::FiniteDifference)
                .unwrap();
            let scale = gf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, f) in ga.iter().zip(&gf) {
                // Relative to the component, floored at the gradient's own scale so that
                // components at the finite-difference noise level do not dominate.
                let rel = (a - f).abs() / f.abs().max(scale);
                worst = worst.max(rel);
            }
        }
        ok &= worst <= 1e-5;
        parts.push(format!("{kind}: {worst:.2e}"));
    }
    Outcome::new(
        "9 gradient check",
        ok,
        format!(
            "50 random points per scheme, max relative deviation {}",
            parts.join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    Outcome::skipped(
        "10 transcribed circuit amplitudes",
        "no gate-level transcription of the published circuit figures is available; the \
         optimized circuits are certified by simulation in criteria 1-4 instead"
            .into(),
    )
}

fn main() -> ExitCode {
    let mut outcomes = vec![criterion_5(), criterion_6(), criterion_7(), criterion_9()];
    let (six, t6) = run_scheme(SchemeKind::SixMode);
    let (five, t5) = run_scheme(SchemeKind::FiveMode);
    let (two, t2) = run_scheme(SchemeKind::TwoStage);
    outcomes.push(criterion_1(&six, t6));
    outcomes.push(criterion_2(&five, &six, t5));
    outcomes.push(criterion_3(&two, t2));
    outcomes.push(criterion_4(&[&six, &five, &two]));
    outcomes.push(criterion_8(&two));
    outcomes.push(criterion_10());
    outcomes.sort_by_key(|o| o.id.split(' ').next().unwrap().parse::<u32>().unwrap());

    let mut failed = 0;
    for o in &outcomes {
        let tag = match o.passed {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("[{tag}] criterion {}: {}", o.id, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed, {} skipped",
        outcomes.iter().filter(|o| o.passed == Some(true)).count(),
        outcomes.iter().filter(|o| o.passed.is_none()).count()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
