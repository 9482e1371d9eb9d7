//! Fock-state evolution through circuits, heralding and residual reports.

pub mod reference;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    enumerate_basis, inner_product, partial_project, permute_modes, tensor_at, FockState,
    Occupation,
};
use crate::permanent::{transition_amplitude, ComplexMatrix};
use crate::schemes::SchemeSpec;

/// Largest `max |U†U − I|` accepted by [`evolve`].
pub const UNITARITY_TOLERANCE: f64 = 1e-8;

fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    let defect = u.unitarity_defect();
    if defect > UNITARITY_TOLERANCE {
        return Err(Error::NotUnitary(defect));
    }
    Ok(())
}

/// Output state `Σ_t c_{t,s} |t⟩` for the basis input `|s⟩`.
pub fn evolve(u: &ComplexMatrix, input: &Occupation) -> Result<FockState> {
    check_unitary(u)?;
    if input.modes() != u.rows() {
        return Err(Error::Dimension(format!(
            "input {input} has {} modes, transfer matrix has {}",
            input.modes(),
            u.rows()
        )));
    }
    let mut out = FockState::zero(input.photons(), input.modes());
    let outputs = out.basis().states().to_vec();
    for (amp, t) in out.amplitudes_mut().iter_mut().zip(&outputs) {
        *amp = transition_amplitude(u, input, t)?;
    }
    Ok(out)
}

/// Linear extension of [`evolve`] to superpositions.
pub fn evolve_state(u: &ComplexMatrix, input: &FockState) -> Result<FockState> {
    let mut out = FockState::zero(input.photons(), input.modes());
    for (occ, a) in input.iter() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let part = evolve(u, occ)?;
        for (o, p) in out.amplitudes_mut().iter_mut().zip(part.amplitudes()) {
            *o += a * p;
        }
    }
    Ok(out)
}

/// Outcome of detecting one pattern on the auxiliary modes.
#[derive(Clone, Debug)]
pub struct HeraldedOutcome {
    pub aux_pattern: Occupation,
    pub probability: f64,
    /// Unnormalized `⟨d|ψ⟩` on the logical modes, in `(q1a, q1b, q2a, q2b)` order.
    pub unnormalized: Option<FockState>,
    /// Normalized conditional state; `None` at zero probability.
    pub conditional_state: Option<FockState>,
    /// `|⟨χ_d|Φ⟩|² / p̃`; `None` at zero probability.
    pub fidelity: Option<f64>,
}

impl HeraldedOutcome {
    /// `p̃ − |⟨χ_d|Φ⟩|²`: weight under the heralding pattern outside the target.
    pub fn byproduct_weight(&self) -> f64 {
        match self.fidelity {
            Some(f) => (self.probability * (1.0 - f)).max(0.0),
            None => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub pattern: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEntry {
    pub occupation: String,
    pub re: f64,
    pub im: f64,
}

impl AmplitudeEntry {
    /// Non-zero amplitudes of `state` in canonical basis order.
    pub fn listing(state: &FockState) -> Vec<AmplitudeEntry> {
        state
            .iter()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(o, a)| AmplitudeEntry {
                occupation: o.to_string(),
                re: a.re,
                im: a.im,
            })
            .collect()
    }
}

/// The designated outcome plus the probability of every auxiliary pattern.
#[derive(Clone, Debug)]
pub struct HeraldResult {
    pub designated: HeraldedOutcome,
    pub table: Vec<OutcomeEntry>,
}

/// Projects `output` onto `pattern` on `aux_modes` and scores it against `target`.
pub fn herald_outcome(
    output: &FockState,
    aux_modes: &[usize],
    logical_modes: &[usize],
    pattern: &Occupation,
    target: &FockState,
) -> Result<HeraldedOutcome> {
    let proj = partial_project(output, aux_modes, pattern)?;
    let order: Vec<usize> = logical_modes
        .iter()
        .map(|m| {
            proj.remaining_modes
                .iter()
                .position(|r| r == m)
                .ok_or_else(|| Error::InvalidModes(format!("logical mode {m} is auxiliary")))
        })
        .collect::<Result<_>>()?;
    let unnormalized = proj
        .conditional
        .as_ref()
        .map(|s| permute_modes(s, &order))
        .transpose()?;
    let probability = proj.probability;
    let (conditional_state, fidelity) = match &unnormalized {
        Some(chi) if probability > 0.0 => {
            let overlap = if chi.photons() == target.photons() && chi.modes() == target.modes() {
                inner_product(chi, target)?.norm_sqr()
            } else {
                0.0
            };
            (
                chi.normalized(),
                Some((overlap / probability).clamp(0.0, 1.0)),
            )
        }
        _ => (None, None),
    };
    Ok(HeraldedOutcome {
        aux_pattern: pattern.clone(),
        probability,
        unnormalized,
        conditional_state,
        fidelity,
    })
}

/// Probability of every pattern on `aux_modes` (all photon numbers up to the total).
pub fn outcome_table(output: &FockState, aux_modes: &[usize]) -> Result<Vec<OutcomeEntry>> {
    let mut table = Vec::new();
    for k in 0..=output.photons() {
        for pattern in enumerate_basis(k, aux_modes.len()) {
            let p = partial_project(output, aux_modes, &pattern)?.probability;
            table.push(OutcomeEntry {
                pattern: pattern.to_string(),
                probability: p,
            });
        }
    }
    Ok(table)
}

/// Heralds a single-stage output state on the scheme's designated pattern.
pub fn herald(output: &FockState, scheme: &SchemeSpec) -> Result<HeraldResult> {
    if output.modes() != scheme.n_modes {
        return Err(Error::Dimension(format!(
            "state has {} modes, scheme has {}",
            output.modes(),
            scheme.n_modes
        )));
    }
    let designated = herald_outcome(
        output,
        &scheme.aux_modes,
        &scheme.logical_modes,
        &scheme.herald,
        &scheme.target_state(),
    )?;
    Ok(HeraldResult {
        designated,
        table: outcome_table(output, &scheme.aux_modes)?,
    })
}

/// Result of running both interferometers of the two-stage scheme.
#[derive(Clone, Debug)]
pub struct TwoStageResult {
    pub stage1_probability: f64,
    pub stage2_probability: f64,
    pub overall_probability: f64,
    /// Output of the first interferometer.
    pub intermediate: FockState,
    /// Output of the second interferometer (fed with the normalized stage-one state).
    pub stage2_output: Option<FockState>,
    pub final_outcome: Option<HeraldedOutcome>,
    pub fidelity: Option<f64>,
}

/// Stage one: evolve the input through `v1` and herald `scheme.herald`. Stage two: the
/// normalized conditional state plus fresh photons on the auxiliary modes go through
/// `v2`, heralded on the second-stage pattern.
pub fn run_two_stage(
    v1: &ComplexMatrix,
    v2: &ComplexMatrix,
    scheme: &SchemeSpec,
) -> Result<TwoStageResult> {
    let second = scheme.second_stage.as_ref().ok_or_else(|| {
        Error::InvalidScheme(format!("{} is not a two-stage scheme", scheme.kind))
    })?;
    let target = scheme.target_state();
    let intermediate = evolve(v1, &scheme.input)?;
    let first = herald_outcome(
        &intermediate,
        &scheme.aux_modes,
        &scheme.logical_modes,
        &scheme.herald,
        &target,
    )?;
    let p1 = first.probability;
    let Some(chi1) = first.conditional_state else {
        return Ok(TwoStageResult {
            stage1_probability: 0.0,
            stage2_probability: 0.0,
            overall_probability: 0.0,
            intermediate,
            stage2_output: None,
            final_outcome: None,
            fidelity: None,
        });
    };
    let fresh = FockState::basis_state(&second.fresh);
    let stage2_input = tensor_at(&chi1, &scheme.logical_modes, &fresh, &scheme.aux_modes)?;
    check_unitary(v2)?;
    let stage2_output = evolve_state(v2, &stage2_input)?;
    let last = herald_outcome(
        &stage2_output,
        &scheme.aux_modes,
        &scheme.logical_modes,
        &second.herald,
        &target,
    )?;
    let p2 = last.probability;
    Ok(TwoStageResult {
        stage1_probability: p1,
        stage2_probability: p2,
        overall_probability: p1 * p2,
        intermediate,
        stage2_output: Some(stage2_output),
        fidelity: last.fidelity,
        final_outcome: Some(last),
    })
}

/// One auxiliary outcome with its normalized conditional state on the logical modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub pattern: String,
    pub probability: f64,
    pub amplitudes: Vec<AmplitudeEntry>,
}

/// Every auxiliary outcome with non-zero probability, in canonical pattern order.
pub fn residual_report(
    output: &FockState,
    aux_modes: &[usize],
    logical_modes: &[usize],
) -> Result<Vec<ResidualEntry>> {
    let dummy = FockState::zero(0, 1);
    let mut out = Vec::new();
    for k in 0..=output.photons() {
        for pattern in enumerate_basis(k, aux_modes.len()) {
            let o = herald_outcome(output, aux_modes, logical_modes, &pattern, &dummy)?;
            if let Some(state) = &o.conditional_state {
                out.push(ResidualEntry {
                    pattern: pattern.to_string(),
                    probability: o.probability,
                    amplitudes: AmplitudeEntry::listing(state),
                });
            }
        }
    }
    Ok(out)
}

/// Residual report with the scheme's mode partition.
pub fn scheme_residual_report(
    output: &FockState,
    scheme: &SchemeSpec,
) -> Result<Vec<ResidualEntry>> {
    residual_report(output, &scheme.aux_modes, &scheme.logical_modes)
}

/// Serializable heralding summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub success_probability: f64,
    pub fidelity: Option<f64>,
    pub outcome_table: Vec<OutcomeEntry>,
    pub conditional_amplitudes: Vec<AmplitudeEntry>,
}

impl Report {
    pub fn from_herald(result: &HeraldResult) -> Self {
        Report {
            success_probability: result.designated.probability,
            fidelity: result.designated.fidelity,
            outcome_table: result.table.clone(),
            conditional_amplitudes: result
                .designated
                .conditional_state
                .as_ref()
                .map(AmplitudeEntry::listing)
                .unwrap_or_default(),
        }
    }
}

/// Sum of `|a|²` over a coefficient list.
pub fn weight_sum(coefficients: &[Complex64]) -> f64 {
    coefficients.iter().map(|c| c.norm_sqr()).sum()
}
