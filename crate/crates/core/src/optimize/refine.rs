//! Post-processing of a converged restart.
//!
//! The heralding cost trades a little fidelity for probability, so its minimizer sits
//! slightly off `F = 1`. Refinement snaps nearly trivial angles, then minimizes
//! `−ln p̃ + K·(1 − F)` with growing `K` over the remaining parameters. A greedy pass
//! then tries to make each remaining element trivial, keeping the change whenever the
//! circuit stays exact with the same success probability.

use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::interferometer::wrap_angle;

use super::cost::{CostModel, CostWeights, Objective};
use super::lbfgs::{lbfgs_minimize, LbfgsConfig};

/// Angles this close to a trivial value are snapped before refinement.
pub const SNAP_TOLERANCE: f64 = 1e-3;
/// Penalty weights of the continuation.
pub const REFINE_WEIGHTS: [f64; 5] = [1e2, 1e4, 1e6, 1e8, 1e10];
/// Infidelity accepted for a refined circuit.
pub const EXACT_INFIDELITY: f64 = 1e-10;
/// Success probability may drop by at most this much when an element is removed.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Role of each packed parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Theta,
    Phase,
}

fn kinds(model: &CostModel) -> Vec<Kind> {
    let mut out = Vec::with_capacity(model.parameter_count());
    for layout in model.layouts() {
        for _ in &layout.pairs {
            out.push(Kind::Theta);
            out.push(Kind::Phase);
        }
        out.extend(std::iter::repeat_n(
            Kind::Phase,
            layout.n_modes.saturating_sub(1),
        ));
    }
    out
}

/// Nearest trivial value: a multiple of π/2 for θ, zero for phases.
fn trivial_value(kind: Kind, x: f64) -> f64 {
    match kind {
        Kind::Theta => (x / FRAC_PI_2).round() * FRAC_PI_2,
        Kind::Phase => 0.0,
    }
}

/// Trivial values to try for a parameter, nearest first.
fn candidates(kind: Kind, x: f64) -> Vec<f64> {
    match kind {
        Kind::Theta => {
            let lo = (x / FRAC_PI_2).floor() * FRAC_PI_2;
            let hi = lo + FRAC_PI_2;
            if x - lo <= hi - x {
                vec![lo, hi]
            } else {
                vec![hi, lo]
            }
        }
        Kind::Phase => vec![0.0],
    }
}

fn distance_to_trivial(kind: Kind, x: f64) -> f64 {
    match kind {
        Kind::Theta => (x - trivial_value(kind, x)).abs(),
        Kind::Phase => wrap_angle(x).abs(),
    }
}

#[derive(Clone, Debug)]
pub struct Refined {
    pub params: Vec<f64>,
    pub probability: f64,
    pub fidelity: f64,
}

impl Refined {
    pub fn is_exact(&self) -> bool {
        1.0 - self.fidelity <= EXACT_INFIDELITY
    }
}

struct Refiner<'a> {
    model: &'a CostModel,
    kinds: Vec<Kind>,
    lbfgs: LbfgsConfig,
}

impl Refiner<'_> {
    /// Continuation over the parameters not in `frozen`.
    fn continuation(&self, x: &[f64], frozen: &[bool]) -> Result<Refined> {
        let free: Vec<usize> = (0..x.len()).filter(|&i| !frozen[i]).collect();
        let mut full = x.to_vec();
        for weight in REFINE_WEIGHTS {
            let weights = CostWeights {
                mu: 0.0,
                eps: 0.0,
                objective: Objective::Refine { weight },
            };
            let start: Vec<f64> = free.iter().map(|&i| full[i]).collect();
            let base = full.clone();
            let mut fg = |y: &[f64]| {
                let mut z = base.clone();
                for (&i, &v) in free.iter().zip(y) {
                    z[i] = v;
                }
                match self.model.cost_and_gradient(&z, &weights) {
                    Ok((f, g)) => (f, free.iter().map(|&i| g[i]).collect()),
                    Err(_) => (f64::NAN, vec![f64::NAN; y.len()]),
                }
            };
            let out = lbfgs_minimize(&mut fg, &start, &self.lbfgs, |_, _, _| {});
            for (&i, &v) in free.iter().zip(&out.x) {
                full[i] = v;
            }
        }
        let (p, f) = self.model.probability_and_fidelity(&full)?;
        Ok(Refined {
            params: full,
            probability: p,
            fidelity: f.unwrap_or(0.0),
        })
    }

    fn snapped(&self, x: &[f64], tol: f64) -> (Vec<f64>, Vec<bool>) {
        let mut y = x.to_vec();
        let mut frozen = vec![false; x.len()];
        for (i, &k) in self.kinds.iter().enumerate() {
            if distance_to_trivial(k, x[i]) <= tol {
                y[i] = trivial_value(k, x[i]);
                frozen[i] = true;
            }
        }
        (y, frozen)
    }

    fn accepts(&self, candidate: &Refined, current: &Refined) -> bool {
        candidate.is_exact() && candidate.probability >= current.probability - PROBABILITY_SLACK
    }

    fn run(&self, x: &[f64]) -> Result<Refined> {
        let (y, mut frozen) = self.snapped(x, SNAP_TOLERANCE);
        let mut best = self.continuation(&y, &frozen)?;
        if !best.is_exact() {
            let plain = self.continuation(x, &vec![false; x.len()])?;
            if plain.fidelity > best.fidelity {
                best = plain;
                frozen = vec![false; x.len()];
            }
        }
        if !best.is_exact() {
            return Ok(best);
        }
        // Beam splitters first, phases after; within each, closest to trivial first.
        // Passes repeat until nothing more can be removed.
        loop {
            let mut changed = false;
            for kind in [Kind::Theta, Kind::Phase] {
                let mut order: Vec<usize> = (0..x.len())
                    .filter(|&i| self.kinds[i] == kind && !frozen[i])
                    .collect();
                order.sort_by(|&a, &b| {
                    distance_to_trivial(kind, best.params[a])
                        .total_cmp(&distance_to_trivial(kind, best.params[b]))
                });
                for i in order {
                    for value in candidates(kind, best.params[i]) {
                        let mut trial = best.params.clone();
                        trial[i] = value;
                        let mut trial_frozen = frozen.clone();
                        trial_frozen[i] = true;
                        let candidate = self.continuation(&trial, &trial_frozen)?;
                        if self.accepts(&candidate, &best) {
                            best = candidate;
                            frozen = trial_frozen;
                            changed = true;
                            break;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok(best)
    }
}

/// Refines a converged parameter vector and removes every element it can.
pub fn refine(model: &CostModel, x: &[f64], lbfgs: &LbfgsConfig) -> Result<Refined> {
    let mut lbfgs = lbfgs.clone();
    lbfgs.f_tol = 0.0;
    Refiner {
        model,
        kinds: kinds(model),
        lbfgs,
    }
    .run(x)
}
