//! The heralding cost `−p̃^μ·F + ε·Σ(sin²2θ + sin²2φ)` and its gradient.
//!
//! Only the amplitudes that end with the heralding pattern on the auxiliary modes are
//! computed: `χ_d` has one entry per logical-mode occupation, so the cost needs a few
//! dozen small permanents rather than the whole output state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, Occupation};
use crate::interferometer::{unpack_parameters, Circuit, MeshLayout};
use crate::permanent::{permanent_minors, ryser_unchecked, ComplexMatrix};
use crate::schemes::SchemeSpec;

/// `p̃` is floored here inside the cost so `p̃^(μ−1)` stays finite.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Below this the probability term is taken as its limit, zero.
pub const PROBABILITY_CUTOFF: f64 = 1e-300;
/// Central-difference step in radians.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    FiniteDifference,
    Analytic,
}

/// Which first term the cost carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// `−p̃^μ·F`.
    Heralding,
    /// `−F` alone.
    Fidelity,
    /// `−ln p̃ + weight·(1 − F)`, used to refine a converged circuit. The infidelity is
    /// computed from the residual `χ − ⟨Φ|χ⟩Φ` so it keeps full relative precision.
    Refine { weight: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    pub mu: f64,
    pub eps: f64,
    pub objective: Objective,
}

/// `(s, t)` with `t` listing output rows and `s` input columns, plus `1/√(s!·t!)`.
#[derive(Clone, Debug)]
struct Transition {
    rows: Vec<usize>,
    cols: Vec<usize>,
    scale: f64,
}

impl Transition {
    fn new(s: &Occupation, t: &Occupation) -> Self {
        Transition {
            rows: t.mode_list(),
            cols: s.mode_list(),
            scale: 1.0 / (s.factorial_product() * t.factorial_product()).sqrt(),
        }
    }

    fn submatrix(&self, u: &ComplexMatrix) -> Vec<Complex64> {
        let mut a = Vec::with_capacity(self.rows.len() * self.cols.len());
        for &r in &self.rows {
            for &c in &self.cols {
                a.push(u[(r, c)]);
            }
        }
        a
    }

    fn amplitude(&self, u: &ComplexMatrix) -> Complex64 {
        ryser_unchecked(&self.submatrix(u), self.rows.len()) * self.scale
    }

    /// Amplitude and `∂c/∂U_ij` accumulated into an `N×N` matrix.
    fn amplitude_with_gradient(&self, u: &ComplexMatrix) -> (Complex64, ComplexMatrix) {
        let n = self.rows.len();
        let data = self.submatrix(u);
        let amp = ryser_unchecked(&data, n) * self.scale;
        let mut grad = ComplexMatrix::zeros(u.rows(), u.cols());
        if n > 0 {
            let sub = ComplexMatrix::from_fn(n, n, |a, b| data[a * n + b]);
            let minors = permanent_minors(&sub).expect("square by construction");
            for (a, &r) in self.rows.iter().enumerate() {
                for (b, &c) in self.cols.iter().enumerate() {
                    grad[(r, c)] += minors[(a, b)] * self.scale;
                }
            }
        }
        (amp, grad)
    }
}

fn contract(g: &ComplexMatrix, du: &ComplexMatrix) -> Complex64 {
    g.data().iter().zip(du.data()).map(|(a, b)| a * b).sum()
}

/// Heralded amplitudes `χ_d` (unnormalized, over the logical basis) together with
/// their derivatives with respect to every packed parameter.
#[derive(Clone, Debug)]
pub struct HeraldedAmplitudes {
    pub chi: Vec<Complex64>,
    /// `jacobian[k][x] = ∂χ_k/∂x`; empty when derivatives were not requested.
    pub jacobian: Vec<Vec<Complex64>>,
}

/// Precomputed transition lists for one scheme.
#[derive(Clone, Debug)]
pub struct CostModel {
    scheme: SchemeSpec,
    layouts: Vec<MeshLayout>,
    /// `conj(Φ_k)` over the logical basis.
    target_conj: Vec<Complex64>,
    /// Stage one (or the only stage): input → heralded output `k`.
    first: Vec<Transition>,
    /// Two-stage only: `second[j][k]` maps stage-one logical state `j` (plus the fresh
    /// photons) to heralded output `k`.
    second: Vec<Vec<Transition>>,
}

impl CostModel {
    pub fn new(scheme: &SchemeSpec) -> Result<Self> {
        scheme.validate()?;
        let n = scheme.n_modes;
        let logical = scheme.logical_modes;
        let kept = scheme.input.photons() - scheme.herald.photons();
        let basis1 = enumerate_basis(kept, 4);
        let place = |l: &Occupation, aux: &Occupation| {
            let mut counts = l.scatter(&logical, n).counts().to_vec();
            for (&m, &c) in scheme.aux_modes.iter().zip(aux.counts()) {
                counts[m] += c;
            }
            Occupation::new(counts)
        };
        let first: Vec<Transition> = basis1
            .iter()
            .map(|l| Transition::new(&scheme.input, &place(l, &scheme.herald)))
            .collect();

        let (second, final_basis) = match &scheme.second_stage {
            None => (Vec::new(), basis1),
            Some(stage) => {
                let kept2 = kept + stage.fresh.photons() - stage.herald.photons();
                let basis2 = enumerate_basis(kept2, 4);
                let second = basis1
                    .iter()
                    .map(|l1| {
                        let s = place(l1, &stage.fresh);
                        basis2
                            .iter()
                            .map(|l2| Transition::new(&s, &place(l2, &stage.herald)))
                            .collect()
                    })
                    .collect();
                (second, basis2)
            }
        };

        let target = scheme.target_state();
        let target_conj = final_basis
            .iter()
            .map(|o| target.amplitude(o).conj())
            .collect();
        Ok(CostModel {
            scheme: scheme.clone(),
            layouts: scheme.mesh_layouts(),
            target_conj,
            first,
            second,
        })
    }

    pub fn scheme(&self) -> &SchemeSpec {
        &self.scheme
    }

    pub fn layouts(&self) -> &[MeshLayout] {
        &self.layouts
    }

    pub fn parameter_count(&self) -> usize {
        self.layouts.iter().map(MeshLayout::parameter_count).sum()
    }

    /// Splits a concatenated parameter vector into one circuit per mesh.
    pub fn circuits(&self, params: &[f64]) -> Result<Vec<Circuit>> {
        if params.len() != self.parameter_count() {
            return Err(Error::ParameterLength {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        self.layouts
            .iter()
            .map(|layout| {
                let k = layout.parameter_count();
                let c = unpack_parameters(&params[offset..offset + k], layout);
                offset += k;
                c
            })
            .collect()
    }

    pub fn heralded_amplitudes(
        &self,
        params: &[f64],
        with_jacobian: bool,
    ) -> Result<HeraldedAmplitudes> {
        let circuits = self.circuits(params)?;
        let total = self.parameter_count();
        if !with_jacobian {
            let u1 = circuits[0].compose()?;
            let chi1: Vec<Complex64> = self.first.iter().map(|t| t.amplitude(&u1)).collect();
            if self.second.is_empty() {
                return Ok(HeraldedAmplitudes {
                    chi: chi1,
                    jacobian: Vec::new(),
                });
            }
            let u2 = circuits[1].compose()?;
            let mut chi = vec![Complex64::new(0.0, 0.0); self.target_conj.len()];
            for (j, row) in self.second.iter().enumerate() {
                for (k, t) in row.iter().enumerate() {
                    chi[k] += chi1[j] * t.amplitude(&u2);
                }
            }
            return Ok(HeraldedAmplitudes {
                chi,
                jacobian: Vec::new(),
            });
        }

        let (u1, du1) = circuits[0].compose_with_derivatives()?;
        let p1 = du1.len();
        let mut chi1 = Vec::with_capacity(self.first.len());
        let mut jac1 = Vec::with_capacity(self.first.len());
        for t in &self.first {
            let (a, g) = t.amplitude_with_gradient(&u1);
            chi1.push(a);
            jac1.push(du1.iter().map(|d| contract(&g, d)).collect::<Vec<_>>());
        }
        if self.second.is_empty() {
            return Ok(HeraldedAmplitudes {
                chi: chi1,
                jacobian: jac1,
            });
        }

        let (u2, du2) = circuits[1].compose_with_derivatives()?;
        let zero = Complex64::new(0.0, 0.0);
        let m = self.target_conj.len();
        let mut chi = vec![zero; m];
        let mut jac = vec![vec![zero; total]; m];
        for (j, row) in self.second.iter().enumerate() {
            for (k, t) in row.iter().enumerate() {
                let (c2, g2) = t.amplitude_with_gradient(&u2);
                chi[k] += chi1[j] * c2;
                for x in 0..p1 {
                    jac[k][x] += jac1[j][x] * c2;
                }
                for (x, d) in du2.iter().enumerate() {
                    jac[k][p1 + x] += chi1[j] * contract(&g2, d);
                }
            }
        }
        Ok(HeraldedAmplitudes { chi, jacobian: jac })
    }

    /// `(p̃, F)` from the heralded amplitudes; `F` is `None` at `p̃ = 0`.
    pub fn probability_and_fidelity(&self, params: &[f64]) -> Result<(f64, Option<f64>)> {
        let h = self.heralded_amplitudes(params, false)?;
        let (p, ov) = self.overlaps(&h.chi);
        let f = (p > 0.0).then(|| (ov.norm_sqr() / p).clamp(0.0, 1.0));
        Ok((p, f))
    }

    fn overlaps(&self, chi: &[Complex64]) -> (f64, Complex64) {
        let p = chi.iter().map(|c| c.norm_sqr()).sum();
        let ov = self.target_conj.iter().zip(chi).map(|(t, c)| t * c).sum();
        (p, ov)
    }

    /// Sparsity penalty `Σ_gates sin²2θ + sin²2φ` and its gradient.
    fn penalty(&self, params: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        let mut grad = grad;
        let mut offset = 0;
        for layout in &self.layouts {
            for g in 0..layout.pairs.len() {
                for x in [offset + 2 * g, offset + 2 * g + 1] {
                    total += (2.0 * params[x]).sin().powi(2);
                    if let Some(gr) = grad.as_deref_mut() {
                        gr[x] += 2.0 * (4.0 * params[x]).sin();
                    }
                }
            }
            offset += layout.parameter_count();
        }
        total
    }

    pub fn cost(&self, params: &[f64], weights: &CostWeights) -> Result<f64> {
        let h = self.heralded_amplitudes(params, false)?;
        Ok(self.first_term(&h.chi, weights) + weights.eps * self.penalty(params, None))
    }

    fn first_term(&self, chi: &[Complex64], weights: &CostWeights) -> f64 {
        let (p, ov) = self.overlaps(chi);
        if p < PROBABILITY_CUTOFF {
            return 0.0;
        }
        let pf = p.max(PROBABILITY_FLOOR);
        match weights.objective {
            Objective::Heralding => -ov.norm_sqr() * pf.powf(weights.mu - 1.0),
            Objective::Fidelity => -ov.norm_sqr() / pf,
            Objective::Refine { weight } => -pf.ln() + weight * self.residual(chi, ov) / pf,
        }
    }

    /// `‖χ − ⟨Φ|χ⟩Φ‖² = p̃·(1 − F)`.
    fn residual(&self, chi: &[Complex64], ov: Complex64) -> f64 {
        self.target_conj
            .iter()
            .zip(chi)
            .map(|(t, c)| (c - ov * t.conj()).norm_sqr())
            .sum()
    }

    /// Cost and analytic gradient.
    pub fn cost_and_gradient(
        &self,
        params: &[f64],
        weights: &CostWeights,
    ) -> Result<(f64, Vec<f64>)> {
        let h = self.heralded_amplitudes(params, true)?;
        let mut grad = vec![0.0; params.len()];
        let (p, ov) = self.overlaps(&h.chi);
        let mut value = 0.0;
        if let (Objective::Refine { weight }, true) = (weights.objective, p >= PROBABILITY_CUTOFF) {
            let pf = p.max(PROBABILITY_FLOOR);
            let q = self.residual(&h.chi, ov);
            value = -pf.ln() + weight * q / pf;
            let floored = p < PROBABILITY_FLOOR;
            for (x, gx) in grad.iter_mut().enumerate() {
                let mut dov = Complex64::new(0.0, 0.0);
                let mut dp = 0.0;
                for (k, row) in h.jacobian.iter().enumerate() {
                    dov += self.target_conj[k] * row[x];
                    dp += 2.0 * (h.chi[k].conj() * row[x]).re;
                }
                let dq = dp - 2.0 * (ov.conj() * dov).re;
                *gx = if floored {
                    weight * dq / pf
                } else {
                    -dp / pf + weight * (dq * pf - q * dp) / (pf * pf)
                };
            }
        } else if p >= PROBABILITY_CUTOFF {
            let pf = p.max(PROBABILITY_FLOOR);
            let exponent = match weights.objective {
                Objective::Heralding => weights.mu - 1.0,
                Objective::Fidelity => -1.0,
                Objective::Refine { .. } => unreachable!(),
            };
            let scale = pf.powf(exponent);
            let o2 = ov.norm_sqr();
            value = -o2 * scale;
            let floored = p < PROBABILITY_FLOOR;
            for (x, gx) in grad.iter_mut().enumerate() {
                let mut dov = Complex64::new(0.0, 0.0);
                let mut dp = 0.0;
                for (k, row) in h.jacobian.iter().enumerate() {
                    dov += self.target_conj[k] * row[x];
                    dp += 2.0 * (h.chi[k].conj() * row[x]).re;
                }
                let do2 = 2.0 * (ov.conj() * dov).re;
                let mut d = -do2 * scale;
                if !floored {
                    d -= o2 * exponent * scale / pf * dp;
                }
                *gx = d;
            }
        }
        if weights.eps != 0.0 {
            let mut pg = vec![0.0; params.len()];
            value += weights.eps * self.penalty(params, Some(&mut pg));
            for (g, p) in grad.iter_mut().zip(pg) {
                *g += weights.eps * p;
            }
        }
        Ok((value, grad))
    }

    /// Central finite differences of [`CostModel::cost`] with step [`FD_STEP`].
    pub fn finite_difference_gradient(
        &self,
        params: &[f64],
        weights: &CostWeights,
    ) -> Result<Vec<f64>> {
        let mut x = params.to_vec();
        let mut grad = vec![0.0; params.len()];
        for i in 0..params.len() {
            let orig = x[i];
            x[i] = orig + FD_STEP;
            let fp = self.cost(&x, weights)?;
            x[i] = orig - FD_STEP;
            let fm = self.cost(&x, weights)?;
            x[i] = orig;
            grad[i] = (fp - fm) / (2.0 * FD_STEP);
        }
        Ok(grad)
    }

    pub fn evaluate(
        &self,
        params: &[f64],
        weights: &CostWeights,
        mode: GradientMode,
    ) -> Result<(f64, Vec<f64>)> {
        match mode {
            GradientMode::Analytic => self.cost_and_gradient(params, weights),
            GradientMode::FiniteDifference => Ok((
                self.cost(params, weights)?,
                self.finite_difference_gradient(params, weights)?,
            )),
        }
    }
}
