//! Closed-form residual expansions of the three schemes' output states, encoded as
//! coefficient tables and logical-mode component states.
//!
//! Logical occupations are written `q1a q1b q2a q2b`; auxiliary patterns follow.
//!
//! The two-stage residual table does not normalize: its squared coefficients sum to
//! 17/11 even though every component state is normalized. It is kept here so the
//! mismatch stays visible, and the second-stage outcome distribution is taken from
//! simulation instead (see [`crate::simulate::run_two_stage`]).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::fock::{bell_target, tensor_at, BellKind, FockState, Occupation};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn logical(photons: usize, terms: &[(&str, Complex64)]) -> FockState {
    let terms: Vec<(Occupation, Complex64)> = terms
        .iter()
        .map(|(o, c)| (o.parse().expect("valid occupation literal"), *c))
        .collect();
    FockState::from_terms(photons, 4, &terms).expect("terms match the declared photon count")
}

/// One term `coefficient · |component⟩_s |aux⟩_a` of an expansion.
#[derive(Clone, Debug)]
pub struct Term {
    pub aux: Occupation,
    pub coefficient: Complex64,
    pub component: FockState,
}

/// A state written as `Σ coefficient · |component⟩_s |aux⟩_a`.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub label: &'static str,
    pub terms: Vec<Term>,
}

impl Expansion {
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    /// `Σ |coefficient|²`.
    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.norm_sqr()).sum()
    }

    /// Assembles the full state with logical modes `0..4` and auxiliary modes after them.
    pub fn to_state(&self) -> FockState {
        let n_aux = self.terms[0].aux.modes();
        let logical_modes = [0, 1, 2, 3];
        let aux_modes: Vec<usize> = (4..4 + n_aux).collect();
        let photons = self.terms[0].aux.photons() + self.terms[0].component.photons();
        let mut out = FockState::zero(photons, 4 + n_aux);
        for t in &self.terms {
            let aux = FockState::basis_state(&t.aux);
            let part = tensor_at(&t.component, &logical_modes, &aux, &aux_modes)
                .expect("disjoint logical/aux placement");
            for (o, p) in out.amplitudes_mut().iter_mut().zip(part.amplitudes()) {
                *o += t.coefficient * p;
            }
        }
        out
    }

    /// `prefix · self` followed by `herald_coefficient · |Φ⁺⟩|herald⟩`.
    fn with_heralded_term(
        &self,
        herald: Occupation,
        herald_coefficient: f64,
        residual_coefficient: f64,
    ) -> Expansion {
        let mut terms = vec![Term {
            aux: herald,
            coefficient: re(herald_coefficient),
            component: bell_target(BellKind::PhiPlus),
        }];
        terms.extend(self.terms.iter().map(|t| Term {
            coefficient: t.coefficient * residual_coefficient,
            ..t.clone()
        }));
        Expansion {
            label: self.label,
            terms,
        }
    }
}

fn term(aux: &str, coefficient: Complex64, component: FockState) -> Term {
    Term {
        aux: aux.parse().expect("valid occupation literal"),
        coefficient,
        component,
    }
}

/// Residual `|R⁽⁶⁾⟩` of the six-mode scheme, auxiliary modes `(a1, a2)`.
pub fn six_mode_residual() -> Expansion {
    let s3 = 3f64.sqrt();
    let q = 0.25;
    let chi00 = logical(
        4,
        &[
            ("1102", re(s3 * q)),
            ("1120", re(-s3 * q)),
            ("1003", re(-s3 * q)),
            ("0130", re(-s3 * q)),
            ("1021", re(q)),
            ("0112", re(q)),
            ("0031", re(q)),
            ("0013", re(-q)),
        ],
    );
    let a = 1.0 / (2.0 * 2f64.sqrt());
    let chi01 = logical(
        3,
        &[
            ("1101", re(s3 * a)),
            ("0111", re(a)),
            ("1020", re(-0.5)),
            ("0030", re(-0.5)),
        ],
    );
    let chi10 = logical(
        3,
        &[
            ("1110", re(s3 * a)),
            ("1011", re(-a)),
            ("0102", re(0.5)),
            ("0003", re(-0.5)),
        ],
    );
    let chi02 = logical(
        2,
        &[
            ("1100", re(s3 * q)),
            ("0011", re(s3 * q)),
            ("0110", re(q)),
            ("1001", re(3.0 * q)),
        ],
    );
    let chi20 = logical(
        2,
        &[
            ("1001", re(q)),
            ("0110", re(3.0 * q)),
            ("1100", re(-s3 * q)),
            ("0011", re(-s3 * q)),
        ],
    );
    let h = 0.5;
    let r = s3 / 2.0;
    let chi12 = logical(1, &[("0100", re(h)), ("0001", re(r))]);
    let chi21 = logical(1, &[("1000", re(-h)), ("0010", re(r))]);
    let chi03 = logical(1, &[("0010", re(h)), ("1000", re(r))]);
    let chi30 = logical(1, &[("0001", re(h)), ("0100", re(-r))]);
    let vac = logical(0, &[("0000", re(1.0))]);
    let s2 = 2f64.sqrt();
    Expansion {
        label: "six-mode residual",
        terms: vec![
            term("00", re(2.0 * s2 / 5.0), chi00),
            term("10", re(2.0 / 5.0), chi10),
            term("01", re(2.0 / 5.0), chi01),
            term("20", re(s2 / 5.0), chi20),
            term("02", re(s2 / 5.0), chi02),
            term("12", re(0.2), chi12),
            term("21", re(0.2), chi21),
            term("30", re(0.2), chi30),
            term("03", re(0.2), chi03),
            term("13", re(1.0 / (5.0 * s2)), vac.clone()),
            term("31", re(-1.0 / (5.0 * s2)), vac),
        ],
    }
}

/// Full six-mode output: `√(2/27) |Φ⟩|11⟩ + (5/√27) |R⁽⁶⁾⟩`.
pub fn six_mode_output() -> Expansion {
    six_mode_residual().with_heralded_term(
        Occupation::from([1, 1]),
        (2.0f64 / 27.0).sqrt(),
        5.0 / 27f64.sqrt(),
    )
}

/// Residual `|R⁽⁵'²⁾⟩` of the five-mode scheme.
pub fn five_mode_residual() -> Expansion {
    let k = 1.0 / 31f64.sqrt();
    let s2 = 2f64.sqrt();
    let chi0 = logical(
        4,
        &[
            ("3100", re(s2 * k)),
            ("0130", re(-s2 * k)),
            ("3001", re(2.0 * s2 * k)),
            ("0031", re(-2.0 * s2 * k)),
            ("0301", re(k)),
            ("0400", re(-k)),
            ("1210", re(-(3f64.sqrt()) * k)),
            ("1111", re(6f64.sqrt() * k)),
        ],
    );
    let s7 = 1.0 / 7f64.sqrt();
    let s14 = 1.0 / 14f64.sqrt();
    let chi1 = logical(
        3,
        &[
            ("3000", re(s7)),
            ("0030", re(-s7)),
            ("0300", re(s14)),
            ("0201", re(-(3f64.sqrt()) * s14)),
            ("1011", re(-(3.0f64 / 7.0).sqrt())),
        ],
    );
    let chi3 = logical(
        1,
        &[("0100", re(FRAC_1_SQRT_2)), ("0001", re(FRAC_1_SQRT_2))],
    );
    let vac = logical(0, &[("0000", re(1.0))]);
    Expansion {
        label: "five-mode residual",
        terms: vec![
            term("0", re(0.25 * (31.0f64 / 3.0).sqrt()), chi0),
            term("1", re(0.25 * (14.0f64 / 3.0).sqrt()), chi1),
            term("3", re(0.25 * (2.0f64 / 3.0).sqrt()), chi3),
            term("4", re(1.0 / (4.0 * 3f64.sqrt())), vac),
        ],
    }
}

/// Full five-mode output: `(1/3) |Φ⟩|2⟩ + (2√2/3) |R⁽⁵'²⁾⟩`.
pub fn five_mode_output() -> Expansion {
    five_mode_residual().with_heralded_term(
        Occupation::from([2]),
        1.0 / 3.0,
        2.0 * 2f64.sqrt() / 3.0,
    )
}

/// Intermediate state `|ψ'⟩` after the first two-stage interferometer, auxiliary mode `a1`.
pub fn two_stage_intermediate() -> Expansion {
    let a = 0.5 * (3.0f64 / 5.0).sqrt();
    let b = 1.0 / 10f64.sqrt();
    let c = (3.0f64 / 10.0).sqrt();
    let d = 1.0 / (2.0 * 5f64.sqrt());
    let chi0 = logical(
        3,
        &[
            ("1110", re(a)),
            ("0111", re(a)),
            ("0210", re(a)),
            ("0021", re(b)),
            ("1020", re(-b)),
            ("1011", re(c)),
            ("0030", re(-d)),
        ],
    );
    let chi1 = logical(
        2,
        &[
            ("0101", re(a)),
            ("1100", re(a)),
            ("0200", re(a)),
            ("0020", re(a)),
            ("1010", re(d)),
            ("0011", re(-d)),
            ("1001", re(c)),
        ],
    );
    let chi2 = logical(
        1,
        &[("0001", re(FRAC_1_SQRT_2)), ("1000", re(-FRAC_1_SQRT_2))],
    );
    let vac = logical(0, &[("0000", re(1.0))]);
    Expansion {
        label: "two-stage intermediate",
        terms: vec![
            term("0", re(5f64.sqrt() / 3.0), chi0),
            term("1", re((2.5f64).sqrt() / 3.0), chi1),
            term("2", re(1.0 / 3.0), chi2),
            term("3", re(1.0 / (3.0 * 2f64.sqrt())), vac),
        ],
    }
}

/// Top-level split of the two-stage output: `2/√15` heralded target, `√(11/15)` residual.
pub fn two_stage_output_coefficients() -> [Complex64; 2] {
    [re(2.0 / 15f64.sqrt()), re((11.0f64 / 15.0).sqrt())]
}

/// Residual `|R⁽⁵'¹'¹⁾⟩` as published (does not normalize).
pub fn two_stage_residual() -> Expansion {
    let i = Complex64::new(0.0, 1.0);
    let e = Complex64::from_polar(1.0, PI / 3.0);
    let ec = e.conj();
    let q = re(0.25);
    let chi0 = logical(
        3,
        &[
            ("2100", q),
            ("0120", q),
            ("0300", -i * q),
            ("0003", -i * q),
            ("2001", -e * q),
            ("1002", e * q),
            ("0201", -e * q),
            ("0021", e * q),
            ("0012", -e * q),
            ("1020", ec * q),
            ("2010", -ec * q),
            ("1200", -ec * q),
            ("0210", ec * q),
            ("0102", ec * q),
            ("3000", -i * ec * q),
            ("0030", i * ec * q),
        ],
    );
    let h = re(0.5);
    let chi2 = logical(
        1,
        &[
            ("0100", e * h),
            ("1000", e * h),
            ("0010", -e * h),
            ("0001", ec * h),
        ],
    );
    let vac = logical(0, &[("0000", re(1.0))]);
    let w = 2.0 * (2.0f64 / 11.0).sqrt();
    Expansion {
        label: "two-stage residual",
        terms: vec![
            term("0", re(w), chi0),
            term("2", re(w), chi2),
            term("3", -i * e / 11f64.sqrt(), vac),
        ],
    }
}
