//! Occupation bases and Fock states over a fixed number of photons and modes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photon count per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Occupation(Vec<usize>);

impl Occupation {
    pub fn new(counts: Vec<usize>) -> Self {
        Occupation(counts)
    }

    pub fn vacuum(modes: usize) -> Self {
        Occupation(vec![0; modes])
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().sum()
    }

    /// Product of the factorials of the counts.
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|&n| (1..=n).map(|k| k as f64).product::<f64>())
            .product()
    }

    /// Picks out the counts at `modes`, in the given order.
    pub fn select(&self, modes: &[usize]) -> Occupation {
        Occupation(modes.iter().map(|&m| self.0[m]).collect())
    }

    /// Mode labels with each mode repeated by its count, ascending.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(m, &n)| std::iter::repeat_n(m, n))
            .collect()
    }

    /// Writes the counts `self` into the positions `modes` of a vector of length `total`.
    pub fn scatter(&self, modes: &[usize], total: usize) -> Occupation {
        let mut out = vec![0; total];
        for (&m, &n) in modes.iter().zip(&self.0) {
            out[m] = n;
        }
        Occupation(out)
    }

    pub fn concat(&self, other: &Occupation) -> Occupation {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Occupation(v)
    }
}

impl From<Vec<usize>> for Occupation {
    fn from(v: Vec<usize>) -> Self {
        Occupation(v)
    }
}

impl<const N: usize> From<[usize; N]> for Occupation {
    fn from(v: [usize; N]) -> Self {
        Occupation(v.to_vec())
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&n| n <= 9) {
            for n in &self.0 {
                write!(f, "{n}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

/// Accepts digit-per-mode strings (`"1111 0"`, spaces ignored) or comma-separated
/// counts (`"1,10,0"`).
impl FromStr for Occupation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty occupation string".into()));
        }
        if s.contains(',') {
            let counts = s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad count {p:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Occupation(counts));
        }
        let counts = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::Parse(format!("bad occupation digit {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Occupation(counts))
    }
}

/// All occupations of `photons` photons over `modes` modes, in lexicographically
/// decreasing order (`(M,0,..,0)` first).
pub fn enumerate_basis(photons: usize, modes: usize) -> Vec<Occupation> {
    fn fill(rest: usize, mode: usize, cur: &mut Vec<usize>, out: &mut Vec<Occupation>) {
        let modes = cur.len();
        if mode == modes - 1 {
            cur[mode] = rest;
            out.push(Occupation(cur.clone()));
            return;
        }
        for n in (0..=rest).rev() {
            cur[mode] = n;
            fill(rest - n, mode + 1, cur, out);
        }
        cur[mode] = 0;
    }

    assert!(modes >= 1, "a basis needs at least one mode");
    let mut out = Vec::with_capacity(basis_size(photons, modes));
    fill(photons, 0, &mut vec![0; modes], &mut out);
    out
}

/// `binomial(photons + modes - 1, photons)`.
pub fn basis_size(photons: usize, modes: usize) -> usize {
    let n = photons + modes - 1;
    let k = photons.min(modes - 1);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// An enumerated occupation basis with a reverse index.
#[derive(Debug)]
pub struct Basis {
    photons: usize,
    modes: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl Basis {
    pub fn new(photons: usize, modes: usize) -> Self {
        let states = enumerate_basis(photons, modes);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Basis {
            photons,
            modes,
            states,
            index,
        }
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn index_of(&self, occ: &Occupation) -> Option<usize> {
        self.index.get(occ).copied()
    }

    fn same_shape(&self, other: &Basis) -> bool {
        self.photons == other.photons && self.modes == other.modes
    }
}

/// Dense amplitude vector over the canonical `(photons, modes)` basis.
#[derive(Clone, Debug)]
pub struct FockState {
    basis: Arc<Basis>,
    amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn zero(photons: usize, modes: usize) -> Self {
        let basis = Arc::new(Basis::new(photons, modes));
        let amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
        FockState { basis, amplitudes }
    }

    pub fn basis_state(occ: &Occupation) -> Self {
        let mut state = FockState::zero(occ.photons(), occ.modes());
        let i = state
            .basis
            .index_of(occ)
            .expect("occupation belongs to its own basis");
        state.amplitudes[i] = Complex64::new(1.0, 0.0);
        state
    }

    /// Builds a state from explicit terms; repeated occupations accumulate.
    pub fn from_terms(
        photons: usize,
        modes: usize,
        terms: &[(Occupation, Complex64)],
    ) -> Result<Self> {
        let mut state = FockState::zero(photons, modes);
        for (occ, amp) in terms {
            let i = state.basis.index_of(occ).ok_or_else(|| {
                Error::Dimension(format!(
                    "occupation {occ} is not in the ({photons}, {modes}) basis"
                ))
            })?;
            state.amplitudes[i] += amp;
        }
        Ok(state)
    }

    pub fn from_amplitudes(basis: Arc<Basis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if basis.len() != amplitudes.len() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a basis of size {}",
                amplitudes.len(),
                basis.len()
            )));
        }
        Ok(FockState { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn photons(&self) -> usize {
        self.basis.photons
    }

    pub fn modes(&self) -> usize {
        self.basis.modes
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.basis
            .index_of(occ)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, Complex64)> + '_ {
        self.basis
            .states
            .iter()
            .zip(self.amplitudes.iter().copied())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> FockState {
        FockState {
            basis: Arc::clone(&self.basis),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// `None` for the zero vector.
    pub fn normalized(&self) -> Option<FockState> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return None;
        }
        Some(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    fn check_same_basis(&self, other: &FockState) -> Result<()> {
        if self.basis.same_shape(&other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(
                self.photons(),
                self.modes(),
                other.photons(),
                other.modes(),
            ))
        }
    }

    /// Writes the state in the tab-separated fixture format, one basis element per line.
    /// Zero amplitudes are skipped unless `include_zeros`.
    pub fn to_fixture(&self, include_zeros: bool) -> String {
        let mut out = String::new();
        for (occ, a) in self.iter() {
            if include_zeros || a.norm_sqr() > 0.0 {
                out.push_str(&format!("{occ}\t{:?}\t{:?}\n", a.re, a.im));
            }
        }
        out
    }

    /// Parses the fixture format. Blank lines and `#` comments are ignored.
    pub fn from_fixture(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let occ: Occupation = fields[0].parse()?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            terms.push((occ, Complex64::new(parse(fields[1])?, parse(fields[2])?)));
        }
        let first = terms
            .first()
            .ok_or_else(|| Error::Parse("fixture has no amplitudes".into()))?;
        let (photons, modes) = (first.0.photons(), first.0.modes());
        if let Some((bad, _)) = terms
            .iter()
            .find(|(o, _)| o.photons() != photons || o.modes() != modes)
        {
            return Err(Error::Parse(format!(
                "occupation {bad} does not match ({photons} photons, {modes} modes)"
            )));
        }
        FockState::from_terms(photons, modes, &terms)
    }
}

/// `⟨a|b⟩ = Σ conj(a_k) b_k`.
pub fn inner_product(a: &FockState, b: &FockState) -> Result<Complex64> {
    a.check_same_basis(b)?;
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Largest component-wise difference between `a` and `b` after rotating `b`'s global
/// phase so that its largest-magnitude component has the same phase as in `a`.
pub fn max_diff_up_to_phase(a: &FockState, b: &FockState) -> Result<f64> {
    a.check_same_basis(b)?;
    let k = a
        .amplitudes
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let phase = if b.amplitudes[k].norm() > 0.0 && a.amplitudes[k].norm() > 0.0 {
        let r = a.amplitudes[k] / b.amplitudes[k];
        r / r.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y * phase).norm())
        .fold(0.0, f64::max))
}

/// Concatenates modes: `|10⟩ ⊗ |1⟩ = |101⟩`.
pub fn tensor(a: &FockState, b: &FockState) -> FockState {
    let a_modes: Vec<usize> = (0..a.modes()).collect();
    let b_modes: Vec<usize> = (a.modes()..a.modes() + b.modes()).collect();
    tensor_at(a, &a_modes, b, &b_modes).expect("concatenated modes are disjoint")
}

/// Product state where mode `k` of `a` lands on `a_modes[k]` and mode `k` of `b` on
/// `b_modes[k]`. The two index sets must be disjoint and together cover `0..n`.
pub fn tensor_at(
    a: &FockState,
    a_modes: &[usize],
    b: &FockState,
    b_modes: &[usize],
) -> Result<FockState> {
    if a_modes.len() != a.modes() || b_modes.len() != b.modes() {
        return Err(Error::InvalidModes(format!(
            "placement lists have lengths {}/{}, states have {}/{} modes",
            a_modes.len(),
            b_modes.len(),
            a.modes(),
            b.modes()
        )));
    }
    let total = a.modes() + b.modes();
    let mut seen = vec![false; total];
    for &m in a_modes.iter().chain(b_modes) {
        if m >= total || seen[m] {
            return Err(Error::InvalidModes(format!(
                "mode {m} is out of range or appears in both factors"
            )));
        }
        seen[m] = true;
    }

    let mut out = FockState::zero(a.photons() + b.photons(), total);
    for (oa, ca) in a.iter() {
        if ca.norm_sqr() == 0.0 {
            continue;
        }
        let pa = oa.scatter(a_modes, total);
        for (ob, cb) in b.iter() {
            let pb = ob.scatter(b_modes, total);
            let occ = Occupation(pa.0.iter().zip(&pb.0).map(|(x, y)| x + y).collect());
            let i = out.basis.index_of(&occ).expect("photon totals add");
            out.amplitudes[i] += ca * cb;
        }
    }
    Ok(out)
}

/// Relabels modes: mode `k` of the result is mode `order[k]` of `state`.
pub fn permute_modes(state: &FockState, order: &[usize]) -> Result<FockState> {
    let n = state.modes();
    let mut seen = vec![false; n];
    if order.len() != n
        || order
            .iter()
            .any(|&m| m >= n || std::mem::replace(&mut seen[m], true))
    {
        return Err(Error::InvalidModes(format!(
            "{order:?} is not a permutation of 0..{n}"
        )));
    }
    let mut out = FockState::zero(state.photons(), n);
    for (occ, amp) in state.iter() {
        let i = out
            .basis
            .index_of(&occ.select(order))
            .expect("permutation keeps the photon count");
        out.amplitudes[i] = amp;
    }
    Ok(out)
}

/// Result of projecting a subset of modes onto a fixed occupation pattern.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Indices (in the input state) of the modes that remain, ascending.
    pub remaining_modes: Vec<usize>,
    /// `⟨d|ψ⟩` on the remaining modes; `None` when the pattern asks for more photons
    /// than the state holds.
    pub conditional: Option<FockState>,
    /// `⟨χ_d|χ_d⟩`.
    pub probability: f64,
}

impl Projection {
    /// The conditional state rescaled to unit norm, or `None` when `probability == 0`.
    pub fn normalized(&self) -> Option<FockState> {
        self.conditional.as_ref().and_then(|s| s.normalized())
    }

    pub fn is_empty(&self) -> bool {
        self.probability == 0.0
    }
}

/// Projects `aux_modes` of `state` onto `pattern` (ideal number-resolving detection).
pub fn partial_project(
    state: &FockState,
    aux_modes: &[usize],
    pattern: &Occupation,
) -> Result<Projection> {
    let n = state.modes();
    if pattern.modes() != aux_modes.len() {
        return Err(Error::InvalidModes(format!(
            "pattern {pattern} has {} entries for {} auxiliary modes",
            pattern.modes(),
            aux_modes.len()
        )));
    }
    let mut is_aux = vec![false; n];
    for &m in aux_modes {
        if m >= n || is_aux[m] {
            return Err(Error::InvalidModes(format!(
                "auxiliary mode {m} out of range or repeated"
            )));
        }
        is_aux[m] = true;
    }
    let remaining_modes: Vec<usize> = (0..n).filter(|&m| !is_aux[m]).collect();
    if remaining_modes.is_empty() {
        return Err(Error::InvalidModes(
            "no modes remain after projection".into(),
        ));
    }

    let Some(kept) = state.photons().checked_sub(pattern.photons()) else {
        return Ok(Projection {
            remaining_modes,
            conditional: None,
            probability: 0.0,
        });
    };
    let mut cond = FockState::zero(kept, remaining_modes.len());
    for (occ, amp) in state.iter() {
        if occ.select(aux_modes) == *pattern {
            let i = cond
                .basis
                .index_of(&occ.select(&remaining_modes))
                .expect("photon count matches");
            cond.amplitudes[i] = amp;
        }
    }
    let probability = cond.norm_sqr();
    Ok(Projection {
        remaining_modes,
        conditional: Some(cond),
        probability,
    })
}

/// The four dual-rail Bell states, qubit 1 on modes (0,1) and qubit 2 on modes (2,3),
/// with `|0⟩_L = |10⟩` and `|1⟩_L = |01⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown Bell target {s:?}")))
    }
}

/// Physical four-mode, two-photon form of a Bell state.
///
/// `Φ⁺` is the reference; `Φ⁻ = Z₁Φ⁺`, `Ψ⁺ = X₁Φ⁺`, `Ψ⁻ = X₁Z₁Φ⁺` where `Z₁` flips the sign
/// of `|01⟩` on qubit 1 and `X₁` swaps its rails.
pub fn bell_target(kind: BellKind) -> FockState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (first, second, sign) = match kind {
        BellKind::PhiPlus => ([1, 0, 1, 0], [0, 1, 0, 1], 1.0),
        BellKind::PhiMinus => ([1, 0, 1, 0], [0, 1, 0, 1], -1.0),
        BellKind::PsiPlus => ([0, 1, 1, 0], [1, 0, 0, 1], 1.0),
        BellKind::PsiMinus => ([0, 1, 1, 0], [1, 0, 0, 1], -1.0),
    };
    FockState::from_terms(
        2,
        4,
        &[
            (Occupation::from(first), Complex64::new(h, 0.0)),
            (Occupation::from(second), Complex64::new(sign * h, 0.0)),
        ],
    )
    .expect("Bell terms live in the 2-photon, 4-mode basis")
}
