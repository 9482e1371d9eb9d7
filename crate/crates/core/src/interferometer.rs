//! Beam-splitter gates, rectangular meshes and their transfer matrices.
//!
//! A circuit realizes `U = D · T_Q ⋯ T_1`: gates are applied in list order (the first
//! gate acts first) and the diagonal output phase layer `D` acts last. The phase on the
//! last mode is fixed to zero, so a circuit on `N` modes carries `N − 1` output phases.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{create_file, read_file, Error, Result};
use crate::permanent::ComplexMatrix;

type Block = [[Complex64; 2]; 2];

/// Two-mode block `[[e^{iφ} sinθ, cosθ], [e^{iφ} cosθ, −sinθ]]`.
///
/// `θ = 0` is a crossover and `θ = π/2` is the identity up to a sign on the second
/// mode. The transmissivity is `cos²θ`.
pub fn bs_matrix(theta: f64, phi: f64) -> Block {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    [
        [e * s, Complex64::new(c, 0.0)],
        [e * c, Complex64::new(-s, 0.0)],
    ]
}

fn bs_dtheta(theta: f64, phi: f64) -> Block {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    [
        [e * c, Complex64::new(-s, 0.0)],
        [-e * s, Complex64::new(-c, 0.0)],
    ]
}

fn bs_dphi(theta: f64, phi: f64) -> Block {
    let (s, c) = theta.sin_cos();
    let ie = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, phi);
    let z = Complex64::new(0.0, 0.0);
    [[ie * s, z], [ie * c, z]]
}

/// Mode pairs of the rectangular mesh: `N` layers alternating between
/// `(0,1),(2,3),…` and `(1,2),(3,4),…`, `N(N−1)/2` pairs in total.
pub fn clements_layout(n_modes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_modes * n_modes.saturating_sub(1) / 2);
    for layer in 0..n_modes {
        let mut m = layer % 2;
        while m + 1 < n_modes {
            pairs.push((m, m + 1));
            m += 2;
        }
    }
    pairs
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub modes: [usize; 2],
    pub theta: f64,
    pub phi: f64,
}

impl Gate {
    pub fn new(m: usize, theta: f64, phi: f64) -> Self {
        Gate {
            modes: [m, m + 1],
            theta,
            phi,
        }
    }

    pub fn transmissivity(&self) -> f64 {
        self.theta.cos().powi(2)
    }

    pub fn block(&self) -> Block {
        bs_matrix(self.theta, self.phi)
    }
}

/// Flat-parameter layout of a circuit: the gate mode pairs and the mode count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshLayout {
    pub n_modes: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl MeshLayout {
    pub fn clements(n_modes: usize) -> Self {
        MeshLayout {
            n_modes,
            pairs: clements_layout(n_modes),
        }
    }

    /// `2·gates + (N − 1)`.
    pub fn parameter_count(&self) -> usize {
        2 * self.pairs.len() + self.n_modes.saturating_sub(1)
    }

    /// θ uniform in `[0, π/2]`, φ and α uniform in `[−π, π)`.
    pub fn random_parameters<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.parameter_count());
        for _ in &self.pairs {
            x.push(rng.gen_range(0.0..=FRAC_PI_2));
            x.push(rng.gen_range(-PI..PI));
        }
        for _ in 1..self.n_modes {
            x.push(rng.gen_range(-PI..PI));
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_modes: usize,
    pub gates: Vec<Gate>,
    /// `α_0 … α_{N−2}`; the last mode carries no phase.
    pub output_phases: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Circuit {
    pub fn identity(n_modes: usize) -> Self {
        Circuit {
            n_modes,
            gates: Vec::new(),
            output_phases: vec![0.0; n_modes.saturating_sub(1)],
            label: None,
        }
    }

    /// Full rectangular mesh with every gate at `θ = π/2, φ = 0`.
    pub fn identity_mesh(n_modes: usize) -> Self {
        let layout = MeshLayout::clements(n_modes);
        let mut x = vec![0.0; layout.parameter_count()];
        for g in 0..layout.pairs.len() {
            x[2 * g] = FRAC_PI_2;
        }
        unpack_parameters(&x, &layout).expect("length from layout")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn layout(&self) -> MeshLayout {
        MeshLayout {
            n_modes: self.n_modes,
            pairs: self
                .gates
                .iter()
                .map(|g| (g.modes[0], g.modes[1]))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::InvalidCircuit(
                "a circuit needs at least one mode".into(),
            ));
        }
        for (k, g) in self.gates.iter().enumerate() {
            let [m, n] = g.modes;
            if n != m + 1 || n >= self.n_modes {
                return Err(Error::InvalidCircuit(format!(
                    "gate {k} acts on modes ({m},{n}); expected adjacent modes below {}",
                    self.n_modes
                )));
            }
            if !g.theta.is_finite() || !g.phi.is_finite() {
                return Err(Error::InvalidCircuit(format!(
                    "gate {k} has a non-finite angle"
                )));
            }
        }
        if self.output_phases.len() != self.n_modes - 1 {
            return Err(Error::InvalidCircuit(format!(
                "{} output phases for {} modes (expected {})",
                self.output_phases.len(),
                self.n_modes,
                self.n_modes - 1
            )));
        }
        Ok(())
    }

    /// Transfer matrix `D · T_Q ⋯ T_1`.
    pub fn compose(&self) -> Result<ComplexMatrix> {
        self.validate()?;
        let mut u = ComplexMatrix::identity(self.n_modes);
        for g in &self.gates {
            apply_left(&mut u, g.modes[0], &g.block());
        }
        apply_phases(&mut u, &self.output_phases);
        Ok(u)
    }

    /// Transfer matrix plus `∂U/∂x_k` for every entry of the packed parameter vector.
    pub fn compose_with_derivatives(&self) -> Result<(ComplexMatrix, Vec<ComplexMatrix>)> {
        self.validate()?;
        let n = self.n_modes;
        let q = self.gates.len();

        // prefix[k] = T_k ⋯ T_1 (prefix[0] = I)
        let mut prefix = Vec::with_capacity(q + 1);
        prefix.push(ComplexMatrix::identity(n));
        for g in &self.gates {
            let mut next = prefix.last().expect("non-empty").clone();
            apply_left(&mut next, g.modes[0], &g.block());
            prefix.push(next);
        }
        // suffix[k] = D T_Q ⋯ T_{k+1} (suffix[q] = D)
        let mut suffix = vec![ComplexMatrix::identity(n); q + 1];
        apply_phases(&mut suffix[q], &self.output_phases);
        for k in (0..q).rev() {
            let mut s = suffix[k + 1].clone();
            apply_right(&mut s, self.gates[k].modes[0], &self.gates[k].block());
            suffix[k] = s;
        }

        let mut u = prefix[q].clone();
        apply_phases(&mut u, &self.output_phases);

        let mut derivs = Vec::with_capacity(2 * q + n - 1);
        for (k, g) in self.gates.iter().enumerate() {
            for block in [bs_dtheta(g.theta, g.phi), bs_dphi(g.theta, g.phi)] {
                derivs.push(sandwich(&suffix[k + 1], g.modes[0], &block, &prefix[k]));
            }
        }
        let i = Complex64::new(0.0, 1.0);
        for mode in 0..n - 1 {
            let mut d = ComplexMatrix::zeros(n, n);
            for j in 0..n {
                d[(mode, j)] = i * u[(mode, j)];
            }
            derivs.push(d);
        }
        Ok((u, derivs))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut c: Circuit = serde_json::from_str(text)?;
        // A full set of N phases is accepted and rebased onto the last mode.
        if c.n_modes > 0 && c.output_phases.len() == c.n_modes {
            let last = c.output_phases.pop().expect("non-empty");
            for a in &mut c.output_phases {
                *a = wrap_angle(*a - last);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&read_file(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        writeln!(create_file(path)?, "{}", self.to_json_string()?)?;
        Ok(())
    }

    /// Wraps every φ and α into `[−π, π)`. Leaves θ alone.
    pub fn wrap_phases(mut self) -> Self {
        for g in &mut self.gates {
            g.phi = wrap_angle(g.phi);
        }
        for a in &mut self.output_phases {
            *a = wrap_angle(*a);
        }
        self
    }
}

/// Wraps into `[−π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

fn apply_left(u: &mut ComplexMatrix, m: usize, b: &Block) {
    for j in 0..u.cols() {
        let (x, y) = (u[(m, j)], u[(m + 1, j)]);
        u[(m, j)] = b[0][0] * x + b[0][1] * y;
        u[(m + 1, j)] = b[1][0] * x + b[1][1] * y;
    }
}

fn apply_right(u: &mut ComplexMatrix, m: usize, b: &Block) {
    for i in 0..u.rows() {
        let (x, y) = (u[(i, m)], u[(i, m + 1)]);
        u[(i, m)] = x * b[0][0] + y * b[1][0];
        u[(i, m + 1)] = x * b[0][1] + y * b[1][1];
    }
}

fn apply_phases(u: &mut ComplexMatrix, phases: &[f64]) {
    for (i, &a) in phases.iter().enumerate() {
        let e = Complex64::from_polar(1.0, a);
        for j in 0..u.cols() {
            u[(i, j)] *= e;
        }
    }
}

/// `left · E_m(block) · right` where `E_m` embeds the block at rows/cols `(m, m+1)`
/// and is zero elsewhere.
fn sandwich(left: &ComplexMatrix, m: usize, block: &Block, right: &ComplexMatrix) -> ComplexMatrix {
    let n = left.rows();
    let rows: [Vec<Complex64>; 2] = [0, 1].map(|a| {
        (0..n)
            .map(|j| block[a][0] * right[(m, j)] + block[a][1] * right[(m + 1, j)])
            .collect()
    });
    ComplexMatrix::from_fn(n, n, |i, j| {
        left[(i, m)] * rows[0][j] + left[(i, m + 1)] * rows[1][j]
    })
}

/// Layout `[θ₁, φ₁, θ₂, φ₂, …, α₁, …, α_{N−1}]`.
pub fn pack_parameters(circuit: &Circuit) -> Vec<f64> {
    circuit
        .gates
        .iter()
        .flat_map(|g| [g.theta, g.phi])
        .chain(circuit.output_phases.iter().copied())
        .collect()
}

pub fn unpack_parameters(params: &[f64], layout: &MeshLayout) -> Result<Circuit> {
    let expected = layout.parameter_count();
    if params.len() != expected {
        return Err(Error::ParameterLength {
            expected,
            got: params.len(),
        });
    }
    let q = layout.pairs.len();
    let gates = layout
        .pairs
        .iter()
        .enumerate()
        .map(|(k, &(m, n))| Gate {
            modes: [m, n],
            theta: params[2 * k],
            phi: params[2 * k + 1],
        })
        .collect();
    Ok(Circuit {
        n_modes: layout.n_modes,
        gates,
        output_phases: params[2 * q..].to_vec(),
        label: None,
    })
}

/// Element counts of a circuit after snapping trivial gates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    /// Gates whose θ is not a multiple of π/2.
    pub beam_splitters: usize,
    /// Transmissivities `cos²θ` of those gates, in circuit order.
    pub transmissivities: Vec<f64>,
    /// Gate phases `φ ≠ 0` plus non-zero output phases.
    pub phase_shifts: usize,
    /// Gates that are exact crossovers or identities with no phase.
    pub trivial_gates: usize,
}

/// Snaps θ to the nearest multiple of π/2 and φ, α to 0 whenever they are within `tol`.
///
/// Gates stay in the list: a crossover permutes modes and the `θ = π/2` identity flips
/// a sign, so neither can be dropped without changing `U`.
pub fn prune_trivial(circuit: &Circuit, tol: f64) -> (Circuit, PruneSummary) {
    let mut out = circuit.clone();
    let mut summary = PruneSummary::default();
    for g in &mut out.gates {
        let k = (g.theta / FRAC_PI_2).round();
        let theta_trivial = (g.theta - k * FRAC_PI_2).abs() <= tol;
        if theta_trivial {
            g.theta = k * FRAC_PI_2;
        }
        let phi_trivial = wrap_angle(g.phi).abs() <= tol;
        if phi_trivial {
            g.phi = 0.0;
        }
        if !theta_trivial {
            summary.beam_splitters += 1;
            summary.transmissivities.push(g.transmissivity());
        }
        if !phi_trivial {
            summary.phase_shifts += 1;
        }
        if theta_trivial && phi_trivial {
            summary.trivial_gates += 1;
        }
    }
    for a in &mut out.output_phases {
        if wrap_angle(*a).abs() <= tol {
            *a = 0.0;
        } else {
            summary.phase_shifts += 1;
        }
    }
    (out, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn block_matrix(b: &Block) -> ComplexMatrix {
        ComplexMatrix::from_rows(&[b[0].to_vec(), b[1].to_vec()]).unwrap()
    }

    #[test]
    fn beam_splitter_special_angles() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let cross = bs_matrix(0.0, 0.0);
        assert_eq!(cross, [[zero, one], [one, zero]]);
        let ident = bs_matrix(FRAC_PI_2, 0.0);
        assert!((ident[0][0] - one).norm() < 1e-15 && (ident[1][1] + one).norm() < 1e-15);
        assert!(ident[0][1].norm() < 1e-15 && ident[1][0].norm() < 1e-15);
        let bal = bs_matrix(FRAC_PI_4, 0.0);
        for row in bal {
            for z in row {
                assert!((z.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
            }
        }
        assert!((Gate::new(0, FRAC_PI_4, 0.0).transmissivity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(clements_layout(2), vec![(0, 1)]);
        assert_eq!(clements_layout(5).len(), 10);
        assert_eq!(clements_layout(6).len(), 15);
        for n in 2..10 {
            assert_eq!(clements_layout(n).len(), n * (n - 1) / 2);
        }
        assert_eq!(MeshLayout::clements(6).parameter_count(), 35);
    }

    #[test]
    fn compose_examples() {
        assert_eq!(
            Circuit::identity(4).compose().unwrap(),
            ComplexMatrix::identity(4)
        );
        let c = Circuit {
            n_modes: 2,
            gates: vec![Gate::new(0, 0.3, 1.1)],
            output_phases: vec![0.0],
            label: None,
        };
        assert!(
            c.compose()
                .unwrap()
                .max_abs_diff(&block_matrix(&bs_matrix(0.3, 1.1)))
                < 1e-15
        );
        assert!(
            Circuit::identity_mesh(5)
                .compose()
                .unwrap()
                .unitarity_defect()
                < 1e-15
        );
    }

    #[test]
    fn gate_order_is_first_applied_first() {
        let g1 = Gate::new(0, 0.4, 0.2);
        let g2 = Gate::new(1, 1.0, -0.7);
        let c = Circuit {
            n_modes: 3,
            gates: vec![g1, g2],
            output_phases: vec![0.5, -1.0],
            label: None,
        };
        let embed = |g: &Gate| {
            let mut m = ComplexMatrix::identity(3);
            apply_left(&mut m, g.modes[0], &g.block());
            m
        };
        let mut d = ComplexMatrix::identity(3);
        d[(0, 0)] = Complex64::from_polar(1.0, 0.5);
        d[(1, 1)] = Complex64::from_polar(1.0, -1.0);
        let expected = &(&d * &embed(&g2)) * &embed(&g1);
        assert!(c.compose().unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn invalid_circuits() {
        let mut c = Circuit::identity(3);
        c.gates.push(Gate {
            modes: [0, 2],
            theta: 0.1,
            phi: 0.0,
        });
        assert!(matches!(c.compose(), Err(Error::InvalidCircuit(_))));
        let mut c = Circuit::identity(3);
        c.gates.push(Gate::new(2, 0.1, 0.0));
        assert!(c.compose().is_err());
        let mut c = Circuit::identity(3);
        c.output_phases.push(0.0);
        c.output_phases.push(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn random_meshes_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=6 {
            let layout = MeshLayout::clements(n);
            for _ in 0..20 {
                let c = unpack_parameters(&layout.random_parameters(&mut rng), &layout).unwrap();
                assert!(c.compose().unwrap().unitarity_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn packing() {
        let layout = MeshLayout::clements(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = layout.random_parameters(&mut rng);
        let c = unpack_parameters(&x, &layout).unwrap();
        assert_eq!(pack_parameters(&c), x);
        assert_eq!(c.layout(), layout);

        let zero = unpack_parameters(&vec![0.0; 35], &layout).unwrap();
        assert!(zero.gates.iter().all(|g| g.theta == 0.0 && g.phi == 0.0));
        assert_eq!(prune_trivial(&zero, 1e-12).1.trivial_gates, 15);

        assert!(matches!(
            unpack_parameters(&[0.0; 3], &layout),
            Err(Error::ParameterLength {
                expected: 35,
                got: 3
            })
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let layout = MeshLayout::clements(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = layout.random_parameters(&mut rng);
        let c = unpack_parameters(&x, &layout).unwrap();
        let (u, derivs) = c.compose_with_derivatives().unwrap();
        assert!(u.max_abs_diff(&c.compose().unwrap()) < 1e-14);
        assert_eq!(derivs.len(), x.len());
        let h = 1e-6;
        for (k, d) in derivs.iter().enumerate() {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let up = unpack_parameters(&xp, &layout).unwrap().compose().unwrap();
            let um = unpack_parameters(&xm, &layout).unwrap().compose().unwrap();
            let fd = ComplexMatrix::from_fn(4, 4, |i, j| (up[(i, j)] - um[(i, j)]) / (2.0 * h));
            assert!(fd.max_abs_diff(d) < 1e-8, "parameter {k}");
        }
    }

    #[test]
    fn pruning_snaps_near_trivial_gates() {
        let c = Circuit {
            n_modes: 3,
            gates: vec![
                Gate::new(0, 1e-11, -2e-11),
                Gate::new(1, FRAC_PI_2 + 1e-11, 0.0),
                Gate::new(0, FRAC_PI_4, 0.3),
            ],
            output_phases: vec![1e-12, 0.2],
            label: None,
        };
        let (p, s) = prune_trivial(&c, 1e-9);
        assert_eq!(s.beam_splitters, 1);
        assert_eq!(s.trivial_gates, 2);
        assert_eq!(s.phase_shifts, 2);
        assert!((s.transmissivities[0] - 0.5).abs() < 1e-15);
        assert_eq!(p.gates[0].theta, 0.0);
        assert_eq!(p.gates[1].theta, FRAC_PI_2);
        assert!(p.compose().unwrap().max_abs_diff(&c.compose().unwrap()) < 1e-8);
    }

    #[test]
    fn json_round_trip_and_phase_rebasing() {
        let text = r#"{"n_modes":3,"gates":[{"modes":[0,1],"theta":0.5,"phi":0.25}],
                       "output_phases":[1.0,0.5,0.5],"label":"demo"}"#;
        let c = Circuit::from_json_str(text).unwrap();
        assert_eq!(c.output_phases, vec![0.5, 0.0]);
        assert_eq!(c.label.as_deref(), Some("demo"));
        let back = Circuit::from_json_str(&c.to_json_string().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(
            Circuit::from_json_str(r#"{"n_modes":3,"gates":[],"output_phases":[0.0]}"#).is_err()
        );
    }

    #[test]
    fn angle_wrapping() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }
}
