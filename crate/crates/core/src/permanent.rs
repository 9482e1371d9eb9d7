//! Dense complex matrices, matrix permanents and bosonic transition amplitudes.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::Occupation;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(ComplexMatrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |U†U − I|` entry-wise.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&ComplexMatrix::identity(self.rows))
    }

    /// Copy with row `i` and column `j` removed.
    pub fn minor(&self, i: usize, j: usize) -> ComplexMatrix {
        let mut data = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for r in (0..self.rows).filter(|&r| r != i) {
            for c in (0..self.cols).filter(|&c| c != j) {
                data.push(self[(r, c)]);
            }
        }
        ComplexMatrix {
            rows: self.rows - 1,
            cols: self.cols - 1,
            data,
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

fn check_square(a: &ComplexMatrix) -> Result<usize> {
    if a.is_square() {
        Ok(a.rows)
    } else {
        Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        })
    }
}

/// Ryser's formula with Gray-code subset ordering, `O(2ⁿ·n)`.
///
/// `perm(A) = (−1)ⁿ Σ_{S ⊆ cols} (−1)^{|S|} Π_i Σ_{j∈S} a_ij`. Consecutive Gray codes differ
/// in one column, so the row sums are updated by a single add or subtract.
pub fn permanent_ryser(a: &ComplexMatrix) -> Result<Complex64> {
    let n = check_square(a)?;
    Ok(ryser_unchecked(a.data(), n))
}

pub(crate) fn ryser_unchecked(a: &[Complex64], n: usize) -> Complex64 {
    match n {
        0 => return ONE,
        1 => return a[0],
        2 => return a[0] * a[3] + a[1] * a[2],
        _ => {}
    }
    assert!(n < 64, "permanent size {n} exceeds the subset counter");
    let mut row_sums = vec![ZERO; n];
    let mut total = ZERO;
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let changed = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << changed) != 0;
        gray = next;
        for (i, s) in row_sums.iter_mut().enumerate() {
            let v = a[i * n + changed];
            if added {
                *s += v;
            } else {
                *s -= v;
            }
        }
        let prod = row_sums.iter().fold(ONE, |acc, s| acc * s);
        if gray.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Direct sum over all `n!` permutations. Test oracle; refuses `n > 8`.
pub fn permanent_naive(a: &ComplexMatrix) -> Result<Complex64> {
    let n = check_square(a)?;
    if n > 8 {
        return Err(Error::TooLarge(n));
    }
    // Heap's algorithm over column assignments.
    let mut perm: Vec<usize> = (0..n).collect();
    let term = |p: &[usize]| {
        p.iter()
            .enumerate()
            .fold(ONE, |acc, (i, &j)| acc * a[(i, j)])
    };
    let mut total = term(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += term(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(total)
}

/// `U_{t,s}`: column `j` of `u` repeated `s_j` times, row `i` repeated `t_i` times.
pub fn build_submatrix(u: &ComplexMatrix, s: &Occupation, t: &Occupation) -> Result<ComplexMatrix> {
    check_transition_shape(u, s, t)?;
    let rows = t.mode_list();
    let cols = s.mode_list();
    Ok(ComplexMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        u[(rows[a], cols[b])]
    }))
}

fn check_transition_shape(u: &ComplexMatrix, s: &Occupation, t: &Occupation) -> Result<()> {
    let n = check_square(u)?;
    if s.modes() != n || t.modes() != n {
        return Err(Error::Dimension(format!(
            "occupations of length {}/{} for a {n}-mode transfer matrix",
            s.modes(),
            t.modes()
        )));
    }
    if s.photons() != t.photons() {
        return Err(Error::PhotonMismatch {
            input: s.photons(),
            output: t.photons(),
        });
    }
    Ok(())
}

/// `⟨t|Û|s⟩ = perm(U_{t,s}) / √(t!·s!)`.
pub fn transition_amplitude(
    u: &ComplexMatrix,
    s: &Occupation,
    t: &Occupation,
) -> Result<Complex64> {
    let sub = build_submatrix(u, s, t)?;
    let norm = (s.factorial_product() * t.factorial_product()).sqrt();
    Ok(permanent_ryser(&sub)? / norm)
}

/// Matrix of minor permanents `P_ij = perm(A with row i, col j removed)`, so that
/// `∂ perm(A)/∂a_ij = P_ij`.
pub fn permanent_minors(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = check_square(a)?;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        ryser_unchecked(a.minor(i, j).data(), n - 1)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn balanced() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_rows(&[vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]])
            .unwrap()
    }

    #[test]
    fn small_permanents() {
        assert_eq!(permanent_ryser(&ComplexMatrix::identity(4)).unwrap(), ONE);
        let ones = ComplexMatrix::from_fn(3, 3, |_, _| ONE);
        assert!((permanent_ryser(&ones).unwrap() - c(6.0, 0.0)).norm() < 1e-14);
        assert_eq!(permanent_ryser(&ComplexMatrix::zeros(0, 0)).unwrap(), ONE);
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(3.0, 0.0), c(4.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(permanent_naive(&m).unwrap(), c(10.0, 0.0));
        let z = ComplexMatrix::from_rows(&[vec![c(0.3, -2.0)]]).unwrap();
        assert_eq!(permanent_naive(&z).unwrap(), c(0.3, -2.0));
        assert_eq!(permanent_naive(&ComplexMatrix::identity(3)).unwrap(), ONE);
    }

    #[test]
    fn non_square_and_oversized_inputs() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(permanent_ryser(&m), Err(Error::NotSquare { .. })));
        assert!(matches!(
            permanent_naive(&ComplexMatrix::identity(9)),
            Err(Error::TooLarge(9))
        ));
    }

    #[test]
    fn ryser_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=7 {
            for _ in 0..10 {
                let m = random_matrix(n, &mut rng);
                let r = permanent_ryser(&m).unwrap();
                let nv = permanent_naive(&m).unwrap();
                assert!((r - nv).norm() <= 1e-10 * nv.norm().max(1e-300), "n={n}");
            }
        }
    }

    #[test]
    fn zero_row_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = random_matrix(5, &mut rng);
        for j in 0..5 {
            m[(2, j)] = ZERO;
        }
        assert!(permanent_ryser(&m).unwrap().norm() < 1e-15);
    }

    #[test]
    fn submatrix_examples() {
        let u = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(3.0, 0.0), c(4.0, 0.0)],
        ])
        .unwrap();
        let all =
            build_submatrix(&u, &Occupation::from([1, 1]), &Occupation::from([1, 1])).unwrap();
        assert_eq!(all, u);
        let twice =
            build_submatrix(&u, &Occupation::from([2, 0]), &Occupation::from([1, 1])).unwrap();
        assert_eq!(
            twice,
            ComplexMatrix::from_rows(&[
                vec![c(1.0, 0.0), c(1.0, 0.0)],
                vec![c(3.0, 0.0), c(3.0, 0.0)]
            ])
            .unwrap()
        );
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let b = build_submatrix(
            &balanced(),
            &Occupation::from([1, 1]),
            &Occupation::from([2, 0]),
        )
        .unwrap();
        assert!(b.max_abs_diff(&ComplexMatrix::from_fn(2, 2, |_, _| c(h, 0.0))) < 1e-15);
        assert!(matches!(
            build_submatrix(&u, &Occupation::from([1, 1]), &Occupation::from([1, 0])),
            Err(Error::PhotonMismatch { .. })
        ));
    }

    #[test]
    fn transition_amplitudes() {
        let id = ComplexMatrix::identity(3);
        let s = Occupation::from([2, 0, 1]);
        assert!((transition_amplitude(&id, &s, &s).unwrap() - ONE).norm() < 1e-15);
        let hom = transition_amplitude(
            &balanced(),
            &Occupation::from([1, 1]),
            &Occupation::from([1, 1]),
        )
        .unwrap();
        assert!(hom.norm() < 1e-15);
        let bunched = transition_amplitude(
            &balanced(),
            &Occupation::from([1, 1]),
            &Occupation::from([2, 0]),
        )
        .unwrap();
        assert!((bunched - c(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn minors_are_partial_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(4, &mut rng);
        let minors = permanent_minors(&a).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..4 {
                let mut plus = a.clone();
                plus[(i, j)] += h;
                let mut minus = a.clone();
                minus[(i, j)] -= h;
                let fd = (permanent_ryser(&plus).unwrap() - permanent_ryser(&minus).unwrap())
                    / (2.0 * h);
                assert!((fd - minors[(i, j)]).norm() < 1e-8);
            }
        }
    }
}
