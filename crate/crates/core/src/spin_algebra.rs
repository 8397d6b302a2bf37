//! Small complex linear algebra and spin-J rotation generators.
//!
//! Basis ordering is descending in `m`: index 0 is `m = +J`, the last index
//! is `m = -J`. Every rotation is `exp(-i θ (Jx cos φ + Jy sin φ))`, which for
//! `J = 1/2` is `exp(-i θ/2 σ_φ)`.

use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

const UNITARY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;

/// A square unitary matrix of dimension 2, 6 or 8.
#[derive(Clone, PartialEq)]
pub struct Unitary {
    m: DMatrix<C64>,
}

impl Unitary {
    /// Wraps `m` after checking that it is square and unitary.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        let u = Unitary { m };
        let err = u.unitarity_error();
        if err > UNITARY_TOL {
            return invalid(format!("matrix is not unitary (max |U†U - I| = {err:.3e})"));
        }
        Ok(u)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Unitary { m }
    }

    pub fn identity(dim: usize) -> Self {
        Unitary { m: DMatrix::identity(dim, dim) }
    }

    pub fn diagonal(phases: &[C64]) -> Result<Self> {
        Unitary::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(phases)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let g = self.m.adjoint() * &self.m;
        max_abs_diff(&g, &DMatrix::identity(n, n))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "vector length does not match unitary dimension");
        (0..n)
            .map(|r| (0..n).map(|c| self.m[(r, c)] * v[c]).sum())
            .collect()
    }

    /// `|Tr(self† other)|`, equal to `dim` iff the two agree up to a global phase.
    pub fn overlap(&self, other: &Unitary) -> f64 {
        (self.m.adjoint() * &other.m).trace().norm()
    }

    pub fn equals_up_to_phase(&self, other: &Unitary, tol: f64) -> bool {
        self.dim() == other.dim() && (self.overlap(other) - self.dim() as f64).abs() <= tol
    }

    pub fn max_abs_diff(&self, other: &Unitary) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }

    pub fn scaled(&self, phase: C64) -> Unitary {
        Unitary { m: &self.m * phase }
    }
}

impl fmt::Debug for Unitary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Unitary({}x{})", self.dim(), self.dim())?;
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| {
                    let z = self.m[(r, c)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Mul for &Unitary {
    type Output = Unitary;
    fn mul(self, rhs: &Unitary) -> Unitary {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in unitary product");
        Unitary { m: &self.m * &rhs.m }
    }
}

impl Mul for Unitary {
    type Output = Unitary;
    fn mul(self, rhs: Unitary) -> Unitary {
        &self * &rhs
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Angular momentum matrices for spin `J = (dim - 1) / 2`, in units of ħ.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub dim: usize,
    pub jx: DMatrix<C64>,
    pub jy: DMatrix<C64>,
    pub jz: DMatrix<C64>,
}

impl SpinOperators {
    /// `m` values along the diagonal of `jz`, descending.
    pub fn m_values(&self) -> Vec<f64> {
        let j = (self.dim as f64 - 1.0) / 2.0;
        (0..self.dim).map(|k| j - k as f64).collect()
    }

    /// `Jx cos φ + Jy sin φ`.
    pub fn j_phi(&self, phi: f64) -> DMatrix<C64> {
        &self.jx * C64::from(phi.cos()) + &self.jy * C64::from(phi.sin())
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 6 => Ok(()),
        _ => invalid(format!("unsupported spin dimension {dim} (expected 2 or 6)")),
    }
}

pub fn spin_operators(dim: usize) -> Result<SpinOperators> {
    check_dim(dim)?;
    let j = (dim as f64 - 1.0) / 2.0;
    let m: Vec<f64> = (0..dim).map(|k| j - k as f64).collect();
    // J+ |m> = sqrt(J(J+1) - m(m+1)) |m+1>; |m+1> sits one index above |m>.
    let mut jp = DMatrix::<C64>::zeros(dim, dim);
    for k in 1..dim {
        let mk = m[k];
        jp[(k - 1, k)] = C64::from((j * (j + 1.0) - mk * (mk + 1.0)).sqrt());
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * C64::from(0.5);
    let jy = (&jp - &jm) * C64::new(0.0, -0.5);
    let jz = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        m.iter().map(|&x| C64::from(x)),
    ));
    Ok(SpinOperators { dim, jx, jy, jz })
}

/// `exp(-i θ (Jx cos φ + Jy sin φ))`.
pub fn rotation(dim: usize, theta: f64, phi: f64) -> Result<Unitary> {
    let ops = spin_operators(dim)?;
    hermitian_propagator(&ops.j_phi(phi), theta)
}

/// `exp(i · angle · 2 Jz)`; for `dim = 2` this is `exp(i · angle · σz)`.
pub fn rotation_z(dim: usize, angle: f64) -> Result<Unitary> {
    check_dim(dim)?;
    let j = (dim as f64 - 1.0) / 2.0;
    let phases: Vec<C64> = (0..dim)
        .map(|k| C64::from_polar(1.0, 2.0 * angle * (j - k as f64)))
        .collect();
    Ok(Unitary::from_matrix_unchecked(DMatrix::from_diagonal(
        &nalgebra::DVector::from_vec(phases),
    )))
}

/// Generalized NOT gate `-i exp(i π Jx)`, mapping `|m>` to `|-m>`.
pub fn x_gate(dim: usize) -> Result<Unitary> {
    Ok(rotation(dim, -std::f64::consts::PI, 0.0)?.scaled(-I))
}

pub fn is_hermitian(h: &DMatrix<C64>, tol: f64) -> bool {
    h.is_square() && max_abs_diff(h, &h.adjoint()) <= tol
}

/// `exp(-i H t)` via eigendecomposition of the Hermitian matrix `h`.
pub fn hermitian_propagator(h: &DMatrix<C64>, t: f64) -> Result<Unitary> {
    if !h.is_square() {
        return invalid("Hamiltonian is not square");
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !is_hermitian(h, HERMITIAN_TOL * scale) {
        return invalid("Hamiltonian is not Hermitian");
    }
    let n = h.nrows();
    // Symmetrize so the eigensolver sees an exactly Hermitian input.
    let hs = (h + h.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(hs);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for c in 0..n {
        let phase = C64::from_polar(1.0, -eig.eigenvalues[c] * t);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    Ok(Unitary::from_matrix_unchecked(scaled * v.adjoint()))
}

#[cfg(test)]
pub(crate) fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mat(rows: &[&[C64]]) -> DMatrix<C64> {
        let n = rows.len();
        DMatrix::from_fn(n, n, |r, c| rows[r][c])
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let s = spin_operators(2).unwrap();
        let half = C64::from(0.5);
        assert!(max_abs_diff(&s.jx, &mat(&[&[ZERO, half], &[half, ZERO]])) < 1e-15);
        let y = mat(&[&[ZERO, C64::new(0.0, -0.5)], &[C64::new(0.0, 0.5), ZERO]]);
        assert!(max_abs_diff(&s.jy, &y) < 1e-15);
    }

    #[test]
    fn spin_five_halves_spectrum_and_algebra() {
        let s = spin_operators(6).unwrap();
        let diag: Vec<f64> = (0..6).map(|k| s.jz[(k, k)].re).collect();
        assert_eq!(diag, vec![2.5, 1.5, 0.5, -0.5, -1.5, -2.5]);
        for (a, b, c) in [(&s.jx, &s.jy, &s.jz), (&s.jy, &s.jz, &s.jx), (&s.jz, &s.jx, &s.jy)] {
            let lhs = commutator(a, b);
            assert!(max_abs_diff(&lhs, &(c * I)) < 1e-12);
        }
        for op in [&s.jx, &s.jy, &s.jz] {
            assert!(is_hermitian(op, 1e-12));
        }
        // J+ only connects m to m+1.
        let jp = &s.jx + &s.jy * I;
        for r in 0..6 {
            for c in 0..6 {
                if r + 1 != c {
                    assert!(jp[(r, c)].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn rejects_other_dimensions() {
        assert!(spin_operators(3).is_err());
        assert!(rotation(4, 1.0, 0.0).is_err());
        assert!(rotation_z(8, 1.0).is_err());
    }

    #[test]
    fn rotation_pi_about_x_is_minus_i_sigma_x() {
        let r = rotation(2, PI, 0.0).unwrap();
        let expected = mat(&[&[ZERO, -I], &[-I, ZERO]]);
        assert!(max_abs_diff(r.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn full_turn_of_half_integer_spin_is_minus_identity() {
        let r = rotation(6, 2.0 * PI, 0.0).unwrap();
        assert!(r.max_abs_diff(&Unitary::identity(6).scaled(-ONE)) < 1e-12);
    }

    #[test]
    fn pi_rotation_maps_m_to_minus_m() {
        let r = rotation(6, PI, 0.0).unwrap();
        let x = x_gate(6).unwrap();
        assert!(r.equals_up_to_phase(&x, 1e-10));
        for row in 0..6 {
            for col in 0..6 {
                let z = x.entry(row, col);
                if row + col == 5 {
                    assert!((z.norm() - 1.0).abs() < 1e-12);
                } else {
                    assert!(z.norm() < 1e-12);
                }
            }
        }
        let x2 = x_gate(2).unwrap();
        assert!(x2.max_abs_diff(&Unitary::new(mat(&[&[ZERO, ONE], &[ONE, ZERO]])).unwrap()) < 1e-12);
    }

    #[test]
    fn rotation_z_examples() {
        assert!(rotation_z(2, 0.0).unwrap().max_abs_diff(&Unitary::identity(2)) < 1e-15);
        let r = rotation_z(2, PI / 2.0).unwrap();
        assert!((r.entry(0, 0) - I).norm() < 1e-15);
        assert!((r.entry(1, 1) + I).norm() < 1e-15);
        let prod = &rotation_z(6, PI / 2.0).unwrap() * &rotation_z(6, -PI / 2.0).unwrap();
        assert!(prod.max_abs_diff(&Unitary::identity(6)) < 1e-14);
    }

    #[test]
    fn propagator_examples() {
        let zero = DMatrix::<C64>::zeros(6, 6);
        assert!(hermitian_propagator(&zero, 3.7).unwrap().max_abs_diff(&Unitary::identity(6)) < 1e-15);

        let omega = 2.0 * PI * 9.0e3;
        let s = spin_operators(2).unwrap();
        let u = hermitian_propagator(&(&s.jx * C64::from(omega)), PI / omega).unwrap();
        assert!(u.max_abs_diff(&rotation(2, PI, 0.0).unwrap()) < 1e-12);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let mut h = DMatrix::<C64>::zeros(2, 2);
        h[(0, 1)] = ONE;
        assert!(hermitian_propagator(&h, 1.0).is_err());
        assert!(Unitary::new(h).is_err());
        assert!(Unitary::new(DMatrix::<C64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn z_conjugation_tilts_the_rotation_axis() {
        // Rz(α) = exp(-i α Jz) = rotation_z(-α/2).
        for dim in [2, 6] {
            for &(theta, phi) in &[(0.7, 0.3), (PI, 2.0 * PI / 3.0), (-1.1885, 2.9271)] {
                let direct = rotation(dim, theta, phi).unwrap();
                let tilted = &(&rotation_z(dim, -phi / 2.0).unwrap() * &rotation(dim, theta, 0.0).unwrap())
                    * &rotation_z(dim, phi / 2.0).unwrap();
                assert!(direct.max_abs_diff(&tilted) < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn rotations_about_one_axis_compose(theta in -7.0f64..7.0, theta2 in -7.0f64..7.0, phi in -4.0f64..4.0, six in any::<bool>()) {
            let dim = if six { 6 } else { 2 };
            let a = rotation(dim, theta, phi).unwrap();
            let b = rotation(dim, theta2, phi).unwrap();
            let ab = rotation(dim, theta + theta2, phi).unwrap();
            prop_assert!((&a * &b).max_abs_diff(&ab) < 1e-10);
            prop_assert!(a.unitarity_error() < 1e-12);
        }

        #[test]
        fn qubit_rotations_are_special_unitary(theta in -7.0f64..7.0, phi in -4.0f64..4.0) {
            let r = rotation(2, theta, phi).unwrap();
            let det = r.entry(0, 0) * r.entry(1, 1) - r.entry(0, 1) * r.entry(1, 0);
            prop_assert!((det - ONE).norm() < 1e-12);
        }
    }
}
