//! Independent reference integrator shared by the integration targets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Spin matrices from the ladder operator, basis ordered m = J, J-1, ...
pub fn spin(dim: usize) -> (DMatrix<C>, DMatrix<C>, DMatrix<C>) {
    let j = (dim as f64 - 1.0) / 2.0;
    let mut jp = DMatrix::<C>::zeros(dim, dim);
    for k in 1..dim {
        let m = j - k as f64;
        jp[(k - 1, k)] = C::from((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * C::from(0.5);
    let jy = (&jp - &jm) * C::new(0.0, -0.5);
    let jz = DMatrix::from_fn(dim, dim, |r, c| if r == c { C::from(j - r as f64) } else { C::from(0.0) });
    (jx, jy, jz)
}

pub fn taylor_exp(a: &DMatrix<C>) -> DMatrix<C> {
    let n = a.nrows();
    let mut term = DMatrix::<C>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * a / C::from(k as f64);
        sum += &term;
    }
    sum
}

/// Second-order split of `exp(-i(A + B)t)` with `A = 2πΔJz` exact and `B` the drive.
pub fn trotter(dim: usize, theta: f64, phi: f64, detuning: f64, amp: f64, omega: f64, psi: &DVector<C>, steps: usize) -> DVector<C> {
    let (jx, jy, jz) = spin(dim);
    let (theta, phi) = if theta < 0.0 { (-theta, phi + PI) } else { (theta, phi) };
    let t = theta / omega;
    let dt = t / steps as f64;
    let drive = (&jx * C::from(phi.cos()) + &jy * C::from(phi.sin())) * C::from(omega * (1.0 + amp));
    let half = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C::from_polar(1.0, -2.0 * PI * detuning * jz[(r, r)].re * dt / 2.0)
        } else {
            C::from(0.0)
        }
    });
    let kick = taylor_exp(&(drive * C::new(0.0, -dt)));
    let step = &half * kick * &half;
    let mut v = psi.clone();
    for _ in 0..steps {
        v = &step * v;
    }
    v
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> DVector<C> {
    let v = DVector::from_fn(dim, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let n = v.norm();
    v / C::from(n)
}
