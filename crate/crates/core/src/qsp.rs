//! Quantum signal processing in the x-signal / z-processing convention.
//!
//! The signal operator is `W(a) = [[a, i√(1-a²)], [i√(1-a²), a]]`, i.e. an
//! x-rotation by `φ` with `a = cos(φ/2)`. Interleaving it with z-phases gives
//! `e^{iθ₀σz} Π_k W(a) e^{iθ_kσz}`, whose top-left entry is a degree-d
//! polynomial `P(a)` of definite parity.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin_algebra::{Unitary, C64, I, ONE, ZERO};

type M2 = [[C64; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn z_phase(theta: f64) -> M2 {
    [[C64::from_polar(1.0, theta), ZERO], [ZERO, C64::from_polar(1.0, -theta)]]
}

fn check_signal(a: f64) -> Result<()> {
    if !a.is_finite() || a.abs() > 1.0 {
        return Err(Error::Domain(format!("signal value a = {a} lies outside [-1, 1]")));
    }
    Ok(())
}

fn w_raw(a: f64) -> M2 {
    let s = I * (1.0 - a * a).max(0.0).sqrt();
    [[C64::from(a), s], [s, C64::from(a)]]
}

pub fn signal_w(a: f64) -> Result<Unitary> {
    check_signal(a)?;
    let w = w_raw(a);
    Ok(Unitary::from_matrix_unchecked(DMatrix::from_fn(2, 2, |r, c| w[r][c])))
}

/// Ordered processing phases `θ₀ … θ_d` for a degree-d sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QspPhases(Vec<f64>);

impl QspPhases {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return invalid("QSP phase list must contain at least one phase");
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return invalid(format!("QSP phase {bad} is not finite"));
        }
        Ok(QspPhases(phases))
    }

    /// All-zero phases of degree `d`, realizing `P = T_d`.
    pub fn chebyshev(degree: usize) -> Self {
        QspPhases(vec![0.0; degree + 1])
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("f64 vectors always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl TryFrom<Vec<f64>> for QspPhases {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        QspPhases::new(v)
    }
}

impl From<QspPhases> for Vec<f64> {
    fn from(p: QspPhases) -> Vec<f64> {
        p.0
    }
}

fn product_raw(phases: &[f64], a: f64) -> M2 {
    let w = w_raw(a);
    let mut u = z_phase(phases[0]);
    for &theta in &phases[1..] {
        u = m2_mul(&m2_mul(&u, &w), &z_phase(theta));
    }
    u
}

pub fn qsp_unitary(phases: &QspPhases, a: f64) -> Result<Unitary> {
    check_signal(a)?;
    let u = product_raw(phases.as_slice(), a);
    Ok(Unitary::from_matrix_unchecked(DMatrix::from_fn(2, 2, |r, c| u[r][c])))
}

/// `P(a)`, the top-left entry of the QSP product.
pub fn polynomial(phases: &QspPhases, a: f64) -> Result<C64> {
    check_signal(a)?;
    Ok(product_raw(phases.as_slice(), a)[0][0])
}

/// `(4/3) a² - 1/3`: 1 at `a = 1`, 0 at `a = ±1/2`.
pub fn bisecting_poly(a: f64) -> f64 {
    4.0 / 3.0 * a * a - 1.0 / 3.0
}

pub fn chebyshev_t(degree: usize, a: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, a);
    if degree == 0 {
        return prev;
    }
    for _ in 1..degree {
        let next = 2.0 * a * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(d: usize) -> Self {
        if d % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolynomialSpec {
    Chebyshev(usize),
    Bisecting,
    Sampled { degree: usize, points: Vec<(f64, f64)> },
}

impl PolynomialSpec {
    pub fn sampled(degree: usize, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return invalid("sampled target needs at least one point");
        }
        for &(a, t) in &points {
            check_signal(a)?;
            if !t.is_finite() || t.abs() > 1.0 {
                return invalid(format!("target |{t}| > 1 at a = {a} is not attainable"));
            }
        }
        Ok(PolynomialSpec::Sampled { degree, points })
    }

    pub fn degree(&self) -> usize {
        match self {
            PolynomialSpec::Chebyshev(d) => *d,
            PolynomialSpec::Bisecting => 2,
            PolynomialSpec::Sampled { degree, .. } => *degree,
        }
    }

    pub fn parity(&self) -> Parity {
        Parity::of_degree(self.degree())
    }

    /// `(a, target)` pairs the phase finder matches in magnitude.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        match self {
            PolynomialSpec::Chebyshev(d) => {
                let n = d + 2;
                (0..n)
                    .map(|k| {
                        let a = k as f64 / (n - 1) as f64;
                        (a, chebyshev_t(*d, a))
                    })
                    .collect()
            }
            PolynomialSpec::Bisecting => vec![(1.0, 1.0), (0.5, 0.0), (-0.5, 0.0)],
            PolynomialSpec::Sampled { points, .. } => points.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinderOptions {
    pub seed: u64,
    pub starts: usize,
    pub max_iter: usize,
    /// Required bound on every `| |P(a_i)|² - |t_i|² |`.
    pub tolerance: f64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        FinderOptions { seed: 0x5157_0001, starts: 32, max_iter: 400, tolerance: 1e-10 }
    }
}

/// Residuals `|P(a_i)|² - |t_i|²` and their analytic Jacobian.
fn residuals_and_jacobian(phases: &[f64], samples: &[(f64, f64)]) -> (Vec<f64>, DMatrix<f64>) {
    let n = phases.len();
    let mut r = Vec::with_capacity(samples.len());
    let mut jac = DMatrix::<f64>::zeros(samples.len(), n);
    let sz: M2 = [[I, ZERO], [ZERO, -I]];
    for (row, &(a, t)) in samples.iter().enumerate() {
        let w = w_raw(a);
        // blocks[k] = Z_k for k = 0, and W Z_k afterwards.
        let blocks: Vec<M2> = phases
            .iter()
            .enumerate()
            .map(|(k, &theta)| if k == 0 { z_phase(theta) } else { m2_mul(&w, &z_phase(theta)) })
            .collect();
        let mut prefix = vec![[[ONE, ZERO], [ZERO, ONE]]; n + 1];
        for k in 0..n {
            prefix[k + 1] = m2_mul(&prefix[k], &blocks[k]);
        }
        let mut suffix = vec![[[ONE, ZERO], [ZERO, ONE]]; n + 1];
        for k in (0..n).rev() {
            suffix[k] = m2_mul(&blocks[k], &suffix[k + 1]);
        }
        let p = prefix[n][0][0];
        r.push(p.norm_sqr() - t * t);
        for k in 0..n {
            // d/dθ_k e^{iθσz} = iσz e^{iθσz}, which sits at the right end of block k.
            let d_block = m2_mul(&blocks[k], &sz);
            let du = m2_mul(&m2_mul(&prefix[k], &d_block), &suffix[k + 1]);
            jac[(row, k)] = 2.0 * (p.conj() * du[0][0]).re;
        }
    }
    (r, jac)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn levenberg_marquardt(start: Vec<f64>, samples: &[(f64, f64)], opts: &FinderOptions) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut x = start;
    let (mut r, mut jac) = residuals_and_jacobian(&x, samples);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iter {
        if max_abs(&r) < opts.tolerance * 1e-2 {
            break;
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut improved = false;
        while lambda < 1e14 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * (jtj[(k, k)] + 1e-9);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + si).collect();
            let (tr, tj) = residuals_and_jacobian(&trial, samples);
            let tcost: f64 = tr.iter().map(|v| v * v).sum();
            if tcost < cost {
                x = trial;
                r = tr;
                jac = tj;
                cost = tcost;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (x, max_abs(&r))
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

pub fn find_phases(spec: &PolynomialSpec) -> Result<QspPhases> {
    find_phases_with(spec, &FinderOptions::default())
}

/// Multi-start Levenberg–Marquardt on the squared-magnitude residuals.
///
/// Deterministic for a fixed `opts.seed`.
pub fn find_phases_with(spec: &PolynomialSpec, opts: &FinderOptions) -> Result<QspPhases> {
    let samples = spec.samples();
    for &(a, t) in &samples {
        check_signal(a)?;
        if t.abs() > 1.0 {
            return invalid(format!("target |{t}| > 1 at a = {a} is not attainable"));
        }
    }
    let n = spec.degree() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.starts.max(1) {
        let start: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let (x, res) = levenberg_marquardt(start, &samples, opts);
        if best.as_ref().is_none_or(|(_, b)| res < *b) {
            best = Some((x, res));
        }
        if res < opts.tolerance {
            break;
        }
    }
    let (x, res) = best.expect("at least one start is attempted");
    if res >= opts.tolerance {
        return Err(Error::NoSolution { residual: res });
    }
    QspPhases::new(x.into_iter().map(wrap_angle).collect())
}

/// `|P(cos(φ/2))|²` for each signal angle `φ`.
pub fn response_curve(phases: &QspPhases, angles: &[f64]) -> Vec<f64> {
    angles
        .iter()
        .map(|&phi| product_raw(phases.as_slice(), (phi / 2.0).cos())[0][0].norm_sqr())
        .collect()
}
