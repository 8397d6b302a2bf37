//! Incoherent reference strategies for the three-oracle problem: one query
//! with the square-root measurement, repeated queries with voting, and
//! unambiguous discrimination.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::protocols::Encoding;
use crate::spin_algebra::{rotation, C64, ZERO};

/// Equal-prior states obtained by applying each oracle to a probe state.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricStateSet {
    states: Vec<DVector<C64>>,
    priors: Vec<f64>,
}

impl SymmetricStateSet {
    pub fn new(states: Vec<DVector<C64>>, priors: Vec<f64>) -> Result<Self> {
        if states.len() != priors.len() {
            return invalid("one prior per state is required");
        }
        if let Some(dim) = states.first().map(|s| s.len()) {
            for s in &states {
                if s.len() != dim {
                    return invalid("states must share one dimension");
                }
                if (s.norm() - 1.0).abs() > 1e-10 {
                    return invalid("states must be normalized");
                }
            }
        }
        if priors.iter().any(|p| !(0.0..=1.0).contains(p)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-10 && !priors.is_empty() {
            return invalid("priors must be probabilities summing to 1");
        }
        Ok(SymmetricStateSet { states, priors })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DVector<C64>] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// `|⟨ψ_i|ψ_j⟩|` for `i < j`, in row order.
    pub fn overlaps(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.overlap(i, j));
            }
        }
        out
    }

    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.states[i].dotc(&self.states[j]).norm()
    }

    /// Equal priors and overlaps depending only on `(j - i) mod n`.
    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let p0 = self.priors[0];
        if self.priors.iter().any(|p| (p - p0).abs() > 1e-12) {
            return false;
        }
        (0..n).all(|i| (0..n).all(|j| (self.overlap(i, j) - self.overlap(0, (j + n - i) % n)).abs() < 1e-9))
    }
}

/// `n` oracle outputs. ASK applies `R(2πj/n, π/2)` to `|0⟩`; PSK applies
/// `R(π, 2πj/n + π)` to `|+⟩`, since every PSK query maps `|0⟩` to the same ray.
pub fn symmetric_states(n: usize, encoding: Encoding) -> Result<SymmetricStateSet> {
    if n == 0 {
        return invalid("need at least one state");
    }
    let probe = match encoding {
        Encoding::Ask => DVector::from_vec(vec![C64::from(1.0), ZERO]),
        Encoding::Psk => DVector::from_vec(vec![C64::from(std::f64::consts::FRAC_1_SQRT_2); 2]),
    };
    let mut states = Vec::with_capacity(n);
    for j in 0..n {
        let a = 2.0 * PI * j as f64 / n as f64;
        let u = match encoding {
            Encoding::Ask => rotation(2, a, PI / 2.0)?,
            Encoding::Psk => rotation(2, PI, a + PI)?,
        };
        states.push(u.matrix() * &probe);
    }
    SymmetricStateSet::new(states, vec![1.0 / n as f64; n])
}

fn outer(v: &DVector<C64>) -> DMatrix<C64> {
    v * v.adjoint()
}

/// Square-root measurement `E_i = η_i ρ^{-1/2} |ψ_i⟩⟨ψ_i| ρ^{-1/2}` on the
/// support of `ρ`; the kernel projector is added to `E_0`.
pub fn square_root_povm(set: &SymmetricStateSet) -> Result<Vec<DMatrix<C64>>> {
    if set.is_empty() {
        return invalid("empty state set");
    }
    let d = set.states[0].len();
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (s, p) in set.states.iter().zip(&set.priors) {
        rho += outer(s) * C64::from(*p);
    }
    let eig = rho.clone().symmetric_eigen();
    let mut inv_sqrt = DMatrix::<C64>::zeros(d, d);
    let mut kernel = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let v = eig.eigenvectors.column(k).into_owned();
        let lam = eig.eigenvalues[k];
        if lam > 1e-12 {
            inv_sqrt += outer(&v) * C64::from(1.0 / lam.sqrt());
        } else {
            kernel += outer(&v);
        }
    }
    let mut povm: Vec<DMatrix<C64>> = set
        .states
        .iter()
        .zip(&set.priors)
        .map(|(s, p)| &inv_sqrt * outer(s) * &inv_sqrt * C64::from(*p))
        .collect();
    povm[0] += kernel;
    Ok(povm)
}

/// `L[i][j] = ⟨ψ_i|E_j|ψ_i⟩`, the chance of outcome `j` given state `i`.
pub fn likelihoods(set: &SymmetricStateSet) -> Result<Vec<Vec<f64>>> {
    let povm = square_root_povm(set)?;
    Ok(set
        .states
        .iter()
        .map(|s| povm.iter().map(|e| (s.adjoint() * e * s)[(0, 0)].re.clamp(0.0, 1.0)).collect())
        .collect())
}

fn require_symmetric(set: &SymmetricStateSet) -> Result<()> {
    if !set.is_symmetric() {
        return Err(Error::Unsupported("minimum-error baselines are implemented for symmetric sets only".into()));
    }
    Ok(())
}

/// Single-query success of the square-root measurement.
pub fn me_single_shot(set: &SymmetricStateSet) -> Result<f64> {
    require_symmetric(set)?;
    let l = likelihoods(set)?;
    Ok((0..set.len()).map(|i| set.priors[i] * l[i][i]).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// A vote without a unique most frequent outcome counts as wrong.
    Fail,
    /// Ties are broken uniformly among the most frequent outcomes.
    Uniform,
}

/// Success of voting over `k` independent single-query measurements, by exact enumeration.
pub fn me_majority(set: &SymmetricStateSet, k: usize, rule: TieRule) -> Result<f64> {
    require_symmetric(set)?;
    if k == 0 {
        return invalid("at least one query is required");
    }
    let n = set.len();
    let l = likelihoods(set)?;
    let total = n.checked_pow(k as u32).filter(|t| *t <= 50_000_000).ok_or_else(|| Error::InvalidArgument("too many outcome tuples to enumerate".into()))?;
    let mut success = 0.0;
    let mut counts = vec![0usize; n];
    for code in 0..total {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut c = code;
        let mut outcomes = Vec::with_capacity(k);
        for _ in 0..k {
            outcomes.push(c % n);
            counts[c % n] += 1;
            c /= n;
        }
        let top = *counts.iter().max().unwrap();
        let modes: Vec<usize> = (0..n).filter(|&j| counts[j] == top).collect();
        for i in 0..n {
            if !modes.contains(&i) {
                continue;
            }
            let weight = match rule {
                TieRule::Uniform => 1.0 / modes.len() as f64,
                TieRule::Fail if modes.len() == 1 => 1.0,
                TieRule::Fail => 0.0,
            };
            let p: f64 = outcomes.iter().map(|&o| l[i][o]).product();
            success += set.priors[i] * p * weight;
        }
    }
    Ok(success)
}

/// Confidence quoted for `k` agreeing single-query outcomes: one minus the
/// chance that all `k` measurements err, `1 - (1 - p_ME)^k`.
pub fn posterior_all_agree(set: &SymmetricStateSet, k: usize) -> Result<f64> {
    let p = me_single_shot(set)?;
    Ok(1.0 - (1.0 - p).powi(k as i32))
}

/// Bayesian posterior of the agreed hypothesis given `k` identical outcomes.
pub fn bayes_posterior_all_agree(set: &SymmetricStateSet, k: usize) -> Result<f64> {
    require_symmetric(set)?;
    let l = likelihoods(set)?;
    let j = 0;
    let num = set.priors[j] * l[j][j].powi(k as i32);
    let den: f64 = (0..set.len()).map(|i| set.priors[i] * l[i][j].powi(k as i32)).sum();
    Ok(num / den)
}

/// Optimal unambiguous discrimination of three states:
/// `η1 s12 s13 / s23 + η2 s12 s23 / s13 + η3 s13 s23 / s12`.
pub fn ud_success(set: &SymmetricStateSet) -> Result<f64> {
    if set.len() != 3 {
        return Err(Error::Unsupported("the closed-form UD bound covers three states".into()));
    }
    let (s12, s13, s23) = (set.overlap(0, 1), set.overlap(0, 2), set.overlap(1, 2));
    if [s12, s13, s23].iter().any(|s| *s < 1e-12) {
        return Err(Error::Domain("a vanishing overlap makes the UD formula singular".into()));
    }
    if [s12, s13, s23].iter().any(|s| *s > 1.0 - 1e-12) {
        return Err(Error::Domain("identical states cannot be discriminated unambiguously".into()));
    }
    let eta = &set.priors;
    let p = eta[0] * s12 * s13 / s23 + eta[1] * s12 * s23 / s13 + eta[2] * s13 * s23 / s12;
    if p > 1.0 {
        return Err(Error::Domain(format!("UD formula gives {p} > 1 outside its range of validity")));
    }
    Ok(p)
}

pub fn ud_multi(set: &SymmetricStateSet, trials: usize) -> Result<f64> {
    let p = ud_success(set)?;
    Ok(1.0 - (1.0 - p).powi(trials as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvantageRow {
    pub strategy: String,
    pub probability: f64,
    pub baseline: bool,
    /// Whether the supplied accuracy is strictly higher than this row.
    pub exceeded: bool,
}

/// Compares an accuracy with the coherent simulation and the four incoherent baselines.
pub fn advantage_report(accuracy: f64, coherent_simulated: f64, set: &SymmetricStateSet) -> Result<Vec<AdvantageRow>> {
    if !(0.0..=1.0).contains(&accuracy) {
        return invalid("accuracy must be a probability");
    }
    let rows = [
        ("coherent QSP (simulated)", coherent_simulated, false),
        ("single-shot minimum error", me_single_shot(set)?, true),
        ("4-query majority vote", me_majority(set, 4, TieRule::Fail)?, true),
        ("4 agreeing outcomes", posterior_all_agree(set, 4)?, true),
        ("4-trial unambiguous", ud_multi(set, 4)?, true),
    ];
    Ok(rows
        .iter()
        .map(|(name, p, baseline)| AdvantageRow {
            strategy: name.to_string(),
            probability: *p,
            baseline: *baseline,
            exceeded: accuracy > *p,
        })
        .collect())
}
