//! Magnetic-field drift, the Ramsey feed-forward servo that keeps the rf
//! drive on the Zeeman resonance, and Allan-deviation analysis.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ion_sim::{detuning_scan, ExperimentConfig, NoiseModel};
use crate::protocols::PulseSequence;

/// Detuning per unit field error, from the pairing of 30 Hz with 20 µG.
pub const HZ_PER_GAUSS: f64 = 30.0 / 20e-6;

/// Nominal Zeeman splitting of the rf transition.
pub const CARRIER_FREQ_HZ: f64 = 8.6e6;

pub fn field_to_detuning_hz(gauss: f64) -> f64 {
    gauss * HZ_PER_GAUSS
}

pub fn detuning_to_field_gauss(hz: f64) -> f64 {
    hz / HZ_PER_GAUSS
}

/// Two π/2 pulses around a free evolution of `interrogation_s`; `side` = ±1 picks the fringe side.
pub fn ramsey_probability(delta_hz: f64, interrogation_s: f64, side: f64) -> f64 {
    0.5 * (1.0 + side.signum() * (2.0 * PI * delta_hz * interrogation_s).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    None,
    WhiteFm,
    RandomWalkFm,
    Composite,
}

/// Fractional-frequency noise of the Zeeman resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    /// White FM level: σ_y(τ) = white_fm / √τ, with τ in seconds.
    pub white_fm: f64,
    /// Random-walk FM increment density per √s: σ_y(τ) = random_walk_fm · √(τ/3).
    pub random_walk_fm: f64,
    pub carrier_freq_hz: f64,
}

impl DriftModel {
    pub fn none() -> Self {
        DriftModel { white_fm: 0.0, random_walk_fm: 0.0, carrier_freq_hz: CARRIER_FREQ_HZ }
    }

    pub fn white(level: f64) -> Self {
        DriftModel { white_fm: level, ..DriftModel::none() }
    }

    pub fn random_walk(level: f64) -> Self {
        DriftModel { random_walk_fm: level, ..DriftModel::none() }
    }

    pub fn composite(white_fm: f64, random_walk_fm: f64) -> Self {
        DriftModel { white_fm, random_walk_fm, carrier_freq_hz: CARRIER_FREQ_HZ }
    }

    /// Averages down to about 1.3e-7 at 10 s, with the random walk taking over near 35 s.
    pub fn lab() -> Self {
        DriftModel::composite(4e-7, 2e-8)
    }

    pub fn kind(&self) -> DriftKind {
        match (self.white_fm > 0.0, self.random_walk_fm > 0.0) {
            (false, false) => DriftKind::None,
            (true, false) => DriftKind::WhiteFm,
            (false, true) => DriftKind::RandomWalkFm,
            (true, true) => DriftKind::Composite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.white_fm >= 0.0 && self.random_walk_fm >= 0.0) || !self.white_fm.is_finite() || !self.random_walk_fm.is_finite() {
            return invalid("drift amplitudes must be finite and non-negative");
        }
        if !(self.carrier_freq_hz > 0.0) {
            return invalid("carrier frequency must be positive");
        }
        Ok(())
    }

    /// Fractional frequency sampled every `dt` seconds, `n` samples.
    pub fn sample(&self, n: usize, dt: f64, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if !(dt > 0.0) {
            return invalid("sample period must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let white = self.white_fm / dt.sqrt();
        let step = self.random_walk_fm * dt.sqrt();
        let mut walk = 0.0;
        Ok((0..n)
            .map(|_| {
                walk += step * normal.sample(&mut rng);
                walk + white * normal.sample(&mut rng)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoConfig {
    pub interrogation_s: f64,
    pub step_hz: f64,
    /// Calibrated probe offset subtracted from the Ramsey measurement.
    pub offset_hz: f64,
    /// Actual shift of the probed resonance; differs from `offset_hz` by the calibration error.
    pub light_shift_hz: f64,
    pub period_s: f64,
    /// Shots per fringe side; `None` uses exact probabilities.
    pub shots: Option<u64>,
    /// Detuning of the rf drive at `t = 0`.
    pub initial_detuning_hz: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            interrogation_s: 5e-3,
            step_hz: 5.0,
            offset_hz: 100.0,
            light_shift_hz: 100.0,
            period_s: 1.0,
            shots: Some(50),
            initial_detuning_hz: 0.0,
        }
    }
}

impl ServoConfig {
    /// Default loop with the probe shift off its calibrated value by 18 Hz.
    pub fn lab() -> Self {
        ServoConfig { light_shift_hz: 114.0, ..ServoConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.interrogation_s > 0.0 && self.step_hz > 0.0 && self.period_s > 0.0 && self.offset_hz >= 0.0) {
            return invalid("servo interrogation, step and period must be positive");
        }
        if self.shots == Some(0) {
            return invalid("servo needs at least one shot per fringe side");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServoSample {
    pub t: f64,
    pub true_freq_hz: f64,
    pub applied_freq_hz: f64,
    pub residual_hz: f64,
}

/// Runs the feed-forward loop for `duration_s`. Each period records the
/// residual detuning, then measures both fringe sides and steps the rf
/// frequency by `step_hz` toward resonance.
pub fn simulate_servo(drift: &DriftModel, servo: &ServoConfig, duration_s: f64, seed: u64) -> Result<Vec<ServoSample>> {
    servo.validate()?;
    let n = (duration_s / servo.period_s).floor() as usize;
    let y = drift.sample(n, servo.period_s, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let carrier = drift.carrier_freq_hz;
    let mut applied = carrier - servo.initial_detuning_hz;
    let mut out = Vec::with_capacity(n);
    for (k, yk) in y.iter().enumerate() {
        let true_freq = carrier * (1.0 + yk);
        let residual = true_freq - applied;
        out.push(ServoSample { t: k as f64 * servo.period_s, true_freq_hz: true_freq, applied_freq_hz: applied, residual_hz: residual });
        let probe = residual + servo.light_shift_hz - servo.offset_hz;
        let p_plus = ramsey_probability(probe, servo.interrogation_s, 1.0);
        let p_minus = ramsey_probability(probe, servo.interrogation_s, -1.0);
        let signal = match servo.shots {
            None => p_plus - p_minus,
            Some(shots) => {
                let draw = |p: f64, rng: &mut ChaCha8Rng| {
                    Binomial::new(shots, p.clamp(0.0, 1.0)).expect("valid binomial").sample(rng) as f64 / shots as f64
                };
                draw(p_plus, &mut rng) - draw(p_minus, &mut rng)
            }
        };
        if signal > 1e-12 {
            applied += servo.step_hz;
        } else if signal < -1e-12 {
            applied -= servo.step_hz;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllanPoint {
    pub tau: f64,
    pub sigma_y: f64,
}

/// Overlapping Allan deviation of a uniformly sampled fractional-frequency series.
pub fn allan_deviation(series: &[(f64, f64)], taus: &[f64]) -> Result<Vec<AllanPoint>> {
    if series.len() < 2 {
        return invalid("Allan deviation needs at least two samples");
    }
    let tau0 = series[1].0 - series[0].0;
    if !(tau0 > 0.0) {
        return invalid("sample times must increase");
    }
    for w in series.windows(2) {
        if ((w[1].0 - w[0].0) - tau0).abs() > 1e-9 * tau0.max(1.0) {
            return invalid("series must be uniformly sampled");
        }
    }
    // Phase data x_i = τ0 Σ y.
    let mut x = Vec::with_capacity(series.len() + 1);
    x.push(0.0);
    for (_, y) in series {
        x.push(x.last().unwrap() + y * tau0);
    }
    let n = series.len();
    taus.iter()
        .map(|&tau| {
            let m_f = tau / tau0;
            let m = m_f.round() as usize;
            if m == 0 || (m_f - m as f64).abs() > 1e-6 {
                return invalid(format!("tau = {tau} is not a multiple of the sample period {tau0}"));
            }
            if n < 2 * m {
                return invalid(format!("series of {n} samples is shorter than 2τ for τ = {tau}"));
            }
            let terms = x.len() - 2 * m;
            let sum: f64 = (0..terms)
                .map(|i| {
                    let d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
                    d * d
                })
                .sum();
            let sigma2 = sum / (2.0 * (m as f64 * tau0).powi(2) * terms as f64);
            Ok(AllanPoint { tau: m as f64 * tau0, sigma_y: sigma2.sqrt() })
        })
        .collect()
}

/// Least-squares slope of log σ_y against log τ.
pub fn allan_slope(points: &[AllanPoint]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p.tau.ln(), p.sigma_y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean inaccuracy of `seq` over a residual-detuning record.
///
/// The oracle-averaged accuracy curve is computed on a 1 Hz grid covering
/// the residuals and linearly interpolated.
pub fn detuning_error_budget(residuals_hz: &[f64], seq: &PulseSequence, noise: &NoiseModel, config: &ExperimentConfig) -> Result<f64> {
    if residuals_hz.is_empty() {
        return invalid("empty residual record");
    }
    if residuals_hz.iter().any(|r| !r.is_finite()) {
        return invalid("residuals must be finite");
    }
    let lo = residuals_hz.iter().cloned().fold(f64::INFINITY, f64::min).floor() - 1.0;
    let hi = residuals_hz.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0;
    let grid: Vec<f64> = (0..=((hi - lo) as usize)).map(|k| lo + k as f64).collect();
    let rows = detuning_scan(seq, &grid, noise, config)?;
    let curve: Vec<f64> = rows.iter().map(|r| 1.0 - r.accuracy.iter().sum::<f64>() / 3.0).collect();
    let total: f64 = residuals_hz
        .iter()
        .map(|&r| {
            let pos = r - lo;
            let i = (pos.floor() as usize).min(curve.len() - 2);
            let f = pos - i as f64;
            curve[i] * (1.0 - f) + curve[i + 1] * f
        })
        .sum();
    Ok(total / residuals_hz.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramsey_examples() {
        assert_eq!(ramsey_probability(0.0, 5e-3, 1.0), 0.5);
        assert_eq!(ramsey_probability(0.0, 5e-3, -1.0), 0.5);
        assert!((ramsey_probability(50.0, 5e-3, 1.0) - 1.0).abs() < 1e-12);
        assert!(ramsey_probability(50.0, 5e-3, -1.0).abs() < 1e-12);
        for k in 0..50 {
            let d = k as f64 * 0.7;
            let diff = |d: f64| ramsey_probability(d, 5e-3, 1.0) - ramsey_probability(d, 5e-3, -1.0);
            assert!((diff(d) + diff(-d)).abs() < 1e-14);
        }
    }

    #[test]
    fn field_conversion_is_consistent() {
        assert!((field_to_detuning_hz(20e-6) - 30.0).abs() < 1e-9);
        // Adjacent D5/2 sublevels split by g_J μ_B B with g_J = 6/5.
        let zeeman = 1.2 * 1.399_624_6e6;
        assert!(((zeeman - HZ_PER_GAUSS) / HZ_PER_GAUSS).abs() < 0.2);
        // The 8.6 MHz carrier then sits at a field of about 5 G.
        assert!((CARRIER_FREQ_HZ / zeeman - 5.1).abs() < 0.1);
    }

    #[test]
    fn idle_servo_stays_within_one_step() {
        let servo = ServoConfig { shots: None, ..ServoConfig::default() };
        let r = simulate_servo(&DriftModel::none(), &servo, 100.0, 1).unwrap();
        assert_eq!(r.len(), 100);
        assert!(r.iter().all(|s| s.residual_hz.abs() <= 5.0));
    }

    #[test]
    fn servo_pulls_in_a_static_offset() {
        let servo = ServoConfig { shots: None, initial_detuning_hz: 20.0, ..ServoConfig::default() };
        let r = simulate_servo(&DriftModel::none(), &servo, 30.0, 1).unwrap();
        // Step-counting oracle: 20 Hz at 5 Hz per period.
        let lock = r.iter().position(|s| s.residual_hz.abs() <= 5.0).unwrap();
        assert!(lock <= 8, "{lock}");
        assert!(r[lock..].iter().all(|s| s.residual_hz.abs() <= 5.0));
        assert_eq!(lock, 3);
    }

    #[test]
    fn allan_basics() {
        let flat: Vec<(f64, f64)> = (0..100).map(|k| (k as f64, 3e-7)).collect();
        let a = allan_deviation(&flat, &[1.0, 10.0]).unwrap();
        assert!(a.iter().all(|p| p.sigma_y < 1e-20));
        assert!(allan_deviation(&flat, &[60.0]).is_err());
        assert!(allan_deviation(&flat, &[1.5]).is_err());
    }

    #[test]
    fn allan_is_offset_invariant() {
        let y = DriftModel::composite(1e-7, 1e-8).sample(500, 1.0, 3).unwrap();
        let a: Vec<(f64, f64)> = y.iter().enumerate().map(|(k, v)| (k as f64, *v)).collect();
        let b: Vec<(f64, f64)> = y.iter().enumerate().map(|(k, v)| (k as f64, v + 0.25)).collect();
        let taus = [1.0, 4.0, 16.0];
        let (sa, sb) = (allan_deviation(&a, &taus).unwrap(), allan_deviation(&b, &taus).unwrap());
        for (p, q) in sa.iter().zip(&sb) {
            assert!(((p.sigma_y - q.sigma_y) / p.sigma_y).abs() < 1e-6);
        }
    }

    #[test]
    fn allan_slopes_of_standard_noises() {
        let taus: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0].to_vec();
        let series = |m: &DriftModel| -> Vec<(f64, f64)> {
            m.sample(100_000, 1.0, 11).unwrap().into_iter().enumerate().map(|(k, v)| (k as f64, v)).collect()
        };
        let white = allan_slope(&allan_deviation(&series(&DriftModel::white(1e-7)), &taus).unwrap());
        assert!((white + 0.5).abs() < 0.1, "{white}");
        let walk = allan_slope(&allan_deviation(&series(&DriftModel::random_walk(1e-8)), &taus).unwrap());
        assert!((walk - 0.5).abs() < 0.1, "{walk}");
    }

    #[test]
    fn drift_kinds() {
        assert_eq!(DriftModel::none().kind(), DriftKind::None);
        assert_eq!(DriftModel::lab().kind(), DriftKind::Composite);
        assert!(DriftModel::white(-1.0).validate().is_err());
    }
}
