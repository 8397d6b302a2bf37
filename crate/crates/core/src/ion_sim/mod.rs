//! Single-ion simulator: a D manifold driven by rf plus two S sublevels
//! reached by laser, with detuning, amplitude and laser errors, shelving and
//! sequential fluorescence readout.
//!
//! Basis order is the D sublevels `m = +J … -J` followed by `S(+1/2)`,
//! `S(-1/2)`. The D manifold is spin 5/2 by default; a spin-1/2 D block gives
//! the qubit reduction of the same pulse programs.

mod readout;
mod scans;

pub use readout::{sequential_readout, ReadoutMode, ReadoutResult};
pub use scans::{
    angle_scan, detuning_scan, light_shift_isolation, rabi_curve, time_series, AngleRow, DetuningRow,
    LightShiftRow, RabiRow, TimePoint,
};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::protocols::{three_angles, Channel, Encoding, OracleSpec, Pulse, PulseSequence};
use crate::spin_algebra::{check_dim, hermitian_propagator, spin_operators, C64, I, ONE, ZERO};

/// Rabi frequency giving a 55 µs rf π pulse.
pub const DEFAULT_RABI_FREQ: f64 = PI / 55e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct IonState {
    d_dim: usize,
    amps: Vec<C64>,
    elapsed: f64,
}

impl IonState {
    pub fn basis(d_dim: usize, level: usize) -> Result<Self> {
        check_dim(d_dim)?;
        if level >= d_dim + 2 {
            return Err(Error::IndexOutOfRange { index: level, len: d_dim + 2 });
        }
        let mut amps = vec![ZERO; d_dim + 2];
        amps[level] = ONE;
        Ok(IonState { d_dim, amps, elapsed: 0.0 })
    }

    pub fn from_amplitudes(d_dim: usize, amps: Vec<C64>) -> Result<Self> {
        check_dim(d_dim)?;
        if amps.len() != d_dim + 2 {
            return invalid(format!("expected {} amplitudes, got {}", d_dim + 2, amps.len()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return invalid(format!("state norm {norm} differs from 1"));
        }
        Ok(IonState { d_dim, amps, elapsed: 0.0 })
    }

    pub fn d_dim(&self) -> usize {
        self.d_dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Index of S sublevel `k` (0 for m = +1/2, 1 for m = -1/2).
    pub fn s_index(&self, k: usize) -> usize {
        self.d_dim + k
    }

    pub fn s_population(&self) -> f64 {
        self.amps[self.d_dim].norm_sqr() + self.amps[self.d_dim + 1].norm_sqr()
    }

    /// Time spent in pulses and gaps so far, in seconds.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }
}

/// D-manifold index of the sublevel with magnetic quantum number `twice_m / 2`.
pub fn d_level(d_dim: usize, twice_m: i32) -> Result<usize> {
    let j2 = d_dim as i32 - 1;
    if twice_m.abs() > j2 || (j2 - twice_m) % 2 != 0 {
        return invalid(format!("m = {twice_m}/2 is not a sublevel of a {d_dim}-level manifold"));
    }
    Ok(((j2 - twice_m) / 2) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub detuning_hz: f64,
    pub rf_amp_error: f64,
    pub laser_pi_error: f64,
    pub spam_error: f64,
    /// Per-second loss rate out of the readout space.
    pub leakage_rate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel { detuning_hz: 0.0, rf_amp_error: 0.0, laser_pi_error: 0.0, spam_error: 0.0, leakage_rate: 0.0 }
    }

    pub fn with_detuning(detuning_hz: f64) -> Self {
        NoiseModel { detuning_hz, ..NoiseModel::ideal() }
    }

    /// Measured preparation, detection and laser budget of 0.21 %, split
    /// between detection flips and laser π failures; D-state decay is
    /// included as a slow leakage rate.
    pub fn lab() -> Self {
        NoiseModel {
            detuning_hz: 0.0,
            rf_amp_error: 0.0,
            laser_pi_error: 0.0003,
            spam_error: 0.0006,
            leakage_rate: 0.85,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("laser_pi_error", self.laser_pi_error),
            ("spam_error", self.spam_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} = {p} is not a probability"));
            }
        }
        if !self.detuning_hz.is_finite() || !self.rf_amp_error.is_finite() {
            return invalid("detuning and amplitude error must be finite");
        }
        if !(self.leakage_rate >= 0.0 && self.leakage_rate.is_finite()) {
            return invalid(format!("leakage_rate = {} must be finite and non-negative", self.leakage_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserPair {
    pub name: String,
    pub d_level: usize,
    pub s_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d_dim: usize,
    /// rf Rabi frequency in rad/s; a rotation by θ takes |θ| / rabi_freq.
    pub rabi_freq: f64,
    /// Free evolution between consecutive pulses, seconds.
    pub pulse_gap: f64,
    /// Duration of each laser π pulse, seconds; 0 makes lasers instantaneous.
    pub laser_duration: f64,
    /// If set, ASK queries occupy this fixed slot, padded with free evolution.
    pub ask_oracle_slot: Option<f64>,
    /// S sublevel (0 or 1) the ion is pumped into and deshelved through.
    pub s_level: usize,
    pub laser_pairs: Vec<LaserPair>,
    /// D levels read out as state 1 and state 2.
    pub readout_levels: [usize; 2],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::psk3()
    }
}

impl ExperimentConfig {
    fn layout(d_dim: usize, shelve: usize, readout_levels: [usize; 2]) -> Self {
        ExperimentConfig {
            d_dim,
            rabi_freq: DEFAULT_RABI_FREQ,
            pulse_gap: 0.0,
            laser_duration: 0.0,
            ask_oracle_slot: None,
            s_level: 0,
            laser_pairs: vec![LaserPair { name: "Laser".into(), d_level: shelve, s_level: 0 }],
            readout_levels,
        }
    }

    /// Phase-encoded layout: shelving on `m = +1/2`, state 1 on `m = -1/2`,
    /// state 2 on `m = +1/2`.
    pub fn psk3() -> Self {
        ExperimentConfig::layout(6, 2, [3, 2])
    }

    /// Angle-encoded layout: shelving on `m = +5/2`, state 1 on `m = +5/2`,
    /// state 2 on `m = -5/2`.
    pub fn ask3() -> Self {
        ExperimentConfig::layout(6, 0, [0, 5])
    }

    /// Angle-encoded layout on a spin-1/2 D block.
    pub fn qubit_ask3() -> Self {
        ExperimentConfig::layout(2, 0, [0, 1])
    }

    pub fn for_sequence(seq: &PulseSequence) -> Self {
        match seq.encoding() {
            Encoding::Psk => ExperimentConfig::psk3(),
            Encoding::Ask => ExperimentConfig::ask3(),
        }
    }

    /// Layout of [`ExperimentConfig::for_sequence`] with 200 µs composite laser pulses.
    pub fn lab(encoding: Encoding) -> Self {
        let base = match encoding {
            Encoding::Psk => ExperimentConfig::psk3(),
            Encoding::Ask => ExperimentConfig::ask3(),
        };
        ExperimentConfig { laser_duration: 200e-6, ..base }
    }

    pub fn pi_time(&self) -> f64 {
        PI / self.rabi_freq
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.d_dim)?;
        if !(self.rabi_freq > 0.0 && self.rabi_freq.is_finite()) {
            return invalid(format!("rabi_freq = {} must be positive", self.rabi_freq));
        }
        if !(self.pulse_gap >= 0.0) || !(self.laser_duration >= 0.0) {
            return invalid("pulse_gap and laser_duration must be non-negative");
        }
        if self.s_level > 1 {
            return Err(Error::IndexOutOfRange { index: self.s_level, len: 2 });
        }
        for pair in &self.laser_pairs {
            if pair.d_level >= self.d_dim || pair.s_level > 1 {
                return invalid(format!("laser pair '{}' addresses a missing level", pair.name));
            }
        }
        if self.readout_levels.iter().any(|&l| l >= self.d_dim) || self.readout_levels[0] == self.readout_levels[1] {
            return invalid("readout levels must be two distinct D levels");
        }
        Ok(())
    }

    pub fn laser_pair(&self, name: &str) -> Result<&LaserPair> {
        self.laser_pairs
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown laser pair '{name}'")))
    }
}

pub fn init_state(config: &ExperimentConfig) -> Result<IonState> {
    config.validate()?;
    IonState::basis(config.d_dim, config.d_dim + config.s_level)
}

/// Elementary step of a pulse program.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Segment {
    Rf { theta: f64, phi: f64 },
    Laser { d_level: usize, s_level: usize, theta: f64, phase: f64 },
    Free { duration: f64 },
}

impl Segment {
    pub(crate) fn duration(&self, config: &ExperimentConfig) -> f64 {
        match self {
            Segment::Rf { theta, .. } => theta.abs() / config.rabi_freq,
            Segment::Laser { .. } => config.laser_duration,
            Segment::Free { duration } => *duration,
        }
    }
}

fn zeeman(d_dim: usize, n: usize, detuning_hz: f64) -> DMatrix<C64> {
    let ops = spin_operators(d_dim).expect("dimension checked by caller");
    let mut h = DMatrix::<C64>::zeros(n, n);
    let w = 2.0 * PI * detuning_hz;
    for k in 0..d_dim {
        h[(k, k)] = ops.jz[(k, k)] * w;
    }
    h
}

fn laser_angle(theta: f64, noise: &NoiseModel) -> f64 {
    // Scaled so that a π pulse failing with probability p leaves p behind.
    theta * (1.0 - noise.laser_pi_error).sqrt().asin() / (PI / 2.0)
}

/// Applies `fraction` ∈ [0, 1] of a segment.
pub(crate) fn apply_segment(
    state: &mut IonState,
    seg: &Segment,
    fraction: f64,
    noise: &NoiseModel,
    config: &ExperimentConfig,
) -> Result<()> {
    let d = state.d_dim;
    let n = d + 2;
    let duration = seg.duration(config) * fraction;
    match seg {
        Segment::Rf { theta, phi } => {
            if *theta == 0.0 || fraction == 0.0 {
                return Ok(());
            }
            let ops = spin_operators(d)?;
            let phi = if *theta < 0.0 { phi + PI } else { *phi };
            let drive = ops.j_phi(phi) * C64::from(config.rabi_freq * (1.0 + noise.rf_amp_error));
            let h = DMatrix::from_fn(d, d, |r, c| drive[(r, c)] + if r == c { ops.jz[(r, r)] * (2.0 * PI * noise.detuning_hz) } else { ZERO });
            let u = hermitian_propagator(&h, duration)?;
            let moved = u.apply(&state.amps[..d]);
            state.amps[..d].copy_from_slice(&moved);
        }
        Segment::Laser { d_level, s_level, theta, phase } => {
            let beta = laser_angle(*theta, noise) * fraction;
            let (a, b) = (*d_level, d + s_level);
            if config.laser_duration == 0.0 {
                let c = C64::from((beta / 2.0).cos());
                let s = -I * (beta / 2.0).sin();
                let (x, y) = (state.amps[a], state.amps[b]);
                state.amps[a] = c * x + s * C64::from_polar(1.0, -phase) * y;
                state.amps[b] = s * C64::from_polar(1.0, *phase) * x + c * y;
            } else if fraction > 0.0 {
                let mut h = zeeman(d, n, noise.detuning_hz);
                let g = laser_angle(*theta, noise) / (2.0 * config.laser_duration);
                h[(a, b)] += C64::from_polar(g, -phase);
                h[(b, a)] += C64::from_polar(g, *phase);
                let u = hermitian_propagator(&h, duration)?;
                state.amps = u.apply(&state.amps);
            }
        }
        Segment::Free { .. } => {
            if duration > 0.0 && noise.detuning_hz != 0.0 {
                let ops = spin_operators(d)?;
                for k in 0..d {
                    let e = ops.jz[(k, k)].re * 2.0 * PI * noise.detuning_hz * duration;
                    state.amps[k] *= C64::from_polar(1.0, -e);
                }
            }
        }
    }
    state.elapsed += duration;
    Ok(())
}

/// rf pulse on the D block: `exp(-i(2πΔ Jz + Ω(1+ε) J_φ) t)` with `t = |θ| / Ω`.
/// Negative θ is driven as |θ| about `φ + π`.
pub fn apply_rf(state: &IonState, theta: f64, phi: f64, noise: &NoiseModel, config: &ExperimentConfig) -> Result<IonState> {
    check_state(state, config)?;
    let mut out = state.clone();
    apply_segment(&mut out, &Segment::Rf { theta, phi }, 1.0, noise, config)?;
    Ok(out)
}

/// Laser π pulse between the D and S levels of a named pair.
pub fn apply_laser_pi(state: &IonState, pair_name: &str, noise: &NoiseModel, config: &ExperimentConfig) -> Result<IonState> {
    apply_laser(state, pair_name, PI, 0.0, noise, config)
}

/// Laser rotation by `theta` with phase `phase` on a named pair.
pub fn apply_laser(
    state: &IonState,
    pair_name: &str,
    theta: f64,
    phase: f64,
    noise: &NoiseModel,
    config: &ExperimentConfig,
) -> Result<IonState> {
    check_state(state, config)?;
    let pair = config.laser_pair(pair_name)?;
    let seg = Segment::Laser { d_level: pair.d_level, s_level: pair.s_level, theta, phase };
    let mut out = state.clone();
    apply_segment(&mut out, &seg, 1.0, noise, config)?;
    Ok(out)
}

/// PSK: π about `φ_i + π`. ASK: `θ_i` about `y`.
pub fn apply_oracle(state: &IonState, oracle: &OracleSpec, noise: &NoiseModel, config: &ExperimentConfig) -> Result<IonState> {
    let pulse = match oracle.encoding {
        Encoding::Psk => Pulse::psk_oracle(0, PI),
        Encoding::Ask => Pulse::ask_oracle(0, PI / 2.0),
    };
    let (theta, phi) = pulse.resolve(oracle.encoding, oracle.angle());
    apply_rf(state, theta, phi, noise, config)
}

fn check_state(state: &IonState, config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    if state.d_dim != config.d_dim {
        return invalid(format!("state has a {}-level D block, config expects {}", state.d_dim, config.d_dim));
    }
    Ok(())
}

/// Expands a sequence into timed segments for a given signal angle.
pub(crate) fn segments(seq: &PulseSequence, signal: f64, config: &ExperimentConfig) -> Result<Vec<Segment>> {
    let mut out = Vec::with_capacity(seq.pulses().len() * 2);
    for (k, p) in seq.pulses().iter().enumerate() {
        if k > 0 && config.pulse_gap > 0.0 {
            out.push(Segment::Free { duration: config.pulse_gap });
        }
        match p.channel {
            Channel::Laser => {
                let pair = config.laser_pair(&p.label)?;
                out.push(Segment::Laser { d_level: pair.d_level, s_level: pair.s_level, theta: p.theta, phase: p.phi });
            }
            Channel::Rf => out.push(Segment::Rf { theta: p.theta, phi: p.phi }),
            Channel::Oracle => {
                let (theta, phi) = p.resolve(seq.encoding(), signal);
                out.push(Segment::Rf { theta, phi });
                if let (Encoding::Ask, Some(slot)) = (seq.encoding(), config.ask_oracle_slot) {
                    let used = theta.abs() / config.rabi_freq;
                    if used > slot + 1e-15 {
                        return invalid(format!("ASK query of {used:.3e} s exceeds the {slot:.3e} s slot"));
                    }
                    out.push(Segment::Free { duration: slot - used });
                }
            }
        }
    }
    Ok(out)
}

/// Final state of a sequence with the oracle fixed to `signal`.
pub fn evolve(seq: &PulseSequence, signal: f64, noise: &NoiseModel, config: &ExperimentConfig) -> Result<IonState> {
    noise.validate()?;
    let mut state = init_state(config)?;
    for seg in segments(seq, signal, config)? {
        apply_segment(&mut state, &seg, 1.0, noise, config)?;
    }
    Ok(state)
}

pub fn run_signal(seq: &PulseSequence, signal: f64, noise: &NoiseModel, config: &ExperimentConfig) -> Result<ReadoutResult> {
    let state = evolve(seq, signal, noise, config)?;
    sequential_readout(&state, noise, config, ReadoutMode::Distribution)
}

/// Runs the sequence against candidate `oracle_index` of `0, 2π/3, 4π/3`.
pub fn run(seq: &PulseSequence, oracle_index: usize, noise: &NoiseModel, config: &ExperimentConfig) -> Result<ReadoutResult> {
    let angles = three_angles();
    if oracle_index >= angles.len() {
        return Err(Error::IndexOutOfRange { index: oracle_index, len: angles.len() });
    }
    run_signal(seq, angles[oracle_index], noise, config)
}

pub fn run_oracle(seq: &PulseSequence, oracle: &OracleSpec, noise: &NoiseModel, config: &ExperimentConfig) -> Result<ReadoutResult> {
    if oracle.encoding != seq.encoding() {
        return invalid("oracle encoding does not match the sequence");
    }
    run_signal(seq, oracle.angle(), noise, config)
}

/// Probability that candidate `oracle_index` is read out as its mapped state.
pub fn accuracy(seq: &PulseSequence, oracle_index: usize, noise: &NoiseModel, config: &ExperimentConfig) -> Result<f64> {
    let r = run(seq, oracle_index, noise, config)?;
    let target = *seq
        .readout_map()
        .get(oracle_index)
        .ok_or(Error::IndexOutOfRange { index: oracle_index, len: seq.readout_map().len() })?;
    Ok(r.probabilities[target])
}
