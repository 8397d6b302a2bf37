use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{apply_segment, accuracy, init_state, d_level, run_signal, segments, ExperimentConfig, IonState, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::protocols::PulseSequence;
use crate::spin_algebra::{hermitian_propagator, spin_operators, C64};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimePoint {
    pub time: f64,
    /// Instantaneous populations of the three readout states.
    pub populations: [f64; 3],
    pub other: f64,
}

fn readout_populations(state: &IonState, config: &ExperimentConfig) -> ([f64; 3], f64) {
    let pops = state.populations();
    let p = [state.s_population(), pops[config.readout_levels[0]], pops[config.readout_levels[1]]];
    (p, (1.0 - p.iter().sum::<f64>()).max(0.0))
}

/// Readout-state populations at `n_points` evenly spaced times over the sequence,
/// with the pulse in progress applied up to each time.
pub fn time_series(
    seq: &PulseSequence,
    signal: f64,
    n_points: usize,
    noise: &NoiseModel,
    config: &ExperimentConfig,
) -> Result<Vec<TimePoint>> {
    if n_points < 2 {
        return invalid("time_series needs at least two points");
    }
    noise.validate()?;
    let segs = segments(seq, signal, config)?;
    let total: f64 = segs.iter().map(|s| s.duration(config)).sum();
    let times: Vec<f64> = (0..n_points).map(|k| total * k as f64 / (n_points - 1) as f64).collect();
    let mut out = Vec::with_capacity(n_points);
    let mut state = init_state(config)?;
    let mut next = 0;
    let mut t0 = 0.0;
    for seg in &segs {
        let dur = seg.duration(config);
        while next < n_points - 1 && times[next] < t0 + dur {
            let mut partial = state.clone();
            let frac = if dur > 0.0 { (times[next] - t0) / dur } else { 0.0 };
            apply_segment(&mut partial, seg, frac, noise, config)?;
            let (p, other) = readout_populations(&partial, config);
            out.push(TimePoint { time: times[next], populations: p, other });
            next += 1;
        }
        apply_segment(&mut state, seg, 1.0, noise, config)?;
        t0 += dur;
    }
    while next < n_points {
        let (p, other) = readout_populations(&state, config);
        out.push(TimePoint { time: times[next], populations: p, other });
        next += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleRow {
    pub angle: f64,
    pub populations: [f64; 3],
}

/// Readout probabilities with the oracle angle swept over `grid`.
pub fn angle_scan(seq: &PulseSequence, grid: &[f64], noise: &NoiseModel, config: &ExperimentConfig) -> Result<Vec<AngleRow>> {
    grid.par_iter()
        .map(|&angle| {
            let r = run_signal(seq, angle, noise, config)?;
            let p = r.probabilities;
            Ok(AngleRow { angle, populations: [p[0], p[1], p[2]] })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningRow {
    pub detuning_hz: f64,
    pub accuracy: [f64; 3],
    pub min_accuracy: f64,
}

/// Correct-identification probability of each candidate versus rf detuning.
pub fn detuning_scan(seq: &PulseSequence, grid_hz: &[f64], noise: &NoiseModel, config: &ExperimentConfig) -> Result<Vec<DetuningRow>> {
    grid_hz
        .par_iter()
        .map(|&d| {
            let n = NoiseModel { detuning_hz: d, ..noise.clone() };
            let mut acc = [0.0; 3];
            for (i, a) in acc.iter_mut().enumerate() {
                *a = accuracy(seq, i, &n, config)?;
            }
            let min_accuracy = acc.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(DetuningRow { detuning_hz: d, accuracy: acc, min_accuracy })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiRow {
    pub time: f64,
    pub populations: Vec<f64>,
}

/// Continuous rf drive about x from one D level.
pub fn rabi_curve(grid: &[f64], start_level: usize, noise: &NoiseModel, config: &ExperimentConfig) -> Result<Vec<RabiRow>> {
    config.validate()?;
    noise.validate()?;
    let d = config.d_dim;
    if start_level >= d {
        return Err(Error::IndexOutOfRange { index: start_level, len: d });
    }
    let ops = spin_operators(d)?;
    let h = &ops.jx * C64::from(config.rabi_freq * (1.0 + noise.rf_amp_error))
        + &ops.jz * C64::from(2.0 * PI * noise.detuning_hz);
    evolve_rows(&h, start_level, grid)
}

fn evolve_rows(h: &DMatrix<C64>, start: usize, grid: &[f64]) -> Result<Vec<RabiRow>> {
    grid.par_iter()
        .map(|&t| {
            let u = hermitian_propagator(h, t)?;
            let populations = (0..h.nrows()).map(|k| u.entry(k, start).norm_sqr()).collect();
            Ok(RabiRow { time: t, populations })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightShiftRow {
    pub time: f64,
    pub populations: Vec<f64>,
    /// Population outside `{m = -5/2, m = -3/2}`.
    pub leakage: f64,
}

/// Drive from `m = -5/2` with the `m = -1/2` level shifted by `shift_hz`.
pub fn light_shift_isolation(shift_hz: f64, grid: &[f64], config: &ExperimentConfig) -> Result<Vec<LightShiftRow>> {
    config.validate()?;
    if config.d_dim != 6 {
        return invalid("light-shift isolation needs the six-level D manifold");
    }
    let ops = spin_operators(6)?;
    let mut h = &ops.jx * C64::from(config.rabi_freq);
    let shifted = d_level(6, -1)?;
    h[(shifted, shifted)] += C64::from(2.0 * PI * shift_hz);
    let (a, b) = (d_level(6, -5)?, d_level(6, -3)?);
    let rows = evolve_rows(&h, a, grid)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let leakage = (1.0 - r.populations[a] - r.populations[b]).max(0.0);
            LightShiftRow { time: r.time, populations: r.populations, leakage }
        })
        .collect())
}
