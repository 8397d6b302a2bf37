//! Pulse programs for three-outcome PSK and ASK discrimination, the
//! Chebyshev bisection family, and the even-n PSK sign step.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qsp::QspPhases;
use crate::spin_algebra::{check_dim, rotation, rotation_z, Unitary, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "RF")]
    Rf,
    Laser,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Encoding {
    Psk,
    Ask,
}

impl std::str::FromStr for Encoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psk" => Ok(Encoding::Psk),
            "ask" => Ok(Encoding::Ask),
            other => invalid(format!("unknown encoding '{other}' (expected psk or ask)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub index: usize,
    pub label: String,
    pub channel: Channel,
    pub theta: f64,
    pub phi: f64,
    #[serde(default)]
    pub oracle_phase_offset: f64,
}

impl Pulse {
    pub fn rf(index: usize, label: &str, theta: f64, phi: f64) -> Self {
        Pulse { index, label: label.into(), channel: Channel::Rf, theta, phi, oracle_phase_offset: 0.0 }
    }

    pub fn laser(index: usize) -> Self {
        Pulse { index, label: "Laser".into(), channel: Channel::Laser, theta: PI, phi: 0.0, oracle_phase_offset: 0.0 }
    }

    /// PSK query: fixed π rotation about `φ_i + offset`.
    pub fn psk_oracle(index: usize, offset: f64) -> Self {
        Pulse { index, label: "Oracle".into(), channel: Channel::Oracle, theta: PI, phi: 0.0, oracle_phase_offset: offset }
    }

    /// ASK query: rotation by `θ_i` about the axis `phi`.
    pub fn ask_oracle(index: usize, phi: f64) -> Self {
        Pulse { index, label: "Oracle".into(), channel: Channel::Oracle, theta: 0.0, phi, oracle_phase_offset: 0.0 }
    }

    /// Rotation actually driven by this pulse when the hidden signal angle is `signal`.
    pub fn resolve(&self, encoding: Encoding, signal: f64) -> (f64, f64) {
        match (self.channel, encoding) {
            (Channel::Oracle, Encoding::Psk) => (self.theta, self.phi + signal + self.oracle_phase_offset),
            (Channel::Oracle, Encoding::Ask) => (signal + self.oracle_phase_offset, self.phi),
            _ => (self.theta, self.phi),
        }
    }

    /// Ideal D-manifold action of an rf or oracle pulse.
    pub fn unitary(&self, dim: usize, encoding: Encoding, signal: f64) -> Result<Unitary> {
        if self.channel == Channel::Laser {
            return Err(Error::Unsupported("laser pulses act between manifolds, not on the rf block".into()));
        }
        let (theta, phi) = self.resolve(encoding, signal);
        rotation(dim, theta, phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
    encoding: Encoding,
    readout_map: Vec<usize>,
}

impl PulseSequence {
    pub fn new(pulses: Vec<Pulse>, encoding: Encoding, readout_map: Vec<usize>) -> Result<Self> {
        for p in &pulses {
            if !p.theta.is_finite() || !p.phi.is_finite() || !p.oracle_phase_offset.is_finite() {
                return invalid(format!("pulse {} has a non-finite parameter", p.index));
            }
            if p.channel == Channel::Laser && (p.theta - PI).abs() > 1e-12 {
                return invalid(format!("laser pulse {} must be a π pulse, got θ = {}", p.index, p.theta));
            }
        }
        if readout_map.iter().any(|&s| s > 2) {
            return invalid("readout states are numbered 0, 1, 2");
        }
        Ok(PulseSequence { pulses, encoding, readout_map })
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn readout_map(&self) -> &[usize] {
        &self.readout_map
    }

    pub fn oracle_rows(&self) -> Vec<usize> {
        self.pulses.iter().filter(|p| p.channel == Channel::Oracle).map(|p| p.index).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.pulses).expect("pulses always serialize")
    }

    /// Parses a JSON array of pulse records. Errors point at the offending line.
    pub fn from_json(text: &str, encoding: Encoding) -> Result<Self> {
        let pulses: Vec<Pulse> = serde_json::from_str(text).map_err(|e| {
            let line = e.line();
            let context = text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim_end().to_string();
            Error::Parse { line, column: e.column(), message: e.to_string(), context }
        })?;
        PulseSequence::new(pulses, encoding, vec![0, 1, 2])
    }
}

/// Hidden oracle: one of `candidate_angles`, chosen by `hidden_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub encoding: Encoding,
    pub candidate_angles: Vec<f64>,
    pub hidden_index: usize,
}

impl OracleSpec {
    pub fn new(encoding: Encoding, candidate_angles: Vec<f64>, hidden_index: usize) -> Result<Self> {
        if hidden_index >= candidate_angles.len() {
            return Err(Error::IndexOutOfRange { index: hidden_index, len: candidate_angles.len() });
        }
        for (i, a) in candidate_angles.iter().enumerate() {
            if !a.is_finite() {
                return invalid("candidate angles must be finite");
            }
            for b in &candidate_angles[..i] {
                let d = (a - b).rem_euclid(2.0 * PI);
                if d < 1e-12 || 2.0 * PI - d < 1e-12 {
                    return invalid(format!("candidate angles {b} and {a} coincide modulo 2π"));
                }
            }
        }
        Ok(OracleSpec { encoding, candidate_angles, hidden_index })
    }

    /// Candidates `0, 2π/3, 4π/3`.
    pub fn three_angle(encoding: Encoding, hidden_index: usize) -> Result<Self> {
        OracleSpec::new(encoding, three_angles().to_vec(), hidden_index)
    }

    pub fn angle(&self) -> f64 {
        self.candidate_angles[self.hidden_index]
    }
}

pub fn three_angles() -> [f64; 3] {
    [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
}

/// Phase-encoded three-outcome sequence, 11 rows, four queries.
pub fn psk3_sequence() -> PulseSequence {
    let pulses = vec![
        Pulse::laser(1),
        Pulse::psk_oracle(2, PI),
        Pulse::rf(3, "U0", -1.1885, 2.9271),
        Pulse::psk_oracle(4, PI),
        Pulse::rf(5, "U1", -1.1881, 0.2146),
        Pulse::laser(6),
        Pulse::rf(7, "U2", 1.0557, -2.2241),
        Pulse::psk_oracle(8, PI),
        Pulse::rf(9, "U3", -0.8414, -1.0725),
        Pulse::psk_oracle(10, PI),
        Pulse::rf(11, "U4", -1.1807, 2.0282),
    ];
    PulseSequence::new(pulses, Encoding::Psk, vec![0, 1, 2]).expect("table rows are valid")
}

fn ask3_rows(u1: f64, u2: f64, u3: f64, u9_phi: f64) -> PulseSequence {
    let pulses = vec![
        Pulse::laser(1),
        Pulse::rf(2, "U0", PI / 2.0, 0.0),
        Pulse::rf(3, "U1", u1, 0.0),
        Pulse::ask_oracle(4, PI / 2.0),
        Pulse::rf(5, "U2", u2, 0.0),
        Pulse::ask_oracle(6, PI / 2.0),
        Pulse::rf(7, "U3", u3, 0.0),
        Pulse::rf(8, "U4", -PI / 2.0, 0.0),
        Pulse::laser(9),
        Pulse::rf(10, "U5", PI / 2.0, 0.0),
        Pulse::rf(11, "U6", u1, 0.0),
        Pulse::ask_oracle(12, PI / 2.0),
        Pulse::rf(13, "U7", 2.0 * PI / 3.0, PI / 2.0),
        Pulse::rf(14, "U8", u2, 0.0),
        Pulse::ask_oracle(15, PI / 2.0),
        Pulse::rf(16, "U9", 2.0 * PI / 3.0, u9_phi),
        Pulse::rf(17, "U10", u3, 0.0),
        Pulse::rf(18, "U11", -PI / 2.0, 0.0),
    ];
    PulseSequence::new(pulses, Encoding::Ask, vec![0, 1, 2]).expect("table rows are valid")
}

/// Angle-encoded three-outcome sequence exactly as tabulated (18 rows).
///
/// The tabulated `U9` axis is `0`; with it the second half does not cycle
/// the oracle angles and the sequence does not discriminate. See
/// [`ask3_exact_sequence`].
pub fn ask3_sequence() -> PulseSequence {
    ask3_rows(0.9603, 1.2410, -2.1813, 0.0)
}

/// The same 18-row layout with `U9` about `y` and the closed-form processing
/// angles `arccos(1/√3)`, `arccos(1/3)`, `-(π - arccos(1/√3))`.
pub fn ask3_exact_sequence() -> PulseSequence {
    let u1 = (1.0 / 3f64.sqrt()).acos();
    ask3_rows(u1, (1.0 / 3.0f64).acos(), -(PI - u1), PI / 2.0)
}

/// `Rz(π) Ry(-π/2) R(π, φ) Ry(π/2)` with `Rz(α) = exp(-iαJz)`.
///
/// Turns a PSK query of phase `φ` into an x-rotation by `2φ`, up to a global
/// phase.
pub fn psk_to_ask_wrap(phi: f64, dim: usize) -> Result<Unitary> {
    check_dim(dim)?;
    let rz = rotation_z(dim, -PI / 2.0)?;
    let ry_m = rotation(dim, -PI / 2.0, PI / 2.0)?;
    let ry_p = rotation(dim, PI / 2.0, PI / 2.0)?;
    let r = rotation(dim, PI, phi)?;
    Ok(&(&(&rz * &ry_m) * &r) * &ry_p)
}

pub trait Queries {
    fn query_count(&self) -> usize;
}

pub fn query_count<T: Queries + ?Sized>(protocol: &T) -> usize {
    protocol.query_count()
}

impl Queries for PulseSequence {
    fn query_count(&self) -> usize {
        self.pulses.iter().filter(|p| p.channel == Channel::Oracle).count()
    }
}

/// One measurement round of the bisection search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionStage {
    pub stage: usize,
    /// Candidates still in play when the stage starts.
    pub remaining: usize,
    /// Chebyshev degree `remaining / 2`, also the number of queries.
    pub degree: usize,
    pub phases: Vec<f64>,
    /// Residue step added to the running offset when the stage reports 0.
    pub residue_step: usize,
}

/// Search over `n = 2^k` ASK candidates `2πj/n`.
///
/// A stage with `m` candidates `2πr/n + 2πl/m` pre-rotates each query by
/// `-2πr/n`, then applies `T_{m/2}`: `|P|² = 1` for even `l` and `0` for odd
/// `l`, which halves the candidate set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionProtocol {
    pub n: usize,
    pub stages: Vec<BisectionStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionOutcome {
    pub hidden: usize,
    pub identified: usize,
    /// Probability that every stage reported the branch taken.
    pub probability: f64,
    pub queries: usize,
}

pub fn bisection_protocol(n: usize) -> Result<BisectionProtocol> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Unsupported(format!(
            "bisection needs n = 2^k with k ≥ 1, got {n}; other n require prime-factor concatenation"
        )));
    }
    let mut stages = Vec::new();
    let mut m = n;
    while m >= 2 {
        stages.push(BisectionStage {
            stage: stages.len() + 1,
            remaining: m,
            degree: m / 2,
            phases: QspPhases::chebyshev(m / 2).as_slice().to_vec(),
            residue_step: n / m,
        });
        m /= 2;
    }
    Ok(BisectionProtocol { n, stages })
}

impl Queries for BisectionProtocol {
    fn query_count(&self) -> usize {
        self.stages.iter().map(|s| s.degree).sum()
    }
}

impl BisectionProtocol {
    pub fn candidate_angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    /// Probability that a stage reports `|0⟩` for a given hidden angle and residue offset,
    /// from the explicit product of processing phases, queries and pre-rotations.
    pub fn stage_probability(&self, stage: &BisectionStage, hidden_angle: f64, residue: usize) -> Result<f64> {
        let offset = self.candidate_angle(residue);
        // Query W(cos(φ/2)) = exp(iφσx/2), followed by the known pre-rotation.
        let query = &rotation(2, -hidden_angle, 0.0)? * &rotation(2, offset, 0.0)?;
        let z = |t: f64| Unitary::diagonal(&[C64::from_polar(1.0, t), C64::from_polar(1.0, -t)]).expect("unit-modulus phases");
        let mut u = z(stage.phases[0]);
        for &t in &stage.phases[1..] {
            u = &(&u * &query) * &z(t);
        }
        Ok(u.entry(0, 0).norm_sqr())
    }

    pub fn simulate_ideal(&self, hidden: usize) -> Result<BisectionOutcome> {
        if hidden >= self.n {
            return Err(Error::IndexOutOfRange { index: hidden, len: self.n });
        }
        let angle = self.candidate_angle(hidden);
        let mut residue = 0usize;
        let mut probability = 1.0;
        for stage in &self.stages {
            let p0 = self.stage_probability(stage, angle, residue)?;
            // Follow the more likely branch; in the ideal case it is certain.
            if p0 >= 0.5 {
                probability *= p0;
            } else {
                probability *= 1.0 - p0;
                residue += stage.residue_step;
            }
        }
        Ok(BisectionOutcome { hidden, identified: residue, probability, queries: self.query_count() })
    }
}

/// Sign step separating `φ'` from `φ' + π` after a period-π PSK protocol.
///
/// A laser π/2 pulse splits the S level and one D level; the D block then sees
/// `Rx(-2φ')`, `Ry(π/2)`, one query and `Ry(-π/2)`, which acts on the prepared
/// level as `±g` for the two branches; a second laser π/2 pulse with phase
/// `-arg g` sends `φ'` to the D level and `φ' + π` to the S level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvenPskDisambiguation {
    pub phi_pair: (f64, f64),
    pub dim: usize,
    pub aux_level: usize,
    pub oracle_phase_offset: f64,
    pub second_laser_phase: f64,
}

impl Queries for EvenPskDisambiguation {
    fn query_count(&self) -> usize {
        1
    }
}

/// Uses the default aux level (`m = +1/2`) and the tabulated `+π` oracle offset.
pub fn even_psk_disambiguation(phi_pair: (f64, f64), dim: usize) -> Result<EvenPskDisambiguation> {
    even_psk_disambiguation_with(phi_pair, dim, dim / 2 - 1, PI)
}

pub fn even_psk_disambiguation_with(
    phi_pair: (f64, f64),
    dim: usize,
    aux_level: usize,
    oracle_phase_offset: f64,
) -> Result<EvenPskDisambiguation> {
    check_dim(dim)?;
    if aux_level >= dim {
        return Err(Error::IndexOutOfRange { index: aux_level, len: dim });
    }
    let gap = (phi_pair.1 - phi_pair.0 - PI).rem_euclid(2.0 * PI);
    if gap > 1e-9 && 2.0 * PI - gap > 1e-9 {
        return invalid("the two candidate phases must differ by π");
    }
    let mut step = EvenPskDisambiguation { phi_pair, dim, aux_level, oracle_phase_offset, second_laser_phase: 0.0 };
    let g = step.block_operator(phi_pair.0)?.entry(aux_level, aux_level);
    step.second_laser_phase = -g.arg();
    Ok(step)
}

fn laser_half_pi(phase: f64) -> [[C64; 2]; 2] {
    // exp(-i π/4 (σx cos χ + σy sin χ)) on (D, S).
    let c = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    let s = -I * std::f64::consts::FRAC_1_SQRT_2;
    [[c, s * C64::from_polar(1.0, -phase)], [s * C64::from_polar(1.0, phase), c]]
}

impl EvenPskDisambiguation {
    /// Ideal D-block action for a hidden phase.
    pub fn block_operator(&self, hidden_phase: f64) -> Result<Unitary> {
        let d = self.dim;
        let pre = rotation(d, -2.0 * self.phi_pair.0, 0.0)?;
        let ry_p = rotation(d, PI / 2.0, PI / 2.0)?;
        let ry_m = rotation(d, -PI / 2.0, PI / 2.0)?;
        let oracle = Pulse::psk_oracle(0, self.oracle_phase_offset).unitary(d, Encoding::Psk, hidden_phase)?;
        Ok(&(&(&ry_m * &oracle) * &ry_p) * &pre)
    }

    /// Pulse program in time order, as text rows for reports.
    pub fn program(&self) -> Vec<String> {
        vec![
            "laser pi/2, phase 0, aux pair".into(),
            format!("rf theta={:.6} phi=0", -2.0 * self.phi_pair.0),
            "rf theta=pi/2 phi=pi/2".into(),
            format!("oracle theta=pi phi=phi_i+{:.6}", self.oracle_phase_offset),
            "rf theta=-pi/2 phi=pi/2".into(),
            format!("laser pi/2, phase {:.6}, aux pair", self.second_laser_phase),
        ]
    }

    /// `(p_aux_D, p_S, p_elsewhere)` for a hidden phase, ideal.
    pub fn simulate(&self, hidden_phase: f64) -> Result<[f64; 3]> {
        let d = self.dim;
        let mut v = vec![ZERO; d + 1];
        v[d] = ONE;
        let apply_laser = |v: &mut Vec<C64>, phase: f64| {
            let l = laser_half_pi(phase);
            let (a, b) = (v[self.aux_level], v[d]);
            v[self.aux_level] = l[0][0] * a + l[0][1] * b;
            v[d] = l[1][0] * a + l[1][1] * b;
        };
        apply_laser(&mut v, 0.0);
        let block = self.block_operator(hidden_phase)?;
        let moved = block.apply(&v[..d]);
        v[..d].copy_from_slice(&moved);
        apply_laser(&mut v, self.second_laser_phase);
        let p_aux = v[self.aux_level].norm_sqr();
        let p_s = v[d].norm_sqr();
        Ok([p_aux, p_s, (1.0 - p_aux - p_s).max(0.0)])
    }

    /// 0 if the hidden phase is `phi_pair.0`, 1 for `phi_pair.1`, from an ideal run.
    pub fn decide(&self, hidden_phase: f64) -> Result<usize> {
        let p = self.simulate(hidden_phase)?;
        Ok(if p[0] >= p[1] { 0 } else { 1 })
    }
}

/// Queries used by six-angle PSK: the three-angle protocol on `φ mod π`, then one sign query.
pub fn six_angle_psk_queries() -> usize {
    query_count(&psk3_sequence()) + 1
}
