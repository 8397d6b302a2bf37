use std::f64::consts::PI;
use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use qsp_discrim::baselines::{
    advantage_report, bayes_posterior_all_agree, me_majority, symmetric_states, TieRule,
};
use qsp_discrim::field_servo::{
    allan_deviation, allan_slope, detuning_error_budget, simulate_servo, DriftModel, ServoConfig,
};
use qsp_discrim::ion_sim::{
    accuracy, angle_scan, d_level, detuning_scan, evolve, light_shift_isolation, rabi_curve, run,
    sequential_readout, time_series, ExperimentConfig, NoiseModel, ReadoutMode,
};
use qsp_discrim::protocols::{
    ask3_exact_sequence, ask3_sequence, bisection_protocol, psk3_sequence, query_count, three_angles,
    Encoding, PulseSequence,
};

use crate::output::{emit, Table};
use crate::{Cli, Command, DriftPreset, Profile, ScanKind, SimArgs};

pub fn execute(cli: &Cli, line: &str) -> Result<()> {
    let seed = cli.common.seed;
    let table = match &cli.command {
        Command::Run { sim, oracle, sample } => cmd_run(line, seed, sim, *oracle, *sample)?,
        Command::Scan { kind, sim, grid, oracle } => cmd_scan(line, seed, *kind, sim, grid.as_deref(), *oracle)?,
        Command::Baselines { accuracy, coherent, encoding } => cmd_baselines(line, seed, *accuracy, *coherent, encoding)?,
        Command::Bisect { n, verify } => cmd_bisect(line, seed, *n, *verify)?,
        Command::Servo { preset, duration, light_shift_hz, shots } => {
            cmd_servo(line, seed, *preset, *duration, *light_shift_hz, *shots)?
        }
        Command::Allan { preset, samples, taus } => cmd_allan(line, seed, *preset, *samples, taus)?,
        Command::Rabi { start, dim, grid, detuning_hz } => cmd_rabi(line, seed, *start, *dim, grid.as_deref(), *detuning_hz)?,
        Command::LightShift { shift_hz, grid } => cmd_light_shift(line, seed, *shift_hz, grid.as_deref())?,
    };
    emit(&table, cli.common.format(), cli.common.out.as_deref(), cli.common.gnuplot.as_deref())
}

struct Setup {
    seq: PulseSequence,
    noise: NoiseModel,
    config: ExperimentConfig,
    params: Value,
}

fn load_sequence(name: &str, encoding: Option<&str>) -> Result<PulseSequence> {
    Ok(match name {
        "psk3" => psk3_sequence(),
        "ask3" => ask3_sequence(),
        "ask3-exact" => ask3_exact_sequence(),
        path => {
            let enc: Encoding = encoding
                .ok_or_else(|| anyhow!("--encoding psk|ask is required for sequence files"))?
                .parse()?;
            let text = fs::read_to_string(path).with_context(|| format!("reading sequence file {path}"))?;
            PulseSequence::from_json(&text, enc).with_context(|| format!("in {path}"))?
        }
    })
}

fn setup(sim: &SimArgs) -> Result<Setup> {
    let seq = load_sequence(&sim.seq, sim.encoding.as_deref())?;
    let (mut noise, mut config) = match sim.profile {
        Profile::Ideal => (NoiseModel::ideal(), ExperimentConfig::for_sequence(&seq)),
        Profile::Lab => (NoiseModel::lab(), ExperimentConfig::lab(seq.encoding())),
    };
    if let Some(v) = sim.detuning_hz {
        noise.detuning_hz = v;
    }
    if let Some(v) = sim.rf_amp_error {
        noise.rf_amp_error = v;
    }
    if let Some(v) = sim.laser_error {
        noise.laser_pi_error = v;
    }
    if let Some(v) = sim.spam_error {
        noise.spam_error = v;
    }
    if let Some(v) = sim.leakage_rate {
        noise.leakage_rate = v;
    }
    if let Some(v) = sim.laser_duration {
        config.laser_duration = v;
    }
    if let Some(v) = sim.pulse_gap {
        config.pulse_gap = v;
    }
    noise.validate()?;
    config.validate()?;
    let params = json!({
        "sequence": sim.seq,
        "pulses": serde_json::from_str::<Value>(&seq.to_json())?,
        "encoding": seq.encoding(),
        "noise": noise,
        "config": config,
    });
    Ok(Setup { seq, noise, config, params })
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:stop:points, got {spec:?}");
    }
    let start: f64 = parts[0].trim().parse().with_context(|| format!("grid start {:?}", parts[0]))?;
    let stop: f64 = parts[1].trim().parse().with_context(|| format!("grid stop {:?}", parts[1]))?;
    let n: usize = parts[2].trim().parse().with_context(|| format!("grid points {:?}", parts[2]))?;
    Ok(linspace(start, stop, n))
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn grid_or(spec: Option<&str>, default: Vec<f64>) -> Result<Vec<f64>> {
    let g = match spec {
        Some(s) => parse_grid(s)?,
        None => default,
    };
    if g.is_empty() {
        bail!("invalid argument: empty grid");
    }
    Ok(g)
}

fn with(mut base: Value, key: &str, v: Value) -> Value {
    base[key] = v;
    base
}

fn cmd_run(line: &str, seed: u64, sim: &SimArgs, oracle: usize, sample: bool) -> Result<Table> {
    let s = setup(sim)?;
    let result = run(&s.seq, oracle, &s.noise, &s.config)?;
    let mut t = Table::new(line, seed, with(s.params, "oracle", json!(oracle)), &["outcome", "probability"]);
    for (k, p) in result.probabilities.iter().enumerate() {
        let name = if k < 3 { format!("state{k}") } else { "leakage".to_string() };
        t.push(vec![json!(name), json!(p)]);
    }
    let expected = s.seq.readout_map()[oracle];
    t.note("expected_state", expected);
    t.note("correct_probability", result.probabilities[expected]);
    if sample {
        let state = evolve(&s.seq, three_angles()[oracle], &s.noise, &s.config)?;
        let drawn = sequential_readout(&state, &s.noise, &s.config, ReadoutMode::Sample(seed))?;
        t.note("sampled_outcome", drawn.outcome.expect("sampling mode draws an outcome"));
    }
    Ok(t)
}

fn cmd_scan(line: &str, seed: u64, kind: ScanKind, sim: &SimArgs, grid: Option<&str>, oracle: usize) -> Result<Table> {
    let s = setup(sim)?;
    match kind {
        ScanKind::Angle => {
            let g = grid_or(grid, linspace(0.0, 2.0 * PI, 361))?;
            let rows = angle_scan(&s.seq, &g, &s.noise, &s.config)?;
            let mut t = Table::new(line, seed, with(s.params, "grid", json!(g)), &["angle", "p_state0", "p_state1", "p_state2"]);
            for r in &rows {
                t.push(vec![json!(r.angle), json!(r.populations[0]), json!(r.populations[1]), json!(r.populations[2])]);
            }
            if s.seq.encoding() == Encoding::Psk {
                let shifted: Vec<f64> = g.iter().map(|a| a + PI).collect();
                let other = angle_scan(&s.seq, &shifted, &s.noise, &s.config)?;
                let dev = rows
                    .iter()
                    .zip(&other)
                    .flat_map(|(a, b)| a.populations.iter().zip(b.populations).map(|(x, y)| (x - y).abs()))
                    .fold(0.0, f64::max);
                t.note("pi_periodic", format!("{} (max deviation {dev:e})", dev < 1e-8));
            }
            Ok(t)
        }
        ScanKind::Detuning => {
            let g = grid_or(grid, linspace(-50.0, 50.0, 101))?;
            let rows = detuning_scan(&s.seq, &g, &s.noise, &s.config)?;
            let mut t = Table::new(
                line,
                seed,
                with(s.params, "grid", json!(g)),
                &["detuning_hz", "accuracy0", "accuracy1", "accuracy2", "min_accuracy"],
            );
            for r in &rows {
                t.push(vec![
                    json!(r.detuning_hz),
                    json!(r.accuracy[0]),
                    json!(r.accuracy[1]),
                    json!(r.accuracy[2]),
                    json!(r.min_accuracy),
                ]);
            }
            Ok(t)
        }
        ScanKind::Time => {
            let n = match grid {
                Some(spec) => parse_grid(spec)?.len(),
                None => 201,
            };
            let angles = three_angles();
            if oracle >= angles.len() {
                return Err(qsp_discrim::Error::IndexOutOfRange { index: oracle, len: angles.len() }.into());
            }
            let points = time_series(&s.seq, angles[oracle], n, &s.noise, &s.config)?;
            let params = with(with(s.params, "oracle", json!(oracle)), "points", json!(n));
            let mut t = Table::new(line, seed, params, &["time_s", "p_state0", "p_state1", "p_state2", "other"]);
            for p in &points {
                t.push(vec![
                    json!(p.time),
                    json!(p.populations[0]),
                    json!(p.populations[1]),
                    json!(p.populations[2]),
                    json!(p.other),
                ]);
            }
            Ok(t)
        }
    }
}

fn cmd_baselines(line: &str, seed: u64, acc: f64, coherent: Option<f64>, encoding: &str) -> Result<Table> {
    let enc: Encoding = encoding.parse()?;
    let set = symmetric_states(3, enc)?;
    let coherent = match coherent {
        Some(c) => c,
        None => {
            let seq = psk3_sequence();
            let cfg = ExperimentConfig::lab(Encoding::Psk);
            let noise = NoiseModel::lab();
            (0..3).map(|i| accuracy(&seq, i, &noise, &cfg)).sum::<qsp_discrim::Result<f64>>()? / 3.0
        }
    };
    let rows = advantage_report(acc, coherent, &set)?;
    let params = json!({"accuracy": acc, "coherent": coherent, "encoding": enc});
    let mut t = Table::new(line, seed, params, &["strategy", "probability", "baseline", "exceeded"]);
    for r in &rows {
        t.push(vec![json!(r.strategy), json!(r.probability), json!(r.baseline), json!(r.exceeded)]);
    }
    t.note("majority_4_uniform_ties", me_majority(&set, 4, TieRule::Uniform)?);
    t.note("bayes_posterior_4_agree", bayes_posterior_all_agree(&set, 4)?);
    t.note("exceeds_all_baselines", rows.iter().filter(|r| r.baseline).all(|r| r.exceeded));
    Ok(t)
}

fn cmd_bisect(line: &str, seed: u64, n: usize, verify: bool) -> Result<Table> {
    let proto = bisection_protocol(n)?;
    let queries = query_count(&proto);
    let params = json!({"n": n, "verify": verify});
    if !verify {
        let mut t = Table::new(line, seed, params, &["stage", "remaining", "degree", "residue_step", "phases"]);
        for s in &proto.stages {
            let phases: Vec<String> = s.phases.iter().map(|p| p.to_string()).collect();
            t.push(vec![json!(s.stage), json!(s.remaining), json!(s.degree), json!(s.residue_step), json!(phases.join(";"))]);
        }
        t.note("queries", queries);
        return Ok(t);
    }
    let mut t = Table::new(line, seed, params, &["hidden", "identified", "probability", "queries"]);
    let mut perfect = true;
    for h in 0..n {
        let o = proto.simulate_ideal(h)?;
        perfect &= o.identified == h && (o.probability - 1.0).abs() < 1e-8;
        t.push(vec![json!(o.hidden), json!(o.identified), json!(o.probability), json!(o.queries)]);
    }
    t.note("verify", format!("queries={queries}, perfect={perfect}"));
    Ok(t)
}

fn drift_for(preset: DriftPreset) -> DriftModel {
    match preset {
        DriftPreset::Lab => DriftModel::lab(),
        DriftPreset::White => DriftModel::white(DriftModel::lab().white_fm),
        DriftPreset::None => DriftModel::none(),
    }
}

fn cmd_servo(
    line: &str,
    seed: u64,
    preset: DriftPreset,
    duration: f64,
    light_shift_hz: Option<f64>,
    shots: Option<u64>,
) -> Result<Table> {
    let drift = drift_for(preset);
    let mut servo = match preset {
        DriftPreset::Lab => ServoConfig::lab(),
        _ => ServoConfig::default(),
    };
    if let Some(v) = light_shift_hz {
        servo.light_shift_hz = v;
    }
    if shots.is_some() {
        servo.shots = shots;
    }
    let samples = simulate_servo(&drift, &servo, duration, seed)?;
    if samples.is_empty() {
        bail!("invalid argument: duration shorter than one servo period");
    }
    let residuals: Vec<f64> = samples.iter().map(|s| s.residual_hz).collect();
    let within = residuals.iter().filter(|r| r.abs() <= 30.0).count() as f64 / residuals.len() as f64;
    let budget = detuning_error_budget(&residuals, &psk3_sequence(), &NoiseModel::ideal(), &ExperimentConfig::lab(Encoding::Psk))?;
    let params = json!({"drift": drift, "servo": servo, "duration_s": duration});
    let mut t = Table::new(line, seed, params, &["t_s", "true_freq_hz", "applied_freq_hz", "residual_hz"]);
    for s in &samples {
        t.push(vec![json!(s.t), json!(s.true_freq_hz), json!(s.applied_freq_hz), json!(s.residual_hz)]);
    }
    t.note("fraction_within_30hz", within);
    t.note("psk3_error_budget", budget);
    Ok(t)
}

fn cmd_allan(line: &str, seed: u64, preset: DriftPreset, samples: usize, taus: &str) -> Result<Table> {
    let drift = drift_for(preset);
    let taus: Vec<f64> = taus
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad tau {s:?}")))
        .collect::<Result<_>>()?;
    let y = drift.sample(samples, 1.0, seed)?;
    let series: Vec<(f64, f64)> = y.iter().enumerate().map(|(k, v)| (k as f64, *v)).collect();
    let points = allan_deviation(&series, &taus)?;
    let params = json!({"drift": drift, "samples": samples, "taus": taus});
    let mut t = Table::new(line, seed, params, &["tau_s", "sigma_y"]);
    for p in &points {
        t.push(vec![json!(p.tau), json!(p.sigma_y)]);
    }
    if points.len() >= 2 {
        t.note("log_slope", allan_slope(&points));
    }
    Ok(t)
}

fn level_name(dim: usize, k: usize) -> String {
    let twice_m = dim as i32 - 1 - 2 * k as i32;
    if twice_m % 2 == 0 {
        format!("p_m{:+}", twice_m / 2)
    } else {
        format!("p_m{twice_m:+}/2")
    }
}

fn cmd_rabi(line: &str, seed: u64, start: i32, dim: usize, grid: Option<&str>, detuning_hz: f64) -> Result<Table> {
    let base = if dim == 2 { ExperimentConfig::qubit_ask3() } else { ExperimentConfig::ask3() };
    let config = ExperimentConfig { d_dim: dim, ..base };
    let level = d_level(dim, start)?;
    let g = grid_or(grid, linspace(0.0, 2.0 * config.pi_time(), 201))?;
    let noise = NoiseModel::with_detuning(detuning_hz);
    let rows = rabi_curve(&g, level, &noise, &config)?;
    let names: Vec<String> = std::iter::once("time_s".to_string()).chain((0..dim).map(|k| level_name(dim, k))).collect();
    let cols: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let params = json!({"start_twice_m": start, "dim": dim, "grid": g, "detuning_hz": detuning_hz, "rabi_freq": config.rabi_freq});
    let mut t = Table::new(line, seed, params, &cols);
    for r in &rows {
        t.push(std::iter::once(json!(r.time)).chain(r.populations.iter().map(|p| json!(p))).collect());
    }
    Ok(t)
}

fn cmd_light_shift(line: &str, seed: u64, shift_hz: f64, grid: Option<&str>) -> Result<Table> {
    let config = ExperimentConfig::psk3();
    let g = grid_or(grid, linspace(0.0, config.pi_time(), 201))?;
    let rows = light_shift_isolation(shift_hz, &g, &config)?;
    let names: Vec<String> = std::iter::once("time_s".to_string())
        .chain((0..6).map(|k| level_name(6, k)))
        .chain(std::iter::once("leakage".to_string()))
        .collect();
    let cols: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let mut t = Table::new(line, seed, json!({"shift_hz": shift_hz, "grid": g}), &cols);
    for r in &rows {
        t.push(
            std::iter::once(json!(r.time))
                .chain(r.populations.iter().map(|p| json!(p)))
                .chain(std::iter::once(json!(r.leakage)))
                .collect(),
        );
    }
    t.note("max_leakage", rows.iter().map(|r| r.leakage).fold(0.0, f64::max));
    Ok(t)
}
