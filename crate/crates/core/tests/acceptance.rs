//! One PASS/FAIL line per acceptance criterion.
//!
//! Exits 0 after printing every line so the rest of the suite still runs;
//! set `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsp_discrim::baselines::{
    bayes_posterior_all_agree, me_majority, me_single_shot, posterior_all_agree, symmetric_states, ud_multi,
    ud_success, TieRule,
};
use qsp_discrim::field_servo::{
    allan_deviation, allan_slope, detuning_error_budget, simulate_servo, DriftModel, ServoConfig,
};
use qsp_discrim::ion_sim::{
    accuracy, angle_scan, apply_rf, d_level, detuning_scan, rabi_curve, run, ExperimentConfig, IonState,
    NoiseModel,
};
use qsp_discrim::protocols::{
    ask3_exact_sequence, ask3_sequence, bisection_protocol, even_psk_disambiguation, psk3_sequence,
    psk_to_ask_wrap, query_count, three_angles, Encoding, PulseSequence,
};
use qsp_discrim::qsp::{bisecting_poly, find_phases, polynomial, PolynomialSpec};
use qsp_discrim::spin_algebra::{rotation, spin_operators, x_gate, Unitary};
use qsp_discrim::Error;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let t0 = Instant::now();
    let v = f();
    let dt = t0.elapsed();
    match limit {
        Some(l) if dt > l => verdict(false, format!("{}; runtime {:.2?} exceeds {:.0?}", v.detail, dt, l)),
        Some(_) => verdict(v.pass, format!("{}; runtime {:.2?}", v.detail, dt)),
        None => v,
    }
}

fn accuracies(seq: &PulseSequence, cfg: &ExperimentConfig) -> Vec<f64> {
    (0..3).map(|k| accuracy(seq, k, &NoiseModel::ideal(), cfg).unwrap()).collect()
}

fn c1() -> Verdict {
    let psk = accuracies(&psk3_sequence(), &ExperimentConfig::psk3());
    let ask = accuracies(&ask3_sequence(), &ExperimentConfig::ask3());
    let exact = accuracies(&ask3_exact_sequence(), &ExperimentConfig::ask3());
    let ok = |v: &[f64]| v.iter().all(|a| *a >= 0.9999);
    verdict(
        ok(&psk) && ok(&ask),
        format!(
            "psk3 {:.7?} (ok={}); ask3 as tabulated {:.5?} (ok={}); ask3 with y-axis U9 and closed-form angles {:.7?}",
            psk,
            ok(&psk),
            ask,
            ok(&ask),
            exact
        ),
    )
}

fn c2() -> Verdict {
    let ideal = NoiseModel::ideal();
    let design = three_angles().to_vec();
    let mut worst: f64 = 0.0;
    for (seq, cfg) in [(psk3_sequence(), ExperimentConfig::psk3()), (ask3_exact_sequence(), ExperimentConfig::ask3())] {
        let rows = angle_scan(&seq, &design, &ideal, &cfg).unwrap();
        for (k, r) in rows.iter().enumerate() {
            for s in 0..3 {
                let want = if seq.readout_map()[k] == s { 1.0 } else { 0.0 };
                worst = worst.max((r.populations[s] - want).abs());
            }
        }
    }
    let grid: Vec<f64> = (0..90).map(|k| 2.0 * PI * k as f64 / 90.0).collect();
    let shifted: Vec<f64> = grid.iter().map(|a| a + PI).collect();
    let cfg = ExperimentConfig::psk3();
    let a = angle_scan(&psk3_sequence(), &grid, &ideal, &cfg).unwrap();
    let b = angle_scan(&psk3_sequence(), &shifted, &ideal, &cfg).unwrap();
    let period_dev = a
        .iter()
        .zip(&b)
        .flat_map(|(x, y)| (0..3).map(move |s| (x.populations[s] - y.populations[s]).abs()))
        .fold(0.0, f64::max);
    let tab = angle_scan(&ask3_sequence(), &design, &ideal, &ExperimentConfig::ask3()).unwrap();
    verdict(
        worst < 1e-3 && period_dev < 1e-8,
        format!(
            "identity deviation {worst:.2e} (psk3, ask3 closed-form); PSK π-period deviation {period_dev:.2e}; tabulated ask3 diagonal {:.4} {:.4} {:.4}",
            tab[0].populations[0], tab[1].populations[1], tab[2].populations[2]
        ),
    )
}

fn c3() -> Verdict {
    let exact = bisecting_poly(1.0) == 1.0 && bisecting_poly(0.5) == 0.0 && bisecting_poly(-0.5) == 0.0;
    match find_phases(&PolynomialSpec::Bisecting) {
        Ok(phases) => {
            let fit = [(1.0, 1.0), (0.5, 0.0), (-0.5, 0.0)]
                .iter()
                .map(|(a, t)| (polynomial(&phases, *a).unwrap().norm_sqr() - t).abs())
                .fold(0.0, f64::max);
            let u = |a: f64| qsp_discrim::qsp::qsp_unitary(&phases, a).unwrap();
            let comp = (0..=100)
                .map(|k| {
                    let a = -1.0 + 2.0 * k as f64 / 100.0;
                    let m = u(a);
                    (m.entry(0, 0).norm_sqr() + m.entry(0, 1).norm_sqr() - 1.0).abs()
                })
                .fold(0.0, f64::max);
            verdict(exact && fit < 1e-8 && comp < 1e-10, format!("node fit {fit:.2e}; complement {comp:.2e}"))
        }
        Err(Error::NoSolution { residual }) => verdict(
            false,
            format!(
                "exact nodes {exact}; degree-2 z-phase QSP cannot reach (4/3)a²-1/3 (|P(1/2)|² ≥ 1/4 for every phase triple); finder best residual {residual:.3}"
            ),
        ),
        Err(e) => verdict(false, format!("finder error: {e}")),
    }
}

fn c4() -> Verdict {
    let mut parts = Vec::new();
    let mut perfect = true;
    let mut query_ok = true;
    for n in [2usize, 4, 8] {
        let proto = bisection_protocol(n).unwrap();
        let q = query_count(&proto);
        for h in 0..n {
            let o = proto.simulate_ideal(h).unwrap();
            perfect &= o.identified == h && (o.probability - 1.0).abs() < 1e-8 && o.queries == q;
        }
        query_ok &= q == 2 * n;
        parts.push(format!("n={n}: {q} queries (required {})", 2 * n));
    }
    verdict(
        perfect && query_ok,
        format!("identification perfect={perfect}; {}; stages of T_(m/2) need m/2 queries, n-1 in total", parts.join(", ")),
    )
}

fn c5() -> Verdict {
    let mut worst: f64 = 0.0;
    for dim in [2usize, 6] {
        for k in 0..64 {
            let phi = 2.0 * PI * k as f64 / 64.0;
            let w = psk_to_ask_wrap(phi, dim).unwrap();
            let rx = rotation(dim, 2.0 * phi, 0.0).unwrap();
            let tr = (w.adjoint() * rx).trace().norm();
            worst = worst.max((tr - dim as f64).abs());
        }
    }
    let mut even_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for dim in [2usize, 6] {
        for _ in 0..16 {
            let base: f64 = rng.random_range(0.0..PI);
            let d = even_psk_disambiguation((base, base + PI), dim).unwrap();
            even_ok &= query_count(&d) == 1;
            even_ok &= d.decide(base).unwrap() == 0 && d.simulate(base).unwrap()[0] > 1.0 - 1e-10;
            even_ok &= d.decide(base + PI).unwrap() == 1 && d.simulate(base + PI).unwrap()[1] > 1.0 - 1e-10;
        }
    }
    verdict(worst < 1e-10 && even_ok, format!("max |Tr| deviation {worst:.2e}; even-n disambiguation with 1 query ok={even_ok}"))
}

fn c6() -> Verdict {
    let grid: Vec<f64> = (-30..=30).map(|d| d as f64).collect();
    let cfg = ExperimentConfig::psk3();
    assert!((cfg.pi_time() - 55e-6).abs() < 1e-15);
    let rows = detuning_scan(&psk3_sequence(), &grid, &NoiseModel::ideal(), &cfg).unwrap();
    let min = rows.iter().map(|r| r.min_accuracy).fold(1.0, f64::min);
    let mut odd: f64 = 0.0;
    for (k, r) in rows.iter().enumerate() {
        let mirror = &rows[rows.len() - 1 - k];
        for s in 0..3 {
            odd = odd.max((r.accuracy[s] - mirror.accuracy[s]).abs());
        }
    }
    let lab = ExperimentConfig::lab(Encoding::Psk);
    let rows_p = detuning_scan(&psk3_sequence(), &grid, &NoiseModel::ideal(), &lab).unwrap();
    let min_p = rows_p.iter().map(|r| r.min_accuracy).fold(1.0, f64::min);
    verdict(
        min >= 0.99 && odd < 1e-6,
        format!(
            "min accuracy {min:.5} over |Δ| ≤ 30 Hz (200 µs lasers: {min_p:.5}); max |acc(Δ) - acc(-Δ)| {odd:.2e}, the tabulated sequence is not symmetric under Δ → -Δ"
        ),
    )
}

fn c7() -> Verdict {
    let set = symmetric_states(3, Encoding::Psk).unwrap();
    let single = me_single_shot(&set).unwrap();
    let maj = me_majority(&set, 4, TieRule::Fail).unwrap();
    let maj_u = me_majority(&set, 4, TieRule::Uniform).unwrap();
    let post = posterior_all_agree(&set, 4).unwrap();
    let bayes = bayes_posterior_all_agree(&set, 4).unwrap();
    let ud = ud_success(&set).unwrap();
    let udm = ud_multi(&set, 4).unwrap();
    let pass = (single - 2.0 / 3.0).abs() < 1e-10
        && (0.73..=0.75).contains(&maj)
        && (0.986..=0.990).contains(&post)
        && (ud - 0.5).abs() < 1e-12
        && (udm - 0.9375).abs() < 1e-15;
    verdict(
        pass,
        format!(
            "p_ME {single:.12}; majority(4) {maj:.4} with ties as failures ({maj_u:.4} with uniform tie-breaking); 1-(1-p_ME)^4 {post:.5} (Bayes posterior {bayes:.5}); P_UD {ud}; 4 trials {udm}"
        ),
    )
}

fn c8() -> Verdict {
    let mut comm: f64 = 0.0;
    for dim in [2usize, 6] {
        let s = spin_operators(dim).unwrap();
        let ops = [&s.jx, &s.jy, &s.jz];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let c: DMatrix<C> = ops[i] * ops[j] - ops[j] * ops[i];
            let target = ops[k] * C::new(0.0, 1.0);
            comm = comm.max((c - target).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    let full = rotation(6, 2.0 * PI, 0.0).unwrap();
    let minus = Unitary::identity(6).scaled(C::from(-1.0));
    let r2pi = full.max_abs_diff(&minus);
    let x = x_gate(6).unwrap();
    let mut anti: f64 = 0.0;
    for r in 0..6 {
        for c in 0..6 {
            let want = if r + c == 5 { 1.0 } else { 0.0 };
            anti = anti.max((x.entry(r, c).norm() - want).abs());
        }
    }
    let cfg = ExperimentConfig::ask3();
    let rows = rabi_curve(&[55e-6], d_level(6, -3).unwrap(), &NoiseModel::ideal(), &cfg).unwrap();
    let transfer = rows[0].populations[d_level(6, 3).unwrap()];
    verdict(
        comm < 1e-12 && r2pi < 1e-12 && anti < 1e-12 && transfer >= 1.0 - 1e-10,
        format!("commutators {comm:.1e}; R(6, 2π) + I {r2pi:.1e}; anti-diagonal X {anti:.1e}; -3/2 → +3/2 transfer {transfer:.12}"),
    )
}

fn c9() -> Verdict {
    let taus = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
    let series = |d: &DriftModel, seed| -> Vec<(f64, f64)> {
        d.sample(20_000, 1.0, seed).unwrap().into_iter().enumerate().map(|(k, y)| (k as f64, y)).collect()
    };
    let white = allan_deviation(&series(&DriftModel::white(1e-6), 11), &taus).unwrap();
    let slope = allan_slope(&white);
    let preset = allan_deviation(&series(&DriftModel::lab(), 12), &[10.0]).unwrap()[0].sigma_y;

    let seq = psk3_sequence();
    let cfg = ExperimentConfig::lab(Encoding::Psk);
    let mut worst_within: f64 = 1.0;
    let mut budgets = Vec::new();
    for seed in 1..=5u64 {
        let samples = simulate_servo(&DriftModel::lab(), &ServoConfig::lab(), 600.0, seed).unwrap();
        let r: Vec<f64> = samples.iter().map(|s| s.residual_hz).collect();
        worst_within = worst_within.min(r.iter().filter(|x| x.abs() <= 30.0).count() as f64 / r.len() as f64);
        budgets.push(detuning_error_budget(&r, &seq, &NoiseModel::ideal(), &cfg).unwrap());
    }
    let (bmin, bmax) = budgets.iter().fold((1.0f64, 0.0f64), |(lo, hi), b| (lo.min(*b), hi.max(*b)));
    verdict(
        (slope + 0.5).abs() <= 0.1 && preset <= 2e-7 && worst_within >= 0.99 && bmin >= 0.001 && bmax <= 0.006,
        format!(
            "white-FM slope {slope:.3}; preset σ_y(10 s) {preset:.2e}; worst in-band fraction {worst_within:.4} over 5 seeded 600 s runs; budget {:.3}%..{:.3}%",
            bmin * 100.0,
            bmax * 100.0
        ),
    )
}

fn c10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let dim = if k % 2 == 0 { 6 } else { 2 };
        let theta = rng.random_range(-2.0 * PI..2.0 * PI);
        let phi = rng.random_range(0.0..2.0 * PI);
        let detuning = if k % 3 == 0 { 1000.0 } else { rng.random_range(-100.0..100.0) };
        let amp = rng.random_range(-0.01..0.01);
        let config = if dim == 6 { ExperimentConfig::psk3() } else { ExperimentConfig::qubit_ask3() };
        let noise = NoiseModel { detuning_hz: detuning, rf_amp_error: amp, ..NoiseModel::ideal() };
        let psi = common::random_state(&mut rng, dim);
        let mut amps: Vec<C> = psi.iter().cloned().collect();
        amps.extend([C::from(0.0), C::from(0.0)]);
        let out = apply_rf(&IonState::from_amplitudes(dim, amps).unwrap(), theta, phi, &noise, &config).unwrap();
        let reference = common::trotter(dim, theta, phi, detuning, amp, config.rabi_freq, &psi, 10_000);
        for r in 0..dim {
            worst = worst.max((out.amplitudes()[r] - reference[r]).norm());
        }
    }
    let agree = |seq: &PulseSequence| {
        (0..3)
            .flat_map(|k| {
                let six = run(seq, k, &NoiseModel::ideal(), &ExperimentConfig::ask3()).unwrap();
                let two = run(seq, k, &NoiseModel::ideal(), &ExperimentConfig::qubit_ask3()).unwrap();
                (0..3).map(move |s| (six.probabilities[s] - two.probabilities[s]).abs())
            })
            .fold(0.0, f64::max)
    };
    let exact = agree(&ask3_exact_sequence());
    let tab = agree(&ask3_sequence());
    verdict(
        worst < 1e-8 && exact < 1e-8,
        format!("Trotter deviation {worst:.2e} on 20 pulses; qubit vs six-level {exact:.2e} (closed-form ask3), {tab:.2e} with tabulated angles"),
    )
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Verdict); 10] = [
        ("ideal-protocol determinism", Some(Duration::from_secs(1)), c1),
        ("design-angle identity and PSK π-periodicity", None, c2),
        ("bisecting polynomial", None, c3),
        ("Chebyshev bisection with 2n queries", Some(Duration::from_secs(10)), c4),
        ("PSK to ASK identity and even-n disambiguation", None, c5),
        ("detuning budget", None, c6),
        ("incoherent baselines", Some(Duration::from_secs(5)), c7),
        ("SU(6) algebra and Rabi transfer", None, c8),
        ("servo and Allan deviation", Some(Duration::from_secs(60)), c9),
        ("oracle equivalence", None, c10),
    ];
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.iter().enumerate() {
        let v = timed(*limit, f);
        if !v.pass {
            failed += 1;
        }
        println!("C{} {} {name}: {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
