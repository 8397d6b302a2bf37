use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ExperimentConfig, IonState, NoiseModel};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutMode {
    Distribution,
    /// Draw one outcome with a ChaCha8 stream seeded from this value.
    Sample(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadoutResult {
    /// `[state0, state1, state2, leakage]`.
    pub probabilities: [f64; 4],
    pub outcome: Option<usize>,
}

/// Three fluorescence checks with deshelving in between.
///
/// Population is tracked classically by location. Each detection reports
/// bright for S population and dark otherwise, flipped with probability
/// `spam_error`; a bright report ends the readout. Between checks the
/// readout D level is swapped with the S level by a laser π pulse that fails
/// with `laser_pi_error`. Population lost to `leakage_rate` over the elapsed
/// time is dark and never deshelved.
pub fn sequential_readout(
    state: &IonState,
    noise: &NoiseModel,
    config: &ExperimentConfig,
    mode: ReadoutMode,
) -> Result<ReadoutResult> {
    noise.validate()?;
    config.validate()?;
    let d = state.d_dim();
    if d != config.d_dim {
        return invalid(format!("state has {d} D levels but the configuration expects {}", config.d_dim));
    }
    let survival = (-noise.leakage_rate * state.elapsed()).exp();
    // Locations: D levels, S(+1/2), S(-1/2), then lost population.
    let mut q: Vec<f64> = state.populations().iter().map(|p| p * survival).collect();
    q.push(1.0 - survival);
    let s_slot = d + config.s_level;
    let eps = noise.spam_error;
    let stay = noise.laser_pi_error;

    let mut probs = [0.0; 4];
    for stage in 0..3 {
        let bright: f64 = q[d] + q[d + 1];
        let dark: f64 = q.iter().sum::<f64>() - bright;
        probs[stage] = bright * (1.0 - eps) + dark * eps;
        for (k, v) in q.iter_mut().enumerate() {
            *v *= if k == d || k == d + 1 { eps } else { 1.0 - eps };
        }
        if stage < 2 {
            let level = config.readout_levels[stage];
            let (a, b) = (q[level], q[s_slot]);
            q[level] = stay * a + (1.0 - stay) * b;
            q[s_slot] = (1.0 - stay) * a + stay * b;
        }
    }
    probs[3] = q.iter().sum::<f64>();
    let outcome = match mode {
        ReadoutMode::Distribution => None,
        ReadoutMode::Sample(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = 3;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            Some(pick)
        }
    };
    Ok(ReadoutResult { probabilities: probs, outcome })
}
