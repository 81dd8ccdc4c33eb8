//! The distribution inference game: the trainer draws `r` uniformly from the
//! index set, samples a training set from `D^r`, trains a model, and the
//! adversary guesses `r` from the model alone. An adversary is scored by its
//! advantage over the best model-free guess, `d0 - E[d(r, r_hat)]`.

mod trainer;

use std::collections::HashSet;

use rayon::prelude::*;

pub use trainer::{Objective, TargetTrainer, TrainerConfig};

use crate::datagen::{DistributionFamily, IndexSet};
use crate::error::{Error, Result};
use crate::nets::MlpModel;
use crate::numerics::{ci95_halfwidth, mean, SeededRng};

/// Distance between a true index and a guess.
pub trait Distance: Sync {
    fn eval(&self, r: f64, guess: f64) -> f64;

    /// Built-in kind, if any; only built-in distances have a closed-form `d0`.
    fn kind(&self) -> Option<DistanceKind> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    Absolute,
    Squared,
}

impl Distance for DistanceKind {
    fn eval(&self, r: f64, guess: f64) -> f64 {
        match self {
            DistanceKind::Absolute => (r - guess).abs(),
            DistanceKind::Squared => (r - guess) * (r - guess),
        }
    }

    fn kind(&self) -> Option<DistanceKind> {
        Some(*self)
    }
}

/// `E[d(r, guess)]` for `r` uniform on the index set.
fn expected_distance(index_set: IndexSet, kind: DistanceKind, guess: f64) -> f64 {
    let g = guess;
    match (index_set, kind) {
        (IndexSet::Binary, k) => 0.5 * (k.eval(0.0, g) + k.eval(1.0, g)),
        // integral of |r - g| over [0, 1]
        (IndexSet::Interval, DistanceKind::Absolute) => 0.5 * (g * g + (1.0 - g) * (1.0 - g)),
        // integral of (r - g)^2 over [0, 1]
        (IndexSet::Interval, DistanceKind::Squared) => 1.0 / 3.0 - g + g * g,
    }
}

/// `d0 = inf over r' in R of E[d(r, r')]` under the uniform prior.
pub fn d_zero(index_set: IndexSet, distance: &dyn Distance) -> Result<f64> {
    let kind = distance
        .kind()
        .ok_or_else(|| Error::Unsupported("d0 has no closed form for a custom distance".into()))?;
    let f = |g: f64| expected_distance(index_set, kind, g);
    Ok(match index_set {
        IndexSet::Binary => f(0.0).min(f(1.0)),
        IndexSet::Interval => {
            // both expectations are convex in the guess
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            while hi - lo > 1e-10 {
                let a = hi - phi * (hi - lo);
                let b = lo + phi * (hi - lo);
                if f(a) <= f(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
        }
    })
}

/// The adversary's algorithm `H`: maps a trained model to a guess for `r`.
pub trait Adversary: Sync {
    fn guess(&self, target: &MlpModel) -> Result<f64>;

    /// Family this adversary was prepared for; `None` accepts any family.
    fn family_fingerprint(&self) -> Option<u64> {
        None
    }

    fn trainer_fingerprint(&self) -> Option<u64> {
        None
    }

    /// RNG streams already consumed while preparing the adversary (shadow training).
    fn reserved_streams(&self) -> &[u64] {
        &[]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTrial {
    pub ordinal: usize,
    pub true_r: f64,
    pub guess_r: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageReport {
    pub d_zero: f64,
    pub mean_distance: f64,
    pub advantage: f64,
    pub trial_count: usize,
    pub ci95_halfwidth: f64,
    /// `1 - mean distance` when every index and guess is binary.
    pub accuracy: Option<f64>,
}

/// Stream label for game trial `t`; shadow training must never use these.
pub const TRIAL_STREAM: &str = "game-trial";

/// Plays `trials` independent rounds of the game against one adversary.
pub fn play_game(
    family: &DistributionFamily,
    trainer: &dyn TargetTrainer,
    adversary: &dyn Adversary,
    distance: &dyn Distance,
    trials: usize,
    rng: &SeededRng,
) -> Result<Vec<GameTrial>> {
    Ok(play_game_multi(family, trainer, &[adversary], distance, trials, rng)?.remove(0))
}

/// Plays the game once per trial and lets every adversary guess on the same target.
pub fn play_game_multi(
    family: &DistributionFamily,
    trainer: &dyn TargetTrainer,
    adversaries: &[&dyn Adversary],
    distance: &dyn Distance,
    trials: usize,
    rng: &SeededRng,
) -> Result<Vec<Vec<GameTrial>>> {
    let mut reserved = HashSet::new();
    for adv in adversaries {
        if adv.family_fingerprint().is_some_and(|f| f != family.fingerprint()) {
            return Err(Error::config("adversary was prepared for a different distribution family"));
        }
        if adv.trainer_fingerprint().is_some_and(|f| f != trainer.fingerprint()) {
            return Err(Error::config("adversary was prepared for a different trainer configuration"));
        }
        reserved.extend(adv.reserved_streams().iter().copied());
    }
    for t in 0..trials {
        let stream = rng.child_stream(TRIAL_STREAM, t as u64);
        if reserved.contains(&stream) {
            return Err(Error::config(format!(
                "game trial {t} would reuse random stream {stream:#x} consumed by shadow training"
            )));
        }
    }
    let index_set = family.index_set();
    let per_trial: Vec<Vec<GameTrial>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<GameTrial>> {
            let trial_rng = rng.derive(TRIAL_STREAM, t as u64);
            let r = index_set.sample(&mut trial_rng.derive("index", 0));
            let sample = family.sample(r, &mut trial_rng.derive("data", 0))?;
            let model = trainer.train_target(&sample, &mut trial_rng.derive("train", 0))?;
            adversaries
                .iter()
                .map(|adv| {
                    let guess = adv.guess(&model)?;
                    Ok(GameTrial {
                        ordinal: t,
                        true_r: r,
                        guess_r: guess,
                        distance: distance.eval(r, guess),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(trials); adversaries.len()];
    for row in per_trial {
        for (a, trial) in row.into_iter().enumerate() {
            out[a].push(trial);
        }
    }
    Ok(out)
}

/// Mean distance, advantage, and a normal-approximation 95% half-width.
pub fn advantage(trials: &[GameTrial], d_zero: f64) -> Result<AdvantageReport> {
    if trials.is_empty() {
        return Err(Error::invalid("advantage of an empty trial list"));
    }
    let distances: Vec<f64> = trials.iter().map(|t| t.distance).collect();
    let mean_distance = mean(&distances)?;
    let binary = |v: f64| v == 0.0 || v == 1.0;
    let accuracy = trials
        .iter()
        .all(|t| binary(t.true_r) && binary(t.guess_r))
        .then(|| trials.iter().filter(|t| t.true_r == t.guess_r).count() as f64 / trials.len() as f64);
    Ok(AdvantageReport {
        d_zero,
        mean_distance,
        advantage: d_zero - mean_distance,
        trial_count: trials.len(),
        ci95_halfwidth: ci95_halfwidth(&distances),
        accuracy,
    })
}
