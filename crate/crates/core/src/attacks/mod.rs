//! Shadow-model property inference: train models on samples from `D^r` for
//! known `r`, fit a linear meta-model from their weights (white-box) or their
//! outputs on fixed probe inputs (black-box), and use it to guess `r` for a
//! target model.

mod corpus;
mod meta;

use std::fmt;
use std::str::FromStr;

pub use corpus::{
    attack_features, build_shadow_corpus, shadow_labels, train_shadows, BlackBox, ProbeSet, ShadowCorpus, ShadowSet,
    PROBE_COUNT, PROBE_STREAM, SHADOW_STREAM,
};
pub use meta::{attack, train_meta, train_meta_with, MetaModel, DEFAULT_L2};

use crate::datagen::DistributionFamily;
use crate::error::{Error, Result};
use crate::game::{advantage, d_zero, play_game_multi, Adversary, DistanceKind, GameTrial, TargetTrainer};
use crate::numerics::{ci95_halfwidth, mean, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackMode {
    Whitebox,
    Blackbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackTask {
    Classify,
    Regress,
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::Whitebox => "whitebox",
            AttackMode::Blackbox => "blackbox",
        })
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitebox" => Ok(AttackMode::Whitebox),
            "blackbox" => Ok(AttackMode::Blackbox),
            _ => Err(Error::Parse(format!("unknown attack mode {s:?}"))),
        }
    }
}

impl fmt::Display for AttackTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackTask::Classify => "classify",
            AttackTask::Regress => "regress",
        })
    }
}

impl FromStr for AttackTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(AttackTask::Classify),
            "regress" => Ok(AttackTask::Regress),
            _ => Err(Error::Parse(format!("unknown attack task {s:?}"))),
        }
    }
}

impl AttackTask {
    pub fn metric_name(self) -> &'static str {
        match self {
            AttackTask::Classify => "accuracy",
            AttackTask::Regress => "mae",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub task: AttackTask,
    /// Accuracy for classification, mean absolute error for regression.
    pub value: f64,
    pub ci95_halfwidth: f64,
    pub n_attacks: usize,
    /// Advantage under the absolute distance.
    pub advantage: f64,
    pub trials: Vec<GameTrial>,
}

impl AttackReport {
    pub fn metric(&self) -> &'static str {
        self.task.metric_name()
    }

    /// Summarises game trials played under the absolute distance.
    pub fn from_trials(task: AttackTask, d0: f64, trials: Vec<GameTrial>) -> Result<Self> {
        let adv = advantage(&trials, d0)?;
        let (value, ci) = match task {
            AttackTask::Classify => {
                let hits: Vec<f64> = trials.iter().map(|t| if t.true_r == t.guess_r { 1.0 } else { 0.0 }).collect();
                (mean(&hits)?, ci95_halfwidth(&hits))
            }
            AttackTask::Regress => (adv.mean_distance, adv.ci95_halfwidth),
        };
        Ok(AttackReport {
            task,
            value,
            ci95_halfwidth: ci,
            n_attacks: trials.len(),
            advantage: adv.advantage,
            trials,
        })
    }
}

/// Plays `n_attacks` game rounds with `meta` as the adversary.
pub fn evaluate_attack(
    meta: &MetaModel,
    family: &DistributionFamily,
    trainer: &dyn TargetTrainer,
    n_attacks: usize,
    rng: &SeededRng,
) -> Result<AttackReport> {
    Ok(evaluate_attacks(&[meta], family, trainer, n_attacks, rng)?.remove(0))
}

/// Like [`evaluate_attack`], but every meta-model attacks the same target models.
pub fn evaluate_attacks(
    metas: &[&MetaModel],
    family: &DistributionFamily,
    trainer: &dyn TargetTrainer,
    n_attacks: usize,
    rng: &SeededRng,
) -> Result<Vec<AttackReport>> {
    if n_attacks == 0 {
        return Err(Error::invalid("n_attacks must be at least 1"));
    }
    if metas.is_empty() {
        return Ok(Vec::new());
    }
    let d0 = d_zero(family.index_set(), &DistanceKind::Absolute)?;
    let adversaries: Vec<&dyn Adversary> = metas.iter().map(|m| *m as &dyn Adversary).collect();
    let per_adv = play_game_multi(family, trainer, &adversaries, &DistanceKind::Absolute, n_attacks, rng)?;
    metas
        .iter()
        .zip(per_adv)
        .map(|(m, trials)| AttackReport::from_trials(m.task, d0, trials))
        .collect()
}
