//! Pre-wired sweeps over the synthetic leakage experiments: perturbed teachers
//! (differences in `E[Y|X]`), early-stopped models (wrong inductive bias),
//! training-set size (finite data), and distributional membership inference
//! against ERM, causal ERM and IRM models.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::attacks::{evaluate_attacks, train_meta_with, train_shadows, DEFAULT_L2, AttackMode, AttackReport, AttackTask};
use crate::datagen::{DistributionFamily, ExpAParams, IndexSet, PartySpec, TrainingSample};
use crate::error::{Error, Result};
use crate::game::{Objective, TrainerConfig};
use crate::nets::TrainOptions;
use crate::numerics::{median, Dataset, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    ExpAEpsSweep,
    ExpAMseSweep,
    ExpBMseSweep,
    ExpCSizeSweep,
    Membership,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::ExpAEpsSweep => "expA_eps_sweep",
            ExperimentName::ExpAMseSweep => "expA_mse_sweep",
            ExperimentName::ExpBMseSweep => "expB_mse_sweep",
            ExperimentName::ExpCSizeSweep => "expC_size_sweep",
            ExperimentName::Membership => "membership",
        }
    }

    /// Name of the swept parameter in result rows.
    pub fn sweep_param(self) -> &'static str {
        match self {
            ExperimentName::ExpAEpsSweep => "eps",
            ExperimentName::ExpAMseSweep | ExperimentName::ExpBMseSweep => "target_mse",
            ExperimentName::ExpCSizeSweep => "n",
            ExperimentName::Membership => "target_party",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentName::ExpAEpsSweep,
            ExperimentName::ExpAMseSweep,
            ExperimentName::ExpBMseSweep,
            ExperimentName::ExpCSizeSweep,
            ExperimentName::Membership,
        ]
        .into_iter()
        .find(|e| e.as_str() == s)
        .ok_or_else(|| Error::Parse(format!("unknown experiment {s:?}")))
    }
}

/// Target model variants of the membership experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// ERM on both features.
    ErmFull,
    /// ERM on the causal parent `X1` only.
    ErmCausal,
    /// IRM on both features with the classifier fixed to 1.
    Irm,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [ModelVariant::ErmFull, ModelVariant::ErmCausal, ModelVariant::Irm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::ErmFull => "erm_full",
            ModelVariant::ErmCausal => "erm_causal",
            ModelVariant::Irm => "irm",
        }
    }

    pub fn inputs(self) -> Option<Vec<usize>> {
        match self {
            ModelVariant::ErmCausal => Some(vec![0]),
            _ => None,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown model variant {s:?}")))
    }
}

/// Settings of the membership experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipSettings {
    pub parties: usize,
    pub records_per_party: usize,
    pub target_party: usize,
    /// Models per variant used for the validation and inverted-test medians.
    pub target_models: usize,
    /// Records per party in each validation and inverted test set.
    pub eval_records_per_party: usize,
    pub variants: Vec<ModelVariant>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub irm_penalty: f64,
    pub irm_warmup_epochs: usize,
}

impl Default for MembershipSettings {
    fn default() -> Self {
        MembershipSettings {
            parties: 4,
            records_per_party: 512,
            target_party: 3,
            target_models: 256,
            eval_records_per_party: 512,
            variants: ModelVariant::ALL.to_vec(),
            hidden: vec![2],
            epochs: 100,
            irm_penalty: 100.0,
            irm_warmup_epochs: 50,
        }
    }
}

/// Everything that determines one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub sweep: Vec<f64>,
    pub task: AttackTask,
    pub modes: Vec<AttackMode>,
    pub shadows: usize,
    /// L2 strength of the meta-model on standardised features.
    pub meta_l2: f64,
    /// Game rounds per sweep point (attacks per variant for membership).
    pub trials: usize,
    pub seed: u64,
    pub teacher_seed: u64,
    /// Records per training set.
    pub n: usize,
    /// Teacher perturbation for the target-MSE sweep on perturbed teachers.
    pub eps: f64,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Training length when no target MSE is set.
    pub epochs: usize,
    /// Epoch cap for early-stopped training.
    pub max_epochs: usize,
    pub membership: MembershipSettings,
}

pub const DEFAULT_EPS_GRID: [f64; 5] = [0.0, 0.01, 0.02, 0.05, 0.1];
/// From close to the lowest training MSE the students reach, up to a fit stopped after one or two epochs.
pub const DEFAULT_MSE_GRID: [f64; 5] = [0.8, 1.0, 1.5, 2.5, 5.0];
pub const DEFAULT_SIZE_GRID: [f64; 3] = [512.0, 1024.0, 2048.0];

impl ExperimentConfig {
    pub fn new(name: ExperimentName) -> Self {
        let (sweep, task) = match name {
            ExperimentName::ExpAEpsSweep => (DEFAULT_EPS_GRID.to_vec(), AttackTask::Classify),
            ExperimentName::ExpAMseSweep => (DEFAULT_MSE_GRID.to_vec(), AttackTask::Classify),
            ExperimentName::ExpBMseSweep => (DEFAULT_MSE_GRID.to_vec(), AttackTask::Regress),
            ExperimentName::ExpCSizeSweep => (DEFAULT_SIZE_GRID.to_vec(), AttackTask::Regress),
            ExperimentName::Membership => (vec![3.0], AttackTask::Classify),
        };
        ExperimentConfig {
            name,
            sweep,
            task,
            modes: vec![AttackMode::Whitebox, AttackMode::Blackbox],
            shadows: 256,
            meta_l2: DEFAULT_L2,
            trials: if name == ExperimentName::Membership { 100 } else { 200 },
            seed: 1,
            teacher_seed: 1,
            n: 2048,
            eps: 0.05,
            hidden: vec![16],
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 30,
            max_epochs: 100,
            membership: MembershipSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(format!("{key}: {msg}")));
        if self.sweep.is_empty() {
            return bad("sweep", "at least one sweep value is required".into());
        }
        for &v in &self.sweep {
            match self.name {
                ExperimentName::ExpAEpsSweep if !(v >= 0.0 && v.is_finite()) => {
                    return bad("eps", format!("perturbation must be finite and >= 0, got {v}"))
                }
                ExperimentName::ExpAMseSweep | ExperimentName::ExpBMseSweep if !(v > 0.0) => {
                    return bad("target_mse", format!("target MSE must be > 0, got {v}"))
                }
                ExperimentName::ExpCSizeSweep if !(v >= 1.0 && v.fract() == 0.0) => {
                    return bad("sizes", format!("dataset size must be a positive integer, got {v}"))
                }
                _ => {}
            }
        }
        if self.modes.is_empty() {
            return bad("modes", "at least one attack mode is required".into());
        }
        if self.shadows < 2 {
            return bad("shadows", format!("need at least 2 shadow models, got {}", self.shadows));
        }
        if !(self.meta_l2 >= 0.0 && self.meta_l2.is_finite()) {
            return bad("meta_l2", format!("must be finite and >= 0, got {}", self.meta_l2));
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n", "must be at least 1".into());
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("perturbation must be finite and >= 0, got {}", self.eps));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.max_epochs == 0 {
            return bad("epochs", "batch size and epoch counts must be at least 1".into());
        }
        if self.task == AttackTask::Regress && matches!(self.name, ExperimentName::ExpAEpsSweep | ExperimentName::ExpAMseSweep | ExperimentName::Membership) {
            return bad("task", format!("{} has a binary index; use classify", self.name));
        }
        let m = &self.membership;
        if self.name == ExperimentName::Membership {
            if m.target_party >= m.parties {
                return bad("target_party", format!("party {} out of range for {} parties", m.target_party, m.parties));
            }
            if m.records_per_party == 0 || m.eval_records_per_party == 0 || m.target_models == 0 {
                return bad("records_per_party", "record and model counts must be at least 1".into());
            }
            if m.variants.is_empty() {
                return bad("variants", "at least one model variant is required".into());
            }
            if m.epochs == 0 || !(m.irm_penalty >= 0.0) {
                return bad("irm_penalty", "epochs must be >= 1 and the penalty >= 0".into());
            }
        }
        Ok(())
    }

    /// Training options for targets and shadows, early-stopped when `target_mse` is set.
    pub fn options(&self, target_mse: Option<f64>) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            max_epochs: if target_mse.is_some() { self.max_epochs } else { self.epochs },
            batch_size: self.batch_size,
            target_train_mse: target_mse,
        }
    }

    fn index_set(&self) -> IndexSet {
        match self.task {
            AttackTask::Classify => IndexSet::Binary,
            AttackTask::Regress => IndexSet::Interval,
        }
    }

    fn root_rng(&self) -> SeededRng {
        SeededRng::new(self.seed, 0).derive(self.name.as_str(), 0)
    }
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub variant: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub attack_mode: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub ci95: f64,
    pub n: usize,
}

pub const RESULTS_HEADER: &str = "experiment,variant,sweep_param,sweep_value,attack_mode,task,metric,value,ci95,n";

pub fn write_results_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:?},{},{},{},{:?},{:?},{}",
            r.experiment, r.variant, r.sweep_param, r.sweep_value, r.attack_mode, r.task, r.metric, r.value, r.ci95, r.n
        )?;
    }
    Ok(())
}

/// Attack outcome at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub variant: String,
    pub sweep_value: f64,
    pub mode: AttackMode,
    pub report: AttackReport,
}

/// Median MSEs of one membership variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantFit {
    pub variant: ModelVariant,
    pub validation_mse: f64,
    pub test_mse: f64,
    pub models: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub name: ExperimentName,
    pub points: Vec<PointResult>,
    pub fits: Vec<VariantFit>,
}

impl ExperimentOutcome {
    pub fn point(&self, variant: &str, sweep_value: f64, mode: AttackMode) -> Option<&AttackReport> {
        self.points
            .iter()
            .find(|p| p.variant == variant && p.sweep_value == sweep_value && p.mode == mode)
            .map(|p| &p.report)
    }

    pub fn fit(&self, variant: ModelVariant) -> Option<&VariantFit> {
        self.fits.iter().find(|f| f.variant == variant)
    }

    pub fn rows(&self) -> Vec<ResultRow> {
        let experiment = self.name.as_str().to_string();
        let sweep_param = self.name.sweep_param().to_string();
        let mut rows = Vec::new();
        for f in &self.fits {
            let sweep_value = self.points.first().map_or(f64::NAN, |p| p.sweep_value);
            for (metric, value) in [("validation_mse", f.validation_mse), ("test_mse", f.test_mse)] {
                rows.push(ResultRow {
                    experiment: experiment.clone(),
                    variant: f.variant.to_string(),
                    sweep_param: sweep_param.clone(),
                    sweep_value,
                    attack_mode: "none".into(),
                    task: "none".into(),
                    metric: metric.into(),
                    value,
                    ci95: f64::NAN,
                    n: f.models,
                });
            }
        }
        for p in &self.points {
            rows.push(ResultRow {
                experiment: experiment.clone(),
                variant: p.variant.clone(),
                sweep_param: sweep_param.clone(),
                sweep_value: p.sweep_value,
                attack_mode: p.mode.to_string(),
                task: p.report.task.to_string(),
                metric: p.report.metric().into(),
                value: p.report.value,
                ci95: p.report.ci95_halfwidth,
                n: p.report.n_attacks,
            });
        }
        rows
    }
}

/// Trains one shadow set, fits a meta-model per attack mode, and lets them all
/// attack the same freshly trained targets.
fn attack_point(
    config: &ExperimentConfig,
    family: &DistributionFamily,
    trainer: &TrainerConfig,
    variant: &str,
    sweep_value: f64,
    rng: &SeededRng,
) -> Result<Vec<PointResult>> {
    let shadows = train_shadows(family, trainer, config.shadows, config.task, rng)?;
    let metas = config
        .modes
        .iter()
        .map(|&mode| train_meta_with(&shadows.corpus(mode)?, config.meta_l2))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = metas.iter().collect();
    let reports = evaluate_attacks(&refs, family, trainer, config.trials, rng)?;
    Ok(config
        .modes
        .iter()
        .zip(reports)
        .map(|(&mode, report)| PointResult { variant: variant.to_string(), sweep_value, mode, report })
        .collect())
}

fn expect(config: &ExperimentConfig, name: ExperimentName) -> Result<()> {
    if config.name != name {
        return Err(Error::config(format!("configuration is for {}, not {name}", config.name)));
    }
    config.validate()
}

fn point_rng(config: &ExperimentConfig, value: f64) -> SeededRng {
    config.root_rng().derive("point", value.to_bits())
}

fn sweep(
    config: &ExperimentConfig,
    point: impl Fn(f64) -> Result<(DistributionFamily, TrainerConfig)>,
) -> Result<ExperimentOutcome> {
    let mut points = Vec::new();
    for &value in &config.sweep {
        let (family, trainer) = point(value)?;
        points.extend(attack_point(config, &family, &trainer, "erm", value, &point_rng(config, value))?);
    }
    Ok(ExperimentOutcome { name: config.name, points, fits: Vec::new() })
}

/// Perturbed-teacher sweep: either over the perturbation `eps` with fixed-length
/// training, or over the early-stopping target MSE at the configured `eps`.
pub fn run_exp_a(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    match config.name {
        ExperimentName::ExpAEpsSweep => {
            config.validate()?;
            sweep(config, |eps| {
                let family = DistributionFamily::exp_a(ExpAParams { weight_noise_std: eps, teacher_seed: config.teacher_seed, n: config.n })?;
                Ok((family, TrainerConfig::erm(config.hidden.clone(), config.options(None))))
            })
        }
        ExperimentName::ExpAMseSweep => {
            config.validate()?;
            let family = DistributionFamily::exp_a(ExpAParams { weight_noise_std: config.eps, teacher_seed: config.teacher_seed, n: config.n })?;
            sweep(config, |mse| Ok((family.clone(), TrainerConfig::erm(config.hidden.clone(), config.options(Some(mse))))))
        }
        other => Err(Error::config(format!("configuration is for {other}, not an expA sweep"))),
    }
}

/// Shifted-feature sweep over the early-stopping target MSE.
pub fn run_exp_b(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    expect(config, ExperimentName::ExpBMseSweep)?;
    let family = DistributionFamily::exp_b(config.teacher_seed, config.n, config.index_set());
    sweep(config, |mse| Ok((family.clone(), TrainerConfig::erm(config.hidden.clone(), config.options(Some(mse))))))
}

/// Shifted-feature sweep over the training-set size.
pub fn run_exp_c(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    expect(config, ExperimentName::ExpCSizeSweep)?;
    sweep(config, |n| {
        let family = DistributionFamily::exp_b(config.teacher_seed, n as usize, config.index_set());
        Ok((family, TrainerConfig::erm(config.hidden.clone(), config.options(None))))
    })
}

/// Trainer for one membership variant.
pub fn membership_trainer(config: &ExperimentConfig, variant: ModelVariant) -> TrainerConfig {
    let m = &config.membership;
    let mut options = config.options(None);
    options.max_epochs = m.epochs;
    let mut trainer = TrainerConfig::erm(m.hidden.clone(), options);
    trainer.input_columns = variant.inputs();
    if variant == ModelVariant::Irm {
        trainer.objective = Objective::Irm {
            penalty_weight: m.irm_penalty,
            warmup_epochs: m.irm_warmup_epochs,
            warmup_penalty_weight: 1.0,
        };
    }
    trainer
}

fn roster(m: &MembershipSettings, records_per_party: usize, inverted: bool) -> Vec<PartySpec> {
    (0..m.parties)
        .map(|i| PartySpec { party_index: i, records_per_party, inverted_correlation: inverted })
        .collect()
}

/// Median validation and inverted-test MSE over `target_models` models; the
/// models alternate between the two training distributions.
fn variant_fit(config: &ExperimentConfig, variant: ModelVariant, rng: &SeededRng) -> Result<VariantFit> {
    let m = &config.membership;
    let trainer = membership_trainer(config, variant);
    let train = DistributionFamily::membership(roster(m, m.records_per_party, false), m.target_party)?;
    let validation = DistributionFamily::membership(roster(m, m.eval_records_per_party, false), m.target_party)?;
    let test = DistributionFamily::membership(roster(m, m.eval_records_per_party, true), m.target_party)?;
    let scores: Vec<(f64, f64)> = (0..m.target_models)
        .into_par_iter()
        .map(|i| {
            let mrng = rng.derive("fit-model", i as u64);
            let r = (i % 2) as f64;
            let sample = train.sample(r, &mut mrng.derive("data", 0))?;
            let model = trainer.fit(&sample, &mut mrng.derive("train", 0))?.model;
            let eval = |family: &DistributionFamily, label: &str| -> Result<f64> {
                let s: TrainingSample = family.sample(r, &mut mrng.derive(label, 0))?;
                let data: Dataset = trainer.project(&s.pooled())?;
                Ok(model.mse(&data))
            };
            Ok((eval(&validation, "validation")?, eval(&test, "test")?))
        })
        .collect::<Result<_>>()?;
    let (val, test): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
    Ok(VariantFit { variant, validation_mse: median(&val)?, test_mse: median(&test)?, models: m.target_models })
}

/// Distributional membership inference of one party against each model variant.
pub fn run_membership(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    expect(config, ExperimentName::Membership)?;
    let m = &config.membership;
    let family = DistributionFamily::membership(roster(m, m.records_per_party, false), m.target_party)?;
    let root = config.root_rng();
    let mut fits = Vec::new();
    let mut points = Vec::new();
    for (k, &variant) in m.variants.iter().enumerate() {
        let vrng = root.derive(variant.as_str(), k as u64);
        fits.push(variant_fit(config, variant, &vrng.derive("fit", 0))?);
        let trainer = membership_trainer(config, variant);
        points.extend(attack_point(config, &family, &trainer, variant.as_str(), m.target_party as f64, &vrng.derive("attack", 0))?);
    }
    Ok(ExperimentOutcome { name: config.name, points, fits })
}

/// Dispatches on the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    match config.name {
        ExperimentName::ExpAEpsSweep | ExperimentName::ExpAMseSweep => run_exp_a(config),
        ExperimentName::ExpBMseSweep => run_exp_b(config),
        ExperimentName::ExpCSizeSweep => run_exp_c(config),
        ExperimentName::Membership => run_membership(config),
    }
}
