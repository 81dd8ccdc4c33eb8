use std::io::Write;

use rayon::prelude::*;

use super::{AttackMode, AttackTask};
use crate::datagen::{DistributionFamily, IndexSet};
use crate::error::{Error, Result};
use crate::game::{TargetTrainer, TrainerConfig};
use crate::nets::{flatten_params, MlpModel, Workspace};
use crate::numerics::SeededRng;

/// Number of query points in a black-box probe set.
pub const PROBE_COUNT: usize = 64;

pub const SHADOW_STREAM: &str = "shadow";
pub const PROBE_STREAM: &str = "probe";

/// Fixed query inputs for black-box attacks, already in model-input space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub rows: Vec<f64>,
    pub d: usize,
    /// Stream the probe inputs were drawn from.
    pub stream: u64,
}

impl ProbeSet {
    /// Draws `count` inputs from the equal mixture of the family's feature marginals:
    /// alternating `r = 0, 1` for binary families, an even grid over `[0, 1]` otherwise.
    pub fn draw(family: &DistributionFamily, trainer: &TrainerConfig, count: usize, rng: &SeededRng) -> Result<Self> {
        let stream = rng.child_stream(PROBE_STREAM, 0);
        let mut prng = SeededRng::new(rng.master_seed(), stream);
        let fd = family.feature_dim();
        let mut raw = Vec::with_capacity(count * fd);
        for i in 0..count {
            let r = match family.index_set() {
                IndexSet::Binary => (i % 2) as f64,
                IndexSet::Interval => grid_point(i, count),
            };
            raw.extend(family.sample_features(r, 1, &mut prng)?);
        }
        Ok(ProbeSet {
            rows: trainer.project_rows(&raw, fd),
            d: trainer.input_dim(fd),
            stream,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `i / (k - 1)`, the `i`-th point of an even `k`-point grid on `[0, 1]`.
pub(crate) fn grid_point(i: usize, k: usize) -> f64 {
    if k <= 1 {
        0.5
    } else {
        i as f64 / (k - 1) as f64
    }
}

/// Query-only view of a target model.
pub struct BlackBox<'a> {
    model: &'a MlpModel,
}

impl<'a> BlackBox<'a> {
    pub fn new(model: &'a MlpModel) -> Self {
        BlackBox { model }
    }

    pub fn query_all(&self, probe: &ProbeSet) -> Result<Vec<f64>> {
        if probe.d != self.model.input_dim() {
            return Err(Error::config(format!(
                "probe inputs have width {}, target expects {}",
                probe.d,
                self.model.input_dim()
            )));
        }
        let mut ws = Workspace::new(self.model);
        Ok(probe.rows.chunks_exact(probe.d).map(|x| self.model.predict(x, &mut ws)).collect())
    }
}

/// Attack features of a model: canonical flattened parameters (white-box) or
/// outputs on the probe set (black-box).
pub fn attack_features(model: &MlpModel, mode: AttackMode, probe: Option<&ProbeSet>) -> Result<Vec<f64>> {
    match mode {
        AttackMode::Whitebox => Ok(flatten_params(model, true)),
        AttackMode::Blackbox => {
            let probe = probe.ok_or_else(|| Error::config("black-box features need a probe set"))?;
            BlackBox::new(model).query_all(probe)
        }
    }
}

/// Shadow models trained with the target's exact configuration, with their labels.
#[derive(Debug, Clone)]
pub struct ShadowSet {
    pub models: Vec<MlpModel>,
    pub labels: Vec<f64>,
    pub task: AttackTask,
    pub streams: Vec<u64>,
    pub family_fingerprint: u64,
    pub trainer_fingerprint: u64,
    pub probe_set: ProbeSet,
}

/// Index labels for `k` shadow models: stratified halves for classification,
/// an even grid for regression.
pub fn shadow_labels(k: usize, task: AttackTask) -> Vec<f64> {
    match task {
        AttackTask::Classify => (0..k).map(|i| if i < k / 2 { 0.0 } else { 1.0 }).collect(),
        AttackTask::Regress => (0..k).map(|i| grid_point(i, k)).collect(),
    }
}

pub fn train_shadows(
    family: &DistributionFamily,
    trainer: &TrainerConfig,
    k: usize,
    task: AttackTask,
    rng: &SeededRng,
) -> Result<ShadowSet> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 shadow models, got {k}")));
    }
    if task == AttackTask::Regress && family.index_set() != IndexSet::Interval {
        return Err(Error::config("regression attacks need a family indexed by [0, 1]"));
    }
    let labels = shadow_labels(k, task);
    let streams: Vec<u64> = (0..k).map(|i| rng.child_stream(SHADOW_STREAM, i as u64)).collect();
    let models = streams
        .par_iter()
        .zip(labels.par_iter())
        .map(|(&stream, &r)| {
            let srng = SeededRng::new(rng.master_seed(), stream);
            let sample = family.sample(r, &mut srng.derive("data", 0))?;
            trainer.train_target(&sample, &mut srng.derive("train", 0))
        })
        .collect::<Result<Vec<_>>>()?;
    let probe_set = ProbeSet::draw(family, trainer, PROBE_COUNT, rng)?;
    Ok(ShadowSet {
        models,
        labels,
        task,
        streams,
        family_fingerprint: family.fingerprint(),
        trainer_fingerprint: trainer.fingerprint(),
        probe_set,
    })
}

impl ShadowSet {
    pub fn corpus(&self, mode: AttackMode) -> Result<ShadowCorpus> {
        let probe = (mode == AttackMode::Blackbox).then(|| self.probe_set.clone());
        let records = self
            .models
            .iter()
            .zip(&self.labels)
            .map(|(m, &r)| Ok((attack_features(m, mode, probe.as_ref())?, r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ShadowCorpus {
            records,
            mode,
            task: self.task,
            probe_set: probe,
            architecture: self.models[0].layer_dims().to_vec(),
            family_fingerprint: self.family_fingerprint,
            trainer_fingerprint: self.trainer_fingerprint,
            reserved_streams: self.streams.clone(),
        })
    }
}

/// Labelled attack-training records.
#[derive(Debug, Clone)]
pub struct ShadowCorpus {
    /// `(attack features, index r)` ordered by shadow ordinal.
    pub records: Vec<(Vec<f64>, f64)>,
    pub mode: AttackMode,
    pub task: AttackTask,
    pub probe_set: Option<ProbeSet>,
    pub architecture: Vec<usize>,
    pub family_fingerprint: u64,
    pub trainer_fingerprint: u64,
    pub reserved_streams: Vec<u64>,
}

pub fn build_shadow_corpus(
    family: &DistributionFamily,
    trainer: &TrainerConfig,
    k: usize,
    mode: AttackMode,
    task: AttackTask,
    rng: &SeededRng,
) -> Result<ShadowCorpus> {
    train_shadows(family, trainer, k, task, rng)?.corpus(mode)
}

impl ShadowCorpus {
    /// Corpus assembled from explicit records, for meta-model tests and imports.
    pub fn from_records(records: Vec<(Vec<f64>, f64)>, mode: AttackMode, task: AttackTask) -> Result<Self> {
        let width = records.first().map(|r| r.0.len()).unwrap_or(0);
        if records.iter().any(|r| r.0.len() != width) {
            return Err(Error::invalid("attack feature vectors have different lengths"));
        }
        Ok(ShadowCorpus {
            records,
            mode,
            task,
            probe_set: None,
            architecture: Vec::new(),
            family_fingerprint: 0,
            trainer_fingerprint: 0,
            reserved_streams: Vec::new(),
        })
    }

    pub fn feature_len(&self) -> usize {
        self.records.first().map_or(0, |r| r.0.len())
    }

    /// CSV with header `shadow_id,r,f0,...,fK`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["shadow_id".to_string(), "r".to_string()];
        header.extend((0..self.feature_len()).map(|j| format!("f{j}")));
        writeln!(out, "{}", header.join(","))?;
        for (i, (f, r)) in self.records.iter().enumerate() {
            let mut cells = vec![i.to_string(), format!("{r:?}")];
            cells.extend(f.iter().map(|v| format!("{v:?}")));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}
