use crate::datagen::TrainingSample;
use crate::error::{Error, Result};
use crate::nets::{random_init, train_erm, train_irm, Activation, IrmSpec, MlpModel, TrainOptions, TrainOutcome};
use crate::numerics::{Dataset, SeededRng};

/// Anything that turns a training draw into a target model.
pub trait TargetTrainer: Sync {
    fn train_target(&self, sample: &TrainingSample, rng: &mut SeededRng) -> Result<MlpModel>;

    /// Digest of the configuration; adversaries built for another trainer are rejected.
    fn fingerprint(&self) -> u64;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Squared error on the pooled training rows.
    Erm,
    /// IRM with `w = 1`, one environment per party in the training draw.
    Irm {
        penalty_weight: f64,
        warmup_epochs: usize,
        warmup_penalty_weight: f64,
    },
}

impl Objective {
    pub fn irm_default() -> Self {
        Objective::Irm {
            penalty_weight: 100.0,
            warmup_epochs: 50,
            warmup_penalty_weight: 1.0,
        }
    }
}

/// Architecture, initialisation, and optimisation settings shared by targets and shadows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    /// Variance of the i.i.d. normal initial weights and biases.
    pub init_variance: f64,
    pub options: TrainOptions,
    pub objective: Objective,
    /// Feature columns the model sees, in order; `None` keeps all of them.
    pub input_columns: Option<Vec<usize>>,
}

impl TrainerConfig {
    pub fn erm(hidden_dims: Vec<usize>, options: TrainOptions) -> Self {
        TrainerConfig {
            hidden_dims,
            activation: Activation::Relu,
            init_variance: 0.25,
            options,
            objective: Objective::Erm,
            input_columns: None,
        }
    }

    pub fn input_dim(&self, feature_dim: usize) -> usize {
        self.input_columns.as_ref().map_or(feature_dim, Vec::len)
    }

    pub fn layer_dims(&self, feature_dim: usize) -> Vec<usize> {
        let mut dims = vec![self.input_dim(feature_dim)];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims
    }

    /// Maps raw feature rows (row-major, width `feature_dim`) to model inputs.
    pub fn project_rows(&self, rows: &[f64], feature_dim: usize) -> Vec<f64> {
        match &self.input_columns {
            None => rows.to_vec(),
            Some(cols) => rows.chunks_exact(feature_dim).flat_map(|r| cols.iter().map(move |&c| r[c])).collect(),
        }
    }

    /// Restricts a dataset to the model's input columns.
    pub fn project(&self, data: &Dataset) -> Result<Dataset> {
        match &self.input_columns {
            None => Ok(data.clone()),
            Some(cols) => data.select_columns(cols),
        }
    }

    /// Full training run, returning the optimiser outcome.
    pub fn fit(&self, sample: &TrainingSample, rng: &mut SeededRng) -> Result<TrainOutcome> {
        let first = sample
            .environments
            .first()
            .ok_or_else(|| Error::invalid("training draw has no data"))?;
        let dims = self.layer_dims(first.d());
        let init = random_init(&dims, self.activation, self.init_variance, &mut rng.derive("init", 0))?;
        let mut sgd = rng.derive("sgd", 0);
        match &self.objective {
            Objective::Erm => {
                let pooled = self.project(&sample.pooled())?;
                train_erm(init, &pooled, &self.options, &mut sgd)
            }
            Objective::Irm {
                penalty_weight,
                warmup_epochs,
                warmup_penalty_weight,
            } => {
                let environments = sample
                    .environments
                    .iter()
                    .map(|e| self.project(e))
                    .collect::<Result<Vec<_>>>()?;
                let spec = IrmSpec {
                    phi: init,
                    penalty_weight: *penalty_weight,
                    warmup_epochs: *warmup_epochs,
                    warmup_penalty_weight: *warmup_penalty_weight,
                    environments,
                };
                train_irm(&spec, &self.options, &mut sgd)
            }
        }
    }
}

impl TargetTrainer for TrainerConfig {
    fn train_target(&self, sample: &TrainingSample, rng: &mut SeededRng) -> Result<MlpModel> {
        Ok(self.fit(sample, rng)?.model)
    }

    fn fingerprint(&self) -> u64 {
        crate::numerics::stream_key(1, &format!("{self:?}"), 0)
    }
}
