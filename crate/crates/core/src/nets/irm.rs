//! Invariant risk minimisation with a fixed scalar classifier `w = 1` on top of
//! the representation `phi` (the IRMv1 surrogate for squared loss).
//!
//! Per step the objective is
//! `1/|E| * sum_e [ R_e(phi) + lambda * (dR_e(w * phi)/dw at w = 1)^2 ]`,
//! divided by `lambda` whenever `lambda > 1` so that the step size stays
//! comparable once the penalty dominates.

use rand::seq::SliceRandom;

use super::mlp::{Gradients, MlpModel, Workspace};
use super::train::{StopReason, TrainOptions, TrainOutcome};
use crate::error::{Error, Result};
use crate::numerics::{Dataset, SeededRng};

#[derive(Debug, Clone)]
pub struct IrmSpec {
    /// Representation with scalar output; the classifier on top is the constant 1.
    pub phi: MlpModel,
    pub penalty_weight: f64,
    /// Epochs trained with `warmup_penalty_weight` before switching to `penalty_weight`.
    pub warmup_epochs: usize,
    pub warmup_penalty_weight: f64,
    pub environments: Vec<Dataset>,
}

impl IrmSpec {
    pub fn new(phi: MlpModel, penalty_weight: f64, environments: Vec<Dataset>) -> Self {
        IrmSpec {
            phi,
            penalty_weight,
            warmup_epochs: 50,
            warmup_penalty_weight: 1.0,
            environments,
        }
    }

    fn weight_for_epoch(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            self.warmup_penalty_weight
        } else {
            self.penalty_weight
        }
    }
}

/// `(dR/dw at w = 1)^2` for squared loss on one environment:
/// `dR/dw = 2/n * sum (phi(x) - y) * phi(x)`.
pub fn irm_penalty(phi: &MlpModel, env: &Dataset) -> Result<f64> {
    if env.is_empty() {
        return Err(Error::invalid("penalty of an empty environment"));
    }
    if env.d() != phi.input_dim() || phi.output_dim() != 1 {
        return Err(Error::invalid("environment does not match the representation"));
    }
    let mut ws = Workspace::new(phi);
    let mut g = 0.0;
    for (x, y) in env.rows().zip(env.labels()) {
        let p = phi.predict(x, &mut ws);
        g += (p - y) * p;
    }
    g *= 2.0 / env.n() as f64;
    Ok(g * g)
}

pub fn train_irm(spec: &IrmSpec, opts: &TrainOptions, rng: &mut SeededRng) -> Result<TrainOutcome> {
    opts.validate()?;
    if spec.environments.is_empty() {
        return Err(Error::invalid("IRM needs at least one environment"));
    }
    if !(spec.penalty_weight >= 0.0) || !(spec.warmup_penalty_weight >= 0.0) {
        return Err(Error::invalid("IRM penalty weights must be >= 0"));
    }
    let phi = &spec.phi;
    if phi.output_dim() != 1 {
        return Err(Error::invalid("IRM representation must have a one-dimensional output"));
    }
    for (e, env) in spec.environments.iter().enumerate() {
        if env.is_empty() {
            return Err(Error::invalid(format!("environment {e} is empty")));
        }
        if env.d() != phi.input_dim() {
            return Err(Error::invalid(format!(
                "environment {e} has {} features, representation expects {}",
                env.d(),
                phi.input_dim()
            )));
        }
    }
    let envs = &spec.environments;
    let pooled = Dataset::concat(&envs.iter().collect::<Vec<_>>())?;

    let mut model = phi.clone();
    let mut ws = Workspace::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut orders: Vec<Vec<usize>> = envs.iter().map(|e| (0..e.n()).collect()).collect();
    let mut history = Vec::new();
    let steps = envs.iter().map(|e| e.n().div_ceil(opts.batch_size)).max().unwrap();

    for epoch in 0..opts.max_epochs {
        let lambda = spec.weight_for_epoch(epoch);
        let rescale = if lambda > 1.0 { lambda } else { 1.0 };
        let snapshot = model.clone();
        for order in orders.iter_mut() {
            order.shuffle(rng);
        }
        for step in 0..steps {
            grads.clear();
            let batches: Vec<(&Dataset, &[usize])> = envs
                .iter()
                .zip(&orders)
                .filter_map(|(env, order)| order.chunks(opts.batch_size).nth(step).map(|b| (env, b)))
                .collect();
            let participating = batches.len() as f64;
            for (env, batch) in batches {
                let labels = env.labels();
                let mut g = 0.0;
                for &i in batch {
                    let p = model.predict(env.row(i), &mut ws);
                    g += (p - labels[i]) * p;
                }
                let nb = batch.len() as f64;
                g *= 2.0 / nb;
                let scale = 2.0 / nb / (participating * rescale);
                for &i in batch {
                    let p = model.predict(env.row(i), &mut ws);
                    let y = labels[i];
                    let coef = (p - y) + 2.0 * lambda * g * (2.0 * p - y);
                    model.backprop_ws(&mut ws, scale * coef, &mut grads);
                }
            }
            model.step(&grads, opts.learning_rate);
        }
        let mse = model.mse(&pooled);
        if !mse.is_finite() || !model.params_finite() {
            return Ok(TrainOutcome {
                model: snapshot,
                history,
                stop: StopReason::Diverged,
            });
        }
        history.push(mse);
        if opts.target_train_mse.is_some_and(|t| mse < t) {
            return Ok(TrainOutcome {
                model,
                history,
                stop: StopReason::TargetReached,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        stop: StopReason::EpochBudget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{flatten_params, random_init, train_erm, unflatten_params, Activation};

    fn chain_env(rng: &mut SeededRng, n: usize, with_x2: Option<f64>) -> Dataset {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x1 = rng.normal(0.0, 1.0);
            let y = x1 + rng.normal(0.0, 1.0);
            xs.push(x1);
            if let Some(v) = with_x2 {
                xs.push(y + rng.normal(0.0, v));
            }
            ys.push(y);
        }
        Dataset::new(xs, if with_x2.is_some() { 2 } else { 1 }, ys).unwrap()
    }

    #[test]
    fn zero_penalty_single_environment_matches_erm() {
        let mut rng = SeededRng::from_seed(10);
        let env = chain_env(&mut rng, 300, Some(0.5));
        let phi = random_init(&[2, 2, 1], Activation::Relu, 0.5, &mut rng).unwrap();
        let opts = TrainOptions {
            max_epochs: 7,
            ..Default::default()
        };
        let spec = IrmSpec {
            phi: phi.clone(),
            penalty_weight: 0.0,
            warmup_epochs: 0,
            warmup_penalty_weight: 0.0,
            environments: vec![env.clone()],
        };
        let irm = train_irm(&spec, &opts, &mut SeededRng::new(1, 2)).unwrap();
        let erm = train_erm(phi, &env, &opts, &mut SeededRng::new(1, 2)).unwrap();
        assert_eq!(flatten_params(&irm.model, false), flatten_params(&erm.model, false));
        assert_eq!(irm.history, erm.history);
    }

    #[test]
    fn planted_invariant_representation_has_no_penalty() {
        // phi(x1) = x1 is the conditional mean in every environment of the chain.
        let identity = unflatten_params(&[1, 1], Activation::Relu, &[1.0, 0.0]).unwrap();
        let mut rng = SeededRng::from_seed(12);
        for _ in 0..3 {
            let env = chain_env(&mut rng, 100_000, None);
            let p = irm_penalty(&identity, &env).unwrap();
            assert!(p <= 1e-3, "penalty {p}");
        }
    }

    #[test]
    fn penalty_hand_value() {
        // phi(x) = 2x on x = 1, y = 1: dR/dw = 2 * (2 - 1) * 2 = 4
        let phi = unflatten_params(&[1, 1], Activation::Linear, &[2.0, 0.0]).unwrap();
        let env = Dataset::new(vec![1.0], 1, vec![1.0]).unwrap();
        assert_eq!(irm_penalty(&phi, &env).unwrap(), 16.0);
    }

    #[test]
    fn empty_environment_list_rejected() {
        let phi = MlpModel::zeros(&[1, 1], Activation::Relu).unwrap();
        let spec = IrmSpec::new(phi, 1.0, vec![]);
        assert!(matches!(
            train_irm(&spec, &TrainOptions::default(), &mut SeededRng::from_seed(0)),
            Err(Error::InvalidParameter(_))
        ));
    }
}
