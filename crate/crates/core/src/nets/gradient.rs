use super::mlp::{Gradients, MlpModel, Workspace};
use crate::error::{Error, Result};
use crate::numerics::Dataset;

/// Exact gradient of the batch mean squared error `1/n * sum (f(x) - y)^2`.
pub fn gradient(model: &MlpModel, batch: &Dataset) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient of an empty batch"));
    }
    if batch.d() != model.input_dim() {
        return Err(Error::invalid(format!(
            "batch has {} features, model expects {}",
            batch.d(),
            model.input_dim()
        )));
    }
    if model.output_dim() != 1 {
        return Err(Error::invalid("squared-error gradient needs a scalar-output model"));
    }
    let mut ws = Workspace::new(model);
    let mut grads = Gradients::zeros_like(model);
    let scale = 2.0 / batch.n() as f64;
    for (x, y) in batch.rows().zip(batch.labels()) {
        let out = model.predict(x, &mut ws);
        model.backprop_ws(&mut ws, scale * (out - y), &mut grads);
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{flatten_params, random_init, unflatten_params, Activation};
    use crate::numerics::SeededRng;

    #[test]
    fn zero_residual_zero_gradient() {
        let m = MlpModel::from_parts(&[1, 1], Activation::Relu, vec![vec![2.0]], vec![vec![1.0]]).unwrap();
        let batch = Dataset::new(vec![1.0, 2.0], 1, vec![3.0, 5.0]).unwrap();
        let g = gradient(&m, &batch).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_linear_hand_derivative() {
        // y = w x (bias 0): dMSE/dw = 2 (w x - y) x
        let (w, x, y) = (1.5, 2.0, 1.0);
        let m = MlpModel::from_parts(&[1, 1], Activation::Linear, vec![vec![w]], vec![vec![0.0]]).unwrap();
        let g = gradient(&m, &Dataset::new(vec![x], 1, vec![y]).unwrap()).unwrap();
        assert_eq!(g.weights[0][0], 2.0 * (w * x - y) * x);
        assert_eq!(g.biases[0][0], 2.0 * (w * x - y));
    }

    #[test]
    fn matches_central_differences() {
        let mut rng = SeededRng::from_seed(77);
        let m = random_init(&[4, 8, 1], Activation::Relu, 0.5, &mut rng).unwrap();
        let rows: Vec<f64> = (0..40).map(|_| rng.normal(0.0, 1.0)).collect();
        let ys: Vec<f64> = (0..10).map(|_| rng.normal(0.0, 1.0)).collect();
        let batch = Dataset::new(rows, 4, ys).unwrap();
        let analytic = gradient(&m, &batch).unwrap().to_flat();
        let p = flatten_params(&m, false);
        let h = 1e-6;
        for i in 0..p.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[i] += h;
            minus[i] -= h;
            let fp = unflatten_params(&[4, 8, 1], Activation::Relu, &plus).unwrap().mse(&batch);
            let fm = unflatten_params(&[4, 8, 1], Activation::Relu, &minus).unwrap().mse(&batch);
            let numeric = (fp - fm) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-3);
            assert!((analytic[i] - numeric).abs() / denom <= 1e-5, "param {i}: {} vs {numeric}", analytic[i]);
        }
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let m = MlpModel::zeros(&[2, 1], Activation::Relu).unwrap();
        assert!(gradient(&m, &Dataset::empty(2)).is_err());
        assert!(gradient(&m, &Dataset::new(vec![1.0], 1, vec![1.0]).unwrap()).is_err());
    }
}
