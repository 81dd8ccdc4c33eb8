//! Flat parameter vectors and permutation canonicalisation.
//!
//! Order: every layer's weight matrix (row-major, one row per output unit),
//! first layer first, followed by every layer's bias vector in the same layer order.

use std::cmp::Ordering;

use super::mlp::{Activation, MlpModel};
use crate::error::{Error, Result};

pub fn flatten_params(model: &MlpModel, canonicalize: bool) -> Vec<f64> {
    let m;
    let src = if canonicalize {
        m = canonical_form(model);
        &m
    } else {
        model
    };
    src.weights.iter().flatten().chain(src.biases.iter().flatten()).copied().collect()
}

/// Inverse of `flatten_params(_, false)`.
pub fn unflatten_params(layer_dims: &[usize], hidden_activation: Activation, params: &[f64]) -> Result<MlpModel> {
    let mut m = MlpModel::zeros(layer_dims, hidden_activation)?;
    if params.len() != m.num_params() {
        return Err(Error::invalid(format!(
            "parameter vector has {} entries, architecture needs {}",
            params.len(),
            m.num_params()
        )));
    }
    let mut it = params.iter().copied();
    for w in m.weights.iter_mut().chain(m.biases.iter_mut()) {
        for v in w.iter_mut() {
            *v = it.next().unwrap();
        }
    }
    Ok(m)
}

/// Reorders hidden units of every hidden layer, first to last, in descending
/// order of (bias, incoming weights, outgoing weights), comparing lexicographically.
/// The computed function is unchanged.
pub fn canonical_form(model: &MlpModel) -> MlpModel {
    let mut m = model.clone();
    let hidden_layers = m.num_layers() - 1;
    for l in 0..hidden_layers {
        let n_in = m.layer_dims[l];
        let n_units = m.layer_dims[l + 1];
        let n_next = m.layer_dims[l + 2];
        let key = |u: usize| -> Vec<f64> {
            let mut k = Vec::with_capacity(1 + n_in + n_next);
            k.push(m.biases[l][u]);
            k.extend_from_slice(&m.weights[l][u * n_in..(u + 1) * n_in]);
            k.extend((0..n_next).map(|o| m.weights[l + 1][o * n_units + u]));
            k
        };
        let keys: Vec<Vec<f64>> = (0..n_units).map(key).collect();
        let mut order: Vec<usize> = (0..n_units).collect();
        order.sort_by(|&a, &b| descending(&keys[a], &keys[b]));
        permute_units(&mut m, l, &order);
    }
    m
}

fn descending(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Moves unit `order[k]` of hidden layer `l` to position `k`, rewiring both adjacent layers.
pub fn permute_units(m: &mut MlpModel, l: usize, order: &[usize]) {
    let n_in = m.layer_dims[l];
    let n_units = m.layer_dims[l + 1];
    let n_next = m.layer_dims[l + 2];
    let old_w = m.weights[l].clone();
    let old_b = m.biases[l].clone();
    let old_next = m.weights[l + 1].clone();
    for (k, &u) in order.iter().enumerate() {
        m.weights[l][k * n_in..(k + 1) * n_in].copy_from_slice(&old_w[u * n_in..(u + 1) * n_in]);
        m.biases[l][k] = old_b[u];
        for o in 0..n_next {
            m.weights[l + 1][o * n_units + k] = old_next[o * n_units + u];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::random_init;
    use crate::numerics::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn documented_order_for_tiny_net() {
        let m = MlpModel::from_parts(&[1, 1, 1], Activation::Relu, vec![vec![2.0], vec![3.0]], vec![vec![1.0], vec![0.0]])
            .unwrap();
        assert_eq!(flatten_params(&m, false), vec![2.0, 3.0, 1.0, 0.0]);
        assert_eq!(flatten_params(&m, true), vec![2.0, 3.0, 1.0, 0.0]);
    }

    #[test]
    fn canonical_form_preserves_function() {
        let mut rng = SeededRng::from_seed(11);
        let m = random_init(&[4, 16, 8, 1], Activation::Relu, 1.0, &mut rng).unwrap();
        let c = canonical_form(&m);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.normal(0.0, 2.0)).collect();
            let a = m.forward(&x).unwrap()[0];
            let b = c.forward(&x).unwrap()[0];
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn canonical_flatten_ignores_hidden_permutations(seed in 0u64..1000, perm_seed in 0u64..1000) {
            let m = random_init(&[3, 6, 5, 1], Activation::Relu, 1.0, &mut SeededRng::from_seed(seed)).unwrap();
            let mut p = m.clone();
            let mut rng = SeededRng::from_seed(perm_seed);
            for l in 0..2 {
                let mut order: Vec<usize> = (0..p.layer_dims()[l + 1]).collect();
                rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
                permute_units(&mut p, l, &order);
            }
            prop_assert_eq!(flatten_params(&m, true), flatten_params(&p, true));
        }

        #[test]
        fn unflatten_inverts_flatten(params in prop::collection::vec(-10.0f64..10.0, 4 * 3 + 3 + 3 + 1)) {
            let m = unflatten_params(&[4, 3, 1], Activation::Relu, &params).unwrap();
            prop_assert_eq!(flatten_params(&m, false), params);
        }
    }
}
