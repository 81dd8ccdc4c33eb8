use crate::error::{Error, Result};
use crate::nets::{random_init, Activation, MlpModel};
use crate::numerics::{Dataset, SeededRng};

/// Teacher architecture shared by the synthetic regression experiments.
pub const TEACHER_DIMS: [usize; 4] = [4, 8, 8, 1];
pub const TEACHER_WEIGHT_VARIANCE: f64 = 1.0;
/// Feature variance of every coordinate in the teacher experiments.
pub const FEATURE_VARIANCE: f64 = 2.0;

/// Two teachers with identical architecture; the second is a noisy copy of the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpAParams {
    /// Standard deviation of the per-parameter perturbation.
    pub weight_noise_std: f64,
    pub teacher_seed: u64,
    /// Records per sampled dataset.
    pub n: usize,
}

pub fn random_teacher(seed: u64) -> MlpModel {
    let mut rng = SeededRng::new(seed, crate::numerics::stream_key(0, "teacher", 0));
    random_init(&TEACHER_DIMS, Activation::Relu, TEACHER_WEIGHT_VARIANCE, &mut rng).expect("valid teacher dims")
}

/// `M0` is a random teacher; `M1` adds independent N(0, eps^2) noise to every weight and bias of `M0`.
pub fn gen_teacher_pair(params: &ExpAParams, rng: &mut SeededRng) -> Result<(MlpModel, MlpModel)> {
    let eps = params.weight_noise_std;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("weight noise must be >= 0, got {eps}")));
    }
    let m0 = random_teacher(params.teacher_seed);
    let mut m1 = m0.clone();
    let variance = eps * eps;
    for l in 0..m1.num_layers() {
        for w in m1.weights_mut(l) {
            *w += rng.normal(0.0, variance);
        }
    }
    for l in 0..m1.num_layers() {
        for b in m1.biases_mut(l) {
            *b += rng.normal(0.0, variance);
        }
    }
    Ok((m0, m1))
}

/// Rows from N_4(mean * 1, 2 I), labelled by the teacher without noise.
pub(crate) fn teacher_dataset(teacher: &MlpModel, mean: f64, n: usize, rng: &mut SeededRng) -> Dataset {
    let d = teacher.input_dim();
    let features = feature_rows(d, mean, n, rng);
    let mut ws = crate::nets::Workspace::new(teacher);
    let labels = features.chunks_exact(d).map(|x| teacher.predict(x, &mut ws)).collect();
    Dataset::new(features, d, labels).expect("teacher outputs are finite")
}

pub(crate) fn feature_rows(d: usize, mean: f64, n: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..n * d).map(|_| rng.normal(mean, FEATURE_VARIANCE)).collect()
}

/// Dataset from `D^b` of the perturbed-teacher family: X ~ N_4(0, 2 I), Y = M^b(X).
pub fn sample_exp_a(b: u8, teachers: &(MlpModel, MlpModel), n: usize, rng: &mut SeededRng) -> Result<Dataset> {
    let teacher = match b {
        0 => &teachers.0,
        1 => &teachers.1,
        _ => return Err(Error::invalid(format!("binary index must be 0 or 1, got {b}"))),
    };
    Ok(teacher_dataset(teacher, 0.0, n, rng))
}

/// Dataset from `D^r` of the mean-shift family: X ~ N_4((2r - 1) 1, 2 I), Y = M(X).
pub fn sample_exp_b(r: f64, teacher: &MlpModel, n: usize, rng: &mut SeededRng) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("index r must lie in [0, 1], got {r}")));
    }
    Ok(teacher_dataset(teacher, exp_b_mean(r), n, rng))
}

pub fn exp_b_mean(r: f64) -> f64 {
    -1.0 + 2.0 * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::flatten_params;
    use crate::numerics::{mean, sample_variance};

    #[test]
    fn zero_noise_pair_is_identical() {
        let p = ExpAParams { weight_noise_std: 0.0, teacher_seed: 4, n: 8 };
        let (a, b) = gen_teacher_pair(&p, &mut SeededRng::from_seed(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perturbation_moment() {
        // 113 parameters per teacher, 20 pairs: mean squared difference ~ eps^2
        let mut diffs = Vec::new();
        for k in 0..20 {
            let p = ExpAParams { weight_noise_std: 0.05, teacher_seed: k, n: 8 };
            let (a, b) = gen_teacher_pair(&p, &mut SeededRng::new(2, k)).unwrap();
            let (fa, fb) = (flatten_params(&a, false), flatten_params(&b, false));
            diffs.extend(fa.iter().zip(&fb).map(|(x, y)| (x - y) * (x - y)));
        }
        assert!(diffs.len() >= 1000);
        let msd = mean(&diffs).unwrap();
        assert!((msd - 0.0025).abs() <= 0.2 * 0.0025, "msd {msd}");
    }

    #[test]
    fn pair_is_deterministic() {
        let p = ExpAParams { weight_noise_std: 0.1, teacher_seed: 9, n: 8 };
        let a = gen_teacher_pair(&p, &mut SeededRng::new(3, 3)).unwrap();
        let b = gen_teacher_pair(&p, &mut SeededRng::new(3, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exp_a_features_and_labels() {
        let p = ExpAParams { weight_noise_std: 0.0, teacher_seed: 1, n: 2048 };
        let pair = gen_teacher_pair(&p, &mut SeededRng::from_seed(5)).unwrap();
        let d0 = sample_exp_a(0, &pair, 2048, &mut SeededRng::new(6, 1)).unwrap();
        let d1 = sample_exp_a(1, &pair, 2048, &mut SeededRng::new(6, 1)).unwrap();
        assert_eq!(d0, d1);
        for j in 0..4 {
            let v = sample_variance(&d0.column(j)).unwrap();
            assert!((v - 2.0).abs() <= 0.15, "column {j} variance {v}");
        }
        for (x, y) in d0.rows().zip(d0.labels()) {
            assert_eq!(pair.0.forward(x).unwrap()[0], *y);
        }
        assert!(sample_exp_a(2, &pair, 4, &mut SeededRng::from_seed(0)).is_err());
    }

    #[test]
    fn exp_b_means_and_shared_mechanism() {
        let teacher = random_teacher(3);
        for (r, want) in [(0.0, -1.0), (0.5, 0.0), (1.0, 1.0)] {
            let d = sample_exp_b(r, &teacher, 2048, &mut SeededRng::new(8, 2)).unwrap();
            for j in 0..4 {
                let m = mean(&d.column(j)).unwrap();
                assert!((m - want).abs() <= 0.1, "r={r} column {j} mean {m}");
            }
        }
        // the label mechanism does not depend on r
        let a = sample_exp_b(0.1, &teacher, 16, &mut SeededRng::new(8, 3)).unwrap();
        for (x, y) in a.rows().zip(a.labels()) {
            assert_eq!(teacher.forward(x).unwrap()[0], *y);
        }
        assert!(sample_exp_b(1.5, &teacher, 4, &mut SeededRng::from_seed(0)).is_err());
    }
}
