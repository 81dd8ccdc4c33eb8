use crate::error::{Error, Result};
use crate::numerics::{Dataset, SeededRng};

/// Law of the single feature before scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureSampler {
    Normal { mean: f64, variance: f64 },
    Uniform { low: f64, high: f64 },
    /// Every row gets the same value.
    Constant(f64),
}

impl Default for FeatureSampler {
    fn default() -> Self {
        FeatureSampler::Normal { mean: 1.0, variance: 1.0 }
    }
}

impl FeatureSampler {
    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            FeatureSampler::Normal { mean, variance } => rng.normal(mean, variance),
            FeatureSampler::Uniform { low, high } => low + (high - low) * rng.uniform(),
            FeatureSampler::Constant(v) => v,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FeatureSampler::Normal { mean, variance } if mean.is_finite() && variance >= 0.0 && variance.is_finite() => Ok(()),
            FeatureSampler::Uniform { low, high } if low.is_finite() && high.is_finite() && low <= high => Ok(()),
            FeatureSampler::Constant(v) if v.is_finite() => Ok(()),
            other => Err(Error::invalid(format!("invalid feature sampler {other:?}"))),
        }
    }
}

/// One-feature linear model `Y = beta0 + beta1 * X + N(0, noise_variance)` with `X = scale * X0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    pub beta0: f64,
    pub beta1: f64,
    pub noise_variance: f64,
    pub feature_sampler: FeatureSampler,
    pub scale: f64,
    pub n: usize,
}

pub fn gen_linear(params: &LinearParams, rng: &mut SeededRng) -> Result<Dataset> {
    let p = params;
    if !(p.scale > 0.0) || !p.scale.is_finite() {
        return Err(Error::invalid(format!("feature scale must be > 0, got {}", p.scale)));
    }
    if !(p.noise_variance >= 0.0) || !p.noise_variance.is_finite() {
        return Err(Error::invalid(format!("noise variance must be >= 0, got {}", p.noise_variance)));
    }
    p.feature_sampler.validate()?;
    let mut xs = Vec::with_capacity(p.n);
    let mut ys = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let x = p.scale * p.feature_sampler.sample(rng);
        let y = p.beta0 + p.beta1 * x + rng.normal(0.0, p.noise_variance);
        xs.push(x);
        ys.push(y);
    }
    Dataset::new(xs, 1, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ols_fit, sample_variance};

    fn params(scale: f64, noise: f64, n: usize) -> LinearParams {
        LinearParams {
            beta0: 1.0,
            beta1: 2.0,
            noise_variance: noise,
            feature_sampler: FeatureSampler::default(),
            scale,
            n,
        }
    }

    #[test]
    fn noiseless_points_on_line() {
        let d = gen_linear(&params(1.0, 0.0, 50), &mut SeededRng::from_seed(1)).unwrap();
        for (x, y) in d.rows().zip(d.labels()) {
            assert!((y - (1.0 + 2.0 * x[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_multiplies_variance() {
        let v1 = sample_variance(&gen_linear(&params(1.0, 1.0, 50_000), &mut SeededRng::new(2, 0)).unwrap().column(0)).unwrap();
        let v2 = sample_variance(&gen_linear(&params(2.0, 1.0, 50_000), &mut SeededRng::new(2, 1)).unwrap().column(0)).unwrap();
        assert!((v2 / v1 - 4.0).abs() < 0.15, "ratio {}", v2 / v1);
    }

    #[test]
    fn ols_is_consistent() {
        let d = gen_linear(&params(1.0, 1.0, 100_000), &mut SeededRng::from_seed(3)).unwrap();
        let fit = ols_fit(&d, true).unwrap();
        assert!((fit.beta_hat[0] - 1.0).abs() <= 0.02);
        assert!((fit.beta_hat[1] - 2.0).abs() <= 0.02);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_linear(&params(0.0, 1.0, 5), &mut SeededRng::from_seed(0)).is_err());
        assert!(gen_linear(&params(1.0, -1.0, 5), &mut SeededRng::from_seed(0)).is_err());
    }
}
