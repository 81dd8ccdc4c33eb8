use crate::error::{Error, Result};

/// z-quantile for two-sided 95% normal intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("mean of an empty vector"));
    }
    Ok(sum(values) / values.len() as f64)
}

/// Mean-centred second moment with divisor n.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("sample variance of an empty vector"));
    }
    let m = mean(values)?;
    let ss: CompensatedSum = values.iter().map(|v| (v - m) * (v - m)).collect();
    Ok(ss.value() / values.len() as f64)
}

/// Variance with divisor n - 1, used for standard errors.
pub fn unbiased_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("unbiased variance needs at least two values"));
    }
    let n = values.len() as f64;
    Ok(sample_variance(values)? * n / (n - 1.0))
}

/// Half-width of the normal-approximation 95% interval for the mean.
pub fn ci95_halfwidth(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::INFINITY;
    }
    let v = unbiased_variance(values).unwrap_or(0.0);
    Z95 * (v / values.len() as f64).sqrt()
}

/// Median of a non-empty slice (average of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty vector"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}
