use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::numerics::{Dataset, SeededRng};

/// Conditional subsampling on a binary attribute stored as a feature column of `base`.
#[derive(Debug, Clone)]
pub struct SubsampleParams {
    pub base: Dataset,
    /// Column of `base` holding the attribute T (values 0 or 1).
    pub t_column: usize,
    /// Requested Pr(T = 0) in the output.
    pub ratio: f64,
    /// Keep T as a feature; otherwise it is dropped from the output.
    pub t_is_feature: bool,
    pub n: usize,
}

/// Draws exactly `floor(ratio * n)` rows with T = 0 and the rest with T = 1,
/// uniformly without replacement inside each stratum, then shuffles the rows.
pub fn subsample_by_attribute(params: &SubsampleParams, rng: &mut SeededRng) -> Result<Dataset> {
    let p = params;
    if !(0.0..=1.0).contains(&p.ratio) {
        return Err(Error::invalid(format!("ratio must lie in [0, 1], got {}", p.ratio)));
    }
    if p.t_column >= p.base.d() {
        return Err(Error::invalid(format!("attribute column {} out of range", p.t_column)));
    }
    let mut strata: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, row) in p.base.rows().enumerate() {
        match row[p.t_column] {
            t if t == 0.0 => strata[0].push(i),
            t if t == 1.0 => strata[1].push(i),
            t => return Err(Error::invalid(format!("attribute at row {i} is {t}, expected 0 or 1"))),
        }
    }
    let zeros = (p.ratio * p.n as f64).floor() as usize;
    let wanted = [zeros, p.n - zeros];
    for t in 0..2 {
        if strata[t].len() < wanted[t] {
            return Err(Error::Capacity {
                stratum: format!("T={t}"),
                requested: wanted[t],
                available: strata[t].len(),
            });
        }
    }
    let mut picked = Vec::with_capacity(p.n);
    for t in 0..2 {
        let chosen = index::sample(rng, strata[t].len(), wanted[t]);
        picked.extend(chosen.iter().map(|k| strata[t][k]));
    }
    picked.shuffle(rng);
    let out = p.base.subset(&picked);
    if p.t_is_feature {
        Ok(out)
    } else {
        if p.base.d() == 1 {
            return Err(Error::invalid("dropping the attribute would leave no features"));
        }
        let keep: Vec<usize> = (0..p.base.d()).filter(|&c| c != p.t_column).collect();
        out.select_columns(&keep)
    }
}
