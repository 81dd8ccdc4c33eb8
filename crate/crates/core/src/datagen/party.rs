use crate::error::{Error, Result};
use crate::numerics::{Dataset, SeededRng};

/// One party of the causal chain `X1 -> Y -> X2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartySpec {
    pub party_index: usize,
    pub records_per_party: usize,
    /// Draw `X2 ~ -Y + noise` instead of `X2 ~ Y + noise`.
    pub inverted_correlation: bool,
}

impl PartySpec {
    /// Variance of the `X2 | Y` noise.
    pub fn spurious_noise_variance(&self) -> f64 {
        0.5 + self.party_index as f64
    }
}

/// `X1 ~ N(0,1)`, `Y = X1 + N(0,1)`, `X2 = +-Y + N(0, 0.5 + i)`. Features are `(X1, X2)`.
pub fn sample_party(spec: &PartySpec, rng: &mut SeededRng) -> Dataset {
    let sign = if spec.inverted_correlation { -1.0 } else { 1.0 };
    let var2 = spec.spurious_noise_variance();
    let n = spec.records_per_party;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.normal(0.0, 1.0);
        let y = x1 + rng.normal(0.0, 1.0);
        let x2 = sign * y + rng.normal(0.0, var2);
        features.extend([x1, x2]);
        labels.push(y);
    }
    Dataset::new(features, 2, labels).expect("finite gaussian draws")
}

/// Per-party datasets plus the two training sets: `D0` pools every party,
/// `D1` pools every party except `target_party`.
#[derive(Debug, Clone)]
pub struct MembershipDatasets {
    pub parties: Vec<Dataset>,
    pub with_target: Dataset,
    pub without_target: Dataset,
}

pub fn build_membership_datasets(
    parties: &[PartySpec],
    target_party: usize,
    rng: &mut SeededRng,
) -> Result<MembershipDatasets> {
    validate_roster(parties, target_party)?;
    let data: Vec<Dataset> = parties
        .iter()
        .enumerate()
        .map(|(k, p)| sample_party(p, &mut rng.derive("party", k as u64)))
        .collect();
    let all: Vec<&Dataset> = data.iter().collect();
    let rest: Vec<&Dataset> = parties
        .iter()
        .zip(&data)
        .filter(|(p, _)| p.party_index != target_party)
        .map(|(_, d)| d)
        .collect();
    let with_target = Dataset::concat(&all)?;
    let without_target = if rest.is_empty() { Dataset::empty(2) } else { Dataset::concat(&rest)? };
    Ok(MembershipDatasets {
        parties: data,
        with_target,
        without_target,
    })
}

pub(crate) fn validate_roster(parties: &[PartySpec], target_party: usize) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for p in parties {
        if !seen.insert(p.party_index) {
            return Err(Error::invalid(format!("duplicate party index {}", p.party_index)));
        }
    }
    if !seen.contains(&target_party) {
        return Err(Error::invalid(format!("target party {target_party} is not in the roster")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ols_fit, sample_variance};

    fn roster(k: usize, n: usize) -> Vec<PartySpec> {
        (0..k)
            .map(|i| PartySpec { party_index: i, records_per_party: n, inverted_correlation: false })
            .collect()
    }

    #[test]
    fn x2_variance_follows_chain() {
        let spec = PartySpec { party_index: 0, records_per_party: 100_000, inverted_correlation: false };
        let d = sample_party(&spec, &mut SeededRng::from_seed(1));
        let v = sample_variance(&d.column(1)).unwrap();
        assert!((v - 2.5).abs() <= 0.1, "var {v}");
    }

    #[test]
    fn causal_slope_is_invariant() {
        for (i, inv) in [(0, false), (3, false), (2, true)] {
            let spec = PartySpec { party_index: i, records_per_party: 100_000, inverted_correlation: inv };
            let d = sample_party(&spec, &mut SeededRng::new(2, i as u64));
            let fit = ols_fit(&d.select_columns(&[0]).unwrap(), true).unwrap();
            assert!((fit.slope(0) - 1.0).abs() <= 0.03, "party {i} slope {}", fit.slope(0));
            assert!((fit.residual_mse - 1.0).abs() <= 0.03);
        }
    }

    #[test]
    fn inversion_flips_correlation_sign() {
        let corr = |inv| {
            let spec = PartySpec { party_index: 1, records_per_party: 5000, inverted_correlation: inv };
            let d = sample_party(&spec, &mut SeededRng::from_seed(3));
            let x2 = d.column(1);
            x2.iter().zip(d.labels()).map(|(a, b)| a * b).sum::<f64>()
        };
        assert!(corr(false) > 0.0);
        assert!(corr(true) < 0.0);
    }

    #[test]
    fn membership_sizes_and_subset() {
        let m = build_membership_datasets(&roster(4, 512), 3, &mut SeededRng::from_seed(4)).unwrap();
        assert_eq!(m.with_target.n(), 2048);
        assert_eq!(m.without_target.n(), 1536);
        // D1 is the first three parties of D0, row for row
        assert_eq!(m.with_target.subset(&(0..1536).collect::<Vec<_>>()), m.without_target);
    }

    #[test]
    fn single_party_leaves_empty_complement() {
        let m = build_membership_datasets(&roster(1, 10), 0, &mut SeededRng::from_seed(5)).unwrap();
        assert!(m.without_target.is_empty());
        assert_eq!(m.with_target.n(), 10);
    }

    #[test]
    fn roster_validation() {
        let mut r = roster(3, 4);
        r[2].party_index = 1;
        assert!(build_membership_datasets(&r, 0, &mut SeededRng::from_seed(6)).is_err());
        assert!(build_membership_datasets(&roster(3, 4), 7, &mut SeededRng::from_seed(6)).is_err());
    }
}
