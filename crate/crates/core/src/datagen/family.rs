use super::linear::{gen_linear, LinearParams};
use super::party::{sample_party, validate_roster, PartySpec};
use super::subsample::{subsample_by_attribute, SubsampleParams};
use super::teachers::{exp_b_mean, feature_rows, gen_teacher_pair, random_teacher, teacher_dataset, ExpAParams};
use crate::error::{Error, Result};
use crate::nets::MlpModel;
use crate::numerics::{stream_key, Dataset, SeededRng};

/// Where the distribution index `r` lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexSet {
    /// `{0, 1}`
    Binary,
    /// `[0, 1]`
    Interval,
}

impl IndexSet {
    pub fn contains(&self, r: f64) -> bool {
        match self {
            IndexSet::Binary => r == 0.0 || r == 1.0,
            IndexSet::Interval => (0.0..=1.0).contains(&r),
        }
    }

    /// Uniform draw from the index set.
    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        match self {
            IndexSet::Binary => {
                if rng.bernoulli(0.5) {
                    1.0
                } else {
                    0.0
                }
            }
            IndexSet::Interval => rng.uniform(),
        }
    }

    fn check(&self, r: f64) -> Result<()> {
        if self.contains(r) {
            Ok(())
        } else {
            Err(Error::invalid(format!("index {r} is not in {self:?}")))
        }
    }
}

/// One training draw. Families made of several parties keep one dataset per party
/// so that environment-aware trainers can use them; everyone else sees the pooled rows.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub environments: Vec<Dataset>,
}

impl TrainingSample {
    pub fn single(data: Dataset) -> Self {
        TrainingSample { environments: vec![data] }
    }

    pub fn pooled(&self) -> Dataset {
        if self.environments.len() == 1 {
            return self.environments[0].clone();
        }
        Dataset::concat(&self.environments.iter().collect::<Vec<_>>()).expect("environments share a width")
    }

    pub fn n(&self) -> usize {
        self.environments.iter().map(Dataset::n).sum()
    }
}

/// A family of training distributions `D^r`, `r` in an [`IndexSet`].
#[derive(Debug, Clone)]
pub enum DistributionFamily {
    /// Two teachers that differ by weight noise; `r` selects the teacher.
    ExpA { params: ExpAParams, teachers: (MlpModel, MlpModel) },
    /// One teacher, features with mean `(2r - 1)` in every coordinate.
    ExpB {
        teacher_seed: u64,
        teacher: MlpModel,
        n: usize,
        index_set: IndexSet,
    },
    /// `r = 0`: every party contributes; `r = 1`: `target_party` is left out.
    Membership { parties: Vec<PartySpec>, target_party: usize },
    /// Linear data whose feature is scaled by `1 + r (high_scale - 1)`.
    LinearTheory {
        base: LinearParams,
        high_scale: f64,
        index_set: IndexSet,
    },
    /// Subsamples of a fixed base dataset with Pr(T = 0) equal to `ratios[r]`.
    Subsampled {
        base: Dataset,
        t_column: usize,
        ratios: [f64; 2],
        t_is_feature: bool,
        n: usize,
    },
}

impl DistributionFamily {
    /// Perturbed-teacher family; teachers are a pure function of `params`.
    pub fn exp_a(params: ExpAParams) -> Result<Self> {
        let mut rng = SeededRng::new(params.teacher_seed, stream_key(0, "teacher-noise", 0));
        let teachers = gen_teacher_pair(&params, &mut rng)?;
        Ok(DistributionFamily::ExpA { params, teachers })
    }

    pub fn exp_b(teacher_seed: u64, n: usize, index_set: IndexSet) -> Self {
        DistributionFamily::ExpB {
            teacher_seed,
            teacher: random_teacher(teacher_seed),
            n,
            index_set,
        }
    }

    pub fn membership(parties: Vec<PartySpec>, target_party: usize) -> Result<Self> {
        validate_roster(&parties, target_party)?;
        Ok(DistributionFamily::Membership { parties, target_party })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DistributionFamily::ExpA { .. } => "expA",
            DistributionFamily::ExpB { .. } => "expB",
            DistributionFamily::Membership { .. } => "membership",
            DistributionFamily::LinearTheory { .. } => "linear_theory",
            DistributionFamily::Subsampled { .. } => "subsampled",
        }
    }

    pub fn index_set(&self) -> IndexSet {
        match self {
            DistributionFamily::ExpA { .. }
            | DistributionFamily::Membership { .. }
            | DistributionFamily::Subsampled { .. } => IndexSet::Binary,
            DistributionFamily::ExpB { index_set, .. } | DistributionFamily::LinearTheory { index_set, .. } => *index_set,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            DistributionFamily::ExpA { teachers, .. } => teachers.0.input_dim(),
            DistributionFamily::ExpB { teacher, .. } => teacher.input_dim(),
            DistributionFamily::Membership { .. } => 2,
            DistributionFamily::LinearTheory { .. } => 1,
            DistributionFamily::Subsampled { base, t_is_feature, .. } => {
                if *t_is_feature {
                    base.d()
                } else {
                    base.d() - 1
                }
            }
        }
    }

    /// Draws one training set from `D^r`.
    pub fn sample(&self, r: f64, rng: &mut SeededRng) -> Result<TrainingSample> {
        self.index_set().check(r)?;
        match self {
            DistributionFamily::ExpA { params, teachers } => {
                let t = if r == 0.0 { &teachers.0 } else { &teachers.1 };
                Ok(TrainingSample::single(teacher_dataset(t, 0.0, params.n, rng)))
            }
            DistributionFamily::ExpB { teacher, n, .. } => {
                Ok(TrainingSample::single(teacher_dataset(teacher, exp_b_mean(r), *n, rng)))
            }
            DistributionFamily::Membership { parties, target_party } => {
                let environments = parties
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| r == 0.0 || p.party_index != *target_party)
                    .map(|(k, p)| sample_party(p, &mut rng.derive("party", k as u64)))
                    .collect::<Vec<_>>();
                if environments.is_empty() {
                    return Err(Error::invalid("membership draw without any party"));
                }
                Ok(TrainingSample { environments })
            }
            DistributionFamily::LinearTheory { base, high_scale, .. } => {
                let params = LinearParams {
                    scale: 1.0 + r * (high_scale - 1.0),
                    ..*base
                };
                Ok(TrainingSample::single(gen_linear(&params, rng)?))
            }
            DistributionFamily::Subsampled {
                base,
                t_column,
                ratios,
                t_is_feature,
                n,
            } => {
                let params = SubsampleParams {
                    base: base.clone(),
                    t_column: *t_column,
                    ratio: ratios[r as usize],
                    t_is_feature: *t_is_feature,
                    n: *n,
                };
                Ok(TrainingSample::single(subsample_by_attribute(&params, rng)?))
            }
        }
    }

    /// `count` feature rows (row-major) drawn from the feature marginal of `D^r`.
    pub fn sample_features(&self, r: f64, count: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
        self.index_set().check(r)?;
        match self {
            DistributionFamily::ExpA { teachers, .. } => Ok(feature_rows(teachers.0.input_dim(), 0.0, count, rng)),
            DistributionFamily::ExpB { teacher, .. } => Ok(feature_rows(teacher.input_dim(), exp_b_mean(r), count, rng)),
            DistributionFamily::Membership { parties, target_party } => {
                let present: Vec<&PartySpec> = parties
                    .iter()
                    .filter(|p| r == 0.0 || p.party_index != *target_party)
                    .collect();
                let mut out = Vec::with_capacity(2 * count);
                for _ in 0..count {
                    let p = present[rng.below(present.len())];
                    let one = PartySpec { records_per_party: 1, ..*p };
                    out.extend_from_slice(sample_party(&one, rng).row(0));
                }
                Ok(out)
            }
            _ => {
                let mut out = Vec::with_capacity(count * self.feature_dim());
                while out.len() < count * self.feature_dim() {
                    let s = self.sample(r, rng)?.pooled();
                    let need = count * self.feature_dim() - out.len();
                    out.extend(s.features().iter().take(need));
                }
                Ok(out)
            }
        }
    }

    /// Stable digest of everything that determines the family.
    pub fn fingerprint(&self) -> u64 {
        crate::numerics::stream_key(0, &format!("{self:?}"), 0)
    }
}
