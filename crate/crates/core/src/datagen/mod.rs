//! Training-distribution families and the samplers behind them.

mod family;
mod linear;
mod party;
mod subsample;
mod teachers;

pub use family::{DistributionFamily, IndexSet, TrainingSample};
pub use linear::{gen_linear, FeatureSampler, LinearParams};
pub use party::{build_membership_datasets, sample_party, MembershipDatasets, PartySpec};
pub use subsample::{subsample_by_attribute, SubsampleParams};
pub use teachers::{
    exp_b_mean, gen_teacher_pair, random_teacher, sample_exp_a, sample_exp_b, ExpAParams, FEATURE_VARIANCE, TEACHER_DIMS,
    TEACHER_WEIGHT_VARIANCE,
};
