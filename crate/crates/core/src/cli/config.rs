//! Run configuration file: TOML sections of `key = value` lines, one section
//! per subcommand plus shared `[run]`, `[attack]` and `[training]` sections.
//! Every key is optional; unknown keys are rejected with their line number.

use serde::Deserialize;

use crate::error::{Error, Result};

/// A scalar or a list; scalars become one-element sweeps.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Values::One(v) => vec![*v],
            Values::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub shadows: Option<usize>,
    pub modes: Option<Vec<String>>,
    pub meta_l2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub max_epochs: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub teacher_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpASection {
    pub eps: Option<Values>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopSection {
    pub eps: Option<f64>,
    pub target_mse: Option<Values>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpBSection {
    pub target_mse: Option<Values>,
    pub task: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpCSection {
    pub sizes: Option<Values>,
    pub task: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipSection {
    pub parties: Option<usize>,
    pub records_per_party: Option<usize>,
    pub target_party: Option<usize>,
    pub target_models: Option<usize>,
    pub eval_records_per_party: Option<usize>,
    pub variants: Option<Vec<String>>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub irm_penalty: Option<f64>,
    pub irm_warmup_epochs: Option<usize>,
    pub attacks: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    pub trials: Option<usize>,
    pub reason1_trials: Option<usize>,
    pub n: Option<usize>,
    pub noise_variance: Option<f64>,
    pub scale: Option<f64>,
    pub beta1: Option<Vec<f64>>,
    pub feature_mean: Option<f64>,
    pub feature_variance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsamplingSection {
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub family: Option<String>,
    pub eps: Option<f64>,
    pub distance: Option<String>,
    pub mode: Option<String>,
    pub task: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default, rename = "expA")]
    pub exp_a: ExpASection,
    #[serde(default, rename = "expA-earlystop")]
    pub exp_a_earlystop: EarlyStopSection,
    #[serde(default, rename = "expB")]
    pub exp_b: ExpBSection,
    #[serde(default, rename = "expC")]
    pub exp_c: ExpCSection,
    #[serde(default)]
    pub membership: MembershipSection,
    #[serde(default)]
    pub theory: TheorySection,
    #[serde(default)]
    pub subsampling: SubsamplingSection,
    #[serde(default)]
    pub game: GameSection,
}

impl FileConfig {
    /// Parses configuration text; errors carry the offending key and line.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().trim().to_string();
            Error::config(match line {
                Some(l) => format!("config line {l}: {msg}"),
                None => format!("config: {msg}"),
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(FileConfig::parse("").unwrap(), FileConfig::default());
    }

    #[test]
    fn scalars_and_lists_are_accepted() {
        let c = FileConfig::parse("[expA]\neps = [0.0, 0.1]\n[expA-earlystop]\ntarget_mse = 2\neps = 0.05\n").unwrap();
        assert_eq!(c.exp_a.eps.unwrap().to_vec(), vec![0.0, 0.1]);
        assert_eq!(c.exp_a_earlystop.target_mse.unwrap().to_vec(), vec![2.0]);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = FileConfig::parse("[run]\nseed = 3\n\n[attack]\nshadow = 4\n").unwrap_err().to_string();
        assert!(err.contains("shadow") && err.contains("line 5"), "{err}");
        let err = FileConfig::parse("[nope]\nx = 1\n").unwrap_err().to_string();
        assert!(err.contains("nope") && err.contains("line 1"), "{err}");
    }

    #[test]
    fn wrong_type_is_reported() {
        let err = FileConfig::parse("[run]\nseed = \"seven\"\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
