//! Ensembles of networks that differ in their activation layers: sum-rule
//! fusion, stochastic activation sampling from per-architecture pools,
//! floating forward selection of members, and the named recipes.

mod recipe;
mod sffs;
mod table;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use recipe::{recipe, single_model, stochastic_def, RecipeContext, RECIPES};
pub use sffs::{fused_criterion, sffs, sffs_select, SFFS_EPSILON};
pub use table::{read_score_csv, write_score_csv, PerformanceTable, ScoreStore};
pub use train::{
    build_stochastic_ensemble, train_ensemble, train_member, StochasticEnsemble, TrainedEnsemble,
    TrainedMember, MAX_LOST_FRACTION,
};
pub(crate) use train::check_losses;

use crate::activation::{registry_entry, ActivationSpec};
use crate::error::{Error, Result};
use crate::net::{Matrix, ScoreMatrix};

/// Arithmetic mean of the members' probability rows.
pub fn sum_rule(scores: &[&ScoreMatrix]) -> Result<ScoreMatrix> {
    let first = scores
        .first()
        .ok_or_else(|| Error::Shape("sum rule of zero score matrices".into()))?;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.probs.rows != first.probs.rows || s.probs.cols != first.probs.cols {
            return Err(Error::Shape(format!(
                "member {i} scores are {}x{}, member 0 scores are {}x{}",
                s.probs.rows, s.probs.cols, first.probs.rows, first.probs.cols
            )));
        }
        if s.labels != first.labels {
            return Err(Error::Shape(format!("member {i} lists samples in a different order")));
        }
    }
    let n = scores.len() as f64;
    let mut sum = Matrix::zeros(first.probs.rows, first.probs.cols);
    for s in scores {
        for (acc, v) in sum.data.iter_mut().zip(&s.probs.data) {
            *acc += v;
        }
    }
    for v in &mut sum.data {
        *v /= n;
    }
    ScoreMatrix::new(sum, first.labels.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Vgg16,
    Resnet50,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Vgg16 => "vgg16",
            Architecture::Resnet50 => "resnet50",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vgg16" => Ok(Architecture::Vgg16),
            "resnet50" => Ok(Architecture::Resnet50),
            _ => Err(Error::Config(format!("unknown architecture `{s}`"))),
        }
    }
}

/// Every activation paired with either architecture, in table order.
const POOL_RESNET50: [&str; 24] = [
    "melu_k8",
    "leaky_relu",
    "elu",
    "melu_k4",
    "prelu",
    "srelu",
    "aplu",
    "relu",
    "sgalu",
    "galu",
    "flexible_melu",
    "tanelu",
    "melu2d",
    "melu_galu",
    "splash",
    "symmetric_galu",
    "symmetric_melu",
    "soft_learnable2",
    "soft_learnable",
    "pdelu",
    "mish",
    "srs",
    "swish_learnable",
    "swish",
];

const NOT_WITH_VGG16: [&str; 3] = ["melu2d", "splash", "srs"];

/// Candidate activations for stochastic substitution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub members: Vec<String>,
    pub architecture: Option<Architecture>,
}

impl Pool {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Pool> {
        if names.is_empty() {
            return Err(Error::Config("activation pool is empty".into()));
        }
        let members = names
            .iter()
            .map(|n| registry_entry(n.as_ref()).map(|e| e.name.to_string()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Pool {
            members,
            architecture: None,
        })
    }

    /// The per-architecture pool.
    pub fn for_architecture(arch: Architecture) -> Pool {
        let members = POOL_RESNET50
            .iter()
            .filter(|n| arch == Architecture::Resnet50 || !NOT_WITH_VGG16.contains(n))
            .map(|n| n.to_string())
            .collect();
        Pool {
            members,
            architecture: Some(arch),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Every activation layer draws its own pool member.
    #[default]
    PerLayer,
    /// One draw shared by all activation layers of a network.
    PerNetwork,
}

/// Uniformly draws one pool member per activation layer.
pub fn sample_stochastic_member<R: Rng + ?Sized>(
    pool: &Pool,
    n_act_layers: usize,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<Vec<String>> {
    if pool.is_empty() {
        return Err(Error::Config("activation pool is empty".into()));
    }
    if n_act_layers == 0 {
        return Err(Error::Config("need at least one activation layer".into()));
    }
    let mut draw = || pool.members[rng.gen_range(0..pool.len())].clone();
    Ok(match mode {
        SamplingMode::PerLayer => (0..n_act_layers).map(|_| draw()).collect(),
        SamplingMode::PerNetwork => vec![draw(); n_act_layers],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    #[default]
    Sum,
}

/// One network of an ensemble: the activation of each hidden layer, the
/// grid scale, and the seed its weights and training stream descend from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberDef {
    pub layer_acts: Vec<String>,
    #[serde(rename = "maxInput")]
    pub max_input: f64,
    pub seed: u64,
    /// Overrides the run's epoch count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

impl MemberDef {
    pub fn specs(&self) -> Result<Vec<ActivationSpec>> {
        self.layer_acts
            .iter()
            .map(|n| {
                let spec = ActivationSpec::from_name(n)?.with_max_input(self.max_input);
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    /// Stable identity used to share trained networks between ensembles.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("member definitions serialize")
    }
}

/// Floating forward selection over the members, leaving the evaluated
/// dataset out of the selection criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectDef {
    /// Largest subset considered; defaults to all members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleDef {
    pub name: String,
    pub members: Vec<MemberDef>,
    #[serde(default)]
    pub fusion: Fusion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectDef>,
    /// Diverged members are dropped instead of failing the ensemble.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tolerate_failures: bool,
}

impl EnsembleDef {
    pub fn validate(&self, hidden_layers: usize) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config(format!("ensemble `{}` has no members", self.name)));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(Error::Config(format!("`{}` is not a usable model name", self.name)));
        }
        for (i, m) in self.members.iter().enumerate() {
            if m.layer_acts.len() != hidden_layers {
                return Err(Error::Config(format!(
                    "`{}` member {i} assigns {} activations to {hidden_layers} hidden layers",
                    self.name,
                    m.layer_acts.len()
                )));
            }
            m.specs()
                .map_err(|e| e.context(format!("`{}` member {i}", self.name)))?;
        }
        Ok(())
    }
}
