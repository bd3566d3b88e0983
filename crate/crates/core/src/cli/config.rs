use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{recipe, Architecture, EnsembleDef, RecipeContext, SamplingMode};
use crate::error::{Error, Result};
use crate::eval::{load_csv, make_synthetic, Dataset, ProtocolConfig, SyntheticKind};
use crate::net::TrainConfig;
use crate::seed;

/// Overrides the directory that run outputs are written under.
pub const OUTPUT_ROOT_ENV: &str = "ACTENS_OUTPUT_ROOT";

/// One experiment. Read from TOML, or from JSON when the file ends in
/// `.json`; both encode the same schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    /// Master seed; every random stream of the run derives from it.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetSpec>,
    /// Recipe or activation registry names.
    pub models: Vec<String>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_architecture")]
    pub architecture: Architecture,
    #[serde(default = "default_max_input", rename = "maxInput")]
    pub max_input: f64,
    #[serde(default = "default_members")]
    pub stochastic_members: usize,
    #[serde(default)]
    pub sampling: SamplingMode,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_hidden() -> Vec<usize> {
    ProtocolConfig::default().hidden
}
fn default_folds() -> usize {
    ProtocolConfig::default().folds
}
fn default_architecture() -> Architecture {
    RecipeContext::default().architecture
}
fn default_max_input() -> f64 {
    1.0
}
fn default_members() -> usize {
    RecipeContext::default().stochastic_members
}

/// Either a generated toy dataset or a `f1,...,fd,label` CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Generator seed; derived from the master seed and the name if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_n() -> usize {
    200
}
fn default_noise() -> f64 {
    0.1
}

impl DatasetSpec {
    pub fn synthetic(kind: SyntheticKind, n: usize) -> Self {
        DatasetSpec {
            name: None,
            synthetic: Some(kind.name().to_string()),
            csv: None,
            n,
            noise: default_noise(),
            seed: None,
        }
    }

    /// Builds the dataset; relative CSV paths are resolved against `base`.
    pub fn load(&self, master: u64, base: &Path) -> Result<Dataset> {
        let mut ds = match (&self.synthetic, &self.csv) {
            (Some(kind), None) => {
                let kind: SyntheticKind = kind.parse()?;
                let seed = self
                    .seed
                    .unwrap_or_else(|| seed::subseed(master, &[seed::name_hash(kind.name())]));
                make_synthetic(kind, self.n, self.noise, seed)?
            }
            (None, Some(path)) => load_csv(&base.join(path))?,
            _ => {
                return Err(Error::Config(
                    "a dataset needs exactly one of `synthetic` and `csv`".into(),
                ))
            }
        };
        if let Some(name) = &self.name {
            ds.name = name.clone();
        }
        Ok(ds)
    }
}

impl RunConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let cfg: RunConfig = if json {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty()
            || self.experiment.contains(['/', '\\'])
            || self.experiment.starts_with('.')
        {
            return Err(Error::Config(format!(
                "experiment name `{}` is not a plain directory name",
                self.experiment
            )));
        }
        if self.datasets.is_empty() || self.models.is_empty() {
            return Err(Error::Config("a run needs at least one dataset and one model".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty and positive".into()));
        }
        self.train.validate()
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            hidden: self.hidden.clone(),
            train: self.train.clone(),
            folds: self.folds,
            seed: self.seed,
        }
    }

    pub fn recipe_context(&self) -> RecipeContext {
        RecipeContext {
            architecture: self.architecture,
            max_input: self.max_input,
            hidden_layers: self.hidden.len(),
            seed: self.seed,
            stochastic_members: self.stochastic_members,
            sampling: self.sampling,
        }
    }

    pub fn models(&self) -> Result<Vec<EnsembleDef>> {
        let ctx = self.recipe_context();
        self.models.iter().map(|m| recipe(m, &ctx)).collect()
    }

    pub fn load_datasets(&self, base: &Path) -> Result<Vec<Dataset>> {
        self.datasets.iter().map(|d| d.load(self.seed, base)).collect()
    }

    /// `$ACTENS_OUTPUT_ROOT/<experiment>` if the variable is set, otherwise
    /// `<output_dir>/<experiment>` with a relative `output_dir` resolved
    /// against `base`.
    pub fn output_path(&self, base: &Path) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.experiment),
            _ => base.join(&self.output_dir).join(&self.experiment),
        }
    }
}
