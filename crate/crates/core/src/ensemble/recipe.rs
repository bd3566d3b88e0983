use serde::{Deserialize, Serialize};

use super::{
    sample_stochastic_member, Architecture, EnsembleDef, Fusion, MemberDef, Pool, SamplingMode,
    SelectDef,
};
use crate::activation::{registry_entry, ActivationSpec};
use crate::error::{Error, Result};
use crate::net::TrainConfig;
use crate::seed;

pub const RECIPES: [&str; 12] = [
    "ENS", "eENS", "ENS_G", "eENS_G", "ALL", "eALL", "15ReLU", "Selection", "Stoc_1", "Stoc_2",
    "Stoc_3", "Stoc_4",
];

const ENS: [&str; 8] = [
    "melu_k8",
    "leaky_relu",
    "elu",
    "melu_k4",
    "prelu",
    "srelu",
    "aplu",
    "relu",
];
const ENS_LARGE_INPUT: [&str; 5] = ["melu_k8", "melu_k4", "srelu", "aplu", "relu"];
const GALU_PAIR: [&str; 2] = ["sgalu", "galu"];

pub(crate) const STOC_1: [&str; 9] = [
    "melu_k8",
    "leaky_relu",
    "elu",
    "melu_k4",
    "prelu",
    "srelu",
    "aplu",
    "galu",
    "sgalu",
];
const STOC_2_EXTRA: [&str; 7] = [
    "relu",
    "soft_learnable",
    "pdelu",
    "mish",
    "srs",
    "swish_learnable",
    "swish",
];
const MELU_GALU_FAMILY: [&str; 4] = ["melu_k8", "melu_k4", "galu", "sgalu"];
const STOC_MAX_INPUT: f64 = 255.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecipeContext {
    pub architecture: Architecture,
    pub max_input: f64,
    pub hidden_layers: usize,
    /// Master seed all member seeds derive from.
    pub seed: u64,
    pub stochastic_members: usize,
    pub sampling: SamplingMode,
}

impl Default for RecipeContext {
    fn default() -> Self {
        RecipeContext {
            architecture: Architecture::Resnet50,
            max_input: 1.0,
            hidden_layers: 2,
            seed: 0,
            stochastic_members: 15,
            sampling: SamplingMode::PerLayer,
        }
    }
}

fn is_unit(max_input: f64) -> bool {
    max_input == 1.0
}

/// maxInput only matters for grid- and hinge-based activations; every other
/// activation is normalized to 1 so identical networks get one identity.
fn effective_max_input(name: &str, max_input: f64) -> Result<f64> {
    let kind = registry_entry(name)?.kind;
    Ok(if kind.uses_max_input() { max_input } else { 1.0 })
}

/// Name of the stand-alone model for `activation` at `max_input`, e.g.
/// `melu_k8` or `melu_k8_m255`.
fn model_name(activation: &str, max_input: f64) -> String {
    if is_unit(max_input) {
        activation.to_string()
    } else {
        format!("{activation}_m{max_input}")
    }
}

fn model_member(activation: &str, max_input: f64, index: u64, ctx: &RecipeContext) -> Result<MemberDef> {
    let max_input = effective_max_input(activation, max_input)?;
    let name = model_name(activation, max_input);
    Ok(MemberDef {
        layer_acts: vec![activation.to_string(); ctx.hidden_layers],
        max_input,
        seed: seed::subseed(ctx.seed, &[seed::name_hash(&name), index]),
        epochs: None,
    })
}

/// A one-network model using `activation` in every hidden layer. Its member
/// is the same network that ensembles built from the same context use.
pub fn single_model(activation: &str, ctx: &RecipeContext) -> Result<EnsembleDef> {
    let entry = registry_entry(activation)?;
    ActivationSpec::from_name(entry.name)?
        .with_max_input(ctx.max_input)
        .validate()?;
    let max_input = effective_max_input(entry.name, ctx.max_input)?;
    Ok(fixed(
        model_name(entry.name, max_input),
        vec![model_member(entry.name, ctx.max_input, 0, ctx)?],
    ))
}

fn fixed(name: String, members: Vec<MemberDef>) -> EnsembleDef {
    EnsembleDef {
        name,
        members,
        fusion: Fusion::Sum,
        select: None,
        tolerate_failures: false,
    }
}

fn members(groups: &[(&[&str], f64)], ctx: &RecipeContext) -> Result<Vec<MemberDef>> {
    let mut out: Vec<MemberDef> = Vec::new();
    for (names, max_input) in groups {
        for name in *names {
            let m = model_member(name, *max_input, 0, ctx)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    Ok(out)
}

fn ens_names(max_input: f64, with_galu: bool) -> Vec<&'static str> {
    let mut names: Vec<&str> = if is_unit(max_input) {
        ENS.to_vec()
    } else {
        ENS_LARGE_INPUT.to_vec()
    };
    if with_galu {
        names.extend(GALU_PAIR);
    }
    names
}

/// Every stand-alone model of the architecture at `max_input`. Models that
/// ignore maxInput are only tabulated at 1, except ReLU, which always joins.
fn all_names(arch: Architecture, max_input: f64) -> Result<Vec<String>> {
    let pool = Pool::for_architecture(arch);
    if is_unit(max_input) {
        return Ok(pool.members);
    }
    let mut names = Vec::new();
    for name in pool.members {
        if registry_entry(&name)?.kind.uses_max_input() {
            names.push(name);
        }
    }
    names.push("relu".into());
    Ok(names)
}

fn suffixed(name: &str, ctx: &RecipeContext) -> String {
    model_name(name, ctx.max_input)
}

fn stochastic_pool(name: &str, arch: Architecture) -> Pool {
    let names: Vec<&str> = match name {
        "Stoc_1" => STOC_1.to_vec(),
        "Stoc_2" => STOC_1.iter().chain(&STOC_2_EXTRA).copied().collect(),
        "Stoc_3" => STOC_1
            .iter()
            .chain(&STOC_2_EXTRA)
            .copied()
            .filter(|n| !MELU_GALU_FAMILY.contains(n))
            .collect(),
        _ => return Pool::for_architecture(arch),
    };
    Pool::new(&names).expect("recipe pools use registry names")
}

/// `n` networks whose hidden-layer activations are drawn from `pool`, all
/// with maxInput 255. Member seeds descend from `seed` and `name`.
pub fn stochastic_def(
    name: &str,
    pool: &Pool,
    n: usize,
    hidden_layers: usize,
    mode: SamplingMode,
    seed: u64,
    epochs: Option<usize>,
) -> Result<EnsembleDef> {
    if n == 0 {
        return Err(Error::Config("stochastic ensembles need at least one member".into()));
    }
    let stream = seed::name_hash(name);
    let mut rng = seed::rng(seed::subseed(seed, &[stream, u64::MAX]));
    let mut members = Vec::with_capacity(n);
    for i in 0..n {
        members.push(MemberDef {
            layer_acts: sample_stochastic_member(pool, hidden_layers, mode, &mut rng)?,
            max_input: STOC_MAX_INPUT,
            seed: seed::subseed(seed, &[stream, i as u64]),
            epochs,
        });
    }
    Ok(EnsembleDef {
        name: name.to_string(),
        members,
        fusion: Fusion::Sum,
        select: None,
        tolerate_failures: true,
    })
}

fn stochastic(name: &str, ctx: &RecipeContext) -> Result<EnsembleDef> {
    stochastic_def(
        name,
        &stochastic_pool(name, ctx.architecture),
        ctx.stochastic_members,
        ctx.hidden_layers,
        ctx.sampling,
        ctx.seed,
        Some(TrainConfig::STOCHASTIC_EPOCHS),
    )
}

/// Builds a named ensemble, or a stand-alone model when `name` is an
/// activation registry name.
pub fn recipe(name: &str, ctx: &RecipeContext) -> Result<EnsembleDef> {
    if ctx.hidden_layers == 0 {
        return Err(Error::Config("recipes need at least one hidden layer".into()));
    }
    let mi = ctx.max_input;
    let both = |f: &dyn Fn(f64) -> Vec<&'static str>| -> Vec<(Vec<&'static str>, f64)> {
        vec![(f(1.0), 1.0), (f(STOC_MAX_INPUT), STOC_MAX_INPUT)]
    };
    let as_groups = |g: &[(Vec<&'static str>, f64)]| -> Result<Vec<MemberDef>> {
        let refs: Vec<(&[&str], f64)> = g.iter().map(|(n, m)| (n.as_slice(), *m)).collect();
        members(&refs, ctx)
    };
    let all_members = |max_input: f64| -> Result<Vec<MemberDef>> {
        let names = all_names(ctx.architecture, max_input)?;
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        members(&[(&refs, max_input)], ctx)
    };
    let eall = || -> Result<Vec<MemberDef>> {
        let mut out = all_members(1.0)?;
        for m in all_members(STOC_MAX_INPUT)? {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    };
    let def = match name {
        "ENS" => fixed(suffixed(name, ctx), as_groups(&[(ens_names(mi, false), mi)])?),
        "ENS_G" => fixed(suffixed(name, ctx), as_groups(&[(ens_names(mi, true), mi)])?),
        "eENS" => fixed(name.into(), as_groups(&both(&|m| ens_names(m, false)))?),
        "eENS_G" => fixed(name.into(), as_groups(&both(&|m| ens_names(m, true)))?),
        "ALL" => fixed(suffixed(name, ctx), all_members(mi)?),
        "eALL" => fixed(name.into(), eall()?),
        "15ReLU" => fixed(
            name.into(),
            (0..15)
                .map(|i| model_member("relu", 1.0, i, ctx))
                .collect::<Result<_>>()?,
        ),
        "Selection" => EnsembleDef {
            select: Some(SelectDef { max_size: None }),
            ..fixed(name.into(), eall()?)
        },
        "Stoc_1" | "Stoc_2" | "Stoc_3" | "Stoc_4" => stochastic(name, ctx)?,
        other => match registry_entry(other) {
            Ok(_) => single_model(other, ctx)?,
            Err(_) => return Err(Error::UnknownRecipe(other.to_string())),
        },
    };
    Ok(def)
}
