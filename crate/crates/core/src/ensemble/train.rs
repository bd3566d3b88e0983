use rayon::prelude::*;

use super::{stochastic_def, sum_rule, EnsembleDef, MemberDef, Pool, SamplingMode};
use crate::error::{Error, Result};
use crate::eval::{Dataset, Standardizer};
use crate::net::{build_mlp, train, History, Network, ScoreMatrix, TrainConfig};
use crate::seed;

/// Largest fraction of a stochastic ensemble that may diverge before the
/// whole ensemble is considered failed.
pub const MAX_LOST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct TrainedMember {
    pub index: usize,
    pub member: MemberDef,
    pub net: Network,
    pub history: History,
    pub scores: ScoreMatrix,
}

#[derive(Debug, Clone)]
pub struct TrainedEnsemble {
    pub name: String,
    pub members: Vec<TrainedMember>,
    /// Indices of members dropped after diverging, with the reason.
    pub failed: Vec<(usize, String)>,
    pub fused: ScoreMatrix,
}

#[derive(Debug, Clone)]
pub struct StochasticEnsemble {
    pub def: EnsembleDef,
    pub trained: TrainedEnsemble,
}

/// Trains one member on already normalized data and scores `test`.
/// `seed` fixes both the initial weights and the training stream.
pub fn train_member(
    member: &MemberDef,
    hidden: &[usize],
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    seed: u64,
) -> Result<(Network, History, ScoreMatrix)> {
    if hidden.len() != member.layer_acts.len() {
        return Err(Error::Config(format!(
            "{} hidden layers but {} activations",
            hidden.len(),
            member.layer_acts.len()
        )));
    }
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(train_set.dim());
    dims.extend_from_slice(hidden);
    dims.push(train_set.classes);
    let mut net = build_mlp(&dims, &member.specs()?, seed)?;
    let cfg = TrainConfig {
        epochs: member.epochs.unwrap_or(cfg.epochs),
        seed: seed::subseed(seed, &[u64::MAX]),
        ..cfg.clone()
    };
    let history = train(&mut net, train_set, &cfg)?;
    let scores = net.predict_proba(&test_set.features, &test_set.labels)?;
    Ok((net, history, scores))
}

/// Fits the normalization on `train_set`, trains every member in parallel
/// and fuses their scores on `test_set` by the sum rule. Each member's seed
/// is `subseed(member.seed, context)`.
pub fn train_ensemble(
    def: &EnsembleDef,
    hidden: &[usize],
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    context: &[u64],
) -> Result<TrainedEnsemble> {
    def.validate(hidden.len())?;
    let norm = Standardizer::fit(&train_set.features, train_set.image_shape.is_some());
    let train_set = train_set.with_features(norm.apply(&train_set.features));
    let test_set = test_set.with_features(norm.apply(&test_set.features));
    let results: Vec<Result<(Network, History, ScoreMatrix)>> = def
        .members
        .par_iter()
        .map(|m| {
            train_member(
                m,
                hidden,
                cfg,
                &train_set,
                &test_set,
                seed::subseed(m.seed, context),
            )
        })
        .collect();
    let mut members = Vec::new();
    let mut failed = Vec::new();
    for (index, (member, result)) in def.members.iter().zip(results).enumerate() {
        match result {
            Ok((net, history, scores)) => members.push(TrainedMember {
                index,
                member: member.clone(),
                net,
                history,
                scores,
            }),
            Err(e @ Error::Diverged { .. }) if def.tolerate_failures => {
                failed.push((index, e.to_string()))
            }
            Err(e) => return Err(e.context(format!("`{}` member {index}", def.name))),
        }
    }
    check_losses(&def.name, def.members.len(), failed.len())?;
    let fused = sum_rule(&members.iter().map(|m| &m.scores).collect::<Vec<_>>())?;
    Ok(TrainedEnsemble {
        name: def.name.clone(),
        members,
        failed,
        fused,
    })
}

pub(crate) fn check_losses(name: &str, total: usize, lost: usize) -> Result<()> {
    if lost == total || lost as f64 > MAX_LOST_FRACTION * total as f64 {
        return Err(Error::Config(format!(
            "`{name}`: {lost} of {total} members diverged"
        )));
    }
    Ok(())
}

/// Samples `n_members` activation assignments from `pool`, trains them on
/// `train_set` and fuses their scores on `test_set`.
#[allow(clippy::too_many_arguments)]
pub fn build_stochastic_ensemble(
    pool: &Pool,
    n_members: usize,
    hidden: &[usize],
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    seed: u64,
    mode: SamplingMode,
) -> Result<StochasticEnsemble> {
    let def = stochastic_def("stochastic", pool, n_members, hidden.len(), mode, seed, None)?;
    let trained = train_ensemble(
        &def,
        hidden,
        cfg,
        train_set,
        test_set,
        &[seed::name_hash(&train_set.name)],
    )?;
    Ok(StochasticEnsemble { def, trained })
}
