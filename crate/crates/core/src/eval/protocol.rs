use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, kfold_split, Dataset, Standardizer};
use crate::ensemble::{
    sffs_select, sum_rule, train_member, EnsembleDef, MemberDef, PerformanceTable, ScoreStore,
};
use crate::error::{Error, Result};
use crate::net::{Matrix, ScoreMatrix, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Hidden layer widths of every network.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub folds: usize,
    /// Seeds the fold assignment of every dataset.
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            hidden: vec![32, 32],
            train: TrainConfig::default(),
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub table: PerformanceTable,
    /// Fused held-out scores of every model, rows in dataset order.
    pub scores: ScoreStore,
    /// `member_scores[model][member][dataset]`; absent for dropped members.
    pub member_scores: BTreeMap<String, Vec<BTreeMap<String, ScoreMatrix>>>,
    /// Held-out sample indices of every fold, per dataset.
    pub folds: BTreeMap<String, Vec<Vec<usize>>>,
    /// Members chosen for each dataset by selecting models.
    pub selections: BTreeMap<String, BTreeMap<String, Vec<usize>>>,
    /// Diverged members left out of each (model, dataset) cell.
    pub dropped: BTreeMap<String, BTreeMap<String, Vec<usize>>>,
}

struct Fold {
    train: Dataset,
    test: Dataset,
    test_idx: Vec<usize>,
}

fn prepare_folds(ds: &Dataset, cfg: &ProtocolConfig) -> Result<Vec<Fold>> {
    let held_out: Vec<Vec<usize>> = match &ds.fixed_split {
        Some(is_test) => vec![(0..ds.len()).filter(|&i| is_test[i]).collect()],
        None => {
            let split = kfold_split(ds, cfg.folds, seed::subseed(cfg.seed, &[seed::name_hash(&ds.name)]))?;
            (0..cfg.folds).map(|f| split.test_indices(f)).collect()
        }
    };
    held_out
        .into_iter()
        .map(|test_idx| {
            let is_test: BTreeSet<usize> = test_idx.iter().copied().collect();
            let train_idx: Vec<usize> = (0..ds.len()).filter(|i| !is_test.contains(i)).collect();
            if train_idx.is_empty() || test_idx.is_empty() {
                return Err(Error::Config(format!("{}: empty train or test split", ds.name)));
            }
            let train = ds.subset(&train_idx);
            let test = ds.subset(&test_idx);
            let norm = Standardizer::fit(&train.features, ds.image_shape.is_some());
            Ok(Fold {
                train: train.with_features(norm.apply(&train.features)),
                test: test.with_features(norm.apply(&test.features)),
                test_idx,
            })
        })
        .collect()
}

/// Joins per-fold held-out scores into one matrix ordered by sample index.
fn assemble(folds: &[Fold], parts: &[&ScoreMatrix]) -> Result<ScoreMatrix> {
    let mut rows: Vec<(usize, &[f64], usize)> = Vec::new();
    for (fold, part) in folds.iter().zip(parts) {
        for (r, &i) in fold.test_idx.iter().enumerate() {
            rows.push((i, part.probs.row(r), part.labels[r]));
        }
    }
    rows.sort_by_key(|(i, _, _)| *i);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Shape("a sample is held out by more than one fold".into()));
    }
    let cols = parts.first().map_or(0, |p| p.classes());
    let data = rows.iter().flat_map(|(_, r, _)| r.iter().copied()).collect();
    let labels = rows.iter().map(|(_, _, l)| *l).collect();
    ScoreMatrix::new(Matrix::from_vec(rows.len(), cols, data)?, labels)
}

type JobKey = (String, usize, usize);

/// Cross-validates every model on every dataset: trains on all folds but
/// one, scores the held-out fold, and reassembles the held-out scores of
/// all folds. Networks with identical member definitions are trained once
/// and shared between models. Selecting models pick members per dataset
/// using only the other datasets.
pub fn run_protocol(
    models: &[EnsembleDef],
    datasets: &[Dataset],
    cfg: &ProtocolConfig,
) -> Result<ProtocolOutput> {
    if models.is_empty() || datasets.is_empty() {
        return Err(Error::Config("the protocol needs at least one model and one dataset".into()));
    }
    cfg.train.validate()?;
    for (what, names) in [
        ("model", models.iter().map(|m| m.name.as_str()).collect::<Vec<_>>()),
        ("dataset", datasets.iter().map(|d| d.name.as_str()).collect()),
    ] {
        let mut seen = BTreeSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(**n)) {
            return Err(Error::Config(format!("duplicate {what} name `{dup}`")));
        }
    }
    for m in models {
        m.validate(cfg.hidden.len())?;
    }

    let folds: Vec<Vec<Fold>> = datasets
        .iter()
        .map(|d| prepare_folds(d, cfg))
        .collect::<Result<_>>()?;

    let mut jobs: BTreeMap<JobKey, &MemberDef> = BTreeMap::new();
    for m in models {
        for member in &m.members {
            for (d, ds_folds) in folds.iter().enumerate() {
                for f in 0..ds_folds.len() {
                    jobs.entry((member.key(), d, f)).or_insert(member);
                }
            }
        }
    }
    let results: HashMap<JobKey, Result<ScoreMatrix>> = jobs
        .into_par_iter()
        .map(|((key, d, f), member)| {
            let fold = &folds[d][f];
            let seed = seed::subseed(member.seed, &[seed::name_hash(&datasets[d].name), f as u64]);
            let r = train_member(member, &cfg.hidden, &cfg.train, &fold.train, &fold.test, seed)
                .map(|(_, _, scores)| scores);
            ((key, d, f), r)
        })
        .collect();

    let mut out = ProtocolOutput {
        table: PerformanceTable::new(vec![], vec![], vec![])?,
        scores: ScoreStore::new(),
        member_scores: BTreeMap::new(),
        folds: datasets
            .iter()
            .zip(&folds)
            .map(|(d, fs)| (d.name.clone(), fs.iter().map(|f| f.test_idx.clone()).collect()))
            .collect(),
        selections: BTreeMap::new(),
        dropped: BTreeMap::new(),
    };
    let mut cells = Vec::with_capacity(models.len());
    for m in models {
        let mut per_member: Vec<BTreeMap<String, ScoreMatrix>> = vec![BTreeMap::new(); m.members.len()];
        for (d, ds) in datasets.iter().enumerate() {
            let mut lost = Vec::new();
            for (i, member) in m.members.iter().enumerate() {
                let key = member.key();
                let mut parts = Vec::with_capacity(folds[d].len());
                let mut diverged = false;
                for f in 0..folds[d].len() {
                    match &results[&(key.clone(), d, f)] {
                        Ok(s) => parts.push(s),
                        Err(Error::Diverged { .. }) if m.tolerate_failures => diverged = true,
                        Err(e) => {
                            return Err(Error::Config(e.to_string()).context(format!(
                                "model `{}` member {i}, dataset `{}`, fold {f}",
                                m.name, ds.name
                            )))
                        }
                    }
                }
                if diverged {
                    lost.push(i);
                } else {
                    per_member[i].insert(ds.name.clone(), assemble(&folds[d], &parts)?);
                }
            }
            crate::ensemble::check_losses(&format!("{} on {}", m.name, ds.name), m.members.len(), lost.len())?;
            if !lost.is_empty() {
                out.dropped
                    .entry(m.name.clone())
                    .or_default()
                    .insert(ds.name.clone(), lost);
            }
        }

        let mut row = Vec::with_capacity(datasets.len());
        for ds in datasets {
            let chosen: Vec<usize> = match &m.select {
                None => (0..m.members.len())
                    .filter(|&i| per_member[i].contains_key(&ds.name))
                    .collect(),
                Some(sel) => {
                    let chosen = select_members(m, &per_member, datasets, &ds.name, sel.max_size)?;
                    out.selections
                        .entry(m.name.clone())
                        .or_default()
                        .insert(ds.name.clone(), chosen.clone());
                    chosen
                }
            };
            let parts: Vec<&ScoreMatrix> = chosen.iter().map(|&i| &per_member[i][&ds.name]).collect();
            let fused = sum_rule(&parts)?;
            row.push(accuracy(&fused));
            out.scores.insert(&m.name, &ds.name, fused);
        }
        cells.push(row);
        out.member_scores.insert(m.name.clone(), per_member);
    }
    out.table = PerformanceTable::new(
        models.iter().map(|m| m.name.clone()).collect(),
        datasets.iter().map(|d| d.name.clone()).collect(),
        cells,
    )?;
    Ok(out)
}

fn select_members(
    m: &EnsembleDef,
    per_member: &[BTreeMap<String, ScoreMatrix>],
    datasets: &[Dataset],
    target: &str,
    max_size: Option<usize>,
) -> Result<Vec<usize>> {
    let names: Vec<String> = (0..m.members.len()).map(|i| format!("member{i}")).collect();
    let dataset_names: Vec<String> = datasets.iter().map(|d| d.name.clone()).collect();
    let mut store = ScoreStore::new();
    let mut cells = Vec::new();
    for (i, scores) in per_member.iter().enumerate() {
        let mut row = Vec::new();
        for d in &dataset_names {
            let s = scores.get(d).ok_or_else(|| {
                Error::Config(format!("`{}` member {i} has no scores on `{d}`", m.name))
            })?;
            row.push(accuracy(s));
            store.insert(&names[i], d, s.clone());
        }
        cells.push(row);
    }
    let perf = PerformanceTable::new(names.clone(), dataset_names, cells)?;
    let chosen = sffs_select(&perf, &store, target, max_size.unwrap_or(names.len()))
        .map_err(|e| e.context(format!("selecting `{}` members for `{target}`", m.name)))?;
    Ok(chosen.iter().map(|n| names.iter().position(|x| x == n).expect("selected from names")).collect())
}
