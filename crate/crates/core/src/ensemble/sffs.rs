use super::{sum_rule, PerformanceTable, ScoreStore};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::net::ScoreMatrix;

/// Minimum criterion gain for a subset to count as better.
pub const SFFS_EPSILON: f64 = 1e-6;

/// Sequential floating forward selection over models `0..n`.
///
/// The forward step always adds the model that maximizes `criterion`, up to
/// `max_size` members, even across plateaus. After each addition, members
/// are removed one at a time while the reduced subset beats the best subset
/// of that size seen so far by more than [`SFFS_EPSILON`]. If an addition
/// lands below the best subset already recorded for its size, the search
/// continues from the recorded one. Returns the best recorded subset, the
/// smallest one on ties. Ties between candidate models go to the lower
/// index, and the criterion always receives sorted subsets.
pub fn sffs(
    n: usize,
    max_size: usize,
    mut criterion: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<(Vec<usize>, f64)> {
    let mut eval = |set: &[usize]| -> Result<f64> {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        criterion(&sorted)
    };
    let max_size = max_size.min(n);
    // best[k]: best subset of size k found so far
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; max_size + 1];
    let mut selected: Vec<usize> = Vec::new();
    while selected.len() < max_size {
        let mut add: Option<(usize, f64)> = None;
        for m in 0..n {
            if selected.contains(&m) {
                continue;
            }
            selected.push(m);
            let v = eval(&selected)?;
            selected.pop();
            if add.is_none_or(|(_, b)| v > b) {
                add = Some((m, v));
            }
        }
        let Some((m, v)) = add else { break };
        selected.push(m);
        let k = selected.len();
        match &best[k] {
            Some((record, set)) if v <= record + SFFS_EPSILON => selected = set.clone(),
            _ => best[k] = Some((v, selected.clone())),
        }

        // conditional exclusion; singletons are already exhaustive
        while selected.len() > 2 {
            let k = selected.len();
            let mut drop: Option<(usize, f64)> = None;
            for pos in 0..k {
                let mut rest = selected.clone();
                rest.remove(pos);
                let v = eval(&rest)?;
                let better = match drop {
                    None => true,
                    Some((p, b)) => v > b || (v == b && selected[pos] < selected[p]),
                };
                if better {
                    drop = Some((pos, v));
                }
            }
            let Some((pos, v)) = drop else { break };
            if best[k - 1].as_ref().is_some_and(|(record, _)| v <= record + SFFS_EPSILON) {
                break;
            }
            selected.remove(pos);
            best[k - 1] = Some((v, selected.clone()));
        }
    }
    let mut result: Option<(f64, Vec<usize>)> = None;
    for (v, set) in best.into_iter().flatten() {
        if result.as_ref().is_none_or(|(r, _)| v > r + SFFS_EPSILON) {
            result = Some((v, set));
        }
    }
    Ok(result.map_or((Vec::new(), f64::NEG_INFINITY), |(v, set)| (set, v)))
}

/// Mean accuracy, over `datasets`, of the sum-rule fusion of `subset`.
pub fn fused_criterion(
    store: &ScoreStore,
    models: &[String],
    datasets: &[String],
    subset: &[usize],
) -> Result<f64> {
    if subset.is_empty() || datasets.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut total = 0.0;
    for d in datasets {
        let members = subset
            .iter()
            .map(|&i| {
                store.get(&models[i], d).ok_or_else(|| {
                    Error::Config(format!("no stored scores for `{}` on `{d}`", models[i]))
                })
            })
            .collect::<Result<Vec<&ScoreMatrix>>>()?;
        total += accuracy(&sum_rule(&members)?);
    }
    Ok(total / datasets.len() as f64)
}

/// Chooses members for `target` by floating selection on every other
/// dataset of `perf`, fusing the stored score matrices.
pub fn sffs_select(
    perf: &PerformanceTable,
    store: &ScoreStore,
    target: &str,
    max_size: usize,
) -> Result<Vec<String>> {
    perf.dataset_index(target)?;
    if perf.datasets.len() < 2 {
        return Err(Error::Config(
            "selection leaves the target dataset out, so it needs at least two datasets".into(),
        ));
    }
    if perf.models.len() < 2 {
        return Err(Error::Config("selection needs at least two models".into()));
    }
    if !perf.is_complete() {
        return Err(Error::Config("selection needs a complete performance table".into()));
    }
    let others: Vec<String> = perf.datasets.iter().filter(|d| *d != target).cloned().collect();
    let (subset, _) = sffs(perf.models.len(), max_size, |s| {
        fused_criterion(store, &perf.models, &others, s)
    })?;
    Ok(subset.into_iter().map(|i| perf.models[i].clone()).collect())
}
