use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax_xent, Matrix, Network};
use crate::error::{Error, Result};
use crate::eval::{augment, Dataset};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub last_layer_lr_mult: f64,
    pub augmentation: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 1e-4,
            batch_size: 30,
            epochs: 20,
            last_layer_lr_mult: 20.0,
            augmentation: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Epoch count used for members of stochastic ensembles, which converge
    /// more slowly.
    pub const STOCHASTIC_EPOCHS: usize = 30;

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.last_layer_lr_mult.is_finite() && self.last_layer_lr_mult > 0.0) {
            return Err(Error::Config(format!(
                "last_layer_lr_mult must be positive, got {}",
                self.last_layer_lr_mult
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// `initial` is measured on the whole training set before the first update;
/// `epochs[e]` averages the mini-batch losses and accuracies seen during
/// epoch `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub initial: EpochStats,
    pub epochs: Vec<EpochStats>,
}

fn batch_stats(logits: &Matrix, labels: &[usize]) -> usize {
    logits
        .iter_rows()
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count()
}

/// Mini-batch SGD over freshly shuffled epochs. Image datasets are
/// augmented on the fly when `cfg.augmentation` is set.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config(format!("{}: empty training set", data.name)));
    }
    if data.classes != net.classes() {
        return Err(Error::Shape(format!(
            "{} has {} classes, network predicts {}",
            data.name,
            data.classes,
            net.classes()
        )));
    }
    let (logits, _) = net.forward(&data.features)?;
    let initial = EpochStats {
        loss: softmax_xent(&logits, &data.labels)?.0 + net.regularization(),
        accuracy: batch_stats(&logits, &data.labels) as f64 / data.len() as f64,
    };
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let augment_shape = data.image_shape.filter(|_| cfg.augmentation);
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = data.features.select_rows(chunk);
            if let Some((h, w)) = augment_shape {
                for r in 0..batch.rows {
                    let out = augment(batch.row(r), h, w, &mut rng);
                    batch.row_mut(r).copy_from_slice(&out);
                }
            }
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let (logits, cache) = net.forward(&batch)?;
            let (xent, dlogits) = softmax_xent(&logits, &labels)?;
            let loss = xent + net.regularization();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += batch_stats(&logits, &labels);
            let grads = net.backward(&cache, &dlogits)?;
            net.sgd_step(&grads, cfg).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Diverged { epoch, loss },
                e => e,
            })?;
        }
        epochs.push(EpochStats {
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(History { initial, epochs })
}
