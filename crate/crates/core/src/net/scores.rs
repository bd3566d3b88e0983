use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Per-sample class probabilities with the true labels alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub probs: Matrix,
    pub labels: Vec<usize>,
}

impl ScoreMatrix {
    pub fn new(probs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if probs.rows != labels.len() {
            return Err(Error::Shape(format!(
                "{} score rows but {} labels",
                probs.rows,
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= probs.cols) {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: probs.cols,
            });
        }
        Ok(ScoreMatrix { probs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.probs.cols
    }

    /// Arg-max class of each row, lowest index on ties.
    pub fn predictions(&self) -> Vec<usize> {
        self.probs.iter_rows().map(argmax).collect()
    }

    /// Largest deviation of a row sum from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        self.probs
            .iter_rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Rows reordered by `idx`.
    pub fn select(&self, idx: &[usize]) -> ScoreMatrix {
        ScoreMatrix {
            probs: self.probs.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of `labels` under `softmax(logits)` and its gradient
/// `(softmax - onehot) / batch` with respect to the logits.
pub fn softmax_xent(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows but {} labels",
            logits.rows,
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= logits.cols) {
        return Err(Error::LabelOutOfRange {
            label: l,
            classes: logits.cols,
        });
    }
    let n = logits.rows as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        let g = grad.row_mut(r);
        g[label] -= 1.0;
        for v in g.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let logits = Matrix::zeros(5, 4);
        let (loss, _) = softmax_xent(&logits, &[0, 1, 2, 3, 0]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_logit_drives_loss_to_zero() {
        let logits = Matrix::from_rows(&[vec![800.0, 0.0, 0.0]]).unwrap();
        let (loss, g) = softmax_xent(&logits, &[0]).unwrap();
        assert!(loss < 1e-12);
        assert!(g.data.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn xent_gradient_matches_finite_differences() {
        let logits = Matrix::from_rows(&[
            vec![0.3, -1.2, 0.8, 0.05],
            vec![-0.4, 0.9, 0.1, 1.7],
            vec![2.0, -0.5, -0.3, 0.2],
        ])
        .unwrap();
        let labels = [2, 0, 3];
        let (_, g) = softmax_xent(&logits, &labels).unwrap();
        let h = 1e-6;
        for i in 0..logits.data.len() {
            let mut p = logits.clone();
            let mut m = logits.clone();
            p.data[i] += h;
            m.data[i] -= h;
            let numeric = (softmax_xent(&p, &labels).unwrap().0 - softmax_xent(&m, &labels).unwrap().0)
                / (2.0 * h);
            let rel = (g.data[i] - numeric).abs() / g.data[i].abs().max(1e-3);
            assert!(rel < 1e-6, "entry {i}: {} vs {numeric}", g.data[i]);
        }
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_xent(&Matrix::zeros(1, 2), &[2]),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Matrix::from_rows(&[vec![1000.0, -1000.0, 3.0], vec![0.1, 0.2, 0.3]]).unwrap();
        let s = ScoreMatrix::new(softmax(&logits), vec![0, 2]).unwrap();
        assert!(s.max_row_sum_error() < 1e-12);
        assert_eq!(s.predictions(), vec![0, 2]);
    }

    #[test]
    fn ties_pick_lowest_class() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }
}
