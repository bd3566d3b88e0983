//! Datasets, cross-validation, augmentation, accuracy and the Wilcoxon
//! signed-rank test.

mod augment;
mod dataset;
mod folds;
mod protocol;
mod wilcoxon;

pub use augment::{augment, augment_with, AugmentDraw};
pub use dataset::{
    load_csv, make_synthetic, write_csv, Dataset, Standardizer, SyntheticKind, BARS_SIDE,
};
pub use folds::{kfold_split, FoldSplit};
pub use protocol::{run_protocol, ProtocolConfig, ProtocolOutput};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_with, Alternative, Method, WilcoxonResult, EXACT_MAX_N,
};

use crate::net::ScoreMatrix;

/// Fraction of rows whose arg-max (lowest index on ties) equals the label.
/// `NaN` for an empty matrix.
pub fn accuracy(scores: &ScoreMatrix) -> f64 {
    let correct = scores
        .predictions()
        .iter()
        .zip(&scores.labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / scores.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Matrix;

    #[test]
    fn accuracy_contract() {
        let probs = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
        let s = ScoreMatrix::new(probs, vec![0, 1, 0]).unwrap();
        assert_eq!(accuracy(&s), 1.0);
        assert_eq!(accuracy(&s.select(&[2, 0, 1])), 1.0);

        let uniform = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = ScoreMatrix::new(uniform, vec![1, 1]).unwrap();
        assert_eq!(accuracy(&s), 0.0);
    }
}
