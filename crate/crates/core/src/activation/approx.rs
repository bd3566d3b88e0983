//! Least-squares fits of a target function on the MeLU basis
//! `{x} ∪ {hat_j : j < k - 1}` over `[0, 4 maxInput]`.

use nalgebra::{DMatrix, DVector};

use super::{mexican_hat, FixedGrid, HatFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct BasisFit {
    pub k: usize,
    /// Coefficients: identity first, then one per hat.
    pub coefficients: Vec<f64>,
    /// L2 norm of the residual over the interval (trapezoid rule).
    pub l2_error: f64,
}

/// Fits `target` on `samples` evenly spaced points of `[0, 4 max_input]`.
pub fn fit_melu_basis(
    k: usize,
    max_input: f64,
    samples: usize,
    target: impl Fn(f64) -> f64,
) -> BasisFit {
    assert!(k >= 1 && samples >= 2);
    let grid = FixedGrid::for_family(HatFamily::Mexican, max_input);
    let hats = (k - 1).min(grid.len());
    let span = 4.0 * max_input;
    let xs: Vec<f64> = (0..samples)
        .map(|i| span * i as f64 / (samples - 1) as f64)
        .collect();
    let basis = |x: f64, col: usize| {
        if col == 0 {
            x
        } else {
            mexican_hat(x, grid.a[col - 1], grid.lambda[col - 1])
        }
    };
    let design = DMatrix::from_fn(samples, hats + 1, |r, c| basis(xs[r], c));
    let rhs = DVector::from_iterator(samples, xs.iter().map(|&x| target(x)));
    let coefficients = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .expect("svd with u and v");
    let residual = &design * &coefficients - rhs;
    let h = span / (samples - 1) as f64;
    let sq: Vec<f64> = residual.iter().map(|r| r * r).collect();
    let integral = h * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[samples - 1]));
    BasisFit {
        k,
        coefficients: coefficients.iter().copied().collect(),
        l2_error: integral.max(0.0).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_fit_exactly() {
        let fit = fit_melu_basis(4, 1.0, 401, |x| 2.0 * x);
        assert!(fit.l2_error < 1e-9);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn hats_are_reproduced() {
        let fit = fit_melu_basis(8, 1.0, 801, |x| 0.5 * x - 3.0 * mexican_hat(x, 1.0, 1.0));
        assert!(fit.l2_error < 1e-9);
        assert!((fit.coefficients[2] + 3.0).abs() < 1e-9);
    }
}
