//! Triangular basis functions and the fixed (center, half-width) grids
//! they are placed on.

use serde::{Deserialize, Serialize};

use super::ActivationKind;
use crate::error::{Error, Result};

/// Mexican hat `max(lambda - |x - a|, 0)`.
pub fn mexican_hat(x: f64, a: f64, lambda: f64) -> f64 {
    (lambda - (x - a).abs()).max(0.0)
}

/// Right derivative of [`mexican_hat`] with respect to `x`.
pub fn mexican_hat_dx(x: f64, a: f64, lambda: f64) -> f64 {
    let d = x - a;
    if d >= -lambda && d < 0.0 {
        1.0
    } else if d >= 0.0 && d < lambda {
        -1.0
    } else {
        0.0
    }
}

/// Gaussian-type hat: a Mexican hat followed by a mirrored negative bump,
/// `max(lambda - |x - a|, 0) + min(|x - a - 2 lambda| - lambda, 0)`.
pub fn gaussian_hat(x: f64, a: f64, lambda: f64) -> f64 {
    mexican_hat(x, a, lambda) + ((x - a - 2.0 * lambda).abs() - lambda).min(0.0)
}

/// Right derivative of [`gaussian_hat`] with respect to `x`.
pub fn gaussian_hat_dx(x: f64, a: f64, lambda: f64) -> f64 {
    let e = x - a - 2.0 * lambda;
    let tail = if e >= -lambda && e < 0.0 {
        -1.0
    } else if e >= 0.0 && e < lambda {
        1.0
    } else {
        0.0
    };
    mexican_hat_dx(x, a, lambda) + tail
}

/// Which table a grid-based activation draws its centers from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HatFamily {
    Mexican,
    Gaussian,
}

const MEXICAN_UNIT: ([f64; 7], [f64; 7]) = (
    [2.0, 1.0, 3.0, 0.5, 1.5, 2.5, 3.5],
    [2.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5],
);

const GAUSSIAN_UNIT: ([f64; 7], [f64; 7]) = (
    [1.0, 0.5, 2.5, 0.25, 1.25, 2.25, 3.25],
    [1.0, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25],
);

/// Maximum number of hats on the canonical grid; `k` may not exceed this + 1.
pub const GRID_LEN: usize = 7;

/// Centers `a_j` and half-widths `lambda_j` of the hat functions, already
/// multiplied by `maxInput`. Only the first `k - 1` entries are used by an
/// activation with `k` parameters per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedGrid {
    pub a: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl FixedGrid {
    pub fn for_family(family: HatFamily, max_input: f64) -> Self {
        let (a, lambda) = match family {
            HatFamily::Mexican => MEXICAN_UNIT,
            HatFamily::Gaussian => GAUSSIAN_UNIT,
        };
        FixedGrid {
            a: a.iter().map(|v| v * max_input).collect(),
            lambda: lambda.iter().map(|v| v * max_input).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Grid used by `kind`. MeLU+GaLU carries one grid of each family and is
/// rejected here; use [`FixedGrid::for_family`] for it.
pub fn build_grid(kind: ActivationKind, max_input: f64) -> Result<FixedGrid> {
    match kind.hat_family() {
        Some(family) => Ok(FixedGrid::for_family(family, max_input)),
        None => Err(Error::NoGrid(kind.to_string())),
    }
}
