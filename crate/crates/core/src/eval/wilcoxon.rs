use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of nonzero differences handled by the exact null
/// distribution; larger samples use the normal approximation.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`; `None` when every difference is zero.
    pub statistic: Option<f64>,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_effective: usize,
    pub p_value: f64,
    /// Sign of the median nonzero difference `a - b` (`0` if none).
    pub direction: i8,
    pub alternative: Alternative,
    pub exact: bool,
}

/// Paired Wilcoxon signed-rank test of `a` against `b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    wilcoxon_with(a, b, alternative, Method::Auto)
}

pub fn wilcoxon_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: Method,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Config("paired samples must be finite".into()));
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: None,
            w_plus: 0.0,
            w_minus: 0.0,
            n_effective: 0,
            p_value: 1.0,
            direction: 0,
            alternative,
            exact: true,
        });
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));

    // doubled average ranks are integers even with ties
    let mut ranks2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        ranks2[i..=j].fill(r2);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_plus = w_plus2 as f64 / 2.0;
    let w_minus = (total2 - w_plus2) as f64 / 2.0;

    let exact = match method {
        Method::Auto => n <= EXACT_MAX_N,
        Method::Exact => true,
        Method::Normal => false,
    };
    let (p_upper, p_lower) = if exact {
        exact_tails(&ranks2, w_plus2)
    } else {
        normal_tails(n, w_plus, tie_term)
    };
    let p_value = match alternative {
        Alternative::Greater => p_upper,
        Alternative::Less => p_lower,
        Alternative::TwoSided => 2.0 * p_upper.min(p_lower),
    }
    .clamp(0.0, 1.0);

    let mut signed = diffs.clone();
    signed.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        signed[n / 2]
    } else {
        (signed[n / 2 - 1] + signed[n / 2]) / 2.0
    };
    let direction = if median > 0.0 {
        1
    } else if median < 0.0 {
        -1
    } else {
        0
    };
    Ok(WilcoxonResult {
        statistic: Some(w_plus.min(w_minus)),
        w_plus,
        w_minus,
        n_effective: n,
        p_value,
        direction,
        alternative,
        exact,
    })
}

/// `(P(W+ >= w), P(W+ <= w))` under the null, by dynamic programming over
/// the `2^n` equally likely sign assignments (counts are exact integers).
fn exact_tails(ranks2: &[u64], w_plus2: u64) -> (f64, f64) {
    let total: usize = ranks2.iter().sum::<u64>() as usize;
    let mut counts = vec![0u128; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = counts.iter().sum::<u128>() as f64;
    let w = w_plus2 as usize;
    let upper = counts[w..].iter().sum::<u128>() as f64 / all;
    let lower = counts[..=w].iter().sum::<u128>() as f64 / all;
    (upper, lower)
}

/// Normal approximation with tie correction and a 0.5 continuity
/// correction towards the mean.
fn normal_tails(n: usize, w_plus: f64, tie_term: f64) -> (f64, f64) {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return (1.0, 1.0);
    }
    let sd = var.sqrt();
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    let upper = 1.0 - z.cdf((w_plus - mean - 0.5) / sd);
    let lower = z.cdf((w_plus - mean + 0.5) / sd);
    (upper.min(1.0), lower.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Enumerates every sign assignment over the observed absolute ranks.
    fn brute_force(a: &[f64], b: &[f64], alt: Alternative) -> f64 {
        let r = wilcoxon_with(a, b, alt, Method::Exact).unwrap();
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
        d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let n = d.len();
        let mut ranks = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && d[j + 1].abs() == d[i].abs() {
                j += 1;
            }
            for k in i..=j {
                ranks[k] = (i + j + 2) as f64 / 2.0;
            }
            i = j + 1;
        }
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            if w >= r.w_plus {
                ge += 1;
            }
            if w <= r.w_plus {
                le += 1;
            }
        }
        let total = (1u64 << n) as f64;
        let (ge, le) = (ge as f64 / total, le as f64 / total);
        match alt {
            Alternative::Greater => ge,
            Alternative::Less => le,
            Alternative::TwoSided => (2.0 * ge.min(le)).min(1.0),
        }
    }

    #[test]
    fn equal_samples_give_p_one() {
        let a = [0.8, 0.9, 0.7, 0.85, 0.95];
        let r = wilcoxon_signed_rank(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, None);
        assert_eq!(r.n_effective, 0);
    }

    #[test]
    fn eight_positive_differences() {
        let b = [0.1, 0.4, 0.2, 0.9, 0.5, 0.3, 0.7, 0.6];
        let a: Vec<f64> = b.iter().map(|v| v + 0.01).collect();
        let r = wilcoxon_signed_rank(&a, &b, Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 1.0 / 256.0);
        assert_eq!(r.statistic, Some(0.0));
        assert_eq!(r.direction, 1);
        let two = wilcoxon_signed_rank(&a, &b, Alternative::TwoSided).unwrap();
        assert_eq!(two.p_value, 2.0 / 256.0);
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = crate::seed::rng(17);
        for trial in 0..60 {
            let n = 1 + trial % 10;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            for alt in [Alternative::TwoSided, Alternative::Greater, Alternative::Less] {
                let p = wilcoxon_signed_rank(&a, &b, alt).unwrap().p_value;
                assert!((p - brute_force(&a, &b, alt)).abs() < 1e-12, "{a:?} {b:?} {alt:?}");
            }
        }
    }

    #[test]
    fn statistic_is_bounded() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let b = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0];
        let r = wilcoxon_signed_rank(&a, &b, Alternative::TwoSided).unwrap();
        let n = r.n_effective as f64;
        assert_eq!(r.w_plus + r.w_minus, n * (n + 1.0) / 2.0);
        assert!(r.statistic.unwrap() <= n * (n + 1.0) / 4.0);
    }

    #[test]
    fn normal_branch_is_close_to_exact_at_twelve() {
        let mut rng = crate::seed::rng(5);
        for _ in 0..50 {
            let a: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
            let e = wilcoxon_with(&a, &b, Alternative::TwoSided, Method::Exact).unwrap();
            let z = wilcoxon_with(&a, &b, Alternative::TwoSided, Method::Normal).unwrap();
            assert!((e.p_value - z.p_value).abs() <= 0.02, "{} vs {}", e.p_value, z.p_value);
        }
    }

    #[test]
    fn large_samples_use_normal_branch() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 - 1.0 + (i % 3) as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b, Alternative::TwoSided).unwrap();
        assert!(!r.exact);
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
    }
}
