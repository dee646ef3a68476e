//! Pearson correlation with bootstrap spread, and bracketing of distance
//! differences estimated from finite samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 500;

fn pearson_indexed(x: &[f64], y: &[f64], idx: impl Iterator<Item = usize> + Clone) -> Option<f64> {
    let n = idx.clone().count() as f64;
    let mx = idx.clone().map(|i| x[i]).sum::<f64>() / n;
    let my = idx.clone().map(|i| y[i]).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in idx {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Standard deviation of `r` over paired bootstrap resamples. Resamples
    /// in which either side is constant are skipped.
    pub std_dev: f64,
}

pub fn pearson_bootstrap(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<Correlation> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!("need two equal series of length ≥ 2, got {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    let r = pearson_indexed(x, y, 0..n).ok_or_else(|| Error::Domain("degenerate input: zero variance".into()))?;
    let mut rng = seed::derived_rng(seed, "bootstrap");
    let mut rs = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n];
    for _ in 0..resamples {
        for i in &mut idx {
            *i = rng.random_range(0..n);
        }
        if let Some(rb) = pearson_indexed(x, y, idx.iter().copied()) {
            rs.push(rb);
        }
    }
    let std_dev = if rs.len() > 1 {
        let m = rs.iter().sum::<f64>() / rs.len() as f64;
        (rs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (rs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Correlation { r, std_dev })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// Heuristic interval for `Δδ = δ_m - δ_e` given finite-sample estimates of
/// the experiment's and the mockup's distances to the ideal distribution.
/// Both estimates are biased upward by sampling noise, so their difference is
/// biased toward zero: a negative estimate is an upper bound with `-δ_e` as
/// lower bound, a positive one a lower bound with `δ_m` as upper bound.
pub fn delta_bounds(delta_e_hat: f64, delta_m_hat: f64) -> Bounds {
    let estimate = delta_m_hat - delta_e_hat;
    if estimate < 0.0 {
        Bounds {
            lower: -delta_e_hat,
            upper: estimate,
        }
    } else if estimate > 0.0 {
        Bounds {
            lower: estimate,
            upper: delta_m_hat,
        }
    } else {
        Bounds {
            lower: -delta_e_hat,
            upper: delta_m_hat,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_line() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let c = pearson_bootstrap(&x, &y, DEFAULT_RESAMPLES, 1).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12 && c.std_dev < 1e-12);
    }

    #[test]
    fn independent_series_and_determinism() {
        let mut rng = seed::rng_from_seed(77);
        let x: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let a = pearson_bootstrap(&x, &y, DEFAULT_RESAMPLES, 5).unwrap();
        assert!(a.r.abs() < 0.1);
        assert_eq!(a, pearson_bootstrap(&x, &y, DEFAULT_RESAMPLES, 5).unwrap());
        assert!(a.std_dev > 0.0);
    }

    #[test]
    fn degenerate_and_mismatched() {
        assert!(matches!(pearson_bootstrap(&[1.0, 1.0], &[1.0, 2.0], 10, 0), Err(Error::Domain(_))));
        assert!(pearson_bootstrap(&[1.0, 2.0], &[1.0], 10, 0).is_err());
    }

    #[test]
    fn bounds() {
        let b = delta_bounds(0.3, 0.2);
        assert!((b.lower + 0.3).abs() < 1e-15 && (b.upper + 0.1).abs() < 1e-15);
        let b = delta_bounds(0.1, 0.4);
        assert!((b.lower - 0.3).abs() < 1e-15 && b.upper == 0.4);
        let b = delta_bounds(0.2, 0.2);
        assert!(b.lower <= 0.0 && b.upper >= 0.0);
    }
}
