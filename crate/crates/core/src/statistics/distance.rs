//! Distances between distributions and cross-entropy scores. Natural
//! logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{Row, SampleSet};

const SUM_TOL: f64 = 1e-6;

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    for (name, v) in [("p", p), ("q", q)] {
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > SUM_TOL || v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Domain(format!("{name} is not a probability vector (sum {total})")));
        }
    }
    Ok(())
}

/// `(1/2) sum |p - q|`.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `sum p log(p / q)`; outcomes with `p = 0` contribute nothing.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (z, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::Domain(format!("q({z}) = 0 where p({z}) = {a}")));
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Cross-entropy `-sum p log q`.
pub fn xe(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (z, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::Domain(format!("q({z}) = 0 where p({z}) = {a}")));
            }
            total -= a * b.ln();
        }
    }
    Ok(total)
}

pub fn entropy(p: &[f64]) -> Result<f64> {
    xe(p, p)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let standard_error = if values.len() > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, standard_error }
    }

    /// `self - other` for independent estimates.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate {
            mean: self.mean - other.mean,
            standard_error: self.standard_error.hypot(other.standard_error),
        }
    }
}

/// `-(1/n) sum log q(z_i)`, with `log_prob` returning `log q` of a sample.
pub fn xe_estimate<F>(samples: &SampleSet, mut log_prob: F) -> Result<Estimate>
where
    F: FnMut(Row<'_>) -> Result<f64>,
{
    if samples.is_empty() {
        return Err(Error::Domain("cross-entropy of an empty sample set".into()));
    }
    let values = samples
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let lp = log_prob(row)?;
            if lp.is_finite() {
                Ok(-lp)
            } else {
                Err(Error::Domain(format!("sample {i} ({row}) has ideal probability zero")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_values(&values))
}

/// `1 / (1 + exp(-n (xe_mockup - xe_experiment)))`. Saturates to exactly 0 or
/// 1 once `n |ΔXE|` exceeds roughly 745.
pub fn hog_rate(xe_experiment: f64, xe_mockup: f64, n: usize) -> f64 {
    let x = n as f64 * (xe_mockup - xe_experiment);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
