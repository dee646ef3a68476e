//! Click-number statistics: moments from marginals, sample moments and the
//! discretised Gaussian fit `w(x) ∝ exp(A + Bx + Cx^2)`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::MarginalOracle;
use crate::samplers::SampleSet;
use crate::subsets::{binomial, combinations};

pub const MAX_THEORETICAL_ORDER: usize = 3;

/// Number of surjections from `k` labelled items onto `l` labelled blocks,
/// `sum_i (-1)^i C(l, i) (l - i)^k`.
pub fn surjections(k: usize, l: usize) -> u128 {
    let mut total: i128 = 0;
    for i in 0..=l {
        let term = binomial(l, i) as i128 * ((l - i) as i128).pow(k as u32);
        total += if i % 2 == 0 { term } else { -term };
    }
    total as u128
}

/// Central moments `[mean, variance, third central moment][..k]` from raw
/// moments.
fn central_from_raw(raw: &[f64]) -> Vec<f64> {
    let mean = raw[0];
    let mut out = vec![mean];
    if raw.len() > 1 {
        out.push(raw[1] - mean * mean);
    }
    if raw.len() > 2 {
        out.push(raw[2] - 3.0 * mean * raw[1] + 2.0 * mean.powi(3));
    }
    out
}

/// Mean, variance and third central moment (up to `k`) of the click number,
/// via `E[(sum z)^k'] = sum_l t(k', l) sum_{|A| = l} P(all of A click)`.
/// Costs `C(N, k)` all-click probabilities.
pub fn click_moments_theoretical<O: MarginalOracle + ?Sized>(oracle: &O, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > MAX_THEORETICAL_ORDER {
        return Err(Error::Budget(format!("click moment order {k} outside 1..={MAX_THEORETICAL_ORDER}")));
    }
    let n = oracle.n_modes();
    let mut subset_sums = vec![0.0; k + 1];
    for (l, sum) in subset_sums.iter_mut().enumerate().skip(1) {
        for modes in combinations(n, l) {
            *sum += oracle.all_ones(&modes)?;
        }
    }
    let raw: Vec<f64> = (1..=k)
        .map(|kp| (1..=kp).map(|l| surjections(kp, l) as f64 * subset_sums[l]).sum())
        .collect();
    Ok(central_from_raw(&raw))
}

/// Sample mean, variance and higher central moments (population
/// normalisation) of the click counts.
pub fn click_moments_empirical(samples: &SampleSet, k: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let counts = samples.click_counts();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    Ok((1..=k)
        .map(|order| {
            if order == 1 {
                mean
            } else {
                counts.iter().map(|&c| (c as f64 - mean).powi(order as i32)).sum::<f64>() / n
            }
        })
        .collect())
}

/// Histogram of click counts, length `n_modes + 1`.
pub fn click_histogram(samples: &SampleSet) -> Vec<u64> {
    let mut hist = vec![0u64; samples.n_modes() + 1];
    for c in samples.click_counts() {
        hist[c] += 1;
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickGaussian {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ClickGaussian {
    /// `exp(A + Bx + Cx^2)` on `x = 0..=n`, which sums to one.
    pub fn distribution(&self, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|x| {
                let x = x as f64;
                (self.a + self.b * x + self.c * x * x).exp()
            })
            .collect()
    }
}

/// Moments of `u` and `u^2` under `w(u) ∝ exp(beta u + gamma u^2)` on the
/// given support, with the covariance of `(u, u^2)`.
fn family_moments(u: &[f64], beta: f64, gamma: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let logw: Vec<f64> = u.iter().map(|x| beta * x + gamma * x * x).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut m = [0.0; 5];
    for (x, wi) in u.iter().zip(&w) {
        let p = wi / z;
        let mut xp = p;
        for mj in &mut m {
            *mj += xp;
            xp *= x;
        }
    }
    let mean = Vector2::new(m[1], m[2]);
    let cov = Matrix2::new(m[2] - m[1] * m[1], m[3] - m[1] * m[2], m[3] - m[1] * m[2], m[4] - m[2] * m[2]);
    (mean, cov)
}

/// Fits the discretised Gaussian on `{0..n}` with mean `mu1` and variance
/// `mu2`. Newton iterations run in standardised coordinates
/// `u = (x - mu1) / sqrt(mu2)`, halving steps that do not reduce the residual.
pub fn fit_click_gaussian(mu1: f64, mu2: f64, n: usize) -> Result<ClickGaussian> {
    if !(mu2 > 0.0) || !(mu1 > 0.0 && mu1 < n as f64) {
        return Err(Error::Domain(format!("cannot fit mean {mu1}, variance {mu2} on 0..={n}")));
    }
    let sd = mu2.sqrt();
    let u: Vec<f64> = (0..=n).map(|x| (x as f64 - mu1) / sd).collect();
    let target = Vector2::new(0.0, 1.0);
    let mut theta = Vector2::new(0.0, -0.5);
    let residual_of = |t: &Vector2<f64>| {
        let (m, cov) = family_moments(&u, t[0], t[1]);
        (m - target, cov)
    };
    let (mut r, mut cov) = residual_of(&theta);
    const TOL: f64 = 1e-12;
    const MAX_ITERATIONS: usize = 200;
    let mut iterations = 0;
    while r.amax() > TOL {
        if iterations == MAX_ITERATIONS {
            return Err(Error::Convergence {
                what: "click-number Gaussian fit",
                iterations,
                residual: r.amax(),
            });
        }
        iterations += 1;
        let step = cov
            .try_inverse()
            .map(|inv| -(inv * r))
            .ok_or_else(|| Error::Conditioning {
                invariant: "invertible moment Jacobian",
                detail: format!("at B={}, C={}", theta[0], theta[1]),
            })?;
        let mut scale = 1.0;
        loop {
            let trial = theta + scale * step;
            let (tr, tcov) = residual_of(&trial);
            if tr.norm() < r.norm() || scale < 1e-12 {
                theta = trial;
                r = tr;
                cov = tcov;
                break;
            }
            scale *= 0.5;
        }
    }
    // Back to x: beta u + gamma u^2 = C x^2 + B x + const.
    let (beta, gamma) = (theta[0], theta[1]);
    let c = gamma / mu2;
    let b = beta / sd - 2.0 * gamma * mu1 / mu2;
    let logw: Vec<f64> = (0..=n).map(|x| b * x as f64 + c * (x * x) as f64).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = -(max + logw.iter().map(|l| (l - max).exp()).sum::<f64>().ln());
    Ok(ClickGaussian { a, b, c })
}
