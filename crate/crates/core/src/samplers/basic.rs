use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{SampleMetadata, SampleSet};
use crate::error::{Error, Result};
use crate::seed;

/// Order 0: i.i.d. uniform bits.
pub fn sample_uniform(n_modes: usize, samples: usize, seed: u64) -> SampleSet {
    let mut rng = seed::rng_from_seed(seed);
    let mut out = SampleSet::with_capacity(n_modes, samples).with_metadata(SampleMetadata {
        sampler: "uniform".into(),
        order: Some(0),
        seed: Some(seed),
        ..Default::default()
    });
    let mut row = vec![false; n_modes];
    for _ in 0..samples {
        for b in row.iter_mut() {
            *b = rng.random::<bool>();
        }
        out.push_bits(row.iter().copied()).expect("row width matches");
    }
    out
}

/// Order 1: every mode clicks independently with its ideal one-mode
/// probability.
pub fn sample_thermal(click_probs: &[f64], samples: usize, seed: u64) -> Result<SampleSet> {
    if let Some(p) = click_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("click probability {p} outside [0, 1]")));
    }
    let mut rng = seed::rng_from_seed(seed);
    let mut out = SampleSet::with_capacity(click_probs.len(), samples).with_metadata(SampleMetadata {
        sampler: "thermal".into(),
        order: Some(1),
        seed: Some(seed),
        ..Default::default()
    });
    let mut row = vec![false; click_probs.len()];
    for _ in 0..samples {
        for (b, &p) in row.iter_mut().zip(click_probs) {
            *b = rng.random::<f64>() < p;
        }
        out.push_bits(row.iter().copied())?;
    }
    Ok(out)
}

/// Exact sampling from an explicit distribution over `2^n` patterns (mode 0
/// is the most significant index bit) by inverse-CDF lookup.
pub fn sample_from_distribution(n_modes: usize, probs: &[f64], samples: usize, seed: u64) -> Result<SampleSet> {
    if probs.len() != 1 << n_modes {
        return Err(Error::Dimension(format!("{} probabilities for {n_modes} modes", probs.len())));
    }
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("negative probability {p}")));
        }
        acc += p;
        cdf.push(acc);
    }
    let mut rng = seed::rng_from_seed(seed);
    let mut out = SampleSet::with_capacity(n_modes, samples).with_metadata(SampleMetadata {
        sampler: "exact".into(),
        seed: Some(seed),
        ..Default::default()
    });
    for _ in 0..samples {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        out.push_bits((0..n_modes).map(|t| idx >> (n_modes - 1 - t) & 1 == 1))?;
    }
    Ok(out)
}

/// Keeps a uniformly random `round(keep_fraction * L)` of the samples (at
/// least one), in random order.
pub fn decorrelate(samples: &SampleSet, keep_fraction: f64, seed: u64) -> Result<SampleSet> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Domain(format!("keep fraction {keep_fraction} outside (0, 1]")));
    }
    let l = samples.len();
    let keep = ((l as f64 * keep_fraction).round() as usize).clamp(1.min(l), l);
    let mut rng = seed::rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, l, keep).into_vec();
    picked.shuffle(&mut rng);
    let mut out = samples.select(&picked);
    out.metadata.extra.insert("keep_fraction".into(), keep_fraction.to_string());
    Ok(out)
}
