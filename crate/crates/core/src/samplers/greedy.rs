//! Greedy construction of an `L x N` bit matrix whose empirical order-k
//! marginals track the ideal ones.
//!
//! Columns are filled left to right. The first `k` columns are placed jointly,
//! one row at a time, choosing the k-bit pattern that most reduces the ℓ1
//! distance between the running empirical table and the ideal table of modes
//! `0..k`. Every later column `j` is placed one bit per row, minimising the
//! summed ℓ1 distance over all order-k subsets made of `j` and `k - 1`
//! earlier modes. Rows are visited in a fresh random order for every column,
//! which is equivalent to shuffling the filled sub-matrix between columns.
//!
//! Pattern counts are kept per tracked subset and updated incrementally, so a
//! column costs `O(C(j, k-1) L)` and the whole matrix `O(N^k 2^k L)`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{SampleMetadata, SampleSet};
use crate::error::{Error, Result};
use crate::probability::MarginalOracle;
use crate::seed;
use crate::subsets::combinations;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    pub order: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Change of `sum |c/t - q|` when one count goes from `c` to `c + 1` at
/// total `t` (the other entries shift identically for every candidate).
fn l1_increment(count: u64, t: f64, ideal: f64) -> f64 {
    ((count + 1) as f64 / t - ideal).abs() - (count as f64 / t - ideal).abs()
}

fn is_tie(a: f64, b: f64, t: f64) -> bool {
    (a - b).abs() <= 1e-9 / t
}

#[cfg_attr(not(test), allow(dead_code))]
struct Column<'a> {
    index: usize,
    subsets: &'a [Vec<usize>],
    counts: &'a [Vec<u64>],
}

fn run<O, F>(oracle: &O, config: &GreedyConfig, mut on_column: F) -> Result<SampleSet>
where
    O: MarginalOracle + ?Sized,
    F: FnMut(Column<'_>, &[u8]),
{
    let n = oracle.n_modes();
    let k = config.order;
    let l = config.samples;
    if k == 0 || k > n || k > 16 {
        return Err(Error::Domain(format!("greedy order {k} must be in 1..={}", n.min(16))));
    }
    if l == 0 {
        return Err(Error::Domain("at least one sample required".into()));
    }
    let mut rng = seed::rng_from_seed(config.seed);
    let mut matrix = vec![0u8; l * n];
    let mut order: Vec<usize> = (0..l).collect();

    // Joint placement of the first k columns.
    let head: Vec<usize> = (0..k).collect();
    let ideal = oracle.marginal(&head)?;
    let mut counts = vec![0u64; 1 << k];
    let mut best = Vec::with_capacity(1 << k);
    for (step, &row) in order.iter().enumerate() {
        let t = (step + 1) as f64;
        let mut min = f64::INFINITY;
        best.clear();
        for (pattern, (&c, &q)) in counts.iter().zip(ideal.probs()).enumerate() {
            let d = l1_increment(c, t, q);
            if d < min && !is_tie(d, min, t) {
                min = d;
                best.clear();
                best.push(pattern);
            } else if is_tie(d, min, t) {
                best.push(pattern);
            }
        }
        let pattern = best[rng.random_range(0..best.len())];
        counts[pattern] += 1;
        for (m, cell) in matrix[row * n..row * n + k].iter_mut().enumerate() {
            *cell = (pattern >> (k - 1 - m) & 1) as u8;
        }
    }
    on_column(
        Column {
            index: k - 1,
            subsets: std::slice::from_ref(&head),
            counts: std::slice::from_ref(&counts),
        },
        &matrix,
    );

    for j in k..n {
        order.shuffle(&mut rng);
        let subsets: Vec<Vec<usize>> = combinations(j, k - 1)
            .map(|mut s| {
                s.push(j);
                s
            })
            .collect();
        let ideals = subsets
            .iter()
            .map(|s| oracle.marginal(s).map(|t| t.probs().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let mut counts = vec![vec![0u64; 1 << k]; subsets.len()];
        let mut prefixes = vec![0usize; subsets.len()];
        for (step, &row) in order.iter().enumerate() {
            let t = (step + 1) as f64;
            let bits = &matrix[row * n..row * n + j];
            let (mut d0, mut d1) = (0.0, 0.0);
            for (s, subset) in subsets.iter().enumerate() {
                let prefix = subset[..k - 1].iter().fold(0, |acc, &m| acc << 1 | bits[m] as usize) << 1;
                prefixes[s] = prefix;
                d0 += l1_increment(counts[s][prefix], t, ideals[s][prefix]);
                d1 += l1_increment(counts[s][prefix | 1], t, ideals[s][prefix | 1]);
            }
            let bit = if is_tie(d0, d1, t) {
                rng.random::<bool>() as usize
            } else {
                (d1 < d0) as usize
            };
            matrix[row * n + j] = bit as u8;
            for (c, p) in counts.iter_mut().zip(&prefixes) {
                c[p | bit] += 1;
            }
        }
        on_column(
            Column {
                index: j,
                subsets: &subsets,
                counts: &counts,
            },
            &matrix,
        );
    }

    order.shuffle(&mut rng);
    let mut out = SampleSet::with_capacity(n, l).with_metadata(SampleMetadata {
        sampler: "greedy".into(),
        order: Some(k),
        seed: Some(config.seed),
        ..Default::default()
    });
    for &row in &order {
        out.push_bytes(&matrix[row * n..(row + 1) * n])?;
    }
    Ok(out)
}

/// Greedy order-k sampler. The `L` rows are not independent of each other;
/// see [`super::decorrelate`] and [`greedy_sample_iid`].
pub fn greedy_sample<O: MarginalOracle + ?Sized>(oracle: &O, config: &GreedyConfig) -> Result<SampleSet> {
    run(oracle, config, |_, _| {})
}

/// Independent samples: each output row is one random row of a separate
/// greedy run with `run_size` rows. Costs `config.samples` full runs.
pub fn greedy_sample_iid<O: MarginalOracle + ?Sized>(oracle: &O, config: &GreedyConfig, run_size: usize) -> Result<SampleSet> {
    let mut rng = seed::rng_from_seed(config.seed);
    let mut out = SampleSet::with_capacity(oracle.n_modes(), config.samples).with_metadata(SampleMetadata {
        sampler: "greedy-iid".into(),
        order: Some(config.order),
        seed: Some(config.seed),
        ..Default::default()
    });
    for _ in 0..config.samples {
        let run_config = GreedyConfig {
            samples: run_size,
            seed: rng.random(),
            ..*config
        };
        let set = greedy_sample(oracle, &run_config)?;
        let pick = rng.random_range(0..set.len());
        out.extend(&set.select(&[pick]))?;
    }
    out.metadata.extra.insert("run_size".into(), run_size.to_string());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::ExactDistribution;

    fn product(probs: &[f64]) -> ExactDistribution {
        let n = probs.len();
        let full = (0..1usize << n)
            .map(|idx| {
                (0..n)
                    .map(|m| if idx >> (n - 1 - m) & 1 == 1 { probs[m] } else { 1.0 - probs[m] })
                    .product()
            })
            .collect();
        ExactDistribution::new(n, full).unwrap()
    }

    #[test]
    fn order_one_hits_marginals_up_to_rounding() {
        let p = [0.13, 0.5, 0.871, 0.02, 0.66];
        let oracle = product(&p);
        let config = GreedyConfig {
            order: 1,
            samples: 1000,
            seed: 4,
        };
        let s = greedy_sample(&oracle, &config).unwrap();
        for (m, p) in p.iter().enumerate() {
            let emp = s.counts(&[m])[1] as f64 / 1000.0;
            assert!((emp - p).abs() <= 1.0 / 1000.0 + 1e-12, "mode {m}: {emp}");
        }
    }

    #[test]
    fn incremental_counts_equal_recount() {
        let oracle = product(&[0.3, 0.6, 0.45, 0.2, 0.7, 0.5]);
        let config = GreedyConfig {
            order: 3,
            samples: 257,
            seed: 1,
        };
        let n = 6;
        let mut checked = 0;
        run(&oracle, &config, |col, matrix| {
            for (subset, counts) in col.subsets.iter().zip(col.counts) {
                let mut recount = vec![0u64; counts.len()];
                for row in 0..config.samples {
                    let idx = subset.iter().fold(0, |acc, &m| acc << 1 | matrix[row * n + m] as usize);
                    recount[idx] += 1;
                }
                assert_eq!(&recount, counts, "column {}", col.index);
                checked += 1;
            }
        })
        .unwrap();
        // 1 head table + C(3,2) + C(4,2) + C(5,2)
        assert_eq!(checked, 1 + 3 + 6 + 10);
    }

    #[test]
    fn deterministic_and_validated() {
        let oracle = product(&[0.3, 0.6, 0.45]);
        let config = GreedyConfig {
            order: 2,
            samples: 100,
            seed: 3,
        };
        assert_eq!(greedy_sample(&oracle, &config).unwrap(), greedy_sample(&oracle, &config).unwrap());
        let bad = GreedyConfig { order: 4, ..config };
        assert!(greedy_sample(&oracle, &bad).is_err());
        let iid = greedy_sample_iid(&oracle, &config, 20).unwrap();
        assert_eq!(iid.len(), 100);
    }
}
