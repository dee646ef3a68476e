//! Subset enumeration: Gray codes, k-combinations and seeded random draws.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

/// Iterates all subsets of `{0..n}` as bit masks in binary-reflected Gray
/// code order, starting from the empty set. Consecutive masks differ in
/// exactly one bit.
#[derive(Debug, Clone)]
pub struct GrayCode {
    n: u32,
    next: u64,
}

impl GrayCode {
    pub fn new(n: usize) -> Self {
        assert!(n < 64);
        Self { n: n as u32, next: 0 }
    }
}

impl Iterator for GrayCode {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.next >> self.n != 0 {
            return None;
        }
        let i = self.next;
        self.next += 1;
        Some(i ^ (i >> 1))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = ((1u64 << self.n) - self.next) as usize;
        (left, Some(left))
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic k-combinations of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

pub fn combinations(n: usize, k: usize) -> Combinations {
    let current = (k <= n).then(|| (0..k).collect());
    Combinations { n, current }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut c = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if c[i] < self.n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                self.current = Some(c);
                break;
            }
        }
        Some(out)
    }
}

/// Draws up to `count` distinct sorted subsets of size `size` from `0..n`,
/// uniformly without replacement. When there are no more than `count`
/// subsets in total, all of them are returned in lexicographic order.
pub fn random_subsets<R: Rng + ?Sized>(n: usize, size: usize, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let total = binomial(n, size);
    if total <= count as u128 {
        return combinations(n, size).collect();
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut subset = index::sample(rng, n, size).into_vec();
        subset.sort_unstable();
        if seen.insert(subset.clone()) {
            out.push(subset);
        }
    }
    out
}
