use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::ClickPattern;

/// Provenance recorded alongside a sample set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleMetadata {
    #[serde(default)]
    pub sampler: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_digest: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl SampleMetadata {
    pub fn sampler(name: &str) -> Self {
        Self {
            sampler: name.to_string(),
            ..Default::default()
        }
    }
}

/// `L` bit strings of `n_modes` bits, bit-packed row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n_modes: usize,
    words: usize,
    data: Vec<u64>,
    len: usize,
    pub metadata: SampleMetadata,
}

impl SampleSet {
    pub fn new(n_modes: usize) -> Self {
        Self::with_capacity(n_modes, 0)
    }

    pub fn with_capacity(n_modes: usize, rows: usize) -> Self {
        let words = n_modes.div_ceil(64).max(1);
        Self {
            n_modes,
            words,
            data: Vec::with_capacity(rows * words),
            len: 0,
            metadata: SampleMetadata::default(),
        }
    }

    pub fn with_metadata(mut self, metadata: SampleMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bits<I: IntoIterator<Item = bool>>(&mut self, bits: I) -> Result<()> {
        let start = self.data.len();
        self.data.resize(start + self.words, 0);
        let mut count = 0;
        for (m, b) in bits.into_iter().enumerate() {
            if m >= self.n_modes {
                self.data.truncate(start);
                return Err(Error::Dimension(format!("sample longer than {} modes", self.n_modes)));
            }
            if b {
                self.data[start + m / 64] |= 1 << (m % 64);
            }
            count += 1;
        }
        if count != self.n_modes {
            self.data.truncate(start);
            return Err(Error::Dimension(format!("sample has {count} bits, expected {}", self.n_modes)));
        }
        self.len += 1;
        Ok(())
    }

    /// Appends a row given as one byte (0 or 1) per mode.
    pub fn push_bytes(&mut self, bits: &[u8]) -> Result<()> {
        self.push_bits(bits.iter().map(|&b| b != 0))
    }

    pub(crate) fn push_spins(&mut self, spins: &[f64]) {
        let start = self.data.len();
        self.data.resize(start + self.words, 0);
        for (m, &s) in spins.iter().enumerate() {
            if s > 0.0 {
                self.data[start + m / 64] |= 1 << (m % 64);
            }
        }
        self.len += 1;
    }

    pub fn get(&self, row: usize, mode: usize) -> bool {
        self.row(row).get(mode)
    }

    pub fn row(&self, row: usize) -> Row<'_> {
        assert!(row < self.len, "row {row} out of range");
        Row {
            n_modes: self.n_modes,
            words: &self.data[row * self.words..(row + 1) * self.words],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = Row<'_>> + '_ {
        (0..self.len).map(move |i| self.row(i))
    }

    /// Pattern counts over `modes` (first mode most significant), i.e. the
    /// unnormalised empirical marginal table.
    pub fn counts(&self, modes: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; 1 << modes.len()];
        for row in self.rows() {
            counts[row.pattern_index(modes)] += 1;
        }
        counts
    }

    pub fn click_counts(&self) -> Vec<usize> {
        self.rows().map(|r| r.clicks()).collect()
    }

    /// New set with the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> SampleSet {
        let mut out = SampleSet::with_capacity(self.n_modes, rows.len()).with_metadata(self.metadata.clone());
        for &r in rows {
            out.data.extend_from_slice(self.row(r).words);
            out.len += 1;
        }
        out
    }

    /// Keeps only the first `m` modes of every row.
    pub fn prefix_modes(&self, m: usize) -> Result<SampleSet> {
        if m == 0 || m > self.n_modes {
            return Err(Error::Index(format!("prefix of {m} modes out of {}", self.n_modes)));
        }
        let mut out = SampleSet::with_capacity(m, self.len).with_metadata(self.metadata.clone());
        for row in self.rows() {
            out.push_bits((0..m).map(|j| row.get(j)))?;
        }
        Ok(out)
    }

    pub fn extend(&mut self, other: &SampleSet) -> Result<()> {
        if other.n_modes != self.n_modes {
            return Err(Error::Dimension("cannot concatenate sample sets of different widths".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.len += other.len;
        Ok(())
    }
}

/// Borrowed view of one sample.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    n_modes: usize,
    words: &'a [u64],
}

impl Row<'_> {
    pub fn get(&self, mode: usize) -> bool {
        debug_assert!(mode < self.n_modes);
        self.words[mode / 64] >> (mode % 64) & 1 == 1
    }

    pub fn clicks(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn pattern_index(&self, modes: &[usize]) -> usize {
        modes.iter().fold(0, |acc, &m| acc << 1 | self.get(m) as usize)
    }

    pub fn to_pattern(&self) -> ClickPattern {
        ClickPattern::new((0..self.n_modes).map(|m| self.get(m)).collect())
    }
}

impl std::fmt::Display for Row<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for m in 0..self.n_modes {
            f.write_str(if self.get(m) { "1" } else { "0" })?;
        }
        Ok(())
    }
}
