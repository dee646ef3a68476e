//! Exact threshold-detector probabilities.
//!
//! A click pattern `z` with click set `S` has probability
//! `Tor(O_S) / sqrt(det sigma)` with `O_S = I - (sigma^-1)_S`, where the
//! Torontonian is an inclusion-exclusion sum over the `2^|S|` subsets of `S`.
//! The cost is exponential in the number of clicks, which for a marginal over
//! `k` modes is at most `k`.

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian_state::{reduce_state, validate_modes, GaussianState};
use crate::linalg::{self, CMatrix};
use crate::subsets::GrayCode;

const NEGATIVE_CLAMP: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-9;

/// Outcome of one shot: one bit per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClickPattern {
    bits: Vec<bool>,
}

impl ClickPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// Parses a string of `0`/`1`, mode 0 first.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Domain(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Modes that clicked, ascending.
    pub fn click_set(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    pub fn clicks(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

impl std::fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Probabilities of all `2^k` patterns over an ordered list of modes.
///
/// Entry `i` is the pattern whose bits, read most significant first, follow
/// the order of `modes`: the first listed mode is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    modes: Vec<usize>,
    probs: Vec<f64>,
}

impl MarginalTable {
    pub fn new(modes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if modes.len() >= usize::BITS as usize || probs.len() != 1 << modes.len() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} modes",
                probs.len(),
                modes.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("table entry {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Domain(format!("table sums to {total}")));
        }
        Ok(Self { modes, probs })
    }

    /// Builds a table from unnormalised non-negative weights.
    pub fn from_counts(modes: Vec<usize>, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Domain("no counts".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(modes, probs)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }

    pub fn index_of(bits: &[bool]) -> usize {
        bits.iter().fold(0, |acc, &b| acc << 1 | b as usize)
    }

    pub fn probability(&self, bits: &[bool]) -> f64 {
        self.probs[Self::index_of(bits)]
    }

    /// Probability that every listed mode clicks.
    pub fn all_ones(&self) -> f64 {
        *self.probs.last().unwrap()
    }

    /// `E[prod z]` over every sub-pattern: entry `m` is the probability that all
    /// positions whose bit is set in `m` click (same bit convention as the
    /// table index).
    pub fn ones_moments(&self) -> Vec<f64> {
        let k = self.order();
        let mut m = self.probs.clone();
        for bit in 0..k {
            for mask in 0..m.len() {
                if mask >> bit & 1 == 0 {
                    m[mask] += m[mask | 1 << bit];
                }
            }
        }
        m
    }

    /// Sums out every position not in `keep` (positions into `modes`, in the
    /// order wanted for the result).
    pub fn marginalize(&self, keep: &[usize]) -> Result<Self> {
        let k = self.order();
        validate_modes(keep, k)?;
        let mut probs = vec![0.0; 1 << keep.len()];
        for (idx, p) in self.probs.iter().enumerate() {
            let sub = keep.iter().fold(0, |acc, &pos| acc << 1 | (idx >> (k - 1 - pos) & 1));
            probs[sub] += p;
        }
        Ok(Self {
            modes: keep.iter().map(|&p| self.modes[p]).collect(),
            probs,
        })
    }
}

/// Knobs for the exponential-cost evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityOptions {
    /// Patterns with more clicks than this trigger a warning (or an error in
    /// strict mode).
    pub click_budget: usize,
    pub strict: bool,
    /// Largest subset accepted by [`marginal_table`].
    pub max_table_modes: usize,
}

impl Default for ProbabilityOptions {
    fn default() -> Self {
        Self {
            click_budget: 30,
            strict: false,
            max_table_modes: 20,
        }
    }
}

/// Neumaier-compensated running sum; the inclusion-exclusion sums cancel
/// heavily.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn parity_sign(odd: bool) -> f64 {
    if odd {
        -1.0
    } else {
        1.0
    }
}

fn doubled_dimension(a: &CMatrix) -> Result<usize> {
    let (r, c) = a.shape();
    if r != c || r % 2 != 0 {
        return Err(Error::Dimension(format!("Torontonian needs a 2m x 2m matrix, got {r} x {c}")));
    }
    Ok(r / 2)
}

/// Torontonian `sum_Z (-1)^(m - |Z|) / sqrt(det(I - A_Z))` of a `2m x 2m`
/// matrix in the doubled basis.
///
/// `I - A_Z` must be Hermitian positive definite for every subset. Subsets
/// are walked depth first so each determinant extends its parent's Cholesky
/// factor by one mode.
pub fn torontonian(a: &CMatrix) -> Result<f64> {
    let m = doubled_dimension(a)?;
    let complement = CMatrix::identity(2 * m, 2 * m) - a;
    signed_inverse_sqrt_sum(&complement, &(0..m).map(|j| [j, j + m]).collect::<Vec<_>>(), 0.0)
}

/// `sum_Z (-1)^(m - |Z|) exp(-(log_offset + logdet M_Z) / 2)`.
fn signed_inverse_sqrt_sum(m_mat: &CMatrix, units: &[[usize; 2]], log_offset: f64) -> Result<f64> {
    let m = units.len();
    let mut acc = CompensatedSum::default();
    acc.add(parity_sign(m % 2 == 1) * (-0.5 * log_offset).exp());
    linalg::for_each_principal_logdet(m_mat, units, |mask, ld| {
        let odd = (m - mask.count_ones() as usize) % 2 == 1;
        acc.add(parity_sign(odd) * (-0.5 * (log_offset + ld)).exp());
    })?;
    Ok(acc.value())
}

/// Reference Torontonian: subsets in Gray-code order, every determinant
/// recomputed from scratch with a general LU decomposition. `O(m^3 2^m)`.
pub fn torontonian_gray(a: &CMatrix) -> Result<f64> {
    let m = doubled_dimension(a)?;
    let mut acc = CompensatedSum::default();
    for mask in GrayCode::new(m) {
        let rows: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).flat_map(|j| [j, j + m]).collect();
        let sub = a.select_rows(&rows).select_columns(&rows);
        let det = (CMatrix::identity(rows.len(), rows.len()) - sub).determinant();
        if det.re <= 0.0 || det.im.abs() > 1e-8 * det.norm() {
            return Err(Error::NonPositiveMinor {
                subset: linalg::mask_positions(mask),
                pivot: det.re,
            });
        }
        let odd = (m - mask.count_ones() as usize) % 2 == 1;
        acc.add(parity_sign(odd) / det.re.sqrt());
    }
    Ok(acc.value())
}

fn check_budget(clicks: usize, options: &ProbabilityOptions) -> Result<()> {
    if clicks > options.click_budget {
        if options.strict {
            return Err(Error::Budget(format!(
                "{clicks} clicks exceed the budget of {} (cost 2^{clicks} determinants)",
                options.click_budget
            )));
        }
        warn!("pattern with {clicks} clicks exceeds the click budget {}; cost grows as 2^clicks", options.click_budget);
    }
    Ok(())
}

/// Exact probability of one click pattern over all modes of `state`.
pub fn bitstring_probability(state: &GaussianState, z: &ClickPattern, options: &ProbabilityOptions) -> Result<f64> {
    if z.len() != state.n_modes() {
        return Err(Error::Dimension(format!(
            "pattern has {} bits for a {}-mode state",
            z.len(),
            state.n_modes()
        )));
    }
    let clicks = z.click_set();
    check_budget(clicks.len(), options)?;
    // det(I - O_Z) = det((sigma^-1)_Z); combine with det(sigma) in log space.
    let units = state.mode_rows(&clicks);
    signed_inverse_sqrt_sum(state.inverse(), &units, state.logdet())
}

fn reverse_bits(mask: usize, k: usize) -> usize {
    (0..k).fold(0, |acc, t| acc | (mask >> t & 1) << (k - 1 - t))
}

fn finish_table(modes: Vec<usize>, mut probs: Vec<f64>) -> Result<MarginalTable> {
    let mut clamped = false;
    for (i, p) in probs.iter_mut().enumerate() {
        if *p < 0.0 {
            if *p < -NEGATIVE_CLAMP {
                return Err(Error::Domain(format!(
                    "pattern {i} of modes {modes:?} has probability {p:e}, beyond round-off"
                )));
            }
            *p = 0.0;
            clamped = true;
        }
    }
    let total: f64 = probs.iter().sum();
    if clamped || (total - 1.0).abs() > 1e-15 {
        if clamped {
            debug!("clamped round-off negative probabilities on modes {modes:?}");
        }
        for p in &mut probs {
            *p /= total;
        }
    }
    MarginalTable::new(modes, probs)
}

/// Marginal table of `modes`.
///
/// Computed from the `2^k` no-click probabilities `1/sqrt(det sigma_W)` of
/// every sub-subset `W` followed by a Möbius transform over the subset
/// lattice. This equals evaluating [`bitstring_probability`] on the reduced
/// state for each pattern (each Torontonian term is a complementary minor),
/// at `2^k` instead of `3^k` determinants.
pub fn marginal_table(state: &GaussianState, modes: &[usize], options: &ProbabilityOptions) -> Result<MarginalTable> {
    let k = modes.len();
    if k > options.max_table_modes {
        return Err(Error::Budget(format!(
            "marginal over {k} modes exceeds the cap of {}",
            options.max_table_modes
        )));
    }
    validate_modes(modes, state.n_modes())?;
    let units = state.mode_rows(modes);
    let full = (1usize << k) - 1;
    // g[Z] = P(no click outside Z), Z in walk order (bit t = position t).
    let mut g = vec![0.0; 1 << k];
    g[full] = 1.0;
    linalg::for_each_principal_logdet(state.sigma(), &units, |mask, ld| {
        g[full ^ mask as usize] = (-0.5 * ld).exp();
    })?;
    for bit in 0..k {
        for mask in 0..g.len() {
            if mask >> bit & 1 == 1 {
                g[mask] -= g[mask ^ 1 << bit];
            }
        }
    }
    let mut probs = vec![0.0; 1 << k];
    for (mask, p) in g.into_iter().enumerate() {
        probs[reverse_bits(mask, k)] = p;
    }
    finish_table(modes.to_vec(), probs)
}

/// Marginal table evaluated pattern by pattern through the Torontonian of the
/// reduced state. Slower than [`marginal_table`]; kept as an independent
/// route.
pub fn marginal_table_torontonian(state: &GaussianState, modes: &[usize], options: &ProbabilityOptions) -> Result<MarginalTable> {
    let k = modes.len();
    if k > options.max_table_modes {
        return Err(Error::Budget(format!("marginal over {k} modes exceeds the cap")));
    }
    let reduced = reduce_state(state, modes)?;
    let probs = (0..1usize << k)
        .map(|idx| {
            let bits = (0..k).map(|t| idx >> (k - 1 - t) & 1 == 1).collect();
            bitstring_probability(&reduced, &ClickPattern::new(bits), options)
        })
        .collect::<Result<Vec<_>>>()?;
    finish_table(modes.to_vec(), probs)
}

/// Full `2^n` distribution (index convention of [`MarginalTable`]).
pub fn full_distribution(state: &GaussianState, options: &ProbabilityOptions) -> Result<Vec<f64>> {
    let modes: Vec<usize> = (0..state.n_modes()).collect();
    Ok(marginal_table(state, &modes, options)?.probs)
}

/// Single-mode click probabilities, linear in the number of modes.
pub fn click_probabilities(state: &GaussianState) -> Result<Vec<f64>> {
    let n = state.n_modes();
    (0..n)
        .map(|j| {
            let rows = [j, j + n];
            let sub = state.sigma().select_rows(&rows).select_columns(&rows);
            let ld = linalg::hermitian_logdet(&sub).ok_or(Error::NonPositiveMinor {
                subset: vec![j],
                pivot: f64::NAN,
            })?;
            Ok(1.0 - (-0.5 * ld).exp())
        })
        .collect()
}

/// First and second spin moments for `s = 2z - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMoments {
    pub means: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

pub fn spin_moments<O: MarginalOracle + ?Sized>(oracle: &O) -> Result<SpinMoments> {
    let n = oracle.n_modes();
    let mut means = Vec::with_capacity(n);
    for a in 0..n {
        let t = oracle.marginal(&[a])?;
        means.push(2.0 * t.probs()[1] - 1.0);
    }
    let mut covariance = DMatrix::zeros(n, n);
    for a in 0..n {
        covariance[(a, a)] = 1.0 - means[a] * means[a];
        for b in a + 1..n {
            let p = oracle.marginal(&[a, b])?;
            let p = p.probs();
            let ss = p[0] + p[3] - p[1] - p[2];
            let c = ss - means[a] * means[b];
            covariance[(a, b)] = c;
            covariance[(b, a)] = c;
        }
    }
    Ok(SpinMoments { means, covariance })
}

/// Anything that can produce ideal marginal tables for small mode subsets.
pub trait MarginalOracle {
    fn n_modes(&self) -> usize;

    fn marginal(&self, modes: &[usize]) -> Result<MarginalTable>;

    /// Probability that all of `modes` click.
    fn all_ones(&self, modes: &[usize]) -> Result<f64> {
        Ok(self.marginal(modes)?.all_ones())
    }
}

impl MarginalOracle for GaussianState {
    fn n_modes(&self) -> usize {
        GaussianState::n_modes(self)
    }

    fn marginal(&self, modes: &[usize]) -> Result<MarginalTable> {
        marginal_table(self, modes, &ProbabilityOptions::default())
    }

    fn all_ones(&self, modes: &[usize]) -> Result<f64> {
        // Inclusion-exclusion over the no-click probabilities of sub-subsets.
        validate_modes(modes, GaussianState::n_modes(self))?;
        let mut acc = CompensatedSum::default();
        acc.add(1.0);
        linalg::for_each_principal_logdet(self.sigma(), &self.mode_rows(modes), |mask, ld| {
            acc.add(parity_sign(mask.count_ones() % 2 == 1) * (-0.5 * ld).exp());
        })?;
        Ok(acc.value().max(0.0))
    }
}

/// A state paired with non-default [`ProbabilityOptions`].
#[derive(Debug, Clone, Copy)]
pub struct StateOracle<'a> {
    pub state: &'a GaussianState,
    pub options: ProbabilityOptions,
}

impl MarginalOracle for StateOracle<'_> {
    fn n_modes(&self) -> usize {
        self.state.n_modes()
    }

    fn marginal(&self, modes: &[usize]) -> Result<MarginalTable> {
        marginal_table(self.state, modes, &self.options)
    }

    fn all_ones(&self, modes: &[usize]) -> Result<f64> {
        self.state.all_ones(modes)
    }
}

/// An explicit distribution over all `2^n` patterns (mode 0 is the most
/// significant bit of the index).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        MarginalTable::new((0..n).collect(), probs.clone())?;
        Ok(Self { n, probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl MarginalOracle for ExactDistribution {
    fn n_modes(&self) -> usize {
        self.n
    }

    fn marginal(&self, modes: &[usize]) -> Result<MarginalTable> {
        let full = MarginalTable {
            modes: (0..self.n).collect(),
            probs: self.probs.clone(),
        };
        let mut t = full.marginalize(modes)?;
        t.modes = modes.to_vec();
        Ok(t)
    }
}

impl<T: MarginalOracle + ?Sized> MarginalOracle for &T {
    fn n_modes(&self) -> usize {
        (**self).n_modes()
    }

    fn marginal(&self, modes: &[usize]) -> Result<MarginalTable> {
        (**self).marginal(modes)
    }

    fn all_ones(&self, modes: &[usize]) -> Result<f64> {
        (**self).all_ones(modes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_state::{build_output_covariance, RandomInstance};
    use num_complex::Complex64;

    fn random_state(n: usize, seed: u64) -> GaussianState {
        let inst = RandomInstance::new(n, n + n % 2).squeezing(0.4, 1.4).transmission(0.6).generate(seed).unwrap();
        build_output_covariance(&inst).unwrap()
    }

    fn pattern(idx: usize, n: usize) -> ClickPattern {
        ClickPattern::new((0..n).map(|t| idx >> (n - 1 - t) & 1 == 1).collect())
    }

    /// Full distribution by evaluating every pattern's Torontonian.
    fn enumerate(state: &GaussianState) -> Vec<f64> {
        let n = state.n_modes();
        (0..1 << n)
            .map(|i| bitstring_probability(state, &pattern(i, n), &ProbabilityOptions::default()).unwrap())
            .collect()
    }

    /// P(no click on `modes`) straight from a general-purpose determinant.
    fn no_click_oracle(state: &GaussianState, modes: &[usize]) -> f64 {
        let n = state.n_modes();
        let rows: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|j| j + n)).collect();
        let det = state.sigma().select_rows(&rows).select_columns(&rows).determinant();
        1.0 / det.re.sqrt()
    }

    #[test]
    fn torontonian_trivial_cases() {
        assert_eq!(torontonian(&CMatrix::zeros(0, 0)).unwrap(), 1.0);
        assert_eq!(torontonian(&CMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(matches!(torontonian(&CMatrix::zeros(3, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn three_click_probability_matches_inclusion_exclusion() {
        for seed in 0..5 {
            let state = random_state(3, seed);
            let p = bitstring_probability(&state, &ClickPattern::parse("111").unwrap(), &Default::default()).unwrap();
            // p(111) = sum over Z of (-1)^(3-|Z|) P(no click outside Z)
            let mut oracle = 0.0;
            for z in 0..8usize {
                let outside: Vec<usize> = (0..3).filter(|j| z >> j & 1 == 0).collect();
                let sign = if (3 - z.count_ones()) % 2 == 1 { -1.0 } else { 1.0 };
                let q = if outside.is_empty() { 1.0 } else { no_click_oracle(&state, &outside) };
                oracle += sign * q;
            }
            assert!((p - oracle).abs() < 1e-12, "{p} vs {oracle}");
            assert!(p > 0.0);
        }
    }

    #[test]
    fn incremental_and_gray_code_torontonians_agree() {
        let state = random_state(7, 11);
        let clicks = [0, 2, 3, 5, 6];
        let rows: Vec<usize> = clicks.iter().copied().chain(clicks.iter().map(|j| j + 7)).collect();
        let o = CMatrix::identity(10, 10) - state.inverse().select_rows(&rows).select_columns(&rows);
        let a = torontonian(&o).unwrap();
        let b = torontonian_gray(&o).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn all_zero_pattern() {
        let vac = GaussianState::vacuum(4);
        assert_eq!(bitstring_probability(&vac, &ClickPattern::zeros(4), &Default::default()).unwrap(), 1.0);
        let state = random_state(5, 2);
        let p = bitstring_probability(&state, &ClickPattern::zeros(5), &Default::default()).unwrap();
        assert_eq!(p, (-0.5 * state.logdet()).exp());
    }

    #[test]
    fn full_distribution_is_normalized() {
        for seed in 0..4 {
            let probs = enumerate(&random_state(6, seed));
            let total: f64 = probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(probs.iter().all(|&p| p > -1e-12));
        }
    }

    #[test]
    fn marginal_tables_match_full_enumeration() {
        let state = random_state(8, 5);
        let full = ExactDistribution::new(8, enumerate(&state)).unwrap();
        for modes in [vec![1, 4, 6], vec![7, 0, 3], vec![2], vec![5, 1]] {
            let table = marginal_table(&state, &modes, &Default::default()).unwrap();
            let oracle = full.marginal(&modes).unwrap();
            for (a, b) in table.probs().iter().zip(oracle.probs()) {
                assert!((a - b).abs() < 1e-10, "{modes:?}: {a} vs {b}");
            }
            let slow = marginal_table_torontonian(&state, &modes, &Default::default()).unwrap();
            for (a, b) in table.probs().iter().zip(slow.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_state_marginal_matches_trace_over_rest() {
        let state = random_state(6, 9);
        let full = ExactDistribution::new(6, enumerate(&state)).unwrap();
        let reduced = reduce_state(&state, &[1, 4]).unwrap();
        let table = ExactDistribution::new(2, enumerate(&reduced)).unwrap();
        let oracle = full.marginal(&[1, 4]).unwrap();
        for (a, b) in table.probs().iter().zip(oracle.probs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn simple_tables() {
        let vac = GaussianState::vacuum(5);
        let t = marginal_table(&vac, &[0, 3, 4], &Default::default()).unwrap();
        assert_eq!(t.probs()[0], 1.0);
        assert!(t.probs()[1..].iter().all(|&p| p == 0.0));

        let state = random_state(6, 1);
        let t = marginal_table(&state, &[3], &Default::default()).unwrap();
        let q = no_click_oracle(&state, &[3]);
        assert!((t.probs()[0] - q).abs() < 1e-13);
        assert!((t.probs()[1] - (1.0 - q)).abs() < 1e-13);
        let clicks = click_probabilities(&state).unwrap();
        assert!((clicks[3] - (1.0 - q)).abs() < 1e-13);
    }

    #[test]
    fn marginal_of_marginal_is_consistent() {
        let state = random_state(7, 3);
        let modes = [6, 2, 0, 4, 5];
        let table = marginal_table(&state, &modes, &Default::default()).unwrap();
        for k in 1..modes.len() {
            let prefix = table.marginalize(&(0..k).collect::<Vec<_>>()).unwrap();
            let direct = marginal_table(&state, &modes[..k], &Default::default()).unwrap();
            for (a, b) in prefix.probs().iter().zip(direct.probs()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let state = random_state(5, 8);
        let perm = [3, 0, 4, 1, 2];
        let permuted = reduce_state(&state, &perm).unwrap();
        let z = ClickPattern::parse("10110").unwrap();
        // Position t of the permuted state is mode perm[t] of the original.
        let zp = ClickPattern::new(perm.iter().map(|&m| z.bits()[m]).collect());
        let a = bitstring_probability(&state, &z, &Default::default()).unwrap();
        let b = bitstring_probability(&permuted, &zp, &Default::default()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spin_moments_cases() {
        let vac = GaussianState::vacuum(3);
        let m = spin_moments(&vac).unwrap();
        assert!(m.means.iter().all(|&s| s == -1.0));
        assert!(m.covariance.iter().all(|&c| c == 0.0));

        // A diagonal interferometer keeps every mode independent.
        let t = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.9, 0.0),
            Complex64::new(0.0, 0.7),
            Complex64::new(0.5, 0.5),
            Complex64::new(0.8, 0.0),
        ]));
        let inst = crate::GbsInstance::new(vec![0.8, 1.1], t).unwrap();
        let product = build_output_covariance(&inst).unwrap();
        let m = spin_moments(&product).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!(m.covariance[(a, b)].abs() < 1e-10);
                }
            }
        }

        let state = random_state(6, 4);
        let m = spin_moments(&state).unwrap();
        let probs = enumerate(&state);
        let spin = |i: usize, a: usize| if i >> (5 - a) & 1 == 1 { 1.0 } else { -1.0 };
        for a in 0..6 {
            let mean: f64 = probs.iter().enumerate().map(|(i, p)| p * spin(i, a)).sum();
            assert!((mean - m.means[a]).abs() < 1e-10);
            assert!((m.covariance[(a, a)] - (1.0 - mean * mean)).abs() < 1e-10);
            for b in 0..6 {
                let mb: f64 = probs.iter().enumerate().map(|(i, p)| p * spin(i, b)).sum();
                let ab: f64 = probs.iter().enumerate().map(|(i, p)| p * spin(i, a) * spin(i, b)).sum();
                assert!((ab - mean * mb - m.covariance[(a, b)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn all_ones_matches_table() {
        let state = random_state(6, 6);
        for modes in [vec![0], vec![2, 5], vec![1, 3, 4]] {
            let a = state.all_ones(&modes).unwrap();
            let b = state.marginal(&modes).unwrap().all_ones();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn click_budget() {
        let state = random_state(6, 0);
        let strict = ProbabilityOptions {
            click_budget: 3,
            strict: true,
            ..Default::default()
        };
        let z = ClickPattern::parse("111100").unwrap();
        assert!(matches!(bitstring_probability(&state, &z, &strict), Err(Error::Budget(_))));
        let lenient = ProbabilityOptions { strict: false, ..strict };
        assert!(bitstring_probability(&state, &z, &lenient).is_ok());
        let capped = ProbabilityOptions {
            max_table_modes: 2,
            ..Default::default()
        };
        assert!(matches!(marginal_table(&state, &[0, 1, 2], &capped), Err(Error::Budget(_))));
    }

    #[test]
    fn table_validation() {
        assert!(MarginalTable::new(vec![0], vec![0.5, 0.4]).is_err());
        assert!(MarginalTable::new(vec![0, 1], vec![0.5, 0.5]).is_err());
        assert!(ClickPattern::parse("01x").is_err());
        let z = ClickPattern::parse("0110").unwrap();
        assert_eq!(z.click_set(), vec![1, 2]);
        assert_eq!(z.to_string(), "0110");
    }
}
