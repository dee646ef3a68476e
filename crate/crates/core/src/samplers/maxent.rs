//! Maximum-entropy Boltzmann machines over bit strings, trained exactly by
//! enumerating all `2^n` patterns.
//!
//! `p(z) ∝ exp(sum_α λ_α prod_{i in α} z_i)`, with `α` ranging over mode
//! subsets of size at most `k`. Matching every order-≤k "all click" moment
//! `F_α = P(z_i = 1 for i in α)` pins down every order-≤k marginal table, and
//! the distribution of this form that does so is the entropy maximiser.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::IsingModel;
use crate::error::{Error, Result};
use crate::probability::MarginalOracle;
use crate::subsets::combinations;

/// Largest mode count [`bm_exact_distribution`] will enumerate.
pub const ENUMERATION_BUDGET: usize = 24;
const TRAINING_BUDGET: usize = 16;

/// A model known through its unnormalised log weight.
pub trait EnergyModel {
    fn n_modes(&self) -> usize;

    /// Log weight of the pattern whose bit `n - 1 - m` holds mode `m`
    /// (mode 0 most significant, as for full distributions).
    fn log_weight(&self, pattern: usize) -> f64;
}

impl EnergyModel for IsingModel {
    fn n_modes(&self) -> usize {
        IsingModel::n_modes(self)
    }

    fn log_weight(&self, pattern: usize) -> f64 {
        let n = IsingModel::n_modes(self);
        let s: Vec<f64> = (0..n).map(|m| if pattern >> (n - 1 - m) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        self.log_weight_spins(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannMachine {
    n: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl BoltzmannMachine {
    pub fn new(n: usize, terms: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        for (key, value) in &terms {
            if key.is_empty() || key.windows(2).any(|w| w[0] >= w[1]) || key.iter().any(|&m| m >= n) {
                return Err(Error::Domain(format!("invalid interaction key {key:?} for {n} modes")));
            }
            if !value.is_finite() {
                return Err(Error::Domain(format!("non-finite coefficient on {key:?}")));
            }
        }
        Ok(Self { n, terms })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    pub fn coefficient(&self, modes: &[usize]) -> f64 {
        self.terms.get(modes).copied().unwrap_or(0.0)
    }

    /// Largest interaction order present.
    pub fn order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }
}

fn key_mask(n: usize, key: &[usize]) -> usize {
    key.iter().fold(0, |acc, &m| acc | 1 << (n - 1 - m))
}

impl EnergyModel for BoltzmannMachine {
    fn n_modes(&self) -> usize {
        self.n
    }

    fn log_weight(&self, pattern: usize) -> f64 {
        self.terms
            .iter()
            .filter(|(key, _)| {
                let mask = key_mask(self.n, key);
                pattern & mask == mask
            })
            .map(|(_, v)| v)
            .sum()
    }
}

fn normalize_log_weights(mut w: Vec<f64>) -> (Vec<f64>, f64) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in &mut w {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in &mut w {
        *x /= total;
    }
    (w, max + total.ln())
}

/// Exact normalised distribution of a model, indexed like
/// [`crate::probability::full_distribution`].
pub fn bm_exact_distribution<M: EnergyModel + ?Sized>(model: &M) -> Result<Vec<f64>> {
    let n = model.n_modes();
    if n > ENUMERATION_BUDGET {
        return Err(Error::Budget(format!("{n} modes exceeds the enumeration budget of {ENUMERATION_BUDGET}")));
    }
    let w = (0..1usize << n).map(|z| model.log_weight(z)).collect();
    Ok(normalize_log_weights(w).0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainMethod {
    /// Damped Newton steps on the convex dual, with the feature covariance as
    /// Hessian.
    Newton,
    /// Plain gradient ascent on the log-likelihood with a fixed step.
    GradientAscent { learning_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub method: TrainMethod,
    /// Stop once every model moment is within this of its target.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            method: TrainMethod::Newton,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

struct Features {
    n: usize,
    keys: Vec<Vec<usize>>,
    /// For every pattern, the features equal to one.
    active: Vec<Vec<u32>>,
}

impl Features {
    fn new(n: usize, order: usize) -> Self {
        let keys: Vec<Vec<usize>> = (1..=order).flat_map(|k| combinations(n, k)).collect();
        let masks: Vec<usize> = keys.iter().map(|k| key_mask(n, k)).collect();
        let active = (0..1usize << n)
            .map(|z| (0..masks.len() as u32).filter(|&f| z & masks[f as usize] == masks[f as usize]).collect())
            .collect();
        Self { n, keys, active }
    }

    /// Distribution, `log Z` and model moments at `lambda`.
    fn evaluate(&self, lambda: &DVector<f64>) -> (Vec<f64>, f64, DVector<f64>) {
        let w = self.active.iter().map(|a| a.iter().map(|&f| lambda[f as usize]).sum()).collect();
        let (p, log_z) = normalize_log_weights(w);
        let mut moments = DVector::zeros(self.keys.len());
        for (pz, a) in p.iter().zip(&self.active) {
            for &f in a {
                moments[f as usize] += pz;
            }
        }
        (p, log_z, moments)
    }

    fn covariance(&self, p: &[f64], moments: &DVector<f64>) -> DMatrix<f64> {
        let mut h = -moments * moments.transpose();
        for (pz, a) in p.iter().zip(&self.active) {
            for &f in a {
                for &g in a {
                    h[(f as usize, g as usize)] += pz;
                }
            }
        }
        h
    }

    fn into_model(self, lambda: &DVector<f64>) -> Result<BoltzmannMachine> {
        let terms = self.keys.into_iter().zip(lambda.iter().copied()).collect();
        BoltzmannMachine::new(self.n, terms)
    }
}

/// Fits the order-`order` maximum-entropy machine to the oracle's marginals.
/// Fields start at `logit(p_a)`, which is already the answer for `order == 1`.
pub fn train_exact_bm<O: MarginalOracle + ?Sized>(oracle: &O, order: usize, settings: &TrainSettings) -> Result<BoltzmannMachine> {
    let n = oracle.n_modes();
    if n > TRAINING_BUDGET {
        return Err(Error::Budget(format!("{n} modes exceeds the training budget of {TRAINING_BUDGET}")));
    }
    if order == 0 || order > n {
        return Err(Error::Domain(format!("order {order} must be in 1..={n}")));
    }
    let features = Features::new(n, order);
    let target = DVector::from_iterator(
        features.keys.len(),
        features.keys.iter().map(|k| oracle.all_ones(k)).collect::<Result<Vec<_>>>()?,
    );
    let mut lambda = DVector::from_iterator(
        features.keys.len(),
        features.keys.iter().zip(target.iter()).map(|(k, &p)| {
            if k.len() == 1 {
                let p = p.clamp(1e-12, 1.0 - 1e-12);
                (p / (1.0 - p)).ln()
            } else {
                0.0
            }
        }),
    );

    let (mut p, mut log_z, mut moments) = features.evaluate(&lambda);
    let mut residual = (&moments - &target).amax();
    let mut iterations = 0;
    while residual >= settings.tolerance {
        if iterations == settings.max_iterations {
            return Err(Error::Convergence {
                what: "Boltzmann machine training",
                iterations,
                residual,
            });
        }
        iterations += 1;
        let grad = &moments - &target;
        match settings.method {
            TrainMethod::GradientAscent { learning_rate } => {
                lambda -= learning_rate * &grad;
            }
            TrainMethod::Newton => {
                let hessian = features.covariance(&p, &moments);
                let direction = newton_direction(hessian, &grad);
                // Backtracking on the dual log Z - λ·F.
                let dual = log_z - lambda.dot(&target);
                let slope = grad.dot(&direction);
                let mut step = 1.0;
                loop {
                    let trial = &lambda + step * &direction;
                    let (_, trial_log_z, _) = features.evaluate(&trial);
                    if trial_log_z - trial.dot(&target) <= dual + 1e-4 * step * slope || step < 1e-10 {
                        lambda = trial;
                        break;
                    }
                    step *= 0.5;
                }
            }
        }
        (p, log_z, moments) = features.evaluate(&lambda);
        residual = (&moments - &target).amax();
    }
    features.into_model(&lambda)
}

fn newton_direction(hessian: DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let scale = hessian.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    loop {
        let mut h = hessian.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        if let Some(chol) = h.cholesky() {
            return -chol.solve(grad);
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_state::{build_output_covariance, RandomInstance};
    use crate::probability::ExactDistribution;

    #[test]
    fn free_ising_model_is_uniform() {
        let model = IsingModel::new(vec![0.0; 3], DMatrix::zeros(3, 3)).unwrap();
        let p = bm_exact_distribution(&model).unwrap();
        assert!(p.iter().all(|&x| (x - 0.125).abs() < 1e-15));
    }

    #[test]
    fn two_spin_closed_form() {
        let beta: f64 = 0.7;
        let model = IsingModel::new(vec![0.0; 2], DMatrix::from_row_slice(2, 2, &[0.0, beta, beta, 0.0])).unwrap();
        let p = bm_exact_distribution(&model).unwrap();
        let z = 2.0 * beta.exp() + 2.0 * (-beta).exp();
        let expected = [beta.exp() / z, (-beta).exp() / z, (-beta).exp() / z, beta.exp() / z];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn distributions_are_normalized_and_budgeted() {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0], 1.3);
        terms.insert(vec![1, 3], -2.0);
        terms.insert(vec![0, 2, 4], 0.4);
        let bm = BoltzmannMachine::new(5, terms).unwrap();
        let total: f64 = bm_exact_distribution(&bm).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(bm.order(), 3);

        let big = BoltzmannMachine::new(ENUMERATION_BUDGET + 1, BTreeMap::new()).unwrap();
        assert!(matches!(bm_exact_distribution(&big), Err(Error::Budget(_))));
        let mut bad = BTreeMap::new();
        bad.insert(vec![2, 1], 1.0);
        assert!(BoltzmannMachine::new(3, bad).is_err());
    }

    #[test]
    fn order_one_training_is_logit() {
        let probs = [0.2, 0.55, 0.9];
        let full: Vec<f64> = (0..8usize)
            .map(|z| (0..3).map(|m| if z >> (2 - m) & 1 == 1 { probs[m] } else { 1.0 - probs[m] }).product())
            .collect();
        let oracle = ExactDistribution::new(3, full).unwrap();
        let bm = train_exact_bm(&oracle, 1, &TrainSettings::default()).unwrap();
        for (m, p) in probs.iter().enumerate() {
            assert!((bm.coefficient(&[m]) - (p / (1.0 - p)).ln()).abs() < 1e-7);
        }
    }

    #[test]
    fn order_two_training_reproduces_pair_tables() {
        let state = build_output_covariance(&RandomInstance::new(6, 6).generate(11).unwrap()).unwrap();
        let bm = train_exact_bm(&state, 2, &TrainSettings::default()).unwrap();
        let fitted = ExactDistribution::new(6, bm_exact_distribution(&bm).unwrap()).unwrap();
        for modes in (1..=2).flat_map(|k| combinations(6, k)) {
            let a = state.marginal(&modes).unwrap();
            let b = fitted.marginal(&modes).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() < 1e-7, "{modes:?}");
            }
        }
    }

    #[test]
    fn gradient_ascent_agrees_with_newton_on_tiny_case() {
        let state = build_output_covariance(&RandomInstance::new(3, 4).generate(2).unwrap()).unwrap();
        let newton = train_exact_bm(&state, 2, &TrainSettings::default()).unwrap();
        let settings = TrainSettings {
            method: TrainMethod::GradientAscent { learning_rate: 2.0 },
            tolerance: 1e-8,
            max_iterations: 200_000,
        };
        let slow = train_exact_bm(&state, 2, &settings).unwrap();
        for (key, v) in newton.terms() {
            assert!((v - slow.coefficient(key)).abs() < 1e-4, "{key:?}");
        }
    }
}
