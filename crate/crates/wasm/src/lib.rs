//! Browser bindings for the demo page in `www/`. Each export builds a random
//! instance from `(modes, seed)` and returns its results as a JSON string.

use gbsmock::gaussian_state::{build_output_covariance, GaussianState, RandomInstance};
use gbsmock::probability::{click_probabilities, full_distribution, marginal_table, ProbabilityOptions};
use gbsmock::samplers::{greedy_sample, sample_thermal, GreedyConfig, SampleSet};
use gbsmock::seed::derive_seed;
use gbsmock::statistics::{click_histogram, empirical_table, fit_click_gaussian, tvd, ursell};
use gbsmock::subsets::combinations;
use gbsmock::StateOracle;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_MODES: usize = 12;
const MAX_SAMPLES: usize = 200_000;
/// Subsets scored per order, taken in lexicographic order.
const SUBSETS_PER_ORDER: usize = 200;

type Result<T> = std::result::Result<T, String>;

fn state(modes: usize, seed: u64) -> Result<GaussianState> {
    if !(2..=MAX_MODES).contains(&modes) {
        return Err(format!("modes must be in 2..={MAX_MODES}"));
    }
    let instance = RandomInstance::new(modes, modes + modes % 2)
        .generate(seed)
        .map_err(|e| e.to_string())?;
    build_output_covariance(&instance).map_err(|e| e.to_string())
}

fn check_samples(samples: usize) -> Result<()> {
    if (1..=MAX_SAMPLES).contains(&samples) {
        Ok(())
    } else {
        Err(format!("samples must be in 1..={MAX_SAMPLES}"))
    }
}

fn thermal(state: &GaussianState, samples: usize, seed: u64) -> Result<SampleSet> {
    let probs = click_probabilities(state).map_err(|e| e.to_string())?;
    sample_thermal(&probs, samples, derive_seed(seed, "demo/thermal")).map_err(|e| e.to_string())
}

fn greedy(state: &GaussianState, order: usize, samples: usize, seed: u64) -> Result<SampleSet> {
    let oracle = StateOracle {
        state,
        options: ProbabilityOptions::default(),
    };
    let config = GreedyConfig {
        order,
        samples,
        seed: derive_seed(seed, &format!("demo/greedy/{order}")),
    };
    greedy_sample(&oracle, &config).map_err(|e| e.to_string())
}

fn normalized(hist: &[u64]) -> Vec<f64> {
    let total = hist.iter().sum::<u64>().max(1) as f64;
    hist.iter().map(|&c| c as f64 / total).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn click_distribution_json(modes: usize, seed: u64, samples: usize) -> Result<String> {
    check_samples(samples)?;
    let st = state(modes, seed)?;
    let full = full_distribution(&st, &ProbabilityOptions::default()).map_err(|e| e.to_string())?;
    let mut exact = vec![0.0; modes + 1];
    for (index, p) in full.iter().enumerate() {
        exact[index.count_ones() as usize] += p;
    }
    let mean: f64 = exact.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
    let var: f64 = exact.iter().enumerate().map(|(m, p)| (m as f64 - mean).powi(2) * p).sum();
    let fit = fit_click_gaussian(mean, var, modes).map_err(|e| e.to_string())?;
    let out = json!({
        "modes": modes,
        "exact": exact,
        "gaussian_fit": fit.distribution(modes),
        "thermal": normalized(&click_histogram(&thermal(&st, samples, seed)?)),
        "greedy2": normalized(&click_histogram(&greedy(&st, 2, samples, seed)?)),
    });
    Ok(out.to_string())
}

pub fn ursell_decay_json(modes: usize, seed: u64, max_order: usize) -> Result<String> {
    let st = state(modes, seed)?;
    if !(1..=modes.min(8)).contains(&max_order) {
        return Err(format!("max_order must be in 1..={}", modes.min(8)));
    }
    let options = ProbabilityOptions::default();
    let mut orders = Vec::new();
    for k in 1..=max_order {
        let mut values = Vec::new();
        for subset in combinations(modes, k).take(SUBSETS_PER_ORDER) {
            let table = marginal_table(&st, &subset, &options).map_err(|e| e.to_string())?;
            values.push(ursell(&table).map_err(|e| e.to_string())?.value.abs());
        }
        let count = values.len();
        orders.push(json!({ "order": k, "subsets": count, "median_abs": median(&mut values) }));
    }
    Ok(json!({ "modes": modes, "orders": orders }).to_string())
}

pub fn sampler_tvd_json(modes: usize, seed: u64, samples: usize, max_size: usize) -> Result<String> {
    check_samples(samples)?;
    let st = state(modes, seed)?;
    if !(1..=modes.min(6)).contains(&max_size) {
        return Err(format!("max_size must be in 1..={}", modes.min(6)));
    }
    let sets: Vec<(&str, SampleSet)> = vec![
        ("thermal", thermal(&st, samples, seed)?),
        ("greedy1", greedy(&st, 1, samples, seed)?),
        ("greedy2", greedy(&st, 2, samples, seed)?),
    ];
    let options = ProbabilityOptions::default();
    let mut curves = serde_json::Map::new();
    for (name, set) in &sets {
        let mut means = Vec::new();
        for k in 1..=max_size {
            let mut total = 0.0;
            let mut count = 0;
            for subset in combinations(modes, k).take(SUBSETS_PER_ORDER) {
                let ideal = marginal_table(&st, &subset, &options).map_err(|e| e.to_string())?;
                let empirical = empirical_table(set, &subset).map_err(|e| e.to_string())?;
                total += tvd(empirical.probs(), ideal.probs()).map_err(|e| e.to_string())?;
                count += 1;
            }
            means.push(total / count as f64);
        }
        curves.insert(name.to_string(), Value::from(means));
    }
    Ok(json!({ "modes": modes, "sizes": (1..=max_size).collect::<Vec<_>>(), "tvd": curves }).to_string())
}

/// Click-number distribution: exact, Gaussian fit, thermal and greedy (k = 2).
#[wasm_bindgen]
pub fn click_distribution(modes: usize, seed: u32, samples: usize) -> std::result::Result<String, JsValue> {
    click_distribution_json(modes, seed.into(), samples).map_err(|e| JsValue::from_str(&e))
}

/// Median |Ursell function| of the ideal distribution for orders 1..=max_order.
#[wasm_bindgen]
pub fn ursell_decay(modes: usize, seed: u32, max_order: usize) -> std::result::Result<String, JsValue> {
    ursell_decay_json(modes, seed.into(), max_order).map_err(|e| JsValue::from_str(&e))
}

/// Mean marginal TVD against subset size for thermal and greedy samplers.
#[wasm_bindgen]
pub fn sampler_tvd(modes: usize, seed: u32, samples: usize, max_size: usize) -> std::result::Result<String, JsValue> {
    sampler_tvd_json(modes, seed.into(), samples, max_size).map_err(|e| JsValue::from_str(&e))
}
