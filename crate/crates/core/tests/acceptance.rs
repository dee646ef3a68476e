//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criterion 11 needs the published instances, which are not shipped: point
//! `GBSMOCK_DATASETS` at a directory holding `1.json`, `2.a.1.json`, ...
//! in the canonical instance format to run it.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use gbsmock::gaussian_state::{build_output_covariance, GaussianState, RandomInstance};
use gbsmock::probability::{
    click_probabilities, full_distribution, marginal_table, spin_moments, ExactDistribution, MarginalOracle, ProbabilityOptions,
};
use gbsmock::samplers::{
    bm_exact_distribution, fit_tap_with, gibbs_sample, greedy_sample, sample_thermal, sample_uniform, train_exact_bm, GibbsConfig,
    GreedyConfig, IsingModel, OnsagerTerm, SampleSet, TrainSettings,
};
use gbsmock::statistics::{
    click_moments_theoretical, empirical_table, joint_cumulants, surjections, tvd, ursell, ursell_mgf, UrsellValue,
};
use gbsmock::subsets::combinations;
use gbsmock::{seed, MarginalTable};
use nalgebra::DMatrix;
use rand::Rng;

const NORMALIZATION_TOL: f64 = 1e-9;
const NORMALIZATION_TIME: Duration = Duration::from_secs(10);
const MARGINAL_TOL: f64 = 1e-10;
const URSELL_TOL: f64 = 1e-6;
const MOMENT_TOL: f64 = 1e-9;
const GIBBS_TVD: f64 = 0.02;
const GIBBS_TIME: Duration = Duration::from_secs(300);
const GREEDY_L: usize = 100_000;
const GREEDY_L1_CONST: f64 = 10.0 * 4.0;
const ORDERING_SIGMAS: f64 = 3.0;
const BM_TABLE_TOL: f64 = 1e-7;
const BM_RESIDUAL_FACTOR: f64 = 2.0;
const PUBLISHED_CLICKS_TOL: f64 = 0.05;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn random_state(n: usize, seed: u64) -> GaussianState {
    let instance = RandomInstance::new(n, n + n % 2).generate(seed).expect("random instance");
    build_output_covariance(&instance).expect("physical state")
}

fn opts() -> ProbabilityOptions {
    ProbabilityOptions::default()
}

fn normalization() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for s in 0..50 {
        let p = full_distribution(&random_state(6, s), &opts()).unwrap();
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= NORMALIZATION_TOL && elapsed < NORMALIZATION_TIME,
        format!("max |sum p - 1| = {worst:.2e} (tol {NORMALIZATION_TOL:e}), {elapsed:.2?} for 50 instances"),
    )
}

fn marginal_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut tables = 0;
    for s in 0..50 {
        let state = random_state(6, s);
        let full = ExactDistribution::new(6, full_distribution(&state, &opts()).unwrap()).unwrap();
        for k in 1..=4 {
            for modes in combinations(6, k) {
                let a = marginal_table(&state, &modes, &opts()).unwrap();
                let b = full.marginal(&modes).unwrap();
                worst = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
                tables += 1;
            }
        }
    }
    check(worst <= MARGINAL_TOL, format!("{tables} tables, max deviation {worst:.2e} (tol {MARGINAL_TOL:e})"))
}

fn vacuum_law() -> Outcome {
    let instance = RandomInstance::new(8, 8).squeezing(0.0, 0.0).generate(5).unwrap();
    let state = build_output_covariance(&instance).unwrap();
    let identity = state.sigma() == &DMatrix::identity(16, 16);
    let p0 = gbsmock::probability::bitstring_probability(&state, &gbsmock::ClickPattern::zeros(8), &opts()).unwrap();
    check(identity && p0 == 1.0, format!("sigma == I exactly: {identity}, p(all zeros) = {p0}"))
}

fn random_table(k: usize, rng: &mut impl Rng) -> MarginalTable {
    let w: Vec<f64> = (0..1 << k).map(|_| rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    MarginalTable::new((0..k).collect(), w.iter().map(|x| x / total).collect()).unwrap()
}

fn ursell_cross_definition() -> Outcome {
    let mut rng = seed::rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let table = random_table(1 + i % 4, &mut rng);
        let recursion = *joint_cumulants(&table).unwrap().last().unwrap();
        let fd = ursell_mgf(&table).unwrap().value;
        worst = worst.max((recursion - fd).abs());
    }
    check(worst <= URSELL_TOL, format!("200 tables (k = 1..4), max |recursion - mgf| = {worst:.2e} (tol {URSELL_TOL:e})"))
}

/// Sum of multinomial coefficients over compositions of `k` into `l`
/// positive parts.
fn composition_count(k: usize, l: usize) -> u128 {
    fn rec(left: usize, parts: usize) -> Vec<Vec<usize>> {
        if parts == 0 {
            return if left == 0 { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        for first in 1..=left {
            for mut rest in rec(left - first, parts - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    let fact = |n: usize| (1..=n as u128).product::<u128>();
    rec(k, l).iter().map(|c| fact(k) / c.iter().map(|&n| fact(n)).product::<u128>()).sum()
}

fn click_moments() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, n) in (2..=8).enumerate() {
        let state = random_state(n, 100 + i as u64);
        let p = full_distribution(&state, &opts()).unwrap();
        let raw: Vec<f64> = (1..=3)
            .map(|k| p.iter().enumerate().map(|(z, pz)| pz * (z.count_ones() as f64).powi(k)).sum())
            .collect();
        let brute = [raw[0], raw[1] - raw[0].powi(2), raw[2] - 3.0 * raw[0] * raw[1] + 2.0 * raw[0].powi(3)];
        let theory = click_moments_theoretical(&state, 3).unwrap();
        worst = theory.iter().zip(brute).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    let named = [(2, 1, 1), (2, 2, 2), (3, 2, 6), (3, 3, 6)];
    let named_ok = named.iter().all(|&(k, l, v)| surjections(k, l) == v && composition_count(k, l) == v);
    let table_ok = (1..=6).all(|k| (1..=k).all(|l| surjections(k, l) == composition_count(k, l)));
    check(
        worst <= MOMENT_TOL && named_ok && table_ok,
        format!("N = 2..8, max moment deviation {worst:.2e} (tol {MOMENT_TOL:e}); t(k,l) vs compositions: {}", named_ok && table_ok),
    )
}

fn random_ising(n: usize, seed: u64) -> IsingModel {
    let mut rng = seed::rng_from_seed(seed);
    let h = (0..n).map(|_| rng.random_range(-0.5..=0.5)).collect();
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let v = rng.random_range(-0.3..=0.3);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    IsingModel::new(h, j).unwrap()
}

fn empirical_full(samples: &SampleSet) -> Vec<f64> {
    let modes: Vec<usize> = (0..samples.n_modes()).collect();
    empirical_table(samples, &modes).unwrap().probs().to_vec()
}

fn gibbs_correctness() -> Outcome {
    let model = random_ising(8, 31);
    let exact = bm_exact_distribution(&model).unwrap();
    let start = Instant::now();
    let config = GibbsConfig {
        samples: 1_000_000,
        burn_in: 15_000,
        thinning: 10,
        seed: 7,
    };
    let samples = gibbs_sample(&model, &config).unwrap();
    let elapsed = start.elapsed();
    let d = tvd(&empirical_full(&samples), &exact).unwrap();
    check(
        d < GIBBS_TVD && elapsed < GIBBS_TIME,
        format!("TVD {d:.4} (limit {GIBBS_TVD}), {elapsed:.2?} single-threaded"),
    )
}

fn greedy_fidelity() -> Outcome {
    let state = random_state(10, 77);
    let config = GreedyConfig {
        order: 2,
        samples: GREEDY_L,
        seed: 3,
    };
    let samples = greedy_sample(&state, &config).unwrap();
    let mut worst: f64 = 0.0;
    for pair in combinations(10, 2) {
        let ideal = state.marginal(&pair).unwrap();
        let emp = empirical_table(&samples, &pair).unwrap();
        worst = worst.max(ideal.probs().iter().zip(emp.probs()).map(|(a, b)| (a - b).abs()).sum());
    }
    let limit = GREEDY_L1_CONST / GREEDY_L as f64;
    check(worst <= limit, format!("max pair l1 error {worst:.2e} (limit {limit:.1e} = 40/L)"))
}

fn mean_marginal_tvd(samples: &SampleSet, ideal: &[MarginalTable]) -> f64 {
    ideal
        .iter()
        .map(|t| tvd(empirical_table(samples, t.modes()).unwrap().probs(), t.probs()).unwrap())
        .sum::<f64>()
        / ideal.len() as f64
}

/// Paired mean and standard error of `a - b` over instances.
fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn sampler_ordering() -> Outcome {
    const N: usize = 10;
    const L: usize = 100_000;
    const INSTANCES: u64 = 20;
    let names = ["greedy3", "greedy2", "tap-printed", "tap-weighted", "thermal", "uniform"];
    let mut scores: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for i in 0..INSTANCES {
        let state = random_state(N, 500 + i);
        let ideal: Vec<MarginalTable> = combinations(N, 3).map(|m| state.marginal(&m).unwrap()).collect();
        let moments = spin_moments(&state).unwrap();
        let tap = |onsager| {
            let model = fit_tap_with(&moments.means, &moments.covariance, onsager).unwrap();
            let config = GibbsConfig {
                samples: L,
                burn_in: 15_000,
                thinning: 10,
                seed: seed::derive_seed(i, "tap"),
            };
            gibbs_sample(&model, &config).unwrap()
        };
        let greedy = |order| {
            greedy_sample(
                &state,
                &GreedyConfig {
                    order,
                    samples: L,
                    seed: seed::derive_seed(i, "greedy"),
                },
            )
            .unwrap()
        };
        let sets = [
            greedy(3),
            greedy(2),
            tap(OnsagerTerm::Unweighted),
            tap(OnsagerTerm::MagnetizationWeighted),
            sample_thermal(&click_probabilities(&state).unwrap(), L, seed::derive_seed(i, "thermal")).unwrap(),
            sample_uniform(N, L, seed::derive_seed(i, "uniform")),
        ];
        for (name, set) in names.iter().zip(&sets) {
            scores.entry(name).or_default().push(mean_marginal_tvd(set, &ideal));
        }
    }
    let mean = |k: &str| scores[k].iter().sum::<f64>() / scores[k].len() as f64;
    let default_tap = match OnsagerTerm::default() {
        OnsagerTerm::Unweighted => "tap-printed",
        OnsagerTerm::MagnetizationWeighted => "tap-weighted",
    };
    let sep = |lo: &str, hi: &str| {
        let (m, se) = paired(&scores[hi], &scores[lo]);
        (m / se, m > ORDERING_SIGMAS * se)
    };
    let (z1, ok1) = sep("greedy3", "greedy2");
    let (z1b, ok1b) = sep("greedy3", default_tap);
    let (z2, ok2) = sep("greedy2", "thermal");
    let (z2b, ok2b) = sep(default_tap, "thermal");
    let (z3, ok3) = sep("thermal", "uniform");
    // "greedy2 ≈ TAP": the two sit closer to each other than the nearer one
    // sits to thermal.
    let gap = (mean("greedy2") - mean(default_tap)).abs();
    let to_thermal = mean("thermal") - mean("greedy2").max(mean(default_tap));
    let ok_eq = gap < to_thermal;
    let means: Vec<String> = names.iter().map(|n| format!("{n} {:.4}", mean(n))).collect();
    check(
        ok1 && ok1b && ok2 && ok2b && ok3 && ok_eq,
        format!(
            "mean 3-mode TVD [{}]; separations in SE: g3<g2 {z1:.1}, g3<tap {z1b:.1}, g2<thermal {z2:.1}, tap<thermal {z2b:.1}, thermal<uniform {z3:.1}; |g2-tap| {gap:.4} vs gap to thermal {to_thermal:.4}",
            means.join(", ")
        ),
    )
}

fn ursell_decay() -> Outcome {
    const N: usize = 12;
    let mut per_order: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for i in 0..20 {
        let state = random_state(N, 900 + i);
        for k in 2..=5 {
            for modes in combinations(N, k) {
                let UrsellValue { value, .. } = ursell(&state.marginal(&modes).unwrap()).unwrap();
                per_order.entry(k).or_default().push(value.abs());
            }
        }
    }
    let medians: Vec<f64> = per_order
        .values_mut()
        .map(|v| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        })
        .collect();
    let ok = medians.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = medians.iter().zip(2..).map(|(m, k)| format!("k={k}: {m:.3e}")).collect();
    check(ok, format!("median |d^k| over all subsets of 20 instances: {}", shown.join(", ")))
}

fn max_entropy_agreement() -> Outcome {
    const N: usize = 6;
    let state = random_state(N, 4242);
    let bm = train_exact_bm(&state, 2, &TrainSettings::default()).unwrap();
    let fitted = ExactDistribution::new(N, bm_exact_distribution(&bm).unwrap()).unwrap();
    let mut table_err: f64 = 0.0;
    for modes in (1..=2).flat_map(|k| combinations(N, k)) {
        let a = state.marginal(&modes).unwrap();
        let b = fitted.marginal(&modes).unwrap();
        table_err = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(table_err, f64::max);
    }
    let greedy = greedy_sample(
        &state,
        &GreedyConfig {
            order: 2,
            samples: 1_000_000,
            seed: 17,
        },
    )
    .unwrap();
    let mut bm_res = Vec::new();
    let mut greedy_res = Vec::new();
    for modes in combinations(N, 3) {
        let ideal = ursell(&state.marginal(&modes).unwrap()).unwrap().value;
        bm_res.push((ursell(&fitted.marginal(&modes).unwrap()).unwrap().value - ideal).abs());
        greedy_res.push((ursell(&empirical_table(&greedy, &modes).unwrap()).unwrap().value - ideal).abs());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    let (mb, mg) = (median(&mut bm_res), median(&mut greedy_res));
    let ratio = mg / mb;
    check(
        table_err <= BM_TABLE_TOL && ratio <= BM_RESIDUAL_FACTOR && ratio >= 1.0 / BM_RESIDUAL_FACTOR,
        format!(
            "BM 1-/2-mode table error {table_err:.2e} (tol {BM_TABLE_TOL:e}); median order-3 residual BM {mb:.3e}, greedy {mg:.3e}, ratio {ratio:.2} (within factor {BM_RESIDUAL_FACTOR})"
        ),
    )
}

fn published_click_numbers() -> Outcome {
    let expected = [
        ("1", 41.04),
        ("2.a.1", 7.27),
        ("2.a.2", 19.26),
        ("2.b.1", 5.98),
        ("2.b.2", 11.94),
        ("2.b.3", 24.66),
        ("2.b.4", 41.79),
        ("2.b.5", 66.87),
    ];
    let Some(dir) = std::env::var_os("GBSMOCK_DATASETS").map(PathBuf::from) else {
        return Outcome {
            status: Status::Skip,
            detail: "CONDITIONAL: published datasets not available (set GBSMOCK_DATASETS)".into(),
        };
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, target) in expected {
        let path = dir.join(format!("{name}.json"));
        let mean = gbsmock::io::load_instance(&path)
            .and_then(|inst| build_output_covariance(&inst))
            .and_then(|state| click_probabilities(&state))
            .map(|p| p.iter().sum::<f64>());
        match mean {
            Ok(m) => {
                ok &= (m - target).abs() <= PUBLISHED_CLICKS_TOL;
                lines.push(format!("{name}: {m:.2} vs {target}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    check(ok, format!("{} (tol {PUBLISHED_CLICKS_TOL})", lines.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("normalization", normalization),
        ("marginal consistency", marginal_consistency),
        ("vacuum law", vacuum_law),
        ("Ursell cross-definition", ursell_cross_definition),
        ("click moments", click_moments),
        ("Gibbs correctness", gibbs_correctness),
        ("greedy marginal fidelity", greedy_fidelity),
        ("sampler ordering", sampler_ordering),
        ("Ursell decay", ursell_decay),
        ("max-entropy agreement", max_entropy_agreement),
        ("published mean click numbers", published_click_numbers),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("[{tag}] {id:>2} {name}: {} [{:.1?}]", outcome.detail, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
