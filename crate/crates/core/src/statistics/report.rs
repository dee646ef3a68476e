//! Metric reports and the pipelines that fill them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    click_histogram, click_moments_empirical, click_moments_theoretical, delta_bounds, empirical_table, fit_click_gaussian,
    hog_rate, kl, pearson_bootstrap, tvd, ursell, xe_estimate, Bounds, Estimate, DEFAULT_RESAMPLES,
};
use crate::error::{Error, Result};
use crate::gaussian_state::GaussianState;
use crate::probability::{bitstring_probability, MarginalOracle, ProbabilityOptions};
use crate::samplers::SampleSet;
use crate::seed;
use crate::subsets::random_subsets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetValue {
    pub modes: Vec<usize>,
    pub value: f64,
    /// Ideal value, when the metric is compared rather than a distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal: Option<f64>,
    /// Same metric for the reference sample set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub subset_size: usize,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
}

impl Aggregate {
    pub fn from_values(subset_size: usize, values: &[f64]) -> Self {
        let est = Estimate::from_values(values);
        let n = values.len() as f64;
        Self {
            subset_size,
            count: values.len(),
            mean: est.mean,
            std_dev: est.standard_error * n.sqrt(),
            std_error: est.standard_error,
            reference_mean: None,
            bounds: None,
        }
    }
}

/// Field order is fixed and maps are sorted, so serialised reports diff
/// cleanly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_sample_count: Option<usize>,
    pub values: Vec<SubsetValue>,
    pub aggregates: Vec<Aggregate>,
    pub scalars: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(metric: &str) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("log_base".into(), "e".into());
        Self {
            metric: metric.into(),
            sample_count: None,
            reference_sample_count: None,
            values: Vec::new(),
            aggregates: Vec::new(),
            scalars: BTreeMap::new(),
            series: BTreeMap::new(),
            metadata,
        }
    }

    /// Recomputes `aggregates` from `values`, grouped by subset size. Bounds
    /// are attached only for the distance metrics, whose values are >= 0.
    pub fn aggregate(&mut self) {
        let distance = [MarginalMetric::Tvd, MarginalMetric::Kl].iter().any(|m| m.name() == self.metric);
        let mut groups: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for v in &self.values {
            let g = groups.entry(v.modes.len()).or_default();
            g.0.push(v.value);
            g.1.extend(v.reference);
        }
        self.aggregates = groups
            .into_iter()
            .map(|(size, (values, refs))| {
                let mut agg = Aggregate::from_values(size, &values);
                if refs.len() == values.len() {
                    let reference = refs.iter().sum::<f64>() / refs.len() as f64;
                    agg.reference_mean = Some(reference);
                    if distance {
                        agg.bounds = Some(delta_bounds(reference, agg.mean));
                    }
                }
                agg
            })
            .collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalMetric {
    Tvd,
    Kl,
    Ursell,
}

impl MarginalMetric {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Tvd => "tvd",
            Self::Kl => "kl",
            Self::Ursell => "ursell",
        }
    }
}

/// Which subsets a marginal report visits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPlan {
    pub sizes: Vec<usize>,
    /// Upper bound on subsets per size; all subsets are used when fewer exist.
    pub max_subsets: usize,
    pub seed: u64,
}

impl SubsetPlan {
    pub fn subsets(&self, n_modes: usize) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        for &size in &self.sizes {
            if size == 0 || size > n_modes {
                return Err(Error::Budget(format!("subset size {size} outside 1..={n_modes}")));
            }
            let mut rng = seed::derived_rng(self.seed, &format!("subsets/{size}"));
            out.extend(random_subsets(n_modes, size, self.max_subsets, &mut rng));
        }
        Ok(out)
    }
}

fn marginal_value(metric: MarginalMetric, samples: &SampleSet, ideal: &crate::MarginalTable) -> Result<f64> {
    let empirical = empirical_table(samples, ideal.modes())?;
    match metric {
        MarginalMetric::Tvd => tvd(empirical.probs(), ideal.probs()),
        MarginalMetric::Kl => kl(empirical.probs(), ideal.probs()),
        MarginalMetric::Ursell => Ok(ursell(&empirical)?.value),
    }
}

/// One subset's entry of a [`marginal_report`].
pub fn subset_value<O: MarginalOracle + ?Sized>(
    metric: MarginalMetric,
    samples: &SampleSet,
    reference: Option<&SampleSet>,
    oracle: &O,
    modes: &[usize],
) -> Result<SubsetValue> {
    let ideal = oracle.marginal(modes)?;
    let value = marginal_value(metric, samples, &ideal)?;
    let reference = reference.map(|r| marginal_value(metric, r, &ideal)).transpose()?;
    let ideal_value = match metric {
        MarginalMetric::Ursell => Some(ursell(&ideal)?.value),
        _ => None,
    };
    Ok(SubsetValue {
        modes: modes.to_vec(),
        value,
        ideal: ideal_value,
        reference,
    })
}

/// Per-subset comparison of empirical marginals with the oracle's tables.
///
/// For `tvd` and `kl` the value is the distance of the sample set's marginal
/// to the ideal one; with a reference set the reference's distance is stored
/// alongside and each aggregate carries the bracket on the difference. For
/// `ursell` the value is the empirical Ursell function and `ideal` the exact
/// one, and the report's scalars hold the per-size Pearson correlation.
pub fn marginal_report<O: MarginalOracle + ?Sized>(
    metric: MarginalMetric,
    samples: &SampleSet,
    reference: Option<&SampleSet>,
    oracle: &O,
    plan: &SubsetPlan,
) -> Result<MetricReport> {
    check_widths(samples, reference, oracle.n_modes())?;
    let values = plan
        .subsets(oracle.n_modes())?
        .iter()
        .map(|modes| subset_value(metric, samples, reference, oracle, modes))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_marginal_report(metric, values, samples, reference, plan))
}

pub fn check_widths(samples: &SampleSet, reference: Option<&SampleSet>, n: usize) -> Result<()> {
    for s in std::iter::once(samples).chain(reference) {
        if s.n_modes() != n {
            return Err(Error::Dimension(format!("{}-mode samples for a {n}-mode state", s.n_modes())));
        }
    }
    Ok(())
}

/// Builds the report from per-subset values computed in plan order.
pub fn assemble_marginal_report(
    metric: MarginalMetric,
    values: Vec<SubsetValue>,
    samples: &SampleSet,
    reference: Option<&SampleSet>,
    plan: &SubsetPlan,
) -> MetricReport {
    let mut report = MetricReport::new(metric.name());
    report.sample_count = Some(samples.len());
    report.reference_sample_count = reference.map(SampleSet::len);
    report.metadata.insert("subset_seed".into(), plan.seed.to_string());
    report.metadata.insert("max_subsets".into(), plan.max_subsets.to_string());
    report.values = values;
    report.aggregate();
    if metric == MarginalMetric::Kl {
        for agg in &report.aggregates {
            report.scalars.insert(format!("mean_per_mode/{}", agg.subset_size), agg.mean / agg.subset_size as f64);
        }
    }
    if metric == MarginalMetric::Ursell {
        for &size in &plan.sizes {
            let (x, y): (Vec<f64>, Vec<f64>) =
                report.values.iter().filter(|v| v.modes.len() == size).filter_map(|v| Some((v.ideal?, v.value))).unzip();
            match pearson_bootstrap(&x, &y, DEFAULT_RESAMPLES, seed::derive_seed(plan.seed, "pearson")) {
                Ok(c) => {
                    report.scalars.insert(format!("pearson_r/{size}"), c.r);
                    report.scalars.insert(format!("pearson_std_dev/{size}"), c.std_dev);
                }
                Err(e) => {
                    report.metadata.insert(format!("pearson/{size}"), e.to_string());
                }
            }
        }
    }
    report
}

/// Click-number histogram, empirical and theoretical central moments (up to
/// `order`) and the Gaussian fit built from the theoretical mean and variance.
pub fn click_report<O: MarginalOracle + ?Sized>(samples: &SampleSet, oracle: &O, order: usize) -> Result<MetricReport> {
    let n = oracle.n_modes();
    let mut report = MetricReport::new("clicks");
    report.sample_count = Some(samples.len());
    let hist = click_histogram(samples);
    let total = samples.len() as f64;
    report.series.insert("histogram".into(), hist.iter().map(|&c| c as f64 / total).collect());
    let theory = click_moments_theoretical(oracle, order)?;
    let empirical = click_moments_empirical(samples, order)?;
    for (i, (t, e)) in theory.iter().zip(&empirical).enumerate() {
        report.scalars.insert(format!("theoretical_mu{}", i + 1), *t);
        report.scalars.insert(format!("empirical_mu{}", i + 1), *e);
    }
    if theory.len() >= 2 {
        match fit_click_gaussian(theory[0], theory[1], n) {
            Ok(fit) => {
                report.series.insert("gaussian_fit".into(), fit.distribution(n));
                report.scalars.insert("fit_a".into(), fit.a);
                report.scalars.insert("fit_b".into(), fit.b);
                report.scalars.insert("fit_c".into(), fit.c);
            }
            Err(e) => {
                report.metadata.insert("gaussian_fit".into(), e.to_string());
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompareOptions {
    /// Keep only samples with exactly this many clicks (counted after the
    /// prefix restriction).
    pub clicks: Option<usize>,
    /// Marginalise onto modes `0..prefix`.
    pub prefix: Option<usize>,
    /// Use at most this many samples per set, taken in file order.
    pub max_samples: usize,
    /// Fewer matching samples than this is a shortfall error.
    pub min_samples: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            clicks: None,
            prefix: None,
            max_samples: 1000,
            min_samples: 100,
        }
    }
}

fn select(samples: &SampleSet, options: &CompareOptions, label: &str) -> Result<SampleSet> {
    let view = match options.prefix {
        Some(m) => samples.prefix_modes(m)?,
        None => samples.clone(),
    };
    let rows: Vec<usize> = view
        .rows()
        .enumerate()
        .filter(|(_, r)| options.clicks.is_none_or(|c| r.clicks() == c))
        .map(|(i, _)| i)
        .take(options.max_samples)
        .collect();
    if rows.len() < options.min_samples.max(1) {
        return Err(Error::Shortfall(format!(
            "{label}: {} matching samples{}, need at least {}",
            rows.len(),
            options.clicks.map(|c| format!(" with {c} clicks")).unwrap_or_default(),
            options.min_samples.max(1)
        )));
    }
    Ok(view.select(&rows))
}

/// Cross-entropy of two sample sets under the ideal distribution, their
/// difference `ΔXE = XE(mockup) - XE(experiment)` and the HOG rate.
pub fn compare_xe(
    state: &GaussianState,
    experiment: &SampleSet,
    mockup: &SampleSet,
    options: &CompareOptions,
    probability: &ProbabilityOptions,
) -> Result<MetricReport> {
    let state = match options.prefix {
        Some(m) => state.reduce(&(0..m.min(state.n_modes())).collect::<Vec<_>>())?,
        None => state.clone(),
    };
    for s in [experiment, mockup] {
        if s.n_modes() != state.n_modes() && options.prefix.is_none() {
            return Err(Error::Dimension(format!("{}-mode samples for a {}-mode state", s.n_modes(), state.n_modes())));
        }
    }
    let exp = select(experiment, options, "experiment")?;
    let mock = select(mockup, options, "mockup")?;
    let mut series = BTreeMap::new();
    let mut estimate = |set: &SampleSet, name: &str| -> Result<Estimate> {
        let mut logs = Vec::with_capacity(set.len());
        let est = xe_estimate(set, |row| {
            let p = bitstring_probability(&state, &row.to_pattern(), probability)?;
            let lp = if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
            logs.push(lp);
            Ok(lp)
        })?;
        series.insert(format!("log_prob/{name}"), logs);
        Ok(est)
    };
    let xe_e = estimate(&exp, "experiment")?;
    let xe_m = estimate(&mock, "mockup")?;
    let delta = xe_m.minus(&xe_e);
    let n = exp.len().min(mock.len());

    let mut report = MetricReport::new("xe");
    report.sample_count = Some(exp.len());
    report.reference_sample_count = Some(mock.len());
    report.series = series;
    for (key, value) in [
        ("xe_experiment", xe_e.mean),
        ("xe_experiment_se", xe_e.standard_error),
        ("xe_mockup", xe_m.mean),
        ("xe_mockup_se", xe_m.standard_error),
        ("delta_xe", delta.mean),
        ("delta_xe_se", delta.standard_error),
        ("hog_rate", hog_rate(xe_e.mean, xe_m.mean, n)),
    ] {
        report.scalars.insert(key.into(), value);
    }
    report.metadata.insert("selection".into(), "first matching samples in file order".into());
    if let Some(c) = options.clicks {
        report.metadata.insert("clicks".into(), c.to_string());
    }
    if let Some(m) = options.prefix {
        report.metadata.insert("prefix_modes".into(), m.to_string());
    }
    Ok(report)
}
