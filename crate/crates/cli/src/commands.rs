use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use gbsmock::gaussian_state::{build_output_covariance, GaussianState, RandomInstance};
use gbsmock::io::{self, ReportFormat, UstcImport};
use gbsmock::probability::{click_probabilities, spin_moments, ProbabilityOptions, StateOracle};
use gbsmock::samplers::{
    decorrelate, fit_tap_with, gibbs_sample, greedy_sample, greedy_sample_iid, sample_thermal, sample_uniform, GibbsConfig,
    GreedyConfig, OnsagerTerm, SampleSet,
};
use gbsmock::seed::derive_seed;
use gbsmock::statistics::{
    assemble_marginal_report, check_widths, click_report, compare_xe, subset_value, CompareOptions, MarginalMetric, MetricReport,
    SubsetPlan,
};
use gbsmock::subsets::binomial;
use gbsmock::GbsInstance;
use log::{info, warn};
use rayon::prelude::*;

use crate::{AnalyzeArgs, BuildArgs, Cli, Command, CompareArgs, Format, ImportArgs, Method, Metric, Onsager, ProbabilityArgs, SampleArgs};

pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

/// Mean `|2p - 1|` over modes above which TAP is flagged: its fields become
/// unreliable when one-mode marginals sit far from 1/2.
const TAP_BIAS_WARNING: f64 = 0.3;

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Build(args) => build(args),
        Command::Sample(args) => sample(args),
        Command::Analyze(args) => analyze(args),
        Command::Compare(args) => compare(args),
        Command::ImportUstc(args) => import(args),
    }
}

fn configure_threads() -> Result<()> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = match std::env::var("GBSMOCK_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n.min(available),
            _ => return usage(format!("GBSMOCK_THREADS must be a positive integer, got {v:?}")),
        },
        Err(_) => available,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("starting worker threads")?;
    info!("using {threads} worker threads");
    Ok(())
}

impl ProbabilityArgs {
    fn options(&self) -> ProbabilityOptions {
        ProbabilityOptions {
            click_budget: self.click_budget,
            strict: self.strict,
            max_table_modes: self.max_table_modes,
        }
    }
}

fn load_state(path: &Path) -> Result<(GbsInstance, GaussianState)> {
    let instance = io::load_instance(path).with_context(|| format!("loading instance {}", path.display()))?;
    let state = build_output_covariance(&instance).context("building the output covariance")?;
    Ok((instance, state))
}

fn load_samples(path: &Path) -> Result<SampleSet> {
    Ok(io::load_samples(path).with_context(|| format!("loading samples {}", path.display()))?)
}

fn report_format(f: Format) -> ReportFormat {
    match f {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let instance = match &args.instance {
        Some(path) => io::load_instance(path).with_context(|| format!("loading instance {}", path.display()))?,
        None => {
            let inputs = args.inputs.unwrap_or(args.modes + args.modes % 2);
            if args.modes == 0 || inputs == 0 || inputs % 2 != 0 {
                return usage("--modes must be positive and --inputs positive and even");
            }
            if !(args.squeezing_min >= 0.0 && args.squeezing_min <= args.squeezing_max) {
                return usage("need 0 <= --squeezing-min <= --squeezing-max");
            }
            if !(args.transmission > 0.0 && args.transmission <= 1.0) {
                return usage("--transmission must be in (0, 1]");
            }
            RandomInstance::new(args.modes, inputs)
                .squeezing(args.squeezing_min, args.squeezing_max)
                .transmission(args.transmission)
                .generate(args.seed)?
        }
    };
    let state = build_output_covariance(&instance)?;
    let clicks = click_probabilities(&state)?;
    let summary = serde_json::json!({
        "n_output": instance.n_output(),
        "n_input": instance.n_input(),
        "digest": io::instance_digest(&instance),
        "max_singular_value": instance.max_singular_value(),
        "mean_clicks": clicks.iter().sum::<f64>(),
        "vacuum_probability": state.vacuum_probability(),
    });
    if let Some(out) = &args.output {
        io::save_instance(&instance, out).with_context(|| format!("writing {}", out.display()))?;
        info!("wrote instance to {}", out.display());
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// Splits `total` into `chains` nearly equal parts, larger parts first.
fn split(total: usize, chains: usize) -> Vec<usize> {
    (0..chains).map(|c| total / chains + usize::from(c < total % chains)).filter(|&n| n > 0).collect()
}

fn sample(args: SampleArgs) -> Result<()> {
    if args.samples == 0 {
        return usage("--samples must be at least 1");
    }
    if args.chains == 0 {
        return usage("--chains must be at least 1");
    }
    match (args.method, args.order) {
        (Method::Greedy, None) => return usage("--order is required for --method greedy"),
        (Method::Greedy, Some(0)) => return usage("--order must be at least 1"),
        (Method::Greedy, Some(_)) => {}
        (_, Some(_)) => return usage("--order only applies to --method greedy"),
        _ => {}
    }
    if args.iid.is_some() && args.method != Method::Greedy {
        return usage("--iid only applies to --method greedy");
    }
    if args.method == Method::Tap && args.thinning == 0 {
        return usage("--thinning must be at least 1");
    }
    if let Some(f) = args.keep_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return usage("--keep-fraction must be in (0, 1]");
        }
    }

    let (instance, state) = load_state(&args.instance)?;
    let n = state.n_modes();
    let oracle = StateOracle {
        state: &state,
        options: args.probability.options(),
    };
    let method_name = format!("{:?}", args.method).to_lowercase();
    let chain_seed = |c: usize| derive_seed(args.seed, &format!("sample/{method_name}/chain/{c}"));
    let shares = split(args.samples, args.chains);

    let parts: Vec<SampleSet> = match args.method {
        Method::Uniform => shares.par_iter().enumerate().map(|(c, &l)| sample_uniform(n, l, chain_seed(c))).collect(),
        Method::Thermal => {
            let probs = click_probabilities(&state)?;
            shares
                .par_iter()
                .enumerate()
                .map(|(c, &l)| sample_thermal(&probs, l, chain_seed(c)))
                .collect::<gbsmock::Result<_>>()?
        }
        Method::Tap => {
            let probs = click_probabilities(&state)?;
            let bias = probs.iter().map(|p| (2.0 * p - 1.0).abs()).sum::<f64>() / n as f64;
            if bias > TAP_BIAS_WARNING {
                warn!(
                    "one-mode marginals are far from 1/2 (mean |2p - 1| = {bias:.2}); the TAP mean-field fit degrades in this low-power regime"
                );
            }
            let moments = spin_moments(&oracle)?;
            let onsager = match args.onsager {
                Onsager::Weighted => OnsagerTerm::MagnetizationWeighted,
                Onsager::Unweighted => OnsagerTerm::Unweighted,
            };
            let model = fit_tap_with(&moments.means, &moments.covariance, onsager)?;
            shares
                .par_iter()
                .enumerate()
                .map(|(c, &l)| {
                    gibbs_sample(
                        &model,
                        &GibbsConfig {
                            samples: l,
                            burn_in: args.burn_in,
                            thinning: args.thinning,
                            seed: chain_seed(c),
                        },
                    )
                })
                .collect::<gbsmock::Result<_>>()?
        }
        Method::Greedy => {
            let k = args.order.unwrap_or_default();
            if k > n {
                return usage(format!("--order {k} exceeds the {n} modes"));
            }
            let updates: u128 = (k..n).map(|j| binomial(j, k - 1)).sum::<u128>() * 2 * args.samples as u128;
            eprintln!(
                "greedy order {k}: cost O(N^k 2^k L) = {n}^{k} * {} * {} ~ {:.2e}; {} subset-pattern updates after the first {k} columns",
                1u64 << k,
                args.samples,
                (n as f64).powi(k as i32) * (1u64 << k) as f64 * args.samples as f64,
                updates
            );
            shares
                .par_iter()
                .enumerate()
                .map(|(c, &l)| {
                    let config = GreedyConfig {
                        order: k,
                        samples: l,
                        seed: chain_seed(c),
                    };
                    match args.iid {
                        Some(run) => greedy_sample_iid(&oracle, &config, run),
                        None => greedy_sample(&oracle, &config),
                    }
                })
                .collect::<gbsmock::Result<_>>()?
        }
    };

    let mut samples = parts[0].clone();
    for part in &parts[1..] {
        samples.extend(part)?;
    }
    if let Some(f) = args.keep_fraction {
        samples = decorrelate(&samples, f, derive_seed(args.seed, "decorrelate"))?;
    }
    let meta = &mut samples.metadata;
    meta.seed = Some(args.seed);
    meta.instance_digest = Some(io::instance_digest(&instance));
    meta.extra.insert("command".into(), std::env::args().collect::<Vec<_>>().join(" "));
    meta.extra.insert("chains".into(), args.chains.to_string());
    if args.method == Method::Tap {
        meta.extra.insert("onsager".into(), format!("{:?}", args.onsager).to_lowercase());
    }
    if let Some(f) = args.keep_fraction {
        meta.extra.insert("keep_fraction".into(), f.to_string());
    }
    io::save_samples(&samples, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    eprintln!("wrote {} samples of {n} modes to {}", samples.len(), args.output.display());
    Ok(())
}

fn parse_sizes(spec: &str) -> std::result::Result<Vec<usize>, String> {
    let bad = || format!("invalid --sizes {spec:?}; use a-b or a,b,c");
    let sizes: Vec<usize> = if let Some((a, b)) = spec.split_once('-') {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<std::result::Result<_, _>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(bad());
    }
    Ok(sizes)
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let sizes = match &args.sizes {
        Some(s) => parse_sizes(s).map_err(Failure::Usage)?,
        None => (1..=14).collect(),
    };
    if args.subsets == 0 {
        return usage("--subsets must be at least 1");
    }
    let (_, state) = load_state(&args.instance)?;
    let n = state.n_modes();
    let sizes = if args.sizes.is_none() {
        sizes.into_iter().filter(|&s| s <= n).collect()
    } else {
        sizes
    };
    let samples = load_samples(&args.samples)?;
    let reference = args.reference.as_deref().map(load_samples).transpose()?;
    check_widths(&samples, reference.as_ref(), n)?;
    let oracle = StateOracle {
        state: &state,
        options: args.probability.options(),
    };
    let plan = SubsetPlan {
        sizes,
        max_subsets: args.subsets,
        seed: derive_seed(args.seed, "analyze/subsets"),
    };
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let ext = match args.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };

    let mut metrics = args.metric.clone();
    metrics.dedup();
    for metric in metrics {
        let report: MetricReport = match metric {
            Metric::Clicks => click_report(&samples, &oracle, args.click_order)?,
            Metric::Tvd | Metric::Kl | Metric::Ursell => {
                let metric = match metric {
                    Metric::Tvd => MarginalMetric::Tvd,
                    Metric::Kl => MarginalMetric::Kl,
                    _ => MarginalMetric::Ursell,
                };
                let subsets = plan.subsets(n)?;
                let values = subsets
                    .par_iter()
                    .map(|modes| subset_value(metric, &samples, reference.as_ref(), &oracle, modes))
                    .collect::<gbsmock::Result<Vec<_>>>()?;
                assemble_marginal_report(metric, values, &samples, reference.as_ref(), &plan)
            }
        };
        let mut report = report;
        report.metadata.insert("instance".into(), args.instance.display().to_string());
        report.metadata.insert("samples".into(), args.samples.display().to_string());
        if let Some(r) = &args.reference {
            report.metadata.insert("reference".into(), r.display().to_string());
        }
        let path = args.out_dir.join(format!("{}.{ext}", report.metric));
        io::save_report(&report, &path, report_format(args.format)).with_context(|| format!("writing {}", path.display()))?;
        for agg in &report.aggregates {
            let mut line = format!(
                "{} k={:<2} subsets={:<5} mean={:.6} se={:.2e}",
                report.metric, agg.subset_size, agg.count, agg.mean, agg.std_error
            );
            if let (Some(r), Some(b)) = (agg.reference_mean, agg.bounds) {
                line += &format!(" reference={r:.6} delta={:.6} bounds=[{:.6}, {:.6}]", agg.mean - r, b.lower, b.upper);
            }
            println!("{line}");
        }
        for (key, value) in &report.scalars {
            println!("{} {key}={value:.6}", report.metric);
        }
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    if args.max_samples == 0 {
        return usage("--max-samples must be at least 1");
    }
    let (_, state) = load_state(&args.instance)?;
    if let Some(m) = args.prefix {
        if m == 0 || m > state.n_modes() {
            return usage(format!("--prefix must be in 1..={}", state.n_modes()));
        }
    }
    let experiment = load_samples(&args.experiment)?;
    let mockup = load_samples(&args.mockup)?;
    let options = CompareOptions {
        clicks: args.clicks,
        prefix: args.prefix,
        max_samples: args.max_samples,
        min_samples: args.min_samples,
    };
    let mut report = compare_xe(&state, &experiment, &mockup, &options, &args.probability.options())?;
    report.metadata.insert("experiment".into(), args.experiment.display().to_string());
    report.metadata.insert("mockup".into(), args.mockup.display().to_string());
    let s = &report.scalars;
    println!(
        "samples: experiment {} mockup {}",
        report.sample_count.unwrap_or(0),
        report.reference_sample_count.unwrap_or(0)
    );
    println!("xe_experiment={:.6} ± {:.6}", s["xe_experiment"], s["xe_experiment_se"]);
    println!("xe_mockup={:.6} ± {:.6}", s["xe_mockup"], s["xe_mockup_se"]);
    println!("delta_xe={:.6} ± {:.6}", s["delta_xe"], s["delta_xe_se"]);
    println!("hog_rate={:.6}", s["hog_rate"]);
    if let Some(out) = &args.output {
        io::save_report(&report, out, report_format(args.format)).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn import(args: ImportArgs) -> Result<()> {
    let instance = io::import_ustc(&UstcImport {
        real: args.real,
        imag: args.imag,
        squeezing: args.squeezing,
        transpose: args.transpose,
    })
    .map_err(|e| anyhow!(e).context("importing matrix files"))?;
    let state = build_output_covariance(&instance)?;
    let mean: f64 = click_probabilities(&state)?.iter().sum();
    io::save_instance(&instance, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    println!(
        "imported N={} K={} mean clicks {mean:.4}; check this against the published value before trusting the layout",
        instance.n_output(),
        instance.n_input()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_sizes("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_sizes("2, 5").unwrap(), vec![2, 5]);
        assert!(parse_sizes("4-1").is_err());
        assert!(parse_sizes("0").is_err());
        assert!(parse_sizes("x").is_err());
    }

    #[test]
    fn chain_split() {
        assert_eq!(split(10, 3), vec![4, 3, 3]);
        assert_eq!(split(2, 4), vec![1, 1]);
    }
}
