//! Command-line surface and the per-verb executors shared with the suite runner.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tfnn_core::builders::{
    build_deep_narrow, build_functional_net, build_lcs_shallow, build_shallow_universal, BuildReport,
    FunctionalOptions, ShallowOptions,
};
use tfnn_core::domain::{linspace, sup_seminorm, FunctionClassV, MemberFamily};
use tfnn_core::features::{check_injectivity, make_coordinate_family, make_direction_family};
use tfnn_core::kst::{build_ostrand_deep_narrow, features_for_space, fit_outer_functions, FeatureMode};
use tfnn_core::{
    fit_univariate, Activation, Feature, FeatureVectorMap, Metric, Network, ProductSpace, SampledCompactSet,
    ShallowTfnn, Strategy,
};

use crate::targets::{parse_rows, target_values};

#[derive(Debug, Clone, Parser)]
#[command(name = "tfnn", version, about = "Build, evaluate and verify topological feedforward networks")]
pub struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Default grid density per axis.
    #[arg(long, global = true, default_value_t = 33)]
    pub samples: usize,
    /// Root for relative output paths.
    #[arg(long, global = true, env = "TFNN_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit a univariate ridge expansion.
    FitUnivariate(FitUnivariateArgs),
    /// Shallow network over a feature family.
    BuildShallow(ShallowArgs),
    /// Shallow network over exponential features of base functionals.
    BuildLcs(LcsArgs),
    /// Network over point evaluations for a functional on a function class.
    BuildFunctional(FunctionalArgs),
    /// Deep narrow network of width at most n+m+2.
    BuildDeepNarrow(DeepNarrowArgs),
    /// Sum-form inner features for a product space.
    KstFeatures(KstArgs),
    /// Deep narrow network over sum-form features.
    BuildOstrand(OstrandArgs),
    /// Evaluate a saved network on a point set.
    Eval(EvalArgs),
    /// Re-measure a saved network against a target.
    Verify(VerifyArgs),
    /// Run a suite of experiments from a JSON config.
    Suite(SuiteArgs),
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::FitUnivariate(_) => "fit-univariate",
            Command::BuildShallow(_) => "build-shallow",
            Command::BuildLcs(_) => "build-lcs",
            Command::BuildFunctional(_) => "build-functional",
            Command::BuildDeepNarrow(_) => "build-deep-narrow",
            Command::KstFeatures(_) => "kst-features",
            Command::BuildOstrand(_) => "build-ostrand",
            Command::Eval(_) => "eval",
            Command::Verify(_) => "verify",
            Command::Suite(_) => "suite",
        }
    }

    pub fn outputs(&self) -> Option<&OutputArgs> {
        match self {
            Command::FitUnivariate(a) => Some(&a.output),
            Command::BuildShallow(a) => Some(&a.output),
            Command::BuildLcs(a) => Some(&a.output),
            Command::BuildFunctional(a) => Some(&a.output),
            Command::BuildDeepNarrow(a) => Some(&a.output),
            Command::KstFeatures(a) => Some(&a.output),
            Command::BuildOstrand(a) => Some(&a.output),
            Command::Eval(a) => Some(&a.output),
            Command::Verify(_) | Command::Suite(_) => None,
        }
    }
}

/// Point set: a file, or a grid on a box.
#[derive(Debug, Clone, Args)]
pub struct SetArgs {
    /// Point-set file (header `# metric=... mesh=...`, one point per line).
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Box bounds `lo,hi` shared by every axis of the default grid.
    #[arg(long = "box", default_value = "0,1", allow_hyphen_values = true)]
    pub bounds: String,
    /// Dimension of the default grid.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Metric of the default grid.
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Main artifact path (relative paths are under --out-dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Build report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to save the point set used.
    #[arg(long)]
    pub set_out: Option<PathBuf>,
    /// Where to save the network, when it is not the main artifact.
    #[arg(long)]
    pub net_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitUnivariateArgs {
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    /// Values of u on an equispaced grid of the interval, one per line.
    #[arg(long, conflicts_with = "target")]
    pub target_file: Option<PathBuf>,
    /// Built-in univariate target sampled at --samples points.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, default_values_t = [-1.0, 1.0])]
    pub interval: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub terms: usize,
    #[arg(long, default_value = "nested")]
    pub strategy: String,
    /// Tolerance; the run is flagged when the fit misses it.
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ShallowArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// `coords`, `diagonals`, or `directions:a,b;c,d;...`.
    #[arg(long, default_value = "coords")]
    pub family: String,
    #[arg(long, default_value = "nested")]
    pub strategy: String,
    #[arg(long, default_value_t = 257)]
    pub knot_cap: usize,
    #[arg(long, default_value_t = 256)]
    pub term_cap: usize,
    #[command(flatten)]
    pub set: SetArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LcsArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Base functionals, in the same syntax as --family.
    #[arg(long, default_value = "coords")]
    pub base: String,
    /// Comma-separated scales of the exponential dictionary.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub scales: String,
    /// Use only the exponential dictionary.
    #[arg(long)]
    pub no_base: bool,
    #[command(flatten)]
    pub set: SetArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FunctionalArgs {
    #[arg(long, default_value = "square_integral")]
    pub target: String,
    /// Member family: linear, sine, cosine or exp.
    #[arg(long, default_value = "sine")]
    pub class: String,
    /// Parameter range `lo,hi`.
    #[arg(long, default_value = "0,2", allow_hyphen_values = true)]
    pub params: String,
    #[arg(long, default_value_t = 41)]
    pub members: usize,
    #[arg(long, default_value_t = 65)]
    pub t_points: usize,
    #[arg(long, default_value_t = 9)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub moments: usize,
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DeepNarrowArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[command(flatten)]
    pub set: SetArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct KstArgs {
    /// `cube:d`, `finite:n1,n2,...` or an `x`-separated factor list.
    #[arg(long, default_value = "cube:2")]
    pub space: String,
    /// `finite`, `sprecher:γ,depth` or `pl:seed` (default `pl:<seed>`).
    #[arg(long)]
    pub mode: Option<String>,
    /// Points per interval axis (default --samples).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Also fit outer functions for this target and report the residual.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub knots: usize,
    /// Tolerance on the outer-fit residual.
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OstrandArgs {
    #[arg(long, default_value = "cube:2")]
    pub space: String,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    /// Points per interval axis (default --samples).
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub points: PathBuf,
    /// Report the sup error against this target.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Tolerance; the run is flagged when the error exceeds it.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SuiteArgs {
    /// Suite config (JSON); the shipped default suite when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV file name under --out-dir.
    #[arg(long, default_value = "suite.csv")]
    pub csv: PathBuf,
}

/// Settings shared by every verb.
#[derive(Debug, Clone, PartialEq)]
pub struct Globals {
    pub seed: u64,
    pub samples: usize,
    pub out_dir: PathBuf,
}

impl Globals {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}

/// Numbers reported for one run, in suite-row order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stats {
    pub n: usize,
    pub m: usize,
    pub big_m: Option<usize>,
    pub width: usize,
    pub depth: usize,
    pub term_count: usize,
    pub sup_error: Option<f64>,
    pub eps: Option<f64>,
    pub budget_flag: bool,
}

impl Stats {
    fn from_report(r: &BuildReport) -> Self {
        Self {
            n: r.n,
            m: r.m,
            big_m: r.big_m,
            width: r.width,
            depth: r.depth,
            term_count: r.term_count,
            sup_error: Some(r.achieved_error),
            eps: Some(r.requested_eps),
            budget_flag: r.budget_exceeded,
        }
    }
}

/// Everything a verb produces; writing is left to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stats: Stats,
    pub network: Option<Network>,
    pub report: Option<BuildReport>,
    pub set: Option<SampledCompactSet>,
    /// Default file name and contents of the main artifact.
    pub artifact: Option<(&'static str, String)>,
    pub summary: String,
}

impl Outcome {
    fn build(net: Network, report: BuildReport, set: SampledCompactSet) -> Self {
        let stats = Stats::from_report(&report);
        Self {
            summary: summary(&stats),
            artifact: Some(("net.json", net.to_json())),
            stats,
            network: Some(net),
            report: Some(report),
            set: Some(set),
        }
    }
}

fn summary(s: &Stats) -> String {
    let err = s.sup_error.map_or("-".to_string(), |e| format!("{e:e}"));
    format!(
        "sup_error={err} width={} depth={} terms={} flag={}",
        s.width, s.depth, s.term_count, s.budget_flag
    )
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_activation(s: &str) -> Result<Activation> {
    s.parse().with_context(|| format!("activation `{s}`"))
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let v = parse_list(s, what)?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => bail!("{what} `{s}` must be two numbers `lo,hi`"),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("{what}: bad number `{}`", t.trim())))
        .collect()
}

fn load_set(path: &Path) -> Result<SampledCompactSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SampledCompactSet::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_network(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Network::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn make_set(args: &SetArgs, g: &Globals) -> Result<SampledCompactSet> {
    if let Some(p) = &args.points {
        return load_set(p);
    }
    let (lo, hi) = parse_pair(&args.bounds, "box")?;
    let metric: Metric = args.metric.parse()?;
    Ok(SampledCompactSet::grid(lo, hi, g.samples, args.dim, metric)?)
}

/// `coords`, `diagonals` (all `e_i ± e_j`), or `directions:a,b;c,d;...`.
pub fn parse_family(spec: &str, d: usize) -> Result<Vec<Feature>> {
    if spec == "coords" {
        return Ok(make_coordinate_family(d));
    }
    let dirs: Vec<Vec<f64>> = if spec == "diagonals" {
        if d < 2 {
            return Ok(make_coordinate_family(d));
        }
        let mut out = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; d];
                    v[i] = 1.0;
                    v[j] = s;
                    out.push(v);
                }
            }
        }
        out
    } else if let Some(list) = spec.strip_prefix("directions:") {
        list.split(';').map(|v| parse_list(v, "direction")).collect::<Result<_>>()?
    } else {
        bail!("unknown family `{spec}`");
    };
    Ok(make_direction_family(d, &dirs)?)
}

fn parse_mode(mode: &Option<String>, seed: u64) -> Result<FeatureMode> {
    match mode {
        Some(m) => Ok(m.parse()?),
        None => Ok(FeatureMode::MonotonePl { seed }),
    }
}

fn shallow_options(g: &Globals, strategy: &str) -> Result<ShallowOptions> {
    Ok(ShallowOptions {
        strategy: strategy.parse::<Strategy>()?,
        seed: g.seed,
        ..ShallowOptions::default()
    })
}

fn distinct_features(net: &Network) -> usize {
    let features = match net {
        Network::Shallow(s) => &s.features,
        Network::Deep(d) => &d.feature_layer.features,
    };
    let mut seen: Vec<&Feature> = Vec::new();
    for f in features {
        if !seen.contains(&f) {
            seen.push(f);
        }
    }
    seen.len()
}

/// Runs one verb. `Suite` is handled by [`crate::suite::run_suite`].
pub fn execute(cmd: &Command, g: &Globals) -> Result<Outcome> {
    match cmd {
        Command::FitUnivariate(a) => fit_univariate_cmd(a, g),
        Command::BuildShallow(a) => {
            let set = make_set(&a.set, g)?;
            let targets = target_values(&a.target, &set)?;
            let family = parse_family(&a.family, set.arity())?;
            let opts = ShallowOptions {
                knot_cap: a.knot_cap,
                term_cap: a.term_cap,
                ..shallow_options(g, &a.strategy)?
            };
            let act = parse_activation(&a.activation)?;
            let (net, report) = build_shallow_universal(&targets, &set, &family, &act, a.eps, &opts)?;
            Ok(Outcome::build(net.into(), report, set))
        }
        Command::BuildLcs(a) => {
            let set = make_set(&a.set, g)?;
            let targets = target_values(&a.target, &set)?;
            let base = parse_family(&a.base, set.arity())?;
            let scales = parse_list(&a.scales, "scales")?;
            let act = parse_activation(&a.activation)?;
            let opts = shallow_options(g, "nested")?;
            let (net, report) = build_lcs_shallow(&targets, &set, &base, &scales, !a.no_base, &act, a.eps, &opts)?;
            Ok(Outcome::build(net.into(), report, set))
        }
        Command::BuildFunctional(a) => {
            let family: MemberFamily = a.class.parse()?;
            let range = parse_pair(&a.params, "params")?;
            let class = FunctionClassV::on_unit_interval(family, range, a.t_points)?;
            let set = class.sample(a.members)?;
            let targets: Vec<f64> = target_values(&a.target, &set)?
                .into_iter()
                .map(|row| match row[..] {
                    [v] => Ok(v),
                    _ => bail!("functional target `{}` must be scalar", a.target),
                })
                .collect::<Result<_>>()?;
            let act = parse_activation(&a.activation)?;
            let opts = FunctionalOptions {
                shallow: shallow_options(g, "nested")?,
                family: None,
                moments: a.moments,
            };
            let (net, report) = build_functional_net(&targets, &class, &set, &act, a.eps, a.nodes, &opts)?;
            Ok(Outcome::build(net.into(), report, set))
        }
        Command::BuildDeepNarrow(a) => {
            let set = make_set(&a.set, g)?;
            let targets = target_values(&a.target, &set)?;
            let act = parse_activation(&a.activation)?;
            let map = FeatureVectorMap::identity(set.arity());
            let (net, report) = build_deep_narrow(&targets, &set, &map, &act, a.eps, g.seed)?;
            Ok(Outcome::build(net.into(), report, set))
        }
        Command::KstFeatures(a) => kst_features_cmd(a, g),
        Command::BuildOstrand(a) => {
            let space: ProductSpace = a.space.parse()?;
            let set = space.grid(a.grid.unwrap_or(g.samples))?;
            let targets = target_values(&a.target, &set)?;
            let act = parse_activation(&a.activation)?;
            let mode = parse_mode(&a.mode, g.seed)?;
            let (net, report, _) = build_ostrand_deep_narrow(&targets, &set, &space, &act, a.eps, mode, g.seed)?;
            Ok(Outcome::build(net.into(), report, set))
        }
        Command::Eval(a) => eval_cmd(a),
        Command::Verify(a) => {
            let (err, width, depth) = verify_net(&a.net, &a.points, &a.target)?;
            let net = load_network(&a.net)?;
            let stats = Stats {
                n: distinct_features(&net),
                m: net.outputs(),
                width,
                depth,
                term_count: width,
                sup_error: Some(err),
                eps: a.eps,
                budget_flag: a.eps.is_some_and(|e| err > e),
                ..Stats::default()
            };
            Ok(Outcome {
                summary: summary(&stats),
                stats,
                network: None,
                report: None,
                set: None,
                artifact: None,
            })
        }
        Command::Suite(_) => bail!("`suite` cannot be nested inside a suite"),
    }
}

/// Re-measures a saved network against a target on a saved set, from the
/// files alone. Returns `(sup_error, width, depth)`.
pub fn verify_net(net_file: &Path, set_file: &Path, target_name: &str) -> Result<(f64, usize, usize)> {
    let net = load_network(net_file)?;
    let set = load_set(set_file)?;
    let targets = target_values(target_name, &set)?;
    if targets.first().map_or(0, Vec::len) != net.outputs() {
        return Err(tfnn_core::Error::ShapeMismatch(format!(
            "network has {} outputs, target `{target_name}` has {}",
            net.outputs(),
            targets.first().map_or(0, Vec::len)
        ))
        .into());
    }
    let values = net.eval_all(set.points())?;
    let err = sup_seminorm(&values, &targets)?;
    Ok((err, net.width(), net.depth()))
}

fn fit_univariate_cmd(a: &FitUnivariateArgs, g: &Globals) -> Result<Outcome> {
    let (lo, hi) = (a.interval[0], a.interval[1]);
    let (grid, values) = match (&a.target_file, &a.target) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let values: Vec<f64> = parse_rows(&text)?.into_iter().flatten().collect();
            (linspace(lo, hi, values.len()), values)
        }
        (None, Some(name)) => {
            let grid = linspace(lo, hi, g.samples);
            let set = grid_set(&grid)?;
            let values = target_values(name, &set)?.concat();
            (grid, values)
        }
        (None, None) => bail!("fit-univariate needs --target-file or --target"),
    };
    let act = parse_activation(&a.activation)?;
    let strategy: Strategy = a.strategy.parse()?;
    let ridge = fit_univariate(&grid, &values, &act, a.terms, strategy, g.seed)?;
    let k = ridge.terms.len();
    let net = ShallowTfnn::new(
        vec![Feature::coordinate(0); k],
        ridge.terms.iter().map(|t| t.w).collect(),
        ridge.terms.iter().map(|t| t.theta).collect(),
        vec![ridge.terms.iter().map(|t| t.c).collect()],
        vec![0.0],
        act,
    )?;
    let set = grid_set(&grid)?;
    let fitted = net.eval_all(set.points())?;
    let reference: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let err = sup_seminorm(&fitted, &reference)?;
    let stats = Stats {
        n: 1,
        m: 1,
        width: k,
        depth: 0,
        term_count: k,
        sup_error: Some(err),
        eps: a.eps,
        budget_flag: a.eps.is_some_and(|e| err > e),
        ..Stats::default()
    };
    let json = serde_json::to_string_pretty(&ridge).context("serialising ridge expansion")?;
    Ok(Outcome {
        summary: summary(&stats),
        stats,
        network: Some(net.into()),
        report: None,
        set: Some(set),
        artifact: Some(("ridge.json", json)),
    })
}

fn grid_set(grid: &[f64]) -> Result<SampledCompactSet> {
    let mesh = if grid.len() > 1 {
        (grid[grid.len() - 1] - grid[0]).abs() / (grid.len() - 1) as f64 / 2.0
    } else {
        0.0
    };
    Ok(SampledCompactSet::new(
        grid.iter().map(|&t| vec![t]).collect(),
        Metric::Euclidean,
        mesh,
    )?)
}

fn kst_features_cmd(a: &KstArgs, g: &Globals) -> Result<Outcome> {
    let space: ProductSpace = a.space.parse()?;
    let set = space.grid(a.grid.unwrap_or(g.samples))?;
    let mode = parse_mode(&a.mode, g.seed)?;
    let features = features_for_space(&space, mode, &set)?;
    let inj = check_injectivity(&features.map(), &set)?;
    let mut stats = Stats {
        n: features.len(),
        m: 0,
        big_m: Some(features.total_dim()),
        eps: a.eps,
        budget_flag: !inj.injective,
        ..Stats::default()
    };
    let mut summary = format!(
        "features={} M={} injective={} mode={}",
        features.len(),
        features.total_dim(),
        inj.injective,
        features.mode
    );
    if let Some(name) = &a.target {
        let targets = target_values(name, &set)?;
        let column: Vec<f64> = targets
            .iter()
            .map(|row| match row[..] {
                [v] => Ok(v),
                _ => bail!("outer fit needs a scalar target, `{name}` is not"),
            })
            .collect::<Result<_>>()?;
        let fit = fit_outer_functions(&column, &features, &set, a.knots)?;
        stats.m = 1;
        stats.sup_error = Some(fit.residual);
        stats.budget_flag |= a.eps.is_some_and(|e| fit.residual > e);
        summary.push_str(&format!(" outer_residual={:e}", fit.residual));
    }
    Ok(Outcome {
        summary,
        stats,
        network: None,
        report: None,
        set: Some(set),
        artifact: Some(("features.json", features.to_json())),
    })
}

fn eval_cmd(a: &EvalArgs) -> Result<Outcome> {
    let net = load_network(&a.net)?;
    let set = load_set(&a.points)?;
    let values = net.eval_all(set.points())?;
    let mut csv = String::new();
    for row in &values {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let sup_error = match &a.target {
        Some(name) => {
            let targets = target_values(name, &set)?;
            Some(sup_seminorm(&values, &targets)?)
        }
        None => None,
    };
    let stats = Stats {
        n: distinct_features(&net),
        m: net.outputs(),
        width: net.width(),
        depth: net.depth(),
        term_count: net.width(),
        sup_error,
        ..Stats::default()
    };
    Ok(Outcome {
        summary: summary(&stats),
        stats,
        network: None,
        report: None,
        set: None,
        artifact: Some(("values.csv", csv)),
    })
}

/// Writes the artifacts of a single CLI invocation.
pub fn write_outputs(outcome: &Outcome, out: &OutputArgs, g: &Globals) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |path: PathBuf, text: &str| -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    if let Some((name, text)) = &outcome.artifact {
        let path = out.out.clone().unwrap_or_else(|| PathBuf::from(name));
        put(g.resolve(&path), text)?;
    }
    if let (Some(path), Some(report)) = (&out.report, &outcome.report) {
        put(g.resolve(path), &report.to_json())?;
    }
    if let (Some(path), Some(set)) = (&out.set_out, &outcome.set) {
        put(g.resolve(path), &set.to_text())?;
    }
    if let (Some(path), Some(net)) = (&out.net_out, &outcome.network) {
        put(g.resolve(path), &net.to_json())?;
    }
    Ok(written)
}
