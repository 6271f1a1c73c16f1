//! Superposition-type inner functions and the sum features
//! `s_q(x) = Σ_p ψ_pq(x_p)`.
//!
//! Finite factors get exact mixed-radix tables; cube factors get either a
//! Köppen-corrected Sprecher function or seeded monotone piecewise-linear
//! functions. Outer functions `h_q` are fitted by the additive least-squares
//! engine, and the deep-narrow pipeline runs on the resulting features.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::builders::deep_narrow::{build_deep_narrow_with, DeepNarrowOptions};
use crate::builders::shallow::BuildReport;
use crate::domain::{image_interval_of, ProductSpace, SampledCompactSet};
use crate::error::{Error, Result};
use crate::features::{injectivity_of_images, Feature, FeatureVectorMap};
use crate::network::DeepTfnn;
use crate::piecewise::{distinct_sorted, fit_additive, BasisKind, KnotRule, PiecewiseLinear};

/// Slack allowed when an argument sits just outside `[0, 1]`.
const DOMAIN_SLACK: f64 = 1e-12;
const MAX_REDRAWS: u64 = 8;

/// One inner function `ψ_pq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerPsi {
    /// `label ↦ values[label]` on a finite factor.
    FiniteTable { values: Vec<f64> },
    /// `x ↦ weight · ψ(x + shift)` for the Sprecher function `ψ` of base
    /// `gamma` at the given depth, built for dimension `dim`.
    Sprecher {
        gamma: u32,
        depth: u32,
        dim: u32,
        shift: f64,
        weight: f64,
    },
    /// Strictly increasing piecewise-linear function on `[0, 1]`.
    MonotonePl { knots: Vec<f64>, values: Vec<f64> },
}

impl InnerPsi {
    /// `None` when `x` is outside the factor.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            InnerPsi::FiniteTable { values } => {
                let idx = x.round();
                if (x - idx).abs() > DOMAIN_SLACK || idx < 0.0 {
                    return None;
                }
                values.get(idx as usize).copied()
            }
            InnerPsi::Sprecher {
                gamma,
                depth,
                dim,
                shift,
                weight,
            } => {
                let x = unit_clamp(x)?;
                Some(weight * sprecher_psi_ext(x + shift, *gamma, *depth, *dim))
            }
            InnerPsi::MonotonePl { knots, values } => {
                let x = unit_clamp(x)?;
                let pl = PiecewiseLinear {
                    knots: knots.clone(),
                    values: values.clone(),
                    quadratic: 0.0,
                };
                Some(pl.eval(x))
            }
        }
    }
}

fn unit_clamp(x: f64) -> Option<f64> {
    if (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
        Some(x.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// How the inner functions of a feature set were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMode {
    Finite,
    Sprecher { gamma: u32, depth: u32 },
    MonotonePl { seed: u64 },
}

impl Default for FeatureMode {
    fn default() -> Self {
        FeatureMode::MonotonePl { seed: 0 }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMode::Finite => write!(f, "finite"),
            FeatureMode::Sprecher { gamma, depth } => write!(f, "sprecher:{gamma},{depth}"),
            FeatureMode::MonotonePl { seed } => write!(f, "pl:{seed}"),
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    /// `finite`, `sprecher` (defaults 10,4), `sprecher:γ,depth`, `pl` or `pl:seed`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad feature mode `{s}`"));
        match s.trim() {
            "finite" => return Ok(FeatureMode::Finite),
            "sprecher" => return Ok(FeatureMode::Sprecher { gamma: 10, depth: 4 }),
            "pl" => return Ok(FeatureMode::MonotonePl { seed: 0 }),
            _ => {}
        }
        if let Some(args) = s.trim().strip_prefix("sprecher:") {
            let (g, d) = args.split_once(',').ok_or_else(bad)?;
            return Ok(FeatureMode::Sprecher {
                gamma: g.trim().parse().map_err(|_| bad())?,
                depth: d.trim().parse().map_err(|_| bad())?,
            });
        }
        if let Some(seed) = s.trim().strip_prefix("pl:") {
            return Ok(FeatureMode::MonotonePl {
                seed: seed.trim().parse().map_err(|_| bad())?,
            });
        }
        Err(bad())
    }
}

/// The `2M+1` sum features of a product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OstrandFeatureSet {
    pub space: ProductSpace,
    pub mode: FeatureMode,
    /// `psis[p][q]`, factor `p`, feature `q`.
    pub psis: Vec<Vec<InnerPsi>>,
    pub features: Vec<Feature>,
}

impl OstrandFeatureSet {
    fn from_psis(space: ProductSpace, mode: FeatureMode, psis: Vec<Vec<InnerPsi>>) -> Self {
        let count = psis.first().map_or(0, Vec::len);
        let features = (0..count)
            .map(|q| Feature::ostrand_sum(psis.iter().map(|row| row[q].clone()).collect()))
            .collect();
        Self {
            space,
            mode,
            psis,
            features,
        }
    }

    /// `M`, the total topological dimension.
    pub fn total_dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn map(&self) -> FeatureVectorMap {
        FeatureVectorMap::new(self.features.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feature set serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("feature file: {e}")))
    }
}

/// The single exact sum feature of an all-finite product.
///
/// Label `i` of factor `p` is sent to `i · stride_p / (N − 1)` where the
/// strides are mixed-radix place values (first factor least significant) and
/// `N` is the number of points, so the sum enumerates the product injectively
/// onto `{0, 1/(N−1), …, 1}`.
pub fn ostrand_features_finite(space: &ProductSpace) -> Result<OstrandFeatureSet> {
    let mut sizes = Vec::with_capacity(space.factors.len());
    for f in &space.factors {
        match *f {
            crate::domain::Factor::Finite { labels } => sizes.push(labels),
            _ => {
                return Err(Error::InvalidArgument(
                    "finite features need every factor finite".into(),
                ))
            }
        }
    }
    let total: usize = sizes.iter().product();
    let norm = if total > 1 { (total - 1) as f64 } else { 1.0 };
    let mut stride = 1usize;
    let mut psis = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let values = (0..n).map(|i| (i * stride) as f64 / norm).collect();
        psis.push(vec![InnerPsi::FiniteTable { values }]);
        stride *= n;
    }
    let set = OstrandFeatureSet::from_psis(space.clone(), FeatureMode::Finite, psis);
    let grid = space.grid(1)?;
    verify_injective(&set, &grid)?;
    Ok(set)
}

fn verify_injective(set: &OstrandFeatureSet, grid: &SampledCompactSet) -> Result<()> {
    let images = set.map().eval_all(grid.points())?;
    let rep = injectivity_of_images(&images, grid.points());
    match rep.witness {
        None => Ok(()),
        Some((first, second)) => Err(Error::InjectivityFailure { first, second }),
    }
}

/// `β(r) = (n^r − 1)/(n − 1)`, the exponent sequence of the construction.
fn beta(r: u32, dim: u32) -> i32 {
    if dim <= 1 {
        return r as i32;
    }
    ((dim.pow(r) - 1) / (dim - 1)) as i32
}

type TableKey = (u32, u32, u32);

fn psi_table(gamma: u32, depth: u32, dim: u32) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<TableKey, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (gamma, depth, dim);
    if let Some(t) = cache.lock().expect("psi cache").get(&key) {
        return Arc::clone(t);
    }
    let table = Arc::new(build_psi_table(gamma, depth, dim));
    cache
        .lock()
        .expect("psi cache")
        .insert(key, Arc::clone(&table));
    table
}

/// Values of the corrected inner function at `j / γ^depth`, `j = 0..=γ^depth`.
fn build_psi_table(gamma: u32, depth: u32, dim: u32) -> Vec<f64> {
    let g = gamma as usize;
    let mut prev: Vec<f64> = (0..=g).map(|j| j as f64 / gamma as f64).collect();
    for k in 2..=depth {
        let n = g.pow(k);
        let step = (gamma as f64).powi(-beta(k, dim));
        let mut cur = vec![0.0; n + 1];
        for j in 0..n {
            let i = j % g;
            let q = j / g;
            cur[j] = if i < g - 1 {
                prev[q] + i as f64 * step
            } else {
                0.5 * (cur[j - 1] + prev[q + 1])
            };
        }
        cur[n] = 1.0;
        prev = cur;
    }
    if let Some(last) = prev.last_mut() {
        *last = 1.0;
    }
    prev
}

/// Sprecher inner function with Köppen's correction, for dimension 2.
///
/// Evaluated on the depth-`depth` `γ`-adic rationals and linearly
/// interpolated in between. Maps `[0, 1]` onto `[0, 1]`, nondecreasing.
pub fn sprecher_psi(x: f64, gamma: u32, depth: u32) -> f64 {
    sprecher_psi_dim(x, gamma, depth, 2)
}

/// [`sprecher_psi`] with the exponent sequence for dimension `dim`.
pub fn sprecher_psi_dim(x: f64, gamma: u32, depth: u32, dim: u32) -> f64 {
    assert!(gamma >= 2 && (1..=8).contains(&depth), "unsupported Sprecher parameters");
    let table = psi_table(gamma, depth, dim);
    let x = x.clamp(0.0, 1.0);
    let n = table.len() - 1;
    let pos = x * n as f64;
    let j = (pos.floor() as usize).min(n - 1);
    let s = pos - j as f64;
    table[j] + s * (table[j + 1] - table[j])
}

/// `ψ(x) = ⌊x⌋ + ψ(x − ⌊x⌋)` for `x ≥ 0`.
pub fn sprecher_psi_ext(x: f64, gamma: u32, depth: u32, dim: u32) -> f64 {
    let whole = x.floor();
    whole + sprecher_psi_dim(x - whole, gamma, depth, dim)
}

/// `2d+1` sum features on `[0,1]^d`, checked for injectivity on `grid`.
///
/// Sprecher mode uses `s_q(x) = Σ_p λ_p ψ(x_p + q a) / Z` with `a = 1/(γ(γ−1))`.
/// Monotone mode draws seeded strictly increasing piecewise-linear `ψ_pq`
/// and redraws with `seed + 1` up to eight times if injectivity fails.
pub fn kolmogorov_features(d: usize, mode: FeatureMode, grid: &SampledCompactSet) -> Result<OstrandFeatureSet> {
    if d < 1 {
        return Err(Error::InvalidArgument("cube dimension must be >= 1".into()));
    }
    if grid.arity() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: grid.arity(),
        });
    }
    let space = ProductSpace::cube(d);
    match mode {
        FeatureMode::Finite => Err(Error::InvalidArgument(
            "finite mode needs finite factors".into(),
        )),
        FeatureMode::Sprecher { gamma, depth } => {
            let set = OstrandFeatureSet::from_psis(space, mode, sprecher_psis(d, gamma, depth)?);
            verify_injective(&set, grid)?;
            Ok(set)
        }
        FeatureMode::MonotonePl { seed } => {
            let mut last = None;
            for attempt in 0..=MAX_REDRAWS {
                let s = seed + attempt;
                let set = OstrandFeatureSet::from_psis(
                    space.clone(),
                    FeatureMode::MonotonePl { seed: s },
                    monotone_psis(d, s),
                );
                match verify_injective(&set, grid) {
                    Ok(()) => return Ok(set),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one draw"))
        }
    }
}

fn sprecher_psis(d: usize, gamma: u32, depth: u32) -> Result<Vec<Vec<InnerPsi>>> {
    if gamma < 2 || !(1..=8).contains(&depth) {
        return Err(Error::InvalidArgument(format!(
            "Sprecher parameters gamma={gamma}, depth={depth} out of range"
        )));
    }
    let dim = d as u32;
    let g = gamma as f64;
    let a = 1.0 / (g * (g - 1.0));
    let lambda: Vec<f64> = (0..d)
        .map(|p| {
            if p == 0 {
                1.0
            } else {
                (1..=8).map(|r| g.powi(-(p as i32) * beta(r, dim))).sum()
            }
        })
        .collect();
    let z = sprecher_psi_ext(1.0 + 2.0 * d as f64 * a, gamma, depth, dim);
    Ok((0..d)
        .map(|p| {
            (0..=2 * d)
                .map(|q| InnerPsi::Sprecher {
                    gamma,
                    depth,
                    dim,
                    shift: q as f64 * a,
                    weight: lambda[p] / z,
                })
                .collect()
        })
        .collect())
}

fn monotone_psis(d: usize, seed: u64) -> Vec<Vec<InnerPsi>> {
    const KNOTS: usize = 17;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let knots: Vec<f64> = (0..KNOTS).map(|i| i as f64 / (KNOTS - 1) as f64).collect();
    (0..d)
        .map(|_| {
            (0..=2 * d)
                .map(|_| {
                    let scale: f64 = rng.gen_range(0.1..1.0);
                    let steps: Vec<f64> = (1..KNOTS).map(|_| rng.gen_range(0.5..1.5)).collect();
                    let total: f64 = steps.iter().sum();
                    let mut values = Vec::with_capacity(KNOTS);
                    let mut acc = 0.0;
                    values.push(0.0);
                    for s in &steps {
                        acc += s;
                        values.push(scale * acc / total);
                    }
                    InnerPsi::MonotonePl {
                        knots: knots.clone(),
                        values,
                    }
                })
                .collect()
        })
        .collect()
}

/// Outer function `h_q`.
pub type OuterFunction = PiecewiseLinear;

#[derive(Debug, Clone)]
pub struct OuterFit {
    pub outer: Vec<OuterFunction>,
    /// Sup error of `Σ_q h_q(s_q(x))` on the sample.
    pub residual: f64,
}

impl OuterFit {
    pub fn eval(&self, features: &OstrandFeatureSet, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (h, s) in self.outer.iter().zip(&features.features) {
            acc += h.eval(s.eval(x)?);
        }
        Ok(acc)
    }
}

/// Least-squares fit of `Σ_q h_q(s_q(x))` to `targets` on `set` with `knots`
/// equispaced knots per `h_q`; if every `s_q` takes at most `knots` distinct
/// values, knots are placed at those values instead and the fit interpolates.
pub fn fit_outer_functions(
    targets: &[f64],
    features: &OstrandFeatureSet,
    set: &SampledCompactSet,
    knots: usize,
) -> Result<OuterFit> {
    let columns = features
        .features
        .iter()
        .map(|f| f.eval_all(set.points()))
        .collect::<Result<Vec<_>>>()?;
    let few = columns.iter().all(|c| distinct_sorted(c).len() <= knots);
    let rule = if few {
        KnotRule::AtImages
    } else {
        KnotRule::Equispaced(knots)
    };
    fit_outer_functions_with(targets, &columns, set.len(), rule)
}

fn fit_outer_functions_with(targets: &[f64], columns: &[Vec<f64>], n: usize, rule: KnotRule) -> Result<OuterFit> {
    if targets.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    let intervals: Vec<(f64, f64)> = columns.iter().map(|c| image_interval_of(c, None)).collect();
    if let Some(&c) = targets.first().filter(|&&c| targets.iter().all(|&t| t == c)) {
        let outer = intervals
            .iter()
            .enumerate()
            .map(|(q, &(lo, _))| PiecewiseLinear::constant(lo, if q == 0 { c } else { 0.0 }))
            .collect();
        return Ok(OuterFit { outer, residual: 0.0 });
    }
    let fit = fit_additive(columns, &intervals, targets, rule, BasisKind::PiecewiseLinear);
    Ok(OuterFit {
        outer: fit.functions,
        residual: fit.residual,
    })
}

/// Builds sum features for `space` and runs the deep-narrow pipeline on them.
///
/// The emitted network has width at most `2M + m + 3`; the report's `n` is
/// the feature count `2M + 1` and `big_m` is `M`.
pub fn build_ostrand_deep_narrow(
    targets: &[Vec<f64>],
    set: &SampledCompactSet,
    space: &ProductSpace,
    activation: &Activation,
    eps: f64,
    mode: FeatureMode,
    seed: u64,
) -> Result<(DeepTfnn, BuildReport, OstrandFeatureSet)> {
    let features = features_for_space(space, mode, set)?;
    let opts = DeepNarrowOptions {
        seed,
        ..DeepNarrowOptions::default()
    };
    let (net, mut report) = build_deep_narrow_with(targets, set, &features.map(), activation, eps, &opts)?;
    report.big_m = Some(features.total_dim());
    let bound = 2 * features.total_dim() + report.m + 3;
    assert!(net.width() <= bound, "sum-feature deep net exceeds width {bound}");
    Ok((net, report, features))
}

/// Finite tables for all-finite spaces, cube features otherwise.
pub fn features_for_space(space: &ProductSpace, mode: FeatureMode, set: &SampledCompactSet) -> Result<OstrandFeatureSet> {
    if space.is_all_finite() {
        return ostrand_features_finite(space);
    }
    let unit = space
        .factors
        .iter()
        .all(|f| *f == crate::domain::Factor::Interval { lo: 0.0, hi: 1.0 });
    if !unit {
        return Err(Error::InvalidArgument(
            "sum features are available for all-finite products and unit cubes".into(),
        ));
    }
    let mode = if mode == FeatureMode::Finite {
        FeatureMode::default()
    } else {
        mode
    };
    kolmogorov_features(space.factors.len(), mode, set)
}
