//! Shallow universal builder: additive decomposition `g_k ≈ Σ_i u_{k,i}∘f_{k,i}`
//! followed by a ridge expansion of every `u_{k,i}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::domain::{image_interval, linspace, sup_seminorm, SampledCompactSet};
use crate::error::{Error, Result};
use crate::features::{make_exponential_dictionary, Feature};
use crate::network::ShallowTfnn;
use crate::piecewise::{fit_additive, BasisKind, KnotRule, PiecewiseLinear};
use crate::univariate::{fit_univariate, RidgeTerm, Strategy};

const CONSTANT_FLOOR: f64 = 1e-12;

/// One summand `u∘f` of a decomposition.
#[derive(Debug, Clone)]
pub struct DecompositionTerm {
    pub feature: Feature,
    pub u: PiecewiseLinear,
    pub interval: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub terms: Vec<DecompositionTerm>,
    /// Sup error of `Σ u_i∘f_i` against the target on the sample.
    pub residual: f64,
}

impl Decomposition {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.u.eval(t.feature.eval(x)?);
        }
        Ok(acc)
    }
}

/// Details of the point-evaluation substitution stage of the functional builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionReport {
    /// Indices into the domain grid of the shared evaluation nodes.
    pub nodes: Vec<usize>,
    pub delta_required: f64,
    /// Sup over the sample of `|ℓ_i(u) − Σ_j ξ_ij u(x_j)|`, per replaced functional.
    pub deltas: Vec<f64>,
    pub lipschitz: f64,
    pub operating_interval: (f64, f64),
    pub perturbation: f64,
    pub perturbation_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub requested_eps: f64,
    pub achieved_error: f64,
    pub width: usize,
    pub depth: usize,
    pub term_count: usize,
    /// Input arity of the feature map (deep-narrow builders) or feature count.
    pub n: usize,
    pub m: usize,
    /// Total topological dimension, for sum-feature builds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<usize>,
    pub budgets: BTreeMap<String, f64>,
    pub budget_exceeded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitution: Option<SubstitutionReport>,
}

impl BuildReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report file: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowOptions {
    /// Largest knot count tried per feature in the decomposition.
    pub knot_cap: usize,
    /// Largest ridge-term count tried per univariate fit.
    pub term_cap: usize,
    pub strategy: Strategy,
    /// Equispaced points on each image interval used for ridge fitting.
    pub ridge_grid: usize,
    pub seed: u64,
}

impl Default for ShallowOptions {
    fn default() -> Self {
        Self {
            knot_cap: 257,
            term_cap: 256,
            strategy: Strategy::Nested,
            ridge_grid: 513,
            seed: 0,
        }
    }
}

/// Least-squares fit of `Σ_i u_i(f_i(x))` with `knots` equispaced knots per
/// feature. Summands whose `u_i` vanishes identically are dropped, keeping at
/// least one.
pub fn decompose(
    targets: &[f64],
    set: &SampledCompactSet,
    family: &[Feature],
    knots: usize,
) -> Result<Decomposition> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("decomposition needs a nonempty family".into()));
    }
    if targets.len() != set.len() {
        return Err(Error::LengthMismatch {
            expected: set.len(),
            got: targets.len(),
        });
    }
    let intervals = family
        .iter()
        .map(|f| image_interval(f, set))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&c) = targets.first().filter(|&&c| targets.iter().all(|&t| t == c)) {
        return Ok(Decomposition {
            terms: vec![DecompositionTerm {
                feature: family[0].clone(),
                u: PiecewiseLinear::constant(intervals[0].0, c),
                interval: intervals[0],
            }],
            residual: 0.0,
        });
    }
    let columns = family
        .iter()
        .map(|f| f.eval_all(set.points()))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_additive(
        &columns,
        &intervals,
        targets,
        KnotRule::Equispaced(knots.max(2)),
        BasisKind::PiecewiseLinear,
    );
    let mut terms: Vec<DecompositionTerm> = family
        .iter()
        .zip(fit.functions)
        .zip(intervals)
        .map(|((f, u), interval)| DecompositionTerm {
            feature: f.clone(),
            u,
            interval,
        })
        .collect();
    let first = terms[0].clone();
    terms.retain(|t| !(t.u.is_constant() && t.u.values[0] == 0.0));
    if terms.is_empty() {
        terms.push(first);
    }
    Ok(Decomposition {
        terms,
        residual: fit.residual,
    })
}

/// Greedy forward selection: adds the feature that most reduces the residual
/// until it is at most `tol`. Falls back to the whole family when no proper
/// subset reaches `tol`.
pub fn decompose_sparse(
    targets: &[f64],
    set: &SampledCompactSet,
    family: &[Feature],
    knots: usize,
    tol: f64,
) -> Result<Decomposition> {
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() + 1 < family.len() {
        let mut best: Option<(usize, Decomposition)> = None;
        for i in (0..family.len()).filter(|i| !chosen.contains(i)) {
            let subset: Vec<Feature> = chosen.iter().chain([&i]).map(|&j| family[j].clone()).collect();
            let d = decompose(targets, set, &subset, knots)?;
            if best.as_ref().is_none_or(|(_, b)| d.residual < b.residual) {
                best = Some((i, d));
            }
        }
        let Some((i, d)) = best else { break };
        if d.residual <= tol {
            return Ok(d);
        }
        chosen.push(i);
    }
    decompose(targets, set, family, knots)
}

/// Ridge units `(feature, c, w, θ)` for one output component.
type Units = Vec<(Feature, RidgeTerm)>;

/// Shallow network approximating the `m`-valued `targets` (one row per sample
/// point) to sup error `eps`.
///
/// Component `k` is decomposed to residual `ε/(2√m)`, escalating knots
/// `2, 3, 5, 9, …` up to the cap; each of its `M_k` summands is then fitted by
/// a ridge expansion to `ε/(2√m M_k)`, doubling the term count up to the cap.
/// If a cap is reached the best network found is returned with
/// `budget_exceeded` set.
pub fn build_shallow_universal(
    targets: &[Vec<f64>],
    set: &SampledCompactSet,
    family: &[Feature],
    activation: &Activation,
    eps: f64,
    opts: &ShallowOptions,
) -> Result<(ShallowTfnn, BuildReport)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    if family.is_empty() {
        return Err(Error::InvalidArgument("feature family is empty".into()));
    }
    if targets.len() != set.len() {
        return Err(Error::LengthMismatch {
            expected: set.len(),
            got: targets.len(),
        });
    }
    let m = targets.first().map_or(0, Vec::len);
    if m == 0 || targets.iter().any(|t| t.len() != m) {
        return Err(Error::ShapeMismatch("targets must share a positive arity".into()));
    }
    let root_m = (m as f64).sqrt();
    let decomp_tol = eps / (2.0 * root_m);
    let mut budgets = BTreeMap::new();
    budgets.insert("total".to_string(), eps);
    budgets.insert("decomposition".to_string(), decomp_tol);
    let mut exceeded = false;
    let mut components: Vec<Units> = Vec::with_capacity(m);

    for k in 0..m {
        let g: Vec<f64> = targets.iter().map(|t| t[k]).collect();
        let mut knots = 2;
        let mut best = decompose(&g, set, family, knots)?;
        while best.residual > decomp_tol {
            if knots >= opts.knot_cap {
                exceeded = true;
                break;
            }
            knots = (2 * knots - 1).min(opts.knot_cap);
            let d = decompose(&g, set, family, knots)?;
            if d.residual < best.residual {
                best = d;
            }
        }
        if best.residual <= decomp_tol && family.len() > 1 {
            let sparse = decompose_sparse(&g, set, family, knots, decomp_tol)?;
            if sparse.residual <= decomp_tol {
                best = sparse;
            }
        }
        let mk = best.terms.len();
        let ridge_tol = eps / (2.0 * root_m * mk as f64);
        budgets.insert(format!("ridge[{k}]"), ridge_tol);
        let mut units: Units = Vec::new();
        for term in &best.terms {
            let (fitted, hit_cap) = fit_summand(term, set, activation, ridge_tol, opts)?;
            exceeded |= hit_cap;
            units.extend(fitted.into_iter().map(|r| (term.feature.clone(), r)));
        }
        let scale = g.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        components.push(merge_constants(units, activation, CONSTANT_FLOOR * scale));
    }

    let net = assemble(&components, activation)?;
    let values = net.eval_all(set.points())?;
    let achieved = sup_seminorm(&values, targets)?;
    let report = BuildReport {
        requested_eps: eps,
        achieved_error: achieved,
        width: net.width(),
        depth: 0,
        term_count: net.width(),
        n: family.len(),
        m,
        big_m: None,
        budgets,
        budget_exceeded: exceeded,
        substitution: None,
    };
    Ok((net, report))
}

/// Ridge fit of one summand on its image interval plus the sampled images.
fn fit_summand(
    term: &DecompositionTerm,
    set: &SampledCompactSet,
    activation: &Activation,
    tol: f64,
    opts: &ShallowOptions,
) -> Result<(Vec<RidgeTerm>, bool)> {
    let (lo, hi) = term.interval;
    let mut grid = if hi > lo {
        linspace(lo, hi, opts.ridge_grid.max(2))
    } else {
        vec![lo]
    };
    grid.extend(term.feature.eval_all(set.points())?);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&t| term.u.eval(t)).collect();
    let mut n = 1;
    let mut best = fit_univariate(&grid, &values, activation, n, opts.strategy, opts.seed)?;
    while best.sup_error > tol {
        if n >= opts.term_cap {
            return Ok((best.terms, true));
        }
        n = (2 * n).min(opts.term_cap);
        let fit = fit_univariate(&grid, &values, activation, n, opts.strategy, opts.seed)?;
        if fit.sup_error < best.sup_error {
            best = fit;
        }
    }
    Ok((best.terms, false))
}

/// Collapses all `w = 0` units of a component into one, dropping it if the
/// combined constant is at most `floor` in magnitude.
fn merge_constants(units: Units, activation: &Activation, floor: f64) -> Units {
    let mut out: Units = Vec::with_capacity(units.len());
    let mut first: Option<(Feature, f64)> = None;
    let mut total = 0.0;
    for (f, r) in units {
        if r.w != 0.0 {
            out.push((f, r));
            continue;
        }
        total += r.c * activation.eval(-r.theta);
        if first.is_none() {
            first = Some((f, r.theta));
        }
    }
    if let Some((f, theta)) = first {
        let c = total / activation.eval(-theta);
        if total.abs() > floor {
            out.push((f, RidgeTerm { c, w: 0.0, theta }));
        }
    }
    out
}

fn assemble(components: &[Units], activation: &Activation) -> Result<ShallowTfnn> {
    let width: usize = components.iter().map(Vec::len).sum();
    let m = components.len();
    let mut features = Vec::with_capacity(width);
    let mut in_weights = Vec::with_capacity(width);
    let mut in_biases = Vec::with_capacity(width);
    let mut out_matrix = vec![vec![0.0; width]; m];
    let mut col = 0;
    for (k, units) in components.iter().enumerate() {
        for (f, r) in units {
            features.push(f.clone());
            in_weights.push(r.w);
            in_biases.push(r.theta);
            out_matrix[k][col] = r.c;
            col += 1;
        }
    }
    ShallowTfnn::new(features, in_weights, in_biases, out_matrix, vec![0.0; m], activation.clone())
}

/// [`build_shallow_universal`] over base functionals together with the
/// exponential dictionary `exp(s·ℓ)` for every base `ℓ` and scale `s`.
/// With `include_base = false` only the dictionary is used.
#[allow(clippy::too_many_arguments)]
pub fn build_lcs_shallow(
    targets: &[Vec<f64>],
    set: &SampledCompactSet,
    base: &[Feature],
    scales: &[f64],
    include_base: bool,
    activation: &Activation,
    eps: f64,
    opts: &ShallowOptions,
) -> Result<(ShallowTfnn, BuildReport)> {
    let mut family: Vec<Feature> = if include_base { base.to_vec() } else { Vec::new() };
    family.extend(make_exponential_dictionary(base, scales));
    build_shallow_universal(targets, set, &family, activation, eps, opts)
}
