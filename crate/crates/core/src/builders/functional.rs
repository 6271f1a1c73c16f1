//! Functionals on sampled function classes, approximated by networks that read
//! finitely many point evaluations.
//!
//! Stage one builds a shallow net over integral functionals `∫ u(t) t^p dt`
//! (or a supplied family) at tolerance `ε/2`. Stage two replaces every
//! integral functional `ℓ_i` by a quadrature `Σ_j ξ_ij u(x_j)` on a node set
//! shared by all `i` and chosen greedily to minimise the worst substitution
//! error `δ_i` over the sample.

use nalgebra::DMatrix;

use crate::activation::Activation;
use crate::builders::shallow::{build_shallow_universal, BuildReport, ShallowOptions, SubstitutionReport};
use crate::domain::{sup_seminorm, FunctionClassV, SampledCompactSet};
use crate::error::{Error, Result};
use crate::features::{Feature, FeatureKind};
use crate::lstsq::min_norm_lstsq_vec;
use crate::network::ShallowTfnn;

const QUAD_RANK_TOL: f64 = 1e-12;
const LIPSCHITZ_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalOptions {
    pub shallow: ShallowOptions,
    /// Stage-one family; defaults to the first `moments` integral moments.
    pub family: Option<Vec<Feature>>,
    pub moments: usize,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        Self {
            shallow: ShallowOptions::default(),
            family: None,
            moments: 3,
        }
    }
}

/// `∫ u(t) t^p dt` by the trapezoid rule, `p = 0..count`.
pub fn moment_functionals(grid: &[f64], count: usize) -> Vec<Feature> {
    (0..count)
        .map(|p| Feature::weighted_trapezoid(grid, |t| t.powi(p as i32)))
        .collect()
}

/// Largest difference quotient of `a` at step `1e-4` over `[lo, hi]`.
pub fn lipschitz_on(a: &Activation, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / LIPSCHITZ_STEP).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| {
            let t = lo + i as f64 * LIPSCHITZ_STEP;
            ((a.eval(t + LIPSCHITZ_STEP) - a.eval(t)) / LIPSCHITZ_STEP).abs()
        })
        .fold(0.0, f64::max)
}

/// Network over point evaluations approximating the scalar `targets`
/// (one per member of `set`, a sample of `class`).
pub fn build_functional_net(
    targets: &[f64],
    class: &FunctionClassV,
    set: &SampledCompactSet,
    activation: &Activation,
    eps: f64,
    k_nodes: usize,
    opts: &FunctionalOptions,
) -> Result<(ShallowTfnn, BuildReport)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    if set.is_empty() || targets.len() != set.len() {
        return Err(Error::LengthMismatch {
            expected: set.len(),
            got: targets.len(),
        });
    }
    let grid = &class.domain_grid;
    if set.arity() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "sampled functions have {} values, domain grid has {}",
            set.arity(),
            grid.len()
        )));
    }
    let family = opts
        .family
        .clone()
        .unwrap_or_else(|| moment_functionals(grid, opts.moments));
    let rows: Vec<Vec<f64>> = targets.iter().map(|&t| vec![t]).collect();
    let (stage1, mut report) = build_shallow_universal(&rows, set, &family, activation, eps / 2.0, &opts.shallow)?;

    // distinct integral functionals used by the stage-one net
    let mut functionals: Vec<Feature> = Vec::new();
    let mut required: Vec<usize> = Vec::new();
    for f in &stage1.features {
        match &f.kind {
            FeatureKind::PointEval { index } => required.push(*index),
            FeatureKind::Quadrature { .. } => {
                if !functionals.contains(f) {
                    functionals.push(f.clone());
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "functional builder cannot substitute feature {f}"
                )))
            }
        }
    }
    required.sort_unstable();
    required.dedup();
    let ell: Vec<Vec<f64>> = functionals
        .iter()
        .map(|f| f.eval_all(set.points()))
        .collect::<Result<_>>()?;
    let nodes = select_nodes(set, &ell, &required, k_nodes.max(required.len()));
    let (xis, deltas) = quadratures_on(set, &ell, &nodes);

    let replacements: Vec<Feature> = xis
        .iter()
        .map(|xi| Feature::quadrature(nodes.clone(), xi.clone()))
        .collect();
    let mut stage2 = stage1.clone();
    let mut unit_delta = vec![0.0; stage1.width()];
    for (u, f) in stage2.features.iter_mut().enumerate() {
        if let Some(i) = functionals.iter().position(|g| g == f) {
            *f = replacements[i].clone();
            unit_delta[u] = deltas[i];
        }
    }

    let (lo, hi) = operating_interval(&stage1, &stage2, set)?;
    let lipschitz = lipschitz_on(activation, lo, hi) * (1.0 + 1e-3);
    let sum_c: f64 = stage1.out_matrix[0].iter().map(|c| c.abs()).sum();
    let max_w = stage1.in_weights.iter().fold(0.0_f64, |s, w| s.max(w.abs()));
    let delta_required = if max_w > 0.0 && lipschitz > 0.0 {
        eps / (2.0 * sum_c + 1.0) / (lipschitz * max_w)
    } else {
        f64::INFINITY
    };
    let perturbation_bound: f64 = (0..stage1.width())
        .map(|u| stage1.out_matrix[0][u].abs() * stage1.in_weights[u].abs() * lipschitz * unit_delta[u])
        .sum();
    let v1 = stage1.eval_all(set.points())?;
    let v2 = stage2.eval_all(set.points())?;
    let perturbation = sup_seminorm(&v1, &v2)?;
    let achieved = sup_seminorm(&v2, &rows)?;

    report.requested_eps = eps;
    report.achieved_error = achieved;
    report.n = nodes.len();
    report.budgets.insert("stage1".to_string(), eps / 2.0);
    report.budgets.insert("substitution".to_string(), eps / 2.0);
    report.budget_exceeded |= perturbation_bound > eps / 2.0 || achieved > eps;
    report.substitution = Some(SubstitutionReport {
        nodes,
        delta_required,
        deltas,
        lipschitz,
        operating_interval: (lo, hi),
        perturbation,
        perturbation_bound,
    });
    Ok((stage2, report))
}

/// Greedy forward selection of `k` shared nodes, starting from `required`.
fn select_nodes(set: &SampledCompactSet, ell: &[Vec<f64>], required: &[usize], k: usize) -> Vec<usize> {
    let total = set.arity();
    let mut nodes: Vec<usize> = required.to_vec();
    if ell.is_empty() {
        return nodes;
    }
    while nodes.len() < k.min(total) {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..total).filter(|j| !nodes.contains(j)) {
            let mut trial = nodes.clone();
            trial.push(j);
            trial.sort_unstable();
            let (_, deltas) = quadratures_on(set, ell, &trial);
            let score = deltas.iter().copied().fold(0.0, f64::max);
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((j, score));
            }
        }
        match best {
            Some((j, _)) => {
                nodes.push(j);
                nodes.sort_unstable();
            }
            None => break,
        }
    }
    nodes
}

/// Least-squares weights on `nodes` for every functional and the resulting
/// sup substitution errors over the sample.
fn quadratures_on(set: &SampledCompactSet, ell: &[Vec<f64>], nodes: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let pts = set.points();
    let a = DMatrix::from_fn(pts.len(), nodes.len(), |r, j| pts[r][nodes[j]]);
    ell.iter()
        .map(|target| {
            let xi = if nodes.is_empty() {
                Vec::new()
            } else {
                min_norm_lstsq_vec(&a, target, QUAD_RANK_TOL)
            };
            let delta = pts
                .iter()
                .zip(target)
                .map(|(u, l)| {
                    let q: f64 = nodes.iter().zip(&xi).map(|(&j, x)| x * u[j]).sum();
                    (q - l).abs()
                })
                .fold(0.0, f64::max);
            (xi, delta)
        })
        .unzip()
}

/// Range of all hidden pre-activations of both nets over the sample.
fn operating_interval(a: &ShallowTfnn, b: &ShallowTfnn, set: &SampledCompactSet) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for net in [a, b] {
        for x in set.points() {
            for ((f, w), th) in net.features.iter().zip(&net.in_weights).zip(&net.in_biases) {
                let t = w * f.eval(x)? - th;
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
    }
    Ok((lo, hi))
}
