//! Univariate ridge expansions `u(t) ≈ Σ_j c_j σ(w_j t − θ_j)`.
//!
//! Nodes are laid out on the normalised variable `τ ∈ [−1, 1]` and mapped to
//! the fit interval, so a fit depends only on the target's shape. Every
//! dictionary also carries one `w = 0` node for constants.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::lstsq::min_norm_lstsq_vec;

const RIDGE_RANK_TOL: f64 = 1e-12;
const PRUNE_TOL: f64 = 1e-13;

/// Node-placement rule for the ridge dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Dyadic levels: level `L` has centres `−1 + (2j+1)/2^L` and slopes `±2^{L/2}`.
    #[default]
    Nested,
    /// Equispaced centres with slopes cycling through `{1, 2, 4}` times a resolution factor.
    Equispaced,
    /// Seeded uniform centres and log-uniform slopes.
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Nested => "nested",
            Strategy::Equispaced => "equispaced",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" => Ok(Strategy::Nested),
            "equispaced" => Ok(Strategy::Equispaced),
            "random" => Ok(Strategy::Random),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

/// One term `c σ(w t − θ)`, stored as a `[c, w, theta]` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct RidgeTerm {
    pub c: f64,
    pub w: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for RidgeTerm {
    fn from([c, w, theta]: [f64; 3]) -> Self {
        Self { c, w, theta }
    }
}

impl From<RidgeTerm> for [f64; 3] {
    fn from(t: RidgeTerm) -> Self {
        [t.c, t.w, t.theta]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeExpansion {
    pub activation: Activation,
    pub terms: Vec<RidgeTerm>,
    pub interval: (f64, f64),
    /// Sup error on the fit grid.
    pub sup_error: f64,
}

impl RidgeExpansion {
    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|r| r.c * self.activation.eval(r.w * t - r.theta))
            .sum()
    }

    pub fn eval_all(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A node in normalised coordinates: `σ(ω (τ − centre))`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    omega: f64,
    center: f64,
}

fn nested_nodes(n: usize) -> Vec<Node> {
    let mut out = Vec::with_capacity(n);
    let mut level = 0u32;
    while out.len() < n {
        let count = 1usize << level;
        let scale = 2f64.powf(f64::from(level) / 2.0);
        for j in 0..count {
            let center = -1.0 + (2 * j + 1) as f64 / count as f64;
            for omega in [scale, -scale] {
                if out.len() < n {
                    out.push(Node { omega, center });
                }
            }
        }
        level += 1;
    }
    out
}

fn equispaced_nodes(n: usize) -> Vec<Node> {
    let centers = n.div_ceil(2);
    let resolution = ((centers as f64 - 1.0) / 8.0).max(1.0);
    let mut out = Vec::with_capacity(n);
    for j in 0..centers {
        let center = if centers == 1 {
            0.0
        } else {
            -1.0 + 2.0 * j as f64 / (centers - 1) as f64
        };
        let slope = [1.0, 2.0, 4.0][j % 3] * resolution;
        for omega in [slope, -slope] {
            if out.len() < n {
                out.push(Node { omega, center });
            }
        }
    }
    out
}

fn random_nodes(n: usize, seed: u64) -> Vec<Node> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = (n.max(2) as f64).log2();
    (0..n)
        .map(|_| {
            let center = rng.gen_range(-1.0..=1.0);
            let mag = 2f64.powf(rng.gen_range(0.0..=top));
            let omega = if rng.gen_bool(0.5) { mag } else { -mag };
            Node { omega, center }
        })
        .collect()
}

fn nodes_for(strategy: Strategy, n: usize, seed: u64) -> Vec<Node> {
    match strategy {
        Strategy::Nested => nested_nodes(n),
        Strategy::Equispaced => equispaced_nodes(n),
        Strategy::Random => random_nodes(n, seed),
    }
}

/// Offset `θ*` with `σ(−θ*)` safely away from zero, so `c σ(0·t − θ*)` can
/// carry any constant.
pub fn constant_offset(a: &Activation) -> Option<f64> {
    (1..=64).flat_map(|k| [-(k as f64), k as f64]).find(|&th| {
        let v = a.eval(-th);
        v.is_finite() && v.abs() >= 1e-3
    })
}

/// Fits `values` (samples of `u` on `grid`) with `n_terms` ridge nodes plus a
/// constant node, by minimum-norm least squares.
///
/// The nested strategy additionally refits on every dyadic prefix
/// `n, n/2, n/4, …` and keeps the best, so doubling `n_terms` can only
/// improve the sup error.
pub fn fit_univariate(
    grid: &[f64],
    values: &[f64],
    a: &Activation,
    n_terms: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<RidgeExpansion> {
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len().max(1),
            got: values.len(),
        });
    }
    if n_terms == 0 {
        return Err(Error::InvalidArgument("n_terms must be >= 1".into()));
    }
    if grid.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite fit data".into()));
    }
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if strategy != Strategy::Nested {
        return Ok(fit_with_nodes(grid, values, a, (lo, hi), &nodes_for(strategy, n_terms, seed)));
    }
    let mut best: Option<RidgeExpansion> = None;
    let mut n = n_terms;
    loop {
        let fit = fit_with_nodes(grid, values, a, (lo, hi), &nested_nodes(n));
        if best.as_ref().is_none_or(|b| fit.sup_error < b.sup_error) {
            best = Some(fit);
        }
        if n == 1 || n % 2 == 1 {
            break;
        }
        n /= 2;
    }
    Ok(best.expect("at least one nested fit"))
}

fn fit_with_nodes(
    grid: &[f64],
    values: &[f64],
    a: &Activation,
    interval: (f64, f64),
    nodes: &[Node],
) -> RidgeExpansion {
    let (lo, hi) = interval;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut cols: Vec<(f64, f64)> = Vec::new();
    if half > 0.0 {
        for nd in nodes {
            cols.push((nd.omega / half, nd.omega * (mid / half + nd.center)));
        }
    }
    let const_theta = constant_offset(a);
    if let Some(th) = const_theta {
        cols.push((0.0, th));
    }
    let rows = grid.len();
    let mut mat = DMatrix::<f64>::zeros(rows, cols.len());
    for (j, &(w, th)) in cols.iter().enumerate() {
        for (r, &t) in grid.iter().enumerate() {
            mat[(r, j)] = a.eval(w * t - th);
        }
    }
    let coef = if cols.is_empty() {
        Vec::new()
    } else {
        min_norm_lstsq_vec(&mat, values, RIDGE_RANK_TOL)
    };
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut terms = Vec::new();
    for (j, &(w, theta)) in cols.iter().enumerate() {
        let peak = (0..rows).fold(0.0_f64, |m, r| m.max(mat[(r, j)].abs()));
        if coef[j] != 0.0 && (coef[j] * peak).abs() > PRUNE_TOL * scale {
            terms.push(RidgeTerm { c: coef[j], w, theta });
        }
    }
    let mut fit = RidgeExpansion {
        activation: a.clone(),
        terms,
        interval,
        sup_error: 0.0,
    };
    fit.sup_error = grid
        .iter()
        .zip(values)
        .map(|(&t, &v)| (fit.eval(t) - v).abs())
        .fold(0.0, f64::max);
    fit
}
