//! Piecewise-linear univariate functions and the additive least-squares
//! engine `Σ_i u_i(f_i(x))` shared by the D-property diagnostic, the
//! decomposition stage of the shallow builder and outer-function fitting.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::linspace;
use crate::lstsq::min_norm_lstsq_vec;

/// Relative singular-value cutoff for rank decisions in additive fits.
pub const ADDITIVE_RANK_TOL: f64 = 1e-10;

/// Continuous piecewise-linear function on strictly increasing knots,
/// constant outside the knot range, plus an optional `q·t²` term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub quadratic: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(knots.len(), values.len(), "knot/value length mismatch");
        assert!(!knots.is_empty(), "piecewise-linear function needs a knot");
        assert!(
            knots.windows(2).all(|w| w[0] < w[1]),
            "knots must be strictly increasing"
        );
        Self {
            knots,
            values,
            quadratic: 0.0,
        }
    }

    pub fn constant(at: f64, value: f64) -> Self {
        Self::new(vec![at], vec![value])
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.linear_part(t) + self.quadratic * t * t
    }

    fn linear_part(&self, t: f64) -> f64 {
        let k = &self.knots;
        let n = k.len();
        if n == 1 || t <= k[0] {
            return self.values[0];
        }
        if t >= k[n - 1] {
            return self.values[n - 1];
        }
        // first knot strictly greater than t
        let hi = k.partition_point(|&x| x <= t);
        let lo = hi - 1;
        let s = (t - k[lo]) / (k[hi] - k[lo]);
        self.values[lo] + s * (self.values[hi] - self.values[lo])
    }

    pub fn is_constant(&self) -> bool {
        self.quadratic == 0.0 && self.values.iter().all(|&v| v == self.values[0])
    }
}

/// Knot placement for each feature of an additive fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnotRule {
    /// `n` equispaced knots on the feature's image interval.
    Equispaced(usize),
    /// One knot at every distinct sampled image value.
    AtImages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    #[default]
    PiecewiseLinear,
    /// Piecewise-linear hats plus a `t²` column per feature.
    PiecewiseLinearQuadratic,
}

#[derive(Debug, Clone)]
pub struct AdditiveFit {
    pub functions: Vec<PiecewiseLinear>,
    /// Sup error of `Σ u_i(f_i(x))` against the targets, re-measured.
    pub residual: f64,
    pub fitted: Vec<f64>,
}

/// Distinct values, sorted ascending.
pub fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn knots_for(values: &[f64], interval: (f64, f64), rule: KnotRule) -> Vec<f64> {
    let (a, b) = interval;
    if !(b > a) {
        return vec![a];
    }
    match rule {
        KnotRule::Equispaced(n) => linspace(a, b, n.max(2)),
        KnotRule::AtImages => {
            let mut k = distinct_sorted(values);
            if k.first().is_some_and(|&x| x > a) {
                k.insert(0, a);
            }
            if k.last().is_some_and(|&x| x < b) {
                k.push(b);
            }
            k
        }
    }
}

fn hat_weights(knots: &[f64], t: f64) -> (usize, f64, f64) {
    // returns (lower index, weight lower, weight upper)
    let n = knots.len();
    if n == 1 || t <= knots[0] {
        return (0, 1.0, 0.0);
    }
    if t >= knots[n - 1] {
        return (n - 2, 0.0, 1.0);
    }
    let hi = knots.partition_point(|&x| x <= t);
    let lo = hi - 1;
    let s = (t - knots[lo]) / (knots[hi] - knots[lo]);
    (lo, 1.0 - s, s)
}

/// Least-squares fit of `Σ_i u_i(columns[i][x])` to `targets`.
///
/// `columns[i]` holds feature `i` evaluated on every sample point and
/// `intervals[i]` the interval its knots cover. Coefficients come from a
/// minimum-norm solve; knots whose hat touches no sample are afterwards
/// filled by linear interpolation from supported neighbours, which leaves the
/// fit on the sample unchanged.
pub fn fit_additive(
    columns: &[Vec<f64>],
    intervals: &[(f64, f64)],
    targets: &[f64],
    rule: KnotRule,
    basis: BasisKind,
) -> AdditiveFit {
    assert_eq!(columns.len(), intervals.len());
    let rows = targets.len();
    let knot_sets: Vec<Vec<f64>> = columns
        .iter()
        .zip(intervals)
        .map(|(c, &iv)| knots_for(c, iv, rule))
        .collect();
    let quad = basis == BasisKind::PiecewiseLinearQuadratic;
    let mut offsets = Vec::with_capacity(columns.len());
    let mut total = 0;
    for k in &knot_sets {
        offsets.push(total);
        total += k.len() + usize::from(quad);
    }
    let mut a = DMatrix::<f64>::zeros(rows, total);
    for (i, col) in columns.iter().enumerate() {
        assert_eq!(col.len(), rows);
        let knots = &knot_sets[i];
        for (r, &t) in col.iter().enumerate() {
            let (lo, wl, wu) = hat_weights(knots, t);
            a[(r, offsets[i] + lo)] += wl;
            if knots.len() > 1 {
                a[(r, offsets[i] + lo + 1)] += wu;
            }
            if quad {
                a[(r, offsets[i] + knots.len())] = t * t;
            }
        }
    }
    let supported: Vec<Vec<bool>> = knot_sets
        .iter()
        .zip(&offsets)
        .map(|(knots, &off)| {
            (0..knots.len())
                .map(|j| (0..rows).any(|r| a[(r, off + j)] != 0.0))
                .collect()
        })
        .collect();
    // pin u_i(first knot) = 0 for i > 0 to remove the shared-constant null space
    let mut pinned = a.clone();
    for i in 1..knot_sets.len() {
        if supported[i][0] {
            pinned.column_mut(offsets[i]).fill(0.0);
        }
    }
    let coef = indicator_solve(&pinned, targets)
        .unwrap_or_else(|| min_norm_lstsq_vec(&pinned, targets, ADDITIVE_RANK_TOL));

    let mut functions = Vec::with_capacity(columns.len());
    for (i, knots) in knot_sets.iter().enumerate() {
        let off = offsets[i];
        let mut values: Vec<f64> = coef[off..off + knots.len()].to_vec();
        fill_unsupported(knots, &mut values, &supported[i]);
        let mut f = PiecewiseLinear::new(knots.clone(), values);
        if quad {
            f.quadratic = coef[off + knots.len()];
        }
        functions.push(f);
    }
    // anchor u_i(first knot) = 0 for i > 0 and move the constants into u_0
    let mut shift = 0.0;
    for f in functions.iter_mut().skip(1) {
        let v0 = f.values[0];
        f.values.iter_mut().for_each(|v| *v -= v0);
        shift += v0;
    }
    if let Some(f0) = functions.first_mut() {
        f0.values.iter_mut().for_each(|v| *v += shift);
    }

    let fitted: Vec<f64> = (0..rows)
        .map(|r| {
            functions
                .iter()
                .zip(columns)
                .map(|(f, c)| f.eval(c[r]))
                .sum()
        })
        .collect();
    let residual = fitted
        .iter()
        .zip(targets)
        .map(|(f, t)| (f - t).abs())
        .fold(0.0, f64::max);
    AdditiveFit {
        functions,
        residual,
        fitted,
    }
}

/// Exact least-squares solution when every row of `a` is a single unit entry,
/// i.e. every sample sits on a knot: each coefficient is the mean of its rows.
fn indicator_solve(a: &DMatrix<f64>, targets: &[f64]) -> Option<Vec<f64>> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); a.ncols()];
    for (r, &t) in targets.iter().enumerate() {
        let mut hit = None;
        for j in 0..a.ncols() {
            match a[(r, j)] {
                0.0 => {}
                1.0 if hit.is_none() => hit = Some(j),
                _ => return None,
            }
        }
        groups[hit?].push(t);
    }
    Some(
        groups
            .iter()
            .map(|g| match g.first() {
                None => 0.0,
                Some(&v) if g.iter().all(|&t| t == v) => v,
                Some(_) => g.iter().sum::<f64>() / g.len() as f64,
            })
            .collect(),
    )
}

fn fill_unsupported(knots: &[f64], values: &mut [f64], supported: &[bool]) {
    let idx: Vec<usize> = (0..knots.len()).filter(|&j| supported[j]).collect();
    if idx.is_empty() {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for j in 0..knots.len() {
        if supported[j] {
            continue;
        }
        let right = idx.partition_point(|&s| s < j);
        values[j] = match (right.checked_sub(1).map(|l| idx[l]), idx.get(right)) {
            (Some(l), Some(&r)) => {
                let s = (knots[j] - knots[l]) / (knots[r] - knots[l]);
                values[l] + s * (values[r] - values[l])
            }
            (Some(l), None) => values[l],
            (None, Some(&r)) => values[r],
            (None, None) => unreachable!(),
        };
    }
}
