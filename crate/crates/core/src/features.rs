//! Admissible scalar feature maps for the first network layer.
//!
//! Coordinate projections and direction functionals cover the Euclidean
//! case; quadrature functionals and point evaluations stand in for the dual
//! of a space of continuous functions; exponential features generate the
//! algebra used for density on locally convex spaces; Ostrand sums carry
//! superposition inner functions; custom features are per-point tables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{image_interval, Point, SampledCompactSet};
use crate::error::{Error, Result};
use crate::kst::InnerPsi;
use crate::piecewise::{fit_additive, BasisKind, KnotRule};

/// Images closer than this are treated as coincident.
pub const INJECTIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomEntry {
    pub point: Point,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Coordinate {
        index: usize,
    },
    /// `u ↦ u(y_index)` for a sampled function `u`.
    PointEval {
        index: usize,
    },
    /// `x ↦ Σ_j weights[j] · x[indices[j]]`.
    Quadrature {
        indices: Vec<usize>,
        weights: Vec<f64>,
    },
    /// `x ↦ exp(scale · base(x))`.
    Exponential {
        base: Box<Feature>,
        scale: f64,
    },
    /// `x ↦ Σ_p psis[p](x[p])`.
    OstrandSum {
        psis: Vec<InnerPsi>,
    },
    /// Value table over specific points.
    Custom {
        table: Vec<CustomEntry>,
    },
}

/// A scalar feature map `f ∈ A(X)` with an optional Lipschitz bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip: Option<f64>,
}

impl Feature {
    pub fn new(kind: FeatureKind) -> Self {
        Self { kind, lip: None }
    }

    pub fn with_lip(mut self, lip: f64) -> Self {
        self.lip = Some(lip);
        self
    }

    pub fn coordinate(index: usize) -> Self {
        Self::new(FeatureKind::Coordinate { index }).with_lip(1.0)
    }

    pub fn point_eval(index: usize) -> Self {
        Self::new(FeatureKind::PointEval { index }).with_lip(1.0)
    }

    pub fn quadrature(indices: Vec<usize>, weights: Vec<f64>) -> Self {
        assert_eq!(indices.len(), weights.len(), "quadrature index/weight mismatch");
        let lip = weights.iter().map(|w| w.abs()).sum();
        Self::new(FeatureKind::Quadrature { indices, weights }).with_lip(lip)
    }

    /// Trapezoid rule `∫ u` over a (possibly nonuniform) domain grid.
    pub fn trapezoid(grid: &[f64]) -> Self {
        Self::weighted_trapezoid(grid, |_| 1.0)
    }

    /// Trapezoid rule for `∫ u(t) φ(t) dt` over the domain grid.
    pub fn weighted_trapezoid(grid: &[f64], phi: impl Fn(f64) -> f64) -> Self {
        let n = grid.len();
        let mut weights = vec![0.0; n];
        for j in 0..n.saturating_sub(1) {
            let h = grid[j + 1] - grid[j];
            weights[j] += 0.5 * h;
            weights[j + 1] += 0.5 * h;
        }
        for (w, &t) in weights.iter_mut().zip(grid) {
            *w *= phi(t);
        }
        Self::quadrature((0..n).collect(), weights)
    }

    pub fn exponential(base: Feature, scale: f64) -> Self {
        Self::new(FeatureKind::Exponential {
            base: Box::new(base),
            scale,
        })
    }

    pub fn ostrand_sum(psis: Vec<InnerPsi>) -> Self {
        Self::new(FeatureKind::OstrandSum { psis })
    }

    pub fn custom(points: &[Point], values: &[f64]) -> Self {
        assert_eq!(points.len(), values.len());
        let table = points
            .iter()
            .zip(values)
            .map(|(p, &v)| CustomEntry {
                point: p.clone(),
                value: v,
            })
            .collect();
        Self::new(FeatureKind::Custom { table })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let incompatible = || Error::IncompatiblePoint {
            feature: self.to_string(),
            arity: x.len(),
        };
        match &self.kind {
            FeatureKind::Coordinate { index } | FeatureKind::PointEval { index } => {
                x.get(*index).copied().ok_or_else(incompatible)
            }
            FeatureKind::Quadrature { indices, weights } => {
                let mut acc = 0.0;
                for (&j, &w) in indices.iter().zip(weights) {
                    acc += w * x.get(j).copied().ok_or_else(incompatible)?;
                }
                Ok(acc)
            }
            FeatureKind::Exponential { base, scale } => Ok((scale * base.eval(x)?).exp()),
            FeatureKind::OstrandSum { psis } => {
                if psis.len() != x.len() {
                    return Err(incompatible());
                }
                let mut acc = 0.0;
                for (psi, &xp) in psis.iter().zip(x) {
                    acc += psi.eval(xp).ok_or_else(incompatible)?;
                }
                Ok(acc)
            }
            FeatureKind::Custom { table } => table
                .iter()
                .find(|e| e.point.as_slice() == x)
                .map(|e| e.value)
                .ok_or_else(incompatible),
        }
    }

    pub fn eval_all(&self, points: &[Point]) -> Result<Vec<f64>> {
        points.iter().map(|p| self.eval(p)).collect()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FeatureKind::Coordinate { index } => write!(f, "coordinate({index})"),
            FeatureKind::PointEval { index } => write!(f, "point_eval({index})"),
            FeatureKind::Quadrature { indices, .. } => write!(f, "quadrature({} nodes)", indices.len()),
            FeatureKind::Exponential { base, scale } => write!(f, "exp({scale}·{base})"),
            FeatureKind::OstrandSum { psis } => write!(f, "ostrand_sum({} factors)", psis.len()),
            FeatureKind::Custom { table } => write!(f, "custom({} points)", table.len()),
        }
    }
}

/// `F = (f_1, …, f_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVectorMap {
    pub components: Vec<Feature>,
}

impl FeatureVectorMap {
    pub fn new(components: Vec<Feature>) -> Self {
        Self { components }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(make_coordinate_family(d))
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|f| f.eval(x)).collect()
    }

    pub fn eval_all(&self, points: &[Point]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.eval(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub injective: bool,
    /// Indices into the sample of the first pair with coincident images.
    pub witness: Option<(usize, usize)>,
    pub witness_points: Option<(Point, Point)>,
    /// Smallest Euclidean image distance among distinct sample points.
    pub min_separation: f64,
}

pub fn eval_feature(f: &Feature, x: &[f64]) -> Result<f64> {
    f.eval(x)
}

pub fn make_coordinate_family(d: usize) -> Vec<Feature> {
    (0..d).map(Feature::coordinate).collect()
}

/// Features `x ↦ a·x`, one per direction.
pub fn make_direction_family(d: usize, directions: &[Vec<f64>]) -> Result<Vec<Feature>> {
    if directions.is_empty() {
        return Err(Error::InvalidArgument("no directions given".into()));
    }
    directions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: a.len(),
                });
            }
            if a.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroDirection(i));
            }
            Ok(Feature::quadrature((0..d).collect(), a.clone()))
        })
        .collect()
}

/// `exp(s · f)` for every base feature and nonzero scale, preceded by the
/// constant `1` (scale 0).
pub fn make_exponential_dictionary(base: &[Feature], scales: &[f64]) -> Vec<Feature> {
    let mut out = Vec::new();
    if let Some(first) = base.first() {
        out.push(Feature::exponential(first.clone(), 0.0));
    }
    for f in base {
        for &s in scales {
            if s != 0.0 {
                out.push(Feature::exponential(f.clone(), s));
            }
        }
    }
    out
}

/// Brute-force injectivity of `F` on the sample.
pub fn check_injectivity(map: &FeatureVectorMap, set: &SampledCompactSet) -> Result<InjectivityReport> {
    let images = map.eval_all(set.points())?;
    Ok(injectivity_of_images(&images, set.points()))
}

pub(crate) fn injectivity_of_images(images: &[Vec<f64>], points: &[Point]) -> InjectivityReport {
    let mut min_separation = f64::INFINITY;
    let mut witness = None;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            let d = images[i]
                .iter()
                .zip(&images[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            min_separation = min_separation.min(d);
            if witness.is_none() && d <= INJECTIVITY_TOL {
                witness = Some((i, j));
            }
        }
    }
    InjectivityReport {
        injective: witness.is_none(),
        witness,
        witness_points: witness.map(|(i, j)| (points[i].clone(), points[j].clone())),
        min_separation,
    }
}

/// Sup residual of the best additive fit `Σ_i u_i(f_i(x))` to `targets`, with
/// `basis_size` equispaced piecewise-linear knots per feature.
pub fn d_property_residual(
    family: &[Feature],
    set: &SampledCompactSet,
    targets: &[f64],
    basis_size: usize,
) -> Result<f64> {
    if basis_size < 2 {
        return Err(Error::InvalidArgument("basis_size must be >= 2".into()));
    }
    d_property_residual_with(
        family,
        set,
        targets,
        KnotRule::Equispaced(basis_size),
        BasisKind::PiecewiseLinear,
    )
}

/// [`d_property_residual`] with explicit knot placement and basis kind.
pub fn d_property_residual_with(
    family: &[Feature],
    set: &SampledCompactSet,
    targets: &[f64],
    rule: KnotRule,
    basis: BasisKind,
) -> Result<f64> {
    if targets.len() != set.len() {
        return Err(Error::LengthMismatch {
            expected: set.len(),
            got: targets.len(),
        });
    }
    let columns = family
        .iter()
        .map(|f| f.eval_all(set.points()))
        .collect::<Result<Vec<_>>>()?;
    let intervals = family
        .iter()
        .map(|f| image_interval(f, set))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_additive(&columns, &intervals, targets, rule, basis).residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Metric;

    #[test]
    fn eval_examples() {
        assert_eq!(eval_feature(&Feature::coordinate(0), &[0.3, 0.7]).unwrap(), 0.3);
        let u = [0.1, 0.4, 0.9];
        assert_eq!(Feature::point_eval(2).eval(&u).unwrap(), 0.9);
        let trap = Feature::trapezoid(&[0.0, 0.5, 1.0]);
        assert!((trap.eval(&[0.0, 0.5, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            Feature::coordinate(3).eval(&[1.0]),
            Err(Error::IncompatiblePoint { .. })
        ));
    }

    #[test]
    fn coordinate_family() {
        let fam = make_coordinate_family(3);
        assert_eq!(fam.len(), 3);
        let vals: Vec<f64> = fam.iter().map(|f| f.eval(&[1.0, 2.0, 3.0]).unwrap()).collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        assert_eq!(make_coordinate_family(1), vec![Feature::coordinate(0)]);
    }

    #[test]
    fn direction_family() {
        let f = make_direction_family(2, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(f[0].eval(&[0.25, 0.5]).unwrap(), 0.75);
        let g = make_direction_family(2, &[vec![1.0, -1.0]]).unwrap();
        assert_eq!(g[0].eval(&[0.3, 0.3]).unwrap(), 0.0);
        let h = make_direction_family(2, &[vec![2.0, 0.0]]).unwrap();
        assert_eq!(h[0].eval(&[0.5, 9.0]).unwrap(), 1.0);
        assert_eq!(
            make_direction_family(2, &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap_err(),
            Error::ZeroDirection(1)
        );
    }

    #[test]
    fn exponential_dictionary() {
        let dict = make_exponential_dictionary(&[Feature::coordinate(0)], &[0.0, 1.0, -2.0]);
        assert_eq!(dict.len(), 3);
        assert_eq!(dict[0].eval(&[5.0]).unwrap(), 1.0);
        assert_eq!(dict[1].eval(&[0.0]).unwrap(), 1.0);
        // product closure exp(s f)·exp(t f) = exp((s+t) f)
        let s = Feature::exponential(Feature::coordinate(0), 0.7);
        let t = Feature::exponential(Feature::coordinate(0), -1.3);
        let st = Feature::exponential(Feature::coordinate(0), 0.7 - 1.3);
        for i in 0..=20 {
            let x = [-1.0 + 0.1 * i as f64];
            let lhs = s.eval(&x).unwrap() * t.eval(&x).unwrap();
            let rhs = st.eval(&x).unwrap();
            assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs);
            assert!(s.eval(&x).unwrap() > 0.0);
        }
    }

    #[test]
    fn injectivity_examples() {
        let grid = SampledCompactSet::grid(0.0, 1.0, 5, 2, Metric::Euclidean).unwrap();
        let rep = check_injectivity(&FeatureVectorMap::identity(2), &grid).unwrap();
        assert!(rep.injective && rep.witness.is_none());

        let set = SampledCompactSet::new(vec![vec![-0.5], vec![0.5]], Metric::Euclidean, 0.0).unwrap();
        let sq = Feature::custom(set.points(), &[0.25, 0.25]);
        let rep = check_injectivity(&FeatureVectorMap::new(vec![sq]), &set).unwrap();
        assert!(!rep.injective);
        assert_eq!(rep.witness, Some((0, 1)));
        assert_eq!(rep.witness_points, Some((vec![-0.5], vec![0.5])));

        let labels = SampledCompactSet::new(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            Metric::Discrete,
            0.0,
        )
        .unwrap();
        let s = Feature::ostrand_sum(vec![
            InnerPsi::FiniteTable { values: vec![0.0, 1.0] },
            InnerPsi::FiniteTable { values: vec![0.0, 2.0] },
        ]);
        let rep = check_injectivity(&FeatureVectorMap::new(vec![s]), &labels).unwrap();
        assert!(rep.injective);
        assert_eq!(rep.min_separation, 1.0);
    }

    #[test]
    fn d_property_additive_is_exact() {
        let set = SampledCompactSet::grid(0.0, 1.0, 9, 2, Metric::Euclidean).unwrap();
        let g: Vec<f64> = set.points().iter().map(|p| p[0] + p[1]).collect();
        let r = d_property_residual(&make_coordinate_family(2), &set, &g, 8).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn d_property_exact_composition_with_knots_at_images() {
        let set = SampledCompactSet::grid(-1.0, 1.0, 7, 2, Metric::Euclidean).unwrap();
        let f = make_direction_family(2, &[vec![1.0, 2.0]]).unwrap();
        let g: Vec<f64> = set
            .points()
            .iter()
            .map(|p| (3.0 * (p[0] + 2.0 * p[1])).sin())
            .collect();
        let r = d_property_residual_with(&f, &set, &g, KnotRule::AtImages, BasisKind::PiecewiseLinear)
            .unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let f = Feature::exponential(Feature::trapezoid(&[0.0, 0.3, 1.0]), 0.1 + 0.2);
        let json = serde_json::to_string(&f).unwrap();
        let back: Feature = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }
}
