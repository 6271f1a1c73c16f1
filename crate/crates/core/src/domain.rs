//! Finite stand-ins for compact sets and the sup-seminorm over them.
//!
//! A compact set is represented by a finite sample of points together with a
//! declared mesh (the covering radius of the sample inside the idealised set).
//! Reported errors are always sample errors; the mesh is carried alongside so
//! callers can state both.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Feature;

/// A point of an input space: real coordinates, label indices of a finite
/// product, or the values of a sampled function on its domain grid.
pub type Point = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Max,
    Discrete,
    /// Sup metric over the domain grid of sampled functions.
    SupOverGrid,
}

impl Metric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Max | Metric::SupOverGrid => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            Metric::Discrete => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Metric::Euclidean => "euclidean",
            Metric::Max => "max",
            Metric::Discrete => "discrete",
            Metric::SupOverGrid => "sup_over_grid",
        };
        f.write_str(s)
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean" => Ok(Metric::Euclidean),
            "max" => Ok(Metric::Max),
            "discrete" => Ok(Metric::Discrete),
            "sup_over_grid" | "sup-over-grid" => Ok(Metric::SupOverGrid),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// A finite sample of a compact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCompactSet {
    points: Vec<Point>,
    metric: Metric,
    mesh: f64,
}

impl SampledCompactSet {
    /// Validates that the sample is nonempty, of uniform arity, finite and
    /// pairwise distinct under `metric`.
    pub fn new(points: Vec<Point>, metric: Metric, mesh: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("sampled set is empty".into()));
        }
        if !(mesh >= 0.0) || !mesh.is_finite() {
            return Err(Error::InvalidArgument(format!("mesh {mesh} must be >= 0")));
        }
        let arity = points[0].len();
        for p in &points {
            if p.len() != arity {
                return Err(Error::LengthMismatch {
                    expected: arity,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite coordinate".into()));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if metric.distance(&points[i], &points[j]) == 0.0 {
                    return Err(Error::DuplicatePoint(i, j));
                }
            }
        }
        Ok(Self {
            points,
            metric,
            mesh,
        })
    }

    /// Uniform tensor grid on `[lo, hi]^dim` with `per_axis` points per axis,
    /// first coordinate varying slowest. The declared mesh is the grid's
    /// covering radius under `metric`.
    pub fn grid(lo: f64, hi: f64, per_axis: usize, dim: usize, metric: Metric) -> Result<Self> {
        let intervals = vec![(lo, hi); dim];
        Self::box_grid(&intervals, per_axis, metric)
    }

    pub fn box_grid(intervals: &[(f64, f64)], per_axis: usize, metric: Metric) -> Result<Self> {
        if intervals.is_empty() || per_axis == 0 {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        let axes: Vec<Vec<f64>> = intervals
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, per_axis))
            .collect();
        let points = cartesian(&axes);
        let half_steps: Vec<f64> = intervals
            .iter()
            .map(|&(lo, hi)| {
                if per_axis > 1 {
                    (hi - lo) / (per_axis - 1) as f64 / 2.0
                } else {
                    (hi - lo) / 2.0
                }
            })
            .collect();
        let mesh = match metric {
            Metric::Euclidean => half_steps.iter().map(|h| h * h).sum::<f64>().sqrt(),
            Metric::Discrete => 0.0,
            _ => half_steps.iter().copied().fold(0.0, f64::max),
        };
        Self::new(points, metric, mesh)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.points[0].len()
    }

    /// Serialize as text: a `# metric=... mesh=...` header then one
    /// comma-separated point per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# metric={} mesh={}\n", self.metric, self.mesh);
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut metric = Metric::Euclidean;
        let mut mesh = 0.0;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for token in header.split_whitespace() {
                    if let Some(v) = token.strip_prefix("metric=") {
                        metric = v.parse()?;
                    } else if let Some(v) = token.strip_prefix("mesh=") {
                        mesh = v
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad mesh `{v}`")))?;
                    }
                }
                continue;
            }
            let point = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {}: bad value `{}`", lineno + 1, tok.trim()))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(point);
        }
        Self::new(points, metric, mesh)
    }
}

/// `n` equispaced values from `lo` to `hi` inclusive (the midpoint when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Point> {
    let mut points: Vec<Point> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for p in &points {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

/// `max_x ‖values(x) − reference(x)‖₂` over paired samples.
pub fn sup_seminorm(values: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    if values.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: values.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("sup over an empty sample".into()));
    }
    let mut sup: f64 = 0.0;
    for (v, r) in values.iter().zip(reference) {
        if v.len() != r.len() {
            return Err(Error::LengthMismatch {
                expected: r.len(),
                got: v.len(),
            });
        }
        let norm = v
            .iter()
            .zip(r)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(norm);
    }
    Ok(sup)
}

/// Scalar version of [`sup_seminorm`].
pub fn sup_abs_diff(values: &[f64], reference: &[f64]) -> f64 {
    values
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Covering radius of `subset` (indices into `set`) over all points of `set`.
pub fn covering_radius(set: &SampledCompactSet, subset: &[usize]) -> f64 {
    let pts = set.points();
    pts.iter()
        .map(|p| {
            subset
                .iter()
                .map(|&j| set.metric().distance(p, &pts[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Greedy farthest-point subsample whose covering radius over `set` is at
/// most `eps`. Seeds with the first point; ties go to the lowest index.
pub fn epsilon_net(set: &SampledCompactSet, eps: f64) -> SampledCompactSet {
    let pts = set.points();
    let metric = set.metric();
    let mut chosen = vec![0usize];
    let mut nearest: Vec<f64> = pts.iter().map(|p| metric.distance(p, &pts[0])).collect();
    loop {
        let (far, dist) = nearest
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        if dist <= eps {
            break;
        }
        chosen.push(far);
        for (i, p) in pts.iter().enumerate() {
            nearest[i] = nearest[i].min(metric.distance(p, &pts[far]));
        }
    }
    let radius = nearest.iter().copied().fold(0.0, f64::max);
    SampledCompactSet {
        points: chosen.iter().map(|&i| pts[i].clone()).collect(),
        metric,
        mesh: set.mesh() + radius,
    }
}

/// `[min, max]` of `f` over the sample, padded by `mesh · lip(f)` when the
/// feature declares a Lipschitz bound.
pub fn image_interval(f: &Feature, set: &SampledCompactSet) -> Result<(f64, f64)> {
    let values = f.eval_all(set.points())?;
    Ok(image_interval_of(&values, f.lip.map(|l| l * set.mesh())))
}

pub(crate) fn image_interval_of(values: &[f64], pad: Option<f64>) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = pad.unwrap_or(0.0);
    (lo - pad, hi + pad)
}

/// One factor of a product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// A closed interval, topological dimension 1.
    Interval { lo: f64, hi: f64 },
    /// A finite set of `labels` points, topological dimension 0.
    Finite { labels: usize },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Interval { .. } => 1,
            Factor::Finite { .. } => 0,
        }
    }
}

/// A finite product of compact metric factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpace {
    pub factors: Vec<Factor>,
}

impl ProductSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("product space has no factors".into()));
        }
        for f in &factors {
            match *f {
                Factor::Interval { lo, hi } if !(lo < hi) => {
                    return Err(Error::InvalidArgument(format!("empty interval [{lo},{hi}]")))
                }
                Factor::Finite { labels: 0 } => {
                    return Err(Error::InvalidArgument("finite factor with no labels".into()))
                }
                _ => {}
            }
        }
        Ok(Self { factors })
    }

    pub fn cube(d: usize) -> Self {
        Self {
            factors: vec![Factor::Interval { lo: 0.0, hi: 1.0 }; d],
        }
    }

    pub fn finite(labels: &[usize]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| Factor::Finite { labels: l }).collect())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    /// Total topological dimension `M = Σ d_p`.
    pub fn total_dim(&self) -> usize {
        self.dims().iter().sum()
    }

    pub fn is_all_finite(&self) -> bool {
        self.factors.iter().all(|f| matches!(f, Factor::Finite { .. }))
    }

    pub fn is_cube(&self) -> bool {
        self.factors.iter().all(|f| matches!(f, Factor::Interval { .. }))
    }

    /// All label tuples for finite factors, `per_axis` equispaced points for
    /// intervals; first factor varies slowest.
    pub fn grid(&self, per_axis: usize) -> Result<SampledCompactSet> {
        let axes: Vec<Vec<f64>> = self
            .factors
            .iter()
            .map(|f| match *f {
                Factor::Interval { lo, hi } => linspace(lo, hi, per_axis),
                Factor::Finite { labels } => (0..labels).map(|l| l as f64).collect(),
            })
            .collect();
        let metric = if self.is_all_finite() {
            Metric::Discrete
        } else {
            Metric::Max
        };
        let mesh = self
            .factors
            .iter()
            .map(|f| match *f {
                Factor::Interval { lo, hi } if per_axis > 1 => (hi - lo) / (per_axis - 1) as f64 / 2.0,
                Factor::Interval { lo, hi } => (hi - lo) / 2.0,
                Factor::Finite { .. } => 0.0,
            })
            .fold(0.0, f64::max);
        SampledCompactSet::new(cartesian(&axes), metric, mesh)
    }
}

impl fmt::Display for ProductSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_cube() && self.factors.iter().all(|x| *x == Factor::Interval { lo: 0.0, hi: 1.0 }) {
            return write!(f, "cube:{}", self.factors.len());
        }
        if self.is_all_finite() {
            let labels: Vec<String> = self
                .factors
                .iter()
                .map(|x| match x {
                    Factor::Finite { labels } => labels.to_string(),
                    _ => unreachable!(),
                })
                .collect();
            return write!(f, "finite:{}", labels.join(","));
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| match *x {
                Factor::Interval { lo, hi } => format!("interval:{lo}:{hi}"),
                Factor::Finite { labels } => format!("labels:{labels}"),
            })
            .collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl FromStr for ProductSpace {
    type Err = Error;

    /// Accepts `cube:d`, `finite:n1,n2,...`, or a `x`-separated list of
    /// `interval:lo:hi` and `labels:n` factors.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad space `{s}`"));
        if let Some(d) = s.strip_prefix("cube:") {
            let d: usize = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Self::cube(d));
        }
        if let Some(list) = s.strip_prefix("finite:") {
            let labels = list
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            return Self::finite(&labels);
        }
        let factors = s
            .split('x')
            .map(|tok| {
                let parts: Vec<&str> = tok.trim().split(':').collect();
                match parts.as_slice() {
                    ["interval", lo, hi] => Ok(Factor::Interval {
                        lo: lo.parse().map_err(|_| bad())?,
                        hi: hi.parse().map_err(|_| bad())?,
                    }),
                    ["labels", n] => Ok(Factor::Finite {
                        labels: n.parse().map_err(|_| bad())?,
                    }),
                    _ => Err(bad()),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }
}

/// Parametric families of functions on a one-dimensional grid `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberFamily {
    /// `t ↦ a·t`
    Linear,
    /// `t ↦ sin(a·t)`
    Sine,
    /// `t ↦ cos(a·t)`
    Cosine,
    /// `t ↦ exp(a·t)`
    Exp,
}

impl MemberFamily {
    pub fn eval(&self, a: f64, t: f64) -> f64 {
        match self {
            MemberFamily::Linear => a * t,
            MemberFamily::Sine => (a * t).sin(),
            MemberFamily::Cosine => (a * t).cos(),
            MemberFamily::Exp => (a * t).exp(),
        }
    }

    /// Lipschitz bound in `t` over parameters in `[lo, hi]` and `t ∈ [t_lo, t_hi]`.
    fn lipschitz(&self, lo: f64, hi: f64, t_lo: f64, t_hi: f64) -> f64 {
        let amax = lo.abs().max(hi.abs());
        match self {
            MemberFamily::Linear | MemberFamily::Sine | MemberFamily::Cosine => amax,
            MemberFamily::Exp => {
                let tmax = t_lo.abs().max(t_hi.abs());
                amax * (amax * tmax).exp()
            }
        }
    }
}

impl FromStr for MemberFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(MemberFamily::Linear),
            "sine" | "sin" => Ok(MemberFamily::Sine),
            "cosine" | "cos" => Ok(MemberFamily::Cosine),
            "exp" => Ok(MemberFamily::Exp),
            other => Err(Error::Parse(format!("unknown function family `{other}`"))),
        }
    }
}

/// A compact, equicontinuous class of functions on a finite grid of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassV {
    pub domain_grid: Vec<f64>,
    pub family: MemberFamily,
    pub param_range: (f64, f64),
    pub lipschitz_bound: f64,
}

impl FunctionClassV {
    pub fn new(domain_grid: Vec<f64>, family: MemberFamily, param_range: (f64, f64)) -> Result<Self> {
        if domain_grid.len() < 2 {
            return Err(Error::InvalidArgument("domain grid needs >= 2 points".into()));
        }
        if !(param_range.0 <= param_range.1) {
            return Err(Error::InvalidArgument("empty parameter range".into()));
        }
        let t_lo = domain_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let t_hi = domain_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lipschitz_bound = family.lipschitz(param_range.0, param_range.1, t_lo, t_hi);
        Ok(Self {
            domain_grid,
            family,
            param_range,
            lipschitz_bound,
        })
    }

    /// Uniform grid of `t_points` on `[0, 1]` as the domain.
    pub fn on_unit_interval(family: MemberFamily, param_range: (f64, f64), t_points: usize) -> Result<Self> {
        Self::new(linspace(0.0, 1.0, t_points), family, param_range)
    }

    pub fn params(&self, count: usize) -> Vec<f64> {
        linspace(self.param_range.0, self.param_range.1, count)
    }

    pub fn member_values(&self, a: f64) -> Point {
        self.domain_grid.iter().map(|&t| self.family.eval(a, t)).collect()
    }

    /// Samples `count` members as a set under the sup-over-grid metric.
    pub fn sample(&self, count: usize) -> Result<SampledCompactSet> {
        let params = self.params(count);
        let points: Vec<Point> = params.iter().map(|&a| self.member_values(a)).collect();
        let set = SampledCompactSet::new(points, Metric::SupOverGrid, 0.0)?;
        // Parameter half-spacing times the parameter-Lipschitz constant of the family on Y.
        let half = if count > 1 {
            (self.param_range.1 - self.param_range.0) / (count - 1) as f64 / 2.0
        } else {
            0.0
        };
        let tmax = self.domain_grid.iter().map(|t| t.abs()).fold(0.0, f64::max);
        let dparam = match self.family {
            MemberFamily::Linear | MemberFamily::Sine | MemberFamily::Cosine => tmax,
            MemberFamily::Exp => {
                let amax = self.param_range.0.abs().max(self.param_range.1.abs());
                tmax * (amax * tmax).exp()
            }
        };
        Ok(SampledCompactSet {
            mesh: half * dparam,
            ..set
        })
    }

    /// Checks the declared Lipschitz bound and finiteness on sampled members.
    pub fn check_equicontinuity(&self, count: usize) -> bool {
        let y = &self.domain_grid;
        self.params(count).iter().all(|&a| {
            let u = self.member_values(a);
            u.iter().all(|v| v.is_finite())
                && (0..y.len()).all(|i| {
                    (i + 1..y.len()).all(|j| {
                        (u[i] - u[j]).abs() <= self.lipschitz_bound * (y[i] - y[j]).abs() * (1.0 + 1e-12) + 1e-15
                    })
                })
        })
    }
}
