//! Named target functions evaluated on sampled sets.

use std::path::Path;

use anyhow::{bail, Context, Result};
use tfnn_core::domain::linspace;
use tfnn_core::{Feature, Point, SampledCompactSet};

/// Names accepted by [`target_values`], besides `bool:<bits>` and `file:<path>`.
pub const BUILTIN_TARGETS: &[&str] = &[
    "abs_sum",
    "xy",
    "sum",
    "norm",
    "sin3x_cos2y",
    "pair",
    "sin",
    "cos",
    "abs",
    "exp",
    "square",
    "square_integral",
];

fn scalar(name: &str, x: &[f64]) -> Option<f64> {
    let first = || x.first().copied().unwrap_or(0.0);
    Some(match name {
        "abs_sum" => x.iter().map(|v| v.abs()).sum(),
        "xy" => x.iter().product(),
        "sum" => x.iter().sum(),
        "norm" => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        "sin3x_cos2y" => (3.0 * first()).sin() + (2.0 * x.get(1).copied().unwrap_or(0.0)).cos(),
        "sin" => first().sin(),
        "cos" => first().cos(),
        "abs" => first().abs(),
        "exp" => first().exp(),
        "square" => first() * first(),
        _ => return None,
    })
}

/// Values of target `name` on every point of `set`, one row per point.
///
/// `square_integral` treats each point as samples of `u` on a uniform grid of
/// `[0, 1]` and returns the trapezoid value of `∫ u²`. `bool:<bits>` reads
/// bit `Σ_p x_p 2^(d−1−p)` of the string for points with 0/1 labels.
/// `file:<path>` reads one comma-separated row per point.
pub fn target_values(name: &str, set: &SampledCompactSet) -> Result<Vec<Vec<f64>>> {
    let pts = set.points();
    if let Some(bits) = name.strip_prefix("bool:") {
        return pts.iter().map(|p| bool_value(bits, p)).collect();
    }
    if let Some(path) = name.strip_prefix("file:") {
        return read_value_table(Path::new(path), pts.len());
    }
    match name {
        "pair" => Ok(pts
            .iter()
            .map(|p| {
                let x = p.first().copied().unwrap_or(0.0);
                let y = p.get(1).copied().unwrap_or(0.0);
                vec![x * y, x + y]
            })
            .collect()),
        "square_integral" => {
            let quad = Feature::trapezoid(&linspace(0.0, 1.0, set.arity()));
            pts.iter()
                .map(|u| {
                    let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
                    Ok(vec![quad.eval(&sq)?])
                })
                .collect()
        }
        _ => pts
            .iter()
            .map(|p| scalar(name, p).map(|v| vec![v]))
            .collect::<Option<Vec<_>>>()
            .with_context(|| format!("unknown target `{name}`")),
    }
}

fn bool_value(bits: &str, p: &Point) -> Result<Vec<f64>> {
    let mut index = 0usize;
    for &v in p {
        let bit = match v {
            0.0 => 0,
            1.0 => 1,
            _ => bail!("target `bool:{bits}` needs 0/1 labels, got {v}"),
        };
        index = 2 * index + bit;
    }
    match bits.as_bytes().get(index) {
        Some(b'0') => Ok(vec![0.0]),
        Some(b'1') => Ok(vec![1.0]),
        _ => bail!("target `bool:{bits}` has no valid bit {index}"),
    }
}

fn read_value_table(path: &Path, rows: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table = parse_rows(&text).with_context(|| format!("parsing {}", path.display()))?;
    if table.len() != rows {
        bail!("{} has {} rows, the set has {rows} points", path.display(), table.len());
    }
    Ok(table)
}

/// Comma-separated numeric rows; blank lines and `#` comments are skipped.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number `{}`", t.trim())))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tfnn_core::Metric;

    #[test]
    fn builtins_on_a_point() {
        let set = SampledCompactSet::new(vec![vec![0.5, -2.0]], Metric::Euclidean, 0.0).unwrap();
        assert_eq!(target_values("abs_sum", &set).unwrap(), vec![vec![2.5]]);
        assert_eq!(target_values("xy", &set).unwrap(), vec![vec![-1.0]]);
        assert_eq!(target_values("pair", &set).unwrap(), vec![vec![-1.0, -1.5]]);
        assert!(target_values("nope", &set).is_err());
    }

    #[test]
    fn xor_table() {
        let set = SampledCompactSet::grid(0.0, 1.0, 2, 2, Metric::Discrete).unwrap();
        let v: Vec<f64> = target_values("bool:0110", &set).unwrap().concat();
        let want: Vec<f64> = set
            .points()
            .iter()
            .map(|p| if p[0] != p[1] { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(v, want);
    }

    #[test]
    fn square_integral_of_constant_one() {
        let set = SampledCompactSet::new(vec![vec![1.0; 5]], Metric::SupOverGrid, 0.0).unwrap();
        let v = target_values("square_integral", &set).unwrap();
        assert!((v[0][0] - 1.0).abs() < 1e-15);
    }
}
