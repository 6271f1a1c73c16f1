//! Scalar activation functions and numeric probes of their regularity.
//!
//! Activations are identified by short strings (`relu`, `leaky_relu:0.1`,
//! `tanh`, `sigmoid`, `softplus`, `sin`, `identity`, `poly:c0,c1,...`) so
//! they can be named in network files and on the command line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed scalar nonlinearity applied componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Softplus,
    Sin,
    Identity,
    /// Polynomial with coefficients in increasing degree order.
    Poly(Vec<f64>),
}

/// A point where the activation is differentiable with nonzero derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KLPoint {
    pub t0: f64,
    pub derivative: f64,
    /// Half-width of the neighbourhood on which finite differences stayed stable.
    pub radius: f64,
}

impl Activation {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    t
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(alpha) => {
                if t > 0.0 {
                    t
                } else {
                    alpha * t
                }
            }
            Activation::Tanh => t.tanh(),
            Activation::Sigmoid => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Softplus => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            Activation::Sin => t.sin(),
            Activation::Identity => t,
            Activation::Poly(coeffs) => coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c),
        }
    }

    /// Activations for which `t -> σ(t + B) - B` is the identity on `t >= -B`.
    pub fn is_relu_family(&self) -> bool {
        matches!(
            self,
            Activation::Relu | Activation::LeakyRelu(_) | Activation::Identity
        )
    }

    pub fn id(&self) -> String {
        self.to_string()
    }
}

/// Evaluate `a` at `t`.
pub fn eval_activation(a: &Activation, t: f64) -> f64 {
    a.eval(t)
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu(alpha) => write!(f, "leaky_relu:{alpha}"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Softplus => write!(f, "softplus"),
            Activation::Sin => write!(f, "sin"),
            Activation::Identity => write!(f, "identity"),
            Activation::Poly(coeffs) => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::UnknownActivation(s.to_string()))
        };
        match (name, args) {
            ("relu", None) => Ok(Activation::Relu),
            ("leaky_relu", None) => Ok(Activation::LeakyRelu(0.01)),
            ("leaky_relu", Some(a)) => Ok(Activation::LeakyRelu(parse_num(a)?)),
            ("tanh", None) => Ok(Activation::Tanh),
            ("sigmoid", None) => Ok(Activation::Sigmoid),
            ("softplus", None) => Ok(Activation::Softplus),
            ("sin", None) => Ok(Activation::Sin),
            ("identity", None) => Ok(Activation::Identity),
            ("poly", Some(a)) => {
                let coeffs = a.split(',').map(parse_num).collect::<Result<Vec<_>>>()?;
                if coeffs.is_empty() {
                    return Err(Error::UnknownActivation(s.to_string()));
                }
                Ok(Activation::Poly(coeffs))
            }
            _ => Err(Error::UnknownActivation(s.to_string())),
        }
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.to_string()
    }
}

const KL_REL_TOL: f64 = 1e-3;
const KL_MIN_DERIVATIVE: f64 = 1e-6;

fn central_difference(a: &Activation, t: f64, h: f64) -> f64 {
    (a.eval(t + h) - a.eval(t - h)) / (2.0 * h)
}

fn agree(x: f64, y: f64) -> bool {
    (x - y).abs() <= KL_REL_TOL * x.abs().max(y.abs())
}

/// Locate a grid point where `a` has a stable, nonzero derivative.
///
/// Grid points are visited by increasing `|t|`, ties broken by value. A point
/// qualifies when central differences at `fd_step` and `fd_step / 2` agree,
/// the one-sided differences agree (this rejects kinks such as ReLU at 0), and
/// the finer estimate exceeds `1e-6` in magnitude.
pub fn find_kl_point(a: &Activation, grid: &[f64], fd_step: f64) -> Result<KLPoint> {
    if grid.is_empty() || !(fd_step > 0.0) {
        return Err(Error::InvalidArgument(
            "find_kl_point needs a nonempty grid and a positive step".into(),
        ));
    }
    let mut order: Vec<f64> = grid.iter().copied().filter(|t| t.is_finite()).collect();
    order.sort_by(|x, y| x.abs().total_cmp(&y.abs()).then(x.total_cmp(y)));

    for &t in &order {
        let coarse = central_difference(a, t, fd_step);
        let fine = central_difference(a, t, fd_step / 2.0);
        let forward = (a.eval(t + fd_step) - a.eval(t)) / fd_step;
        let backward = (a.eval(t) - a.eval(t - fd_step)) / fd_step;
        if fine.abs() > KL_MIN_DERIVATIVE && agree(coarse, fine) && agree(forward, backward) {
            let mut radius = fd_step;
            let mut r = 2.0 * fd_step;
            while r <= 1.0 && agree(central_difference(a, t, r), fine) {
                let fw = (a.eval(t + r) - a.eval(t)) / r;
                let bw = (a.eval(t) - a.eval(t - r)) / r;
                if !agree(fw, bw) {
                    break;
                }
                radius = r;
                r *= 2.0;
            }
            return Ok(KLPoint {
                t0: t,
                derivative: fine,
                radius,
            });
        }
    }
    Err(Error::NoKLPoint(a.to_string()))
}

fn binomial_row(k: usize) -> Vec<f64> {
    let mut row = vec![1.0f64; k + 1];
    for j in 1..k {
        row[j] = row[j - 1] * (k - j + 1) as f64 / j as f64;
    }
    row
}

/// Diagnostic: are all `(max_degree + 1)`-th divided differences of `a` on a
/// 64-point grid over `[lo, hi]` below `tol`?
///
/// Every equispaced stencil (any stride) of `max_degree + 2` grid points is
/// checked. Differences are compared against `tol` after subtracting the
/// rounding floor of the stencil, so exact polynomials are not rejected by
/// cancellation noise on fine strides.
pub fn is_polynomial_on_interval(
    a: &Activation,
    interval: (f64, f64),
    max_degree: usize,
    tol: f64,
) -> bool {
    const GRID: usize = 64;
    let (lo, hi) = interval;
    assert!(lo < hi && tol > 0.0, "invalid interval or tolerance");
    let spacing = (hi - lo) / (GRID - 1) as f64;
    let values: Vec<f64> = (0..GRID)
        .map(|i| a.eval(lo + spacing * i as f64))
        .collect();
    let order = max_degree + 1;
    if order > GRID - 1 {
        return true;
    }
    let weights = binomial_row(order);
    let factorial: f64 = (1..=order).map(|j| j as f64).product();

    for stride in 1..=(GRID - 1) / order {
        let step = spacing * stride as f64;
        let scale = factorial * step.powi(order as i32);
        for start in 0..GRID - order * stride {
            let mut diff = 0.0;
            let mut magnitude = 0.0;
            for (j, w) in weights.iter().enumerate() {
                let v = values[start + j * stride];
                let sign = if (order - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                diff += sign * w * v;
                magnitude += w * v.abs();
            }
            let floor = 16.0 * f64::EPSILON * magnitude / scale;
            if (diff.abs() / scale - floor) >= tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    type Scalar = fn(f64) -> f64;

    fn all_builtins() -> Vec<Activation> {
        vec![
            Activation::Relu,
            Activation::LeakyRelu(0.1),
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Sin,
            Activation::Identity,
            Activation::Poly(vec![0.0, -1.0, 0.0, 2.0]),
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_activation(&Activation::Tanh, 0.0), 0.0);
        assert_eq!(eval_activation(&Activation::Relu, -1.0), 0.0);
        let sp = eval_activation(&Activation::Softplus, 0.0);
        assert!((sp - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn builtins_finite_on_large_inputs() {
        for a in all_builtins() {
            for t in [-1e6, -1e3, -1.0, 0.0, 1.0, 1e3, 1e6] {
                assert!(a.eval(t).is_finite(), "{a} at {t}");
            }
        }
    }

    #[test]
    fn ids_round_trip() {
        for a in all_builtins() {
            let parsed: Activation = a.to_string().parse().unwrap();
            assert_eq!(parsed, a);
        }
        assert_eq!(
            "leaky_relu:0.1".parse::<Activation>().unwrap(),
            Activation::LeakyRelu(0.1)
        );
        assert!("swish".parse::<Activation>().is_err());
        assert!("poly:".parse::<Activation>().is_err());
    }

    #[test]
    fn kl_point_tanh_on_symmetric_grid() {
        let grid: Vec<f64> = (0..=16).map(|i| -2.0 + 0.25 * i as f64).collect();
        let kl = find_kl_point(&Activation::Tanh, &grid, 1e-4).unwrap();
        assert_eq!(kl.t0, 0.0);
        assert!((kl.derivative - 1.0).abs() < 1e-5);
        assert!(kl.radius > 0.0);
    }

    #[test]
    fn kl_point_relu() {
        let kl = find_kl_point(&Activation::Relu, &[1.0, 2.0], 1e-4).unwrap();
        assert_eq!(kl.t0, 1.0);
        // difference-quotient rounding is about eps/h
        assert!((kl.derivative - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kl_point_skips_relu_kink() {
        let kl = find_kl_point(&Activation::Relu, &[-1.0, 0.0, 1.0], 1e-4).unwrap();
        assert_eq!(kl.t0, 1.0);
    }

    #[test]
    fn kl_point_constant_fails() {
        let constant = Activation::Poly(vec![1.0]);
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.3).collect();
        assert!(matches!(
            find_kl_point(&constant, &grid, 1e-4),
            Err(Error::NoKLPoint(_))
        ));
    }

    #[test]
    fn kl_point_smooth_builtins_match_analytic_derivative() {
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
        let cases: [(Activation, Scalar); 4] = [
            (Activation::Tanh, |t| 1.0 - t.tanh().powi(2)),
            (Activation::Sigmoid, |t| {
                let s = 1.0 / (1.0 + (-t).exp());
                s * (1.0 - s)
            }),
            (Activation::Softplus, |t| 1.0 / (1.0 + (-t).exp())),
            (Activation::Sin, |t| t.cos()),
        ];
        for (a, d) in cases {
            let kl = find_kl_point(&a, &grid, 1e-4).unwrap();
            assert!((kl.derivative - d(kl.t0)).abs() < 1e-5, "{a}");
        }
    }

    #[test]
    fn polynomial_diagnostic_examples() {
        let cubic = Activation::Poly(vec![0.0, -1.0, 0.0, 2.0]);
        assert!(is_polynomial_on_interval(&cubic, (-1.0, 1.0), 4, 1e-9));
        let affine = Activation::Poly(vec![1.0, 3.0]);
        assert!(is_polynomial_on_interval(&affine, (-1.0, 1.0), 1, 1e-9));
        assert!(!is_polynomial_on_interval(&Activation::Tanh, (-1.0, 1.0), 6, 1e-9));
    }

    #[test]
    fn polynomial_diagnostic_degree_boundary() {
        for d in 1..=6usize {
            let coeffs: Vec<f64> = (0..=d).map(|i| 0.5 + 0.25 * i as f64).collect();
            let p = Activation::Poly(coeffs);
            assert!(is_polynomial_on_interval(&p, (-1.0, 1.0), d, 1e-9), "deg {d}");
            assert!(!is_polynomial_on_interval(&p, (-1.0, 1.0), d - 1, 1e-9), "deg {d}");
        }
    }

    #[test]
    fn evaluation_is_bit_identical() {
        for a in all_builtins() {
            for i in 0..50 {
                let t = -5.0 + 0.2137 * i as f64;
                assert_eq!(a.eval(t).to_bits(), a.eval(t).to_bits());
            }
        }
    }
}
