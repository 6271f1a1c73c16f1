//! Width-bounded deep networks through a register model.
//!
//! Pipeline: tabulate `u` on the image `F(K)`, fit a Euclidean shallow net
//! `Ψ(y) = Σ_i c_i σ(a_i·y − θ_i) + c_0` to it, then unroll `Ψ∘F` into a deep
//! net with `n` register channels carrying `F(x)`, `m` accumulators carrying
//! partial sums, one compute channel evaluating a single neuron per layer and
//! one constant carry channel: width `n + m + 2`, depth `N`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::builders::composition::compose_via_embedding;
use crate::builders::identity::{channel_codec, ChannelCodec};
use crate::builders::shallow::BuildReport;
use crate::domain::{sup_seminorm, SampledCompactSet};
use crate::error::{Error, Result};
use crate::features::FeatureVectorMap;
use crate::lstsq::min_norm_lstsq;
use crate::network::{AffineLayer, DeepTfnn, FeatureLayer};

const EUCLID_RANK_TOL: f64 = 1e-12;
const PRUNE_TOL: f64 = 1e-13;

/// `Ψ(y) = Σ_i coeffs[i] σ(weights[i]·y − thetas[i]) + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanNet {
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub thetas: Vec<f64>,
    /// One row of `m` output coefficients per neuron.
    pub coeffs: Vec<Vec<f64>>,
    pub constant: Vec<f64>,
}

impl EuclideanNet {
    pub fn neurons(&self) -> usize {
        self.thetas.len()
    }

    pub fn outputs(&self) -> usize {
        self.constant.len()
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.constant.clone();
        for ((w, th), c) in self.weights.iter().zip(&self.thetas).zip(&self.coeffs) {
            let pre: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - th;
            let s = self.activation.eval(pre);
            for (o, ck) in out.iter_mut().zip(c) {
                *o += ck * s;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepNarrowOptions {
    pub seed: u64,
    /// Largest number of thresholds per direction.
    pub max_thetas: usize,
    /// Random unit directions per input dimension, on top of `±e_k`.
    pub random_directions_per_dim: usize,
    /// Initial identity-block step for smooth activations.
    pub step: f64,
    /// Halve the step until blocks meet `eps/(4·depth·range)`.
    pub adapt_step: bool,
}

impl Default for DeepNarrowOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_thetas: 64,
            random_directions_per_dim: 4,
            step: 1e-3,
            adapt_step: true,
        }
    }
}

/// `±e_k` followed by seeded random unit directions, without repeats.
pub fn direction_dictionary(n: usize, per_dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let push = |d: Vec<f64>, dirs: &mut Vec<Vec<f64>>| {
        if !dirs.contains(&d) {
            dirs.push(d);
        }
    };
    for k in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[k] = s;
            push(e, &mut dirs);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn = 0;
    while drawn < per_dim * n {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let mut d: Vec<f64> = v.iter().map(|x| x / norm).collect();
        if n == 1 {
            d[0] = d[0].signum();
        }
        push(d, &mut dirs);
        drawn += 1;
    }
    dirs
}

/// Least-squares Euclidean net on `images → targets`, doubling the number
/// of thresholds per direction from 2 until the sup error is at most `tol`.
/// Returns the best net, its sup error and whether the cap was hit.
pub fn fit_euclidean_net(
    images: &[Vec<f64>],
    targets: &[Vec<f64>],
    activation: &Activation,
    tol: f64,
    opts: &DeepNarrowOptions,
) -> Result<(EuclideanNet, f64, bool)> {
    if images.len() != targets.len() || images.is_empty() {
        return Err(Error::LengthMismatch {
            expected: images.len(),
            got: targets.len(),
        });
    }
    let n = images[0].len();
    let m = targets[0].len();
    let dirs = direction_dictionary(n, opts.random_directions_per_dim, opts.seed);
    let mut best: Option<(EuclideanNet, f64)> = None;
    let mut t = 2;
    loop {
        let net = fit_with_thetas(images, targets, activation, &dirs, t, m);
        let err = sup_seminorm(&images.iter().map(|y| net.eval(y)).collect::<Vec<_>>(), targets)?;
        if best.as_ref().is_none_or(|(_, e)| err < *e) {
            best = Some((net, err));
        }
        let done = best.as_ref().is_some_and(|(_, e)| *e <= tol);
        if done || t >= opts.max_thetas {
            let (net, err) = best.expect("at least one fit");
            return Ok((net, err, !done));
        }
        t = (2 * t).min(opts.max_thetas);
    }
}

fn fit_with_thetas(
    images: &[Vec<f64>],
    targets: &[Vec<f64>],
    activation: &Activation,
    dirs: &[Vec<f64>],
    t: usize,
    m: usize,
) -> EuclideanNet {
    let mut weights = Vec::new();
    let mut thetas = Vec::new();
    for d in dirs {
        let proj: Vec<f64> = images.iter().map(|y| dot(d, y)).collect();
        let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            continue;
        }
        let slope = if activation.is_relu_family() {
            1.0
        } else {
            t as f64 / (hi - lo)
        };
        for j in 0..t {
            let center = lo + (j as f64 + 0.5) * (hi - lo) / t as f64;
            weights.push(d.iter().map(|x| slope * x).collect::<Vec<f64>>());
            thetas.push(slope * center);
        }
    }
    let rows = images.len();
    let cols = thetas.len() + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for (r, y) in images.iter().enumerate() {
        for (j, (w, th)) in weights.iter().zip(&thetas).enumerate() {
            a[(r, j)] = activation.eval(dot(w, y) - th);
        }
        a[(r, cols - 1)] = 1.0;
    }
    let b = DMatrix::from_fn(rows, m, |r, k| targets[r][k]);
    let x = min_norm_lstsq(&a, &b, EUCLID_RANK_TOL);
    let scale = targets
        .iter()
        .flatten()
        .fold(0.0_f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut net = EuclideanNet {
        activation: activation.clone(),
        weights: Vec::new(),
        thetas: Vec::new(),
        coeffs: Vec::new(),
        constant: (0..m).map(|k| x[(cols - 1, k)]).collect(),
    };
    for j in 0..cols - 1 {
        let peak = (0..rows).fold(0.0_f64, |s, r| s.max(a[(r, j)].abs()));
        let c: Vec<f64> = (0..m).map(|k| x[(j, k)]).collect();
        if c.iter().any(|ck| (ck * peak).abs() > PRUNE_TOL * scale) {
            net.weights.push(weights[j].clone());
            net.thetas.push(thetas[j]);
            net.coeffs.push(c);
        }
    }
    net
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unrolls `Ψ∘F` into a register network.
///
/// `ranges_from` supplies the sample used to size the channel codecs. With
/// `block_tol = None` smooth activations keep the initial step unchanged.
pub fn register_network(
    psi: &EuclideanNet,
    map: &FeatureVectorMap,
    ranges_from: &SampledCompactSet,
    step: f64,
    block_tol: Option<f64>,
) -> Result<DeepTfnn> {
    let a = &psi.activation;
    let n = map.arity();
    let m = psi.outputs();
    let big_n = psi.neurons();
    if psi.weights.iter().any(|w| w.len() != n) {
        return Err(Error::ShapeMismatch(format!("Ψ expects inputs of arity {n}")));
    }
    let images = map.eval_all(ranges_from.points())?;
    let mut reg_range = vec![0.0_f64; n];
    let mut acc_range = vec![0.0_f64; m];
    for y in &images {
        for (r, v) in y.iter().enumerate() {
            reg_range[r] = reg_range[r].max(v.abs());
        }
        let mut acc = vec![0.0; m];
        for (i, (w, th)) in psi.weights.iter().zip(&psi.thetas).enumerate() {
            let s = a.eval(dot(w, y) - th);
            for k in 0..m {
                acc[k] += psi.coeffs[i][k] * s;
                acc_range[k] = acc_range[k].max(acc[k].abs());
            }
        }
    }
    let codec = |range: f64| -> Result<ChannelCodec> {
        match block_tol {
            Some(tol) => channel_codec(a, range, step, tol / range.max(1.0)),
            None => channel_codec(a, range, step, f64::INFINITY),
        }
    };
    let reg_codecs = reg_range.iter().map(|&r| codec(r)).collect::<Result<Vec<_>>>()?;
    let acc_codecs = acc_range.iter().map(|&r| codec(r)).collect::<Result<Vec<_>>>()?;

    let width = n + m + 2;
    let comp = n + m;
    let carry = n + m + 1;
    let anchor = map
        .components
        .first()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("empty feature map".into()))?;
    let mut features = Vec::with_capacity(width);
    let mut weights = Vec::with_capacity(width);
    let mut biases = Vec::with_capacity(width);
    for (f, c) in map.components.iter().zip(&reg_codecs) {
        features.push(f.clone());
        weights.push(c.gain);
        biases.push(-c.offset);
    }
    for c in &acc_codecs {
        features.push(anchor.clone());
        weights.push(0.0);
        biases.push(-c.offset);
    }
    for _ in [comp, carry] {
        features.push(anchor.clone());
        weights.push(0.0);
        biases.push(0.0);
    }
    let feature_layer = FeatureLayer {
        features,
        weights,
        biases,
    };

    let mut hidden = Vec::with_capacity(big_n);
    for i in 0..big_n {
        let mut layer = AffineLayer::zeros(width, width);
        for (r, c) in reg_codecs.iter().enumerate() {
            layer.matrix[r][r] = c.gain / c.slope;
            layer.bias[r] = c.gain * c.center / c.slope - c.offset;
        }
        for (k, c) in acc_codecs.iter().enumerate() {
            let row = n + k;
            layer.matrix[row][row] = c.gain / c.slope;
            if i > 0 {
                layer.matrix[row][comp] = c.gain * psi.coeffs[i - 1][k];
            }
            layer.bias[row] = c.gain * c.center / c.slope - c.offset;
        }
        let mut b = psi.thetas[i];
        for (r, c) in reg_codecs.iter().enumerate() {
            let w = psi.weights[i][r];
            layer.matrix[comp][r] = w / c.slope;
            b += w * c.center / c.slope;
        }
        layer.bias[comp] = b;
        hidden.push(layer);
    }
    let mut output = AffineLayer::zeros(m, width);
    for (k, c) in acc_codecs.iter().enumerate() {
        output.matrix[k][n + k] = 1.0 / c.slope;
        if big_n > 0 {
            output.matrix[k][comp] = psi.coeffs[big_n - 1][k];
        }
        output.bias[k] = c.center / c.slope - psi.constant[k];
    }
    DeepTfnn::new(feature_layer, hidden, output, a.clone())
}

/// [`build_deep_narrow_with`] under default options and the given seed.
pub fn build_deep_narrow(
    targets: &[Vec<f64>],
    set: &SampledCompactSet,
    map: &FeatureVectorMap,
    activation: &Activation,
    eps: f64,
    seed: u64,
) -> Result<(DeepTfnn, BuildReport)> {
    let opts = DeepNarrowOptions {
        seed,
        ..DeepNarrowOptions::default()
    };
    build_deep_narrow_with(targets, set, map, activation, eps, &opts)
}

/// Deep net of width at most `n + m + 2` approximating `targets` on `set`.
pub fn build_deep_narrow_with(
    targets: &[Vec<f64>],
    set: &SampledCompactSet,
    map: &FeatureVectorMap,
    activation: &Activation,
    eps: f64,
    opts: &DeepNarrowOptions,
) -> Result<(DeepTfnn, BuildReport)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let m = targets.first().map_or(0, Vec::len);
    if m == 0 || targets.iter().any(|t| t.len() != m) {
        return Err(Error::ShapeMismatch("targets must share a positive arity".into()));
    }
    if !activation.is_relu_family() {
        crate::builders::identity::default_kl_point(activation)?;
    }
    let (u, _) = compose_via_embedding(targets, set, map)?;
    let (psi, psi_err, capped) = fit_euclidean_net(&u.images, &u.values, activation, eps / 2.0, opts)?;
    let depth = psi.neurons().max(1);
    let block_tol = opts.adapt_step.then(|| eps / (4.0 * depth as f64));
    let net = register_network(&psi, map, set, opts.step, block_tol)?;
    let n = map.arity();
    let bound = n + m + 2;
    assert!(net.width() <= bound, "register network exceeds width {bound}");
    let values = net.eval_all(set.points())?;
    let achieved = sup_seminorm(&values, targets)?;
    let mut budgets = std::collections::BTreeMap::new();
    budgets.insert("total".to_string(), eps);
    budgets.insert("embedding".to_string(), eps / 2.0);
    budgets.insert("euclidean".to_string(), eps / 2.0);
    budgets.insert("euclidean_achieved".to_string(), psi_err);
    if let Some(t) = block_tol {
        budgets.insert("identity_block".to_string(), t);
    }
    let report = BuildReport {
        requested_eps: eps,
        achieved_error: achieved,
        width: net.width(),
        depth: net.depth(),
        term_count: psi.neurons(),
        n,
        m,
        big_m: None,
        budgets,
        budget_exceeded: capped || achieved > eps,
        substitution: None,
    };
    Ok((net, report))
}

/// Register network for a given `Ψ`, skipping the Euclidean fit.
pub fn build_deep_narrow_from_psi(
    psi: &EuclideanNet,
    map: &FeatureVectorMap,
    set: &SampledCompactSet,
    step: f64,
) -> Result<DeepTfnn> {
    let net = register_network(psi, map, set, step, None)?;
    let bound = map.arity() + psi.outputs() + 2;
    assert!(net.width() <= bound, "register network exceeds width {bound}");
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Metric;

    #[test]
    fn dictionary_has_axes_then_random() {
        let d = direction_dictionary(2, 4, 3);
        assert_eq!(d.len(), 12);
        assert_eq!(d[0], vec![1.0, 0.0]);
        assert_eq!(d[3], vec![0.0, -1.0]);
        for v in &d {
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(direction_dictionary(1, 4, 0).len(), 2);
    }

    #[test]
    fn relu_registers_are_exact() {
        let set = SampledCompactSet::grid(-1.0, 1.0, 9, 2, Metric::Max).unwrap();
        let psi = EuclideanNet {
            activation: Activation::Relu,
            weights: vec![vec![1.0, -2.0], vec![0.5, 0.5], vec![-1.0, 0.0]],
            thetas: vec![0.1, -0.3, 0.2],
            coeffs: vec![vec![1.5, -1.0], vec![-2.0, 0.5], vec![0.7, 3.0]],
            constant: vec![0.25, -0.5],
        };
        let map = FeatureVectorMap::identity(2);
        let net = build_deep_narrow_from_psi(&psi, &map, &set, 1e-3).unwrap();
        assert_eq!(net.width(), 6);
        assert_eq!(net.depth(), 3);
        for p in set.points() {
            let a = net.eval(p).unwrap();
            let b = psi.eval(p);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
