//! Shallow and deep topological feedforward networks.
//!
//! Affine maps follow the `A y − b` sign convention throughout, including
//! the shallow output `H(x) = A σ(T(x)) − b`. The first layer of every
//! network is a feature layer `T_0(x)_i = w_i f_i(x) − θ_i`.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::builders::identity::{default_kl_point, ChannelCodec};
use crate::domain::Point;
use crate::error::{Error, Result};
use crate::features::Feature;

/// Dense affine map `y ↦ A y − b` with row-major `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    pub matrix: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(matrix: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let layer = Self { matrix, bias };
        layer.validate()?;
        Ok(layer)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            matrix: vec![vec![0.0; cols]; rows],
            bias: vec![0.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        if self.bias.len() != self.matrix.len() {
            return Err(Error::ShapeMismatch(format!(
                "affine layer has {} rows but {} biases",
                self.matrix.len(),
                self.bias.len()
            )));
        }
        let cols = self.cols();
        if self.matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged affine matrix".into()));
        }
        if self
            .matrix
            .iter()
            .flatten()
            .chain(&self.bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite affine parameter".into()));
        }
        Ok(())
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() - b)
            .collect()
    }
}

/// `T_0(x) = (w_i f_i(x) − θ_i)_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayer {
    pub features: Vec<Feature>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl FeatureLayer {
    pub fn width(&self) -> usize {
        self.features.len()
    }

    fn validate(&self) -> Result<()> {
        let r = self.features.len();
        if self.weights.len() != r || self.biases.len() != r {
            return Err(Error::ShapeMismatch(format!(
                "feature layer: {} features, {} weights, {} biases",
                r,
                self.weights.len(),
                self.biases.len()
            )));
        }
        if self.weights.iter().chain(&self.biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature-layer parameter".into()));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.features
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
            .map(|(f, (w, th))| Ok(w * f.eval(x)? - th))
            .collect()
    }
}

/// One hidden layer, `m` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowTfnn {
    pub features: Vec<Feature>,
    pub in_weights: Vec<f64>,
    pub in_biases: Vec<f64>,
    pub out_matrix: Vec<Vec<f64>>,
    pub out_bias: Vec<f64>,
    pub activation: Activation,
}

impl ShallowTfnn {
    pub fn new(
        features: Vec<Feature>,
        in_weights: Vec<f64>,
        in_biases: Vec<f64>,
        out_matrix: Vec<Vec<f64>>,
        out_bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let net = Self {
            features,
            in_weights,
            in_biases,
            out_matrix,
            out_bias,
            activation,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_layer().validate()?;
        let out = AffineLayer {
            matrix: self.out_matrix.clone(),
            bias: self.out_bias.clone(),
        };
        out.validate()?;
        if out.rows() == 0 {
            return Err(Error::ShapeMismatch("network has no outputs".into()));
        }
        if self.out_matrix.iter().any(|r| r.len() != self.features.len()) {
            return Err(Error::ShapeMismatch(format!(
                "output matrix columns must equal hidden width {}",
                self.features.len()
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn outputs(&self) -> usize {
        self.out_bias.len()
    }

    pub fn feature_layer(&self) -> FeatureLayer {
        FeatureLayer {
            features: self.features.clone(),
            weights: self.in_weights.clone(),
            biases: self.in_biases.clone(),
        }
    }

    /// Hidden activations `σ(T(x))`.
    pub fn hidden(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = Vec::with_capacity(self.features.len());
        for ((f, w), th) in self.features.iter().zip(&self.in_weights).zip(&self.in_biases) {
            h.push(self.activation.eval(w * f.eval(x)? - th));
        }
        Ok(h)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.hidden(x)?;
        Ok(self
            .out_matrix
            .iter()
            .zip(&self.out_bias)
            .map(|(row, b)| row.iter().zip(&h).map(|(a, v)| a * v).sum::<f64>() - b)
            .collect())
    }

    pub fn eval_all(&self, points: &[Point]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.eval(p)).collect()
    }

    /// The same network in deep form with no hidden affine layers (`l = 0`).
    pub fn as_deep(&self) -> DeepTfnn {
        DeepTfnn {
            feature_layer: self.feature_layer(),
            hidden: Vec::new(),
            output: AffineLayer {
                matrix: self.out_matrix.clone(),
                bias: self.out_bias.clone(),
            },
            activation: self.activation.clone(),
        }
    }
}

/// `H = T_{l+1} ∘ σ ∘ T_l ∘ … ∘ σ ∘ T_1 ∘ σ ∘ T_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepTfnn {
    pub feature_layer: FeatureLayer,
    pub hidden: Vec<AffineLayer>,
    pub output: AffineLayer,
    pub activation: Activation,
}

impl DeepTfnn {
    pub fn new(
        feature_layer: FeatureLayer,
        hidden: Vec<AffineLayer>,
        output: AffineLayer,
        activation: Activation,
    ) -> Result<Self> {
        let net = Self {
            feature_layer,
            hidden,
            output,
            activation,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_layer.validate()?;
        let mut prev = self.feature_layer.width();
        for (j, layer) in self.hidden.iter().chain(std::iter::once(&self.output)).enumerate() {
            layer.validate()?;
            if layer.rows() > 0 && layer.cols() != prev {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} expects {} inputs, previous width is {}",
                    j + 1,
                    layer.cols(),
                    prev
                )));
            }
            prev = layer.rows();
        }
        if self.output.rows() == 0 {
            return Err(Error::ShapeMismatch("network has no outputs".into()));
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.output.rows()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sigma = &self.activation;
        let mut y: Vec<f64> = self
            .feature_layer
            .apply(x)?
            .into_iter()
            .map(|t| sigma.eval(t))
            .collect();
        for layer in &self.hidden {
            y = layer.apply(&y).into_iter().map(|t| sigma.eval(t)).collect();
        }
        Ok(self.output.apply(&y))
    }

    pub fn eval_all(&self, points: &[Point]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.eval(p)).collect()
    }

    /// `max(k_0, …, k_l)`.
    pub fn width(&self) -> usize {
        self.hidden
            .iter()
            .map(AffineLayer::rows)
            .fold(self.feature_layer.width(), usize::max)
    }

    /// Number `l` of affine layers strictly between `T_0` and the output.
    pub fn depth(&self) -> usize {
        self.hidden.len()
    }
}

pub fn eval_shallow(net: &ShallowTfnn, x: &[f64]) -> Result<Vec<f64>> {
    net.eval(x)
}

pub fn eval_deep(net: &DeepTfnn, x: &[f64]) -> Result<Vec<f64>> {
    net.eval(x)
}

pub fn width_of(net: &DeepTfnn) -> usize {
    net.width()
}

pub fn depth_of(net: &DeepTfnn) -> usize {
    net.depth()
}

/// Stack `depth` identity blocks between the hidden layer of `net` and its
/// output. For ReLU-family activations the blocks are exact on hidden values
/// in `[-bound, bound]`; smooth activations use differential blocks with step
/// `1e-3` normalised to `bound`.
pub fn embed_shallow_as_deep(net: &ShallowTfnn, depth: usize, bound: f64) -> Result<DeepTfnn> {
    embed_shallow_as_deep_with_step(net, depth, bound, 1e-3)
}

pub fn embed_shallow_as_deep_with_step(
    net: &ShallowTfnn,
    depth: usize,
    bound: f64,
    step: f64,
) -> Result<DeepTfnn> {
    let codec = if net.activation.is_relu_family() {
        ChannelCodec::shift(bound)
    } else {
        let kl = default_kl_point(&net.activation)?;
        ChannelCodec::differential(&net.activation, &kl, step, bound)?
    };
    embed_shallow_as_deep_with(net, depth, &codec)
}

pub fn embed_shallow_as_deep_with(net: &ShallowTfnn, depth: usize, codec: &ChannelCodec) -> Result<DeepTfnn> {
    if depth == 0 {
        return Err(Error::InvalidArgument("embedding depth must be >= 1".into()));
    }
    let r = net.width();
    let mut hidden = Vec::with_capacity(depth);
    // first block reads raw hidden activations
    let mut first = AffineLayer::zeros(r, r);
    for i in 0..r {
        first.matrix[i][i] = codec.gain;
        first.bias[i] = -codec.offset;
    }
    hidden.push(first);
    for _ in 1..depth {
        let mut layer = AffineLayer::zeros(r, r);
        for i in 0..r {
            layer.matrix[i][i] = codec.gain / codec.slope;
            layer.bias[i] = -(codec.offset - codec.gain * codec.center / codec.slope);
        }
        hidden.push(layer);
    }
    let mut output = AffineLayer::zeros(net.outputs(), r);
    for (k, row) in net.out_matrix.iter().enumerate() {
        let mut shift = 0.0;
        for (i, &a) in row.iter().enumerate() {
            output.matrix[k][i] = a / codec.slope;
            shift += a * codec.center / codec.slope;
        }
        output.bias[k] = net.out_bias[k] + shift;
    }
    DeepTfnn::new(net.feature_layer(), hidden, output, net.activation.clone())
}

/// A network of either shape, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Shallow(ShallowTfnn),
    Deep(DeepTfnn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkFile {
    kind: String,
    activation: Activation,
    m: usize,
    features: Vec<Feature>,
    feature_layer: FeatureLayerRecord,
    layers: Vec<AffineLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureLayerRecord {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Network {
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Network::Shallow(n) => n.eval(x),
            Network::Deep(n) => n.eval(x),
        }
    }

    pub fn eval_all(&self, points: &[Point]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.eval(p)).collect()
    }

    pub fn outputs(&self) -> usize {
        match self {
            Network::Shallow(n) => n.outputs(),
            Network::Deep(n) => n.outputs(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Network::Shallow(n) => n.width(),
            Network::Deep(n) => n.width(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Network::Shallow(_) => 0,
            Network::Deep(n) => n.depth(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            Network::Shallow(n) => NetworkFile {
                kind: "shallow".into(),
                activation: n.activation.clone(),
                m: n.outputs(),
                features: n.features.clone(),
                feature_layer: FeatureLayerRecord {
                    weights: n.in_weights.clone(),
                    biases: n.in_biases.clone(),
                },
                layers: vec![AffineLayer {
                    matrix: n.out_matrix.clone(),
                    bias: n.out_bias.clone(),
                }],
            },
            Network::Deep(n) => NetworkFile {
                kind: "deep".into(),
                activation: n.activation.clone(),
                m: n.outputs(),
                features: n.feature_layer.features.clone(),
                feature_layer: FeatureLayerRecord {
                    weights: n.feature_layer.weights.clone(),
                    biases: n.feature_layer.biases.clone(),
                },
                layers: n
                    .hidden
                    .iter()
                    .cloned()
                    .chain(std::iter::once(n.output.clone()))
                    .collect(),
            },
        };
        serde_json::to_string_pretty(&file).expect("network serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("network file: {e}")))?;
        let mut layers = file.layers;
        let output = layers
            .pop()
            .ok_or_else(|| Error::ShapeMismatch("network file has no layers".into()))?;
        if output.rows() != file.m {
            return Err(Error::ShapeMismatch(format!(
                "declared m = {} but output layer has {} rows",
                file.m,
                output.rows()
            )));
        }
        match file.kind.as_str() {
            "shallow" => {
                if !layers.is_empty() {
                    return Err(Error::ShapeMismatch("shallow network with hidden layers".into()));
                }
                Ok(Network::Shallow(ShallowTfnn::new(
                    file.features,
                    file.feature_layer.weights,
                    file.feature_layer.biases,
                    output.matrix,
                    output.bias,
                    file.activation,
                )?))
            }
            "deep" => Ok(Network::Deep(DeepTfnn::new(
                FeatureLayer {
                    features: file.features,
                    weights: file.feature_layer.weights,
                    biases: file.feature_layer.biases,
                },
                layers,
                output,
                file.activation,
            )?)),
            other => Err(Error::Parse(format!("unknown network kind `{other}`"))),
        }
    }
}

impl From<ShallowTfnn> for Network {
    fn from(n: ShallowTfnn) -> Self {
        Network::Shallow(n)
    }
}

impl From<DeepTfnn> for Network {
    fn from(n: DeepTfnn) -> Self {
        Network::Deep(n)
    }
}
