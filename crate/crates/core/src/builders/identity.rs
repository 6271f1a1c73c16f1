//! Identity blocks: a single `σ` layer that passes values through.
//!
//! A channel value `v` is encoded as the pre-activation `gain·v + offset` and
//! recovered from the post-activation `y` as `(y − center)/slope`. For
//! ReLU-type activations this is the exact shift `σ(v + B) − B`; for smooth
//! activations it is the difference quotient `(σ(t0 + h v/R) − σ(t0)) / (h σ'(t0)/R)`.

use serde::{Deserialize, Serialize};

use crate::activation::{find_kl_point, Activation, KLPoint};
use crate::domain::linspace;
use crate::error::{Error, Result};
use crate::network::AffineLayer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCodec {
    pub gain: f64,
    pub offset: f64,
    pub center: f64,
    pub slope: f64,
}

impl ChannelCodec {
    /// `v ↦ σ(v + B) − B`, exact for `v ≥ −B` on ReLU-type activations.
    pub fn shift(bound: f64) -> Self {
        Self {
            gain: 1.0,
            offset: bound,
            center: bound,
            slope: 1.0,
        }
    }

    /// Difference-quotient codec at `kl` with step `h` on values of size `range`.
    pub fn differential(a: &Activation, kl: &KLPoint, h: f64, range: f64) -> Result<Self> {
        if kl.derivative == 0.0 {
            return Err(Error::ZeroDerivative);
        }
        if !(h > 0.0) || !(range > 0.0) {
            return Err(Error::InvalidArgument("identity step and range must be positive".into()));
        }
        Ok(Self {
            gain: h / range,
            offset: kl.t0,
            center: a.eval(kl.t0),
            slope: h * kl.derivative / range,
        })
    }

    pub fn encode(&self, v: f64) -> f64 {
        self.gain * v + self.offset
    }

    pub fn decode(&self, y: f64) -> f64 {
        (y - self.center) / self.slope
    }

    pub fn pass(&self, a: &Activation, v: f64) -> f64 {
        self.decode(a.eval(self.encode(v)))
    }

    /// `max |pass(v) − v|` over 201 points of `[−range, range]`.
    pub fn deviation(&self, a: &Activation, range: f64) -> f64 {
        linspace(-range, range, 201)
            .into_iter()
            .map(|v| (self.pass(a, v) - v).abs())
            .fold(0.0, f64::max)
    }
}

/// How an identity block is realised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockForm {
    Shift { bound: f64 },
    Differential { kl: KLPoint, step: f64 },
}

/// `t ↦ out(σ(in(t)))` acting channelwise on `width` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityBlock {
    pub activation: Activation,
    pub codec: ChannelCodec,
    pub input: AffineLayer,
    pub output: AffineLayer,
}

impl IdentityBlock {
    pub fn width(&self) -> usize {
        self.input.rows()
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self
            .input
            .apply(t)
            .into_iter()
            .map(|v| self.activation.eval(v))
            .collect();
        self.output.apply(&hidden)
    }
}

/// One identity block on `width` channels. ReLU-type activations always use
/// the exact shift form; for the differential form `h` must be positive and
/// `σ'(t0)` nonzero.
pub fn make_identity_block(a: &Activation, form: BlockForm, width: usize) -> Result<IdentityBlock> {
    let codec = match form {
        BlockForm::Shift { bound } => {
            if !a.is_relu_family() {
                return Err(Error::InvalidArgument(format!("shift identity needs a ReLU-type activation, got {a}")));
            }
            ChannelCodec::shift(bound)
        }
        BlockForm::Differential { kl, step } => {
            if a.is_relu_family() {
                ChannelCodec::shift(1.0 / step.max(f64::MIN_POSITIVE))
            } else {
                ChannelCodec::differential(a, &kl, step, 1.0)?
            }
        }
    };
    let mut input = AffineLayer::zeros(width, width);
    let mut output = AffineLayer::zeros(width, width);
    for i in 0..width {
        input.matrix[i][i] = codec.gain;
        input.bias[i] = -codec.offset;
        output.matrix[i][i] = 1.0 / codec.slope;
        output.bias[i] = codec.center / codec.slope;
    }
    Ok(IdentityBlock {
        activation: a.clone(),
        codec,
        input,
        output,
    })
}

/// KL point on a symmetric grid over `[−4, 4]` with step `0.25`.
pub fn default_kl_point(a: &Activation) -> Result<KLPoint> {
    find_kl_point(a, &linspace(-4.0, 4.0, 33), 1e-4)
}

/// Codec for a channel whose values stay within `[−range, range]`.
///
/// ReLU-type activations get the shift `B = 1 + 2·range`. Smooth activations
/// start at step `h` and halve it until the measured round-trip deviation is
/// at most `tol`.
pub fn channel_codec(a: &Activation, range: f64, h: f64, tol: f64) -> Result<ChannelCodec> {
    let range = range.max(1.0);
    if a.is_relu_family() {
        return Ok(ChannelCodec::shift(1.0 + 2.0 * range));
    }
    let kl = default_kl_point(a)?;
    let mut h = h;
    let mut codec = ChannelCodec::differential(a, &kl, h, range)?;
    for _ in 0..40 {
        if codec.deviation(a, range) <= tol {
            break;
        }
        h *= 0.5;
        codec = ChannelCodec::differential(a, &kl, h, range)?;
    }
    Ok(codec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_dev(block: &IdentityBlock, lo: f64, hi: f64) -> f64 {
        linspace(lo, hi, 201)
            .into_iter()
            .map(|t| (block.apply(&[t])[0] - t).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn relu_shift_is_exact() {
        let b = make_identity_block(&Activation::Relu, BlockForm::Shift { bound: 1.0 }, 1).unwrap();
        assert_eq!(max_dev(&b, -1.0, 1.0), 0.0);
    }

    #[test]
    fn identity_activation_is_exact() {
        let kl = default_kl_point(&Activation::Identity).unwrap();
        for step in [1e-3, 0.5] {
            let b = make_identity_block(&Activation::Identity, BlockForm::Differential { kl, step }, 2).unwrap();
            assert!(max_dev(&b, -1.0, 1.0) < 1e-12);
        }
    }

    #[test]
    fn tanh_differential_block() {
        let kl = default_kl_point(&Activation::Tanh).unwrap();
        assert_eq!(kl.t0, 0.0);
        let b = make_identity_block(&Activation::Tanh, BlockForm::Differential { kl, step: 1e-3 }, 1).unwrap();
        let dev = max_dev(&b, -1.0, 1.0);
        assert!(dev <= 1e-6, "{dev}");
        // Taylor remainder h²|t|³/3 dominates at the ends
        assert!(dev <= 1e-6 / 3.0 * 1.01 + 1e-12);
    }

    #[test]
    fn zero_derivative_is_rejected() {
        let kl = KLPoint {
            t0: 0.0,
            derivative: 0.0,
            radius: 1.0,
        };
        assert_eq!(
            make_identity_block(&Activation::Tanh, BlockForm::Differential { kl, step: 1e-3 }, 1).unwrap_err(),
            Error::ZeroDerivative
        );
    }

    #[test]
    fn codec_meets_tolerance() {
        let c = channel_codec(&Activation::Sigmoid, 3.0, 0.5, 1e-8).unwrap();
        assert!(c.deviation(&Activation::Sigmoid, 3.0) <= 1e-8);
    }
}
