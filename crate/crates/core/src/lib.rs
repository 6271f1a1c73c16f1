//! Topological feedforward networks: shallow and deep networks whose first
//! layer applies scalar feature maps on an arbitrary input space, together
//! with constructive builders that realise their approximation guarantees on
//! sampled compact sets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod builders;
pub mod domain;
pub mod error;
pub mod features;
pub mod kst;
pub mod lstsq;
pub mod network;
pub mod piecewise;
pub mod univariate;

pub use activation::{find_kl_point, is_polynomial_on_interval, Activation, KLPoint};
pub use domain::{Metric, Point, ProductSpace, SampledCompactSet};
pub use error::{Error, Result};
pub use features::{Feature, FeatureVectorMap};
pub use network::{DeepTfnn, Network, ShallowTfnn};
pub use univariate::{fit_univariate, RidgeExpansion, Strategy};
