//! Constructive pipelines that turn sampled targets into networks.

pub mod composition;
pub mod deep_narrow;
pub mod functional;
pub mod identity;
pub mod shallow;

pub use composition::{compose_via_embedding, EmbeddedComposition};
pub use deep_narrow::{
    build_deep_narrow, build_deep_narrow_from_psi, build_deep_narrow_with, fit_euclidean_net, register_network,
    DeepNarrowOptions, EuclideanNet,
};
pub use functional::{build_functional_net, moment_functionals, FunctionalOptions};
pub use identity::{make_identity_block, BlockForm, ChannelCodec, IdentityBlock};
pub use shallow::{
    build_lcs_shallow, build_shallow_universal, decompose, BuildReport, Decomposition, DecompositionTerm, ShallowOptions,
    SubstitutionReport,
};
