//! Statistical significance of hierarchical clustering.
//!
//! Observations are clustered agglomeratively; then, starting at the root,
//! each node is tested by comparing its cluster index against indices from
//! data simulated under a fitted single-Gaussian null and re-clustered the
//! same way. A node is only tested once its parent is significant, with a
//! cutoff shrinking in proportion to the node's size, which bounds the
//! family-wise error rate over the whole tree.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64` for everyday use.

pub mod cluster_index;
pub mod data;
pub mod engine;
pub mod error;
pub mod hclust;
pub mod io;
pub mod linalg;
pub mod null_model;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod stats;

pub use cluster_index::{
    kmeans_two_ci, linkage_index, stronger_than, two_means_ci, ClusterIndexKind, KMeansConfig,
};
pub use engine::{
    count_k_hat, gaussian_fit_p, node_test, run_shc, PValueKind, ShcConfig, ShcVariant,
};
pub use error::{Result, ShcError};
pub use hclust::{
    agglomerate, cut_k, node_split, pairwise_sq_euclidean, ClusterAssignment, LinkageKind,
};
pub use null_model::{
    estimate_sigma_b_sq, fit_null, sample_cov_eigenvalues, sample_null, EigenMethod,
};
pub use scalar::Scalar;

pub type DataMatrix = data::DataMatrix<f64>;
pub type DataMatrix32 = data::DataMatrix<f32>;
pub type Dendrogram = hclust::Dendrogram<f64>;
pub type Dendrogram32 = hclust::Dendrogram<f32>;
pub type CiValue = cluster_index::CiValue<f64>;
pub type NullModel = null_model::NullModel<f64>;
pub type NodeTestResult = engine::NodeTestResult<f64>;
pub type ShcReport = engine::ShcReport<f64>;
pub type ShcReport32 = engine::ShcReport<f32>;
