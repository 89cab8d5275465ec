//! Structure-preserving pixel masks for image manifolds.
//!
//! Selects a subset of image coordinates (a mask) so that manifold learners
//! run on masked images recover the structure learned from full images.
//! Two greedy selectors are provided: [`maps_global`] keeps the squared
//! norms of nearest-neighbor secants close to their expected value under a
//! random mask (global, Isomap-style structure), and [`maps_local`] keeps
//! each neighborhood's secant norms proportional to the unmasked ones
//! (local, LLE-style structure). Variance-ranked and uniform random masks
//! serve as baselines, and exhaustive oracles cover toy instances.
//!
//! Masks are evaluated by running [`isomap`] or LLE on masked data and
//! scoring the result with the functions in [`metrics`].

pub mod data;
pub mod error;
pub mod io;
pub mod knn;
mod linalg;
pub mod manifold;
pub mod mask;
pub mod metrics;
pub mod oose;
pub mod secant;
pub mod synth;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use io::{load_dataset, DataFormat, Sidecar};
pub use knn::{knn_graph, NeighborGraph};
pub use manifold::{
    classical_mds, geodesics, isomap, lle_embed, lle_weights, pca_embed, Embedding, GeodesicDistances,
    IsomapOutput, LleWeights,
};
pub use mask::{
    apply_mask, exact_mask_global, exact_mask_local, global_objective, local_objective, maps_global,
    maps_local, pcoa, random_mask, Mask, Norm,
};
pub use metrics::{
    embedding_error, neighbor_preservation, oose_embedding_error, oose_error_isomap, procrustes_align,
    residual_variance, EvalReport, Metric,
};
pub use oose::{estimate_parameters, isomap_oose, leave_one_out, lle_oose, LooConfig, OoseMethod, OoseResult};
pub use secant::{build_clique_array, build_secants, CliqueSecantArray, SecantMatrix};
pub use synth::{synth_dataset, SynthKind, SynthOptions};
