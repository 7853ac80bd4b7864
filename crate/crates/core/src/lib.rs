//! Recovery of latent positions from a symmetric similarity matrix.
//!
//! The pipeline is: spectral embedding of the matrix into `p` dimensions,
//! followed by Isomap (neighbourhood graph, shortest paths, classical MDS)
//! into the latent dimension `d`. Alongside the pipeline, the [`kernels`]
//! module provides kernel models with exact feature maps, metric tensors and
//! closed-form geodesic distances, so every stage can be checked against
//! ground truth at small scale.
//!
//! Modules:
//! - [`matrix`], [`points`], [`distance`], [`rng`]: shared containers.
//! - [`eigen`]: symmetric eigensolvers (dense and Lanczos) and double-centering.
//! - [`spectral`]: spectral embedding, rank selection, degree correction.
//! - [`manifold`]: neighbourhood graphs, geodesic approximation, CMDS, Isomap.
//! - [`kernels`]: kernel catalog, feature maps, geodesic and path-length oracles.
//! - [`evaluation`]: Procrustes alignment, recovery error, rank diagnostics,
//!   regression and Earth Mover's distance.
//! - [`ingestion`]: edge lists, dense matrix files and time-series tables.

pub mod distance;
pub mod eigen;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod kernels;
pub mod manifold;
pub mod matrix;
pub mod points;
pub mod rng;
pub mod spectral;

pub use distance::DistanceMatrix;
pub use error::{Error, Result};
pub use matrix::{MatrixKind, SimilarityMatrix};
pub use points::PointCloud;
pub use rng::Seed;
