//! Clustering and classification of data with missing attribute values,
//! without imputation.
//!
//! Instances are compared with an attribute-weighted penalty discrepancy:
//! a normalised Euclidean distance over the attributes both instances
//! observe, blended with a penalty for the attributes either one lacks.
//! On top of it the crate provides k-means++ and k-means|| seeded Lloyd
//! clustering, a kNN classifier, missingness simulators (MCAR, MAR, two
//! MNAR variants), imputation baselines and an experiment harness.
//!
//! ```
//! use lacuna::{DiscrepancyModel, ObservedTable};
//!
//! let table = ObservedTable::from_rows(
//!     vec!["x".into(), "y".into()],
//!     vec![
//!         vec![None, Some(5.0)],
//!         vec![Some(2.0), Some(3.0)],
//!         vec![Some(3.0), Some(6.0)],
//!     ],
//! )?;
//! let model = DiscrepancyModel::fit(&table, 0.25)?;
//! let d = model.awpd(table.row(0), table.row(1))?;
//! assert!((d - 0.5743).abs() < 1e-4);
//! # Ok::<(), lacuna::Error>(())
//! ```

pub mod classification;
pub mod clustering;
pub mod dataset;
pub mod discrepancy;
mod error;
pub mod evaluation;
pub mod harness;
pub mod imputation;
pub mod missingness;
mod rng;

pub use classification::{knn_awpd_predict, neighbor_set, NeighborSet};
pub use clustering::{
    lloyd_awpd, lloyd_with, seed_kmeans_pp, seed_scalable, Centroid, CentroidUpdate, ClusterState,
};
pub use dataset::{load_csv, zscore_normalize, Instance, LabeledDataset, ObservedTable};
pub use discrepancy::{DiscrepancyModel, Dissimilarity, Euclidean};
pub use error::{Error, Result};
pub use evaluation::{clustering_accuracy, RunRecord};
pub use harness::{run_experiment, ExperimentConfig, ExperimentReport};
pub use missingness::{Mechanism, MissingnessSpec};

// The guide's code samples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/discrepancy.md")]
    mod discrepancy {}
    #[doc = include_str!("../../../book/src/missingness.md")]
    mod missingness {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
