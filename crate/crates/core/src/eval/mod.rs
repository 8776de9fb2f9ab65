//! Evaluation: retrieval metrics, ROC, clustering and pixel accuracy.

pub mod mds;
pub mod metrics;
pub mod robustness;

pub use mds::{classical_mds, clustering_experiment, ClusteringOutcome};
pub use metrics::{
    average_precision, mean_average_precision, pixel_accuracy, precision_at_m, precision_curves,
    rand_index, ranked_neighbors, retrieval_accuracy, roc_auc, PrecisionCurves, RocCurve,
};
pub use robustness::{replace_columns, robustness_sweep, RobustnessCurve, SweepPoint};
