//! Weak image labels to pixel labels through a sparse, near-orthogonal
//! non-negative factorization.

pub mod config;
pub mod labels;
pub mod nmf;
pub mod sparsity;

pub use config::{NmfConfig, NMF_KEYS};
pub use labels::{extract_labels, median_filter_labels, LabelField};
pub use nmf::{
    assemble_data_matrix, factorize, init_features, kkt_residual, objective, objectives,
    random_coefficients, run_updates, update_gradients, update_h, update_w, ConvergenceTrace,
    DataMatrix, FactorPair, Factorization, MembershipMatrix, ObjectivePart, Objectives,
};
pub use sparsity::{hoyer_project, sparsity};

use crate::error::Result;

/// Factorization, raw label field and median-filtered label images of one
/// labeled data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMapping {
    pub factorization: Factorization,
    pub field: LabelField,
    /// Median-filtered labels per image, row-major.
    pub labels: Vec<Vec<u8>>,
}

/// Factorize, extract labels at `config.tau`, then median filter.
pub fn map_labels(data: &DataMatrix, config: &NmfConfig) -> Result<LabelMapping> {
    let factorization = factorize(data, config)?;
    let field = extract_labels(
        &factorization.factors.w,
        &factorization.factors.h,
        &factorization.membership,
        config.tau,
    )?;
    let labels = field.median_filtered(data.width, data.height)?;
    Ok(LabelMapping {
        factorization,
        field,
        labels,
    })
}
