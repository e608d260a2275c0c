//! Gaussian mixture representation, weighted EM and BIC model selection.

mod data;
mod em;
mod model;
mod select;

pub use data::DataMatrix;
pub use em::{
    bic, bic_value, e_step, em_fit, log_density, loglik, min_cluster_mass, weighted_m_step,
    EmConfig, FitResult, FitStatus,
};
pub use model::{CovarianceFamily, MixtureModel, ResponsibilityMatrix, WeightVector};
pub use select::{
    fit_structure, select_model, select_model_with_table, ward_init, ward_labels, Candidate,
};
