//! Information measures: exact plug-in PID on discrete joints, a binning estimator for
//! sampled data, and a differentiable Gaussian surrogate.
//!
//! Plug-in quantities are in bits, Gaussian ones in nats (1 bit = ln 2 nats).

pub mod discrete;
pub mod gaussian;
pub mod quantize;

pub use discrete::{
    cond_mutual_info, entropy, interaction_info, mutual_info, pid_decompose, JointDistribution, PidResult, Variable,
};
pub use gaussian::{
    gaussian_mi, gaussian_mi_graph, interaction_info_gaussian, interaction_info_gaussian_graph, project,
    sample_covariance, IiProjections, DEFAULT_PROJECTION_DIM, DEFAULT_RIDGE,
};
pub use quantize::{quantize, SampleBatch, Summarizer};

pub const DEFAULT_BINS: usize = 16;

/// Plug-in interaction information (bits) of binned scalar summaries.
pub fn plugin_interaction_info(samples: &SampleBatch, bins: usize, summarizer: Summarizer) -> crate::Result<f64> {
    interaction_info(&quantize(samples, bins, summarizer)?)
}
