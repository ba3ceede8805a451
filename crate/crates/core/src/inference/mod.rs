//! Standardization, conjugate updates, and the Gibbs sampler for the
//! constrained Gaussian mixture.

mod gibbs;
mod niw;
mod standardize;
mod variant;

pub(crate) use gibbs::normalize_log_weights;
pub use gibbs::{gibbs_fit, gibbs_fit_with_progress, responsibilities, FitConfig, GibbsSampler, MixtureParams, PosteriorSamples};
pub use niw::{niw_log_density_1d, niw_posterior};
pub use standardize::{fit_standardizer, transform_pair, Standardizer};
pub use variant::{variant_projection, ModelVariant};
