//! Estimation of two-class normal Bayes allocation rules from partially
//! classified samples.

pub mod asymptotics;
pub mod error;
pub mod estimation;
pub mod likelihoods;
pub mod model;
pub mod reparam;
pub mod sample;
pub mod simulation;

pub use error::{Error, Result};
pub use model::{
    bayes_allocate, discriminant_from_theta, entropy, error_rate, mahalanobis_delta,
    missingness_prob, posterior_tau, std_normal_cdf, std_normal_pdf, Class, Covariance,
    DiscriminantCoeffs, FullParams, MissingnessParams, MixtureParams,
};
pub use sample::PartialSample;
