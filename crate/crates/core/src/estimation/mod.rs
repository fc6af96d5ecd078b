//! Parameter estimation from partially classified samples: the supervised
//! closed form, soft EM on the ignorable likelihood, hard-assignment EM
//! (classification maximum likelihood), fractionally supervised EM and direct
//! maximization of the full likelihood.

mod bfgs;
mod em;
mod full;
mod labels;
mod mstep;

use crate::model::{DiscriminantCoeffs, FullParams, MissingnessParams, MixtureParams};

pub use em::{fit_cml, fit_em_ignorable, fit_fsc, fit_supervised};
pub use full::{fit_full, full_loglik_fd_gradient, XiConstraint, FD_STEP};
pub use labels::{agreement_score, resolve_label_switching, Reference};

/// Covariance structure of the fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceModel {
    Homoscedastic,
    Heteroscedastic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Start from the supervised estimate on the classified rows.
    FromClassified,
    /// Best of `k` random one-hot starts, seeded from `FitOptions::seed`.
    Random(usize),
    Provided(MixtureParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub variance_floor_factor: f64,
    pub seed: u64,
    pub init: Init,
    /// Known mixing proportion; when set it is never re-estimated.
    pub fixed_pi1: Option<f64>,
    /// Random starts tried when `FromClassified` is unusable or degenerates.
    pub fallback_restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            rel_tol: 1e-8,
            variance_floor_factor: 1e-6,
            seed: 0,
            init: Init::FromClassified,
            fixed_pi1: None,
            fallback_restarts: 10,
        }
    }
}

impl FitOptions {
    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.max_iterations == 0 {
            return Err(crate::Error::InvalidInput(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.rel_tol > 0.0) || !(self.variance_floor_factor > 0.0) {
            return Err(crate::Error::InvalidInput(
                "tolerances must be strictly positive".into(),
            ));
        }
        if let Some(pi) = self.fixed_pi1 {
            if !(pi > 0.0 && pi < 1.0) {
                return Err(crate::Error::InvalidInput(format!(
                    "fixed mixing proportion {pi} outside (0, 1)"
                )));
            }
        }
        if let Init::Random(0) = self.init {
            return Err(crate::Error::InvalidInput(
                "random initialization needs at least one start".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: MixtureParams,
    /// Present for full-likelihood fits.
    pub xi_hat: Option<MissingnessParams>,
    /// Objective at the initial estimate followed by its value after every
    /// iteration.
    pub objective_trace: Vec<f64>,
    /// Discriminant coefficients aligned with `objective_trace`; empty for
    /// heteroscedastic fits.
    pub beta_trace: Vec<DiscriminantCoeffs>,
    pub converged: bool,
    pub iterations: usize,
    /// Some fitted covariance eigenvalue was clamped to the variance floor.
    pub at_variance_floor: bool,
}

impl FitResult {
    pub fn full_params(&self) -> Option<FullParams> {
        self.xi_hat
            .map(|xi| FullParams::new(self.theta_hat.clone(), xi))
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}
