use nalgebra::DVector;

use super::bfgs::{central_gradient, minimize, BfgsOptions};
use super::{fit_em_ignorable, CovarianceModel, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::likelihoods::{loglik_full, Contributions};
use crate::model::{FullParams, MissingnessParams};
use crate::reparam::{full_from_unconstrained, full_to_unconstrained, ThetaLayout};
use crate::sample::PartialSample;

/// Finite-difference step relative to `1 + |coordinate|`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiConstraint {
    #[default]
    Free,
    /// Hold `xi1 = 0`, so missingness does not depend on the features.
    EntropyCoefficientZero,
}

struct Problem<'a> {
    sample: &'a PartialSample,
    layout: ThetaLayout,
    base: DVector<f64>,
    free: Vec<usize>,
}

impl Problem<'_> {
    fn expand(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut u = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = z[k];
        }
        u
    }

    fn params(&self, z: &DVector<f64>) -> Result<FullParams> {
        full_from_unconstrained(self.layout, self.expand(z).as_slice())
    }

    fn neg_loglik(&self, z: &DVector<f64>) -> f64 {
        match self
            .params(z)
            .and_then(|psi| loglik_full(&psi, self.sample, Contributions::Skip))
        {
            Ok(v) if v.value.is_finite() => -v.value,
            _ => f64::INFINITY,
        }
    }
}

/// Maximizes the full likelihood (ignorable part plus the entropy-logistic
/// missing-label model) by quasi-Newton ascent in unconstrained coordinates
/// with central finite-difference gradients, starting from the ignorable EM
/// estimate, `xi0 = logit(n_u / n)` and `xi1 = 0`.
pub fn fit_full(
    sample: &PartialSample,
    opts: &FitOptions,
    model: CovarianceModel,
    constraint: XiConstraint,
) -> Result<FitResult> {
    let c = sample.counts();
    if c.n_classified == 0 || c.n_unclassified == 0 {
        return Err(Error::InsufficientData(
            "full likelihood needs both classified and unclassified rows".into(),
        ));
    }
    let start = fit_em_ignorable(sample, opts, model)?;
    let xi0 = (c.n_unclassified as f64 / c.n_classified as f64).ln();
    let psi0 = FullParams::new(start.theta_hat, MissingnessParams::new(xi0, 0.0)?);
    let layout = ThetaLayout::of(&psi0.theta);
    let base = full_to_unconstrained(&psi0);
    let xi1_index = layout.xi_offset() + 1;
    let free: Vec<usize> = (0..layout.full_len())
        .filter(|&i| !(constraint == XiConstraint::EntropyCoefficientZero && i == xi1_index))
        .collect();
    let problem = Problem {
        sample,
        layout,
        base: base.clone(),
        free,
    };
    let z0 = DVector::from_iterator(problem.free.len(), problem.free.iter().map(|&i| base[i]));
    let f = |z: &DVector<f64>| problem.neg_loglik(z);
    let bfgs = BfgsOptions {
        max_iterations: opts.max_iterations,
        rel_tol: opts.rel_tol,
        grad_tol: 1e-9,
        max_resets: 3,
    };
    let out = minimize(f, |z| central_gradient(&f, z, FD_STEP), z0, bfgs).map_err(|e| match e {
        Error::NonConvergence {
            iterations,
            best_objective,
            best_point,
        } => Error::NonConvergence {
            iterations,
            best_objective: -best_objective,
            best_point: problem
                .expand(&DVector::from_vec(best_point))
                .iter()
                .copied()
                .collect(),
        },
        other => other,
    })?;
    let psi = problem.params(&out.x)?;
    Ok(FitResult {
        theta_hat: psi.theta,
        xi_hat: Some(psi.xi),
        objective_trace: out.trace.iter().map(|v| -v).collect(),
        beta_trace: Vec::new(),
        converged: out.converged,
        iterations: out.iterations,
        at_variance_floor: false,
    })
}

/// Central finite-difference gradient of the full log-likelihood in the
/// unconstrained coordinates of [`crate::reparam`].
pub fn full_loglik_fd_gradient(psi: &FullParams, sample: &PartialSample) -> Result<DVector<f64>> {
    let layout = ThetaLayout::of(&psi.theta);
    let u0 = full_to_unconstrained(psi);
    let f = |u: &DVector<f64>| {
        full_from_unconstrained(layout, u.as_slice())
            .and_then(|p| loglik_full(&p, sample, Contributions::Skip))
            .map_or(f64::NAN, |v| v.value)
    };
    Ok(central_gradient(&f, &u0, FD_STEP))
}
