use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::CovarianceModel;
use crate::error::{Error, Result};
use crate::model::{condition_estimate, Covariance, MixtureParams, CONDITION_CAP};
use crate::sample::PartialSample;

/// Weighted maximization step. `weights[j][i]` is the effective weight of
/// row `j` in component `i` (observation weight times responsibility).
pub(crate) struct MStep<'a> {
    pub sample: &'a PartialSample,
    pub model: CovarianceModel,
    pub fixed_pi1: Option<f64>,
    /// Minimum eigenvalue of any fitted covariance; zero disables clamping
    /// and turns singular scatter into an error.
    pub floor: f64,
}

pub(crate) struct MStepOutput {
    pub theta: MixtureParams,
    pub at_floor: bool,
}

impl MStep<'_> {
    pub fn run(&self, weights: &[[f64; 2]]) -> Result<MStepOutput> {
        let p = self.sample.dim();
        let mut mass = [0.0; 2];
        let mut sums = [DVector::zeros(p), DVector::zeros(p)];
        for (y, w) in self.sample.rows().zip(weights) {
            for i in 0..2 {
                if w[i] != 0.0 {
                    mass[i] += w[i];
                    for a in 0..p {
                        sums[i][a] += w[i] * y[a];
                    }
                }
            }
        }
        if mass[0] <= 0.0 || mass[1] <= 0.0 {
            return Err(Error::DegenerateData(
                "a component received zero weight".into(),
            ));
        }
        let means = [&sums[0] / mass[0], &sums[1] / mass[1]];
        let mut scatter = [DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
        let mut r = vec![0.0; p];
        for (y, w) in self.sample.rows().zip(weights) {
            for i in 0..2 {
                if w[i] == 0.0 {
                    continue;
                }
                for a in 0..p {
                    r[a] = y[a] - means[i][a];
                }
                let s = &mut scatter[i];
                for a in 0..p {
                    for b in 0..=a {
                        s[(a, b)] += w[i] * r[a] * r[b];
                    }
                }
            }
        }
        for s in scatter.iter_mut() {
            for a in 0..p {
                for b in 0..a {
                    s[(b, a)] = s[(a, b)];
                }
            }
        }
        let pi1 = self.fixed_pi1.unwrap_or(mass[0] / (mass[0] + mass[1]));
        let mut at_floor = false;
        let covariance = match self.model {
            CovarianceModel::Homoscedastic => {
                let s = (&scatter[0] + &scatter[1]) / (mass[0] + mass[1]);
                Covariance::Common(self.regularize(s, &mut at_floor)?)
            }
            CovarianceModel::Heteroscedastic => {
                let [s1, s2] = scatter;
                Covariance::PerClass(
                    self.regularize(s1 / mass[0], &mut at_floor)?,
                    self.regularize(s2 / mass[1], &mut at_floor)?,
                )
            }
        };
        let [mu1, mu2] = means;
        let theta = MixtureParams::new(pi1, mu1, mu2, covariance).map_err(|e| match e {
            Error::NotPositiveDefinite => {
                Error::DegenerateData("fitted covariance is not positive definite".into())
            }
            other => other,
        })?;
        Ok(MStepOutput { theta, at_floor })
    }

    fn regularize(&self, s: DMatrix<f64>, at_floor: &mut bool) -> Result<DMatrix<f64>> {
        if self.floor <= 0.0 {
            let condition = condition_estimate(&s);
            if !(condition <= CONDITION_CAP) {
                return Err(Error::DegenerateData(format!(
                    "scatter matrix is singular (condition estimate {condition:.3e})"
                )));
            }
            return Ok(s);
        }
        let eig = SymmetricEigen::new(s.clone());
        if eig.eigenvalues.min() >= self.floor {
            return Ok(s);
        }
        *at_floor = true;
        let clamped = eig.eigenvalues.map(|v| v.max(self.floor));
        let rebuilt =
            &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        let p = rebuilt.nrows();
        Ok(DMatrix::from_fn(p, p, |i, j| {
            0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)])
        }))
    }
}

/// `factor * trace(total covariance) / p` over every row of the sample.
pub(crate) fn variance_floor(sample: &PartialSample, factor: f64) -> f64 {
    let p = sample.dim();
    let n = sample.len() as f64;
    let mut mean = vec![0.0; p];
    for y in sample.rows() {
        for a in 0..p {
            mean[a] += y[a] / n;
        }
    }
    let mut trace = 0.0;
    for y in sample.rows() {
        for a in 0..p {
            trace += (y[a] - mean[a]).powi(2) / n;
        }
    }
    factor * trace / p as f64
}
