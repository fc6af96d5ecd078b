//! Unconstrained coordinates for optimization and finite differencing.
//!
//! Layout: `logit(pi1)`, `mu1`, `mu2`, then the lower Cholesky factor of each
//! covariance (one for a common covariance, two otherwise) stored row by row
//! with the diagonal on the log scale. Full parameters append `xi0, xi1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Class, Covariance, FullParams, MissingnessParams, MixtureParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaLayout {
    pub dim: usize,
    pub common: bool,
}

impl ThetaLayout {
    pub fn of(theta: &MixtureParams) -> Self {
        Self {
            dim: theta.dim(),
            common: theta.covariance().is_common(),
        }
    }

    pub fn chol_len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn n_covariances(&self) -> usize {
        if self.common {
            1
        } else {
            2
        }
    }

    /// Length of the theta block.
    pub fn len(&self) -> usize {
        1 + 2 * self.dim + self.n_covariances() * self.chol_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length including the two missingness coefficients.
    pub fn full_len(&self) -> usize {
        self.len() + 2
    }

    pub fn mean_offset(&self, class: Class) -> usize {
        1 + class.index() * self.dim
    }

    pub fn chol_offset(&self, class: Class) -> usize {
        let base = 1 + 2 * self.dim;
        if self.common {
            base
        } else {
            base + class.index() * self.chol_len()
        }
    }

    pub fn xi_offset(&self) -> usize {
        self.len()
    }
}

fn push_chol(out: &mut Vec<f64>, cov: &DMatrix<f64>) {
    let l = cov
        .clone()
        .cholesky()
        .expect("validated covariance")
        .unpack();
    for r in 0..cov.nrows() {
        for c in 0..=r {
            out.push(if r == c { l[(r, r)].ln() } else { l[(r, c)] });
        }
    }
}

fn read_chol(u: &[f64], p: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(p, p);
    let mut k = 0;
    for r in 0..p {
        for c in 0..=r {
            l[(r, c)] = if r == c { u[k].exp() } else { u[k] };
            k += 1;
        }
    }
    let s = &l * l.transpose();
    // exact symmetry
    DMatrix::from_fn(p, p, |i, j| if i >= j { s[(i, j)] } else { s[(j, i)] })
}

pub fn theta_to_unconstrained(theta: &MixtureParams) -> DVector<f64> {
    let mut out = Vec::with_capacity(ThetaLayout::of(theta).len());
    out.push((theta.pi1() / theta.pi2()).ln());
    out.extend(theta.mu1().iter());
    out.extend(theta.mu2().iter());
    match theta.covariance() {
        Covariance::Common(s) => push_chol(&mut out, s),
        Covariance::PerClass(s1, s2) => {
            push_chol(&mut out, s1);
            push_chol(&mut out, s2);
        }
    }
    DVector::from_vec(out)
}

pub fn theta_from_unconstrained(layout: ThetaLayout, u: &[f64]) -> Result<MixtureParams> {
    if u.len() < layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            found: u.len(),
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite unconstrained coordinate".into(),
        ));
    }
    let p = layout.dim;
    let a = u[0];
    // logistic without rounding pi1 to exactly 0 or 1
    let pi1 = crate::model::logistic(a).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    let mu1 = DVector::from_column_slice(&u[1..1 + p]);
    let mu2 = DVector::from_column_slice(&u[1 + p..1 + 2 * p]);
    let c1 = layout.chol_offset(Class::Class1);
    let covariance = if layout.common {
        Covariance::Common(read_chol(&u[c1..c1 + layout.chol_len()], p))
    } else {
        let c2 = layout.chol_offset(Class::Class2);
        Covariance::PerClass(
            read_chol(&u[c1..c1 + layout.chol_len()], p),
            read_chol(&u[c2..c2 + layout.chol_len()], p),
        )
    };
    MixtureParams::new(pi1, mu1, mu2, covariance)
}

pub fn full_to_unconstrained(psi: &FullParams) -> DVector<f64> {
    let theta = theta_to_unconstrained(&psi.theta);
    let mut out: Vec<f64> = theta.iter().copied().collect();
    out.push(psi.xi.xi0);
    out.push(psi.xi.xi1);
    DVector::from_vec(out)
}

pub fn full_from_unconstrained(layout: ThetaLayout, u: &[f64]) -> Result<FullParams> {
    if u.len() != layout.full_len() {
        return Err(Error::DimensionMismatch {
            expected: layout.full_len(),
            found: u.len(),
        });
    }
    let theta = theta_from_unconstrained(layout, &u[..layout.len()])?;
    let k = layout.xi_offset();
    Ok(FullParams::new(
        theta,
        MissingnessParams::new(u[k], u[k + 1])?,
    ))
}
