//! Log-likelihoods of a partially classified sample: classified,
//! unclassified, ignorable, missing-label-indicator, full, and the
//! fractionally supervised combination, with analytic gradients in the
//! unconstrained coordinates of [`crate::reparam`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{
    entropy_unchecked, log_add_exp, softplus, tau_from_log_odds, Class, FullParams, MixtureDensity,
    MixtureParams,
};
use crate::reparam::ThetaLayout;
use crate::sample::PartialSample;

/// Whether per-observation contributions are materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Contributions {
    #[default]
    Skip,
    Keep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub per_observation: Option<Vec<f64>>,
    /// First row whose contribution is `-inf`, if any.
    pub neg_inf_row: Option<usize>,
}

impl ObjectiveValue {
    fn zero(n: usize, detail: Contributions) -> Self {
        Self {
            value: 0.0,
            per_observation: (detail == Contributions::Keep).then(|| vec![0.0; n]),
            neg_inf_row: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    fn combine(a: &Self, wa: f64, b: &Self, wb: f64) -> Self {
        let per_observation = match (&a.per_observation, &b.per_observation) {
            (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(u, v)| wa * u + wb * v).collect()),
            _ => None,
        };
        let neg_inf_row = match (a.neg_inf_row, b.neg_inf_row) {
            (Some(i), Some(j)) => Some(i.min(j)),
            (i, j) => i.or(j),
        };
        Self {
            value: wa * a.value + wb * b.value,
            per_observation,
            neg_inf_row,
        }
    }
}

/// Neumaier-compensated running sum, in row order.
#[derive(Default)]
struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        if self.sum.is_finite() {
            self.sum + self.comp
        } else {
            self.sum
        }
    }
}

fn check_dims(theta: &MixtureParams, sample: &PartialSample) -> Result<()> {
    if theta.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            found: sample.dim(),
        });
    }
    Ok(())
}

fn sum_rows(
    sample: &PartialSample,
    detail: Contributions,
    mut row: impl FnMut(usize, &[f64]) -> Option<f64>,
) -> ObjectiveValue {
    let mut out = ObjectiveValue::zero(sample.len(), detail);
    let mut acc = Accumulator::default();
    for (j, y) in sample.rows().enumerate() {
        if let Some(c) = row(j, y) {
            if c == f64::NEG_INFINITY && out.neg_inf_row.is_none() {
                out.neg_inf_row = Some(j);
            }
            acc.add(c);
            if let Some(per) = out.per_observation.as_mut() {
                per[j] = c;
            }
        }
    }
    out.value = acc.total();
    out
}

pub fn loglik_classified(
    theta: &MixtureParams,
    sample: &PartialSample,
    detail: Contributions,
) -> Result<ObjectiveValue> {
    check_dims(theta, sample)?;
    let dens = theta.density()?;
    let mut scratch = vec![0.0; theta.dim()];
    Ok(sum_rows(sample, detail, |j, y| {
        sample.label(j).map(|c| {
            let i = c.index();
            dens.log_pi[i] + dens.comps[i].log_density(y, &mut scratch)
        })
    }))
}

pub fn loglik_unclassified(
    theta: &MixtureParams,
    sample: &PartialSample,
    detail: Contributions,
) -> Result<ObjectiveValue> {
    check_dims(theta, sample)?;
    let dens = theta.density()?;
    let mut scratch = vec![0.0; theta.dim()];
    Ok(sum_rows(sample, detail, |j, y| {
        sample.is_missing(j).then(|| {
            let [l1, l2] = dens.log_joint(y, &mut scratch);
            log_add_exp(l1, l2)
        })
    }))
}

/// Log-likelihood that ignores the missingness mechanism: classified plus
/// unclassified parts.
pub fn loglik_ignorable(
    theta: &MixtureParams,
    sample: &PartialSample,
    detail: Contributions,
) -> Result<ObjectiveValue> {
    let c = loglik_classified(theta, sample, detail)?;
    let u = loglik_unclassified(theta, sample, detail)?;
    Ok(ObjectiveValue::combine(&c, 1.0, &u, 1.0))
}

/// Log-likelihood of the missing-label indicators under the entropy-logistic
/// model, evaluated in log space so near-certain labeling stays finite.
pub fn loglik_missing(
    psi: &FullParams,
    sample: &PartialSample,
    detail: Contributions,
) -> Result<ObjectiveValue> {
    check_dims(&psi.theta, sample)?;
    let dens = psi.theta.density()?;
    let mut scratch = vec![0.0; sample.dim()];
    Ok(sum_rows(sample, detail, |j, y| {
        let [l1, l2] = dens.log_joint(y, &mut scratch);
        let (t1, t2) = tau_from_log_odds(l1 - l2);
        let x = psi.xi.linear_predictor(entropy_unchecked(t1, t2));
        // log q = -softplus(-x), log(1 - q) = -softplus(x)
        Some(if sample.is_missing(j) {
            -softplus(-x)
        } else {
            -softplus(x)
        })
    }))
}

pub fn loglik_full(
    psi: &FullParams,
    sample: &PartialSample,
    detail: Contributions,
) -> Result<ObjectiveValue> {
    let ig = loglik_ignorable(&psi.theta, sample, detail)?;
    let miss = loglik_missing(psi, sample, detail)?;
    Ok(ObjectiveValue::combine(&ig, 1.0, &miss, 1.0))
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Fractionally supervised objective `alpha * log L_C + (1 - alpha) * log L_UC`.
pub fn fsc_objective(
    theta: &MixtureParams,
    sample: &PartialSample,
    alpha: f64,
    detail: Contributions,
) -> Result<ObjectiveValue> {
    check_alpha(alpha)?;
    let c = loglik_classified(theta, sample, detail)?;
    let u = loglik_unclassified(theta, sample, detail)?;
    Ok(ObjectiveValue::combine(&c, alpha, &u, 1.0 - alpha))
}

/// Weights applied to the classified, unclassified and missingness parts.
#[derive(Debug, Clone, Copy)]
struct GradientWeights {
    classified: f64,
    unclassified: f64,
    missing: bool,
}

/// Per-component sufficient statistics of the score: `sum c`, `sum c w` and
/// `sum c w w^T` with `w = Sigma^{-1}(y - mu)`.
struct ScoreStats {
    count: f64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl ScoreStats {
    fn new(p: usize) -> Self {
        Self {
            count: 0.0,
            first: vec![0.0; p],
            second: vec![0.0; p * p],
        }
    }

    fn add(&mut self, c: f64, w: &[f64]) {
        if c == 0.0 {
            return;
        }
        let p = w.len();
        self.count += c;
        for a in 0..p {
            self.first[a] += c * w[a];
            for b in 0..p {
                self.second[a * p + b] += c * w[a] * w[b];
            }
        }
    }
}

fn accumulate_gradient(
    psi_theta: &MixtureParams,
    xi: Option<(f64, f64)>,
    sample: &PartialSample,
    weights: GradientWeights,
) -> Result<DVector<f64>> {
    check_dims(psi_theta, sample)?;
    let layout = ThetaLayout::of(psi_theta);
    let dens: MixtureDensity = psi_theta.density()?;
    let p = layout.dim;
    let (pi1, pi2) = (psi_theta.pi1(), psi_theta.pi2());
    let mut stats = [ScoreStats::new(p), ScoreStats::new(p)];
    let mut d_logit = 0.0;
    let mut d_xi = [0.0; 2];
    let mut w = [vec![0.0; p], vec![0.0; p]];

    for (j, y) in sample.rows().enumerate() {
        let l1 = dens.log_pi[0] + dens.comps[0].log_density(y, &mut w[0]);
        let l2 = dens.log_pi[1] + dens.comps[1].log_density(y, &mut w[1]);
        dens.comps[0].back_substitute(&mut w[0]);
        dens.comps[1].back_substitute(&mut w[1]);
        let eta = l1 - l2;
        let (t1, t2) = tau_from_log_odds(eta);
        let mut c = [0.0; 2];
        match sample.label(j) {
            Some(class) => {
                let wc = weights.classified;
                c[class.index()] += wc;
                d_logit += wc * if class == Class::Class1 { pi2 } else { -pi1 };
            }
            None => {
                let wu = weights.unclassified;
                c[0] += wu * t1;
                c[1] += wu * t2;
                d_logit += wu * (t1 - pi1);
            }
        }
        if let (true, Some((xi0, xi1))) = (weights.missing, xi) {
            let e = entropy_unchecked(t1, t2);
            let x = xi0 + xi1 * e;
            let m = if sample.is_missing(j) { 1.0 } else { 0.0 };
            let resid = m - crate::model::logistic(x);
            d_xi[0] += resid;
            d_xi[1] += resid * e;
            // de/d(eta) = -eta * tau1 * tau2
            let f = resid * xi1 * (-eta * t1 * t2);
            if f != 0.0 && f.is_finite() {
                d_logit += f;
                c[0] += f;
                c[1] -= f;
            }
        }
        stats[0].add(c[0], &w[0]);
        stats[1].add(c[1], &w[1]);
    }

    let len = if weights.missing {
        layout.full_len()
    } else {
        layout.len()
    };
    let mut grad = DVector::zeros(len);
    grad[0] = d_logit;
    for class in [Class::Class1, Class::Class2] {
        let off = layout.mean_offset(class);
        for a in 0..p {
            grad[off + a] = stats[class.index()].first[a];
        }
    }
    // G = 1/2 (S - C P); dl/dL = 2 G L
    let g_matrix = |k: usize| -> Vec<f64> {
        let prec = dens.comps[k].precision();
        let s = &stats[k];
        (0..p * p)
            .map(|idx| 0.5 * (s.second[idx] - s.count * prec[idx]))
            .collect()
    };
    let write_chol = |grad: &mut DVector<f64>, g: &[f64], k: usize, off: usize| {
        let comp = &dens.comps[k];
        let mut idx = off;
        for r in 0..p {
            for col in 0..=r {
                let mut m = 0.0;
                for t in col..p {
                    m += 2.0 * g[r * p + t] * comp.chol_entry(t, col);
                }
                grad[idx] += if r == col {
                    m * comp.chol_entry(r, r)
                } else {
                    m
                };
                idx += 1;
            }
        }
    };
    if layout.common {
        let g: Vec<f64> = g_matrix(0)
            .iter()
            .zip(g_matrix(1))
            .map(|(a, b)| a + b)
            .collect();
        write_chol(&mut grad, &g, 0, layout.chol_offset(Class::Class1));
    } else {
        for class in [Class::Class1, Class::Class2] {
            let k = class.index();
            write_chol(&mut grad, &g_matrix(k), k, layout.chol_offset(class));
        }
    }
    if weights.missing {
        let off = layout.xi_offset();
        grad[off] = d_xi[0];
        grad[off + 1] = d_xi[1];
    }
    Ok(grad)
}

/// Gradient of [`loglik_classified`] in unconstrained theta coordinates.
pub fn grad_loglik_classified(
    theta: &MixtureParams,
    sample: &PartialSample,
) -> Result<DVector<f64>> {
    accumulate_gradient(
        theta,
        None,
        sample,
        GradientWeights {
            classified: 1.0,
            unclassified: 0.0,
            missing: false,
        },
    )
}

pub fn grad_loglik_unclassified(
    theta: &MixtureParams,
    sample: &PartialSample,
) -> Result<DVector<f64>> {
    accumulate_gradient(
        theta,
        None,
        sample,
        GradientWeights {
            classified: 0.0,
            unclassified: 1.0,
            missing: false,
        },
    )
}

pub fn grad_loglik_ignorable(
    theta: &MixtureParams,
    sample: &PartialSample,
) -> Result<DVector<f64>> {
    accumulate_gradient(
        theta,
        None,
        sample,
        GradientWeights {
            classified: 1.0,
            unclassified: 1.0,
            missing: false,
        },
    )
}

pub fn grad_fsc_objective(
    theta: &MixtureParams,
    sample: &PartialSample,
    alpha: f64,
) -> Result<DVector<f64>> {
    check_alpha(alpha)?;
    accumulate_gradient(
        theta,
        None,
        sample,
        GradientWeights {
            classified: alpha,
            unclassified: 1.0 - alpha,
            missing: false,
        },
    )
}

/// Gradient of [`loglik_missing`] in unconstrained full coordinates.
pub fn grad_loglik_missing(psi: &FullParams, sample: &PartialSample) -> Result<DVector<f64>> {
    accumulate_gradient(
        &psi.theta,
        Some((psi.xi.xi0, psi.xi.xi1)),
        sample,
        GradientWeights {
            classified: 0.0,
            unclassified: 0.0,
            missing: true,
        },
    )
}

pub fn grad_loglik_full(psi: &FullParams, sample: &PartialSample) -> Result<DVector<f64>> {
    accumulate_gradient(
        &psi.theta,
        Some((psi.xi.xi0, psi.xi.xi1)),
        sample,
        GradientWeights {
            classified: 1.0,
            unclassified: 1.0,
            missing: true,
        },
    )
}
