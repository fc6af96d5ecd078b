//! Large-sample behaviour of estimated Bayes rules: the expected error of the
//! hard-assignment EM rule after `k` iterations, and the asymptotic relative
//! efficiency of the mixture-likelihood rule against the fully classified
//! rule under labels missing completely at random.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{
    discriminant_from_theta, error_rate, std_normal_cdf, std_normal_pdf, tau_from_log_odds,
    Covariance, DiscriminantCoeffs, MixtureParams,
};

/// Relative step for the finite-difference Jacobian and Hessian.
pub const DERIVATIVE_STEP: f64 = 1e-5;

/// Largest condition number accepted when inverting an information matrix.
pub const INFO_CONDITION_CAP: f64 = 1e12;

/// `(h1, h2)` of the error-rate expansion, both with absolute value below one.
pub fn h_coeffs(delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "Mahalanobis distance {delta} must be positive"
        )));
    }
    let phi = std_normal_pdf(0.5 * delta);
    let h1 = phi * (4.0 * phi + delta * (1.0 - 2.0 * std_normal_cdf(-0.5 * delta)));
    let h2 = phi * phi * (4.0 + delta * delta) / h1;
    Ok((h1, h2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionInputs {
    pub delta: f64,
    pub p: usize,
    pub n1c: usize,
    pub n2c: usize,
    pub k: u32,
}

impl ExpansionInputs {
    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput(
                "feature dimension must be at least 1".into(),
            ));
        }
        if self.n1c == 0 || self.n2c == 0 {
            return Err(Error::InvalidInput(
                "each class needs at least one classified feature".into(),
            ));
        }
        if self.p > 1 && self.n1c + self.n2c <= 2 {
            return Err(Error::InvalidInput(
                "n1c + n2c must exceed 2 when p > 1".into(),
            ));
        }
        Ok(())
    }
}

/// First-order coefficient `a1` after `k` iterations.
pub fn a1_k(inputs: &ExpansionInputs) -> Result<f64> {
    inputs.validate()?;
    let (h1, h2) = h_coeffs(inputs.delta)?;
    let d = inputs.delta;
    let k2 = 2 * inputs.k as i32;
    let pm1 = inputs.p as f64 - 1.0;
    let nc = (inputs.n1c + inputs.n2c) as f64;
    let first = h1.powi(k2) * d / 4.0;
    if pm1 == 0.0 {
        return Ok(first);
    }
    let inv = 1.0 / inputs.n1c as f64 + 1.0 / inputs.n2c as f64;
    Ok(first + h2.powi(k2) * pm1 / d * inv + h2.powi(k2) * pm1 * d / (nc - 2.0))
}

/// Expected error rate of the hard-assignment EM rule after `k` iterations,
/// with the `O(n_c^-2)` remainder dropped.
pub fn expected_error_cml(inputs: &ExpansionInputs) -> Result<f64> {
    let a1 = a1_k(inputs)?;
    let half = 0.5 * inputs.delta;
    Ok(std_normal_cdf(-half) + std_normal_pdf(half) / 4.0 * a1)
}

/// Per-observation information matrix in theta coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub matrix: DMatrix<f64>,
    pub parameter_order: Vec<String>,
}

impl InfoMatrix {
    fn univariate(matrix: DMatrix<f64>) -> Self {
        Self {
            matrix,
            parameter_order: ["pi1", "mu1", "mu2", "sigma2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// `(1 - gamma) * self + gamma * other`.
    pub fn blend(&self, other: &Self, gamma: f64) -> Self {
        Self {
            matrix: &self.matrix * (1.0 - gamma) + &other.matrix * gamma,
            parameter_order: self.parameter_order.clone(),
        }
    }
}

/// Interval and refinement settings for the mixture information integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// The integral runs over `[min mu - c sigma, max mu + c sigma]`.
    pub padding_sigmas: f64,
    pub initial_nodes: usize,
    pub max_refinements: usize,
    /// Refinement stops once doubling the nodes changes every entry by less
    /// than this relative amount.
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            padding_sigmas: 10.0,
            initial_nodes: 256,
            max_refinements: 12,
            rel_tol: 1e-6,
        }
    }
}

struct Univariate {
    pi1: f64,
    mu1: f64,
    mu2: f64,
    s2: f64,
}

fn univariate(theta: &MixtureParams) -> Result<Univariate> {
    match theta.covariance() {
        Covariance::Common(s) if theta.dim() == 1 => Ok(Univariate {
            pi1: theta.pi1(),
            mu1: theta.mu1()[0],
            mu2: theta.mu2()[0],
            s2: s[(0, 0)],
        }),
        _ => Err(Error::UnsupportedModel),
    }
}

pub fn fisher_info_classified(theta: &MixtureParams) -> Result<InfoMatrix> {
    let u = univariate(theta)?;
    let diag = DVector::from_vec(vec![
        1.0 / (u.pi1 * (1.0 - u.pi1)),
        u.pi1 / u.s2,
        (1.0 - u.pi1) / u.s2,
        1.0 / (2.0 * u.s2 * u.s2),
    ]);
    Ok(InfoMatrix::univariate(DMatrix::from_diagonal(&diag)))
}

/// Score of the unclassified log-density and the density itself at `y`.
fn mixture_score(u: &Univariate, y: f64) -> ([f64; 4], f64) {
    let s = u.s2.sqrt();
    let (z1, z2) = ((y - u.mu1) / s, (y - u.mu2) / s);
    let l1 = u.pi1.ln() - 0.5 * z1 * z1;
    let l2 = (1.0 - u.pi1).ln() - 0.5 * z2 * z2;
    let (t1, t2) = tau_from_log_odds(l1 - l2);
    let density = (u.pi1 * std_normal_pdf(z1) + (1.0 - u.pi1) * std_normal_pdf(z2)) / s;
    let score = [
        t1 / u.pi1 - t2 / (1.0 - u.pi1),
        t1 * (y - u.mu1) / u.s2,
        t2 * (y - u.mu2) / u.s2,
        t1 * (z1 * z1 - 1.0) / (2.0 * u.s2) + t2 * (z2 * z2 - 1.0) / (2.0 * u.s2),
    ];
    (score, density)
}

fn simpson_info(u: &Univariate, lo: f64, hi: f64, intervals: usize) -> DMatrix<f64> {
    let h = (hi - lo) / intervals as f64;
    let mut acc = DMatrix::zeros(4, 4);
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let (s, f) = mixture_score(u, lo + h * i as f64);
        for a in 0..4 {
            for b in 0..=a {
                acc[(a, b)] += w * f * s[a] * s[b];
            }
        }
    }
    let mut out = acc * (h / 3.0);
    for a in 0..4 {
        for b in 0..a {
            out[(b, a)] = out[(a, b)];
        }
    }
    out
}

/// Per-observation information of an unclassified observation, by composite
/// Simpson quadrature with node doubling.
pub fn fisher_info_mixture(theta: &MixtureParams, quad: &QuadratureSpec) -> Result<InfoMatrix> {
    let u = univariate(theta)?;
    let s = u.s2.sqrt();
    let lo = u.mu1.min(u.mu2) - quad.padding_sigmas * s;
    let hi = u.mu1.max(u.mu2) + quad.padding_sigmas * s;
    let mut intervals = quad.initial_nodes.max(2) & !1;
    let mut prev = simpson_info(&u, lo, hi, intervals);
    for _ in 0..quad.max_refinements {
        intervals *= 2;
        let next = simpson_info(&u, lo, hi, intervals);
        let scale = next.amax();
        let settled = next
            .iter()
            .zip(prev.iter())
            .all(|(a, b)| (a - b).abs() <= quad.rel_tol * a.abs().max(1e-9 * scale));
        prev = next;
        if settled {
            return Ok(InfoMatrix::univariate(prev));
        }
    }
    Err(Error::Quadrature {
        refinements: quad.max_refinements,
    })
}

/// Theta as `(pi1, mu1, mu2, vech(Sigma))` with the lower triangle read
/// column by column. For `p = 1` this is `(pi1, mu1, mu2, sigma^2)`.
pub fn theta_coordinates(theta: &MixtureParams) -> Result<DVector<f64>> {
    let sigma = theta.common_covariance()?;
    let p = theta.dim();
    let mut out = vec![theta.pi1()];
    out.extend(theta.mu1().iter());
    out.extend(theta.mu2().iter());
    for c in 0..p {
        for r in c..p {
            out.push(sigma[(r, c)]);
        }
    }
    Ok(DVector::from_vec(out))
}

pub fn theta_from_coordinates(p: usize, coords: &DVector<f64>) -> Result<MixtureParams> {
    let expected = 1 + 2 * p + p * (p + 1) / 2;
    if coords.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: coords.len(),
        });
    }
    let mu1 = DVector::from_iterator(p, coords.iter().skip(1).take(p).copied());
    let mu2 = DVector::from_iterator(p, coords.iter().skip(1 + p).take(p).copied());
    let mut sigma = DMatrix::zeros(p, p);
    let mut k = 1 + 2 * p;
    for c in 0..p {
        for r in c..p {
            sigma[(r, c)] = coords[k];
            sigma[(c, r)] = coords[k];
            k += 1;
        }
    }
    MixtureParams::homoscedastic(coords[0], mu1, mu2, sigma)
}

fn beta_vector(b: &DiscriminantCoeffs) -> DVector<f64> {
    let mut v = vec![b.beta0];
    v.extend(b.beta.iter());
    DVector::from_vec(v)
}

fn coeffs_from_vector(v: &DVector<f64>) -> DiscriminantCoeffs {
    DiscriminantCoeffs::new(v[0], v.rows(1, v.len() - 1).into_owned())
}

/// Jacobian of `(beta0, beta)` with respect to theta coordinates.
pub fn discriminant_jacobian(theta: &MixtureParams) -> Result<DMatrix<f64>> {
    let x0 = theta_coordinates(theta)?;
    let p = theta.dim();
    let mut jac = DMatrix::zeros(p + 1, x0.len());
    for i in 0..x0.len() {
        let h = DERIVATIVE_STEP * (1.0 + x0[i].abs());
        let mut up = x0.clone();
        up[i] += h;
        let mut down = x0.clone();
        down[i] -= h;
        let bu = beta_vector(&discriminant_from_theta(&theta_from_coordinates(p, &up)?)?);
        let bd = beta_vector(&discriminant_from_theta(&theta_from_coordinates(
            p, &down,
        )?)?);
        jac.set_column(i, &((bu - bd) / (2.0 * h)));
    }
    Ok(jac)
}

/// Central-difference gradient of the error rate in `(beta0, beta)`.
pub fn error_rate_gradient(
    coeffs: &DiscriminantCoeffs,
    theta: &MixtureParams,
) -> Result<DVector<f64>> {
    let b0 = beta_vector(coeffs);
    let mut g = DVector::zeros(b0.len());
    for i in 0..b0.len() {
        let h = DERIVATIVE_STEP * (1.0 + b0[i].abs());
        let mut up = b0.clone();
        up[i] += h;
        let mut down = b0.clone();
        down[i] -= h;
        g[i] = (error_rate(&coeffs_from_vector(&up), theta)?
            - error_rate(&coeffs_from_vector(&down), theta)?)
            / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference Hessian of the error rate in `(beta0, beta)`.
pub fn error_rate_hessian(
    coeffs: &DiscriminantCoeffs,
    theta: &MixtureParams,
) -> Result<DMatrix<f64>> {
    let b0 = beta_vector(coeffs);
    let d = b0.len();
    let err = |v: &DVector<f64>| error_rate(&coeffs_from_vector(v), theta);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let hi = DERIVATIVE_STEP * (1.0 + b0[i].abs());
            let hj = DERIVATIVE_STEP * (1.0 + b0[j].abs());
            let shifted = |si: f64, sj: f64| {
                let mut v = b0.clone();
                v[i] += si * hi;
                v[j] += sj * hj;
                err(&v)
            };
            let value = (shifted(1.0, 1.0)? - shifted(1.0, -1.0)? - shifted(-1.0, 1.0)?
                + shifted(-1.0, -1.0)?)
                / (4.0 * hi * hj);
            hess[(i, j)] = value;
            hess[(j, i)] = value;
        }
    }
    Ok(hess)
}

fn invert_info(info: &InfoMatrix) -> Result<DMatrix<f64>> {
    let m = &info.matrix;
    let eig = SymmetricEigen::new(m.clone());
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= INFO_CONDITION_CAP) {
        return Err(Error::NumericalRank { condition });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::NumericalRank { condition })?;
    Ok(chol.inverse())
}

/// First-order expected excess error `tr(H J info^-1 J^T) / (2n)` of the rule
/// plugged in from an estimate with per-observation information `info`.
pub fn excess_risk_firstorder(info: &InfoMatrix, theta: &MixtureParams, n: f64) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let jac = discriminant_jacobian(theta)?;
    if info.matrix.nrows() != jac.ncols() {
        return Err(Error::DimensionMismatch {
            expected: jac.ncols(),
            found: info.matrix.nrows(),
        });
    }
    let bayes = discriminant_from_theta(theta)?;
    let hess = error_rate_hessian(&bayes, theta)?;
    let cov = &jac * invert_info(info)? * jac.transpose();
    Ok((hess * cov).trace() / (2.0 * n))
}

/// Asymptotic relative efficiency of the rule estimated from a sample with a
/// fraction `gamma` of labels missing completely at random, against the rule
/// from the completely classified sample.
pub fn are_rule(theta: &MixtureParams, gamma: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("gamma {gamma} outside [0, 1]")));
    }
    let cc = fisher_info_classified(theta)?;
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let mix = fisher_info_mixture(theta, quad)?;
    let pc = cc.blend(&mix, gamma);
    Ok(excess_risk_firstorder(&cc, theta, 1.0)? / excess_risk_firstorder(&pc, theta, 1.0)?)
}

/// Univariate homoscedastic model with unit variance, `mu1 = delta / 2` and
/// `mu2 = -delta / 2`.
pub fn univariate_theta(pi1: f64, delta: f64) -> Result<MixtureParams> {
    MixtureParams::homoscedastic(
        pi1,
        DVector::from_element(1, 0.5 * delta),
        DVector::from_element(1, -0.5 * delta),
        DMatrix::identity(1, 1),
    )
}
