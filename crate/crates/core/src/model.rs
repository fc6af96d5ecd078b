//! The two-class normal model and the primitives every estimator builds on:
//! the linear Bayes rule, posterior class probabilities, the entropy of the
//! posterior, and the entropy-logistic label-dropping probability.

use libm::erfc;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest eigenvalue ratio accepted before a covariance matrix is rejected
/// as ill-conditioned.
pub const CONDITION_CAP: f64 = 1e12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Class1,
    Class2,
}

impl Class {
    pub fn index(self) -> usize {
        match self {
            Class::Class1 => 0,
            Class::Class2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Class::Class1
        } else {
            Class::Class2
        }
    }

    pub fn other(self) -> Self {
        match self {
            Class::Class1 => Class::Class2,
            Class::Class2 => Class::Class1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Common(DMatrix<f64>),
    PerClass(DMatrix<f64>, DMatrix<f64>),
}

impl Covariance {
    pub fn is_common(&self) -> bool {
        matches!(self, Covariance::Common(_))
    }

    pub fn for_class(&self, class: Class) -> &DMatrix<f64> {
        match (self, class) {
            (Covariance::Common(s), _) => s,
            (Covariance::PerClass(s1, _), Class::Class1) => s1,
            (Covariance::PerClass(_, s2), Class::Class2) => s2,
        }
    }
}

/// Parameters of the two-component normal mixture. `pi2` is always derived
/// from `pi1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pi1: f64,
    mu1: DVector<f64>,
    mu2: DVector<f64>,
    covariance: Covariance,
}

impl MixtureParams {
    pub fn new(
        pi1: f64,
        mu1: DVector<f64>,
        mu2: DVector<f64>,
        covariance: Covariance,
    ) -> Result<Self> {
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "mixing proportion {pi1} is not in (0, 1)"
            )));
        }
        let p = mu1.len();
        if p == 0 {
            return Err(Error::InvalidInput("feature dimension is zero".into()));
        }
        if mu2.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: mu2.len(),
            });
        }
        if mu1.iter().chain(mu2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("class means must be finite".into()));
        }
        match &covariance {
            Covariance::Common(s) => check_spd(s, p)?,
            Covariance::PerClass(s1, s2) => {
                check_spd(s1, p)?;
                check_spd(s2, p)?;
            }
        }
        Ok(Self {
            pi1,
            mu1,
            mu2,
            covariance,
        })
    }

    pub fn homoscedastic(
        pi1: f64,
        mu1: DVector<f64>,
        mu2: DVector<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(pi1, mu1, mu2, Covariance::Common(sigma))
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn pi2(&self) -> f64 {
        1.0 - self.pi1
    }

    pub fn prior(&self, class: Class) -> f64 {
        match class {
            Class::Class1 => self.pi1,
            Class::Class2 => self.pi2(),
        }
    }

    pub fn mu1(&self) -> &DVector<f64> {
        &self.mu1
    }

    pub fn mu2(&self) -> &DVector<f64> {
        &self.mu2
    }

    pub fn mean(&self, class: Class) -> &DVector<f64> {
        match class {
            Class::Class1 => &self.mu1,
            Class::Class2 => &self.mu2,
        }
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    pub fn common_covariance(&self) -> Result<&DMatrix<f64>> {
        match &self.covariance {
            Covariance::Common(s) => Ok(s),
            Covariance::PerClass(..) => Err(Error::UnsupportedModel),
        }
    }

    /// The same mixture with the component labels exchanged.
    pub fn swapped(&self) -> Self {
        let covariance = match &self.covariance {
            Covariance::Common(s) => Covariance::Common(s.clone()),
            Covariance::PerClass(s1, s2) => Covariance::PerClass(s2.clone(), s1.clone()),
        };
        Self {
            pi1: 1.0 - self.pi1,
            mu1: self.mu2.clone(),
            mu2: self.mu1.clone(),
            covariance,
        }
    }

    pub(crate) fn density(&self) -> Result<MixtureDensity> {
        MixtureDensity::new(self)
    }
}

fn check_spd(s: &DMatrix<f64>, p: usize) -> Result<()> {
    if s.nrows() != p || s.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: s.nrows().max(s.ncols()),
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "covariance entries must be finite".into(),
        ));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    for i in 0..p {
        for j in 0..i {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    if s.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let min_eig = SymmetricEigen::new(s.clone()).eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Ratio of the extreme eigenvalues of a symmetric positive definite matrix.
pub fn condition_estimate(s: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(s.clone()).eigenvalues;
    let (min, max) = (eig.min(), eig.max());
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_common(theta: &MixtureParams, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let sigma = theta.common_covariance()?;
    let condition = condition_estimate(sigma);
    if condition > CONDITION_CAP {
        return Err(Error::IllConditioned { condition });
    }
    let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(rhs))
}

/// Coefficients of the linear discriminant `d(y) = beta0 + beta^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantCoeffs {
    pub beta0: f64,
    pub beta: DVector<f64>,
}

impl DiscriminantCoeffs {
    pub fn new(beta0: f64, beta: DVector<f64>) -> Self {
        Self { beta0, beta }
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.beta0 + self.beta.iter().zip(y).map(|(b, v)| b * v).sum::<f64>()
    }

    /// A zero direction cannot discriminate.
    pub fn is_degenerate(&self) -> bool {
        self.beta.iter().all(|&b| b == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.beta0, &self.beta * c)
    }
}

pub fn discriminant_from_theta(theta: &MixtureParams) -> Result<DiscriminantCoeffs> {
    let diff = theta.mu1() - theta.mu2();
    let beta = solve_common(theta, &diff)?;
    let mid = (theta.mu1() + theta.mu2()) * 0.5;
    let beta0 = -mid.dot(&beta) + (theta.pi1() / theta.pi2()).ln();
    Ok(DiscriminantCoeffs { beta0, beta })
}

pub fn mahalanobis_delta(theta: &MixtureParams) -> Result<f64> {
    let diff = theta.mu1() - theta.mu2();
    let w = solve_common(theta, &diff)?;
    Ok(diff.dot(&w).max(0.0).sqrt())
}

/// Class1 when `d(y) >= 0`; the tie goes to Class1.
pub fn bayes_allocate(y: &[f64], coeffs: &DiscriminantCoeffs) -> Result<Class> {
    if y.len() != coeffs.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.beta.len(),
            found: y.len(),
        });
    }
    Ok(if coeffs.evaluate(y) >= 0.0 {
        Class::Class1
    } else {
        Class::Class2
    })
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - 0.5 * LN_2PI).exp()
}

/// Overall conditional error rate of the linear rule under a homoscedastic
/// normal mixture.
pub fn error_rate(coeffs: &DiscriminantCoeffs, theta: &MixtureParams) -> Result<f64> {
    let sigma = theta.common_covariance()?;
    if coeffs.beta.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            found: coeffs.beta.len(),
        });
    }
    if coeffs.is_degenerate() {
        return Err(Error::DegenerateRule);
    }
    let s = coeffs.beta.dot(&(sigma * &coeffs.beta)).sqrt();
    let d1 = coeffs.beta0 + coeffs.beta.dot(theta.mu1());
    let d2 = coeffs.beta0 + coeffs.beta.dot(theta.mu2());
    Ok(theta.pi1() * std_normal_cdf(-d1 / s) + theta.pi2() * std_normal_cdf(d2 / s))
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { x } else { 0.0 };
    }
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Posterior probabilities from the log-odds `eta = log(tau1 / tau2)`.
pub(crate) fn tau_from_log_odds(eta: f64) -> (f64, f64) {
    (logistic(eta), logistic(-eta))
}

pub fn posterior_tau(y: &[f64], theta: &MixtureParams) -> Result<(f64, f64)> {
    if y.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature vector must be finite".into()));
    }
    let dens = theta.density()?;
    let mut scratch = vec![0.0; theta.dim()];
    let [l1, l2] = dens.log_joint(y, &mut scratch);
    Ok(tau_from_log_odds(l1 - l2))
}

pub fn entropy(tau: (f64, f64)) -> Result<f64> {
    let (t1, t2) = tau;
    if !(0.0..=1.0).contains(&t1) || !(0.0..=1.0).contains(&t2) {
        return Err(Error::InvalidInput(format!(
            "posterior probabilities ({t1}, {t2}) outside [0, 1]"
        )));
    }
    if (t1 + t2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "posterior probabilities ({t1}, {t2}) do not sum to one"
        )));
    }
    Ok(entropy_unchecked(t1, t2))
}

pub(crate) fn entropy_unchecked(t1: f64, t2: f64) -> f64 {
    let term = |t: f64| if t > 0.0 { -t * t.ln() } else { 0.0 };
    term(t1) + term(t2)
}

/// Coefficients of the logistic label-dropping model in the posterior entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingnessParams {
    pub xi0: f64,
    pub xi1: f64,
}

impl MissingnessParams {
    pub fn new(xi0: f64, xi1: f64) -> Result<Self> {
        if !xi0.is_finite() || !xi1.is_finite() {
            return Err(Error::InvalidInput(
                "missingness coefficients must be finite".into(),
            ));
        }
        Ok(Self { xi0, xi1 })
    }

    /// Linear predictor of the label-dropping logit at entropy `e`.
    pub fn linear_predictor(&self, e: f64) -> f64 {
        self.xi0 + self.xi1 * e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullParams {
    pub theta: MixtureParams,
    pub xi: MissingnessParams,
}

impl FullParams {
    pub fn new(theta: MixtureParams, xi: MissingnessParams) -> Self {
        Self { theta, xi }
    }
}

/// Probability that the label of a point at `y` is missing.
pub fn missingness_prob(y: &[f64], psi: &FullParams) -> Result<f64> {
    let (t1, t2) = posterior_tau(y, &psi.theta)?;
    let e = entropy_unchecked(t1, t2);
    Ok(logistic(psi.xi.linear_predictor(e)))
}

/// A normal component prepared for repeated log-density evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Gaussian {
    mean: Vec<f64>,
    /// Row-major lower Cholesky factor.
    chol: Vec<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub(crate) fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        let l = cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        let mut chol = vec![0.0; p * p];
        let mut log_det = 0.0;
        for i in 0..p {
            for j in 0..=i {
                chol[i * p + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        Ok(Self {
            mean: mean.iter().copied().collect(),
            chol,
            log_norm: -0.5 * (p as f64 * LN_2PI + log_det),
        })
    }

    /// Log-density at `y`; leaves the whitened residual `L^{-1}(y - mu)` in
    /// `scratch`.
    pub(crate) fn log_density(&self, y: &[f64], scratch: &mut [f64]) -> f64 {
        let p = self.mean.len();
        let mut quad = 0.0;
        for i in 0..p {
            let row = &self.chol[i * p..i * p + i];
            let mut acc = y[i] - self.mean[i];
            for (l, z) in row.iter().zip(scratch.iter()) {
                acc -= l * z;
            }
            let z = acc / self.chol[i * p + i];
            scratch[i] = z;
            quad += z * z;
        }
        self.log_norm - 0.5 * quad
    }

    /// Solves `L^T w = z` in place, turning a whitened residual into
    /// `Sigma^{-1}(y - mu)`.
    pub(crate) fn back_substitute(&self, z: &mut [f64]) {
        let p = self.mean.len();
        for i in (0..p).rev() {
            let mut acc = z[i];
            for k in i + 1..p {
                acc -= self.chol[k * p + i] * z[k];
            }
            z[i] = acc / self.chol[i * p + i];
        }
    }

    pub(crate) fn chol_entry(&self, i: usize, j: usize) -> f64 {
        self.chol[i * self.mean.len() + j]
    }

    /// `Sigma^{-1}` as a dense row-major matrix.
    pub(crate) fn precision(&self) -> Vec<f64> {
        let p = self.mean.len();
        let mut out = vec![0.0; p * p];
        let mut col = vec![0.0; p];
        for j in 0..p {
            // forward solve L x = e_j
            for i in 0..p {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for k in 0..i {
                    acc -= self.chol[i * p + k] * col[k];
                }
                col[i] = acc / self.chol[i * p + i];
            }
            self.back_substitute(&mut col);
            for i in 0..p {
                out[i * p + j] = col[i];
            }
        }
        out
    }
}

/// Both components plus log priors, ready for per-row evaluation.
#[derive(Debug, Clone)]
pub(crate) struct MixtureDensity {
    pub(crate) log_pi: [f64; 2],
    pub(crate) comps: [Gaussian; 2],
}

impl MixtureDensity {
    pub(crate) fn new(theta: &MixtureParams) -> Result<Self> {
        let c1 = Gaussian::new(theta.mu1(), theta.covariance().for_class(Class::Class1))?;
        let c2 = Gaussian::new(theta.mu2(), theta.covariance().for_class(Class::Class2))?;
        Ok(Self {
            log_pi: [theta.pi1().ln(), theta.pi2().ln()],
            comps: [c1, c2],
        })
    }

    /// `log(pi_i phi_i(y))` for both components.
    pub(crate) fn log_joint(&self, y: &[f64], scratch: &mut [f64]) -> [f64; 2] {
        [
            self.log_pi[0] + self.comps[0].log_density(y, scratch),
            self.log_pi[1] + self.comps[1].log_density(y, scratch),
        ]
    }
}

/// `log(exp(a) + exp(b))`.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
