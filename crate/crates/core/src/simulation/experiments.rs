use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{
    apply_missingness, evaluate_rule, sample_mixture, stream, MissingnessMechanism, Purpose, Rule,
};
use crate::asymptotics::{
    are_rule, expected_error_cml, univariate_theta, ExpansionInputs, QuadratureSpec,
};
use crate::error::{Error, Result};
use crate::estimation::{
    fit_cml, fit_em_ignorable, fit_fsc, fit_full, fit_supervised, resolve_label_switching,
    CovarianceModel, FitOptions, Reference, XiConstraint,
};
use crate::model::{
    discriminant_from_theta, error_rate, mahalanobis_delta, Covariance, FullParams,
    MissingnessParams, MixtureParams,
};
use crate::sample::PartialSample;

/// Largest tolerated fraction of failed fits before an experiment aborts.
pub const FAILURE_LIMIT: f64 = 0.1;

/// The default FSC weights are `k / DEFAULT_ALPHA_GRID_STEPS` for
/// `k = 1..DEFAULT_ALPHA_GRID_STEPS`.
pub const DEFAULT_ALPHA_GRID_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Supervised,
    Em,
    Cml,
    Fsc,
    Full,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Supervised => "supervised",
            Self::Em => "em",
            Self::Cml => "cml",
            Self::Fsc => "fsc",
            Self::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "supervised" => Self::Supervised,
            "em" => Self::Em,
            "cml" => Self::Cml,
            "fsc" => Self::Fsc,
            "full" => Self::Full,
            other => return Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub theta_true: MixtureParams,
    pub mechanism: MissingnessMechanism,
    pub n: usize,
    pub n_test: usize,
    pub replications: usize,
    /// FSC weights; `None` means the default grid 0.05, 0.10, ..., 0.95.
    pub alpha_grid: Option<Vec<f64>>,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Covariance structure assumed by every fit.
    pub model: CovarianceModel,
}

impl ExperimentConfig {
    /// Bivariate heteroscedastic mixture with entropy-driven missing labels.
    pub fn figure1(seed: u64) -> Self {
        let theta = MixtureParams::new(
            0.5,
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![0.0, 3.0]),
            Covariance::PerClass(
                DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]),
                DMatrix::identity(2, 2),
            ),
        )
        .expect("valid preset");
        let xi = MissingnessParams::new(-5.0, 100.0).expect("valid preset");
        Self {
            mechanism: MissingnessMechanism::EntropyLogistic(FullParams::new(theta.clone(), xi)),
            theta_true: theta,
            n: 500,
            n_test: 2000,
            replications: 100,
            alpha_grid: None,
            seed,
            methods: vec![Method::Fsc, Method::Full],
            model: CovarianceModel::Heteroscedastic,
        }
    }

    /// Trivariate homoscedastic mixture at unit Mahalanobis half-distance with
    /// 25 classified rows per class and 5000 unclassified rows.
    pub fn eq2(seed: u64) -> Self {
        let theta = MixtureParams::homoscedastic(
            0.5,
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0, 0.0]),
            DMatrix::identity(3, 3),
        )
        .expect("valid preset");
        Self {
            theta_true: theta,
            mechanism: MissingnessMechanism::FixedCounts { n1c: 25, n2c: 25 },
            n: 5050,
            n_test: 1,
            replications: 500,
            alpha_grid: None,
            seed,
            methods: vec![Method::Cml],
            model: CovarianceModel::Homoscedastic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_test == 0 || self.replications == 0 {
            return Err(Error::InvalidInput(
                "n, n_test and replications must be positive".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        if let Some(grid) = &self.alpha_grid {
            if grid.is_empty() || grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::InvalidInput(
                    "alpha grid values must lie in [0, 1]".into(),
                ));
            }
        }
        self.mechanism.validate()?;
        if let MissingnessMechanism::EntropyLogistic(psi) = &self.mechanism {
            if psi.theta.dim() != self.theta_true.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.theta_true.dim(),
                    found: psi.theta.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        self.alpha_grid.clone().unwrap_or_else(|| {
            (1..DEFAULT_ALPHA_GRID_STEPS)
                .map(|k| k as f64 / DEFAULT_ALPHA_GRID_STEPS as f64)
                .collect()
        })
    }

    /// Methods with FSC expanded over the weight grid.
    pub fn expanded_methods(&self) -> Vec<(Method, Option<f64>)> {
        self.methods
            .iter()
            .flat_map(|&m| match m {
                Method::Fsc => self
                    .alpha_grid()
                    .into_iter()
                    .map(|a| (m, Some(a)))
                    .collect(),
                _ => vec![(m, None)],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedRule {
    pub theta_hat: MixtureParams,
    pub xi_hat: Option<MissingnessParams>,
    pub ari: f64,
    pub error_rate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub method: Method,
    pub alpha: Option<f64>,
    /// Seed handed to the fit for its random restarts.
    pub seed: u64,
    pub outcome: std::result::Result<FittedRule, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub alpha: Option<f64>,
    pub successes: usize,
    pub failures: usize,
    pub mean_ari: f64,
    pub se_ari: f64,
    pub mean_error: f64,
    pub se_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub records: Vec<ReplicationRecord>,
    pub aggregates: Vec<Aggregate>,
    pub failures: usize,
}

impl ReplicationReport {
    pub fn aggregate(&self, method: Method, alpha: Option<f64>) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.alpha == alpha)
    }

    /// ARI pairs for replications where both fits succeeded.
    pub fn paired_ari(
        &self,
        a: (Method, Option<f64>),
        b: (Method, Option<f64>),
    ) -> (Vec<f64>, Vec<f64>) {
        let pick = |key: (Method, Option<f64>)| {
            let mut v: Vec<Option<f64>> = Vec::new();
            for r in &self.records {
                if (r.method, r.alpha) == key {
                    if v.len() <= r.replication {
                        v.resize(r.replication + 1, None);
                    }
                    v[r.replication] = r.outcome.as_ref().ok().map(|f| f.ari);
                }
            }
            v
        };
        let (va, vb) = (pick(a), pick(b));
        va.iter()
            .zip(&vb)
            .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
            .unzip()
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fit_one(
    method: Method,
    alpha: Option<f64>,
    train: &PartialSample,
    opts: &FitOptions,
    model: CovarianceModel,
) -> Result<crate::estimation::FitResult> {
    match method {
        Method::Supervised => fit_supervised(&train.classified_subsample(), model),
        Method::Em => fit_em_ignorable(train, opts, model),
        Method::Cml => fit_cml(train, opts, opts.max_iterations),
        Method::Fsc => fit_fsc(train, alpha.unwrap_or(0.5), opts, model),
        Method::Full => fit_full(train, opts, model, XiConstraint::Free),
    }
}

fn rule_for(theta: &MixtureParams) -> Result<Rule> {
    Ok(if theta.covariance().is_common() {
        Rule::Linear(discriminant_from_theta(theta)?)
    } else {
        Rule::Posterior(theta.clone())
    })
}

fn replicate(config: &ExperimentConfig, r: usize) -> Vec<ReplicationRecord> {
    let rep = r as u64;
    let full = sample_mixture(
        &config.theta_true,
        config.n,
        &mut stream(config.seed, rep, Purpose::Training),
    );
    let test = sample_mixture(
        &config.theta_true,
        config.n_test,
        &mut stream(config.seed, rep, Purpose::Test),
    );
    let fit_seed: u64 = stream(config.seed, rep, Purpose::Fitting).gen();
    let train = apply_missingness(
        &full,
        &config.mechanism,
        &mut stream(config.seed, rep, Purpose::Missingness),
    );
    config
        .expanded_methods()
        .into_iter()
        .map(|(method, alpha)| {
            let outcome = train
                .as_ref()
                .map_err(|e| e.clone())
                .and_then(|train| {
                    let opts = FitOptions {
                        seed: fit_seed,
                        ..FitOptions::default()
                    };
                    let fit = fit_one(method, alpha, train, &opts, config.model)?;
                    let theta =
                        resolve_label_switching(&fit.theta_hat, Reference::Classified(train));
                    let eval = evaluate_rule(&rule_for(&theta)?, &test)?;
                    Ok(FittedRule {
                        theta_hat: theta,
                        xi_hat: fit.xi_hat,
                        ari: eval.ari,
                        error_rate: eval.error_rate,
                        converged: fit.converged,
                    })
                })
                .map_err(|e| e.to_string());
            ReplicationRecord {
                replication: r,
                method,
                alpha,
                seed: fit_seed,
                outcome,
            }
        })
        .collect()
}

/// Fits every method on each replication's training sample, scores the
/// label-aligned rule on an independent test sample and aggregates.
///
/// Replications run on the current rayon pool. Failed fits are recorded
/// and excluded from the aggregates; more than [`FAILURE_LIMIT`] of them
/// aborts the experiment.
pub fn run_figure1_experiment(config: &ExperimentConfig) -> Result<ReplicationReport> {
    config.validate()?;
    let records: Vec<ReplicationRecord> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(config, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let failures = records.iter().filter(|r| r.outcome.is_err()).count();
    if failures as f64 > FAILURE_LIMIT * records.len() as f64 {
        return Err(Error::TooManyFailures {
            failures,
            total: records.len(),
        });
    }
    let aggregates = config
        .expanded_methods()
        .into_iter()
        .map(|(method, alpha)| {
            let mine: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.method == method && r.alpha == alpha)
                .collect();
            let ok: Vec<&FittedRule> = mine
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let (mean_ari, se_ari) = mean_and_se(&ok.iter().map(|f| f.ari).collect::<Vec<_>>());
            let (mean_error, se_error) =
                mean_and_se(&ok.iter().map(|f| f.error_rate).collect::<Vec<_>>());
            Aggregate {
                method,
                alpha,
                successes: ok.len(),
                failures: mine.len() - ok.len(),
                mean_ari,
                se_ari,
                mean_error,
                se_error,
            }
        })
        .collect();
    Ok(ReplicationReport {
        records,
        aggregates,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eq2Report {
    /// `error_rate(beta_k, theta_true)` for `k = 0..=k_max`, one row per
    /// successful replication.
    pub per_replication: Vec<Vec<f64>>,
    /// Replication index of each row of `per_replication`.
    pub replication_index: Vec<usize>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Expected error from the large-sample expansion.
    pub analytic: Vec<f64>,
    pub failures: usize,
}

/// Tracks the true error rate of the hard-assignment EM rule over its first
/// `k_max` iterations. With `known_priors` the mixing proportion is held at
/// its true value.
pub fn run_eq2_experiment(
    config: &ExperimentConfig,
    k_max: usize,
    known_priors: bool,
) -> Result<Eq2Report> {
    config.validate()?;
    let MissingnessMechanism::FixedCounts { n1c, n2c } = config.mechanism else {
        return Err(Error::InvalidInput(
            "the iteration experiment needs fixed classified counts".into(),
        ));
    };
    let theta = &config.theta_true;
    let delta = mahalanobis_delta(theta)?;
    let analytic = (0..=k_max)
        .map(|k| {
            expected_error_cml(&ExpansionInputs {
                delta,
                p: theta.dim(),
                n1c,
                n2c,
                k: k as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<Result<Vec<f64>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let rep = r as u64;
            let full = sample_mixture(
                theta,
                config.n,
                &mut stream(config.seed, rep, Purpose::Training),
            );
            let train = apply_missingness(
                &full,
                &config.mechanism,
                &mut stream(config.seed, rep, Purpose::Missingness),
            )?;
            let opts = FitOptions {
                seed: stream(config.seed, rep, Purpose::Fitting).gen(),
                fixed_pi1: known_priors.then(|| theta.pi1()),
                ..FitOptions::default()
            };
            let fit = fit_cml(&train, &opts, k_max)?;
            fit.beta_trace
                .iter()
                .map(|b| error_rate(b, theta))
                .collect::<Result<Vec<_>>>()
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures as f64 > FAILURE_LIMIT * config.replications as f64 {
        return Err(Error::TooManyFailures {
            failures,
            total: config.replications,
        });
    }
    let (replication_index, per_replication): (Vec<usize>, Vec<Vec<f64>>) = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, o)| o.ok().map(|v| (i, v)))
        .unzip();
    let (mean, se) = (0..=k_max)
        .map(|k| mean_and_se(&per_replication.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .unzip();
    Ok(Eq2Report {
        per_replication,
        replication_index,
        mean,
        se,
        analytic,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Grid {
    pub pi1: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: f64,
    /// `values[i][j]` belongs to `pi1[i]` and `delta[j]`.
    pub values: Vec<Vec<f64>>,
}

/// Relative efficiency over a grid of univariate models with unit variance
/// and means at `+-delta / 2`.
pub fn run_table1_grid(
    pi1: &[f64],
    delta: &[f64],
    gamma: f64,
    quad: &QuadratureSpec,
) -> Result<Table1Grid> {
    let values = pi1
        .par_iter()
        .map(|&p| {
            delta
                .iter()
                .map(|&d| are_rule(&univariate_theta(p, d)?, gamma, quad))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Grid {
        pi1: pi1.to_vec(),
        delta: delta.to_vec(),
        gamma,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_difference: f64,
    pub standard_error: f64,
    pub t: f64,
    /// One-sided p-value against the alternative `mean(a - b) > 0`.
    pub p_greater: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(
            "paired test needs two pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, se) = mean_and_se(&diffs);
    let n = diffs.len();
    let (t, p) = if se > 0.0 {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
        (t, dist.sf(t))
    } else if mean > 0.0 {
        (f64::INFINITY, 0.0)
    } else if mean < 0.0 {
        (f64::NEG_INFINITY, 1.0)
    } else {
        (0.0, 0.5)
    };
    Ok(PairedTest {
        n,
        mean_difference: mean,
        standard_error: se,
        t,
        p_greater: p,
    })
}
