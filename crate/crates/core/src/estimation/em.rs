use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mstep::{variance_floor, MStep};
use super::{CovarianceModel, FitOptions, FitResult, Init};
use crate::error::{Error, Result};
use crate::likelihoods::{check_alpha, loglik_classified, Contributions};
use crate::model::{discriminant_from_theta, log_add_exp, tau_from_log_odds, Class, MixtureParams};
use crate::sample::PartialSample;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Assignment {
    Soft,
    /// Outright assignment to the component with the larger posterior; ties go
    /// to Class1.
    Hard,
}

/// Weighted EM on `w_c * log L_C + w_u * log L_UC` (soft) or on the
/// classification likelihood (hard).
struct Engine<'a> {
    sample: &'a PartialSample,
    opts: &'a FitOptions,
    model: CovarianceModel,
    classified_weight: f64,
    unclassified_weight: f64,
    assignment: Assignment,
    floor: f64,
    /// Hard EM stops only at a fixed point of the assignments and reports
    /// exactly this many iterations in its traces.
    hard_iterations: Option<usize>,
}

struct EStep {
    weights: Vec<[f64; 2]>,
    objective: f64,
    /// Hard assignments of the unclassified rows, in row order.
    hard: Vec<bool>,
}

impl<'a> Engine<'a> {
    fn row_weight(&self, j: usize) -> f64 {
        if self.sample.is_missing(j) {
            self.unclassified_weight
        } else {
            self.classified_weight
        }
    }

    fn e_step(&self, theta: &MixtureParams) -> Result<EStep> {
        let dens = theta.density()?;
        let mut scratch = vec![0.0; self.sample.dim()];
        let mut weights = Vec::with_capacity(self.sample.len());
        let mut hard = Vec::new();
        let mut objective = 0.0;
        for (j, y) in self.sample.rows().enumerate() {
            let w = self.row_weight(j);
            if w == 0.0 {
                weights.push([0.0, 0.0]);
                continue;
            }
            let l = dens.log_joint(y, &mut scratch);
            match self.sample.label(j) {
                Some(c) => {
                    let mut r = [0.0, 0.0];
                    r[c.index()] = w;
                    weights.push(r);
                    objective += w * l[c.index()];
                }
                None => match self.assignment {
                    Assignment::Soft => {
                        let (t1, t2) = tau_from_log_odds(l[0] - l[1]);
                        weights.push([w * t1, w * t2]);
                        objective += w * log_add_exp(l[0], l[1]);
                    }
                    Assignment::Hard => {
                        let to_first = l[0] >= l[1];
                        hard.push(to_first);
                        if to_first {
                            weights.push([w, 0.0]);
                            objective += w * l[0];
                        } else {
                            weights.push([0.0, w]);
                            objective += w * l[1];
                        }
                    }
                },
            }
        }
        Ok(EStep {
            weights,
            objective,
            hard,
        })
    }

    fn m_step(&self, weights: &[[f64; 2]]) -> Result<(MixtureParams, bool)> {
        let p = self.sample.dim() as f64;
        for i in 0..2 {
            let mass: f64 = self
                .sample
                .labels()
                .iter()
                .zip(weights)
                .enumerate()
                .filter(|(j, _)| self.row_weight(*j) > 0.0)
                .map(|(j, (_, w))| w[i] / self.row_weight(j))
                .sum();
            if mass == 0.0 && self.assignment == Assignment::Hard {
                return Err(Error::DegenerateAssignment { component: i + 1 });
            }
            if mass < p + 1.0 {
                return Err(Error::DegenerateData(format!(
                    "component {} has responsibility mass {mass:.3} below {}",
                    i + 1,
                    p + 1.0
                )));
            }
        }
        let out = MStep {
            sample: self.sample,
            model: self.model,
            fixed_pi1: self.opts.fixed_pi1,
            floor: self.floor,
        }
        .run(weights)?;
        Ok((out.theta, out.at_floor))
    }

    fn beta_of(&self, theta: &MixtureParams) -> Option<crate::model::DiscriminantCoeffs> {
        match self.model {
            CovarianceModel::Homoscedastic => discriminant_from_theta(theta).ok(),
            CovarianceModel::Heteroscedastic => None,
        }
    }

    fn iterate(&self, theta0: MixtureParams) -> Result<FitResult> {
        let mut theta = theta0;
        let mut trace = Vec::new();
        let mut betas = Vec::new();
        let mut at_floor = false;
        let mut converged = false;
        let mut iterations = 0;
        let mut prev_hard: Option<Vec<bool>> = None;
        let limit = self.hard_iterations.unwrap_or(self.opts.max_iterations);
        loop {
            let e = self.e_step(&theta)?;
            if !e.objective.is_finite() {
                return Err(Error::DegenerateData("objective is not finite".into()));
            }
            trace.push(e.objective);
            if let Some(b) = self.beta_of(&theta) {
                betas.push(b);
            }
            let settled = match self.assignment {
                Assignment::Soft => {
                    trace.len() >= 2 && {
                        let prev = trace[trace.len() - 2];
                        (e.objective - prev).abs()
                            < self.opts.rel_tol * prev.abs().max(f64::MIN_POSITIVE)
                    }
                }
                Assignment::Hard => prev_hard.as_ref() == Some(&e.hard),
            };
            if settled {
                converged = true;
                break;
            }
            if iterations >= limit {
                break;
            }
            let (next, floored) = self.m_step(&e.weights)?;
            at_floor |= floored;
            theta = next;
            iterations += 1;
            prev_hard = Some(e.hard);
        }
        if let Some(k_max) = self.hard_iterations {
            // Past the fixed point every further iterate is identical.
            while trace.len() < k_max + 1 {
                trace.push(*trace.last().expect("non-empty trace"));
                if let Some(b) = betas.last().cloned() {
                    betas.push(b);
                }
            }
            trace.truncate(k_max + 1);
            betas.truncate(k_max + 1);
        }
        Ok(FitResult {
            theta_hat: theta,
            xi_hat: None,
            objective_trace: trace,
            beta_trace: betas,
            converged,
            iterations,
            at_variance_floor: at_floor,
        })
    }

    fn init_from_classified(&self) -> Result<MixtureParams> {
        let weights: Vec<[f64; 2]> = self
            .sample
            .labels()
            .iter()
            .map(|l| match l {
                Some(Class::Class1) => [1.0, 0.0],
                Some(Class::Class2) => [0.0, 1.0],
                None => [0.0, 0.0],
            })
            .collect();
        let c = self.sample.counts();
        if c.n1_classified == 0 || c.n2_classified == 0 {
            return Err(Error::InsufficientData(
                "both classes need classified rows".into(),
            ));
        }
        let step = |model| MStep {
            sample: self.sample,
            model,
            fixed_pi1: self.opts.fixed_pi1,
            floor: self.floor,
        };
        match step(self.model).run(&weights) {
            Ok(out) => Ok(out.theta),
            // too few labels per class for separate covariances: start pooled
            Err(_) if self.model == CovarianceModel::Heteroscedastic => {
                let pooled = step(CovarianceModel::Homoscedastic).run(&weights)?.theta;
                let s = pooled.common_covariance()?.clone();
                MixtureParams::new(
                    pooled.pi1(),
                    pooled.mu1().clone(),
                    pooled.mu2().clone(),
                    crate::model::Covariance::PerClass(s.clone(), s),
                )
            }
            Err(e) => Err(e),
        }
    }

    /// Two distinct random rows act as centers; unclassified rows go to the
    /// nearer one, classified rows keep their labels.
    fn init_random(&self, restart: usize) -> Result<MixtureParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(restart as u64 + 1);
        let n = self.sample.len();
        if n < 2 {
            return Err(Error::InsufficientData("fewer than two rows".into()));
        }
        let picks = sample_indices(&mut rng, n, 2);
        let (a, b) = (
            self.sample.row(picks.index(0)),
            self.sample.row(picks.index(1)),
        );
        let dist =
            |y: &[f64], c: &[f64]| -> f64 { y.iter().zip(c).map(|(u, v)| (u - v).powi(2)).sum() };
        let weights: Vec<[f64; 2]> = self
            .sample
            .rows()
            .enumerate()
            .map(|(j, y)| match self.sample.label(j) {
                Some(Class::Class1) => [1.0, 0.0],
                Some(Class::Class2) => [0.0, 1.0],
                None if dist(y, a) <= dist(y, b) => [1.0, 0.0],
                None => [0.0, 1.0],
            })
            .collect();
        Ok(MStep {
            sample: self.sample,
            model: self.model,
            fixed_pi1: self.opts.fixed_pi1,
            floor: self.floor,
        }
        .run(&weights)?
        .theta)
    }

    fn run_random(&self, starts: usize) -> Result<FitResult> {
        let mut best: Option<FitResult> = None;
        let mut last_err = None;
        for r in 0..starts {
            match self.init_random(r).and_then(|t| self.iterate(t)) {
                Ok(fit) => {
                    if best
                        .as_ref()
                        .is_none_or(|b| fit.final_objective() > b.final_objective())
                    {
                        best = Some(fit);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        best.ok_or_else(|| {
            last_err.unwrap_or_else(|| Error::InsufficientData("no random starts".into()))
        })
    }

    fn run(&self) -> Result<FitResult> {
        self.opts.validate()?;
        let p = self.sample.dim();
        if self.sample.len() < 2 * (p + 2) {
            return Err(Error::InsufficientData(format!(
                "{} rows cannot support two {p}-dimensional components",
                self.sample.len()
            )));
        }
        match &self.opts.init {
            Init::Provided(theta) => {
                if theta.dim() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: theta.dim(),
                    });
                }
                self.iterate(theta.clone())
            }
            Init::Random(k) => self.run_random(*k),
            Init::FromClassified => {
                match self.init_from_classified().and_then(|t| self.iterate(t)) {
                    Ok(fit) => Ok(fit),
                    Err(e @ Error::DimensionMismatch { .. }) => Err(e),
                    Err(e) if self.opts.fallback_restarts == 0 => Err(e),
                    Err(_) => self.run_random(self.opts.fallback_restarts),
                }
            }
        }
    }
}

fn engine<'a>(
    sample: &'a PartialSample,
    opts: &'a FitOptions,
    model: CovarianceModel,
) -> Engine<'a> {
    Engine {
        sample,
        opts,
        model,
        classified_weight: 1.0,
        unclassified_weight: 1.0,
        assignment: Assignment::Soft,
        floor: variance_floor(sample, opts.variance_floor_factor),
        hard_iterations: None,
    }
}

/// Closed-form maximum likelihood from a completely classified sample.
pub fn fit_supervised(sample: &PartialSample, model: CovarianceModel) -> Result<FitResult> {
    let c = sample.counts();
    if c.n_unclassified > 0 {
        return Err(Error::InvalidInput(format!(
            "supervised fit needs a completely classified sample ({} rows unlabeled)",
            c.n_unclassified
        )));
    }
    if c.n1_classified == 0 || c.n2_classified == 0 {
        return Err(Error::InsufficientData(
            "both classes must be present among the labels".into(),
        ));
    }
    let weights: Vec<[f64; 2]> = sample
        .labels()
        .iter()
        .map(|l| match l {
            Some(Class::Class1) => [1.0, 0.0],
            _ => [0.0, 1.0],
        })
        .collect();
    let theta = MStep {
        sample,
        model,
        fixed_pi1: None,
        floor: 0.0,
    }
    .run(&weights)?
    .theta;
    let objective = loglik_classified(&theta, sample, Contributions::Skip)?.value;
    let beta_trace = match model {
        CovarianceModel::Homoscedastic => vec![discriminant_from_theta(&theta)?],
        CovarianceModel::Heteroscedastic => Vec::new(),
    };
    Ok(FitResult {
        theta_hat: theta,
        xi_hat: None,
        objective_trace: vec![objective],
        beta_trace,
        converged: true,
        iterations: 0,
        at_variance_floor: false,
    })
}

/// Soft EM on the ignorable log-likelihood.
pub fn fit_em_ignorable(
    sample: &PartialSample,
    opts: &FitOptions,
    model: CovarianceModel,
) -> Result<FitResult> {
    engine(sample, opts, model).run()
}

/// Fractionally supervised fit: classified rows weighted by `alpha`,
/// unclassified rows by `1 - alpha`.
pub fn fit_fsc(
    sample: &PartialSample,
    alpha: f64,
    opts: &FitOptions,
    model: CovarianceModel,
) -> Result<FitResult> {
    check_alpha(alpha)?;
    let c = sample.counts();
    if alpha == 1.0 && c.n_classified == 0 {
        return Err(Error::InsufficientData(
            "alpha = 1 needs classified rows".into(),
        ));
    }
    if alpha == 0.0 && c.n_unclassified == 0 {
        return Err(Error::InsufficientData(
            "alpha = 0 needs unclassified rows".into(),
        ));
    }
    let mut e = engine(sample, opts, model);
    e.classified_weight = alpha;
    e.unclassified_weight = 1.0 - alpha;
    e.run()
}

/// Classification maximum likelihood by hard-assignment EM under a common
/// covariance, started from the classified rows.
///
/// `beta_trace[k]` is the discriminant after `k` iterations for
/// `k = 0..=k_max`. Once the assignments reach a fixed point the remaining
/// entries repeat it, which is what further iterations would produce.
pub fn fit_cml(sample: &PartialSample, opts: &FitOptions, k_max: usize) -> Result<FitResult> {
    let c = sample.counts();
    if c.n1_classified == 0 || c.n2_classified == 0 {
        return Err(Error::InsufficientData(
            "CML needs classified rows from both classes".into(),
        ));
    }
    let opts = FitOptions {
        init: Init::FromClassified,
        fallback_restarts: 0,
        ..opts.clone()
    };
    let mut e = engine(sample, &opts, CovarianceModel::Homoscedastic);
    e.assignment = Assignment::Hard;
    e.hard_iterations = Some(k_max.min(opts.max_iterations));
    e.run()
}
