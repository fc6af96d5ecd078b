//! Synthetic data, missing-label mechanisms, rule evaluation and the
//! replication experiments built on them.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the master seed,
//! with stream id `(replication << 8) | purpose`. Streams are never shared,
//! so results do not depend on scheduling or thread count.

mod experiments;

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as choose_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{
    bayes_allocate, missingness_prob, posterior_tau, Class, DiscriminantCoeffs, FullParams,
    MixtureParams,
};
use crate::sample::PartialSample;

pub use experiments::{
    paired_t_test, run_eq2_experiment, run_figure1_experiment, run_table1_grid, Aggregate,
    Eq2Report, ExperimentConfig, Method, PairedTest, ReplicationRecord, ReplicationReport,
    Table1Grid, DEFAULT_ALPHA_GRID_STEPS, FAILURE_LIMIT,
};

/// What a random stream is used for within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Training = 1,
    Missingness = 2,
    Test = 3,
    Fitting = 4,
}

/// The random stream for `purpose` in replication `replication`.
pub fn stream(master_seed: u64, replication: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((replication << 8) | purpose as u64);
    rng
}

/// `n` independent draws from the mixture, all labeled.
pub fn sample_mixture<R: Rng + ?Sized>(
    theta: &MixtureParams,
    n: usize,
    rng: &mut R,
) -> PartialSample {
    let p = theta.dim();
    let factors: Vec<DMatrix<f64>> = [Class::Class1, Class::Class2]
        .iter()
        .map(|&c| {
            theta
                .covariance()
                .for_class(c)
                .clone()
                .cholesky()
                .expect("validated covariance")
                .l()
        })
        .collect();
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = if rng.gen::<f64>() < theta.pi1() {
            Class::Class1
        } else {
            Class::Class2
        };
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = theta.mean(class) + &factors[class.index()] * z;
        features.extend(y.iter());
        labels.push(Some(class));
    }
    PartialSample::new(p, features, labels).expect("finite draws")
}

#[derive(Debug, Clone, PartialEq)]
pub enum MissingnessMechanism {
    /// Each label is hidden independently with probability `gamma`.
    Mcar { gamma: f64 },
    /// Exactly `n1c` and `n2c` labels survive, chosen uniformly per class.
    FixedCounts { n1c: usize, n2c: usize },
    /// Labels hidden with the entropy-logistic probability under the
    /// generating parameters.
    EntropyLogistic(FullParams),
}

impl MissingnessMechanism {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Mcar { gamma } if !(0.0..=1.0).contains(gamma) => Err(Error::InvalidInput(
                format!("missing rate {gamma} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

/// Hides labels of a fully labeled sample. Features are never touched.
pub fn apply_missingness<R: Rng + ?Sized>(
    sample: &PartialSample,
    mechanism: &MissingnessMechanism,
    rng: &mut R,
) -> Result<PartialSample> {
    mechanism.validate()?;
    if sample.counts().n_unclassified > 0 {
        return Err(Error::InvalidInput(
            "missingness applies to fully labeled samples".into(),
        ));
    }
    let mut labels = sample.labels().to_vec();
    match mechanism {
        MissingnessMechanism::Mcar { gamma } => {
            for l in labels.iter_mut() {
                if rng.gen::<f64>() < *gamma {
                    *l = None;
                }
            }
        }
        MissingnessMechanism::FixedCounts { n1c, n2c } => {
            for (class, keep) in [(Class::Class1, *n1c), (Class::Class2, *n2c)] {
                let members: Vec<usize> = (0..sample.len())
                    .filter(|&j| sample.label(j) == Some(class))
                    .collect();
                if keep > members.len() {
                    return Err(Error::InvalidInput(format!(
                        "cannot keep {keep} labels from {} rows of {class:?}",
                        members.len()
                    )));
                }
                let mut kept = vec![false; members.len()];
                for i in choose_indices(rng, members.len(), keep) {
                    kept[i] = true;
                }
                for (&j, k) in members.iter().zip(kept) {
                    if !k {
                        labels[j] = None;
                    }
                }
            }
        }
        MissingnessMechanism::EntropyLogistic(psi) => {
            if psi.theta.dim() != sample.dim() {
                return Err(Error::DimensionMismatch {
                    expected: psi.theta.dim(),
                    found: sample.dim(),
                });
            }
            for (j, l) in labels.iter_mut().enumerate() {
                let q = missingness_prob(sample.row(j), psi)?;
                if rng.gen::<f64>() < q {
                    *l = None;
                }
            }
        }
    }
    sample.with_labels(labels)
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// When both labelings put everything in one cluster (or there are fewer
/// than two items) the index is undefined and 1 is returned.
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut ids_a = HashMap::new();
    let mut ids_b = HashMap::new();
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        let next = ids_a.len();
        let i = *ids_a.entry(x).or_insert(next);
        let next = ids_b.len();
        let j = *ids_b.entry(y).or_insert(next);
        *cells.entry((i, j)).or_default() += 1;
    }
    let mut rows = vec![0u64; ids_a.len()];
    let mut cols = vec![0u64; ids_b.len()];
    let mut index = 0.0;
    for (&(i, j), &count) in &cells {
        rows[i] += count;
        cols[j] += count;
        index += pairs(count);
    }
    let sum_a: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// A fitted allocation rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    Linear(DiscriminantCoeffs),
    /// Allocation to the larger posterior probability under the fitted model.
    Posterior(MixtureParams),
}

impl Rule {
    pub fn allocate(&self, y: &[f64]) -> Result<Class> {
        match self {
            Self::Linear(b) => bayes_allocate(y, b),
            Self::Posterior(theta) => {
                let (t1, t2) = posterior_tau(y, theta)?;
                Ok(if t1 >= t2 {
                    Class::Class1
                } else {
                    Class::Class2
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleEvaluation {
    pub ari: f64,
    /// Misallocation fraction, the smaller of the two label alignments.
    pub error_rate: f64,
}

/// Scores a rule on a fully labeled test sample.
pub fn evaluate_rule(rule: &Rule, test: &PartialSample) -> Result<RuleEvaluation> {
    let mut truth = Vec::with_capacity(test.len());
    let mut allocated = Vec::with_capacity(test.len());
    for j in 0..test.len() {
        let label = test
            .label(j)
            .ok_or_else(|| Error::InvalidInput(format!("test row {j} has no label")))?;
        truth.push(label);
        allocated.push(rule.allocate(test.row(j))?);
    }
    let wrong = truth.iter().zip(&allocated).filter(|(t, a)| t != a).count();
    let frac = wrong as f64 / test.len().max(1) as f64;
    Ok(RuleEvaluation {
        ari: adjusted_rand_index(&truth, &allocated)?,
        error_rate: frac.min(1.0 - frac),
    })
}
