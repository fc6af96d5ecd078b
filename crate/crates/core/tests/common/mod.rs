#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semisup_core::{
    entropy, missingness_prob, posterior_tau, Class, FullParams, MissingnessParams, MixtureParams,
    PartialSample,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two bivariate normals, one with correlation 0.7, the other uncorrelated.
pub fn simulation_theta() -> MixtureParams {
    MixtureParams::new(
        0.5,
        DVector::from_vec(vec![0.0, 0.0]),
        DVector::from_vec(vec![0.0, 3.0]),
        semisup_core::Covariance::PerClass(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]),
            DMatrix::identity(2, 2),
        ),
    )
    .unwrap()
}

pub fn simulation_psi() -> FullParams {
    FullParams::new(
        simulation_theta(),
        MissingnessParams::new(-5.0, 100.0).unwrap(),
    )
}

pub fn draw(theta: &MixtureParams, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Class>) {
    let p = theta.dim();
    let mut rows = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for _ in 0..n {
        let class = if rng.gen::<f64>() < theta.pi1() {
            Class::Class1
        } else {
            Class::Class2
        };
        let l = theta
            .covariance()
            .for_class(class)
            .clone()
            .cholesky()
            .unwrap()
            .l();
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = theta.mean(class) + l * z;
        rows.push(y.iter().copied().collect());
        classes.push(class);
    }
    (rows, classes)
}

/// Labels hidden with the entropy-logistic probability under `psi`.
pub fn partially_classified(psi: &FullParams, n: usize, seed: u64) -> PartialSample {
    let mut rng = rng(seed);
    let (rows, classes) = draw(&psi.theta, n, &mut rng);
    let labels = rows
        .iter()
        .zip(&classes)
        .map(|(y, &c)| {
            let q = missingness_prob(y, psi).unwrap();
            (rng.gen::<f64>() >= q).then_some(c)
        })
        .collect();
    PartialSample::from_rows(&rows, labels).unwrap()
}

/// Random fixture with `n_missing` trailing rows unlabeled.
pub fn random_sample(
    theta: &MixtureParams,
    n: usize,
    missing_rate: f64,
    seed: u64,
) -> PartialSample {
    let mut rng = rng(seed);
    let (rows, classes) = draw(theta, n, &mut rng);
    let labels = classes
        .iter()
        .map(|&c| (rng.gen::<f64>() >= missing_rate).then_some(c))
        .collect();
    PartialSample::from_rows(&rows, labels).unwrap()
}

pub fn random_theta(p: usize, common: bool, rng: &mut ChaCha8Rng) -> MixtureParams {
    let mut cov = || {
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(p, p) * 0.5
    };
    let s1 = cov();
    let s2 = cov();
    let pi1 = rng.gen_range(0.2..0.8);
    let mu1 = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
    let mu2 = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
    let covariance = if common {
        semisup_core::Covariance::Common(s1)
    } else {
        semisup_core::Covariance::PerClass(s1, s2)
    };
    MixtureParams::new(pi1, mu1, mu2, covariance).unwrap()
}

pub fn entropy_at(y: &[f64], theta: &MixtureParams) -> f64 {
    entropy(posterior_tau(y, theta).unwrap()).unwrap()
}
