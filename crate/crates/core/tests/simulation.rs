use nalgebra::{DMatrix, DVector};
use rand::Rng;
use semisup_core::asymptotics::QuadratureSpec;
use semisup_core::simulation::*;
use semisup_core::*;

fn homoscedastic(pi1: f64, delta: f64) -> MixtureParams {
    MixtureParams::homoscedastic(
        pi1,
        DVector::from_vec(vec![0.0, 0.0]),
        DVector::from_vec(vec![delta, 0.0]),
        DMatrix::identity(2, 2),
    )
    .unwrap()
}

#[test]
fn sampling_is_reproducible() {
    let theta = homoscedastic(0.4, 2.0);
    let a = sample_mixture(&theta, 200, &mut stream(9, 3, Purpose::Training));
    let b = sample_mixture(&theta, 200, &mut stream(9, 3, Purpose::Training));
    assert_eq!(a, b);
    assert_eq!(a.counts().n_unclassified, 0);
}

#[test]
fn sampled_proportions_and_means_concentrate() {
    let n = 100_000;
    let theta = homoscedastic(0.5, 2.0);
    let s = sample_mixture(&theta, n, &mut stream(1, 0, Purpose::Training));
    let c = s.counts();
    let frac = c.n1_classified as f64 / n as f64;
    assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    let mut sum = [0.0; 2];
    for (y, l) in s.rows().zip(s.labels()) {
        if *l == Some(Class::Class1) {
            sum[0] += y[0];
            sum[1] += y[1];
        }
    }
    let bound = 3.0 / (n as f64 * 0.5).sqrt();
    for (k, total) in sum.iter().enumerate() {
        let mean = total / c.n1_classified as f64;
        assert!(
            (mean - theta.mu1()[k]).abs() < bound,
            "coordinate {k}: {mean}"
        );
    }
}

#[test]
fn mcar_extremes() {
    let theta = homoscedastic(0.5, 2.0);
    let s = sample_mixture(&theta, 100, &mut stream(2, 0, Purpose::Training));
    let mut rng = stream(2, 0, Purpose::Missingness);
    let none = apply_missingness(&s, &MissingnessMechanism::Mcar { gamma: 1.0 }, &mut rng).unwrap();
    assert_eq!(none.counts().n_classified, 0);
    assert_eq!(none.features(), s.features());
    let all = apply_missingness(&s, &MissingnessMechanism::Mcar { gamma: 0.0 }, &mut rng).unwrap();
    assert_eq!(all, s);
}

#[test]
fn fixed_counts_keep_exactly_the_requested_labels() {
    let theta = homoscedastic(0.5, 2.0);
    let s = sample_mixture(&theta, 300, &mut stream(3, 0, Purpose::Training));
    let mut rng = stream(3, 0, Purpose::Missingness);
    let mech = MissingnessMechanism::FixedCounts { n1c: 7, n2c: 11 };
    let out = apply_missingness(&s, &mech, &mut rng).unwrap();
    let c = out.counts();
    assert_eq!((c.n1_classified, c.n2_classified, c.n), (7, 11, 300));
    assert_eq!(out.features(), s.features());
    for j in 0..out.len() {
        if let Some(l) = out.label(j) {
            assert_eq!(Some(l), s.label(j));
        }
    }
    let too_many = MissingnessMechanism::FixedCounts { n1c: 301, n2c: 0 };
    assert!(apply_missingness(&s, &too_many, &mut rng).is_err());
}

#[test]
fn entropy_mechanism_hides_ambiguous_labels() {
    let config = ExperimentConfig::figure1(0);
    let MissingnessMechanism::EntropyLogistic(psi) = &config.mechanism else {
        unreachable!()
    };
    let s = sample_mixture(
        &config.theta_true,
        10_000,
        &mut stream(4, 0, Purpose::Training),
    );
    let out = apply_missingness(
        &s,
        &config.mechanism,
        &mut stream(4, 0, Purpose::Missingness),
    )
    .unwrap();
    let (mut ambiguous, mut labeled) = (0, 0);
    for j in 0..out.len() {
        let e = entropy(posterior_tau(out.row(j), &psi.theta).unwrap()).unwrap();
        if e > 0.65 {
            ambiguous += 1;
            labeled += usize::from(!out.is_missing(j));
        }
    }
    assert!(ambiguous > 100);
    assert!((labeled as f64) < 0.01 * ambiguous as f64);
}

#[test]
fn ari_of_independent_labelings_is_near_zero() {
    let mut rng = stream(5, 0, Purpose::Test);
    let a: Vec<bool> = (0..10_000).map(|_| rng.gen()).collect();
    let b: Vec<bool> = (0..10_000).map(|_| rng.gen()).collect();
    assert!(adjusted_rand_index(&a, &b).unwrap().abs() < 0.03);
}

#[test]
fn well_separated_bayes_rule_is_nearly_perfect() {
    let theta = homoscedastic(0.5, 8.0);
    let test = sample_mixture(&theta, 5000, &mut stream(6, 0, Purpose::Test));
    let rule = Rule::Linear(discriminant_from_theta(&theta).unwrap());
    let eval = evaluate_rule(&rule, &test).unwrap();
    assert!(eval.error_rate < 0.001);
    assert!(eval.ari > 0.99);
}

#[test]
fn empirical_error_matches_closed_form() {
    for (pi1, delta) in [(0.5, 1.0), (0.3, 2.0), (0.7, 2.5)] {
        let theta = homoscedastic(pi1, delta);
        let b = DiscriminantCoeffs::new(0.2, DVector::from_vec(vec![-1.0, 0.3]));
        let err = error_rate(&b, &theta).unwrap();
        let n = 20_000;
        let test = sample_mixture(&theta, n, &mut stream(7, 0, Purpose::Test));
        let eval = evaluate_rule(&Rule::Linear(b), &test).unwrap();
        let band = 3.0 * (err * (1.0 - err) / n as f64).sqrt();
        assert!(
            (eval.error_rate - err).abs() < band,
            "{} vs {err}",
            eval.error_rate
        );
    }
}

#[test]
fn random_rule_has_no_agreement() {
    let theta = homoscedastic(0.5, 2.0);
    let test = sample_mixture(&theta, 10_000, &mut stream(8, 0, Purpose::Test));
    let mut rng = stream(8, 0, Purpose::Fitting);
    let coin: Vec<bool> = (0..test.len()).map(|_| rng.gen()).collect();
    let truth: Vec<Option<Class>> = test.labels().to_vec();
    assert!(adjusted_rand_index(&truth, &coin).unwrap().abs() < 0.03);
}

#[test]
fn table_grid_has_published_cells() {
    let grid = run_table1_grid(&[0.1, 0.5], &[1.0, 4.0], 1.0, &QuadratureSpec::default()).unwrap();
    assert_eq!(grid.values.len(), 2);
    assert!(grid.values.iter().all(|row| row.len() == 2));
    assert!((grid.values[1][0] - 0.0051).abs() < 0.005);
    assert!((grid.values[0][1] - 0.5585).abs() < 0.05585);
}

fn small_figure1(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        replications: 4,
        n_test: 200,
        alpha_grid: Some(vec![0.25, 0.5, 0.75]),
        ..ExperimentConfig::figure1(seed)
    }
}

#[test]
fn replication_report_shape() {
    let config = small_figure1(3);
    let report = run_figure1_experiment(&config).unwrap();
    assert_eq!(report.records.len(), 4 * 4);
    assert_eq!(report.aggregates.len(), 4);
    assert!(report.aggregate(Method::Full, None).is_some());
    assert!(report.aggregate(Method::Fsc, Some(0.5)).is_some());
    assert_eq!(ExperimentConfig::figure1(0).expanded_methods().len(), 20);
}

#[test]
fn replication_results_ignore_thread_count() {
    let config = small_figure1(11);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_figure1_experiment(&config).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn iteration_experiment_shape() {
    let config = ExperimentConfig {
        replications: 6,
        n: 600,
        ..ExperimentConfig::eq2(5)
    };
    let report = run_eq2_experiment(&config, 4, true).unwrap();
    assert_eq!(report.mean.len(), 5);
    assert_eq!(report.analytic.len(), 5);
    assert_eq!(report.per_replication.len() + report.failures, 6);
    assert!(report.per_replication.iter().all(|r| r.len() == 5));
    let mcar = ExperimentConfig {
        mechanism: MissingnessMechanism::Mcar { gamma: 0.5 },
        ..config
    };
    assert!(run_eq2_experiment(&mcar, 4, true).is_err());
}

#[test]
fn paired_test_direction() {
    let a = [0.9, 0.8, 0.85, 0.95, 0.9];
    let b = [0.5, 0.6, 0.55, 0.5, 0.52];
    assert!(paired_t_test(&a, &b).unwrap().p_greater < 0.001);
    assert!(paired_t_test(&b, &a).unwrap().p_greater > 0.999);
    assert!(paired_t_test(&a, &b[..3]).is_err());
}
