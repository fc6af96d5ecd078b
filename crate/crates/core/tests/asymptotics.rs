use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semisup_core::asymptotics::*;
use semisup_core::MixtureParams;
use statrs::distribution::{ContinuousCDF, Normal};

const PI1: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const DELTA: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
const PUBLISHED: [[f64; 4]; 5] = [
    [0.0036, 0.0591, 0.2540, 0.5585],
    [0.0025, 0.0668, 0.2972, 0.6068],
    [0.0027, 0.0800, 0.3289, 0.6352],
    [0.0038, 0.0941, 0.3509, 0.6522],
    [0.0051, 0.1008, 0.3592, 0.6580],
];

#[test]
fn published_efficiency_grid() {
    let quad = QuadratureSpec::default();
    for (i, &pi1) in PI1.iter().enumerate() {
        for (j, &delta) in DELTA.iter().enumerate() {
            let got = are_rule(&univariate_theta(pi1, delta).unwrap(), 1.0, &quad).unwrap();
            let want = PUBLISHED[i][j];
            let tol = (0.1 * want).max(0.005);
            assert!(
                (got - want).abs() <= tol,
                "pi1={pi1} delta={delta}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn efficiency_increases_with_separation() {
    let quad = QuadratureSpec::default();
    for &pi1 in &PI1 {
        let row: Vec<f64> = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
            .iter()
            .map(|&d| are_rule(&univariate_theta(pi1, d).unwrap(), 1.0, &quad).unwrap())
            .collect();
        assert!(row.windows(2).all(|w| w[1] > w[0]), "pi1={pi1}: {row:?}");
    }
}

#[test]
fn efficiency_lies_in_unit_interval() {
    let quad = QuadratureSpec::default();
    for &pi1 in &PI1 {
        for &delta in &DELTA {
            let theta = univariate_theta(pi1, delta).unwrap();
            let mut prev = 1.0;
            for gamma in [0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
                let are = are_rule(&theta, gamma, &quad).unwrap();
                assert!(are > 0.0 && are <= 1.0 + 1e-12);
                assert!(are <= prev + 1e-12, "ARE should fall as labels vanish");
                prev = are;
            }
        }
    }
}

#[test]
fn quadrature_refinement_is_stable() {
    let coarse = QuadratureSpec::default();
    let fine = QuadratureSpec {
        initial_nodes: coarse.initial_nodes * 2,
        rel_tol: 1e-9,
        ..coarse
    };
    for (pi1, delta) in [(0.1, 1.0), (0.3, 2.0), (0.5, 4.0)] {
        let theta = univariate_theta(pi1, delta).unwrap();
        let a = are_rule(&theta, 1.0, &coarse).unwrap();
        let b = are_rule(&theta, 1.0, &fine).unwrap();
        assert!(((a - b) / b).abs() < 1e-4, "{a} vs {b}");
    }
    let starved = QuadratureSpec {
        initial_nodes: 2,
        max_refinements: 1,
        ..coarse
    };
    let theta = univariate_theta(0.3, 2.0).unwrap();
    assert!(fisher_info_mixture(&theta, &starved).is_err());
}

fn log_mixture_density(x: &[f64], y: f64) -> f64 {
    let (pi1, mu1, mu2, s2) = (x[0], x[1], x[2], x[3]);
    let norm =
        |m: f64| (-(y - m) * (y - m) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
    (pi1 * norm(mu1) + (1.0 - pi1) * norm(mu2)).ln()
}

#[test]
fn mixture_information_matches_monte_carlo_score() {
    let theta = MixtureParams::homoscedastic(
        0.3,
        DVector::from_element(1, 0.0),
        DVector::from_element(1, 2.0),
        DMatrix::identity(1, 1),
    )
    .unwrap();
    let quad = fisher_info_mixture(&theta, &QuadratureSpec::default()).unwrap();
    let x = [0.3, 0.0, 2.0, 1.0];
    // Stratified draws: class counts fixed at their expectation, and each
    // class's normal draws jittered within equal-probability strata.
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let draws = 1_000_000;
    let n1 = (x[0] * draws as f64).round() as usize;
    let mut acc = DMatrix::<f64>::zeros(4, 4);
    for j in 0..draws {
        let (mean, stratum, strata) = if j < n1 {
            (x[1], j, n1)
        } else {
            (x[2], j - n1, draws - n1)
        };
        let u = (stratum as f64 + rng.gen::<f64>()) / strata as f64;
        let y = mean + std_normal.inverse_cdf(u);
        let mut score = [0.0; 4];
        for (i, s) in score.iter_mut().enumerate() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut up = x;
            up[i] += h;
            let mut down = x;
            down[i] -= h;
            *s = (log_mixture_density(&up, y) - log_mixture_density(&down, y)) / (2.0 * h);
        }
        for a in 0..4 {
            for b in 0..4 {
                acc[(a, b)] += score[a] * score[b];
            }
        }
    }
    acc /= draws as f64;
    for a in 0..4 {
        for b in 0..4 {
            let rel = (quad.matrix[(a, b)] - acc[(a, b)]).abs() / acc[(a, b)].abs();
            assert!(
                rel < 0.01,
                "entry ({a},{b}): {} vs {}",
                quad.matrix[(a, b)],
                acc[(a, b)]
            );
        }
    }
    let cc = fisher_info_classified(&theta).unwrap();
    let gap = SymmetricEigen::new(&cc.matrix - &quad.matrix)
        .eigenvalues
        .min();
    assert!(gap >= -1e-8);
}

#[test]
fn h_coefficients_below_one() {
    for i in 1..=30 {
        let delta = 0.2 * i as f64;
        let (h1, h2) = h_coeffs(delta).unwrap();
        assert!(h1.abs() < 1.0 && h2.abs() < 1.0, "delta={delta}: {h1} {h2}");
    }
}

#[test]
fn expansion_decays_to_optimal_error() {
    for i in 1..=30 {
        let delta = 0.2 * i as f64;
        for p in [1, 3] {
            let base = ExpansionInputs {
                delta,
                p,
                n1c: 25,
                n2c: 25,
                k: 0,
            };
            let floor = semisup_core::std_normal_cdf(-delta / 2.0);
            let mut prev = f64::INFINITY;
            for k in 0..=50 {
                let inputs = ExpansionInputs { k, ..base };
                let e = expected_error_cml(&inputs).unwrap();
                let a1 = a1_k(&inputs).unwrap();
                assert!(a1 < prev && e >= floor);
                prev = a1;
                if k == 50 && delta >= 1.0 && p == 1 {
                    assert!(a1 < 1e-6, "delta={delta} p={p}: {a1}");
                }
            }
        }
    }
}
