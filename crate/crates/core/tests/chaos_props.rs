use pam_core::chaos::{chaos_term, second_moment_chaos, ChaosMode};
use pam_core::fk::moment_fk_bm;
use pam_core::fk::McSettings;
use pam_core::spectral::{regularized_covariance_value, SpectralMeasure};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const QUAD: ChaosMode = ChaosMode::Quadrature { nodes: 12 };

fn term(d: usize, t: f64, eps: f64, lambda: f64) -> f64 {
    chaos_term(d, t, &SpectralMeasure::white_noise(), eps, lambda, QUAD).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn terms_are_nonnegative_and_monotone(
        d in 1usize..=3,
        t in 0.05f64..2.0,
        dt in 0.0f64..1.0,
        eps in 0.0f64..0.5,
        lambda in 0.0f64..2.0,
        dl in 0.0f64..1.0,
    ) {
        let base = term(d, t, eps, lambda);
        prop_assert!(base >= 0.0);
        prop_assert!(term(d, t + dt, eps, lambda) >= base * (1.0 - 1e-12));
        prop_assert!(term(d, t, eps, lambda + dl) >= base * (1.0 - 1e-12));
    }

    #[test]
    fn first_term_is_monotone_for_general_measures(t in 0.05f64..3.0, dt in 0.0f64..1.0, eta in 0.2f64..0.9) {
        let m = SpectralMeasure::riesz(eta, 1).unwrap();
        let a = chaos_term(1, t, &m, 0.1, 1.0, QUAD).unwrap().value;
        let b = chaos_term(1, t + dt, &m, 0.1, 1.0, QUAD).unwrap().value;
        prop_assert!(a >= 0.0 && b >= a * (1.0 - 1e-12));
    }
}

/// Direct path Monte Carlo for `E[(λ∫_0^t γ_ε(√2 W_s) ds)^d]`, `d = 1, 2`,
/// with standard errors.
fn raw_moments(t: f64, eps: f64, lambda: f64, paths: usize, steps: usize) -> [(f64, f64); 2] {
    let m = SpectralMeasure::white_noise();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dt = t / steps as f64;
    let mut samples = Vec::with_capacity(paths);
    for _ in 0..paths {
        let mut w = 0.0f64;
        let mut acc = 0.5 * regularized_covariance_value(&m, eps, &[0.0]).unwrap();
        for i in 1..=steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            w += (dt).sqrt() * z;
            let g = regularized_covariance_value(&m, eps, &[2f64.sqrt() * w]).unwrap();
            acc += if i == steps { 0.5 * g } else { g };
        }
        samples.push(lambda * acc * dt);
    }
    let stats = |pow: i32| {
        let vals: Vec<f64> = samples.iter().map(|v| v.powi(pow)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    [stats(1), stats(2)]
}

#[test]
fn terms_times_factorial_match_raw_path_moments() {
    let (t, eps, lambda) = (0.5, 0.1, 1.0);
    let raw = raw_moments(t, eps, lambda, 20_000, 200);
    for (d, (mean, se)) in [(1usize, raw[0]), (2, raw[1])] {
        let fact = if d == 1 { 1.0 } else { 2.0 };
        let exact = term(d, t, eps, lambda) * fact;
        // the time discretization bias of the direct estimator is well below one
        // standard error at 200 steps
        assert!((exact - mean).abs() <= 3.0 * se, "d = {d}: chaos {exact}, paths {mean} +- {se}");
    }
}

#[test]
fn series_matches_feynman_kac_on_pinned_parameters() {
    let m = SpectralMeasure::white_noise();
    for (t, eps, lambda, seed) in [(0.3, 0.2, 1.0, 1u64), (0.4, 0.1, 0.5, 2)] {
        let series = second_moment_chaos(t, &m, eps, lambda, 4, ChaosMode::Quadrature { nodes: 16 }).unwrap();
        let s = McSettings { samples: 50_000, steps: 64, seed };
        let mc = moment_fk_bm(t, &[vec![0.0], vec![0.0]], &m, eps, lambda, &s).unwrap();
        let tol = 3.0 * (mc.std_err + series.tail_bound);
        assert!((mc.log_mean - series.partial_sum.ln()).abs() <= tol, "t = {t}: {mc:?} vs {series:?}");
    }
}

#[test]
fn monte_carlo_mode_matches_quadrature() {
    let m = SpectralMeasure::white_noise();
    for d in 1..=3 {
        let q = chaos_term(d, 0.5, &m, 0.1, 1.0, QUAD).unwrap().value;
        let mc = chaos_term(d, 0.5, &m, 0.1, 1.0, ChaosMode::MonteCarlo { samples: 100_000, seed: 8 }).unwrap();
        assert!((mc.value - q).abs() <= 4.0 * mc.std_err.max(1e-12), "d = {d}: {q} vs {mc:?}");
    }
}
