use pam_core::fk::{
    interaction_integral, moment_fk_bm, moment_fk_bridge, sample_bridge, BridgePath, InitialData, McSettings,
};
use pam_core::spectral::SpectralMeasure;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reversed(b: &BridgePath) -> BridgePath {
    let mut r = b.clone();
    r.positions.reverse();
    r
}

fn measure(dim: usize) -> SpectralMeasure {
    if dim == 1 {
        SpectralMeasure::white_noise()
    } else {
        SpectralMeasure::riesz(1.0, dim).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bridge_is_pinned_at_both_ends(t in 0.1f64..10.0, k in 2usize..200, dim in 1usize..=3, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sample_bridge(t, k, dim, &mut rng).unwrap();
        prop_assert_eq!(b.positions.len(), k + 1);
        prop_assert!(b.positions[0].iter().chain(&b.positions[k]).all(|&v| v == 0.0));
        prop_assert_eq!(b.times[k], t);
    }

    // B(t-·) is again a bridge, and z(s) = B(t-s) + x + (s/t)y is the
    // reversed path of B(s) + (x+y) - (s/t)y.
    #[test]
    fn interaction_integral_is_reversal_invariant(
        t in 0.2f64..3.0,
        seed: u64,
        dim in 1usize..=2,
        off in prop::collection::vec(-1.5f64..1.5, 8),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = measure(dim);
        let paths: Vec<BridgePath> = (0..3).map(|_| sample_bridge(t, 64, dim, &mut rng).unwrap()).collect();
        let rev: Vec<BridgePath> = paths.iter().map(reversed).collect();
        let x: Vec<Vec<f64>> = (0..3).map(|j| off[j * dim..(j + 1) * dim].to_vec()).collect();
        let y: Vec<Vec<f64>> = (0..3).map(|j| vec![off[7 - j]; dim]).collect();
        let xy: Vec<Vec<f64>> = x.iter().zip(&y).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect()).collect();
        let neg: Vec<Vec<f64>> = y.iter().map(|b| b.iter().map(|v| -v).collect()).collect();
        let a = interaction_integral(&paths, &x, &y, &m, 0.1, 1.0).unwrap();
        let b = interaction_integral(&rev, &xy, &neg, &m, 0.1, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn shifted_moment_is_dominated(t in 0.3f64..1.5, a in -2.0f64..2.0, seed in 0u64..1000) {
        let m = SpectralMeasure::white_noise();
        let s = McSettings { samples: 4000, steps: 48, seed };
        let base = moment_fk_bm(t, &[vec![0.0], vec![0.0]], &m, 0.1, 1.0, &s).unwrap();
        let shifted = moment_fk_bm(t, &[vec![0.0], vec![a]], &m, 0.1, 1.0, &s).unwrap();
        let sigma = (base.std_err.powi(2) + shifted.std_err.powi(2)).sqrt();
        prop_assert!(shifted.log_mean <= base.log_mean + 3.0 * sigma);
    }

    #[test]
    fn log_domain_estimates_stay_finite(lambda in 1.0f64..400.0, t in 0.5f64..4.0) {
        let m = SpectralMeasure::white_noise();
        let s = McSettings { samples: 256, steps: 64, seed: 11 };
        let e = moment_fk_bm(t, &[vec![0.0], vec![0.0], vec![0.0]], &m, 0.05, lambda, &s).unwrap();
        prop_assert!(e.log_mean.is_finite() && e.std_err.is_finite(), "{e:?}");
        prop_assert!(e.log_mean >= 0.0);
    }
}

#[test]
fn bridge_and_brownian_representations_agree_for_flat_data() {
    let m = SpectralMeasure::white_noise();
    let s = McSettings { samples: 40_000, steps: 64, seed: 5 };
    let x = [vec![0.0], vec![0.3]];
    let a = moment_fk_bridge(1.0, &x, &InitialData::ConstantOne, &m, 0.1, 1.0, &s).unwrap();
    let b = moment_fk_bm(1.0, &x, &m, 0.1, 1.0, &s).unwrap();
    let sigma = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    assert!((a.log_mean - b.log_mean).abs() <= 4.0 * sigma, "{a:?} {b:?}");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let m = SpectralMeasure::white_noise();
    let s = McSettings { samples: 5000, steps: 32, seed: 99 };
    let x = [vec![0.0], vec![0.5]];
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| moment_fk_bridge(1.0, &x, &InitialData::ConstantOne, &m, 0.1, 1.0, &s).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.log_mean.to_bits(), four.log_mean.to_bits());
    assert_eq!(one.std_err.to_bits(), four.std_err.to_bits());
}
