use pam_core::spectral::SpectralMeasure;
use pam_core::variational::{
    energy_functional_fourier, energy_functional_real, lattice_energy, solve_en, to_fourier, GridSchedule, GridSpec,
    SolveOptions, VariationalProblem,
};
use proptest::prelude::*;

fn problem(m: SpectralMeasure, lambda: f64, eps: f64) -> VariationalProblem {
    VariationalProblem::new(2, m, lambda, eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // a finite Dirichlet box only gives a lower bound, so the lattice value can
    // be negative for weak coupling; nonnegativity holds after the box limit
    #[test]
    fn energy_nonnegative_and_monotone_in_lambda(l1 in 0.0f64..3.0, dl in 0.0f64..2.0, eps in 0.02f64..0.5) {
        let grid = GridSpec::new(12.0, 601).unwrap();
        let opts = SolveOptions::default();
        let (e1, _, _) = lattice_energy(&problem(SpectralMeasure::white_noise(), l1, eps), &grid, &opts).unwrap();
        let (e2, _, _) = lattice_energy(&problem(SpectralMeasure::white_noise(), l1 + dl, eps), &grid, &opts).unwrap();
        prop_assert!(e1 <= e2 + 1e-12, "{e1} > {e2}");

        let schedule = GridSchedule { half_widths: vec![8.0, 10.0, 12.0], points: vec![241, 321] };
        let solve = |lambda: f64| {
            solve_en(&problem(SpectralMeasure::white_noise(), lambda, eps), &schedule, &[eps], &opts).unwrap()
        };
        let (a, b) = (solve(l1), solve(l1 + dl));
        prop_assert!(a.value >= -1e-9 && b.value >= -1e-9, "{a:?} {b:?}");
        if a.error_bar.is_finite() && b.error_bar.is_finite() {
            prop_assert!(a.value <= b.value + a.error_bar + b.error_bar + 1e-9, "{a:?} {b:?}");
        }
    }

    #[test]
    fn rayleigh_quotient_of_ground_state(lambda in 0.5f64..3.0, eps in 0.02f64..0.5) {
        let grid = GridSpec::new(10.0, 401).unwrap();
        let p = problem(SpectralMeasure::white_noise(), lambda, eps);
        let (e, v, _) = lattice_energy(&p, &grid, &SolveOptions::default()).unwrap();
        let f = energy_functional_real(&v, &p, &grid).unwrap();
        prop_assert!((f - e).abs() <= 1e-7 * e.abs().max(1.0), "{f} vs {e}");
    }
}

#[test]
fn real_and_fourier_functionals_agree_on_catalog_kernels() {
    let catalog = [
        SpectralMeasure::white_noise(),
        SpectralMeasure::riesz(0.5, 1).unwrap(),
        SpectralMeasure::fractional(0.4).unwrap(),
    ];
    let grid = GridSpec::new(12.0, 481).unwrap();
    let opts = SolveOptions::default();
    for m in catalog {
        let p = problem(m, 1.0, 0.1);
        let (e, v, _) = lattice_energy(&p, &grid, &opts).unwrap();
        let h = to_fourier(&v, &grid, 1, 4).unwrap();
        let f = energy_functional_fourier(&h, &p).unwrap();
        let rel = (f - e).abs() / e.abs();
        assert!(rel < 0.02, "{:?}: real {e}, fourier {f}", p);
    }
    let higher = [
        (VariationalProblem::new(2, SpectralMeasure::riesz(1.0, 2).unwrap(), 1.0, 0.1).unwrap(), 2),
        (VariationalProblem::new(3, SpectralMeasure::white_noise(), 1.0, 0.1).unwrap(), 2),
        (VariationalProblem::new(3, SpectralMeasure::fractional(0.4).unwrap(), 1.0, 0.1).unwrap(), 2),
    ];
    let grid = GridSpec::new(7.0, 71).unwrap();
    for (p, dim) in higher {
        let (e, v, _) = lattice_energy(&p, &grid, &opts).unwrap();
        let h = to_fourier(&v, &grid, dim, 4).unwrap();
        let f = energy_functional_fourier(&h, &p).unwrap();
        let rel = (f - e).abs() / e.abs();
        assert!(rel < 0.02, "{:?}: real {e}, fourier {f}", p);
    }
}
