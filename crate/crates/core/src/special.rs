//! Special functions not covered by `statrs`.

use std::f64::consts::PI;

pub use statrs::function::erf::{erf, erfc};
pub use statrs::function::gamma::{gamma, ln_gamma};

/// Reciprocal gamma function, zero at the poles.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Kummer's confluent hypergeometric function evaluated at a nonpositive
/// argument, `M(a, b, -z)` for `z >= 0` and `b > 0`.
///
/// Small arguments go through the Kummer transformation
/// `M(a, b, -z) = e^{-z} M(b - a, b, z)`, whose series has no alternating
/// cancellation when `b - a >= 0`; large arguments use the algebraic
/// asymptotic expansion.
pub fn kummer_m_neg(a: f64, b: f64, z: f64) -> f64 {
    debug_assert!(z >= 0.0 && b > 0.0);
    if z == 0.0 {
        return 1.0;
    }
    if (a - b).abs() < 1e-15 {
        return (-z).exp();
    }
    if z <= 40.0 {
        let c = b - a;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= (c + k) / (b + k) * z / (k + 1.0);
            sum += term;
            k += 1.0;
            if term.abs() <= 1e-17 * sum.abs() && k > z {
                break;
            }
            if k > 2000.0 {
                break;
            }
        }
        (-z).exp() * sum
    } else {
        let lead = gamma(b) * recip_gamma(b - a) * z.powf(-a);
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut k = 0.0;
        let c = a - b + 1.0;
        loop {
            let next = term * (a + k) * (c + k) / ((k + 1.0) * z);
            if next.abs() >= term.abs() || next.abs() < 1e-18 * sum.abs() {
                if next.abs() < term.abs() {
                    sum += next;
                }
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        lead * sum
    }
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 25.0 {
        // periodic trapezoid on (1/π)∫_0^π cos(x sin θ) dθ converges geometrically
        let n = 40 + x.ceil() as usize;
        let mut acc = 0.0;
        for k in 0..n {
            let theta = PI * (k as f64 + 0.5) / n as f64;
            acc += (x * theta.sin()).cos();
        }
        acc / n as f64
    } else {
        let (p, q) = hankel_pq(x);
        let chi = x - 0.25 * PI;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() + q * chi.sin())
    }
}

fn hankel_pq(x: f64) -> (f64, f64) {
    // a_k = prod_{j=1..k} (2j-1)^2 / (k! 8^k) for order zero
    let mut a = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        a *= (2.0 * kf - 1.0).powi(2) / (kf * 8.0);
        let term = a / x.powi(k);
        if term >= prev || term < 1e-18 {
            break;
        }
        prev = term;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
    }
    (p, q)
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kummer_reduces_to_gaussian() {
        for &z in &[0.1, 1.0, 10.0, 60.0] {
            let m = kummer_m_neg(0.5, 0.5, z);
            assert!((m - (-z).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn kummer_matches_closed_form() {
        // M(1, 3/2, -z) = sqrt(pi)/(2 sqrt z) * e^{-z} * erfi(sqrt z) is awkward;
        // use M(1, 2, -z) = (1 - e^{-z}) / z instead.
        for &z in &[0.01, 0.5, 3.0, 20.0, 39.9, 40.1, 80.0, 400.0] {
            let m = kummer_m_neg(1.0, 2.0, z);
            let exact = (1.0 - (-z).exp()) / z;
            assert!((m - exact).abs() < 1e-13 * exact.abs().max(1e-3), "z={z}");
        }
    }

    #[test]
    fn kummer_branches_agree_at_switch() {
        for &(a, b) in &[(0.25, 0.5), (0.7, 0.5), (0.75, 1.0), (0.2, 1.5)] {
            let lo = kummer_m_neg(a, b, 40.0);
            let hi = kummer_m_neg(a, b, 40.0 + 1e-9);
            assert!((lo - hi).abs() < 1e-10 * lo.abs(), "a={a} b={b} {lo} {hi}");
        }
    }

    #[test]
    fn j0_known_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-14);
        assert!((bessel_j0(10.0) - (-0.245_935_764_451_348_3)).abs() < 1e-13);
        assert!((bessel_j0(30.0) - (-0.086_367_983_581_040_23)).abs() < 1e-12);
        // both branches agree with the reference value at the switch
        assert!((bessel_j0(25.0) - 0.096_266_783_275_958_11).abs() < 1e-13);
        assert!((bessel_j0(25.0 + 1e-12) - 0.096_266_783_275_958_11).abs() < 5e-13, "{}", bessel_j0(25.0 + 1e-12));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
