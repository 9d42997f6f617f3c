//! The variational functional in real space and in Fourier modes.

use std::f64::consts::{PI, SQRT_2};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::operator::{assemble_hamiltonian, GridSpec, Hamiltonian};
use super::reduce::reduce_for_lattice;
use super::VariationalProblem;
use crate::error::{PamError, Result};
use crate::quadrature::GaussLegendre;
use crate::spectral::{SpectralMeasure, Tail};

const NORM_TOL: f64 = 1e-10;

/// `∫ λΓ_ε g² - ½∫|∇g|²` for a lattice function `g` on the interior nodes of
/// `grid` (reduced coordinates, zero on the boundary).
pub fn energy_functional_real(g: &[f64], p: &VariationalProblem, grid: &GridSpec) -> Result<f64> {
    let op = assemble_hamiltonian(p, grid)?;
    energy_functional_on(&op, g)
}

/// Same as [`energy_functional_real`] with a prebuilt operator.
pub fn energy_functional_on(op: &Hamiltonian, g: &[f64]) -> Result<f64> {
    if g.len() != op.len() {
        return Err(PamError::DimensionMismatch(format!("function has {} values, lattice has {}", g.len(), op.len())));
    }
    let nrm: f64 = g.iter().map(|x| x * x).sum::<f64>() * op.cell();
    if (nrm - 1.0).abs() > NORM_TOL {
        return Err(PamError::UnnormalizedInput(nrm));
    }
    Ok(op.energy_functional(g))
}

/// Samples of a function on the centred frequency lattice
/// `ζ_k = k·spacing`, `k = -K..=K` per axis (`count = 2K+1`), row-major.
#[derive(Debug, Clone)]
pub struct FourierState {
    pub dim: usize,
    pub count: usize,
    pub spacing: f64,
    pub values: Vec<Complex64>,
}

impl FourierState {
    fn half(&self) -> usize {
        self.count / 2
    }

    pub fn frequency(&self, k: usize) -> f64 {
        (k as f64 - self.half() as f64) * self.spacing
    }

    /// Largest deviation from `h(-ζ) = conj h(ζ)`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|i| (self.values[n - 1 - i] - self.values[i].conj()).norm()).fold(0.0, f64::max)
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spacing.powi(self.dim as i32)
    }
}

fn fft_nd(data: &mut [Complex64], side: usize, dim: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(side) } else { planner.plan_fft_forward(side) };
    match dim {
        1 => fft.process(data),
        _ => {
            for row in data.chunks_mut(side) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); side];
            for c in 0..side {
                for r in 0..side {
                    col[r] = data[r * side + c];
                }
                fft.process(&mut col);
                for r in 0..side {
                    data[r * side + c] = col[r];
                }
            }
        }
    }
}

/// Unitary transform `ĥ(ζ) = (2π)^{-d/2} ∫ e^{-iζ·v} g(v) dv` of a lattice
/// function, zero-padded to at least `pad` times the lattice size per axis
/// (odd count so the frequency lattice is symmetric).
pub fn to_fourier(g: &[f64], grid: &GridSpec, dim: usize, pad: usize) -> Result<FourierState> {
    let side = grid.interior();
    if g.len() != side.pow(dim as u32) {
        return Err(PamError::DimensionMismatch(format!(
            "function has {} values, lattice has {}",
            g.len(),
            side.pow(dim as u32)
        )));
    }
    let mut count = side * pad.max(1);
    if count.is_multiple_of(2) {
        count += 1;
    }
    let h = grid.spacing();
    let spacing = 2.0 * PI / (count as f64 * h);
    let total = count.pow(dim as u32);
    let mut data = vec![Complex64::new(0.0, 0.0); total];
    for (i, v) in g.iter().enumerate() {
        let (r, c) = (i / side, i % side);
        let idx = if dim == 1 { i } else { r * count + c };
        data[idx] = Complex64::new(*v, 0.0);
    }
    fft_nd(&mut data, count, dim, false);
    let half = count / 2;
    let v0 = grid.interior_axis()[0];
    let pref = (2.0 * PI).powf(-(dim as f64) / 2.0) * h.powi(dim as i32);
    let phase = |k: usize| -> Complex64 {
        let z = (k as f64 - half as f64) * spacing;
        Complex64::from_polar(1.0, -z * v0)
    };
    let wrap = |k: usize| (k + count - half) % count;
    let mut values = vec![Complex64::new(0.0, 0.0); total];
    for (out, slot) in values.iter_mut().enumerate() {
        *slot = if dim == 1 {
            data[wrap(out)] * phase(out) * pref
        } else {
            let (r, c) = (out / count, out % count);
            data[wrap(r) * count + wrap(c)] * phase(r) * phase(c) * pref
        };
    }
    Ok(FourierState { dim, count, spacing, values })
}

/// Discrete self-convolution `(ĥ*ĥ)(ω_m) = Σ_k ĥ(ζ_k) ĥ(ω_m - ζ_k) dζ^d` on the
/// lattice `m = -2K..=2K`.
fn self_convolution(h: &FourierState) -> Vec<Complex64> {
    let n = h.count;
    let size = 2 * n - 1;
    let mut data = vec![Complex64::new(0.0, 0.0); size.pow(h.dim as u32)];
    for (i, v) in h.values.iter().enumerate() {
        let idx = if h.dim == 1 { i } else { (i / n) * size + i % n };
        data[idx] = *v;
    }
    fft_nd(&mut data, size, h.dim, false);
    data.iter_mut().for_each(|v| *v = *v * *v);
    fft_nd(&mut data, size, h.dim, true);
    let w = h.spacing.powi(h.dim as i32) / (size.pow(h.dim as u32) as f64);
    data.iter_mut().for_each(|v| *v *= w);
    data
}

/// Average over the centred cell of width `width` (in `dim` dimensions) of
/// `ω ↦ f(|ω|/√2)` for a power law `f ~ c ρ^p` at the origin, including
/// integrable singularities and zeros.
fn origin_cell_density(m: &SpectralMeasure, width: f64, dim: usize) -> f64 {
    let Tail::Power(p) = m.tails().at_zero else { return m.density(0.0) };
    let r_ref = 1e-3 * width;
    let c0 = m.density(r_ref) * r_ref.powf(-p);
    let a = 0.5 * width;
    let stretch = 2f64.powf(-p / 2.0);
    match dim {
        1 => c0 * stretch * 2.0 * a.powf(p + 1.0) / (p + 1.0) / width,
        _ => {
            let rule = GaussLegendre::new(32);
            let angular = rule.integrate(0.0, PI / 4.0, |t| t.cos().powf(-(p + 2.0)));
            c0 * stretch * 8.0 * a.powf(p + 2.0) / (p + 2.0) * angular / (width * width)
        }
    }
}

/// Averages of `ω ↦ f_ε(|ω|/√2)` over the 1-D cells `[(k-½)δ, (k+½)δ]`,
/// `k = 0..=count`. Cell averages instead of node values keep the lattice sum
/// second order when the density has a kink or singularity at the origin.
fn line_cell_averages(m: &SpectralMeasure, eps: f64, spacing: f64, count: usize) -> Vec<f64> {
    let rule = GaussLegendre::new(8);
    let f = |w: f64| m.density(w / SQRT_2) * (-eps * w * w / 2.0).exp();
    let mut out = Vec::with_capacity(count + 1);
    out.push(origin_cell_density(m, spacing, 1) * (-eps * spacing * spacing / 24.0).exp());
    for k in 1..=count {
        let lo = (k as f64 - 0.5) * spacing;
        out.push(rule.integrate(lo, lo + spacing, f) / spacing);
    }
    out
}

/// Fourier-mode functional
/// `Σ_{j<k} (2π)^{-ℓ} ∫ (ĥ*ĥ)(-a_jkᵀξ) μ_ε(dξ) - ½∫|ζ|²|ĥ(ζ)|² dζ`
/// in reduced coordinates, times `λ` on the pair term.
///
/// The pair integral is a lattice sum over the convolution nodes, weighted by
/// cell averages of the density along lines; oblique pair directions (three
/// particles) interpolate the convolution bilinearly.
pub fn energy_functional_fourier(h: &FourierState, p: &VariationalProblem) -> Result<f64> {
    let r = reduce_for_lattice(p)?;
    if r.dim != h.dim {
        return Err(PamError::DimensionMismatch(format!(
            "fourier state has dimension {}, reduced problem {}",
            h.dim, r.dim
        )));
    }
    let nrm = h.norm_squared();
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(PamError::UnnormalizedInput(nrm));
    }
    let peak = h.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let defect = h.hermitian_defect();
    if defect > 1e-10 * peak.max(1e-300) {
        return Err(PamError::SymmetryViolation(defect));
    }
    let d = h.dim;
    let cell = h.spacing.powi(d as i32);
    let n = h.count;
    let kinetic: f64 = h
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let z2 =
                if d == 1 { h.frequency(i).powi(2) } else { h.frequency(i / n).powi(2) + h.frequency(i % n).powi(2) };
            z2 * v.norm_sqr()
        })
        .sum::<f64>()
        * 0.5
        * cell;
    if p.noise_scale == 0.0 {
        return Ok(-kinetic);
    }
    let conv = self_convolution(h);
    let size = 2 * n - 1;
    let big = (n - 1) as f64; // index offset 2K
    let eps = p.eps;
    let m = &p.measure;
    let f_eps = |rho: f64| m.density(rho) * (-eps * rho * rho).exp();
    let ell = p.ell;
    let mut pair_total = 0.0;
    if p.n == 2 {
        // ω = √2 ξ lies on the convolution lattice
        let pref = (2.0 * PI).powf(-(ell as f64)) * 2f64.powf(-(ell as f64) / 2.0);
        let mut acc = 0.0;
        if d == 1 {
            let avg = line_cell_averages(m, eps, h.spacing, n - 1);
            for (i, c) in conv.iter().enumerate() {
                acc += c.re * avg[(i as i64 - (n as i64 - 1)).unsigned_abs() as usize];
            }
        } else {
            let origin = origin_cell_density(m, h.spacing, ell);
            for (i, c) in conv.iter().enumerate() {
                let w2 =
                    ((((i / size) as f64) - big).powi(2) + (((i % size) as f64) - big).powi(2)) * h.spacing * h.spacing;
                let dens = if w2 == 0.0 { origin } else { f_eps(w2.sqrt() / SQRT_2) };
                acc += c.re * dens;
            }
        }
        pair_total = pref * acc * cell;
    } else {
        // three particles on a line: the pair term samples the 2-D
        // convolution along the unit direction a_jk/√2
        let pref = (2.0 * PI).powi(-1) / SQRT_2;
        let avg = line_cell_averages(m, eps, h.spacing, 2 * n);
        let lookup = |x: f64, y: f64| -> f64 {
            let fx = x / h.spacing + big;
            let fy = y / h.spacing + big;
            let (ix, iy) = (fx.floor(), fy.floor());
            if ix < 0.0 || iy < 0.0 || ix + 1.0 >= size as f64 || iy + 1.0 >= size as f64 {
                return 0.0;
            }
            let (tx, ty) = (fx - ix, fy - iy);
            let (ix, iy) = (ix as usize, iy as usize);
            // row index is the first reduced coordinate
            let at = |a: usize, b: usize| conv[a * size + b].re;
            (1.0 - tx) * (1.0 - ty) * at(ix, iy)
                + tx * (1.0 - ty) * at(ix + 1, iy)
                + (1.0 - tx) * ty * at(ix, iy + 1)
                + tx * ty * at(ix + 1, iy + 1)
        };
        for a in &r.pair_maps {
            let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let (ux, uy) = (a[0] / norm, a[1] / norm);
            let reach = big * h.spacing / ux.abs().max(uy.abs());
            let steps = (reach / h.spacing).floor() as i64;
            let mut acc = 0.0;
            for j in -steps..=steps {
                let u = j as f64 * h.spacing;
                acc += lookup(ux * u, uy * u) * avg[j.unsigned_abs() as usize];
            }
            pair_total += pref * acc * h.spacing;
        }
    }
    Ok(p.noise_scale * pair_total - kinetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralMeasure;

    #[test]
    fn gaussian_closed_form() {
        // ψ(v) = (πs²)^{-1/4} e^{-v²/(2s²)}: value ψ(0)²/√2 - 1/(4s²)
        let s: f64 = 0.8;
        let count = 801;
        let spacing = 0.02;
        let values = (0..count)
            .map(|k| {
                let z = (k as f64 - 400.0) * spacing;
                Complex64::new((s * s / PI).powf(0.25) * (-s * s * z * z / 2.0).exp(), 0.0)
            })
            .collect();
        let mut state = FourierState { dim: 1, count, spacing, values };
        let nrm = state.norm_squared().sqrt();
        state.values.iter_mut().for_each(|v| *v /= nrm);
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 1.0, 0.0).unwrap();
        let exact = (PI * s * s).powf(-0.5) / SQRT_2 - 1.0 / (4.0 * s * s);
        let v = energy_functional_fourier(&state, &p).unwrap();
        assert!((v - exact).abs() < 1e-4, "{v} {exact}");
    }

    #[test]
    fn zero_noise_is_pure_kinetic() {
        let grid = GridSpec::new(6.0, 121).unwrap();
        let axis = grid.interior_axis();
        let h = grid.spacing();
        let mut g: Vec<f64> = axis.iter().map(|x| (-x * x).exp()).collect();
        let nrm = (g.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        g.iter_mut().for_each(|x| *x /= nrm);
        let state = to_fourier(&g, &grid, 1, 4).unwrap();
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 0.0, 0.1).unwrap();
        let v = energy_functional_fourier(&state, &p).unwrap();
        assert!(v <= 0.0);
        // kinetic energy of the Gaussian e^{-x²}: ½∫g'² = ½
        assert!((v + 0.5).abs() < 1e-3, "{v}");
    }

    #[test]
    fn asymmetric_state_rejected() {
        let values = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)];
        let mut s = FourierState { dim: 1, count: 3, spacing: 1.0, values };
        let nrm = s.norm_squared().sqrt();
        s.values.iter_mut().for_each(|v| *v /= nrm);
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 1.0, 0.1).unwrap();
        assert!(matches!(energy_functional_fourier(&s, &p), Err(PamError::SymmetryViolation(_))));
    }

    #[test]
    fn unnormalized_real_input_rejected() {
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 1.0, 0.1).unwrap();
        let grid = GridSpec::new(2.0, 21).unwrap();
        let g = vec![1.0; 19];
        assert!(matches!(energy_functional_real(&g, &p, &grid), Err(PamError::UnnormalizedInput(_))));
    }
}
