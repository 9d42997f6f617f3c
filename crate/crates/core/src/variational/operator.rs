//! Finite-difference Hamiltonian `-½Δ_h - λΓ_ε` on a Dirichlet box.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reduce::{reduce_for_lattice, ReducedProblem};
use super::VariationalProblem;
use crate::error::{PamError, Result};
use crate::spectral::regularized_covariance_value;

/// Uniform lattice on `[-L, L]^d` with `points` nodes per axis, boundary
/// nodes included (and held at zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if points < 16 {
            return Err(PamError::ParameterOutOfRange(format!("grid needs at least 16 points per axis, got {points}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(PamError::ParameterOutOfRange(format!("half width {half_width} must be positive")));
        }
        Ok(Self { half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points as f64 - 1.0)
    }

    pub fn interior(&self) -> usize {
        self.points - 2
    }

    /// Coordinates of the interior nodes along one axis.
    pub fn interior_axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.interior()).map(|i| -self.half_width + (i as f64 + 1.0) * h).collect()
    }
}

/// Sparse symmetric operator `-½Δ_h + diag(-potential)` on the interior
/// nodes of a `d`-dimensional grid (`d ≤ 2`), row-major.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    dim: usize,
    grid: GridSpec,
    side: usize,
    /// Attractive potential `λΓ_ε` (enters the operator with a minus sign).
    potential: Vec<f64>,
}

impl Hamiltonian {
    /// Builds the operator for an arbitrary potential sampled on the interior.
    pub fn from_potential(dim: usize, grid: GridSpec, potential: Vec<f64>) -> Result<Self> {
        let side = grid.interior();
        if dim == 0 || dim > 2 {
            return Err(PamError::InstanceTooLarge(format!("lattice dimension {dim} not supported")));
        }
        if potential.len() != side.pow(dim as u32) {
            return Err(PamError::DimensionMismatch(format!(
                "potential has {} entries, grid needs {}",
                potential.len(),
                side.pow(dim as u32)
            )));
        }
        Ok(Self { dim, grid, side, potential })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn inv_h2(&self) -> f64 {
        let h = self.grid.spacing();
        1.0 / (h * h)
    }

    /// Cell volume `h^d`.
    pub fn cell(&self) -> f64 {
        self.grid.spacing().powi(self.dim as i32)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.dim as f64 * self.inv_h2() - self.potential[i]
    }

    /// Matrix entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal(i);
        }
        let off = -0.5 * self.inv_h2();
        let s = self.side;
        match self.dim {
            1 => {
                if i.abs_diff(j) == 1 {
                    off
                } else {
                    0.0
                }
            }
            _ => {
                let (ri, ci) = (i / s, i % s);
                let (rj, cj) = (j / s, j % s);
                if (ri == rj && ci.abs_diff(cj) == 1) || (ci == cj && ri.abs_diff(rj) == 1) {
                    off
                } else {
                    0.0
                }
            }
        }
    }

    /// Tridiagonal form `(diag, off)`; only for one-dimensional grids.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.dim != 1 {
            return None;
        }
        let diag = (0..self.len()).map(|i| self.diagonal(i)).collect();
        let off = vec![-0.5 * self.inv_h2(); self.len().saturating_sub(1)];
        Some((diag, off))
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim as f64 * self.inv_h2();
        let off = -0.5 * self.inv_h2();
        let s = self.side;
        match self.dim {
            1 => {
                for i in 0..s {
                    let mut acc = (d - self.potential[i]) * x[i];
                    if i > 0 {
                        acc += off * x[i - 1];
                    }
                    if i + 1 < s {
                        acc += off * x[i + 1];
                    }
                    y[i] = acc;
                }
            }
            _ => {
                y.par_chunks_mut(s).enumerate().for_each(|(r, row)| {
                    let base = r * s;
                    for (c, out) in row.iter_mut().enumerate() {
                        let i = base + c;
                        let mut nb = 0.0;
                        if c > 0 {
                            nb += x[i - 1];
                        }
                        if c + 1 < s {
                            nb += x[i + 1];
                        }
                        if r > 0 {
                            nb += x[i - s];
                        }
                        if r + 1 < s {
                            nb += x[i + s];
                        }
                        *out = (d - self.potential[i]) * x[i] + off * nb;
                    }
                });
            }
        }
    }

    /// `∫ λΓ g² - ½∫|∇g|²` with forward differences (boundary values zero)
    /// and the lattice cell as quadrature weight.
    pub fn energy_functional(&self, g: &[f64]) -> f64 {
        let s = self.side;
        let inv_h2 = self.inv_h2();
        let mut pot = 0.0;
        let mut kin = 0.0;
        match self.dim {
            1 => {
                for i in 0..s {
                    pot += self.potential[i] * g[i] * g[i];
                    let next = if i + 1 < s { g[i + 1] } else { 0.0 };
                    kin += (next - g[i]).powi(2);
                }
                kin += g[0] * g[0];
            }
            _ => {
                let rows: Vec<(f64, f64)> = (0..s)
                    .into_par_iter()
                    .map(|r| {
                        let mut p = 0.0;
                        let mut k = 0.0;
                        for c in 0..s {
                            let i = r * s + c;
                            p += self.potential[i] * g[i] * g[i];
                            let right = if c + 1 < s { g[i + 1] } else { 0.0 };
                            let down = if r + 1 < s { g[i + s] } else { 0.0 };
                            k += (right - g[i]).powi(2) + (down - g[i]).powi(2);
                            if c == 0 {
                                k += g[i] * g[i];
                            }
                            if r == 0 {
                                k += g[i] * g[i];
                            }
                        }
                        (p, k)
                    })
                    .collect();
                for (p, k) in rows {
                    pot += p;
                    kin += k;
                }
            }
        }
        (pot - 0.5 * kin * inv_h2) * self.cell()
    }
}

/// Pair sum `λ Σ_{j<k} γ_ε(x^j - x^k)` at every interior node of the reduced
/// lattice. White noise with `ε = 0` (only `n = 2`, `ℓ = 1`) is an on-site
/// weight `λ/(√2 h)` at the origin, which the grid must contain.
pub fn pair_potential(r: &ReducedProblem, grid: &GridSpec) -> Result<Vec<f64>> {
    let p = &r.problem;
    let side = grid.interior();
    let h = grid.spacing();
    let count = side.pow(r.dim as u32);
    if p.noise_scale == 0.0 {
        return Ok(vec![0.0; count]);
    }
    if p.eps == 0.0 {
        if grid.points.is_multiple_of(2) {
            return Err(PamError::GridTooCoarse(
                "on-site delta needs an odd number of points so that v = 0 is a node".into(),
            ));
        }
        let mut pot = vec![0.0; count];
        pot[side / 2] = p.noise_scale / (SQRT_2 * h);
        return Ok(pot);
    }
    let axis = grid.interior_axis();
    let ell = p.ell;
    // collect distinct squared pair distances so each γ_ε value is computed once
    let mut keys: Vec<Vec<u64>> = Vec::with_capacity(count);
    let mut distinct: HashMap<u64, f64> = HashMap::new();
    let mut v = vec![0.0; r.dim];
    let mut disp = vec![0.0; ell];
    for idx in 0..count {
        let mut rem = idx;
        for d in (0..r.dim).rev() {
            v[d] = axis[rem % side];
            rem /= side;
        }
        let mut row = Vec::with_capacity(r.pair_maps.len());
        for pair in 0..r.pair_maps.len() {
            r.displacement(pair, &v, &mut disp);
            let r2: f64 = disp.iter().map(|x| x * x).sum();
            let key = r2.to_bits();
            distinct.entry(key).or_insert(0.0);
            row.push(key);
        }
        keys.push(row);
    }
    let mut list: Vec<u64> = distinct.keys().copied().collect();
    list.sort_unstable();
    let values: Vec<Result<f64>> = list
        .par_iter()
        .map(|k| {
            let mut x = vec![0.0; ell];
            x[0] = f64::from_bits(*k).sqrt();
            regularized_covariance_value(&p.measure, p.eps, &x)
        })
        .collect();
    for (k, v) in list.iter().zip(values) {
        distinct.insert(*k, v?);
    }
    Ok(keys.iter().map(|row| p.noise_scale * row.iter().map(|k| distinct[k]).sum::<f64>()).collect())
}

/// Assembles `-½Δ_h - λΓ_ε` for the centre-of-mass-reduced problem.
pub fn assemble_hamiltonian(p: &VariationalProblem, grid: &GridSpec) -> Result<Hamiltonian> {
    let r = reduce_for_lattice(p)?;
    if p.eps > 0.0 && grid.spacing() > p.eps.sqrt() {
        return Err(PamError::GridTooCoarse(format!(
            "spacing {} exceeds sqrt(eps) = {}",
            grid.spacing(),
            p.eps.sqrt()
        )));
    }
    let potential = pair_potential(&r, grid)?;
    Hamiltonian::from_potential(r.dim, *grid, potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralMeasure;

    #[test]
    fn operator_is_symmetric() {
        let p = VariationalProblem::new(3, SpectralMeasure::white_noise(), 1.0, 0.25).unwrap();
        let grid = GridSpec::new(3.0, 18).unwrap();
        let op = assemble_hamiltonian(&p, &grid).unwrap();
        let n = op.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(op.entry(i, j), op.entry(j, i));
            }
        }
        // apply agrees with the entries
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; n];
        op.apply(&x, &mut y);
        for i in (0..n).step_by(17) {
            let direct: f64 = (0..n).map(|j| op.entry(i, j) * x[j]).sum();
            assert!((direct - y[i]).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 1.0, 0.01).unwrap();
        let grid = GridSpec::new(10.0, 21).unwrap();
        assert!(matches!(assemble_hamiltonian(&p, &grid), Err(PamError::GridTooCoarse(_))));
    }

    #[test]
    fn delta_weight_on_site() {
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 1.0, 0.0).unwrap();
        let grid = GridSpec::new(1.0, 21).unwrap();
        let op = assemble_hamiltonian(&p, &grid).unwrap();
        let h = grid.spacing();
        let nonzero: Vec<usize> = (0..op.len()).filter(|i| op.potential()[*i] != 0.0).collect();
        assert_eq!(nonzero, vec![9]);
        assert!((op.potential()[9] - 1.0 / (SQRT_2 * h)).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_identity() {
        let p = VariationalProblem::new(2, SpectralMeasure::fractional(0.4).unwrap(), 1.3, 0.05).unwrap();
        let grid = GridSpec::new(4.0, 61).unwrap();
        let op = assemble_hamiltonian(&p, &grid).unwrap();
        let n = op.len();
        let mut g: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos() * 0.3).collect();
        let nrm = (g.iter().map(|x| x * x).sum::<f64>() * op.cell()).sqrt();
        g.iter_mut().for_each(|x| *x /= nrm);
        let mut hg = vec![0.0; n];
        op.apply(&g, &mut hg);
        let rq: f64 = g.iter().zip(&hg).map(|(a, b)| a * b).sum::<f64>() * op.cell();
        assert!((op.energy_functional(&g) + rq).abs() < 1e-10);
    }
}
