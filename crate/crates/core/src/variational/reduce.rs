//! Removal of the centre of mass by an orthonormal (Helmert) change of
//! variables.

use super::VariationalProblem;
use crate::error::{PamError, Result};

/// Largest reduced dimension the dense lattice solvers accept.
pub const MAX_REDUCED_DIM: usize = 2;

/// The variational problem in relative coordinates `v ∈ R^{(n-1)ℓ}`.
///
/// Coordinates are laid out block-wise: `v[i*ℓ + c]` is the `c`-th spatial
/// component of the `i`-th Helmert coordinate. For each pair `j < k`,
/// `x^j - x^k = Σ_i a_jk[i] v_i` componentwise.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub problem: VariationalProblem,
    pub dim: usize,
    pub pair_maps: Vec<Vec<f64>>,
}

impl ReducedProblem {
    /// Displacement `x^j - x^k ∈ R^ℓ` of pair `pair` at reduced point `v`.
    pub fn displacement(&self, pair: usize, v: &[f64], out: &mut [f64]) {
        let ell = self.problem.ell;
        let a = &self.pair_maps[pair];
        for (c, o) in out.iter_mut().enumerate().take(ell) {
            *o = a.iter().enumerate().map(|(i, ai)| ai * v[i * ell + c]).sum();
        }
    }
}

/// Rows `1..n` of the Helmert matrix; row 0 (the centre of mass) is dropped.
pub fn helmert_rows(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|i| {
            let norm = ((i * (i + 1)) as f64).sqrt();
            (0..n)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(i as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Rewrites `p` over relative coordinates. The kinetic coefficient stays ½
/// because the change of variables is orthonormal; the pair interaction
/// becomes `γ(a_jk · v)`, which for `n = 2` is `γ(√2 v)`.
pub fn reduce_center_of_mass(p: &VariationalProblem) -> Result<ReducedProblem> {
    let dim = (p.n - 1) * p.ell;
    let rows = helmert_rows(p.n);
    let mut pair_maps = Vec::new();
    for j in 0..p.n {
        for k in j + 1..p.n {
            pair_maps.push(rows.iter().map(|r| r[j] - r[k]).collect());
        }
    }
    Ok(ReducedProblem { problem: p.clone(), dim, pair_maps })
}

/// Like [`reduce_center_of_mass`], refusing reductions the lattice solvers
/// cannot hold in memory.
pub fn reduce_for_lattice(p: &VariationalProblem) -> Result<ReducedProblem> {
    let r = reduce_center_of_mass(p)?;
    if r.dim > MAX_REDUCED_DIM {
        return Err(PamError::InstanceTooLarge(format!(
            "reduced dimension (n-1)*ell = {} exceeds {MAX_REDUCED_DIM}",
            r.dim
        )));
    }
    Ok(r)
}
