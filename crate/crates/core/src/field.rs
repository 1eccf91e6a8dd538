//! Scalar node data bound to a grid.
//!
//! A field stores one f64 per node in row-major (theta outer, phi inner)
//! order and keeps a shared handle to its grid. Operators and integrators
//! require their operands to live on the *same* grid object, checked by
//! pointer identity, so two structurally equal grids are still distinct.
//! Pole rows are replicated storage: every column of row 0 (and nt-1) holds
//! the same value, kept in lockstep by construction.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::SphericalGrid;

/// One f64 per grid node, row-major.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<SphericalGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Field of zeros.
    pub fn zeros(grid: &Arc<SphericalGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Field with every node set to `value`.
    pub fn constant(grid: &Arc<SphericalGrid>, value: f64) -> Self {
        ScalarField {
            grid: Arc::clone(grid),
            values: vec![value; grid.node_count()],
        }
    }

    /// Field sampled from `f(theta, phi)` at every node. The function is
    /// evaluated once per pole (at phi = phi[0]) and the result replicated
    /// across the pole row, so single-valuedness holds by construction.
    pub fn from_node_fn(grid: &Arc<SphericalGrid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let (nt, np) = (grid.nt(), grid.np());
        let theta = grid.theta();
        let phi = grid.phi();
        let mut values = Vec::with_capacity(nt * np);
        values.extend(core::iter::repeat(f(theta[0], phi[0])).take(np));
        for i in 1..nt - 1 {
            for j in 0..np {
                values.push(f(theta[i], phi[j]));
            }
        }
        values.extend(core::iter::repeat(f(theta[nt - 1], phi[0])).take(np));
        ScalarField { grid: Arc::clone(grid), values }
    }

    /// Adopt preexisting node values. Panics if the length is not nt * np;
    /// pole rows are forced single-valued by copying column 0 across.
    pub fn from_values(grid: &Arc<SphericalGrid>, mut values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            grid.node_count(),
            "value buffer does not match grid size"
        );
        let np = grid.np();
        let north = values[0];
        let south = values[(grid.nt() - 1) * np];
        values[..np].fill(north);
        values[(grid.nt() - 1) * np..].fill(south);
        ScalarField { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    /// True when this field lives on exactly that grid object.
    pub fn is_on(&self, grid: &SphericalGrid) -> bool {
        core::ptr::eq(Arc::as_ptr(&self.grid), grid as *const _)
    }

    /// True when both fields share one grid object.
    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
    }

    pub fn nt(&self) -> usize {
        self.grid.nt()
    }

    pub fn np(&self) -> usize {
        self.grid.np()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable node storage. Callers that write pole rows must keep them
    /// single-valued; [`ScalarField::fix_poles`] restores the invariant.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.np() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let np = self.grid.np();
        if i == 0 {
            self.values[..np].fill(v);
        } else if i == self.grid.nt() - 1 {
            self.values[(self.grid.nt() - 1) * np..].fill(v);
        } else {
            self.values[i * np + j] = v;
        }
    }

    /// Copy column 0 of each pole row across the whole row.
    pub fn fix_poles(&mut self) {
        let np = self.grid.np();
        let north = self.values[0];
        let south = self.values[(self.grid.nt() - 1) * np];
        self.values[..np].fill(north);
        self.values[(self.grid.nt() - 1) * np..].fill(south);
    }

    /// Max |value| over all nodes; 0 for an all-zero field.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| {
            let a = v.abs();
            if a > m { a } else { m }
        })
    }
}
