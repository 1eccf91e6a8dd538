//! Conservative second-order discretization of du/dt = div(nu grad u) on the
//! sphere.
//!
//! Interior cells exchange fluxes across their four faces:
//!
//! ```text
//!   theta face i+1/2, column j:  sin th_f * nu_f * (u_{i+1,j} - u_{ij}) / dth_f * dphi_j^c
//!   phi face j+1/2, row i:       nu_f * (u_{i,j+1} - u_{ij}) / dphi_f * (dth_i^c / sin th_i)
//! ```
//!
//! with face diffusivities by arithmetic mean. Dividing the net flux by the
//! exact cell area A_ij = (cos th_{i-1/2} - cos th_{i+1/2}) dphi_j^c keeps
//! the discrete divergence theorem sharp: the same face flux enters both
//! neighbors with opposite signs, so area-weighted row sums telescope to
//! zero and the operator is self-adjoint in the area inner product. Each
//! pole is one cap cell fed by the fluxes through its bounding face ring.
//!
//! Coefficients are precomputed per node (the sweep is memory-bound; apply
//! touches nine arrays and does a handful of flops per node). The apply
//! kernel uses the difference form c_N (u_N - u) + ... so constants map to
//! exactly +0.0 in every cell, which the integrator's fixed-point contract
//! relies on.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape};
use crate::exec::{self, ExecPlan};
use crate::field::ScalarField;
use crate::grid::SphericalGrid;
use crate::math;
use crate::Result;

/// Flux-balance closure of one pole cap: du_pole/dt = self_coeff * u_pole +
/// sum_j weights[j] * u_{ring,j}, with self_coeff = -sum weights.
#[derive(Debug, Clone)]
pub struct PoleClosure {
    weights: Vec<f64>,
    self_coeff: f64,
}

impl PoleClosure {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn self_coeff(&self) -> f64 {
        self.self_coeff
    }
}

/// Precomputed 5-point stencil plus pole closures for a fixed grid and
/// diffusivity field. Immutable after build; safe to share across threads.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    grid: Arc<SphericalGrid>,
    nu: ScalarField,
    /// Per-node neighbor coefficients, nt x np row-major; pole rows zero.
    cn: Vec<f64>,
    cs: Vec<f64>,
    ce: Vec<f64>,
    cw: Vec<f64>,
    /// Center coefficients, always -(cn+cs+ce+cw).
    cc: Vec<f64>,
    north: PoleClosure,
    south: PoleClosure,
    lambda_g: f64,
}

impl StencilOperator {
    /// Build from a diffusivity field defined on `grid` (same grid object).
    pub fn build(grid: &Arc<SphericalGrid>, nu: &ScalarField) -> Result<Self> {
        if !nu.is_on(grid) {
            return Err(shape("diffusivity field is not defined on this grid"));
        }
        for (k, &v) in nu.values().iter().enumerate() {
            if !(v >= 0.0) {
                return Err(invalid(format!(
                    "diffusivity must be >= 0 everywhere, got {} at node ({}, {})",
                    v,
                    k / grid.np(),
                    k % grid.np()
                )));
            }
        }

        let (nt, np) = (grid.nt(), grid.np());
        let theta = grid.theta();
        let tf = grid.theta_face();
        let dtf = grid.dtheta_face();
        let dpf = grid.dphi_face();
        let dpc = grid.dphi_cell();
        let nuv = nu.values();

        let mut cn = vec![0.0; nt * np];
        let mut cs = vec![0.0; nt * np];
        let mut ce = vec![0.0; nt * np];
        let mut cw = vec![0.0; nt * np];
        let mut cc = vec![0.0; nt * np];

        for i in 1..nt - 1 {
            let sf_n = math::sin(tf[i - 1]);
            let sf_s = math::sin(tf[i]);
            // Exact cell metric: band = integral of sin over the cell.
            let band = math::cos(tf[i - 1]) - math::cos(tf[i]);
            let dthc = tf[i] - tf[i - 1];
            let kphi = dthc / (math::sin(theta[i]) * band);
            for j in 0..np {
                let jn = i * np + j;
                let je = i * np + if j + 1 == np { 0 } else { j + 1 };
                let jw = i * np + if j == 0 { np - 1 } else { j - 1 };
                let nu_c = nuv[jn];
                let n = sf_n * 0.5 * (nu_c + nuv[jn - np]) / (dtf[i - 1] * band);
                let s = sf_s * 0.5 * (nu_c + nuv[jn + np]) / (dtf[i] * band);
                let e = 0.5 * (nu_c + nuv[je]) * kphi / (dpf[j] * dpc[j]);
                let w_face = if j == 0 { np - 1 } else { j - 1 };
                let w = 0.5 * (nu_c + nuv[jw]) * kphi / (dpf[w_face] * dpc[j]);
                cn[jn] = n;
                cs[jn] = s;
                ce[jn] = e;
                cw[jn] = w;
                cc[jn] = -(n + s + e + w);
            }
        }

        let north = Self::pole_closure(
            math::sin(tf[0]),
            dtf[0],
            grid.north_cap_area(),
            nuv[0],
            &nuv[np..2 * np],
            dpc,
        );
        let south = Self::pole_closure(
            math::sin(tf[nt - 2]),
            dtf[nt - 2],
            grid.south_cap_area(),
            nuv[(nt - 1) * np],
            &nuv[(nt - 2) * np..(nt - 1) * np],
            dpc,
        );

        let mut peak: f64 = north.self_coeff.abs().max(south.self_coeff.abs());
        for i in 1..nt - 1 {
            for j in 0..np {
                let a = cc[i * np + j].abs();
                if a > peak {
                    peak = a;
                }
            }
        }

        Ok(StencilOperator {
            grid: Arc::clone(grid),
            nu: nu.clone(),
            cn,
            cs,
            ce,
            cw,
            cc,
            north,
            south,
            lambda_g: 2.0 * peak,
        })
    }

    /// Build with spatially constant diffusivity.
    pub fn build_constant(grid: &Arc<SphericalGrid>, nu: f64) -> Result<Self> {
        Self::build(grid, &ScalarField::constant(grid, nu))
    }

    fn pole_closure(
        sin_face: f64,
        dth_face: f64,
        cap_area: f64,
        nu_pole: f64,
        nu_ring: &[f64],
        dphi_cell: &[f64],
    ) -> PoleClosure {
        let mut weights = Vec::with_capacity(nu_ring.len());
        let mut total = 0.0;
        for (j, &nu_r) in nu_ring.iter().enumerate() {
            let w = sin_face * 0.5 * (nu_pole + nu_r) * dphi_cell[j] / (dth_face * cap_area);
            weights.push(w);
            total += w;
        }
        PoleClosure { weights, self_coeff: -total }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn nu(&self) -> &ScalarField {
        &self.nu
    }

    pub fn coeff_north(&self) -> &[f64] {
        &self.cn
    }

    pub fn coeff_south(&self) -> &[f64] {
        &self.cs
    }

    pub fn coeff_east(&self) -> &[f64] {
        &self.ce
    }

    pub fn coeff_west(&self) -> &[f64] {
        &self.cw
    }

    pub fn coeff_center(&self) -> &[f64] {
        &self.cc
    }

    pub fn north_pole(&self) -> &PoleClosure {
        &self.north
    }

    pub fn south_pole(&self) -> &PoleClosure {
        &self.south
    }

    /// Gershgorin bound on the spectral radius: with zero row sums and
    /// nonnegative off-diagonals every row's absolute sum is 2|c_C|, so
    /// lambda_G = 2 max|c_C| over all rows including the poles.
    pub fn gershgorin_bound(&self) -> f64 {
        self.lambda_g
    }

    /// Forward-Euler stability limit 2/lambda_G; +inf for a zero operator.
    pub fn explicit_dt(&self) -> f64 {
        2.0 / self.lambda_g
    }

    /// u_out = M u_in. Both fields must live on the operator's grid object;
    /// distinct buffers are guaranteed by the borrow rules. Bitwise
    /// deterministic at any thread count in every mode: each row is written
    /// by exactly one task from read-only input.
    pub fn apply(&self, u_in: &ScalarField, u_out: &mut ScalarField, plan: &ExecPlan) -> Result<()> {
        if !u_in.is_on(&self.grid) || !u_out.is_on(&self.grid) {
            return Err(shape("apply requires fields on the operator's grid"));
        }
        let (nt, np) = (self.grid.nt(), self.grid.np());
        let u = u_in.values();

        // Pole caps: ordered flux sums over the bounding ring, replicated
        // across the stored row.
        let u_n = u[0];
        let mut acc_n = 0.0;
        for (j, &w) in self.north.weights.iter().enumerate() {
            acc_n += w * (u[np + j] - u_n);
        }
        let u_s = u[(nt - 1) * np];
        let mut acc_s = 0.0;
        for (j, &w) in self.south.weights.iter().enumerate() {
            acc_s += w * (u[(nt - 2) * np + j] - u_s);
        }

        let out = u_out.values_mut();
        out[..np].fill(acc_n);
        out[(nt - 1) * np..].fill(acc_s);

        let interior = &mut out[np..(nt - 1) * np];
        let cn = &self.cn;
        let cs = &self.cs;
        let ce = &self.ce;
        let cw = &self.cw;
        exec::parallel_sweep(plan, 1, interior, np, &|i, row| {
            let base = i * np;
            for (j, slot) in row.iter_mut().enumerate() {
                let k = base + j;
                let c = u[k];
                let je = base + if j + 1 == np { 0 } else { j + 1 };
                let jw = base + if j == 0 { np - 1 } else { j - 1 };
                let mut acc = cn[k] * (u[k - np] - c);
                acc += cs[k] * (u[k + np] - c);
                acc += ce[k] * (u[je] - c);
                acc += cw[k] * (u[jw] - c);
                *slot = acc;
            }
        });
        Ok(())
    }

    /// Corrupt one interior north coefficient without touching the center
    /// term, breaking the zero-row-sum/conservation structure on purpose.
    /// Fault-injection hook for tests of the conservation checks; never
    /// called by production paths.
    #[doc(hidden)]
    pub fn inject_coefficient_fault(&mut self, i: usize, j: usize, delta: f64) {
        assert!(i >= 1 && i < self.grid.nt() - 1, "interior rows only");
        self.cn[i * self.grid.np() + j] += delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ReductionMode;
    use crate::grid;

    fn noise_like(g: &Arc<SphericalGrid>) -> ScalarField {
        ScalarField::from_node_fn(g, |t, p| {
            math::sin(5.0 * t + 1.3) * math::cos(3.0 * p) + 0.2 * math::cos(2.0 * t)
        })
    }

    #[test]
    fn zero_diffusivity_means_zero_operator() {
        let g = SphericalGrid::uniform(7, 12).unwrap();
        let op = StencilOperator::build_constant(&g, 0.0).unwrap();
        assert!(op.coeff_center().iter().all(|&c| c == 0.0));
        assert!(op.north_pole().weights().iter().all(|&w| w == 0.0));
        assert_eq!(op.gershgorin_bound(), 0.0);
        let u = noise_like(&g);
        let mut out = ScalarField::zeros(&g);
        op.apply(&u, &mut out, &ExecPlan::serial()).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_diffusivity_rejected() {
        let g = SphericalGrid::uniform(5, 8).unwrap();
        let mut nu = ScalarField::constant(&g, 1.0);
        nu.set(2, 3, -1e-9);
        assert!(StencilOperator::build(&g, &nu).is_err());
        let nan = ScalarField::constant(&g, f64::NAN);
        assert!(StencilOperator::build(&g, &nan).is_err());
    }

    #[test]
    fn grid_identity_enforced() {
        let g1 = SphericalGrid::uniform(5, 8).unwrap();
        let g2 = SphericalGrid::uniform(5, 8).unwrap();
        let nu = ScalarField::constant(&g2, 1.0);
        assert!(StencilOperator::build(&g1, &nu).is_err());
        let op = StencilOperator::build_constant(&g1, 1.0).unwrap();
        let u = ScalarField::constant(&g2, 1.0);
        let mut out = ScalarField::zeros(&g1);
        assert!(op.apply(&u, &mut out, &ExecPlan::serial()).is_err());
    }

    #[test]
    fn row_sums_are_zero() {
        let g = SphericalGrid::stretched(9, 14, 0.4).unwrap();
        let nu = ScalarField::from_node_fn(&g, |t, p| 1.0 + 0.5 * math::sin(t) * math::cos(p));
        let op = StencilOperator::build(&g, &nu).unwrap();
        let np = g.np();
        let mut peak: f64 = 0.0;
        for k in 0..op.cc.len() {
            peak = peak.max(op.cc[k].abs());
        }
        for i in 1..g.nt() - 1 {
            for j in 0..np {
                let k = i * np + j;
                let rs = op.cn[k] + op.cs[k] + op.ce[k] + op.cw[k] + op.cc[k];
                assert!(rs.abs() <= 1e-13 * peak, "row ({i},{j}): {rs}");
            }
        }
        for pole in [op.north_pole(), op.south_pole()] {
            let ws: f64 = pole.weights().iter().sum();
            assert!((ws + pole.self_coeff()).abs() <= 1e-13 * peak.max(ws));
        }
    }

    #[test]
    fn offdiagonals_nonnegative_and_bound_matches_center() {
        let g = SphericalGrid::stretched(11, 10, 0.6).unwrap();
        let nu = ScalarField::from_node_fn(&g, |t, _| 0.5 + math::sin(t / 2.0));
        let op = StencilOperator::build(&g, &nu).unwrap();
        for k in 0..op.cc.len() {
            assert!(op.cn[k] >= 0.0 && op.cs[k] >= 0.0);
            assert!(op.ce[k] >= 0.0 && op.cw[k] >= 0.0);
        }
        let mut peak: f64 = op.north.self_coeff.abs().max(op.south.self_coeff.abs());
        for i in 1..g.nt() - 1 {
            for j in 0..g.np() {
                peak = peak.max(op.cc[i * g.np() + j].abs());
            }
        }
        assert_eq!(op.gershgorin_bound(), 2.0 * peak);
    }

    #[test]
    fn constants_map_to_exact_zero() {
        for cs in [0.0, 0.5] {
            let g = SphericalGrid::stretched(8, 10, cs).unwrap();
            let op = StencilOperator::build_constant(&g, 1.7).unwrap();
            let u = ScalarField::constant(&g, 3.25);
            let mut out = ScalarField::constant(&g, f64::NAN);
            op.apply(&u, &mut out, &ExecPlan::serial()).unwrap();
            for &v in out.values() {
                assert_eq!(v.to_bits(), 0.0f64.to_bits());
            }
        }
    }

    #[test]
    fn apply_conserves_area_weighted_sum() {
        let g = SphericalGrid::stretched(17, 24, 0.5).unwrap();
        let nu = ScalarField::from_node_fn(&g, |t, p| 1.0 + 0.3 * math::cos(t) * math::sin(2.0 * p));
        let op = StencilOperator::build(&g, &nu).unwrap();
        let u = noise_like(&g);
        let mut out = ScalarField::zeros(&g);
        op.apply(&u, &mut out, &ExecPlan::serial()).unwrap();
        let drift = grid::area_weighted_sum(&g, &out, ReductionMode::Ordered).unwrap();
        let scale = grid::area_weighted_abs_sum(&g, &u).unwrap() * op.gershgorin_bound();
        assert!(drift.abs() <= 1e-13 * scale, "drift {drift}, scale {scale}");
    }

    #[test]
    fn cos_theta_is_near_eigenfunction() {
        // Laplace-Beltrami: M cos(theta) = -2 cos(theta) for l=1.
        let g = SphericalGrid::uniform(181, 360).unwrap();
        let op = StencilOperator::build_constant(&g, 1.0).unwrap();
        let u = ScalarField::from_node_fn(&g, |t, _| math::cos(t));
        let mut out = ScalarField::zeros(&g);
        op.apply(&u, &mut out, &ExecPlan::serial()).unwrap();
        let mut worst = 0.0f64;
        for (v, w) in u.values().iter().zip(out.values()) {
            worst = worst.max((w + 2.0 * v).abs());
        }
        assert!(worst <= 5e-4, "max pointwise error {worst}");
    }

    #[test]
    fn fault_injection_breaks_conservation() {
        let g = SphericalGrid::uniform(9, 12).unwrap();
        let mut op = StencilOperator::build_constant(&g, 1.0).unwrap();
        op.inject_coefficient_fault(4, 3, 0.5 * op.gershgorin_bound());
        let u = noise_like(&g);
        let mut out = ScalarField::zeros(&g);
        op.apply(&u, &mut out, &ExecPlan::serial()).unwrap();
        let drift = grid::area_weighted_sum(&g, &out, ReductionMode::Ordered).unwrap();
        let scale = grid::area_weighted_abs_sum(&g, &u).unwrap() * op.gershgorin_bound();
        assert!(drift.abs() > 1e-13 * scale);
    }
}
