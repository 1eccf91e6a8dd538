//! Logically rectangular (theta, phi) grids on the unit sphere.
//!
//! Nodes are colatitude/longitude pairs with both poles included as single
//! degrees of freedom. Faces sit at arithmetic midpoints of neighboring
//! nodes, and cell areas come from differences of spherical caps,
//!
//! ```text
//!   A_ij    = (cos th_{i-1/2} - cos th_{i+1/2}) * dphi_j^c   (interior)
//!   A_pole  = 2 pi (1 -+ cos th_face)                        (caps)
//! ```
//!
//! so the areas of all cells (each pole cap counted once) telescope to
//! exactly 4 pi up to roundoff. phi is periodic; the seam face spans
//! `phi[0] + 2 pi - phi[np-1]`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, shape};
use crate::exec::{self, ReductionMode};
use crate::field::ScalarField;
use crate::math;
use crate::Result;

const TWO_PI: f64 = 2.0 * PI;

/// Immutable spherical grid: node positions, face spacings, and exact
/// cap-based cell areas. Safe to share across threads.
#[derive(Debug)]
pub struct SphericalGrid {
    nt: usize,
    np: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    /// Face colatitudes th_{i+1/2}, length nt-1.
    theta_face: Vec<f64>,
    /// Node-to-node spacings dth_{i+1/2} = theta[i+1] - theta[i], length nt-1.
    dtheta_face: Vec<f64>,
    /// Face-to-face spacings dphi_{j+1/2}, length np; the last entry is the seam.
    dphi_face: Vec<f64>,
    /// Cell widths dphi_j^c = (dphi_{j-1/2} + dphi_{j+1/2}) / 2, length np.
    dphi_cell: Vec<f64>,
    /// Cell areas, nt x np row-major; pole rows hold the cap area in every column.
    area: Vec<f64>,
    north_cap_area: f64,
    south_cap_area: f64,
}

impl SphericalGrid {
    /// Grid with equally spaced colatitudes on [0, pi] and longitudes on [0, 2 pi).
    pub fn uniform(nt: usize, np: usize) -> Result<Arc<Self>> {
        Self::stretched(nt, np, 0.0)
    }

    /// Grid with colatitudes theta_i = pi * g(i / (nt-1)) for the monotone map
    /// g(x) = x + c * sin(2 pi x) / (2 pi), clustering nodes near the poles and
    /// equator for c > 0. Longitudes stay uniform.
    pub fn stretched(nt: usize, np: usize, cluster_strength: f64) -> Result<Arc<Self>> {
        if nt < 3 {
            return Err(invalid(format!("nt must be >= 3, got {nt}")));
        }
        if np < 3 {
            return Err(invalid(format!("np must be >= 3, got {np}")));
        }
        if !cluster_strength.is_finite() || cluster_strength < 0.0 {
            return Err(invalid(format!(
                "cluster_strength must be finite and >= 0, got {cluster_strength}"
            )));
        }
        if cluster_strength >= 1.0 {
            return Err(invalid(format!(
                "cluster_strength must be < 1 for a monotone grid, got {cluster_strength}"
            )));
        }

        let mut theta = Vec::with_capacity(nt);
        theta.push(0.0);
        for i in 1..nt - 1 {
            let x = i as f64 / (nt - 1) as f64;
            let g = x + cluster_strength * math::sin(TWO_PI * x) / TWO_PI;
            theta.push(PI * g);
        }
        theta.push(PI);

        let phi: Vec<f64> = (0..np).map(|j| TWO_PI * j as f64 / np as f64).collect();

        Self::from_nodes(theta, phi)
    }

    /// Build a grid from explicit node positions, validating every invariant.
    pub fn from_nodes(theta: Vec<f64>, phi: Vec<f64>) -> Result<Arc<Self>> {
        let nt = theta.len();
        let np = phi.len();
        if nt < 3 || np < 3 {
            return Err(invalid(format!("grid needs nt >= 3 and np >= 3, got {nt} x {np}")));
        }

        let theta_face: Vec<f64> = (0..nt - 1).map(|i| 0.5 * (theta[i] + theta[i + 1])).collect();
        let dtheta_face: Vec<f64> = (0..nt - 1).map(|i| theta[i + 1] - theta[i]).collect();

        let mut dphi_face = Vec::with_capacity(np);
        for j in 0..np - 1 {
            dphi_face.push(phi[j + 1] - phi[j]);
        }
        dphi_face.push(phi[0] + TWO_PI - phi[np - 1]);

        let dphi_cell: Vec<f64> = (0..np)
            .map(|j| 0.5 * (dphi_face[(j + np - 1) % np] + dphi_face[j]))
            .collect();

        let north_cap_area = TWO_PI * (1.0 - math::cos(theta_face[0]));
        let south_cap_area = TWO_PI * (1.0 + math::cos(theta_face[nt - 2]));

        let mut area = Vec::with_capacity(nt * np);
        area.extend(core::iter::repeat(north_cap_area).take(np));
        for i in 1..nt - 1 {
            let band = math::cos(theta_face[i - 1]) - math::cos(theta_face[i]);
            for j in 0..np {
                area.push(band * dphi_cell[j]);
            }
        }
        area.extend(core::iter::repeat(south_cap_area).take(np));

        let grid = SphericalGrid {
            nt,
            np,
            theta,
            phi,
            theta_face,
            dtheta_face,
            dphi_face,
            dphi_cell,
            area,
            north_cap_area,
            south_cap_area,
        };
        grid.validate()?;
        Ok(Arc::new(grid))
    }

    /// Check every structural invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let (nt, np) = (self.nt, self.np);
        if self.theta[0] != 0.0 {
            return Err(self.bad_invariant(format!("theta[0] must be 0, got {}", self.theta[0])));
        }
        if self.theta[nt - 1] != PI {
            return Err(
                self.bad_invariant(format!("theta[nt-1] must be pi, got {}", self.theta[nt - 1]))
            );
        }
        for i in 0..nt - 1 {
            if !(self.theta[i + 1] > self.theta[i]) {
                return Err(self.bad_invariant(format!("theta not strictly increasing at i={i}")));
            }
        }
        if !(0.0..TWO_PI).contains(&self.phi[0]) {
            return Err(self.bad_invariant(format!("phi[0] outside [0, 2pi): {}", self.phi[0])));
        }
        for j in 0..np - 1 {
            if !(self.phi[j + 1] > self.phi[j]) {
                return Err(self.bad_invariant(format!("phi not strictly increasing at j={j}")));
            }
        }
        if !(self.phi[np - 1] < TWO_PI) {
            return Err(self.bad_invariant(format!("phi[np-1] must be < 2pi: {}", self.phi[np - 1])));
        }
        for (j, &d) in self.dphi_face.iter().enumerate() {
            if !(d > 0.0) {
                return Err(self.bad_invariant(format!("dphi_face[{j}] not positive: {d}")));
            }
        }
        let phi_total: f64 = self.dphi_face.iter().sum();
        if (phi_total - TWO_PI).abs() > 1e-12 {
            return Err(self.bad_invariant(format!(
                "sum of dphi faces must be 2pi within 1e-12, got {phi_total}"
            )));
        }
        for k in 0..self.area.len() {
            if !(self.area[k] > 0.0) {
                return Err(self.bad_invariant(format!(
                    "cell area not positive at node ({}, {}): {}",
                    k / np,
                    k % np,
                    self.area[k]
                )));
            }
        }
        let total: f64 = (0..self.cell_count()).map(|k| self.cell_area_by_ordinal(k)).sum();
        let sphere = 4.0 * PI;
        if (total - sphere).abs() > 1e-12 * sphere {
            return Err(self.bad_invariant(format!(
                "total cell area must be 4pi within 1e-12 relative, got {total}"
            )));
        }
        Ok(())
    }

    fn bad_invariant(&self, msg: String) -> crate::Error {
        invalid(format!("grid invariant violated: {msg}"))
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn np(&self) -> usize {
        self.np
    }

    /// Number of stored node values per field (pole rows replicated).
    pub fn node_count(&self) -> usize {
        self.nt * self.np
    }

    /// Number of distinct cells: one per interior node plus one cap per pole.
    pub fn cell_count(&self) -> usize {
        (self.nt - 2) * self.np + 2
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn theta_face(&self) -> &[f64] {
        &self.theta_face
    }

    pub fn dtheta_face(&self) -> &[f64] {
        &self.dtheta_face
    }

    pub fn dphi_face(&self) -> &[f64] {
        &self.dphi_face
    }

    pub fn dphi_cell(&self) -> &[f64] {
        &self.dphi_cell
    }

    /// Cell area at node (i, j); pole rows return the cap area.
    pub fn area(&self, i: usize, j: usize) -> f64 {
        self.area[i * self.np + j]
    }

    pub fn north_cap_area(&self) -> f64 {
        self.north_cap_area
    }

    pub fn south_cap_area(&self) -> f64 {
        self.south_cap_area
    }

    /// Node index of cell ordinal k in the canonical order: north cap,
    /// interior nodes row-major, south cap.
    pub fn node_of_ordinal(&self, k: usize) -> (usize, usize) {
        debug_assert!(k < self.cell_count());
        if k == 0 {
            (0, 0)
        } else if k == self.cell_count() - 1 {
            (self.nt - 1, 0)
        } else {
            let m = k - 1;
            (1 + m / self.np, m % self.np)
        }
    }

    /// Area of cell ordinal k (canonical order, each cap once).
    pub fn cell_area_by_ordinal(&self, k: usize) -> f64 {
        let (i, j) = self.node_of_ordinal(k);
        self.area(i, j)
    }
}

/// Area-weighted sum of a field over all cells, each pole cap counted once,
/// in canonical cell order (north cap, interior row-major, south cap).
///
/// `Ordered` gives the bitwise result of strict left-to-right summation;
/// `Parallel` uses the fixed block tree of [`exec::reduce_with_mode`], which
/// may reassociate within 1e-12 relative of the ordered result for
/// well-scaled fields. Either way the value is a pure function of the grid,
/// field, and mode; it never depends on threading.
pub fn area_weighted_sum(
    grid: &SphericalGrid,
    field: &ScalarField,
    mode: ReductionMode,
) -> Result<f64> {
    if !field.is_on(grid) {
        return Err(shape(format!(
            "field of {} x {} does not belong to this {} x {} grid",
            field.nt(),
            field.np(),
            grid.nt,
            grid.np
        )));
    }
    let values = field.values();
    let np = grid.np;
    let plan = exec::ExecPlan::serial();
    Ok(exec::reduce_with_mode(&plan, mode, grid.cell_count(), |k| {
        let (i, j) = grid.node_of_ordinal(k);
        values[i * np + j] * grid.area(i, j)
    }))
}

/// Strict serial sum of |field| * area, the scaling used by conservation
/// tolerances.
pub fn area_weighted_abs_sum(grid: &SphericalGrid, field: &ScalarField) -> Result<f64> {
    if !field.is_on(grid) {
        return Err(shape("field/grid mismatch in area_weighted_abs_sum"));
    }
    let values = field.values();
    let mut total = 0.0;
    for k in 0..grid.cell_count() {
        let (i, j) = grid.node_of_ordinal(k);
        total += values[i * grid.np + j].abs() * grid.area(i, j);
    }
    Ok(total)
}
