//! Independent oracles backing the numerical tests: dense operator
//! assembly, power iteration, forward-Euler reference evolution, a dense
//! RKL2 recurrence, and closed-form RKL2 coefficients.
//!
//! Nothing here reuses the production stencil or integrator code paths.
//! The dense matrix is assembled per face flux and scattered entry by
//! entry; the recurrence runs on plain vectors in the textbook (convex
//! combination) form; coefficients come from integer-factored closed
//! forms. Agreement with the production crate is therefore evidence, not
//! tautology.
//!
//! Dense indexing convention: node 0 is the north pole, node 1 the south
//! pole, then interior nodes row-major, so (i, j) maps to
//! 2 + (i-1) np + j for 1 <= i <= nt-2.

use std::sync::Arc;

use diffuse_core::{ScalarField, SphericalGrid};

/// Hard cap on nt*np for dense oracles.
pub const DENSE_CAP: usize = 4096;

/// Dense matrix form of the diffusion operator plus the matching cell
/// areas, in oracle index order.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub n: usize,
    /// Row-major n x n entries of M.
    pub matrix: Vec<f64>,
    /// Cell area per dense index.
    pub area: Vec<f64>,
}

impl DenseOperator {
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.n + c]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.n];
        for r in 0..self.n {
            let row = &self.matrix[r * self.n..(r + 1) * self.n];
            let mut acc = 0.0;
            for (m, x) in row.iter().zip(v) {
                acc += m * x;
            }
            out[r] = acc;
        }
        out
    }

    /// Largest |row sum|, which the flux pairing should keep at roundoff.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|r| self.matrix[r * self.n..(r + 1) * self.n].iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Largest |A_r M_rc - A_c M_cr| relative to the largest |A_r M_rc|.
    pub fn max_relative_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for r in 0..self.n {
            for c in 0..self.n {
                let a = self.area[r] * self.entry(r, c);
                let b = self.area[c] * self.entry(c, r);
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Dense index of grid node (i, j): poles first, then interior row-major.
pub fn dense_index(grid: &SphericalGrid, i: usize, j: usize) -> usize {
    if i == 0 {
        0
    } else if i == grid.nt() - 1 {
        1
    } else {
        2 + (i - 1) * grid.np() + j
    }
}

/// Field values in oracle index order.
pub fn to_dense(grid: &SphericalGrid, field: &ScalarField) -> Vec<f64> {
    let mut v = vec![0.0; (grid.nt() - 2) * grid.np() + 2];
    v[0] = field.get(0, 0);
    v[1] = field.get(grid.nt() - 1, 0);
    for i in 1..grid.nt() - 1 {
        for j in 0..grid.np() {
            v[dense_index(grid, i, j)] = field.get(i, j);
        }
    }
    v
}

/// Dense vector back to a grid field, pole values replicated.
pub fn from_dense(grid: &Arc<SphericalGrid>, v: &[f64]) -> ScalarField {
    let (nt, np) = (grid.nt(), grid.np());
    assert_eq!(v.len(), (nt - 2) * np + 2);
    let mut values = vec![0.0; nt * np];
    values[..np].fill(v[0]);
    values[(nt - 1) * np..].fill(v[1]);
    for i in 1..nt - 1 {
        for j in 0..np {
            values[i * np + j] = v[dense_index(grid, i, j)];
        }
    }
    ScalarField::from_values(grid, values)
}

/// Assemble M entry by entry from per-face flux exchange. Every face
/// contributes a conductance g: the flux into cell a from cell b is
/// g (u_b - u_a), so M_ab += g/A_a, M_aa -= g/A_a and symmetrically for b.
pub fn dense_assemble(grid: &SphericalGrid, nu: &ScalarField) -> Result<DenseOperator, String> {
    let (nt, np) = (grid.nt(), grid.np());
    if nt * np > DENSE_CAP {
        return Err(format!(
            "dense oracle refuses grids beyond {DENSE_CAP} nodes, got {}",
            nt * np
        ));
    }
    let n = (nt - 2) * np + 2;
    let theta = grid.theta();
    let tf = grid.theta_face();
    let dtf = grid.dtheta_face();
    let dpf = grid.dphi_face();
    let dpc = grid.dphi_cell();

    // Areas recomputed from the cap boundaries, not read from the grid.
    let mut area = vec![0.0; n];
    area[0] = 2.0 * std::f64::consts::PI * (1.0 - tf[0].cos());
    area[1] = 2.0 * std::f64::consts::PI * (1.0 + tf[nt - 2].cos());
    for i in 1..nt - 1 {
        let band = tf[i - 1].cos() - tf[i].cos();
        for j in 0..np {
            area[dense_index(grid, i, j)] = band * dpc[j];
        }
    }

    let mut m = vec![0.0; n * n];
    let mut scatter = |a: usize, b: usize, g: f64| {
        m[a * n + b] += g / area[a];
        m[a * n + a] -= g / area[a];
        m[b * n + a] += g / area[b];
        m[b * n + b] -= g / area[b];
    };

    // Theta faces, pole rings included: face i sits between rows i and i+1.
    for i in 0..nt - 1 {
        let sf = tf[i].sin();
        for j in 0..np {
            let nu_f = 0.5 * (nu.get(i, j) + nu.get(i + 1, j));
            let g = sf * nu_f * dpc[j] / dtf[i];
            scatter(dense_index(grid, i, j), dense_index(grid, i + 1, j), g);
        }
    }
    // Phi faces within each interior row, periodic seam included.
    for i in 1..nt - 1 {
        let len = (tf[i] - tf[i - 1]) / theta[i].sin();
        for j in 0..np {
            let jn = (j + 1) % np;
            let nu_f = 0.5 * (nu.get(i, j) + nu.get(i, jn));
            let g = nu_f * len / dpf[j];
            scatter(dense_index(grid, i, j), dense_index(grid, i, jn), g);
        }
    }

    Ok(DenseOperator { n, matrix: m, area })
}

/// Dominant eigenvalue magnitude via power iteration with a deterministic
/// start vector. Errors if the estimate is still moving after `iterations`.
pub fn power_iteration(op: &DenseOperator, iterations: usize, tol: f64) -> Result<f64, String> {
    let n = op.n;
    let mut v: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5).sin() + 0.1).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut prev = f64::INFINITY;
    for _ in 0..iterations {
        let w = op.matvec(&v);
        let est = norm(&w);
        if est == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= tol * est {
            return Ok(est);
        }
        prev = est;
        v = w;
        for x in &mut v {
            *x /= est;
        }
    }
    Err(format!("power iteration did not settle in {iterations} iterations"))
}

/// n forward-Euler steps u <- u + dt M u.
pub fn euler_reference(op: &DenseOperator, u0: &[f64], dt_small: f64, n: usize) -> Vec<f64> {
    let mut u = u0.to_vec();
    for _ in 0..n {
        let mu = op.matvec(&u);
        for (x, d) in u.iter_mut().zip(&mu) {
            *x += dt_small * d;
        }
    }
    u
}

/// One RKL2 super-step on dense vectors in the textbook convex-combination
/// form, with coefficients from [`coeffs`].
pub fn rkl2_dense(op: &DenseOperator, u0: &[f64], dt: f64, s: usize) -> Vec<f64> {
    assert!(s >= 2);
    let n = u0.len();
    let my0 = op.matvec(u0);
    let mut ym1: Vec<f64> = (0..n)
        .map(|k| u0[k] + coeffs::mu_tilde_1(s) * dt * my0[k])
        .collect();
    let mut ym2 = u0.to_vec();
    for j in 2..=s {
        let mu = coeffs::mu(j);
        let nu = coeffs::nu(j);
        let mt = coeffs::mu_tilde(s, j);
        let gt = coeffs::gamma_tilde(s, j);
        let myj = op.matvec(&ym1);
        let mut y = vec![0.0; n];
        for k in 0..n {
            y[k] = mu * ym1[k] + nu * ym2[k] + (1.0 - mu - nu) * u0[k]
                + mt * dt * myj[k]
                + gt * dt * my0[k];
        }
        ym2 = std::mem::replace(&mut ym1, y);
    }
    ym1
}

/// RKL2 coefficients from integer-factored closed forms:
/// b_j = (j-1)(j+2) / (2 j (j+1)) for j >= 2, else 1/3.
pub mod coeffs {
    pub fn b(j: usize) -> f64 {
        if j < 2 {
            1.0 / 3.0
        } else {
            ((j - 1) * (j + 2)) as f64 / ((2 * j * (j + 1)) as f64)
        }
    }

    pub fn w1(s: usize) -> f64 {
        4.0 / (((s - 1) * (s + 2)) as f64)
    }

    pub fn mu_tilde_1(s: usize) -> f64 {
        b(1) * w1(s)
    }

    pub fn mu(j: usize) -> f64 {
        (2 * j - 1) as f64 * b(j) / (j as f64 * b(j - 1))
    }

    pub fn nu(j: usize) -> f64 {
        -((j - 1) as f64 * b(j)) / (j as f64 * b(j - 2))
    }

    pub fn mu_tilde(s: usize, j: usize) -> f64 {
        mu(j) * w1(s)
    }

    pub fn gamma_tilde(s: usize, j: usize) -> f64 {
        -(1.0 - b(j - 1)) * mu_tilde(s, j)
    }
}
