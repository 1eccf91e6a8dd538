//! RKL2 super-time-stepping.
//!
//! One super-step of size dt runs an s-stage recurrence whose stability
//! region along the negative real axis is (s^2+s-2)/4 times the forward
//! Euler limit:
//!
//! ```text
//!   Y_0 = u
//!   Y_1 = Y_0 + mu~_1 dt M Y_0
//!   Y_j = mu_j Y_{j-1} + nu_j Y_{j-2} + (1 - mu_j - nu_j) Y_0
//!         + mu~_j dt M Y_{j-1} + gamma~_j dt M Y_0          (j = 2..s)
//!   u^{n+1} = Y_s
//! ```
//!
//! with b_0 = b_1 = b_2 = 1/3, b_j = (j^2+j-2) / (2 j (j+1)), w1 =
//! 4/(s^2+s-2), mu~_1 = b_1 w1, mu_j = (2j-1)/j * b_j/b_{j-1}, nu_j =
//! -(j-1)/j * b_j/b_{j-2}, mu~_j = mu_j w1, gamma~_j = -(1-b_{j-1}) mu~_j.
//!
//! M Y_0 is computed once and reused by every stage's gamma~ term. The
//! combine is evaluated in increment form, Y_0 + mu_j (Y_{j-1} - Y_0) +
//! nu_j (Y_{j-2} - Y_0) + ..., which is algebraically identical but makes
//! fields with M u = 0 exact fixed points bit for bit.
//!
//! Stage counts follow the smallest s with (s^2+s-2)/4 >= dt/dt_expl, where
//! dt_expl = 2/lambda_G comes from the operator's Gershgorin bound.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{invalid, shape};
use crate::exec::{self, ExecPlan};
use crate::field::ScalarField;
use crate::grid::SphericalGrid;
use crate::math;
use crate::operator::StencilOperator;
use crate::Result;

/// Stability extension factor (s^2+s-2)/4: how many explicit Euler steps one
/// s-stage super-step covers.
pub fn stability_factor(s: usize) -> f64 {
    let sf = s as f64;
    (sf * sf + sf - 2.0) / 4.0
}

/// Smallest s >= 2 with stability_factor(s) >= dt/dt_expl.
pub fn compute_stage_count(dt: f64, dt_expl: f64) -> Result<usize> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(invalid(format!("dt must be positive and finite, got {dt}")));
    }
    if !dt_expl.is_finite() || dt_expl <= 0.0 {
        return Err(invalid(format!(
            "dt_expl must be positive and finite, got {dt_expl}"
        )));
    }
    let r = dt / dt_expl;
    if !(r > 1.0) {
        return Ok(2);
    }
    // Closed-form root of s^2 + s - 2 = 4r, then fix up any rounding slack.
    let mut s = math::ceil((-1.0 + math::sqrt(9.0 + 16.0 * r)) / 2.0) as usize;
    s = s.max(2);
    while s > 2 && stability_factor(s - 1) >= r {
        s -= 1;
    }
    while stability_factor(s) < r {
        s += 1;
    }
    Ok(s)
}

/// Coefficients of stage j (j = 2..s).
#[derive(Debug, Clone, Copy)]
pub struct StageCoeff {
    pub mu: f64,
    pub nu: f64,
    pub mu_tilde: f64,
    pub gamma_tilde: f64,
}

/// Stage count, step size, and the full coefficient tables for one
/// super-step.
#[derive(Debug, Clone)]
pub struct Rkl2Plan {
    s: usize,
    dt: f64,
    b: Vec<f64>,
    w1: f64,
    mu_tilde_1: f64,
    /// stages[j-2] holds the coefficients of stage j.
    stages: Vec<StageCoeff>,
}

impl Rkl2Plan {
    /// Build the coefficient tables for s stages. dt = 0 is allowed and
    /// makes the step an exact identity.
    pub fn build(s: usize, dt: f64) -> Result<Self> {
        if s < 2 {
            return Err(invalid(format!("stage count must be >= 2, got {s}")));
        }
        if !dt.is_finite() || dt < 0.0 {
            return Err(invalid(format!("dt must be finite and >= 0, got {dt}")));
        }
        let mut b = Vec::with_capacity(s + 1);
        b.push(1.0 / 3.0);
        b.push(1.0 / 3.0);
        for j in 2..=s {
            let jf = j as f64;
            b.push((jf * jf + jf - 2.0) / (2.0 * jf * (jf + 1.0)));
        }
        let sf = s as f64;
        let w1 = 4.0 / (sf * sf + sf - 2.0);
        let mu_tilde_1 = b[1] * w1;
        let mut stages = Vec::with_capacity(s - 1);
        for j in 2..=s {
            let jf = j as f64;
            let mu = (2.0 * jf - 1.0) / jf * b[j] / b[j - 1];
            let nu = -(jf - 1.0) / jf * b[j] / b[j - 2];
            let mu_tilde = mu * w1;
            let gamma_tilde = -(1.0 - b[j - 1]) * mu_tilde;
            stages.push(StageCoeff { mu, nu, mu_tilde, gamma_tilde });
        }
        Ok(Rkl2Plan { s, dt, b, w1, mu_tilde_1, stages })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn mu_tilde_1(&self) -> f64 {
        self.mu_tilde_1
    }

    /// b_0..b_s.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Coefficients of stage j, for j in 2..=s.
    pub fn stage(&self, j: usize) -> &StageCoeff {
        &self.stages[j - 2]
    }
}

/// The four scratch fields one super-step needs: M Y_0, M Y_{j-1}, and the
/// two rolling stage buffers. Owning them makes buffer aliasing
/// unrepresentable; reuse across steps avoids per-step allocation.
#[derive(Debug)]
pub struct StepWorkspace {
    grid: Arc<SphericalGrid>,
    my0: ScalarField,
    myj: ScalarField,
    ya: ScalarField,
    yb: ScalarField,
}

impl StepWorkspace {
    pub fn new(grid: &Arc<SphericalGrid>) -> Self {
        StepWorkspace {
            grid: Arc::clone(grid),
            my0: ScalarField::zeros(grid),
            myj: ScalarField::zeros(grid),
            ya: ScalarField::zeros(grid),
            yb: ScalarField::zeros(grid),
        }
    }
}

/// Integration totals; the application count is the analog of a solver's
/// reported iteration count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdvanceStats {
    pub steps_taken: u64,
    /// Sum over steps of s_k + 1: one application for Y_1, one per stage
    /// j = 2..s, and the cached M Y_0 reuse counted once.
    pub total_operator_applications: u64,
    pub elapsed_sim_time: f64,
}

/// Run the recurrence; the result lands in ws.ya.
fn step_into(
    op: &StencilOperator,
    plan: &Rkl2Plan,
    u: &ScalarField,
    exec: &ExecPlan,
    ws: &mut StepWorkspace,
) -> Result<()> {
    let np = ws.grid.np();
    let dt = plan.dt;

    op.apply(u, &mut ws.my0, exec)?;
    let uv = u.values();

    let mt1 = plan.mu_tilde_1 * dt;
    {
        let my0 = ws.my0.values();
        exec::parallel_sweep(exec, 0, ws.ya.values_mut(), np, &|row, out_row| {
            let base = row * np;
            for (j, slot) in out_row.iter_mut().enumerate() {
                *slot = uv[base + j] + mt1 * my0[base + j];
            }
        });
    }
    ws.yb.values_mut().copy_from_slice(uv);

    for j in 2..=plan.s {
        op.apply(&ws.ya, &mut ws.myj, exec)?;
        let st = plan.stage(j);
        let (mu, nu) = (st.mu, st.nu);
        let mtd = st.mu_tilde * dt;
        let gtd = st.gamma_tilde * dt;
        {
            let ya = ws.ya.values();
            let my0 = ws.my0.values();
            let myj = ws.myj.values();
            // yb holds Y_{j-2} on entry and Y_j on exit; each element is
            // read once before being overwritten.
            exec::parallel_sweep(exec, 0, ws.yb.values_mut(), np, &|row, out_row| {
                let base = row * np;
                for (jj, slot) in out_row.iter_mut().enumerate() {
                    let k = base + jj;
                    let y0 = uv[k];
                    *slot = y0
                        + mu * (ya[k] - y0)
                        + nu * (*slot - y0)
                        + mtd * myj[k]
                        + gtd * my0[k];
                }
            });
        }
        core::mem::swap(&mut ws.ya, &mut ws.yb);
    }
    Ok(())
}

fn check_step_shapes(
    op: &StencilOperator,
    u: &ScalarField,
    ws: &StepWorkspace,
) -> Result<()> {
    if !u.is_on(op.grid()) {
        return Err(shape("field is not on the operator's grid"));
    }
    if !Arc::ptr_eq(&ws.grid, op.grid()) {
        return Err(shape("workspace was built for a different grid"));
    }
    Ok(())
}

/// One super-step: returns Y_s without modifying u. The workspace owns its
/// buffers, so they are distinct from u and from each other by construction.
pub fn rkl2_step(
    op: &StencilOperator,
    plan: &Rkl2Plan,
    u: &ScalarField,
    exec: &ExecPlan,
    ws: &mut StepWorkspace,
) -> Result<ScalarField> {
    check_step_shapes(op, u, ws)?;
    step_into(op, plan, u, exec, ws)?;
    Ok(ws.ya.clone())
}

/// n_steps super-steps of dt = total_time/n_steps, stage count from the
/// operator's Gershgorin limit (s = 2 when the operator or dt is zero).
/// Returns the final field and exact application accounting.
pub fn advance(
    op: &StencilOperator,
    u: &ScalarField,
    total_time: f64,
    n_steps: u64,
    exec: &ExecPlan,
) -> Result<(ScalarField, AdvanceStats)> {
    if !total_time.is_finite() || total_time < 0.0 {
        return Err(invalid(format!(
            "total_time must be finite and >= 0, got {total_time}"
        )));
    }
    if !u.is_on(op.grid()) {
        return Err(shape("field is not on the operator's grid"));
    }
    if n_steps == 0 {
        if total_time > 0.0 {
            return Err(invalid("cannot cover positive total_time in zero steps"));
        }
        return Ok((u.clone(), AdvanceStats::default()));
    }

    let dt = total_time / n_steps as f64;
    let lambda = op.gershgorin_bound();
    let s = if dt > 0.0 && lambda > 0.0 {
        compute_stage_count(dt, 2.0 / lambda)?
    } else {
        2
    };
    let plan = Rkl2Plan::build(s, dt)?;

    let mut ws = StepWorkspace::new(op.grid());
    let mut cur = u.clone();
    let mut stats = AdvanceStats::default();
    for _ in 0..n_steps {
        step_into(op, &plan, &cur, exec, &mut ws)?;
        core::mem::swap(&mut cur, &mut ws.ya);
        stats.steps_taken += 1;
        stats.total_operator_applications += s as u64 + 1;
        stats.elapsed_sim_time += dt;
    }
    Ok((cur, stats))
}
