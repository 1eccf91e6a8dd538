//! Cross-checks of the production stencil/integrator against the dense
//! oracles in diffuse-testkit. Both sides are assembled independently, so
//! agreement here is evidence rather than tautology.

use diffuse_core::grid::{area_weighted_abs_sum, area_weighted_sum};
use diffuse_core::integrator::{advance, compute_stage_count, rkl2_step, Rkl2Plan};
use diffuse_core::synth::{gen_harmonic, gen_noise};
use diffuse_core::{ExecPlan, ReductionMode, ScalarField, SphericalGrid, StencilOperator, StepWorkspace};
use diffuse_testkit::{dense_assemble, dense_index, euler_reference, power_iteration, rkl2_dense, to_dense};

fn varying_nu(grid: &std::sync::Arc<SphericalGrid>) -> ScalarField {
    ScalarField::from_node_fn(grid, |t, p| 1.0 + 0.3 * t.sin() * (2.0 * p).cos() + 0.2 * t.cos())
}

#[test]
fn stencil_coefficients_match_dense_matrix() {
    let grid = SphericalGrid::uniform(5, 8).unwrap();
    let nu = varying_nu(&grid);
    let op = StencilOperator::build(&grid, &nu).unwrap();
    let dense = dense_assemble(&grid, &nu).unwrap();

    let peak = dense.matrix.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-14 * peak;
    let (nt, np) = (grid.nt(), grid.np());

    let mut expected = vec![0.0; dense.n * dense.n];
    let at = |r: usize, c: usize| r * dense.n + c;
    expected[at(0, 0)] = op.north_pole().self_coeff();
    for j in 0..np {
        expected[at(0, dense_index(&grid, 1, j))] = op.north_pole().weights()[j];
    }
    expected[at(1, 1)] = op.south_pole().self_coeff();
    for j in 0..np {
        expected[at(1, dense_index(&grid, nt - 2, j))] = op.south_pole().weights()[j];
    }
    for i in 1..nt - 1 {
        for j in 0..np {
            let r = dense_index(&grid, i, j);
            let k = i * np + j;
            expected[at(r, dense_index(&grid, i - 1, j))] += op.coeff_north()[k];
            expected[at(r, dense_index(&grid, i + 1, j))] += op.coeff_south()[k];
            expected[at(r, dense_index(&grid, i, (j + 1) % np))] += op.coeff_east()[k];
            expected[at(r, dense_index(&grid, i, (j + np - 1) % np))] += op.coeff_west()[k];
            expected[at(r, r)] += op.coeff_center()[k];
        }
    }

    for r in 0..dense.n {
        for c in 0..dense.n {
            let got = dense.entry(r, c);
            let want = expected[at(r, c)];
            assert!(
                (got - want).abs() <= tol,
                "entry ({r},{c}): dense {got:e} vs stencil {want:e}"
            );
        }
    }
}

#[test]
fn apply_matches_dense_matvec() {
    let grid = SphericalGrid::stretched(5, 8, 0.6).unwrap();
    let nu = varying_nu(&grid);
    let op = StencilOperator::build(&grid, &nu).unwrap();
    let dense = dense_assemble(&grid, &nu).unwrap();
    let plan = ExecPlan::serial();

    let u = gen_noise(&grid, 99, 1.0);
    let mut mu = ScalarField::zeros(&grid);
    op.apply(&u, &mut mu, &plan).unwrap();

    let want = dense.matvec(&to_dense(&grid, &u));
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..grid.nt() {
        for j in 0..grid.np() {
            let k = dense_index(&grid, i, j);
            assert!(
                (mu.get(i, j) - want[k]).abs() <= 1e-14 * scale,
                "node ({i},{j}): {} vs {}",
                mu.get(i, j),
                want[k]
            );
        }
    }
}

#[test]
fn rkl2_step_matches_dense_recurrence() {
    let grid = SphericalGrid::stretched(5, 8, 0.4).unwrap();
    let nu = varying_nu(&grid);
    let op = StencilOperator::build(&grid, &nu).unwrap();
    let dense = dense_assemble(&grid, &nu).unwrap();

    let dt = 4.0 * op.explicit_dt();
    let s = compute_stage_count(dt, op.explicit_dt()).unwrap();
    assert_eq!(s, 4);

    let u0 = gen_noise(&grid, 5, 1.0);
    let plan = Rkl2Plan::build(s, dt).unwrap();
    let exec = ExecPlan::serial();
    let mut ws = StepWorkspace::new(&grid);
    let got = rkl2_step(&op, &plan, &u0, &exec, &mut ws).unwrap();

    let want = rkl2_dense(&dense, &to_dense(&grid, &u0), dt, s);
    let scale = u0.max_abs();
    for i in 0..grid.nt() {
        for j in 0..grid.np() {
            let k = dense_index(&grid, i, j);
            assert!(
                (got.get(i, j) - want[k]).abs() <= 1e-13 * scale,
                "node ({i},{j}): stencil {} vs dense {}",
                got.get(i, j),
                want[k]
            );
        }
    }
}

#[test]
fn power_iteration_stays_within_gershgorin_bound() {
    let grid = SphericalGrid::uniform(6, 8).unwrap();
    let op = StencilOperator::build_constant(&grid, 1.0).unwrap();
    let dense = dense_assemble(&grid, op.nu()).unwrap();
    let lam = power_iteration(&dense, 10_000, 1e-10).unwrap();
    let bound = op.gershgorin_bound();
    assert!(lam <= bound * (1.0 + 1e-8), "lambda {lam} exceeds bound {bound}");
    assert!(lam >= 0.25 * bound, "bound {bound} implausibly loose vs lambda {lam}");
}

#[test]
fn operator_is_area_weighted_self_adjoint() {
    let grid = SphericalGrid::stretched(7, 9, 0.5).unwrap();
    let nu = varying_nu(&grid);
    let op = StencilOperator::build(&grid, &nu).unwrap();
    let plan = ExecPlan::serial();

    let u = gen_noise(&grid, 11, 1.0);
    let v = gen_noise(&grid, 12, 1.0);
    let mut mu = ScalarField::zeros(&grid);
    let mut mv = ScalarField::zeros(&grid);
    op.apply(&u, &mut mu, &plan).unwrap();
    op.apply(&v, &mut mv, &plan).unwrap();

    let inner = |a: &ScalarField, b: &ScalarField| {
        let mut acc = 0.0;
        let mut scale = 0.0;
        for k in 0..grid.cell_count() {
            let (i, j) = grid.node_of_ordinal(k);
            let t = grid.cell_area_by_ordinal(k) * a.get(i, j) * b.get(i, j);
            acc += t;
            scale += t.abs();
        }
        (acc, scale)
    };
    let (umv, s1) = inner(&u, &mv);
    let (vmu, s2) = inner(&v, &mu);
    assert!((umv - vmu).abs() <= 1e-12 * s1.max(s2));
}

#[test]
fn operator_is_negative_semidefinite() {
    let grid = SphericalGrid::stretched(7, 9, 0.3).unwrap();
    let nu = varying_nu(&grid);
    let op = StencilOperator::build(&grid, &nu).unwrap();
    let plan = ExecPlan::serial();

    for seed in [1u64, 2, 3, 4, 5] {
        let u = gen_noise(&grid, seed, 1.0);
        let mut mu = ScalarField::zeros(&grid);
        op.apply(&u, &mut mu, &plan).unwrap();
        let mut q = 0.0;
        let mut scale = 0.0;
        for k in 0..grid.cell_count() {
            let (i, j) = grid.node_of_ordinal(k);
            let t = grid.cell_area_by_ordinal(k) * u.get(i, j) * mu.get(i, j);
            q += t;
            scale += t.abs();
        }
        assert!(q <= 1e-10 * scale, "quadratic form {q} positive beyond roundoff (seed {seed})");
    }
}

/// One super-step of size T against a fine forward-Euler reference; halving
/// T must shrink the difference at least second-order fast.
#[test]
fn rkl2_error_vs_euler_reference_is_second_order() {
    let grid = SphericalGrid::uniform(6, 8).unwrap();
    let op = StencilOperator::build_constant(&grid, 1.0).unwrap();
    let dense = dense_assemble(&grid, op.nu()).unwrap();
    let exec = ExecPlan::serial();
    let u0 = gen_harmonic(&grid, 2, 1, 0.3).unwrap();
    let u0d = to_dense(&grid, &u0);

    let err_at = |t: f64| {
        let (got, stats) = advance(&op, &u0, t, 1, &exec).unwrap();
        assert_eq!(stats.steps_taken, 1);
        let reference = euler_reference(&dense, &u0d, t / 1e4, 10_000);
        let mut worst = 0.0f64;
        for i in 0..grid.nt() {
            for j in 0..grid.np() {
                let k = dense_index(&grid, i, j);
                worst = worst.max((got.get(i, j) - reference[k]).abs());
            }
        }
        worst
    };

    let t = 2.5 * op.explicit_dt();
    let e1 = err_at(t);
    let e2 = err_at(t / 2.0);
    let e4 = err_at(t / 4.0);
    assert!(e1 > 0.0 && e2 > 0.0 && e4 > 0.0);
    assert!(
        e2 <= e1 / 3.5 && e4 <= e2 / 3.5,
        "halving T took the error {e1:e} -> {e2:e} -> {e4:e}, slower than second order"
    );
}

#[test]
fn advance_conserves_area_weighted_sum() {
    let grid = SphericalGrid::uniform(64, 128).unwrap();
    let op = StencilOperator::build_constant(&grid, 1.0).unwrap();
    let exec = ExecPlan::serial();
    let u0 = gen_noise(&grid, 4242, 1.0);

    let dt = 20.0 * op.explicit_dt();
    let (u, stats) = advance(&op, &u0, 50.0 * dt, 50, &exec).unwrap();
    assert_eq!(stats.steps_taken, 50);

    let before = area_weighted_sum(&grid, &u0, ReductionMode::Ordered).unwrap();
    let after = area_weighted_sum(&grid, &u, ReductionMode::Ordered).unwrap();
    let scale = area_weighted_abs_sum(&grid, &u0).unwrap();
    assert!(
        (after - before).abs() <= 1e-11 * scale,
        "drift {:e} vs budget {:e}",
        (after - before).abs(),
        1e-11 * scale
    );
}
