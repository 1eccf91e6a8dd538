//! Synthetic initial conditions: real surface harmonics and seeded noise.
//!
//! Harmonics are unnormalized and carry no Condon-Shortley phase:
//! P_l^m(cos th) * cos(m phi + phase) with P_m^m = (2m-1)!! sin^m th, so
//! e.g. P_2^2 = 3 sin^2 th. They are Laplace-Beltrami eigenfunctions with
//! eigenvalue -l(l+1), which the decay tests lean on.
//!
//! Noise uses ChaCha8 keyed by the 64-bit seed (little-endian bytes tiled
//! to the 256-bit key), one counter stream per theta row, so any row's
//! values are independent of every other row and of thread count. The
//! uniform draw maps the top 53 bits of a u64 onto [0, 1).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::invalid;
use crate::field::ScalarField;
use crate::grid::SphericalGrid;
use crate::math;
use crate::Result;

/// Associated Legendre P_l^m(cos th), m >= 0, unnormalized, positive phase
/// convention, with sin th supplied directly for accuracy near the poles.
fn legendre(l: u32, m: u32, cos_t: f64, sin_t: f64) -> f64 {
    // P_m^m = (2m-1)!! sin^m.
    let mut pmm = 1.0;
    let mut odd = 1.0;
    for _ in 0..m {
        pmm *= odd * sin_t;
        odd += 2.0;
    }
    if l == m {
        return pmm;
    }
    // Upward in degree: (l-m) P_l^m = (2l-1) x P_{l-1}^m - (l+m-1) P_{l-2}^m.
    let mut pm1 = cos_t * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    let mut val = 0.0;
    for ll in (m + 2)..=l {
        let llf = ll as f64;
        let mf = m as f64;
        val = (cos_t * (2.0 * llf - 1.0) * pm1 - (llf + mf - 1.0) * pm2) / (llf - mf);
        pm2 = pm1;
        pm1 = val;
    }
    val
}

/// Real surface harmonic P_l^{|m|}(cos th) cos(m phi + phase); pole rows get
/// the analytic limit (0 for m != 0, P_l(+-1) cos(phase) for m = 0).
pub fn gen_harmonic(
    grid: &Arc<SphericalGrid>,
    l: u32,
    m: i32,
    phase: f64,
) -> Result<ScalarField> {
    let ma = m.unsigned_abs();
    if ma > l {
        return Err(invalid(format!("|m| must be <= l, got l={l}, m={m}")));
    }
    let mf = m as f64;
    Ok(ScalarField::from_node_fn(grid, |theta, phi| {
        if theta == 0.0 {
            return if ma == 0 { math::cos(phase) } else { 0.0 };
        }
        if theta == core::f64::consts::PI {
            return if ma == 0 {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                sign * math::cos(phase)
            } else {
                0.0
            };
        }
        legendre(l, ma, math::cos(theta), math::sin(theta)) * math::cos(mf * phi + phase)
    }))
}

fn unit_from_u64(x: u64) -> f64 {
    // Top 53 bits over 2^53: uniform on [0, 1).
    (x >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Deterministic noise in [-amplitude, amplitude]: ChaCha8(seed), stream =
/// theta-row index, np draws per interior row, one draw per pole.
pub fn gen_noise(grid: &Arc<SphericalGrid>, seed: u64, amplitude: f64) -> ScalarField {
    debug_assert!(amplitude.is_finite());
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&seed.to_le_bytes());
    }
    let (nt, np) = (grid.nt(), grid.np());
    let row_rng = |row: usize| {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(row as u64);
        rng
    };
    let draw = |rng: &mut ChaCha8Rng| amplitude * (2.0 * unit_from_u64(rng.next_u64()) - 1.0);

    let mut values = Vec::with_capacity(nt * np);
    let north = draw(&mut row_rng(0));
    values.extend(core::iter::repeat(north).take(np));
    for i in 1..nt - 1 {
        let mut rng = row_rng(i);
        for _ in 0..np {
            values.push(draw(&mut rng));
        }
    }
    let south = draw(&mut row_rng(nt - 1));
    values.extend(core::iter::repeat(south).take(np));
    ScalarField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_monopole() {
        let g = SphericalGrid::uniform(5, 8).unwrap();
        let f = gen_harmonic(&g, 0, 0, 0.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dipole_is_cos_theta() {
        let g = SphericalGrid::uniform(19, 8).unwrap();
        let f = gen_harmonic(&g, 1, 0, 0.0).unwrap();
        for i in 0..g.nt() {
            let expect = if i == 0 {
                1.0
            } else if i == g.nt() - 1 {
                -1.0
            } else {
                math::cos(g.theta()[i])
            };
            assert!((f.get(i, 3) - expect).abs() <= 1e-15);
        }
    }

    #[test]
    fn y22_closed_form() {
        let g = SphericalGrid::uniform(13, 16).unwrap();
        let phase = 0.37;
        let f = gen_harmonic(&g, 2, 2, phase).unwrap();
        for i in 1..g.nt() - 1 {
            for j in 0..g.np() {
                let t = g.theta()[i];
                let p = g.phi()[j];
                let expect = 3.0 * math::sin(t) * math::sin(t) * math::cos(2.0 * p + phase);
                assert!((f.get(i, j) - expect).abs() <= 1e-13, "({i},{j})");
            }
        }
        assert_eq!(f.get(0, 0), 0.0);
        assert_eq!(f.get(g.nt() - 1, 0), 0.0);
    }

    #[test]
    fn negative_m_uses_abs_order() {
        let g = SphericalGrid::uniform(9, 12).unwrap();
        let f = gen_harmonic(&g, 3, -2, 0.0).unwrap();
        let t = g.theta()[4];
        let p = g.phi()[5];
        // P_3^2 = 15 cos sin^2; cos(-2 phi) = cos(2 phi).
        let expect = 15.0 * math::cos(t) * math::sin(t) * math::sin(t) * math::cos(2.0 * p);
        assert!((f.get(4, 5) - expect).abs() <= 1e-13);
        assert!(gen_harmonic(&g, 1, 2, 0.0).is_err());
    }

    #[test]
    fn harmonic_poles_single_valued() {
        let g = SphericalGrid::uniform(7, 10).unwrap();
        for (l, m) in [(0u32, 0i32), (1, 0), (2, 1), (3, 3), (4, -2)] {
            let f = gen_harmonic(&g, l, m, 0.2).unwrap();
            for j in 1..g.np() {
                assert_eq!(f.get(0, j), f.get(0, 0), "l={l} m={m}");
                assert_eq!(f.get(6, j), f.get(6, 0), "l={l} m={m}");
            }
        }
    }

    #[test]
    fn south_pole_sign_for_zonal_harmonics() {
        let g = SphericalGrid::uniform(5, 6).unwrap();
        let even = gen_harmonic(&g, 2, 0, 0.0).unwrap();
        let odd = gen_harmonic(&g, 3, 0, 0.0).unwrap();
        assert_eq!(even.get(4, 0), 1.0);
        assert_eq!(odd.get(4, 0), -1.0);
    }

    #[test]
    fn noise_is_deterministic_and_bounded() {
        let g = SphericalGrid::uniform(8, 16).unwrap();
        let a = gen_noise(&g, 42, 2.5);
        let b = gen_noise(&g, 42, 2.5);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(a.values().iter().all(|v| v.abs() <= 2.5));
        let c = gen_noise(&g, 43, 2.5);
        assert!(a.values().iter().zip(c.values()).any(|(x, y)| x != y));
        let z = gen_noise(&g, 42, 0.0);
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_rows_are_independent_streams() {
        // Same row index, same np: identical values even on taller grids.
        let g1 = SphericalGrid::uniform(8, 16).unwrap();
        let g2 = SphericalGrid::uniform(12, 16).unwrap();
        let a = gen_noise(&g1, 7, 1.0);
        let b = gen_noise(&g2, 7, 1.0);
        for i in 1..7 {
            for j in 0..16 {
                assert_eq!(a.get(i, j).to_bits(), b.get(i, j).to_bits(), "row {i}");
            }
        }
    }

    #[test]
    fn noise_pole_rows_single_valued() {
        let g = SphericalGrid::stretched(9, 11, 0.5).unwrap();
        let f = gen_noise(&g, 99, 1.0);
        for j in 1..11 {
            assert_eq!(f.get(0, j), f.get(0, 0));
            assert_eq!(f.get(8, j), f.get(8, 0));
        }
    }
}
