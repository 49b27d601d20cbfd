//! Soft-core atom: grid eigenstates, Crank–Nicolson propagation and the
//! emission table it produces.

use num_complex::Complex64;
use phd_core::atom1d::{cn_energy, cn_step, field_free_eigenstates, momentum_apply, AbsorbingMask, Atom1d, GridState, SoftCoreParams, SpatialGrid};
use phd_core::dipole::{compute_table, TableMode};
use phd_core::model::{make_time_grid, EmitterModel, PulseConfig};

fn ground_energy(x_max: f64, n: usize) -> f64 {
    let grid = SpatialGrid::new(x_max, n).unwrap();
    field_free_eigenstates(&grid, &SoftCoreParams::default(), 1).unwrap().0[0]
}

#[test]
fn desk_grid_ground_energy() {
    let e0 = ground_energy(400.0, 8192);
    assert!((e0 - (-0.7926)).abs() < 1e-3, "E0 = {e0}");
}

/// Three-point Laplacian: halving dx cuts the error by four.
#[test]
fn ground_energy_converges_at_second_order() {
    let (a, b, c) = (ground_energy(400.0, 4096), ground_energy(400.0, 8192), ground_energy(400.0, 16384));
    let ratio = (a - b) / (b - c);
    assert!((3.5..4.5).contains(&ratio), "refinement ratio {ratio}");
    assert!((b - c).abs() < 2e-4);
}

#[test]
fn eigenstates_are_orthonormal_and_sorted() {
    let grid = SpatialGrid::new(100.0, 2001).unwrap();
    let (e, s) = field_free_eigenstates(&grid, &SoftCoreParams::default(), 6).unwrap();
    assert!(e.windows(2).all(|w| w[0] < w[1]));
    for a in 0..6 {
        for b in 0..6 {
            let ov: f64 = s[a].iter().zip(&s[b]).map(|(x, y)| x * y).sum::<f64>() * grid.dx();
            assert!((ov - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
}

/// An eigenstate evolves by the Cayley eigenphase, within O(dt²) of E.
#[test]
fn crank_nicolson_eigenphase() {
    let grid = SpatialGrid::new(100.0, 2001).unwrap();
    let pot = SoftCoreParams::default();
    let (e, s) = field_free_eigenstates(&grid, &pot, 2).unwrap();
    let pulse = PulseConfig::new(1e-300, 0.057, 1).unwrap();
    let dt = 0.05;
    let steps = 2000;
    for m in 0..2 {
        let start = GridState::from_real(&s[m]);
        let mut psi = start.clone();
        for j in 0..steps {
            cn_step(&mut psi, &grid, &pot, j as f64 * dt, dt, &pulse);
        }
        let t = steps as f64 * dt;
        let expect = Complex64::from_polar(1.0, -cn_energy(e[m], dt) * t);
        let dev: f64 = psi.psi.iter().zip(&start.psi).map(|(a, b)| (a - b * expect).norm_sqr()).sum::<f64>() * grid.dx();
        assert!(dev.sqrt() < 1e-8, "state {m}: deviation {:e}", dev.sqrt());
        let shift = (cn_energy(e[m], dt) - e[m]).abs();
        assert!(shift < 0.1 * e[m].powi(3).abs() * dt * dt);
    }
}

/// Without absorber the propagator is unitary and obeys the discrete
/// Ehrenfest law d⟨p⟩/dt = −⟨U'⟩ up to discretization error.
#[test]
fn driven_wavepacket_conserves_norm_and_follows_ehrenfest() {
    let grid = SpatialGrid::new(100.0, 2001).unwrap();
    let pot = SoftCoreParams::default();
    let (_, s) = field_free_eigenstates(&grid, &pot, 1).unwrap();
    let pulse = PulseConfig::new(0.05, 0.057, 1).unwrap();
    let dt = 0.02;
    let steps = (pulse.duration() / dt).ceil() as usize;
    let dx = grid.dx();
    let force: Vec<f64> = (0..grid.n_points)
        .map(|j| {
            let (x, h) = (grid.x(j), 1e-5);
            -(pot.potential(x + h) - pot.potential(x - h)) / (2.0 * h)
        })
        .collect();
    let expect_p = |psi: &GridState| psi.inner(&momentum_apply(psi, &grid), dx).re;
    let expect_f = |psi: &GridState| psi.psi.iter().zip(&force).map(|(z, f)| z.norm_sqr() * f).sum::<f64>() * dx;
    let mut psi = GridState::from_real(&s[0]);
    let mut p = vec![expect_p(&psi)];
    let mut f = vec![expect_f(&psi)];
    for j in 0..steps {
        cn_step(&mut psi, &grid, &pot, j as f64 * dt, dt, &pulse);
        p.push(expect_p(&psi));
        f.push(expect_f(&psi));
    }
    assert!((psi.norm_sq(dx) - 1.0).abs() < 1e-11);
    let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(scale > 1e-3, "drive too weak to test anything");
    let worst = (1..steps).map(|j| ((p[j + 1] - p[j - 1]) / (2.0 * dt) - f[j]).abs()).fold(0.0, f64::max);
    assert!(worst < 2e-2 * scale, "Ehrenfest residual {worst:e} against force scale {scale:e}");
}

#[test]
fn field_free_table_follows_the_phase_law() {
    let atom = Atom1d::new(SpatialGrid::new(60.0, 1201).unwrap(), SoftCoreParams::default(), None, 4).unwrap();
    let pulse = PulseConfig::new(1e-300, 1.0, 1).unwrap();
    let grid = make_time_grid(&pulse, 0.001, 50).unwrap();
    let t = compute_table(&atom, &pulse, &grid, &[0, 1, 2, 3], 0, TableMode::Full).unwrap();
    let e = atom.energies();
    let mut worst = 0.0f64;
    for k in 0..t.k() {
        for m in 0..4 {
            for n in 0..4 {
                let expect = t.get(m, n, 0) * Complex64::from_polar(1.0, (e[m] - e[n]) * t.times[k]);
                worst = worst.max((t.get(m, n, k) - expect).norm());
            }
        }
    }
    assert!(worst < 1e-6, "phase law violated by {worst:e}");
}

#[test]
fn driven_table_with_absorber_stays_hermitian() {
    let atom = Atom1d::new(SpatialGrid::new(100.0, 2001).unwrap(), SoftCoreParams::default(), Some(AbsorbingMask::default()), 6).unwrap();
    let pulse = PulseConfig::new(0.05, 0.057, 1).unwrap();
    let grid = make_time_grid(&pulse, 0.05, 20).unwrap();
    let t = compute_table(&atom, &pulse, &grid, &(0..6).collect::<Vec<_>>(), 0, TableMode::Full).unwrap();
    assert!(t.hermiticity_residual() < 1e-10);
    assert!(t.absorbed_norm.iter().all(|a| (0.0..1.0).contains(a)));
}
