#![allow(dead_code)]

use gcce_lab::dynamics::{BathState, CentralState, InitialState};
use gcce_lab::spin_model::{SpinSite, SpinSystem, GAMMA_ELECTRON};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;

/// Gyromagnetic ratios in rad/(ms·mT): electron, ¹H, ¹³C, ¹⁵N.
pub const SPIN_HALF_GAMMAS: [f64; 4] = [GAMMA_ELECTRON, 267.522_187_44, 67.282_84, -27.116];

pub fn electron(p: [f64; 3]) -> SpinSite {
    SpinSite::new("e", Vector3::from(p), 0.5, GAMMA_ELECTRON).unwrap()
}

fn shell_position(rng: &mut impl Rng, r_min: f64, r_max: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n * rng.gen_range(r_min..r_max);
        }
    }
}

/// Central electron with `n` spin-1/2 bath spins of random species placed
/// 5–15 Å away, in a random field of up to 10 mT; all couplings dipolar.
pub fn random_dipolar_system(rng: &mut impl Rng, n: usize) -> SpinSystem {
    let bath: Vec<SpinSite> = (0..n)
        .map(|k| {
            let gamma = SPIN_HALF_GAMMAS[rng.gen_range(0..SPIN_HALF_GAMMAS.len())];
            SpinSite::new(format!("b{k}"), shell_position(rng, 5.0, 15.0), 0.5, gamma).unwrap()
        })
        .collect();
    let field = shell_position(rng, 0.0, 10.0);
    SpinSystem::from_geometry(electron([0.0; 3]), bath, field).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, scale: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|_, _| rng.gen_range(-scale..scale))
}

/// Spin-1/2 central spin in zero field with O(1) random hyperfine and bath
/// couplings, so every energy scale is of order 1 rad/ms.
pub fn random_unit_scale_system(rng: &mut impl Rng, n: usize) -> SpinSystem {
    let bath: Vec<SpinSite> = (0..n)
        .map(|k| SpinSite::new(format!("b{k}"), Vector3::new(50.0 * (k + 1) as f64, 7.0, -3.0), 0.5, 1.0).unwrap())
        .collect();
    let mut s = SpinSystem::from_geometry(electron([0.0; 3]), bath, Vector3::zeros()).unwrap();
    for i in 0..n {
        s.set_hyperfine(i, random_matrix(rng, 1.0)).unwrap();
        for j in i + 1..n {
            let m = random_matrix(rng, 0.5);
            s.set_coupling(i, j, (m + m.transpose()) * 0.5).unwrap();
        }
    }
    s
}

/// Central spin 1 with a random zero-field tensor and a mixture of bath spins
/// 1/2, 1 and 3/2, in a random field of up to 10 mT.
pub fn random_mixed_spin_system(rng: &mut impl Rng, n: usize) -> SpinSystem {
    let sym = |rng: &mut dyn rand::RngCore, scale: f64| {
        let m = Matrix3::from_fn(|_, _| rng.gen_range(-scale..scale));
        (m + m.transpose()) * 0.5
    };
    let central =
        SpinSite::with_tensors("c", Vector3::zeros(), 1.0, Matrix3::identity() * GAMMA_ELECTRON, sym(rng, 1e4)).unwrap();
    let bath = (0..n)
        .map(|k| {
            let s = [0.5, 1.0, 1.5][rng.gen_range(0..3)];
            let q = if s > 0.5 { sym(rng, 10.0) } else { Matrix3::zeros() };
            let gamma = SPIN_HALF_GAMMAS[rng.gen_range(0..SPIN_HALF_GAMMAS.len())];
            SpinSite::with_tensors(format!("b{k}"), shell_position(rng, 4.0, 12.0), s, Matrix3::identity() * gamma, q)
                .unwrap()
        })
        .collect();
    SpinSystem::from_geometry(central, bath, shell_position(rng, 0.0, 10.0)).unwrap()
}

pub fn random_amplitudes(rng: &mut impl Rng, d: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn random_initial_state(rng: &mut impl Rng, system: &SpinSystem) -> InitialState {
    let d = system.central().dim();
    let central = if rng.gen_bool(0.5) {
        CentralState::Level(rng.gen_range(0..d))
    } else {
        CentralState::Amplitudes(random_amplitudes(rng, d))
    };
    let bath = match rng.gen_range(0..3) {
        0 => BathState::MaximallyMixed,
        1 => BathState::Thermal {
            temperature_k: 10f64.powf(rng.gen_range(-2.0..1.0)),
        },
        _ => BathState::Product(system.bath().iter().map(|b| rng.gen_range(0..b.dim())).collect()),
    };
    InitialState::new(central, bath)
}
