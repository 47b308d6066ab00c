//! Seeded random bath geometries for free-electron scenarios.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::shorttime::flip_flop_element;
use crate::spin_model::{dipolar_tensor, SpinSite, GAMMA_ELECTRON};

/// `n` points uniform in the unit cube centred on the origin.
pub fn unit_cube_positions(seed: u64, n: usize) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

/// Median over spins of the flip-flop element between each free electron
/// and its nearest neighbour, in rad/ms.
pub fn median_nn_flip_flop(positions: &[Vector3<f64>]) -> Result<f64> {
    if positions.len() < 2 {
        return Err(Error::DegenerateGeometry("need at least two positions".into()));
    }
    let site = |p: &Vector3<f64>| SpinSite::new("e", *p, 0.5, GAMMA_ELECTRON);
    let mut values = Vec::with_capacity(positions.len());
    for (i, p) in positions.iter().enumerate() {
        let k = (0..positions.len())
            .filter(|&k| k != i)
            .min_by(|&a, &b| (positions[a] - p).norm().total_cmp(&(positions[b] - p).norm()))
            .expect("two or more positions");
        values.push(flip_flop_element(&dipolar_tensor(&site(p)?, &site(&positions[k])?)?));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Unit-cube positions scaled so that the median nearest-neighbour
/// flip-flop element equals `target` rad/ms. Returns the positions and the
/// cube edge in Å.
pub fn scaled_cube_positions(seed: u64, n: usize, target: f64) -> Result<(Vec<Vector3<f64>>, f64)> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::invalid(format!("target coupling must be positive, got {target}")));
    }
    let unit = unit_cube_positions(seed, n);
    // couplings fall off as r⁻³
    let edge = (median_nn_flip_flop(&unit)? / target).cbrt();
    Ok((unit.into_iter().map(|p| p * edge).collect(), edge))
}
