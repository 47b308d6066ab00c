use nalgebra::Matrix3;

use super::SpinSite;
use crate::error::{Error, Result};

/// `(μ0/4π)·ħ` in rad/ms · Å³ / (rad/(ms·mT))².
pub const HBAR_MU0_OVER_4PI: f64 = 1.054_571_817e-2;

/// Point-dipole coupling tensor between two sites in rad/ms.
///
/// `T = (μ0/4π)ħ · γ_aᵀ (1 - 3 n nᵀ) γ_b / r³`, which for isotropic
/// gyromagnetic ratios is symmetric and traceless.
pub fn dipolar_tensor(site_a: &SpinSite, site_b: &SpinSite) -> Result<Matrix3<f64>> {
    let d = site_b.position - site_a.position;
    let r = d.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "sites `{}` and `{}` coincide",
            site_a.label, site_b.label
        )));
    }
    let n = d / r;
    let geometric = Matrix3::identity() - n * n.transpose() * 3.0;
    Ok(site_a.gamma.transpose() * geometric * site_b.gamma * (HBAR_MU0_OVER_4PI / (r * r * r)))
}
