use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// A spin quantum number, stored as `2s` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);

    pub fn from_twice(two_s: u32) -> Self {
        Spin(two_s)
    }

    pub fn new(s: f64) -> Result<Self> {
        let two_s = 2.0 * s;
        if !s.is_finite() || s < 0.0 || (two_s - two_s.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "spin quantum number {s} is not a nonnegative half-integer"
            )));
        }
        Ok(Spin(two_s.round() as u32))
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    /// Hilbert-space dimension `2s + 1`.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// `m` of basis state `k`; the basis runs `s, s-1, …, -s`.
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }
}

/// Cartesian spin matrices in the `|s, m⟩` basis with `m` descending.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

impl SpinOperators {
    pub fn for_spin(spin: Spin) -> Self {
        let n = spin.dim();
        let s = spin.value();
        let mut plus = CMatrix::zeros(n, n);
        // S+ |m⟩ = sqrt(s(s+1) - m(m+1)) |m+1⟩, and |m+1⟩ sits one index earlier
        for k in 1..n {
            let m = spin.m(k);
            plus[(k - 1, k)] = Complex64::from((s * (s + 1.0) - m * (m + 1.0)).sqrt());
        }
        let minus = plus.adjoint();
        let half = Complex64::new(0.5, 0.0);
        let x = (&plus + &minus) * half;
        let y = (&plus - &minus) * Complex64::new(0.0, -0.5);
        let z = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            (0..n).map(|k| Complex64::from(spin.m(k))),
        ));
        SpinOperators { x, y, z }
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn component(&self, axis: usize) -> &CMatrix {
        match axis {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }

    /// `Σ_a v_a S_a`.
    pub fn linear(&self, v: &nalgebra::Vector3<f64>) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for a in 0..3 {
            if v[a] != 0.0 {
                out += self.component(a) * Complex64::from(v[a]);
            }
        }
        out
    }

    /// `Σ_ab T_ab S_a S_b` on a single site.
    pub fn quadratic(&self, t: &Matrix3<f64>) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for a in 0..3 {
            for b in 0..3 {
                if t[(a, b)] != 0.0 {
                    out += self.component(a) * self.component(b) * Complex64::from(t[(a, b)]);
                }
            }
        }
        out
    }

    /// `Σ_ab T_ab S_a ⊗ I_b` on the product space `self ⊗ other`.
    pub fn bilinear(&self, t: &Matrix3<f64>, other: &SpinOperators) -> CMatrix {
        let n = self.dim() * other.dim();
        let mut out = CMatrix::zeros(n, n);
        for a in 0..3 {
            for b in 0..3 {
                if t[(a, b)] != 0.0 {
                    out += self.component(a).kronecker(other.component(b))
                        * Complex64::from(t[(a, b)]);
                }
            }
        }
        out
    }
}

/// Sx, Sy, Sz for spin quantum number `s`.
pub fn spin_operators(s: f64) -> Result<SpinOperators> {
    Ok(SpinOperators::for_spin(Spin::new(s)?))
}
