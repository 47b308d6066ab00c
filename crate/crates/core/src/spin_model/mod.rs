//! Spin sites, the central-spin/bath system and its Hamiltonians.
//!
//! Units: time in ms, angular frequencies in rad/ms, fields in mT, distances
//! in Å and gyromagnetic ratios in rad/(ms·mT).

mod dipolar;
mod hamiltonian;
mod operators;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::cluster::Cluster;
use crate::error::{Error, Result};

pub use dipolar::{dipolar_tensor, HBAR_MU0_OVER_4PI};
pub use hamiltonian::{
    build_cluster_hamiltonian, build_full_hamiltonian, build_full_hamiltonian_capped,
    central_static_operator, DEFAULT_MAX_DIM,
};
pub use operators::{spin_operators, Spin, SpinOperators};

pub(crate) use hamiltonian::bath_static_operator;

/// Free-electron gyromagnetic ratio in rad/(ms·mT).
pub const GAMMA_ELECTRON: f64 = -1.760_859_630_23e5;

/// A spin with its position, spin quantum number, Zeeman tensor and
/// zero-field-splitting (central) or quadrupole (bath) tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSite {
    pub label: String,
    pub position: Vector3<f64>,
    pub spin: Spin,
    pub gamma: Matrix3<f64>,
    pub self_tensor: Matrix3<f64>,
}

impl SpinSite {
    /// Site with an isotropic gyromagnetic ratio and no self tensor.
    pub fn new(label: impl Into<String>, position: Vector3<f64>, s: f64, gamma: f64) -> Result<Self> {
        Self::with_tensors(
            label,
            position,
            s,
            Matrix3::identity() * gamma,
            Matrix3::zeros(),
        )
    }

    pub fn with_tensors(
        label: impl Into<String>,
        position: Vector3<f64>,
        s: f64,
        gamma: Matrix3<f64>,
        self_tensor: Matrix3<f64>,
    ) -> Result<Self> {
        let label = label.into();
        let spin = Spin::new(s)?;
        let scale = self_tensor.amax();
        if (self_tensor - self_tensor.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid(format!(
                "self tensor of site `{label}` is not symmetric"
            )));
        }
        if spin.twice() <= 1 && scale != 0.0 {
            return Err(Error::invalid(format!(
                "site `{label}` has s = {} and cannot carry a zero-field or quadrupole tensor",
                spin.value()
            )));
        }
        if !position.iter().all(|x| x.is_finite()) || !gamma.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(format!("site `{label}` has non-finite entries")));
        }
        Ok(SpinSite {
            label,
            position,
            spin,
            gamma,
            self_tensor,
        })
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// Scalar gyromagnetic ratio if the tensor is isotropic.
    pub fn isotropic_gamma(&self) -> Option<f64> {
        let g = self.gamma[(0, 0)];
        let iso = Matrix3::identity() * g;
        ((self.gamma - iso).amax() <= 1e-12 * g.abs()).then_some(g)
    }
}

/// Central spin, bath, external field and all coupling tensors.
///
/// Bath-bath tensors are stored for `i < j` only; [`SpinSystem::coupling`]
/// returns the tensor oriented for any ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    central: SpinSite,
    bath: Vec<SpinSite>,
    field: Vector3<f64>,
    hyperfine: Vec<Matrix3<f64>>,
    couplings: Vec<Matrix3<f64>>,
}

fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl SpinSystem {
    /// Builds the system with point-dipole hyperfine and bath couplings
    /// derived from site positions.
    pub fn from_geometry(central: SpinSite, bath: Vec<SpinSite>, field: Vector3<f64>) -> Result<Self> {
        let hyperfine = bath
            .iter()
            .map(|b| dipolar_tensor(&central, b))
            .collect::<Result<Vec<_>>>()?;
        let n = bath.len();
        let mut couplings = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                couplings.push(dipolar_tensor(&bath[i], &bath[j])?);
            }
        }
        Self::new(central, bath, field, hyperfine, couplings)
    }

    /// Builds the system from explicit tensors. `couplings` lists `J_ij` for
    /// `i < j` in row-major order: (0,1), (0,2), …, (1,2), ….
    pub fn new(
        central: SpinSite,
        bath: Vec<SpinSite>,
        field: Vector3<f64>,
        hyperfine: Vec<Matrix3<f64>>,
        couplings: Vec<Matrix3<f64>>,
    ) -> Result<Self> {
        let n = bath.len();
        if hyperfine.len() != n {
            return Err(Error::invalid(format!(
                "{} hyperfine tensors for {n} bath spins",
                hyperfine.len()
            )));
        }
        if couplings.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::invalid(format!(
                "{} bath coupling tensors for {n} bath spins (expected {})",
                couplings.len(),
                n * n.saturating_sub(1) / 2
            )));
        }
        Ok(SpinSystem {
            central,
            bath,
            field,
            hyperfine,
            couplings,
        })
    }

    pub fn central(&self) -> &SpinSite {
        &self.central
    }

    pub fn bath(&self) -> &[SpinSite] {
        &self.bath
    }

    pub fn n_bath(&self) -> usize {
        self.bath.len()
    }

    pub fn field(&self) -> &Vector3<f64> {
        &self.field
    }

    pub fn hyperfine(&self, i: usize) -> &Matrix3<f64> {
        &self.hyperfine[i]
    }

    /// `J` such that the pair term reads `I_i · J · I_j`.
    pub fn coupling(&self, i: usize, j: usize) -> Matrix3<f64> {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.couplings[pair_slot(self.bath.len(), i, j)],
            std::cmp::Ordering::Greater => {
                self.couplings[pair_slot(self.bath.len(), j, i)].transpose()
            }
            std::cmp::Ordering::Equal => Matrix3::zeros(),
        }
    }

    pub fn set_hyperfine(&mut self, i: usize, tensor: Matrix3<f64>) -> Result<()> {
        let slot = self
            .hyperfine
            .get_mut(i)
            .ok_or_else(|| Error::invalid(format!("no bath spin {i}")))?;
        *slot = tensor;
        Ok(())
    }

    /// Overrides `J_ij`; the tensor is read as `I_i · J · I_j`.
    pub fn set_coupling(&mut self, i: usize, j: usize, tensor: Matrix3<f64>) -> Result<()> {
        let n = self.bath.len();
        if i == j || i >= n || j >= n {
            return Err(Error::invalid(format!("invalid bath pair ({i}, {j})")));
        }
        let (a, b, t) = if i < j {
            (i, j, tensor)
        } else {
            (j, i, tensor.transpose())
        };
        self.couplings[pair_slot(n, a, b)] = t;
        Ok(())
    }

    /// Subsystem dimensions, central spin first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.central.dim())
            .chain(self.bath.iter().map(SpinSite::dim))
            .collect()
    }

    /// Dimensions of the central spin plus the given bath members.
    pub fn cluster_dims(&self, cluster: &Cluster) -> Vec<usize> {
        std::iter::once(self.central.dim())
            .chain(cluster.members().iter().map(|&i| self.bath[i].dim()))
            .collect()
    }

    /// `(2S+1) ∏ (2I_i+1)`, or `None` on overflow.
    pub fn full_dim(&self) -> Option<usize> {
        self.dims().iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }

    pub fn all_bath(&self) -> Cluster {
        Cluster::full(self.bath.len())
    }
}

/// Static expectation values `⟨I_a⟩` of bath spins outside a cluster.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeanField {
    expectations: BTreeMap<usize, Vector3<f64>>,
}

impl MeanField {
    pub fn new(expectations: BTreeMap<usize, Vector3<f64>>) -> Self {
        MeanField { expectations }
    }

    /// Zero expectations for every bath spin not in `cluster`.
    pub fn zero_outside(n_bath: usize, cluster: &Cluster) -> Self {
        Self::outside(cluster, &vec![Vector3::zeros(); n_bath])
    }

    /// Picks the entries of `all` (indexed by bath spin) that lie outside `cluster`.
    pub fn outside(cluster: &Cluster, all: &[Vector3<f64>]) -> Self {
        MeanField {
            expectations: (0..all.len())
                .filter(|i| !cluster.contains(*i))
                .map(|i| (i, all[i]))
                .collect(),
        }
    }

    pub fn expectations(&self) -> &BTreeMap<usize, Vector3<f64>> {
        &self.expectations
    }

    pub fn get(&self, i: usize) -> Option<&Vector3<f64>> {
        self.expectations.get(&i)
    }

    pub fn is_zero(&self) -> bool {
        self.expectations.values().all(|v| v.iter().all(|x| *x == 0.0))
    }

    /// Checks `|⟨I_a⟩| ≤ I_a` for every entry.
    pub fn validate(&self, system: &SpinSystem) -> Result<()> {
        for (&a, v) in &self.expectations {
            let site = system
                .bath()
                .get(a)
                .ok_or_else(|| Error::invalid(format!("mean field names unknown bath spin {a}")))?;
            if v.norm() > site.spin.value() * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "mean field |<I_{a}>| = {} exceeds I = {}",
                    v.norm(),
                    site.spin.value()
                )));
            }
        }
        Ok(())
    }
}
