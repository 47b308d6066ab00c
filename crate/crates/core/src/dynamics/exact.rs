use num_complex::Complex64;

use super::series::{check_grid, ElementSeries, SeriesKind};
use super::state::{BathState, CentralLevels, InitialState};
use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::linalg::{expectation_series, hermitian_eigendecompose, phase_series, CMatrix, CVector, HermitianEig};
use crate::spin_model::{build_full_hamiltonian_capped, SpinSystem, DEFAULT_MAX_DIM};

/// One Hamiltonian's spectrum plus the central-element observable
/// `B = V† (|j⟩⟨i| ⊗ 1) V` in its eigenbasis.
pub(crate) struct ElementKernel<'e> {
    eig: &'e HermitianEig,
    observable: CMatrix,
}

/// `(⟨k| ⊗ 1) V` for central level vector `c`: a `d_bath × n` block.
fn project_rows(v: &CMatrix, c: &CVector, d_bath: usize) -> CMatrix {
    let n = v.ncols();
    let mut y = CMatrix::zeros(d_bath, n);
    for (m, cm) in c.iter().enumerate() {
        if cm.norm() == 0.0 {
            continue;
        }
        y += v.rows(m * d_bath, d_bath) * cm.conj();
    }
    y
}

impl<'e> ElementKernel<'e> {
    pub(crate) fn new(eig: &'e HermitianEig, levels: &CentralLevels, d_bath: usize, i: usize, j: usize) -> Self {
        let yi = project_rows(&eig.eigenvectors, &levels.level(i), d_bath);
        let yj = if i == j {
            yi.clone()
        } else {
            project_rows(&eig.eigenvectors, &levels.level(j), d_bath)
        };
        ElementKernel {
            eig,
            observable: yj.adjoint() * yi,
        }
    }

    /// `Tr[ρ(t) O]` for a mixed initial density.
    pub(crate) fn of_density(&self, rho0: &CMatrix, times: &[f64]) -> Vec<Complex64> {
        let a = self.eig.to_eigenbasis(rho0);
        let w = a.component_mul(&self.observable.transpose());
        phase_series(&self.eig.eigenvalues, &self.eig.eigenvalues, &w, times)
    }

    /// `ρ_S ⊗ 1/d_bath` with a pure central state: `A = Y_ψ† Y_ψ / d_bath`.
    pub(crate) fn of_mixed_bath(&self, central: &CVector, d_bath: usize, times: &[f64]) -> Vec<Complex64> {
        let y = project_rows(&self.eig.eigenvectors, central, d_bath);
        let a = (y.adjoint() * y) / Complex64::from(d_bath as f64);
        let w = a.component_mul(&self.observable.transpose());
        phase_series(&self.eig.eigenvalues, &self.eig.eigenvalues, &w, times)
    }

    /// Same for a pure initial state, avoiding the `n³` basis change.
    pub(crate) fn of_pure(&self, psi: &CVector, times: &[f64]) -> Vec<Complex64> {
        let a = self.eig.eigenvectors.adjoint() * psi;
        let n = a.len();
        let w = CMatrix::from_fn(n, n, |k, l| a[k] * a[l].conj() * self.observable[(l, k)]);
        phase_series(&self.eig.eigenvalues, &self.eig.eigenvalues, &w, times)
    }
}

/// Picks the cheapest route to the element series for `init` on the
/// central-plus-`cluster` space.
pub(crate) fn element_values(
    kernel: &ElementKernel,
    system: &SpinSystem,
    levels: &CentralLevels,
    init: &InitialState,
    cluster: &Cluster,
    d_bath: usize,
    times: &[f64],
) -> Vec<Complex64> {
    if let Some(psi) = init.pure_vector(system, levels, cluster) {
        return kernel.of_pure(&psi, times);
    }
    if init.bath == BathState::MaximallyMixed {
        return kernel.of_mixed_bath(&init.central_vector(levels), d_bath, times);
    }
    kernel.of_density(&init.cluster_density(system, levels, cluster), times)
}

/// Full-space reference dynamics with the Hamiltonian diagonalized once.
pub struct ExactPropagator<'a> {
    system: &'a SpinSystem,
    hamiltonian: CMatrix,
    eig: HermitianEig,
    levels: CentralLevels,
}

impl<'a> ExactPropagator<'a> {
    pub fn new(system: &'a SpinSystem) -> Result<Self> {
        Self::with_capacity(system, DEFAULT_MAX_DIM)
    }

    pub fn with_capacity(system: &'a SpinSystem, max_dim: usize) -> Result<Self> {
        let hamiltonian = build_full_hamiltonian_capped(system, max_dim)?;
        let eig = hermitian_eigendecompose(&hamiltonian)?;
        Ok(ExactPropagator {
            system,
            hamiltonian,
            eig,
            levels: CentralLevels::of(system)?,
        })
    }

    pub fn levels(&self) -> &CentralLevels {
        &self.levels
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// Spectral norm `‖H‖`.
    pub fn hamiltonian_norm(&self) -> f64 {
        self.eig.spectral_norm()
    }

    fn d_bath(&self) -> usize {
        self.hamiltonian.nrows() / self.levels.dim()
    }

    fn check(&self, init: &InitialState, i: usize, j: usize, times: &[f64]) -> Result<()> {
        init.validate(self.system)?;
        self.levels.check_level(i)?;
        self.levels.check_level(j)?;
        check_grid(times)
    }

    pub fn element(&self, init: &InitialState, i: usize, j: usize, times: &[f64]) -> Result<ElementSeries> {
        self.check(init, i, j, times)?;
        let kernel = ElementKernel::new(&self.eig, &self.levels, self.d_bath(), i, j);
        let values = element_values(
            &kernel,
            self.system,
            &self.levels,
            init,
            &self.system.all_bath(),
            self.d_bath(),
            times,
        );
        ElementSeries::new(times.to_vec(), values, SeriesKind::Exact, (i, j))
    }

    /// Element for an arbitrary full-space initial density (central first).
    pub fn element_from_density(&self, rho0: &CMatrix, i: usize, j: usize, times: &[f64]) -> Result<ElementSeries> {
        self.levels.check_level(i)?;
        self.levels.check_level(j)?;
        check_grid(times)?;
        if rho0.shape() != self.hamiltonian.shape() {
            return Err(Error::invalid(format!(
                "initial density is {:?}, Hamiltonian is {:?}",
                rho0.shape(),
                self.hamiltonian.shape()
            )));
        }
        let kernel = ElementKernel::new(&self.eig, &self.levels, self.d_bath(), i, j);
        ElementSeries::new(times.to_vec(), kernel.of_density(rho0, times), SeriesKind::Exact, (i, j))
    }

    /// `Tr[ρ(t) H]` along the grid.
    pub fn energy_series(&self, init: &InitialState, times: &[f64]) -> Result<Vec<f64>> {
        self.check(init, 0, 0, times)?;
        let rho0 = init.cluster_density(self.system, &self.levels, &self.system.all_bath());
        Ok(expectation_series(&self.eig, &rho0, &self.hamiltonian, times)
            .into_iter()
            .map(|z| z.re)
            .collect())
    }
}

impl ExactPropagator<'_> {
    /// Largest `|Tr[ρ(t)H] − Tr[ρ(0)H]|` over the grid, relative to `‖H‖`.
    pub fn energy_residual(&self, init: &InitialState, times: &[f64]) -> Result<f64> {
        let e = self.energy_series(init, times)?;
        let norm = self.hamiltonian_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok(e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max) / norm)
    }
}

/// Central-energy discrepancy implied by an approximate population at the
/// final grid time, relative to `h_norm`.
///
/// The population error `|ρ̃_ii(T) − ρ_ii(T)|` is weighted by the largest
/// gap between level `i` and any other central level.
pub fn implied_energy_drift(
    levels: &CentralLevels,
    approx: &ElementSeries,
    exact: &ElementSeries,
    h_norm: f64,
) -> Result<f64> {
    let (i, j) = approx.element;
    if i != j || exact.element != approx.element {
        return Err(Error::invalid("implied energy drift needs one diagonal element in both series"));
    }
    if !approx.same_grid(exact) {
        return Err(Error::invalid("series are on different time grids"));
    }
    if !(h_norm > 0.0) {
        return Err(Error::invalid(format!("Hamiltonian norm must be positive, got {h_norm}")));
    }
    let e = levels.energies();
    let gap = e.iter().map(|x| (x - e[i]).abs()).fold(0.0, f64::max);
    let err = (approx.last() - exact.last()).norm();
    Ok(gap * err / h_norm)
}

/// Element `(i, j)` of the central spin under the full Hamiltonian.
pub fn exact_element(
    system: &SpinSystem,
    init: &InitialState,
    i: usize,
    j: usize,
    times: &[f64],
) -> Result<ElementSeries> {
    ExactPropagator::new(system)?.element(init, i, j, times)
}
