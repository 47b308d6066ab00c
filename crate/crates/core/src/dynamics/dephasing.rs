use std::collections::BTreeMap;

use num_complex::Complex64;

use super::cce::{CceEngine, ClusterDynamics, GuardDiagnostic};
use super::exact::ExactPropagator;
use super::series::{check_grid, ElementSeries, SeriesKind};
use super::state::{sample_bath_states, BathState, CentralLevels, InitialState};
use crate::cluster::ClusterSet;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecompose, kron, phase_series, CMatrix, CVector};
use crate::par;
use crate::spin_model::{build_full_hamiltonian, SpinSystem};

/// `H^(k) = (⟨k| ⊗ 1) H (|k⟩ ⊗ 1)` for a central level vector `k` given in
/// the `S_z` basis; `h` is ordered central first.
pub fn conditional_hamiltonian(h: &CMatrix, level: &CVector, d_bath: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d_bath, d_bath);
    for (m, cm) in level.iter().enumerate() {
        for (mp, cmp) in level.iter().enumerate() {
            let w = cm.conj() * cmp;
            if w.norm() == 0.0 {
                continue;
            }
            out += h.view((m * d_bath, mp * d_bath), (d_bath, d_bath)) * w;
        }
    }
    out
}

/// `Tr[ρ_B e^{iH_j t} e^{-iH_i t}]` along the grid.
pub fn conditional_overlap(h_i: &CMatrix, h_j: &CMatrix, rho_bath: &CMatrix, times: &[f64]) -> Result<Vec<Complex64>> {
    if h_i.shape() != h_j.shape() || h_i.shape() != rho_bath.shape() {
        return Err(Error::invalid(format!(
            "conditional Hamiltonians {:?}/{:?} and bath density {:?} differ in shape",
            h_i.shape(),
            h_j.shape(),
            rho_bath.shape()
        )));
    }
    let ei = hermitian_eigendecompose(h_i)?;
    let ej = hermitian_eigendecompose(h_j)?;
    let a = ei.eigenvectors.adjoint() * rho_bath * &ej.eigenvectors;
    let b = ej.eigenvectors.adjoint() * &ei.eigenvectors;
    let w = a.component_mul(&b.transpose());
    Ok(phase_series(&ei.eigenvalues, &ej.eigenvalues, &w, times))
}

/// Bath overlap `⟨J|e^{iH^(j)t} e^{-iH^(i)t}|J⟩` for a pure product bath
/// state under the full Hamiltonian projected onto central levels `i`, `j`.
pub fn conditional_dephasing_element(
    system: &SpinSystem,
    bath_state: &[usize],
    i: usize,
    j: usize,
    times: &[f64],
) -> Result<ElementSeries> {
    check_grid(times)?;
    let probe = InitialState::new(super::state::CentralState::Level(0), BathState::Product(bath_state.to_vec()));
    probe.validate(system)?;
    let levels = CentralLevels::of(system)?;
    levels.check_level(i)?;
    levels.check_level(j)?;
    let h = build_full_hamiltonian(system)?;
    let d_bath = h.nrows() / levels.dim();
    let hi = conditional_hamiltonian(&h, &levels.level(i), d_bath);
    let hj = conditional_hamiltonian(&h, &levels.level(j), d_bath);
    let rho = probe.bath_density(system, &system.all_bath());
    let values = conditional_overlap(&hi, &hj, &rho, times)?;
    ElementSeries::new(times.to_vec(), values, SeriesKind::Exact, (i, j))
}

/// Pointwise mean of series on a common grid, summed in input order.
pub fn averaged_coherence(series: &[ElementSeries]) -> Result<ElementSeries> {
    let first = series.first().ok_or_else(|| Error::invalid("no series to average"))?;
    let mut sum = vec![Complex64::from(0.0); first.len()];
    for s in series {
        if !s.same_grid(first) {
            return Err(Error::invalid("series to average are on different time grids"));
        }
        for (acc, v) in sum.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    let n = series.len() as f64;
    Ok(ElementSeries {
        times: first.times.clone(),
        values: sum.into_iter().map(|z| z / n).collect(),
        kind: first.kind,
        element: first.element,
    })
}

/// Monte Carlo average of per-sample cluster expansions.
#[derive(Debug, Clone)]
pub struct SampledCceResult {
    pub per_order: BTreeMap<usize, ElementSeries>,
    /// Exact element averaged over the same sampled bath states.
    pub exact_sampled: Option<ElementSeries>,
    pub samples: Vec<Vec<usize>>,
    /// Guard activations tagged with the sample index.
    pub diagnostics: Vec<(usize, GuardDiagnostic)>,
}

pub struct SamplingPlan<'c> {
    pub clusters: &'c ClusterSet,
    pub orders: &'c [usize],
    pub n_samples: usize,
    pub seed: u64,
    pub dynamics: ClusterDynamics,
    pub with_exact: bool,
}

/// Draws bath states from `init`, runs the expansion for each with the
/// sampled `I_z` levels as the bath state and mean field, and averages.
pub fn sampled_cce(
    system: &SpinSystem,
    init: &InitialState,
    element: (usize, usize),
    times: &[f64],
    plan: &SamplingPlan,
) -> Result<SampledCceResult> {
    if plan.n_samples == 0 {
        return Err(Error::invalid("at least one bath sample is required"));
    }
    let samples = sample_bath_states(system, init, plan.n_samples, plan.seed)?;
    let runs = par::try_map(&samples, |bath| {
        let sample_init = InitialState::new(init.central.clone(), BathState::Product(bath.clone()));
        CceEngine::new(system, &sample_init, element, times)?
            .with_dynamics(plan.dynamics)
            .run(plan.clusters, plan.orders)
    })?;

    let mut per_order = BTreeMap::new();
    for &m in plan.orders {
        let series: Vec<ElementSeries> = runs.iter().map(|r| r.per_order[&m].clone()).collect();
        per_order.insert(m, averaged_coherence(&series)?);
    }
    let diagnostics = runs
        .into_iter()
        .enumerate()
        .flat_map(|(k, r)| r.diagnostics.into_iter().map(move |d| (k, d)))
        .collect();

    let exact_sampled = if plan.with_exact {
        Some(sampled_exact(system, init, element, times, &samples, plan.dynamics)?)
    } else {
        None
    };
    Ok(SampledCceResult {
        per_order,
        exact_sampled,
        samples,
        diagnostics,
    })
}

/// The element is linear in the initial density, so the sample average is
/// one propagation of the empirical bath mixture.
fn sampled_exact(
    system: &SpinSystem,
    init: &InitialState,
    element: (usize, usize),
    times: &[f64],
    samples: &[Vec<usize>],
    dynamics: ClusterDynamics,
) -> Result<ElementSeries> {
    let all = system.all_bath();
    let d_bath: usize = system.dims()[1..].iter().product();
    let mut rho_bath = CMatrix::zeros(d_bath, d_bath);
    let weight = Complex64::from(1.0 / samples.len() as f64);
    for bath in samples {
        let state = InitialState::new(init.central.clone(), BathState::Product(bath.clone()));
        let index = state
            .bath_density(system, &all)
            .diagonal()
            .iter()
            .position(|z| z.re == 1.0)
            .expect("product state has one occupied basis vector");
        rho_bath[(index, index)] += weight;
    }
    exact_with_bath_density(system, init, element, times, &rho_bath, dynamics)
}

/// Exact element for the central state of `init` and an explicit bath
/// density over all bath spins, under either dynamics.
pub fn exact_with_bath_density(
    system: &SpinSystem,
    init: &InitialState,
    (i, j): (usize, usize),
    times: &[f64],
    rho_bath: &CMatrix,
    dynamics: ClusterDynamics,
) -> Result<ElementSeries> {
    let d_bath: usize = system.dims()[1..].iter().product();
    if rho_bath.shape() != (d_bath, d_bath) {
        return Err(Error::invalid(format!(
            "bath density is {:?}, bath dimension is {d_bath}",
            rho_bath.shape()
        )));
    }
    let rho_bath = rho_bath.clone();
    match dynamics {
        ClusterDynamics::Generalized => {
            let prop = ExactPropagator::new(system)?;
            let rho0 = kron(&init.central_density(prop.levels()), &rho_bath);
            prop.element_from_density(&rho0, i, j, times)
        }
        ClusterDynamics::Conditional => {
            let levels = CentralLevels::of(system)?;
            let h = build_full_hamiltonian(system)?;
            let hi = conditional_hamiltonian(&h, &levels.level(i), d_bath);
            let hj = conditional_hamiltonian(&h, &levels.level(j), d_bath);
            let amps = init.central_amplitudes(levels.dim());
            let w = amps[i] * amps[j].conj();
            let values = conditional_overlap(&hi, &hj, &rho_bath, times)?
                .into_iter()
                .map(|z| z * w)
                .collect();
            ElementSeries::new(times.to_vec(), values, SeriesKind::Exact, (i, j))
        }
    }
}
