use std::collections::BTreeMap;

use nalgebra::Vector3;
use num_complex::Complex64;

use super::dephasing::{conditional_hamiltonian, conditional_overlap};
use super::exact::{element_values, ElementKernel};
use super::series::{check_grid, ElementSeries, SeriesKind};
use super::state::{CentralLevels, InitialState};
use crate::cluster::{proper_subclusters, Cluster, ClusterSet};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigendecompose;
use crate::par;
use crate::spin_model::{build_cluster_hamiltonian, MeanField, SpinSystem};

/// Denominator magnitude below which an irreducible factor is held.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// How a single cluster is evolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterDynamics {
    /// Central spin and cluster evolve together under the cluster Hamiltonian.
    #[default]
    Generalized,
    /// The bath evolves under the Hamiltonians conditioned on the two central
    /// levels; the element is `c_i c_j* Tr[ρ_C e^{iH^(j)t} e^{-iH^(i)t}]`.
    Conditional,
}

/// A held irreducible factor: grid time, cluster and `|denominator|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardDiagnostic {
    pub time: f64,
    pub cluster: Cluster,
    pub denominator: f64,
}

#[derive(Debug, Clone)]
pub struct CceResult {
    pub per_order: BTreeMap<usize, ElementSeries>,
    pub per_cluster: BTreeMap<Cluster, ElementSeries>,
    pub irreducible: BTreeMap<Cluster, ElementSeries>,
    pub diagnostics: Vec<GuardDiagnostic>,
}

#[derive(Debug, Clone)]
pub struct RestrictedResult {
    pub product: ElementSeries,
    pub per_cluster: BTreeMap<Cluster, ElementSeries>,
    pub irreducible: BTreeMap<Cluster, ElementSeries>,
    pub diagnostics: Vec<GuardDiagnostic>,
}

fn cluster_series(
    system: &SpinSystem,
    levels: &CentralLevels,
    init: &InitialState,
    cluster: &Cluster,
    mean_field: &MeanField,
    (i, j): (usize, usize),
    times: &[f64],
    dynamics: ClusterDynamics,
) -> Result<ElementSeries> {
    let h = build_cluster_hamiltonian(system, cluster, mean_field)?;
    let d_bath = h.nrows() / levels.dim();
    let values = match dynamics {
        ClusterDynamics::Generalized => {
            let eig = hermitian_eigendecompose(&h)?;
            let kernel = ElementKernel::new(&eig, levels, d_bath, i, j);
            element_values(&kernel, system, levels, init, cluster, d_bath, times)
        }
        ClusterDynamics::Conditional => {
            let hi = conditional_hamiltonian(&h, &levels.level(i), d_bath);
            let hj = conditional_hamiltonian(&h, &levels.level(j), d_bath);
            let amps = init.central_amplitudes(levels.dim());
            let weight = amps[i] * amps[j].conj();
            conditional_overlap(&hi, &hj, &init.bath_density(system, cluster), times)?
                .into_iter()
                .map(|z| z * weight)
                .collect()
        }
    };
    ElementSeries::new(times.to_vec(), values, SeriesKind::Cluster, (i, j))
}

/// Element `(i, j)` of the central spin evolved together with `cluster`
/// under the cluster Hamiltonian with the given mean field.
pub fn cluster_element(
    system: &SpinSystem,
    cluster: &Cluster,
    init: &InitialState,
    mean_field: &MeanField,
    i: usize,
    j: usize,
    times: &[f64],
) -> Result<ElementSeries> {
    init.validate(system)?;
    check_grid(times)?;
    let levels = CentralLevels::of(system)?;
    levels.check_level(i)?;
    levels.check_level(j)?;
    cluster_series(system, &levels, init, cluster, mean_field, (i, j), times, ClusterDynamics::Generalized)
}

/// Divides `numerator` by the pointwise product of `denominators`, taken in
/// the given order. Where the product falls below [`DENOMINATOR_FLOOR`] the
/// previous quotient is kept (1 at the first grid time).
fn guarded_quotient<'s>(
    cluster: &Cluster,
    numerator: &ElementSeries,
    denominators: impl Iterator<Item = &'s ElementSeries> + Clone,
) -> (ElementSeries, Vec<GuardDiagnostic>) {
    let mut values = Vec::with_capacity(numerator.len());
    let mut diagnostics = Vec::new();
    for (t, (&time, &num)) in numerator.times.iter().zip(&numerator.values).enumerate() {
        let den = denominators
            .clone()
            .fold(Complex64::from(1.0), |acc, s| acc * s.values[t]);
        if den.norm() < DENOMINATOR_FLOOR {
            diagnostics.push(GuardDiagnostic {
                time,
                cluster: cluster.clone(),
                denominator: den.norm(),
            });
            values.push(values.last().copied().unwrap_or(Complex64::from(1.0)));
        } else {
            values.push(num / den);
        }
    }
    let series = ElementSeries {
        times: numerator.times.clone(),
        values,
        kind: SeriesKind::Irreducible,
        element: numerator.element,
    };
    (series, diagnostics)
}

/// `ρ̃_C = ρ_C / ∏_{C'⊂C} ρ̃_{C'}`, with the proper subclusters taken from
/// `cache` in lattice order.
pub fn irreducible_factor(
    cluster: &Cluster,
    elements: &BTreeMap<Cluster, ElementSeries>,
    cache: &BTreeMap<Cluster, ElementSeries>,
) -> Result<(ElementSeries, Vec<GuardDiagnostic>)> {
    let numerator = elements
        .get(cluster)
        .ok_or_else(|| Error::IncompleteLattice(format!("no cluster element for {cluster}")))?;
    let subs = proper_subclusters(cluster)
        .into_iter()
        .map(|c| {
            cache
                .get(&c)
                .ok_or_else(|| Error::IncompleteLattice(format!("no irreducible factor for {c} below {cluster}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = subs.iter().find(|s| !s.same_grid(numerator)) {
        return Err(Error::invalid(format!(
            "irreducible factor on a different grid ({} points vs {})",
            bad.len(),
            numerator.len()
        )));
    }
    Ok(guarded_quotient(cluster, numerator, subs.into_iter()))
}

/// Sweeps `clusters` (already in lattice order) bottom-up, computing each
/// irreducible factor from the whitelisted proper subclusters only.
fn irreducible_sweep(
    clusters: &[Cluster],
    elements: &BTreeMap<Cluster, ElementSeries>,
) -> (BTreeMap<Cluster, ElementSeries>, Vec<GuardDiagnostic>) {
    let mut irreducible: BTreeMap<Cluster, ElementSeries> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let max_order = clusters.iter().map(Cluster::order).max().unwrap_or(0);
    for order in 0..=max_order {
        let level: Vec<&Cluster> = clusters.iter().filter(|c| c.order() == order).collect();
        let done = &irreducible;
        let computed = par::map(&level, |c| {
            let subs: Vec<&ElementSeries> = proper_subclusters(c).iter().filter_map(|s| done.get(s)).collect();
            guarded_quotient(c, &elements[*c], subs.into_iter())
        });
        for (c, (series, diag)) in level.into_iter().zip(computed) {
            irreducible.insert(c.clone(), series);
            diagnostics.extend(diag);
        }
    }
    (irreducible, diagnostics)
}

/// `∏_{|C|≤M} ρ̃_C` in lattice order.
pub fn cce_product(
    clusters: &ClusterSet,
    irreducible: &BTreeMap<Cluster, ElementSeries>,
    m: usize,
) -> Result<ElementSeries> {
    let factors = clusters
        .clusters()
        .iter()
        .filter(|c| c.order() <= m)
        .map(|c| {
            irreducible
                .get(c)
                .ok_or_else(|| Error::IncompleteLattice(format!("no irreducible factor for {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    product_of(&factors)
}

fn product_of(factors: &[&ElementSeries]) -> Result<ElementSeries> {
    let first = factors
        .first()
        .ok_or_else(|| Error::invalid("product over an empty cluster family"))?;
    let mut values = vec![Complex64::from(1.0); first.len()];
    for f in factors {
        if !f.same_grid(first) {
            return Err(Error::invalid("irreducible factors are on different grids"));
        }
        for (v, x) in values.iter_mut().zip(&f.values) {
            *v *= x;
        }
    }
    Ok(ElementSeries {
        times: first.times.clone(),
        values,
        kind: SeriesKind::Product,
        element: first.element,
    })
}

/// Runs cluster expansions of one central element for one initial state.
pub struct CceEngine<'a> {
    system: &'a SpinSystem,
    init: &'a InitialState,
    levels: CentralLevels,
    element: (usize, usize),
    times: Vec<f64>,
    dynamics: ClusterDynamics,
    expectations: Vec<Vector3<f64>>,
}

impl<'a> CceEngine<'a> {
    pub fn new(system: &'a SpinSystem, init: &'a InitialState, element: (usize, usize), times: &[f64]) -> Result<Self> {
        init.validate(system)?;
        check_grid(times)?;
        let levels = CentralLevels::of(system)?;
        levels.check_level(element.0)?;
        levels.check_level(element.1)?;
        Ok(CceEngine {
            system,
            init,
            levels,
            element,
            times: times.to_vec(),
            dynamics: ClusterDynamics::Generalized,
            expectations: init.bath_expectations(system),
        })
    }

    pub fn with_dynamics(mut self, dynamics: ClusterDynamics) -> Self {
        self.dynamics = dynamics;
        self
    }

    pub fn levels(&self) -> &CentralLevels {
        &self.levels
    }

    pub fn cluster_element(&self, cluster: &Cluster) -> Result<ElementSeries> {
        let mf = MeanField::outside(cluster, &self.expectations);
        cluster_series(
            self.system,
            &self.levels,
            self.init,
            cluster,
            &mf,
            self.element,
            &self.times,
            self.dynamics,
        )
    }

    pub fn cluster_elements(&self, clusters: &[Cluster]) -> Result<BTreeMap<Cluster, ElementSeries>> {
        let series = par::try_map(clusters, |c| self.cluster_element(c))?;
        Ok(clusters.iter().cloned().zip(series).collect())
    }

    /// Full expansion over a subset-closed family, reporting the product for
    /// each requested order.
    pub fn run(&self, clusters: &ClusterSet, orders: &[usize]) -> Result<CceResult> {
        if !clusters.is_subset_closed() {
            return Err(Error::IncompleteLattice("cluster family is not closed under subsets".into()));
        }
        if let Some(&m) = orders.iter().find(|&&m| m > clusters.truncation_order()) {
            return Err(Error::invalid(format!(
                "order {m} exceeds the truncation order {}",
                clusters.truncation_order()
            )));
        }
        let per_cluster = self.cluster_elements(clusters.clusters())?;
        let (irreducible, diagnostics) = irreducible_sweep(clusters.clusters(), &per_cluster);
        let per_order = par::try_map(orders, |&m| cce_product(clusters, &irreducible, m))?;
        Ok(CceResult {
            per_order: orders.iter().copied().zip(per_order).collect(),
            per_cluster,
            irreducible,
            diagnostics,
        })
    }

    /// Product over exactly the whitelisted clusters; each denominator uses
    /// only whitelisted proper subclusters.
    pub fn run_restricted(&self, whitelist: &[Cluster]) -> Result<RestrictedResult> {
        let mut clusters = whitelist.to_vec();
        clusters.sort();
        clusters.dedup();
        if let Some(c) = clusters.iter().find(|c| c.members().iter().any(|&i| i >= self.system.n_bath())) {
            return Err(Error::invalid(format!("cluster {c} refers to a missing bath spin")));
        }
        let per_cluster = self.cluster_elements(&clusters)?;
        let (irreducible, diagnostics) = irreducible_sweep(&clusters, &per_cluster);
        let factors: Vec<&ElementSeries> = clusters.iter().map(|c| &irreducible[c]).collect();
        let product = product_of(&factors)?;
        Ok(RestrictedResult {
            product,
            per_cluster,
            irreducible,
            diagnostics,
        })
    }
}

/// Generalized expansion of element `(i, j)` for each order in `orders`.
pub fn run_cce(
    system: &SpinSystem,
    init: &InitialState,
    i: usize,
    j: usize,
    times: &[f64],
    clusters: &ClusterSet,
    orders: &[usize],
) -> Result<CceResult> {
    CceEngine::new(system, init, (i, j), times)?.run(clusters, orders)
}

/// Expansion restricted to an explicit, possibly non-closed, cluster list.
pub fn restricted_cce_product(
    system: &SpinSystem,
    init: &InitialState,
    i: usize,
    j: usize,
    times: &[f64],
    whitelist: &[Cluster],
) -> Result<RestrictedResult> {
    CceEngine::new(system, init, (i, j), times)?.run_restricted(whitelist)
}
