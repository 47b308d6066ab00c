use nalgebra::Vector3;

use super::{MeanField, SpinOperators, SpinSystem};
use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::linalg::{add_embedded, CMatrix};

/// Largest Hilbert-space dimension the builders accept by default.
pub const DEFAULT_MAX_DIM: usize = 1 << 16;

/// `S·D·S + B·γ_S·S` on the central-spin space.
pub fn central_static_operator(system: &SpinSystem) -> CMatrix {
    let c = system.central();
    let ops = SpinOperators::for_spin(c.spin);
    ops.quadratic(&c.self_tensor) + ops.linear(&(c.gamma.transpose() * system.field()))
}

/// `I·P·I + B·γ·I` for one bath spin.
pub(crate) fn bath_static_operator(system: &SpinSystem, i: usize, ops: &SpinOperators) -> CMatrix {
    let site = &system.bath()[i];
    ops.quadratic(&site.self_tensor) + ops.linear(&(site.gamma.transpose() * system.field()))
}

/// Full-space Hamiltonian with the default dimension cap.
pub fn build_full_hamiltonian(system: &SpinSystem) -> Result<CMatrix> {
    build_full_hamiltonian_capped(system, DEFAULT_MAX_DIM)
}

pub fn build_full_hamiltonian_capped(system: &SpinSystem, max_dim: usize) -> Result<CMatrix> {
    assemble(system, &system.all_bath(), &MeanField::default(), max_dim)
}

/// Hamiltonian of the central spin plus `cluster`, with bath spins outside
/// the cluster entering through their static expectation values.
pub fn build_cluster_hamiltonian(
    system: &SpinSystem,
    cluster: &Cluster,
    mean_field: &MeanField,
) -> Result<CMatrix> {
    assemble(system, cluster, mean_field, DEFAULT_MAX_DIM)
}

fn check_partition(system: &SpinSystem, cluster: &Cluster, mean_field: &MeanField) -> Result<()> {
    let n = system.n_bath();
    if let Some(&bad) = cluster.members().iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!(
            "cluster member {bad} outside a bath of {n} spins"
        )));
    }
    for &a in mean_field.expectations().keys() {
        if cluster.contains(a) {
            return Err(Error::InconsistentPartition(format!(
                "bath spin {a} is both in the cluster and in the mean field"
            )));
        }
        if a >= n {
            return Err(Error::InconsistentPartition(format!(
                "mean field names bath spin {a} outside a bath of {n} spins"
            )));
        }
    }
    // an empty mean field stands for "no excluded spins contribute" only when
    // nothing is excluded; otherwise every excluded spin must be listed
    let excluded = n - cluster.order();
    if mean_field.expectations().len() != excluded {
        return Err(Error::InconsistentPartition(format!(
            "mean field covers {} spins but {excluded} bath spins lie outside the cluster",
            mean_field.expectations().len()
        )));
    }
    mean_field.validate(system)
}

pub(crate) fn assemble(
    system: &SpinSystem,
    cluster: &Cluster,
    mean_field: &MeanField,
    max_dim: usize,
) -> Result<CMatrix> {
    check_partition(system, cluster, mean_field)?;
    let dims = system.cluster_dims(cluster);
    let dim = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&d| d <= max_dim)
        .ok_or_else(|| Error::Capacity {
            dim: dims.iter().fold(1usize, |acc, &d| acc.saturating_mul(d)),
            cap: max_dim,
        })?;

    let central_ops = SpinOperators::for_spin(system.central().spin);
    let member_ops: Vec<SpinOperators> = cluster
        .members()
        .iter()
        .map(|&i| SpinOperators::for_spin(system.bath()[i].spin))
        .collect();

    let mut h = CMatrix::zeros(dim, dim);

    // central static part and Σ_{a∉C} S·A_a·⟨I_a⟩
    let mut central_field = Vector3::zeros();
    for (&a, expect) in mean_field.expectations() {
        central_field += system.hyperfine(a) * expect;
    }
    let central = central_static_operator(system) + central_ops.linear(&central_field);
    add_embedded(&mut h, &central, &[0], &dims);

    for (k, &i) in cluster.members().iter().enumerate() {
        let ops = &member_ops[k];
        // bath static part and Σ_{a∉C} I_i·J_ia·⟨I_a⟩
        let mut field = Vector3::zeros();
        for (&a, expect) in mean_field.expectations() {
            field += system.coupling(i, a) * expect;
        }
        let single = bath_static_operator(system, i, ops) + ops.linear(&field);
        add_embedded(&mut h, &single, &[k + 1], &dims);

        let hyperfine = central_ops.bilinear(system.hyperfine(i), ops);
        add_embedded(&mut h, &hyperfine, &[0, k + 1], &dims);
    }

    for (k, &i) in cluster.members().iter().enumerate() {
        for (l, &j) in cluster.members().iter().enumerate().skip(k + 1) {
            let pair = member_ops[k].bilinear(&system.coupling(i, j), &member_ops[l]);
            add_embedded(&mut h, &pair, &[k + 1, l + 1], &dims);
        }
    }
    Ok(h)
}
