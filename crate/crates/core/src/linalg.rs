//! Dense complex Hermitian linear algebra: eigendecomposition, spectral
//! propagation, Kronecker embedding and reduced-element extraction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITICITY_TOL: f64 = 1e-10;

/// Spectral decomposition `H = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U(t) = V diag(e^{-iλt}) V†`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from_polar(1.0, -self.eigenvalues[k] * t);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from(self.eigenvalues[k]);
        }
        scaled * v.adjoint()
    }

    /// Largest eigenvalue magnitude (spectral norm of the source matrix).
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Rotates an operator into the eigenbasis: `V† X V`.
    pub fn to_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * x * &self.eigenvectors
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Maximum entrywise deviation from Hermiticity, `max |H - H†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as `(H + H†)/2` first; inputs further than 1e-10
/// (relative to `max|H|`) from Hermitian are rejected.
pub fn hermitian_eigendecompose(h: &CMatrix) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = max_abs(h).max(1.0);
    let defect = hermiticity_defect(h);
    if defect > HERMITICITY_TOL * scale {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (max |H - H^dagger| = {defect:e})"
        )));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(HermitianEig {
            eigenvalues: DVector::zeros(0),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let sym = (h + h.adjoint()) * Complex64::from(0.5);
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Checks that `rho` is a density matrix: Hermitian, unit trace and positive
/// semidefinite, all within `tol`. Eigenvalues in `[-tol, 0)` count as zero;
/// the matrix itself is never modified.
pub fn check_density(rho: &CMatrix, tol: f64) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::invalid("density matrix must be square"));
    }
    if hermiticity_defect(rho) > tol {
        return Err(Error::invalid("density matrix is not Hermitian"));
    }
    let tr = rho.trace();
    if (tr - Complex64::from(1.0)).norm() > tol {
        return Err(Error::invalid(format!("density matrix trace is {tr}, not 1")));
    }
    let eig = hermitian_eigendecompose(rho)?;
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::invalid(format!(
            "density matrix has negative eigenvalue {min:e}"
        )));
    }
    Ok(())
}

/// `ρ(t) = U(t) ρ0 U(t)†` at every grid time, with `U` built from one
/// eigendecomposition of `h`.
pub fn propagate_density(h: &CMatrix, rho0: &CMatrix, times: &[f64]) -> Result<Vec<CMatrix>> {
    if h.shape() != rho0.shape() {
        return Err(Error::invalid(format!(
            "Hamiltonian is {:?} but density matrix is {:?}",
            h.shape(),
            rho0.shape()
        )));
    }
    check_density(rho0, 1e-10)?;
    let eig = hermitian_eigendecompose(h)?;
    Ok(propagate_with(&eig, rho0, times))
}

/// Same as [`propagate_density`] for a precomputed decomposition.
pub fn propagate_with(eig: &HermitianEig, rho0: &CMatrix, times: &[f64]) -> Vec<CMatrix> {
    let rho_eig = eig.to_eigenbasis(rho0);
    let v = &eig.eigenvectors;
    par::map(times, |&t| {
        let mut r = rho_eig.clone();
        let phases: Vec<Complex64> = eig
            .eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * t))
            .collect();
        for c in 0..r.ncols() {
            for row in 0..r.nrows() {
                r[(row, c)] *= phases[row] * phases[c].conj();
            }
        }
        v * r * v.adjoint()
    })
}

/// Time series of `Tr[ρ(t) O]` computed in the eigenbasis of `H`.
///
/// With `A = V†ρ0V` and `B = V†OV` the value is
/// `Σ_kl A_kl B_lk exp(-i(λ_k - λ_l)t)`, which costs one matrix-vector
/// product per grid time.
pub fn expectation_series(
    eig: &HermitianEig,
    rho0: &CMatrix,
    observable: &CMatrix,
    times: &[f64],
) -> Vec<Complex64> {
    let a = eig.to_eigenbasis(rho0);
    let b = eig.to_eigenbasis(observable);
    phase_series(
        &eig.eigenvalues,
        &eig.eigenvalues,
        &a.component_mul(&b.transpose()),
        times,
    )
}

/// `Σ_kl W_kl exp(-i left_k t) exp(+i right_l t)` at every grid time.
pub(crate) fn phase_series(
    left: &DVector<f64>,
    right: &DVector<f64>,
    weights: &CMatrix,
    times: &[f64],
) -> Vec<Complex64> {
    debug_assert_eq!(weights.shape(), (left.len(), right.len()));
    // A common energy shift cancels between the two sides; removing the mean
    // keeps the arguments of the exponentials small.
    let count = left.len() + right.len();
    let shift = if count > 0 {
        (left.sum() + right.sum()) / count as f64
    } else {
        0.0
    };
    par::map(times, |&t| {
        let lp = CVector::from_iterator(
            left.len(),
            left.iter().map(|&l| Complex64::from_polar(1.0, -(l - shift) * t)),
        );
        let rp = CVector::from_iterator(
            right.len(),
            right.iter().map(|&l| Complex64::from_polar(1.0, (l - shift) * t)),
        );
        lp.dot(&(weights * rp))
    })
}

fn check_dims(dims: &[usize], n: usize) -> Result<()> {
    let prod: usize = dims.iter().product();
    if dims.is_empty() || prod != n {
        return Err(Error::invalid(format!(
            "subsystem dimensions {dims:?} do not multiply to {n}"
        )));
    }
    Ok(())
}

/// Partial trace over every factor except the first.
pub fn reduced_central_density(rho_full: &CMatrix, dims: &[usize]) -> Result<CMatrix> {
    if !rho_full.is_square() {
        return Err(Error::invalid("density matrix must be square"));
    }
    check_dims(dims, rho_full.nrows())?;
    let dc = dims[0];
    let db = rho_full.nrows() / dc;
    Ok(CMatrix::from_fn(dc, dc, |i, j| {
        (0..db).map(|b| rho_full[(i * db + b, j * db + b)]).sum()
    }))
}

/// `⟨i| Tr_bath[ρ] |j⟩` in the computational basis of the first factor.
pub fn extract_central_element(
    rho_full: &CMatrix,
    dims: &[usize],
    i: usize,
    j: usize,
) -> Result<Complex64> {
    let dc = dims.first().copied().unwrap_or(0);
    if i >= dc || j >= dc {
        return Err(Error::invalid(format!(
            "levels ({i}, {j}) out of range for a {dc}-level central spin"
        )));
    }
    let reduced = reduced_central_density(rho_full, dims)?;
    Ok(reduced[(i, j)])
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` in position `slot`.
pub fn kron_embed(op: &CMatrix, slot: usize, dims: &[usize]) -> Result<CMatrix> {
    if slot >= dims.len() {
        return Err(Error::invalid(format!(
            "slot {slot} out of range for {} subsystems",
            dims.len()
        )));
    }
    if op.nrows() != dims[slot] || op.ncols() != dims[slot] {
        return Err(Error::invalid(format!(
            "operator is {}x{} but slot {slot} has dimension {}",
            op.nrows(),
            op.ncols(),
            dims[slot]
        )));
    }
    let mut out = CMatrix::zeros(dims.iter().product(), dims.iter().product());
    add_embedded(&mut out, op, &[slot], dims);
    Ok(out)
}

/// Adds `op` (acting on the ordered factor list `slots`) to `target`,
/// identity-padded over the remaining factors.
///
/// `op` must act on the product space of `slots` in the given order.
pub(crate) fn add_embedded(target: &mut CMatrix, op: &CMatrix, slots: &[usize], dims: &[usize]) {
    let n: usize = dims.iter().product();
    debug_assert_eq!(target.nrows(), n);
    debug_assert_eq!(op.nrows(), slots.iter().map(|&s| dims[s]).product::<usize>());

    // stride of each factor in the flattened index (first factor slowest)
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let sub_dims: Vec<usize> = slots.iter().map(|&s| dims[s]).collect();
    let sub_n = op.nrows();

    let local_index = |full: usize| -> usize {
        slots.iter().fold(0, |acc, &s| acc * dims[s] + (full / strides[s]) % dims[s])
    };
    // offset contributed to a full index by a local (sub-space) index
    let local_offsets: Vec<usize> = (0..sub_n)
        .map(|mut loc| {
            let mut off = 0;
            for (k, &s) in slots.iter().enumerate().rev() {
                off += (loc % sub_dims[k]) * strides[s];
                loc /= sub_dims[k];
            }
            off
        })
        .collect();

    for row in 0..n {
        let r_loc = local_index(row);
        let base = row - local_offsets[r_loc];
        for c_loc in 0..sub_n {
            let v = op[(r_loc, c_loc)];
            if v != Complex64::new(0.0, 0.0) {
                target[(row, base + local_offsets[c_loc])] += v;
            }
        }
    }
}

pub(crate) fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
