use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecompose, kron, max_abs, CMatrix, CVector};
use crate::spin_model::{central_static_operator, MeanField, SpinOperators, SpinSystem};

/// Boltzmann constant over ħ in rad·ms⁻¹·K⁻¹.
pub const K_B_OVER_HBAR: f64 = 1.380_649e-23 / 1.054_571_817e-34 * 1e-3;

const NORM_TOL: f64 = 1e-12;

/// Eigenstates of the static central part `S·D·S + B·γ_S·S`, ordered by
/// descending energy. Level vectors are expressed in the `S_z` basis.
#[derive(Debug, Clone)]
pub struct CentralLevels {
    vectors: CMatrix,
    energies: Vec<f64>,
}

impl CentralLevels {
    pub fn of(system: &SpinSystem) -> Result<Self> {
        let h = central_static_operator(system);
        let n = h.nrows();
        let scale = max_abs(&h);
        let off_diagonal = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .fold(0.0f64, |m, (r, c)| m.max(h[(r, c)].norm()));

        // A diagonal operator keeps the S_z basis, which also fixes the
        // ordering inside degenerate groups (including the zero operator).
        if off_diagonal <= 1e-14 * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| h[(b, b)].re.total_cmp(&h[(a, a)].re).then(a.cmp(&b)));
            let mut vectors = CMatrix::zeros(n, n);
            for (dst, &src) in order.iter().enumerate() {
                vectors[(src, dst)] = Complex64::from(1.0);
            }
            let energies = order.iter().map(|&k| h[(k, k)].re).collect();
            return Ok(CentralLevels { vectors, energies });
        }

        let eig = hermitian_eigendecompose(&h)?;
        let mut vectors = CMatrix::zeros(n, n);
        let mut energies = Vec::with_capacity(n);
        for (dst, src) in (0..n).rev().enumerate() {
            let mut col = eig.eigenvectors.column(src).clone_owned();
            // fix the phase: largest component real and positive
            let (_, pivot) = col
                .iter()
                .enumerate()
                .fold((0.0, 0), |(m, k), (i, z)| if z.norm() > m + 1e-12 { (z.norm(), i) } else { (m, k) });
            let phase = col[pivot] / col[pivot].norm();
            col /= phase;
            vectors.set_column(dst, &col);
            energies.push(eig.eigenvalues[src]);
        }
        Ok(CentralLevels { vectors, energies })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Level `k` as a column vector in the `S_z` basis.
    pub fn level(&self, k: usize) -> CVector {
        self.vectors.column(k).clone_owned()
    }

    /// Columns are the level vectors.
    pub fn matrix(&self) -> &CMatrix {
        &self.vectors
    }

    pub(crate) fn check_level(&self, k: usize) -> Result<()> {
        if k >= self.dim() {
            return Err(Error::invalid(format!(
                "central level {k} out of range for a {}-level central spin",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Central-spin part of the initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum CentralState {
    /// A single central level, indexed as in [`CentralLevels`].
    Level(usize),
    /// Normalized amplitudes over the central levels.
    Amplitudes(Vec<Complex64>),
}

/// Bath part of the initial state; always a product over bath spins.
#[derive(Debug, Clone, PartialEq)]
pub enum BathState {
    MaximallyMixed,
    /// Product of single-spin Gibbs states of the Zeeman and self terms.
    Thermal { temperature_k: f64 },
    /// One `I_z` level per bath spin; level 0 is `m = +I`.
    Product(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub central: CentralState,
    pub bath: BathState,
}

impl InitialState {
    pub fn new(central: CentralState, bath: BathState) -> Self {
        InitialState { central, bath }
    }

    pub fn validate(&self, system: &SpinSystem) -> Result<()> {
        let d = system.central().dim();
        match &self.central {
            CentralState::Level(k) if *k >= d => {
                return Err(Error::invalid(format!(
                    "central level {k} out of range for a {d}-level central spin"
                )))
            }
            CentralState::Amplitudes(a) => {
                if a.len() != d {
                    return Err(Error::invalid(format!(
                        "{} central amplitudes for a {d}-level central spin",
                        a.len()
                    )));
                }
                let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::invalid(format!(
                        "central amplitudes have squared norm {norm}, expected 1"
                    )));
                }
            }
            _ => {}
        }
        match &self.bath {
            BathState::MaximallyMixed => {}
            BathState::Thermal { temperature_k } => {
                if !(temperature_k.is_finite() && *temperature_k >= 0.0) {
                    return Err(Error::invalid(format!(
                        "bath temperature must be finite and non-negative, got {temperature_k}"
                    )));
                }
            }
            BathState::Product(levels) => {
                if levels.len() != system.n_bath() {
                    return Err(Error::invalid(format!(
                        "{} bath levels for {} bath spins",
                        levels.len(),
                        system.n_bath()
                    )));
                }
                for (i, (&l, site)) in levels.iter().zip(system.bath()).enumerate() {
                    if l >= site.dim() {
                        return Err(Error::invalid(format!(
                            "bath spin {i} has {} levels, got level {l}",
                            site.dim()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Central amplitudes over the levels.
    pub fn central_amplitudes(&self, n_levels: usize) -> Vec<Complex64> {
        match &self.central {
            CentralState::Level(k) => (0..n_levels)
                .map(|l| Complex64::from(if l == *k { 1.0 } else { 0.0 }))
                .collect(),
            CentralState::Amplitudes(a) => a.clone(),
        }
    }

    /// Central state vector in the `S_z` basis.
    pub fn central_vector(&self, levels: &CentralLevels) -> CVector {
        let c = CVector::from_vec(self.central_amplitudes(levels.dim()));
        levels.matrix() * c
    }

    pub fn central_density(&self, levels: &CentralLevels) -> CMatrix {
        let psi = self.central_vector(levels);
        &psi * psi.adjoint()
    }

    /// Diagonal `I_z` populations of bath spin `i` (level 0 is `m = +I`).
    pub fn bath_populations(&self, system: &SpinSystem, i: usize) -> Vec<f64> {
        let site = &system.bath()[i];
        let d = site.dim();
        match &self.bath {
            BathState::MaximallyMixed => vec![1.0 / d as f64; d],
            BathState::Product(levels) => (0..d).map(|k| if k == levels[i] { 1.0 } else { 0.0 }).collect(),
            BathState::Thermal { .. } => {
                let rho = self.bath_spin_density(system, i);
                (0..d).map(|k| rho[(k, k)].re).collect()
            }
        }
    }

    /// Single-spin density matrix of bath spin `i`.
    pub fn bath_spin_density(&self, system: &SpinSystem, i: usize) -> CMatrix {
        let site = &system.bath()[i];
        let d = site.dim();
        match &self.bath {
            BathState::MaximallyMixed => CMatrix::identity(d, d) / Complex64::from(d as f64),
            BathState::Product(levels) => {
                let mut rho = CMatrix::zeros(d, d);
                rho[(levels[i], levels[i])] = Complex64::from(1.0);
                rho
            }
            BathState::Thermal { temperature_k } => {
                let ops = SpinOperators::for_spin(site.spin);
                let h = crate::spin_model::bath_static_operator(system, i, &ops);
                gibbs_density(&h, *temperature_k)
            }
        }
    }

    /// Product density of the given bath members, in member order.
    pub fn bath_density(&self, system: &SpinSystem, cluster: &Cluster) -> CMatrix {
        cluster
            .members()
            .iter()
            .fold(CMatrix::identity(1, 1), |acc, &i| kron(&acc, &self.bath_spin_density(system, i)))
    }

    /// `ρ_S(0) ⊗ ρ_C` on the central-plus-cluster space.
    pub fn cluster_density(&self, system: &SpinSystem, levels: &CentralLevels, cluster: &Cluster) -> CMatrix {
        kron(&self.central_density(levels), &self.bath_density(system, cluster))
    }

    /// `⟨I_a⟩` for every bath spin.
    pub fn bath_expectations(&self, system: &SpinSystem) -> Vec<Vector3<f64>> {
        (0..system.n_bath())
            .map(|i| {
                let site = &system.bath()[i];
                match &self.bath {
                    BathState::MaximallyMixed => Vector3::zeros(),
                    BathState::Product(levels) => Vector3::new(0.0, 0.0, site.spin.m(levels[i])),
                    BathState::Thermal { .. } => {
                        let rho = self.bath_spin_density(system, i);
                        let ops = SpinOperators::for_spin(site.spin);
                        Vector3::from_fn(|a, _| (&rho * ops.component(a)).trace().re)
                    }
                }
            })
            .collect()
    }

    /// Mean field of the bath spins outside `cluster`.
    pub fn mean_field(&self, system: &SpinSystem, cluster: &Cluster) -> MeanField {
        MeanField::outside(cluster, &self.bath_expectations(system))
    }

    /// Pure full-space state vector when both factors are pure.
    pub(crate) fn pure_vector(&self, system: &SpinSystem, levels: &CentralLevels, cluster: &Cluster) -> Option<CVector> {
        let BathState::Product(bath) = &self.bath else {
            return None;
        };
        let mut psi = self.central_vector(levels);
        for &i in cluster.members() {
            let d = system.bath()[i].dim();
            let mut e = CVector::zeros(d);
            e[bath[i]] = Complex64::from(1.0);
            psi = kron_vec(&psi, &e);
        }
        Some(psi)
    }
}

fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    CVector::from_iterator(a.len() * b.len(), a.iter().flat_map(|x| b.iter().map(move |y| x * y)))
}

/// Gibbs state `exp(-H/k_BT)/Z` of a single-spin operator in rad/ms. At zero
/// temperature the ground manifold is populated uniformly.
fn gibbs_density(h: &CMatrix, temperature_k: f64) -> CMatrix {
    let eig = hermitian_eigendecompose(h).expect("single-spin static operator is Hermitian");
    let e0 = eig.eigenvalues[0];
    let weights: DVector<f64> = if temperature_k == 0.0 {
        let scale = eig.spectral_norm().max(1.0);
        eig.eigenvalues.map(|e| if e - e0 <= 1e-12 * scale { 1.0 } else { 0.0 })
    } else {
        let kt = K_B_OVER_HBAR * temperature_k;
        eig.eigenvalues.map(|e| (-(e - e0) / kt).exp())
    };
    let z = weights.sum();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from(weights[k] / z);
    }
    scaled * v.adjoint()
}

/// Draws pure product bath states from the bath populations of `init`.
///
/// Sample `k` uses its own ChaCha8 stream `k` of `seed`, so it does not depend
/// on how many samples are drawn.
pub fn sample_bath_states(
    system: &SpinSystem,
    init: &InitialState,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    init.validate(system)?;
    let populations: Vec<Vec<f64>> = (0..system.n_bath())
        .map(|i| init.bath_populations(system, i))
        .collect();
    Ok((0..n_samples)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            populations
                .iter()
                .map(|p| {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    for (level, w) in p.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            return level;
                        }
                    }
                    // round-off leaves acc marginally below 1
                    p.iter().rposition(|&w| w > 0.0).unwrap_or(0)
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_model::{SpinSite, GAMMA_ELECTRON};
    use nalgebra::Matrix3;

    fn electron(x: f64) -> SpinSite {
        SpinSite::new("e", Vector3::new(x, 0.0, 0.0), 0.5, GAMMA_ELECTRON).unwrap()
    }

    fn system(n: usize, bz: f64) -> SpinSystem {
        let bath = (1..=n).map(|k| electron(10.0 * k as f64)).collect();
        SpinSystem::from_geometry(electron(0.0), bath, Vector3::new(0.0, 0.0, bz)).unwrap()
    }

    #[test]
    fn levels_descend_in_energy() {
        // negative gamma: m = -1/2 lies higher for B along +z
        let levels = CentralLevels::of(&system(0, 10.0)).unwrap();
        assert!(levels.energies()[0] > levels.energies()[1]);
        assert_eq!(levels.level(0)[1], Complex64::from(1.0));
        let flat = CentralLevels::of(&system(0, 0.0)).unwrap();
        assert_eq!(flat.level(0)[0], Complex64::from(1.0));
    }

    #[test]
    fn transverse_field_levels_are_eigenvectors() {
        let s = SpinSystem::from_geometry(electron(0.0), vec![], Vector3::new(3.0, 0.0, 4.0)).unwrap();
        let levels = CentralLevels::of(&s).unwrap();
        let h = central_static_operator(&s);
        for k in 0..2 {
            let v = levels.level(k);
            let residual = &h * &v - &v * Complex64::from(levels.energies()[k]);
            assert!(residual.norm() < 1e-9 * h.norm());
        }
    }

    #[test]
    fn spin_one_with_axial_zfs_keeps_sz_order() {
        let mut d = Matrix3::zeros();
        d[(2, 2)] = 2.0;
        let central = SpinSite::with_tensors("nv", Vector3::zeros(), 1.0, Matrix3::identity(), d).unwrap();
        let s = SpinSystem::from_geometry(central, vec![], Vector3::zeros()).unwrap();
        let levels = CentralLevels::of(&s).unwrap();
        assert_eq!(levels.energies(), &[2.0, 2.0, 0.0]);
        assert_eq!(levels.level(0)[0], Complex64::from(1.0));
        assert_eq!(levels.level(1)[2], Complex64::from(1.0));
    }

    #[test]
    fn validation_rejects_bad_states() {
        let s = system(2, 10.0);
        let bad_norm = InitialState::new(
            CentralState::Amplitudes(vec![Complex64::from(1.0), Complex64::from(1.0)]),
            BathState::MaximallyMixed,
        );
        assert!(bad_norm.validate(&s).is_err());
        let bad_level = InitialState::new(CentralState::Level(2), BathState::MaximallyMixed);
        assert!(bad_level.validate(&s).is_err());
        let bad_bath = InitialState::new(CentralState::Level(0), BathState::Product(vec![0]));
        assert!(bad_bath.validate(&s).is_err());
        let bad_t = InitialState::new(CentralState::Level(0), BathState::Thermal { temperature_k: -1.0 });
        assert!(bad_t.validate(&s).is_err());
    }

    #[test]
    fn thermal_populations_sum_to_one() {
        let s = system(3, 10.0);
        for t in [0.0, 1e-3, 0.1, 300.0] {
            let init = InitialState::new(CentralState::Level(0), BathState::Thermal { temperature_k: t });
            for i in 0..3 {
                let p = init.bath_populations(&s, i);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_temperature_is_the_ground_level() {
        let s = system(2, 10.0);
        let init = InitialState::new(CentralState::Level(0), BathState::Thermal { temperature_k: 0.0 });
        // γ < 0 and B_z > 0 put m = +1/2 lowest
        assert_eq!(init.bath_populations(&s, 0), vec![1.0, 0.0]);
        let e = init.bath_expectations(&s);
        assert!((e[1].z - 0.5).abs() < 1e-12);
        let samples = sample_bath_states(&s, &init, 5, 7).unwrap();
        assert!(samples.iter().all(|x| x == &vec![0, 0]));
    }

    #[test]
    fn high_temperature_approaches_maximally_mixed() {
        let s = system(1, 10.0);
        let init = InitialState::new(CentralState::Level(0), BathState::Thermal { temperature_k: 1e6 });
        let p = init.bath_populations(&s, 0);
        assert!((p[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn sampling_is_deterministic_and_counter_based() {
        let s = system(4, 10.0);
        let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let a = sample_bath_states(&s, &init, 50, 11).unwrap();
        let b = sample_bath_states(&s, &init, 50, 11).unwrap();
        assert_eq!(a, b);
        let short = sample_bath_states(&s, &init, 10, 11).unwrap();
        assert_eq!(&a[..10], &short[..]);
        let other = sample_bath_states(&s, &init, 50, 12).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn maximally_mixed_sampling_is_uniform() {
        let s = system(1, 10.0);
        let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let n = 10_000;
        let ups = sample_bath_states(&s, &init, n, 3)
            .unwrap()
            .iter()
            .filter(|x| x[0] == 0)
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ups as f64 - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn pure_vector_matches_density() {
        let s = system(2, 10.0);
        let init = InitialState::new(
            CentralState::Amplitudes(vec![Complex64::from(0.6), Complex64::new(0.0, 0.8)]),
            BathState::Product(vec![1, 0]),
        );
        let levels = CentralLevels::of(&s).unwrap();
        let all = s.all_bath();
        let psi = init.pure_vector(&s, &levels, &all).unwrap();
        let rho = init.cluster_density(&s, &levels, &all);
        assert!(max_abs(&(&psi * psi.adjoint() - rho)) < 1e-15);
    }
}
