//! Short-time coefficients of relaxation (α) and dephasing (β), their
//! irreducible parts on the subset lattice, and the numerical fits used to
//! check them.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::cluster::{mobius_invert, proper_subclusters, Cluster, ClusterSet};
use crate::dynamics::{conditional_hamiltonian, CentralLevels, ElementSeries, InitialState};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecompose, hermiticity_defect, kron, CMatrix, CVector};
use crate::par;
use crate::spin_model::{build_cluster_hamiltonian, MeanField, SpinSystem};

/// `(1 - |ψ⟩⟨ψ|) ⊗ 1` on the central-plus-cluster space.
#[derive(Debug, Clone)]
pub struct OrthogonalProjector {
    matrix: CMatrix,
}

impl OrthogonalProjector {
    pub fn new(central_state: &CVector, d_bath: usize) -> Result<Self> {
        let norm = central_state.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("central state has norm {norm}, expected 1")));
        }
        let d = central_state.len();
        let p = CMatrix::identity(d, d) - central_state * central_state.adjoint();
        Ok(OrthogonalProjector {
            matrix: p.kronecker(&CMatrix::identity(d_bath, d_bath)),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// `α_C = Tr[ρ H_C P⊥ H_C]` with `ρ = ρ_S(0) ⊗ ρ_C`.
pub fn alpha_coefficient(
    system: &SpinSystem,
    cluster: &Cluster,
    init: &InitialState,
    mean_field: &MeanField,
) -> Result<f64> {
    init.validate(system)?;
    let levels = CentralLevels::of(system)?;
    let h = build_cluster_hamiltonian(system, cluster, mean_field)?;
    let d_bath = h.nrows() / levels.dim();
    let psi = init.central_vector(&levels);
    let p = OrthogonalProjector::new(&psi, d_bath)?;
    // with ρ_C = Σ p_k |k⟩⟨k| the trace is Σ p_k ‖P⊥ H |ψ, k⟩‖², which stays
    // non-negative even when |ψ⟩ is nearly an eigenstate of a large H
    let bath = hermitian_eigendecompose(&init.bath_density(system, cluster))?;
    let mut alpha = 0.0;
    for (k, &w) in bath.eigenvalues.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let x = kron(&CMatrix::from_column_slice(psi.len(), 1, psi.as_slice()), &bath.eigenvectors.columns(k, 1).into_owned());
        alpha += w * (p.matrix() * (&h * x)).norm_squared();
    }
    Ok(alpha)
}

/// `β_C = ½(⟨ΔH²⟩ − ⟨ΔH⟩²)` with `ΔH = H^(i) − H^(j)` the difference of the
/// cluster Hamiltonians conditioned on central levels `i` and `j`.
pub fn beta_coefficient(
    system: &SpinSystem,
    cluster: &Cluster,
    bath_density: &CMatrix,
    mean_field: &MeanField,
    (i, j): (usize, usize),
) -> Result<f64> {
    let levels = CentralLevels::of(system)?;
    levels.check_level(i)?;
    levels.check_level(j)?;
    let h = build_cluster_hamiltonian(system, cluster, mean_field)?;
    let d_bath = h.nrows() / levels.dim();
    if bath_density.shape() != (d_bath, d_bath) {
        return Err(Error::invalid(format!(
            "bath density is {:?}, cluster bath space is {d_bath}",
            bath_density.shape()
        )));
    }
    if hermiticity_defect(bath_density) > 1e-10 {
        return Err(Error::invalid("bath density is not Hermitian"));
    }
    let delta = conditional_hamiltonian(&h, &levels.level(i), d_bath) - conditional_hamiltonian(&h, &levels.level(j), d_bath);
    // centre first: the level splitting makes ⟨ΔH⟩² dwarf the variance
    let mean = (bath_density * &delta).trace().re;
    let centred = delta - CMatrix::identity(d_bath, d_bath) * Complex64::from(mean);
    Ok(0.5 * (bath_density * &centred * &centred).trace().re)
}

/// `α^irr_C = α_C − Σ_{C'⊂C} α^irr_{C'}`, evaluated bottom-up.
pub fn alpha_irreducible_recursive(alpha: &BTreeMap<Cluster, f64>, target: &Cluster) -> Result<f64> {
    let mut irr: BTreeMap<Cluster, f64> = BTreeMap::new();
    for c in target.subsets() {
        let own = *alpha
            .get(&c)
            .ok_or_else(|| Error::IncompleteLattice(format!("no value for {c} below {target}")))?;
        let below: f64 = proper_subclusters(&c).iter().map(|s| irr[s]).sum();
        irr.insert(c, own - below);
    }
    Ok(irr[target])
}

/// `α^irr_C = Σ_{C'⊆C} (−1)^{|C|−|C'|} α_{C'}`.
pub fn alpha_irreducible_mobius(alpha: &BTreeMap<Cluster, f64>, target: &Cluster) -> Result<f64> {
    mobius_invert(alpha, target)
}

/// Möbius inversion of a β map.
pub fn beta_irreducible(beta: &BTreeMap<Cluster, f64>, target: &Cluster) -> Result<f64> {
    mobius_invert(beta, target)
}

/// α and β with their irreducible parts for every cluster of a family.
#[derive(Debug, Clone, Default)]
pub struct ShortTimeCoefficients {
    pub alpha: BTreeMap<Cluster, f64>,
    pub alpha_irr: BTreeMap<Cluster, f64>,
    pub beta: BTreeMap<Cluster, f64>,
    pub beta_irr: BTreeMap<Cluster, f64>,
}

/// Coefficients for each cluster of a subset-closed family; β uses central
/// levels `levels` and the bath state of `init`.
pub fn short_time_coefficients(
    system: &SpinSystem,
    init: &InitialState,
    clusters: &ClusterSet,
    levels: (usize, usize),
) -> Result<ShortTimeCoefficients> {
    if !clusters.is_subset_closed() {
        return Err(Error::IncompleteLattice("cluster family is not closed under subsets".into()));
    }
    let expectations = init.bath_expectations(system);
    let values = par::try_map(clusters.clusters(), |c| {
        let mf = MeanField::outside(c, &expectations);
        let a = alpha_coefficient(system, c, init, &mf)?;
        let b = beta_coefficient(system, c, &init.bath_density(system, c), &mf, levels)?;
        Ok::<_, Error>((a, b))
    })?;
    let mut out = ShortTimeCoefficients::default();
    for (c, (a, b)) in clusters.clusters().iter().zip(values) {
        out.alpha.insert(c.clone(), a);
        out.beta.insert(c.clone(), b);
    }
    for c in clusters.clusters() {
        out.alpha_irr.insert(c.clone(), mobius_invert(&out.alpha, c)?);
        out.beta_irr.insert(c.clone(), mobius_invert(&out.beta, c)?);
    }
    Ok(out)
}

/// Result of fitting `value(t) ≈ 1 − c t² − d t³` near `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub coefficient: f64,
    pub cubic: f64,
    /// Largest fit residual relative to `|c| t_w²` at the window edge.
    pub relative_residual: f64,
    /// Window actually used, as a fraction of the grid.
    pub window: f64,
    pub points: usize,
}

const MIN_FIT_POINTS: usize = 8;
const FIT_TARGET: f64 = 1e-4;
const MAX_HALVINGS: usize = 3;

fn fit_window(times: &[f64], y: &[f64], points: usize) -> (f64, f64, f64) {
    let tw = times[points - 1];
    // scaled abscissa keeps the 2×2 normal equations well conditioned
    let mut ata = Matrix2::zeros();
    let mut aty = Vector2::zeros();
    for k in 0..points {
        let x = times[k] / tw;
        let row = Vector2::new(x * x, x * x * x);
        ata += row * row.transpose();
        aty += row * y[k];
    }
    let sol = ata.lu().solve(&aty).unwrap_or_else(Vector2::zeros);
    let worst = (0..points).fold(0.0f64, |m, k| {
        let x = times[k] / tw;
        m.max((y[k] - sol[0] * x * x - sol[1] * x * x * x).abs())
    });
    let c = sol[0] / (tw * tw);
    let d = sol[1] / (tw * tw * tw);
    let scale = sol[0].abs();
    let rel = if scale > 0.0 {
        worst / scale
    } else if worst == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (c, d, rel)
}

/// Least-squares short-time coefficient of a series normalized to 1 at
/// `t = 0`. Diagonal elements are fitted on the real part, coherences on
/// the magnitude. The window (a fraction of the grid) is halved up to three
/// times until the residual falls below 1e-4 of the quadratic term.
pub fn fit_quadratic_coefficient(series: &ElementSeries, window: f64) -> Result<QuadraticFit> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::invalid(format!("fit window must be in (0, 1], got {window}")));
    }
    let v0 = series.values[0];
    if (v0 - Complex64::from(1.0)).norm() > 1e-9 {
        return Err(Error::invalid(format!("series starts at {v0}, expected 1")));
    }
    let y: Vec<f64> = series
        .values
        .iter()
        .map(|z| 1.0 - if series.is_diagonal() { z.re } else { z.norm() })
        .collect();
    let n = series.len();
    let points_for = |w: f64| ((w * (n - 1) as f64).floor() as usize + 1).min(n);
    let mut w = window;
    if points_for(w) < MIN_FIT_POINTS {
        return Err(Error::invalid(format!(
            "fit window holds {} grid points, at least {MIN_FIT_POINTS} are needed",
            points_for(w)
        )));
    }
    let mut best = None;
    for _ in 0..=MAX_HALVINGS {
        let points = points_for(w);
        if points < MIN_FIT_POINTS {
            break;
        }
        let (c, d, rel) = fit_window(&series.times, &y, points);
        best = Some(QuadraticFit {
            coefficient: c,
            cubic: d,
            relative_residual: rel,
            window: w,
            points,
        });
        if rel < FIT_TARGET {
            break;
        }
        w /= 2.0;
    }
    Ok(best.expect("the first window always has enough points"))
}

/// `T = margin / (q α_I)`.
pub fn estimate_convergence_window(q: f64, alpha_i: f64, margin: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("neighbour count must be positive, got {q}")));
    }
    if !(alpha_i > 0.0 && alpha_i.is_finite()) {
        return Err(Error::invalid(format!("flip-flop strength must be positive, got {alpha_i}")));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::invalid(format!("margin must be positive, got {margin}")));
    }
    Ok(margin / (q * alpha_i))
}

/// Geometry-derived inputs of the convergence window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceWindow {
    pub q: f64,
    pub alpha_i: f64,
    pub margin: f64,
    pub time: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `|J_xx + J_yy + i(J_xy − J_yx)| / 4`, the `I⁺_i I⁻_j` coefficient of
/// `I_i·J·I_j`.
pub fn flip_flop_element(j: &nalgebra::Matrix3<f64>) -> f64 {
    Complex64::new(j[(0, 0)] + j[(1, 1)], j[(0, 1)] - j[(1, 0)]).norm() / 4.0
}

/// `q` is the mean number of other bath spins within twice the median
/// nearest-neighbour distance; `α_I` is the median flip-flop element between
/// each bath spin and its nearest neighbour.
pub fn convergence_window(system: &SpinSystem, margin: f64) -> Result<ConvergenceWindow> {
    let n = system.n_bath();
    if n < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "convergence window needs at least two bath spins, got {n}"
        )));
    }
    let pos: Vec<_> = system.bath().iter().map(|s| s.position).collect();
    let mut nn_dist = Vec::with_capacity(n);
    let mut nn_flip = Vec::with_capacity(n);
    for i in 0..n {
        let (k, d) = (0..n)
            .filter(|&k| k != i)
            .map(|k| (k, (pos[k] - pos[i]).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least two spins");
        if d == 0.0 {
            return Err(Error::DegenerateGeometry(format!("bath spins {i} and {k} coincide")));
        }
        nn_dist.push(d);
        nn_flip.push(flip_flop_element(&system.coupling(i, k)));
    }
    let radius = 2.0 * median(nn_dist);
    let neighbours: usize = (0..n)
        .map(|i| (0..n).filter(|&k| k != i && (pos[k] - pos[i]).norm() <= radius).count())
        .sum();
    let q = neighbours as f64 / n as f64;
    let alpha_i = median(nn_flip);
    if alpha_i == 0.0 {
        return Err(Error::DegenerateGeometry("nearest-neighbour flip-flop couplings vanish".into()));
    }
    Ok(ConvergenceWindow {
        q,
        alpha_i,
        margin,
        time: estimate_convergence_window(q, alpha_i, margin)?,
    })
}

/// Descriptive fit of `|v(t)/v(0)| ≈ exp(−(t/T)^n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchedExponential {
    pub time_constant: f64,
    pub exponent: f64,
    pub points: usize,
}

/// Regression of `ln(−ln y)` on `ln t` over grid points with `y` strictly
/// between 1e-3 and 0.999. Returns `None` when fewer than three points
/// qualify.
pub fn fit_stretched_exponential(times: &[f64], y: &[f64]) -> Option<StretchedExponential> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(y)
        .filter(|(t, v)| **t > 0.0 && **v > 1e-3 && **v < 0.999)
        .map(|(t, v)| (t.ln(), (-v.ln()).ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx).powi(2), b + (x - mx) * (y - my)));
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if slope == 0.0 {
        return None;
    }
    Some(StretchedExponential {
        time_constant: (-intercept / slope).exp(),
        exponent: slope,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::enumerate_clusters;
    use crate::dynamics::{cluster_element, uniform_grid, BathState, CentralState, SeriesKind};
    use crate::spin_model::{SpinSite, GAMMA_ELECTRON};
    use nalgebra::{Matrix3, Vector3};
    use proptest::prelude::*;

    fn electron(x: f64, y: f64, z: f64) -> SpinSite {
        SpinSite::new("e", Vector3::new(x, y, z), 0.5, GAMMA_ELECTRON).unwrap()
    }

    fn synthetic(f: impl Fn(f64) -> Complex64, t_max: f64, n: usize, element: (usize, usize)) -> ElementSeries {
        let times = uniform_grid(t_max, n).unwrap();
        let values = times.iter().map(|&t| f(t)).collect();
        ElementSeries::new(times, values, SeriesKind::Exact, element).unwrap()
    }

    #[test]
    fn projector_properties() {
        let psi = CVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), Complex64::from(0.0)]);
        let p = OrthogonalProjector::new(&psi, 4).unwrap();
        let m = p.matrix();
        assert!(crate::linalg::max_abs(&(m * m - m)) < 1e-12);
        assert!(hermiticity_defect(m) < 1e-15);
        assert!((m.trace().re - 8.0).abs() < 1e-12);
        assert!(OrthogonalProjector::new(&(psi * Complex64::from(2.0)), 1).is_err());
    }

    #[test]
    fn alpha_vanishes_for_eigenstates_and_secular_coupling() {
        let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let lone = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), vec![], Vector3::new(0.0, 0.0, 10.0)).unwrap();
        assert!(alpha_coefficient(&lone, &Cluster::empty(), &init, &MeanField::default()).unwrap().abs() < 1e-6);

        let mut s = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), vec![electron(7.0, 0.0, 0.0)], Vector3::new(0.0, 0.0, 10.0))
            .unwrap();
        let mut a = Matrix3::zeros();
        a[(2, 2)] = 5.0;
        s.set_hyperfine(0, a).unwrap();
        let c = Cluster::new(vec![0]).unwrap();
        assert!(alpha_coefficient(&s, &c, &init, &MeanField::default()).unwrap().abs() < 1e-6);
    }

    #[test]
    fn alpha_of_a_flip_flop_pair() {
        // only the mixed-bath half with an antiparallel partner can flip: α = J²/2
        let mut s = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), vec![electron(60.0, 0.0, 0.0)], Vector3::new(0.0, 0.0, 10.0))
            .unwrap();
        s.set_hyperfine(0, Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, -1.0))).unwrap();
        let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let alpha = alpha_coefficient(&s, &Cluster::new(vec![0]).unwrap(), &init, &MeanField::default()).unwrap();
        assert!((alpha - 0.5).abs() < 1e-9, "{alpha}");
    }

    #[test]
    fn alpha_matches_the_fitted_decay() {
        // no field keeps every energy scale O(1), so t² terms stay far above round-off
        let mut s = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), vec![electron(60.0, 0.0, 0.0)], Vector3::zeros())
            .unwrap();
        s.set_hyperfine(0, Matrix3::new(1.5, 0.3, -0.2, 0.3, 0.9, 0.4, -0.2, 0.4, -1.1)).unwrap();
        let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let c = Cluster::new(vec![0]).unwrap();
        let mf = MeanField::default();
        let alpha = alpha_coefficient(&s, &c, &init, &mf).unwrap();
        let times = uniform_grid(0.02, 401).unwrap();
        let series = cluster_element(&s, &c, &init, &mf, 0, 0, &times).unwrap();
        let fit = fit_quadratic_coefficient(&series, 0.05).unwrap();
        assert!((fit.coefficient - alpha).abs() < 1e-3 * alpha, "{} vs {alpha}", fit.coefficient);
    }

    #[test]
    fn beta_cases() {
        let mut s = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), vec![electron(60.0, 0.0, 0.0)], Vector3::new(0.0, 0.0, 10.0))
            .unwrap();
        let mut a = Matrix3::zeros();
        a[(2, 2)] = 3.0;
        s.set_hyperfine(0, a).unwrap();
        let c = Cluster::new(vec![0]).unwrap();
        let mixed = CMatrix::identity(2, 2) / Complex64::from(2.0);
        // ΔH = ±A_zz I_z between the two levels
        let beta = beta_coefficient(&s, &c, &mixed, &MeanField::default(), (0, 1)).unwrap();
        assert!((beta - 9.0 / 8.0).abs() < 1e-6, "{beta}");
        // the empty cluster leaves ΔH a constant
        let empty = beta_coefficient(&s, &Cluster::empty(), &CMatrix::identity(1, 1), &MeanField::new([(0, Vector3::zeros())].into()), (0, 1))
            .unwrap();
        assert!(empty.abs() < 1e-6);
    }

    #[test]
    fn independent_beta_contributions_are_additive() {
        let bath = vec![electron(40.0, 0.0, 0.0), electron(0.0, 0.0, 50.0)];
        let mut s = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), bath, Vector3::new(0.0, 0.0, 10.0)).unwrap();
        for (i, azz) in [(0, 2.0), (1, -1.5)] {
            let mut a = Matrix3::zeros();
            a[(2, 2)] = azz;
            s.set_hyperfine(i, a).unwrap();
        }
        s.set_coupling(0, 1, Matrix3::zeros()).unwrap();
        let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let clusters = enumerate_clusters(2, 2, None, None).unwrap();
        let k = short_time_coefficients(&s, &init, &clusters, (0, 1)).unwrap();
        let pair = Cluster::new(vec![0, 1]).unwrap();
        assert!(k.beta_irr[&pair].abs() < 1e-10 * k.beta[&pair].max(1.0), "{k:?}");
    }

    #[test]
    fn recursion_examples() {
        let e = Cluster::empty();
        let one = Cluster::new(vec![1]).unwrap();
        let two = Cluster::new(vec![2]).unwrap();
        let pair = Cluster::new(vec![1, 2]).unwrap();
        let alpha = BTreeMap::from([(e.clone(), 0.5), (one.clone(), 2.0), (two.clone(), 3.0), (pair.clone(), 7.0)]);
        assert_eq!(alpha_irreducible_recursive(&alpha, &one).unwrap(), 1.5);
        let alpha0 = BTreeMap::from([(e, 0.0), (one, 2.0), (two, 3.0), (pair.clone(), 7.0)]);
        assert_eq!(alpha_irreducible_recursive(&alpha0, &pair).unwrap(), 2.0);
        assert!(alpha_irreducible_recursive(&BTreeMap::new(), &pair).is_err());
    }

    #[test]
    fn mobius_examples() {
        let target = Cluster::new(vec![0, 1, 2]).unwrap();
        let constant: BTreeMap<_, _> = target.subsets().into_iter().map(|c| (c, 4.2)).collect();
        assert!(alpha_irreducible_mobius(&constant, &target).unwrap().abs() < 1e-12);
        let only: BTreeMap<_, _> = target
            .subsets()
            .into_iter()
            .map(|c| {
                let v = if c == target { 3.3 } else { 0.0 };
                (c, v)
            })
            .collect();
        assert_eq!(alpha_irreducible_mobius(&only, &target).unwrap(), 3.3);
        assert_eq!(beta_irreducible(&only, &target).unwrap(), 3.3);
    }

    #[test]
    fn recursion_equals_mobius_exhaustively() {
        let mut rng_state = 17u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in 0..=5 {
            let top = Cluster::full(n);
            let values: BTreeMap<_, _> = top.subsets().into_iter().map(|c| (c, next())).collect();
            for c in top.subsets() {
                let a = alpha_irreducible_recursive(&values, &c).unwrap();
                let b = alpha_irreducible_mobius(&values, &c).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn recursion_equals_mobius_on_random_maps(vals in proptest::collection::vec(-10.0f64..10.0, 16)) {
            let top = Cluster::full(4);
            let map: BTreeMap<_, _> = top.subsets().into_iter().zip(vals).collect();
            let a = alpha_irreducible_recursive(&map, &top).unwrap();
            let b = alpha_irreducible_mobius(&map, &top).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn without_overlap_irreducible_equals_full(v in 0.0f64..5.0) {
            let top = Cluster::full(3);
            let map: BTreeMap<_, _> = top.subsets().into_iter().map(|c| {
                let x = if c == top { v } else { 0.0 };
                (c, x)
            }).collect();
            prop_assert_eq!(alpha_irreducible_recursive(&map, &top).unwrap(), v);
        }
    }

    #[test]
    fn fit_synthetic_series() {
        let quad = synthetic(|t| Complex64::from(1.0 - 3.0 * t * t), 1.0, 201, (0, 0));
        let f = fit_quadratic_coefficient(&quad, 0.05).unwrap();
        assert!((f.coefficient - 3.0).abs() < 1e-10);
        let flat = synthetic(|_| Complex64::from(1.0), 1.0, 201, (0, 0));
        assert_eq!(fit_quadratic_coefficient(&flat, 0.05).unwrap().coefficient, 0.0);
        let w = 2.0;
        let mut prev = f64::INFINITY;
        for t_max in [1.0, 0.5, 0.25] {
            let cos = synthetic(|t| Complex64::from((w * t).cos()), t_max, 201, (0, 0));
            let err = (fit_quadratic_coefficient(&cos, 0.2).unwrap().coefficient - w * w / 2.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn fit_rejects_short_windows_and_bad_starts() {
        let s = synthetic(|t| Complex64::from(1.0 - t * t), 1.0, 50, (0, 0));
        assert!(fit_quadratic_coefficient(&s, 0.05).is_err());
        let off = synthetic(|t| Complex64::from(0.5 - t * t), 1.0, 400, (0, 0));
        assert!(fit_quadratic_coefficient(&off, 0.05).is_err());
    }

    #[test]
    fn convergence_window_formula() {
        assert!((estimate_convergence_window(4.0, 1.0, 0.1).unwrap() - 0.025).abs() < 1e-15);
        let a = estimate_convergence_window(3.0, 2.0, 0.1).unwrap();
        let b = estimate_convergence_window(3.0, 4.0, 0.1).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(estimate_convergence_window(0.0, 1.0, 0.1).is_err());
        assert!(estimate_convergence_window(1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn convergence_window_from_geometry() {
        let bath: Vec<_> = (0..4).map(|k| electron(10.0 * k as f64, 0.0, 0.0)).collect();
        let s = SpinSystem::from_geometry(electron(0.0, 5.0, 0.0), bath, Vector3::new(0.0, 0.0, 10.0)).unwrap();
        let w = convergence_window(&s, 0.1).unwrap();
        // median NN distance 10, radius 20: ends see 2, middles see 3
        assert_eq!(w.q, 2.5);
        assert!((w.alpha_i - flip_flop_element(&s.coupling(0, 1))).abs() < 1e-12);
        let lone = SpinSystem::from_geometry(electron(0.0, 0.0, 0.0), vec![electron(1.0, 0.0, 0.0)], Vector3::zeros()).unwrap();
        assert!(matches!(convergence_window(&lone, 0.1), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn stretched_exponential_recovers_parameters() {
        let times = uniform_grid(10.0, 200).unwrap();
        let y: Vec<f64> = times.iter().map(|t| (-(t / 3.0f64).powf(1.5)).exp()).collect();
        let f = fit_stretched_exponential(&times, &y).unwrap();
        assert!((f.time_constant - 3.0).abs() < 1e-9);
        assert!((f.exponent - 1.5).abs() < 1e-9);
        assert!(fit_stretched_exponential(&times, &vec![1.0; 200]).is_none());
    }
}
