//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use gcce_lab::cluster::{enumerate_clusters, mobius_invert, zeta_transform, Cluster};
use gcce_lab::dynamics::{
    cluster_element, exact_element, run_cce, uniform_grid, BathState, CceEngine, CentralState, ClusterDynamics,
    ElementSeries, InitialState,
};
use gcce_lab::par;
use gcce_lab::scenario::{compute, preset, render_series_csv, Mode, RunReport};
use gcce_lab::shorttime::{
    alpha_coefficient, alpha_irreducible_mobius, alpha_irreducible_recursive, beta_coefficient, fit_quadratic_coefficient,
};
use gcce_lab::spin_model::MeanField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run_preset(mode: Mode, threads: usize) -> RunReport {
    let s = preset(mode).unwrap().materialized();
    par::with_threads(threads, || compute(&s, vec![])).unwrap()
}

fn exact_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n = 1 + k % 5;
        let system = common::random_dipolar_system(&mut rng, n);
        let init = common::random_initial_state(&mut rng, &system);
        // a level state has vanishing coherences, which no ratio expansion can track
        let (i, j) = match init.central {
            CentralState::Level(k) => (k, k),
            _ => (rng.gen_range(0..2), rng.gen_range(0..2)),
        };
        let times = uniform_grid(1.0, 200).unwrap();
        let clusters = enumerate_clusters(n, n, None, None).unwrap();
        let exact = exact_element(&system, &init, i, j, &times).unwrap();
        let cce = run_cce(&system, &init, i, j, &times, &clusters, &[n]).unwrap();
        worst = worst.max(cce.per_order[&n].max_abs_error(&exact).unwrap());
    }
    outcome(worst < 1e-8, format!("max |CCE-N - exact| = {worst:.2e} over 20 systems (tol 1e-8)"))
}

fn figure4(report: &RunReport) -> Outcome {
    let exact = report.column("exact").unwrap();
    let tail = exact.len() * 4 / 5;
    let plateau = exact.values[tail..].iter().map(|z| z.re).sum::<f64>() / (exact.len() - tail) as f64;
    let a = plateau > 0.5 && plateau < 0.8;
    let order = |m: usize| report.column(&format!("cce_{m}")).unwrap();
    let even: Vec<bool> = [2, 4, 6].iter().map(|&m| order(m).first_unphysical(-0.001, 1.001).is_some()).collect();
    let odd: Vec<f64> = [1, 3, 5, 7].iter().map(|&m| order(m).last().re).collect();
    let b = even.iter().all(|&x| x);
    let c = odd.iter().all(|&f| f < 0.05 && plateau - f >= 0.4);
    outcome(
        a && b && c,
        format!(
            "plateau {plateau:.4} in (0.5, 0.8): {a}; even M leave [-0.001, 1.001]: {even:?}; odd M final {:?} < 0.05 and >= 0.4 below plateau: {c}",
            odd.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn figure5(report: &RunReport) -> Outcome {
    let disjoint = report.column("restricted_disjoint").unwrap();
    let overlap = report.column("restricted_overlap").unwrap();
    let range = |s: &ElementSeries| {
        let re = s.real_parts();
        (re.iter().cloned().fold(f64::INFINITY, f64::min), re.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let stays = disjoint.first_unphysical(-0.001, 1.001).is_none();
    let leaves = overlap.first_unphysical(-0.001, 1.001);
    outcome(
        stays && leaves.is_some(),
        format!(
            "disjoint range {:?} stays in [-0.001, 1.001]: {stays}; overlapping range {:?} leaves it: {}",
            range(disjoint),
            range(overlap),
            leaves.map_or("never".to_string(), |k| format!("at t = {} ms", overlap.times[k]))
        ),
    )
}

fn figure6(report: &RunReport) -> Outcome {
    let exact = report.column("exact").unwrap().magnitudes();
    let errors: Vec<f64> = (1..=4)
        .map(|m| {
            let v = report.column(&format!("cce_{m}")).unwrap().magnitudes();
            v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / v.len() as f64
        })
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    let ratio = errors[3] / errors[0];
    outcome(
        monotone && ratio < 0.25,
        format!(
            "time-averaged |coherence| errors M=1..4 {:?}; non-increasing: {monotone}; M4/M1 = {ratio:.3e} (< 0.25)",
            errors.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn short_time() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let times = uniform_grid(0.02, 401).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (mut worst_alpha, mut worst_beta): (f64, f64) = (0.0, 0.0);
    for k in 0..50 {
        let n = 1 + k % 3;
        let system = common::random_unit_scale_system(&mut rng, n);
        let cluster = Cluster::full(n);
        let mf = MeanField::default();

        let relax = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
        let alpha = alpha_coefficient(&system, &cluster, &relax, &mf).unwrap();
        let series = cluster_element(&system, &cluster, &relax, &mf, 0, 0, &times).unwrap();
        let fit = fit_quadratic_coefficient(&series, 0.05).unwrap();
        worst_alpha = worst_alpha.max((fit.coefficient - alpha).abs() / alpha);

        let coherent = InitialState::new(
            CentralState::Amplitudes(vec![Complex64::from(h), Complex64::from(h)]),
            BathState::MaximallyMixed,
        );
        let rho_bath = coherent.bath_density(&system, &cluster);
        let beta = beta_coefficient(&system, &cluster, &rho_bath, &mf, (0, 1)).unwrap();
        let series = CceEngine::new(&system, &coherent, (0, 1), &times)
            .unwrap()
            .with_dynamics(ClusterDynamics::Conditional)
            .cluster_element(&cluster)
            .unwrap()
            .normalized();
        let fit = fit_quadratic_coefficient(&series, 0.05).unwrap();
        worst_beta = worst_beta.max((fit.coefficient - beta).abs() / beta);
    }

    let mut min_alpha = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(0..=3);
        let system = common::random_mixed_spin_system(&mut rng, n);
        let d = system.central().dim();
        let members: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        let cluster = Cluster::new(members).unwrap();
        let bath = match rng.gen_range(0..3) {
            0 => BathState::MaximallyMixed,
            1 => BathState::Thermal {
                temperature_k: rng.gen_range(0.01..10.0),
            },
            _ => BathState::Product(system.bath().iter().map(|b| rng.gen_range(0..b.dim())).collect()),
        };
        let central = if rng.gen_bool(0.5) {
            CentralState::Level(rng.gen_range(0..d))
        } else {
            CentralState::Amplitudes(common::random_amplitudes(&mut rng, d))
        };
        let init = InitialState::new(central, bath);
        let mf = init.mean_field(&system, &cluster);
        min_alpha = min_alpha.min(alpha_coefficient(&system, &cluster, &init, &mf).unwrap());
    }
    let pass = worst_alpha < 1e-3 && worst_beta < 1e-3 && min_alpha >= -1e-12;
    outcome(
        pass,
        format!(
            "50 clusters: max |fit - alpha|/alpha = {worst_alpha:.2e}, max |fit - beta|/beta = {worst_beta:.2e} (tol 1e-3); min alpha over 1000 triples = {min_alpha:.3e} (>= -1e-12)"
        ),
    )
}

fn random_map(rng: &mut impl Rng, n: usize) -> BTreeMap<Cluster, f64> {
    Cluster::full(n).subsets().into_iter().map(|c| (c, rng.gen_range(-1.0..1.0))).collect()
}

fn mobius() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_equiv: f64 = 0.0;
    let mut worst_zeta: f64 = 0.0;
    let mut check = |values: &BTreeMap<Cluster, f64>, targets: &[Cluster]| {
        let irr: BTreeMap<Cluster, f64> =
            values.keys().map(|c| (c.clone(), mobius_invert(values, c).unwrap())).collect();
        for t in targets {
            let a = alpha_irreducible_recursive(values, t).unwrap();
            let b = alpha_irreducible_mobius(values, t).unwrap();
            worst_equiv = worst_equiv.max((a - b).abs());
            worst_zeta = worst_zeta.max((zeta_transform(&irr, t).unwrap() - values[t]).abs());
        }
    };
    for n in 0..=5 {
        for _ in 0..20 {
            let values = random_map(&mut rng, n);
            let targets: Vec<Cluster> = values.keys().cloned().collect();
            check(&values, &targets);
        }
    }
    for _ in 0..200 {
        let values = random_map(&mut rng, 8);
        let targets: Vec<Cluster> = (0..4)
            .map(|_| Cluster::new((0..8).filter(|_| rng.gen_bool(0.5)).collect()).unwrap())
            .chain([Cluster::full(8)])
            .collect();
        check(&values, &targets);
    }
    outcome(
        worst_equiv < 1e-12 && worst_zeta < 1e-12,
        format!("recursion vs inversion max diff {worst_equiv:.2e}; zeta round trip max diff {worst_zeta:.2e} (tol 1e-12)"),
    )
}

fn conservation(report: &RunReport) -> Outcome {
    let energy = report.meta.annotations.energy.as_ref().unwrap();
    let residual = energy.exact_residual;
    let drift = energy.implied.iter().find(|d| d.series == "cce_2").unwrap().implied_drift;
    outcome(
        residual < 1e-9 && drift > 100.0 * residual,
        format!("exact |dTr[rho H]|/|H| = {residual:.2e} (< 1e-9); CCE-2 implied drift {drift:.3e} (> 100x residual)"),
    )
}

fn determinism(single: &[(Mode, RunReport)]) -> Outcome {
    let mut same = Vec::new();
    for (mode, report) in single {
        let other = run_preset(*mode, 4);
        let a = render_series_csv(&report.columns).unwrap();
        let b = render_series_csv(&other.columns).unwrap();
        same.push((mode.name(), a == b));
    }
    outcome(same.iter().all(|(_, s)| *s), format!("1 vs 4 threads byte-identical: {same:?}"))
}

fn main() {
    let mut failures = 0;
    let mut report = |k: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k} [{status}] {name}: {} ({:.1} s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failures += 1;
        }
    };
    let presets: Vec<(Mode, RunReport)> =
        [Mode::Figure4, Mode::Figure5, Mode::Figure6].into_iter().map(|m| (m, run_preset(m, 1))).collect();
    report(1, "exact-oracle equivalence", &mut exact_equivalence);
    report(2, "figure 4 phenomenology", &mut || figure4(&presets[0].1));
    report(3, "figure 5 ablation", &mut || figure5(&presets[1].1));
    report(4, "figure 6 convergence", &mut || figure6(&presets[2].1));
    report(5, "short-time coefficients", &mut short_time);
    report(6, "Mobius machinery", &mut mobius);
    report(7, "conservation contrast", &mut || conservation(&presets[0].1));
    report(8, "determinism", &mut || determinism(&presets));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
