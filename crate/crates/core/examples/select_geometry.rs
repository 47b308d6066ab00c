//! Scans seeded cube geometries and reports, for each, the qualitative
//! relaxation, ablation and dephasing features checked by the acceptance
//! suite. For the ablation it also searches the bath labelling: which spin
//! is listed first and which two follow it.
//!
//! cargo run --release --example select_geometry -- <first-seed> <count> <t_relax> <t_dephase>

use std::collections::BTreeMap;

use gcce_lab::cluster::{enumerate_clusters, Cluster};
use gcce_lab::dynamics::{
    exact_element, run_cce, sampled_cce, uniform_grid, BathState, CceEngine, CentralState, ClusterDynamics,
    ElementSeries, InitialState, SamplingPlan,
};
use gcce_lab::geometry::scaled_cube_positions;
use gcce_lab::spin_model::{SpinSite, SpinSystem, GAMMA_ELECTRON};
use nalgebra::Vector3;
use num_complex::Complex64;

fn system(seed: u64) -> SpinSystem {
    let (pos, _) = scaled_cube_positions(seed, 8, 1.0).unwrap();
    let e = |p: Vector3<f64>| SpinSite::new("e", p, 0.5, GAMMA_ELECTRON).unwrap();
    SpinSystem::from_geometry(e(Vector3::zeros()), pos.into_iter().map(e).collect(), Vector3::new(0.0, 0.0, 10.0)).unwrap()
}

fn c(m: &[usize]) -> Cluster {
    Cluster::new(m.to_vec()).unwrap()
}

/// Largest value of the overlapping-whitelist product for spin `p` listed
/// first and `q`, `r` second and third, from raw cluster elements.
fn orange_peak(el: &BTreeMap<Cluster, ElementSeries>, p: usize, q: usize, r: usize) -> f64 {
    let rest: Vec<usize> = (0..8).filter(|k| ![p, q, r].contains(k)).collect();
    let n = el[&Cluster::empty()].len();
    (0..n)
        .map(|t| {
            let v = |m: &[usize]| el[&c(m)].values[t];
            let mut x = v(&[]) * v(&[q]) / v(&[]) * v(&[r]) / v(&[]);
            x *= v(&[p]) / v(&[]);
            for (k, &a) in rest.iter().enumerate() {
                for &b in &rest[k + 1..] {
                    x *= v(&[a, b]);
                }
                x *= v(&[p.min(a), p.max(a)]) / v(&[p]);
            }
            x.re
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let first: u64 = args.get(1).map_or(0, |s| s.parse().unwrap());
    let count: u64 = args.get(2).map_or(10, |s| s.parse().unwrap());
    let t_relax: f64 = args.get(3).map_or(20.0, |s| s.parse().unwrap());
    let t_dephase: f64 = args.get(4).map_or(0.0, |s| s.parse().unwrap());
    let times = uniform_grid(t_relax, 401).unwrap();
    let init = InitialState::new(CentralState::Level(0), BathState::MaximallyMixed);
    let clusters = enumerate_clusters(8, 8, None, None).unwrap();
    let pairs = enumerate_clusters(8, 2, None, None).unwrap();

    for seed in first..first + count {
        let s = system(seed);
        let exact = exact_element(&s, &init, 0, 0, &times).unwrap();
        let tail = exact.len() * 4 / 5;
        let plateau: f64 = exact.values[tail..].iter().map(|z| z.re).sum::<f64>() / (exact.len() - tail) as f64;
        let r = run_cce(&s, &init, 0, 0, &times, &clusters, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let odd: Vec<f64> = [1, 3, 5, 7].iter().map(|m| r.per_order[m].last().re).collect();
        let even_ok = [2, 4, 6].iter().all(|m| r.per_order[m].first_unphysical(-0.001, 1.001).is_some());
        let odd_ok = odd.iter().all(|&f| f < 0.05 && plateau - f >= 0.4);
        let fig4 = plateau > 0.5 && plateau < 0.8 && even_ok && odd_ok;

        let el = CceEngine::new(&s, &init, (0, 0), &times).unwrap().cluster_elements(pairs.clusters()).unwrap();
        let mut best = (f64::NEG_INFINITY, 0, 0, 0);
        for p in 0..8 {
            for q in 0..8 {
                for rr in q + 1..8 {
                    if q == p || rr == p {
                        continue;
                    }
                    let peak = orange_peak(&el, p, q, rr);
                    if peak > best.0 {
                        best = (peak, p, q, rr);
                    }
                }
            }
        }
        print!(
            "seed {seed}: plateau {plateau:.3} odd {:?} even_ok {even_ok} fig4 {fig4} | orange peak {:.4} with order ({}, {}, {})",
            odd.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            best.0,
            best.1,
            best.2,
            best.3
        );

        if t_dephase > 0.0 {
            let t6 = uniform_grid(t_dephase, 201).unwrap();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let coh = InitialState::new(
                CentralState::Amplitudes(vec![Complex64::from(h), Complex64::from(h)]),
                BathState::MaximallyMixed,
            );
            let c4 = enumerate_clusters(8, 4, None, None).unwrap();
            let thermal = exact_element(&s, &coh, 0, 1, &t6).unwrap();
            for dynamics in [ClusterDynamics::Generalized, ClusterDynamics::Conditional] {
                let plan = SamplingPlan {
                    clusters: &c4,
                    orders: &[1, 2, 3, 4],
                    n_samples: 100,
                    seed,
                    dynamics,
                    with_exact: true,
                };
                let res = sampled_cce(&s, &coh, (0, 1), &t6, &plan).unwrap();
                let sampled = res.exact_sampled.unwrap();
                let err = |a: &ElementSeries, b: &ElementSeries| {
                    a.magnitudes().iter().zip(b.magnitudes()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
                };
                let e_s: Vec<String> = (1..=4).map(|m| format!("{:.2e}", err(&res.per_order[&m], &sampled))).collect();
                let e_t: Vec<String> = (1..=4).map(|m| format!("{:.2e}", err(&res.per_order[&m], &thermal))).collect();
                print!(" | {dynamics:?} vs sampled {e_s:?} vs thermal {e_t:?} final|exact| {:.3}", sampled.last().norm());
            }
        }
        println!();
    }
}
