use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Mode, ReferenceConfig, Scenario};
use super::output::{format_value, write_series_csv, write_text, Column};
use super::presets;
use crate::cluster::{enumerate_clusters, Cluster, ClusterSet};
use crate::dynamics::{
    exact_with_bath_density, implied_energy_drift, sampled_cce, uniform_grid, CceEngine, ClusterDynamics,
    ElementSeries, ExactPropagator, GuardDiagnostic, InitialState, SamplingPlan,
};
use crate::error::{Error, Result};
use crate::shorttime::{convergence_window, fit_quadratic_coefficient, fit_stretched_exponential, short_time_coefficients};
use crate::spin_model::SpinSystem;

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Scenario after preset expansion and overrides, with every default
/// written out, plus the names of manual settings that were dropped.
pub fn effective_scenario(user: &Scenario, opts: &RunOptions) -> Result<(Scenario, Vec<String>)> {
    let mut ignored = Vec::new();
    let mut s = if user.mode.is_figure() {
        let preset = presets::preset(user.mode)?.materialized();
        let mine = user.materialized();
        let (a, b) = (to_value(&mine), to_value(&preset));
        for key in ["system", "initial_state", "grid", "cce", "sampling"] {
            if a[key] != b[key] {
                ignored.push(key.to_string());
            }
        }
        for key in ["fit_window", "convergence_margin"] {
            if a["output"][key] != b["output"][key] {
                ignored.push(format!("output.{key}"));
            }
        }
        if opts.seed.is_some_and(|seed| seed != preset.sampling.seed) {
            ignored.push("--seed".into());
        }
        let mut s = preset;
        s.output.dir = mine.output.dir;
        s.output.basename = mine.output.basename;
        s
    } else {
        let mut s = user.materialized();
        if let Some(seed) = opts.seed {
            s.sampling.seed = seed;
        }
        s
    };
    if let Some(dir) = &opts.out_dir {
        s.output.dir = dir.display().to_string();
    }
    Ok((s, ignored))
}

fn to_value<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("scenario types serialize")
}

#[derive(Debug, Clone, Serialize)]
pub struct GuardEntry {
    /// Column the held factor fed into, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub time_ms: f64,
    pub cluster: Vec<usize>,
    pub denominator_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceWindowMeta {
    pub q: f64,
    pub alpha_i: f64,
    pub margin: f64,
    pub time_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StretchedFitMeta {
    pub series: String,
    pub time_constant_ms: f64,
    pub exponent: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftMeta {
    pub series: String,
    pub implied_drift: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EnergyMeta {
    /// `max_t |Tr[ρ(t)H] − Tr[ρ(0)H]| / ‖H‖` of the exact run.
    pub exact_residual: f64,
    pub hamiltonian_norm: f64,
    pub implied: Vec<DriftMeta>,
}

/// Descriptive fits and diagnostics that are not simulation results.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Annotations {
    pub note: &'static str,
    pub stretched_exponential: Vec<StretchedFitMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyMeta>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShortTimeRow {
    pub cluster: Vec<usize>,
    pub alpha: f64,
    pub alpha_irr: f64,
    pub beta: f64,
    pub beta_irr: f64,
    pub fit: f64,
    pub fit_relative_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub library: &'static str,
    pub version: &'static str,
    pub mode: &'static str,
    pub seed: u64,
    pub effective_config: Scenario,
    pub ignored_fields: Vec<String>,
    pub columns: Vec<String>,
    pub guard_count: usize,
    pub guard_diagnostics: Vec<GuardEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard_saturation: Option<String>,
    pub convergence_window: Option<ConvergenceWindowMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_window_error: Option<String>,
    pub annotations: Annotations,
}

/// Everything a run produces, before anything is written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub columns: Vec<Column>,
    pub shorttime: Option<Vec<ShortTimeRow>>,
    pub meta: RunMeta,
}

impl RunReport {
    pub fn column(&self, label: &str) -> Option<&ElementSeries> {
        self.columns.iter().find(|c| c.label == label).map(|c| &c.series)
    }
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub coefficients: Option<PathBuf>,
}

struct Context<'a> {
    scenario: &'a Scenario,
    system: SpinSystem,
    init: InitialState,
    times: Vec<f64>,
    element: (usize, usize),
    dynamics: ClusterDynamics,
}

impl Context<'_> {
    fn max_dim(&self) -> usize {
        self.scenario.system.max_dim
    }

    fn check_full_capacity(&self) -> Result<()> {
        let dim = self.system.full_dim().unwrap_or(usize::MAX);
        if dim > self.max_dim() {
            return Err(Error::Capacity { dim, cap: self.max_dim() });
        }
        Ok(())
    }

    fn check_cluster_capacity(&self, clusters: &[Cluster]) -> Result<()> {
        for c in clusters {
            let dim = self
                .system
                .cluster_dims(c)
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .unwrap_or(usize::MAX);
            if dim > self.max_dim() {
                return Err(Error::Capacity { dim, cap: self.max_dim() });
            }
        }
        Ok(())
    }

    fn cluster_set(&self, max_order: usize) -> Result<ClusterSet> {
        let positions: Vec<_> = self.system.bath().iter().map(|b| b.position).collect();
        let cutoff = self.scenario.cce.cutoff;
        let set = enumerate_clusters(
            self.system.n_bath(),
            max_order,
            cutoff.map(|_| positions.as_slice()),
            cutoff,
        )?;
        self.check_cluster_capacity(set.clusters())?;
        Ok(set)
    }

    fn orders(&self) -> Vec<usize> {
        let mut orders = self.scenario.cce.orders.clone();
        orders.sort_unstable();
        orders.dedup();
        orders
    }

    fn engine(&self) -> Result<CceEngine<'_>> {
        Ok(CceEngine::new(&self.system, &self.init, self.element, &self.times)?.with_dynamics(self.dynamics))
    }

    fn propagator(&self) -> Result<ExactPropagator<'_>> {
        self.check_full_capacity()?;
        ExactPropagator::with_capacity(&self.system, self.max_dim())
    }
}

fn entries(diags: &[GuardDiagnostic], series: Option<&str>, sample: Option<usize>) -> Vec<GuardEntry> {
    diags
        .iter()
        .map(|d| GuardEntry {
            series: series.map(str::to_string),
            sample,
            time_ms: d.time,
            cluster: d.cluster.members().to_vec(),
            denominator_abs: d.denominator,
        })
        .collect()
}

/// Names the first cluster held on more than half of the grid, if any.
fn saturated_cluster(entries: &[GuardEntry], n_points: usize) -> Option<String> {
    let mut counts: BTreeMap<(Option<&str>, Option<usize>, &[usize]), usize> = BTreeMap::new();
    for e in entries {
        *counts.entry((e.series.as_deref(), e.sample, &e.cluster)).or_default() += 1;
    }
    counts.into_iter().find(|(_, n)| 2 * n > n_points).map(|((series, sample, cluster), n)| {
        let mut where_ = format!("cluster {cluster:?} held at {n} of {n_points} grid times");
        if let Some(s) = series {
            where_.push_str(&format!(" in `{s}`"));
        }
        if let Some(k) = sample {
            where_.push_str(&format!(" for bath sample {k}"));
        }
        where_
    })
}

fn non_finite_column(columns: &[Column]) -> Option<String> {
    columns.iter().find_map(|c| {
        c.series
            .values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
            .map(|k| format!("series `{}` is not finite at t = {} ms", c.label, c.series.times[k]))
    })
}

fn stretched_fits(columns: &[Column]) -> Vec<StretchedFitMeta> {
    columns
        .iter()
        .filter_map(|c| {
            let s = &c.series;
            let y = if s.is_diagonal() {
                s.real_parts()
            } else {
                let v0 = s.values[0].norm();
                if v0 == 0.0 {
                    return None;
                }
                s.magnitudes().into_iter().map(|m| m / v0).collect()
            };
            fit_stretched_exponential(&s.times, &y).map(|f| StretchedFitMeta {
                series: c.label.clone(),
                time_constant_ms: f.time_constant,
                exponent: f.exponent,
                points: f.points,
            })
        })
        .collect()
}

/// Runs an already effective scenario and collects its outputs in memory.
pub fn compute(scenario: &Scenario, ignored: Vec<String>) -> Result<RunReport> {
    scenario.validate()?;
    let system = scenario.build_system()?;
    let ctx = Context {
        scenario,
        init: scenario.build_initial_state(),
        times: uniform_grid(scenario.grid.t_max_ms, scenario.grid.n_points)?,
        element: scenario.element(),
        dynamics: scenario.cce.dynamics.into(),
        system,
    };
    let mut columns = Vec::new();
    let mut guard = Vec::new();
    let mut energy = None;
    let mut shorttime = None;
    let include_exact = scenario.cce.include_exact;

    match scenario.mode {
        Mode::Exact => {
            let prop = ctx.propagator()?;
            columns.push(Column::new("exact", prop.element(&ctx.init, ctx.element.0, ctx.element.1, &ctx.times)?));
            energy = Some(EnergyMeta {
                exact_residual: prop.energy_residual(&ctx.init, &ctx.times)?,
                hamiltonian_norm: prop.hamiltonian_norm(),
                implied: Vec::new(),
            });
        }
        Mode::Cce | Mode::Figure4 | Mode::Shorttime => {
            let orders = ctx.orders();
            let max_order = orders.last().copied().unwrap_or(0);
            let clusters = ctx.cluster_set(max_order)?;
            let prop = if include_exact { Some(ctx.propagator()?) } else { None };
            if let Some(p) = &prop {
                columns.push(Column::new("exact", p.element(&ctx.init, ctx.element.0, ctx.element.1, &ctx.times)?));
            }
            let engine = ctx.engine()?;
            let result = engine.run(&clusters, &orders)?;
            guard.extend(entries(&result.diagnostics, None, None));
            for (m, series) in &result.per_order {
                columns.push(Column::new(format!("cce_{m}"), series.clone()));
            }
            if let (Some(p), true) = (&prop, ctx.element.0 == ctx.element.1 && ctx.dynamics == ClusterDynamics::Generalized) {
                let exact = &columns[0].series;
                let implied = result
                    .per_order
                    .iter()
                    .map(|(m, s)| {
                        Ok(DriftMeta {
                            series: format!("cce_{m}"),
                            implied_drift: implied_energy_drift(p.levels(), s, exact, p.hamiltonian_norm())?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                energy = Some(EnergyMeta {
                    exact_residual: p.energy_residual(&ctx.init, &ctx.times)?,
                    hamiltonian_norm: p.hamiltonian_norm(),
                    implied,
                });
            }
            if scenario.mode == Mode::Shorttime {
                let k = short_time_coefficients(&ctx.system, &ctx.init, &clusters, ctx.element)?;
                let rows = clusters
                    .clusters()
                    .iter()
                    .map(|c| {
                        let fit = fit_quadratic_coefficient(&result.per_cluster[c].normalized(), scenario.output.fit_window)?;
                        Ok(ShortTimeRow {
                            cluster: c.members().to_vec(),
                            alpha: k.alpha[c],
                            alpha_irr: k.alpha_irr[c],
                            beta: k.beta[c],
                            beta_irr: k.beta_irr[c],
                            fit: fit.coefficient,
                            fit_relative_residual: fit.relative_residual,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                shorttime = Some(rows);
            }
        }
        Mode::CceRestricted | Mode::Figure5 => {
            if include_exact {
                let p = ctx.propagator()?;
                columns.push(Column::new("exact", p.element(&ctx.init, ctx.element.0, ctx.element.1, &ctx.times)?));
            }
            let engine = ctx.engine()?;
            for (label, whitelist) in scenario.whitelist_clusters()? {
                ctx.check_cluster_capacity(&whitelist)?;
                let r = engine.run_restricted(&whitelist)?;
                guard.extend(entries(&r.diagnostics, Some(&label), None));
                columns.push(Column::new(label, r.product));
            }
        }
        Mode::Dephasing | Mode::Figure6 => {
            let orders = ctx.orders();
            let clusters = ctx.cluster_set(orders.last().copied().unwrap_or(0))?;
            let sampled_reference = include_exact && scenario.sampling.reference == ReferenceConfig::Sampled;
            let thermal_reference =
                include_exact && (scenario.mode == Mode::Figure6 || scenario.sampling.reference == ReferenceConfig::Thermal);
            if include_exact {
                ctx.check_full_capacity()?;
            }
            let plan = SamplingPlan {
                clusters: &clusters,
                orders: &orders,
                n_samples: scenario.sampling.samples,
                seed: scenario.sampling.seed,
                dynamics: ctx.dynamics,
                with_exact: sampled_reference,
            };
            let result = sampled_cce(&ctx.system, &ctx.init, ctx.element, &ctx.times, &plan)?;
            for (k, d) in &result.diagnostics {
                guard.extend(entries(std::slice::from_ref(d), None, Some(*k)));
            }
            let thermal = if thermal_reference {
                let rho_bath = ctx.init.bath_density(&ctx.system, &ctx.system.all_bath());
                Some(exact_with_bath_density(&ctx.system, &ctx.init, ctx.element, &ctx.times, &rho_bath, ctx.dynamics)?)
            } else {
                None
            };
            match (result.exact_sampled, thermal) {
                (Some(sampled), thermal) => {
                    columns.push(Column::new("exact", sampled));
                    if let Some(t) = thermal {
                        columns.push(Column::new("exact_thermal", t));
                    }
                }
                (None, Some(t)) => columns.push(Column::new("exact", t)),
                (None, None) => {}
            }
            for (m, series) in result.per_order {
                columns.push(Column::new(format!("cce_{m}"), series));
            }
        }
    }

    let n_points = ctx.times.len();
    let saturation = non_finite_column(&columns).or_else(|| saturated_cluster(&guard, n_points));
    let (window, window_error) = match convergence_window(&ctx.system, scenario.output.convergence_margin) {
        Ok(w) => (
            Some(ConvergenceWindowMeta {
                q: w.q,
                alpha_i: w.alpha_i,
                margin: w.margin,
                time_ms: w.time,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let meta = RunMeta {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: scenario.mode.name(),
        seed: scenario.sampling.seed,
        effective_config: scenario.clone(),
        ignored_fields: ignored,
        columns: columns.iter().map(|c| c.label.clone()).collect(),
        guard_count: guard.len(),
        guard_diagnostics: guard,
        guard_saturation: saturation,
        convergence_window: window,
        convergence_window_error: window_error,
        annotations: Annotations {
            note: "descriptive fits of the output curves; not predictions",
            stretched_exponential: stretched_fits(&columns),
            energy,
        },
    };
    Ok(RunReport {
        columns,
        shorttime,
        meta,
    })
}

fn render_shorttime(rows: &[ShortTimeRow]) -> String {
    let mut out = String::from("cluster,alpha,alpha_irr,beta,beta_irr,fit,fit_relative_residual\n");
    for r in rows {
        let label = r.cluster.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ");
        let values = [r.alpha, r.alpha_irr, r.beta, r.beta_irr, r.fit, r.fit_relative_residual].map(format_value);
        out.push_str(&format!("{label},{}\n", values.join(",")));
    }
    out
}

/// Writes the series CSV, the metadata sidecar and, for short-time runs,
/// the coefficient table into `dir`.
pub fn write_report(report: &RunReport, dir: &Path, basename: &str) -> Result<RunFiles> {
    let csv = dir.join(format!("{basename}.csv"));
    let meta = dir.join(format!("{basename}.meta.json"));
    if report.columns.is_empty() {
        return Err(Error::invalid("the run produced no series (enable cce.include_exact or add orders)"));
    }
    write_series_csv(&report.columns, &csv)?;
    let mut text = serde_json::to_string_pretty(&report.meta).expect("metadata serializes");
    text.push('\n');
    write_text(&meta, &text)?;
    let coefficients = match &report.shorttime {
        Some(rows) => {
            let path = dir.join(format!("{basename}.coefficients.csv"));
            write_text(&path, &render_shorttime(rows))?;
            Some(path)
        }
        None => None,
    };
    Ok(RunFiles { csv, meta, coefficients })
}

/// Expands, runs and writes a scenario. Outputs are written even when the
/// guard saturates; that case is then reported as an error.
pub fn run_scenario(user: &Scenario, opts: &RunOptions) -> Result<(RunReport, RunFiles)> {
    let (scenario, ignored) = effective_scenario(user, opts)?;
    let report = compute(&scenario, ignored)?;
    let files = write_report(&report, Path::new(&scenario.output.dir), &scenario.basename())?;
    if let Some(why) = &report.meta.guard_saturation {
        return Err(Error::GuardSaturation(format!("{why} (outputs written to {})", files.csv.display())));
    }
    Ok((report, files))
}
