use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cluster::Cluster;
use crate::dynamics::{BathState, CentralState, ClusterDynamics, InitialState};
use crate::error::{Error, Result};
use crate::spin_model::{SpinSite, SpinSystem, DEFAULT_MAX_DIM, GAMMA_ELECTRON};

/// A complete run description, as read from a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemConfig,
    pub initial_state: InitialStateConfig,
    pub grid: GridConfig,
    pub mode: Mode,
    #[serde(default)]
    pub cce: CceConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Cce,
    CceRestricted,
    Dephasing,
    Shorttime,
    Figure4,
    Figure5,
    Figure6,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Cce => "cce",
            Mode::CceRestricted => "cce_restricted",
            Mode::Dephasing => "dephasing",
            Mode::Shorttime => "shorttime",
            Mode::Figure4 => "figure4",
            Mode::Figure5 => "figure5",
            Mode::Figure6 => "figure6",
        }
    }

    pub fn is_figure(self) -> bool {
        matches!(self, Mode::Figure4 | Mode::Figure5 | Mode::Figure6)
    }

    fn default_element(self) -> [usize; 2] {
        match self {
            Mode::Dephasing | Mode::Figure6 => [0, 1],
            _ => [0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub central: SiteConfig,
    #[serde(default)]
    pub bath: Vec<SiteConfig>,
    #[serde(rename = "field_mT", default)]
    pub field_mt: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyperfine_overrides: Vec<HyperfineOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling_overrides: Vec<CouplingOverride>,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(default)]
    pub label: String,
    #[serde(rename = "position_A")]
    pub position: [f64; 3],
    pub spin: f64,
    pub gamma: GammaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_tensor: Option<[[f64; 3]; 3]>,
}

/// Gyromagnetic ratio in rad/(ms·mT): a scalar, a full tensor, or the
/// name `"electron"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaConfig {
    Scalar(f64),
    Tensor([[f64; 3]; 3]),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineOverride {
    pub index: usize,
    pub tensor: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingOverride {
    pub i: usize,
    pub j: usize,
    pub tensor: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub central: CentralConfig,
    pub bath: BathConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CentralConfig {
    Level(usize),
    /// `[re, im]` pairs over the central levels.
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    MaximallyMixed,
    Thermal {
        #[serde(rename = "temperature_K")]
        temperature_k: f64,
    },
    Product(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_max_ms: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsConfig {
    #[default]
    Generalized,
    Conditional,
}

impl From<DynamicsConfig> for ClusterDynamics {
    fn from(d: DynamicsConfig) -> Self {
        match d {
            DynamicsConfig::Generalized => ClusterDynamics::Generalized,
            DynamicsConfig::Conditional => ClusterDynamics::Conditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitelistConfig {
    pub label: String,
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CceConfig {
    #[serde(default)]
    pub orders: Vec<usize>,
    /// Central levels `(i, j)` of the tracked element.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<[usize; 2]>,
    #[serde(rename = "cutoff_A", default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub whitelists: Vec<WhitelistConfig>,
    #[serde(default = "yes")]
    pub include_exact: bool,
}

fn yes() -> bool {
    true
}

impl Default for CceConfig {
    fn default() -> Self {
        CceConfig {
            orders: Vec::new(),
            element: None,
            cutoff: None,
            dynamics: DynamicsConfig::default(),
            whitelists: Vec::new(),
            include_exact: true,
        }
    }
}

/// Which exact series the averaged expansion is labelled against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceConfig {
    /// Exact dynamics averaged over the same sampled bath states.
    #[default]
    Sampled,
    /// Exact dynamics of the bath density itself.
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: ReferenceConfig,
}

fn default_samples() -> usize {
    100
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            samples: default_samples(),
            seed: 0,
            reference: ReferenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// File stem; defaults to the mode name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basename: Option<String>,
    /// Initial grid fraction used by short-time fits.
    #[serde(default = "default_window")]
    pub fit_window: f64,
    /// Dimensionless margin of the convergence-window estimate.
    #[serde(default = "default_margin")]
    pub convergence_margin: f64,
}

fn default_dir() -> String {
    ".".into()
}

fn default_window() -> f64 {
    0.05
}

fn default_margin() -> f64 {
    0.1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            basename: None,
            fit_window: default_window(),
            convergence_margin: default_margin(),
        }
    }
}

fn matrix(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| m[r][c])
}

fn vector(v: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn field_err(field: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let field = field.into();
    move |e| match e {
        Error::Validation { .. } => e,
        other => Error::validation(field, other.to_string()),
    }
}

impl SiteConfig {
    fn gamma_tensor(&self, field: &str) -> Result<Matrix3<f64>> {
        match &self.gamma {
            GammaConfig::Scalar(g) => Ok(Matrix3::identity() * *g),
            GammaConfig::Tensor(t) => Ok(matrix(t)),
            GammaConfig::Named(name) if name == "electron" => Ok(Matrix3::identity() * GAMMA_ELECTRON),
            GammaConfig::Named(name) => Err(Error::validation(
                format!("{field}.gamma"),
                format!("unknown gyromagnetic ratio name `{name}` (expected a number, a 3x3 tensor or \"electron\")"),
            )),
        }
    }

    fn to_site(&self, field: &str) -> Result<SpinSite> {
        let gamma = self.gamma_tensor(field)?;
        let self_tensor = self.self_tensor.as_ref().map(matrix).unwrap_or_else(Matrix3::zeros);
        SpinSite::with_tensors(self.label.clone(), vector(&self.position), self.spin, gamma, self_tensor)
            .map_err(field_err(field))
    }
}

impl Scenario {
    /// Reads and validates a scenario file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|source| Error::Parse {
            path: "<inline>".into(),
            source,
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn element(&self) -> (usize, usize) {
        let [i, j] = self.cce.element.unwrap_or_else(|| self.mode.default_element());
        (i, j)
    }

    pub fn basename(&self) -> String {
        self.output.basename.clone().unwrap_or_else(|| self.mode.name().to_string())
    }

    /// Copy with every default written out.
    pub fn materialized(&self) -> Self {
        let mut s = self.clone();
        let [i, j] = self.cce.element.unwrap_or_else(|| self.mode.default_element());
        s.cce.element = Some([i, j]);
        s.output.basename = Some(self.basename());
        s
    }

    pub fn build_system(&self) -> Result<SpinSystem> {
        let sys = &self.system;
        let central = sys.central.to_site("system.central")?;
        let bath = sys
            .bath
            .iter()
            .enumerate()
            .map(|(k, b)| b.to_site(&format!("system.bath[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let mut system =
            SpinSystem::from_geometry(central, bath, vector(&sys.field_mt)).map_err(field_err("system.bath"))?;
        for (k, o) in sys.hyperfine_overrides.iter().enumerate() {
            system
                .set_hyperfine(o.index, matrix(&o.tensor))
                .map_err(field_err(format!("system.hyperfine_overrides[{k}]")))?;
        }
        for (k, o) in sys.coupling_overrides.iter().enumerate() {
            system
                .set_coupling(o.i, o.j, matrix(&o.tensor))
                .map_err(field_err(format!("system.coupling_overrides[{k}]")))?;
        }
        Ok(system)
    }

    pub fn build_initial_state(&self) -> InitialState {
        let central = match &self.initial_state.central {
            CentralConfig::Level(k) => CentralState::Level(*k),
            CentralConfig::Amplitudes(a) => {
                CentralState::Amplitudes(a.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
            }
        };
        let bath = match &self.initial_state.bath {
            BathConfig::MaximallyMixed => BathState::MaximallyMixed,
            BathConfig::Thermal { temperature_k } => BathState::Thermal {
                temperature_k: *temperature_k,
            },
            BathConfig::Product(levels) => BathState::Product(levels.clone()),
        };
        InitialState::new(central, bath)
    }

    pub fn whitelist_clusters(&self) -> Result<Vec<(String, Vec<Cluster>)>> {
        self.cce
            .whitelists
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let clusters = w
                    .clusters
                    .iter()
                    .enumerate()
                    .map(|(c, m)| {
                        Cluster::new(m.clone())
                            .map_err(|e| Error::validation(format!("cce.whitelists[{k}].clusters[{c}]"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((w.label.clone(), clusters))
            })
            .collect()
    }

    /// Checks every field against its constraints; the first violation is
    /// reported with the field path.
    pub fn validate(&self) -> Result<()> {
        let grid = &self.grid;
        if !(grid.t_max_ms.is_finite() && grid.t_max_ms > 0.0) {
            return Err(Error::validation("grid.t_max_ms", "must be positive and finite"));
        }
        if grid.n_points < 2 {
            return Err(Error::validation("grid.n_points", "must be at least 2"));
        }
        if self.system.field_mt.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("system.field_mT", "must be finite"));
        }
        if self.system.max_dim == 0 {
            return Err(Error::validation("system.max_dim", "must be positive"));
        }
        let system = self.build_system()?;
        let n = system.n_bath();
        self.build_initial_state()
            .validate(&system)
            .map_err(field_err("initial_state"))?;

        let d = system.central().dim();
        let (i, j) = self.element();
        if i >= d || j >= d {
            return Err(Error::validation(
                "cce.element",
                format!("levels ({i}, {j}) out of range for a {d}-level central spin"),
            ));
        }
        if let Some(&m) = self.cce.orders.iter().find(|&&m| m > n) {
            return Err(Error::validation(
                "cce.orders",
                format!("order {m} exceeds the {n} bath spins"),
            ));
        }
        if let Some(c) = self.cce.cutoff {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::validation("cce.cutoff_A", "must be positive and finite"));
            }
        }
        let needs_orders = matches!(self.mode, Mode::Cce | Mode::Dephasing | Mode::Shorttime);
        if needs_orders && self.cce.orders.is_empty() {
            return Err(Error::validation(
                "cce.orders",
                format!("mode `{}` needs at least one order", self.mode.name()),
            ));
        }
        if matches!(self.mode, Mode::Dephasing | Mode::Figure6) && self.sampling.samples == 0 {
            return Err(Error::validation("sampling.samples", "must be at least 1"));
        }
        if self.mode == Mode::CceRestricted && self.cce.whitelists.is_empty() {
            return Err(Error::validation(
                "cce.whitelists",
                "mode `cce_restricted` needs at least one whitelist",
            ));
        }
        let mut labels = BTreeSet::new();
        for (k, (label, clusters)) in self.whitelist_clusters()?.into_iter().enumerate() {
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::validation(
                    format!("cce.whitelists[{k}].label"),
                    "must be non-empty and use only ASCII letters, digits and underscores",
                ));
            }
            if !labels.insert(label.clone()) || label == "exact" {
                return Err(Error::validation(
                    format!("cce.whitelists[{k}].label"),
                    format!("label `{label}` is used twice"),
                ));
            }
            if let Some(c) = clusters.iter().find(|c| c.members().iter().any(|&m| m >= n)) {
                return Err(Error::validation(
                    format!("cce.whitelists[{k}].clusters"),
                    format!("cluster {c} names a bath spin beyond the {n} configured"),
                ));
            }
        }
        let out = &self.output;
        if !(out.fit_window > 0.0 && out.fit_window <= 1.0) {
            return Err(Error::validation("output.fit_window", "must lie in (0, 1]"));
        }
        let fit_points = (out.fit_window * (grid.n_points - 1) as f64).floor() as usize + 1;
        if self.mode == Mode::Shorttime && fit_points < 8 {
            return Err(Error::validation(
                "output.fit_window",
                format!("covers {fit_points} grid points; short-time fits need at least 8"),
            ));
        }
        if !(out.convergence_margin > 0.0 && out.convergence_margin.is_finite()) {
            return Err(Error::validation("output.convergence_margin", "must be positive"));
        }
        if let Some(b) = &out.basename {
            if b.is_empty() || b.contains(['/', '\\']) {
                return Err(Error::validation("output.basename", "must be a plain, non-empty file stem"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"central": {"position_A": [0, 0, 0], "spin": 0.5, "gamma": "electron"}},
        "initial_state": {"central": {"level": 0}, "bath": "maximally_mixed"},
        "grid": {"t_max_ms": 1.0, "n_points": 11},
        "mode": "exact"
    }"#;

    fn with_bath(n: usize, extra: &str) -> String {
        let bath: Vec<String> = (0..n)
            .map(|k| format!(r#"{{"position_A": [{}, 3, 1], "spin": 0.5, "gamma": "electron"}}"#, 10 * (k + 1)))
            .collect();
        format!(
            r#"{{
            "system": {{"central": {{"position_A": [0, 0, 0], "spin": 0.5, "gamma": "electron"}},
                        "bath": [{}], "field_mT": [0, 0, 10]}},
            "initial_state": {{"central": {{"level": 0}}, "bath": "maximally_mixed"}},
            "grid": {{"t_max_ms": 1.0, "n_points": 11}},
            {extra}
        }}"#,
            bath.join(",")
        )
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Validation { field, .. } => field,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.sampling.samples, 100);
        assert_eq!(s.output.dir, ".");
        assert!(s.cce.include_exact);
        let m = s.materialized();
        assert_eq!(m.cce.element, Some([0, 0]));
        assert_eq!(m.output.basename.as_deref(), Some("exact"));
        let sys = s.build_system().unwrap();
        assert_eq!(sys.n_bath(), 0);
        assert_eq!(sys.central().gamma[(0, 0)], GAMMA_ELECTRON);
    }

    #[test]
    fn orders_beyond_the_bath_are_rejected() {
        let text = with_bath(8, r#""mode": "cce", "cce": {"orders": [9]}"#);
        assert_eq!(field_of(Scenario::from_json(&text).unwrap_err()), "cce.orders");
        let ok = with_bath(8, r#""mode": "cce", "cce": {"orders": [8]}"#);
        assert!(Scenario::from_json(&ok).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace(r#""mode": "exact""#, r#""mode": "exact", "colour": "blue""#);
        assert!(matches!(Scenario::from_json(&text), Err(Error::Parse { .. })));
        let nested = MINIMAL.replace(r#""n_points": 11"#, r#""n_points": 11, "dt": 0.1"#);
        assert!(matches!(Scenario::from_json(&nested), Err(Error::Parse { .. })));
    }

    #[test]
    fn field_paths_are_named() {
        let bad_grid = MINIMAL.replace(r#""n_points": 11"#, r#""n_points": 1"#);
        assert_eq!(field_of(Scenario::from_json(&bad_grid).unwrap_err()), "grid.n_points");
        let bad_spin = MINIMAL.replace(r#""spin": 0.5"#, r#""spin": 0.7"#);
        assert_eq!(field_of(Scenario::from_json(&bad_spin).unwrap_err()), "system.central");
        let bad_gamma = MINIMAL.replace(r#""gamma": "electron""#, r#""gamma": "proton""#);
        assert_eq!(field_of(Scenario::from_json(&bad_gamma).unwrap_err()), "system.central.gamma");
        let bad_level = MINIMAL.replace(r#"{"level": 0}"#, r#"{"level": 2}"#);
        assert_eq!(field_of(Scenario::from_json(&bad_level).unwrap_err()), "initial_state");
        let no_orders = with_bath(2, r#""mode": "cce""#);
        assert_eq!(field_of(Scenario::from_json(&no_orders).unwrap_err()), "cce.orders");
        let dup = with_bath(
            3,
            r#""mode": "cce_restricted", "cce": {"whitelists": [
                {"label": "a", "clusters": [[]]}, {"label": "a", "clusters": [[0]]}]}"#,
        );
        assert_eq!(field_of(Scenario::from_json(&dup).unwrap_err()), "cce.whitelists[1].label");
        let outside = with_bath(3, r#""mode": "cce_restricted", "cce": {"whitelists": [{"label": "a", "clusters": [[0, 5]]}]}"#);
        assert_eq!(field_of(Scenario::from_json(&outside).unwrap_err()), "cce.whitelists[0].clusters");
    }

    #[test]
    fn coincident_sites_are_a_validation_error() {
        let text = with_bath(2, r#""mode": "exact""#).replace("[20, 3, 1]", "[10, 3, 1]");
        assert_eq!(field_of(Scenario::from_json(&text).unwrap_err()), "system.bath");
    }

    #[test]
    fn amplitudes_and_thermal_states_parse() {
        let text = MINIMAL
            .replace(r#"{"level": 0}"#, r#"{"amplitudes": [[0.6, 0], [0, 0.8]]}"#)
            .replace(r#""maximally_mixed""#, r#"{"thermal": {"temperature_K": 4.2}}"#);
        let s = Scenario::from_json(&text).unwrap();
        let init = s.build_initial_state();
        assert_eq!(init.bath, BathState::Thermal { temperature_k: 4.2 });
        assert_eq!(
            init.central,
            CentralState::Amplitudes(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)])
        );
    }

    #[test]
    fn round_trips_through_json() {
        let s = Scenario::from_json(&with_bath(3, r#""mode": "dephasing", "cce": {"orders": [1, 2], "dynamics": "conditional"}"#))
            .unwrap()
            .materialized();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
        assert_eq!(s.element(), (0, 1));
    }
}
