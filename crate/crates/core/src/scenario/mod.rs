//! Scenario files, committed presets and the run pipeline behind the CLI.

mod config;
mod output;
mod presets;
mod run;

pub use config::{
    BathConfig, CceConfig, CentralConfig, CouplingOverride, DynamicsConfig, GammaConfig, GridConfig,
    HyperfineOverride, InitialStateConfig, Mode, OutputConfig, ReferenceConfig, SamplingConfig, Scenario, SiteConfig,
    SystemConfig, WhitelistConfig,
};
pub use output::{format_value, render_series_csv, write_series_csv, Column};
pub use presets::{preset, preset_by_name, preset_text, PRESET_NAMES};
pub use run::{
    compute, effective_scenario, run_scenario, write_report, Annotations, ConvergenceWindowMeta, DriftMeta, EnergyMeta,
    GuardEntry, RunFiles, RunMeta, RunOptions, RunReport, ShortTimeRow, StretchedFitMeta,
};
