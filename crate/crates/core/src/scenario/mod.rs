//! End-to-end scenario: configuration, the attack/detection/separation
//! timeline, and CSV/SVG output.

pub mod cli;
mod config;
mod engine;
mod export;

pub use config::{load_config, AttackConfig, FilterChoice, NoiseConfig, ScenarioConfig};
pub use engine::{
    check_design, design, preflight, run_scenario, simulate_design, CheckLine, Design, Event, EventKind, SimResult,
};
pub use export::{export_csv, read_residuals_csv, read_series_csv, render_svg};
