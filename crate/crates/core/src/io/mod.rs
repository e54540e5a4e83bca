//! Configuration parsing and result serialization (CSV, JSON, SVG).

pub mod config;
pub mod report;
pub mod svg;
pub mod table;

pub use config::{parse_config, Config, DeploymentKind};
pub use report::{emit_instance_json, read_instance_json, InstanceReport, Triplet};
pub use svg::{emit_plot, render_plot};
pub use table::{emit_sweep_csv, read_sweep_csv, write_sweep_csv, SWEEP_HEADER};
