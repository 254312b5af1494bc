//! Scenario runner, artifact formats and field studies on top of `magcoat-core`.

// empty or NaN ranges fall through `!(a > b)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod report;
pub mod scenario;
pub mod study;

pub use config::{Motion, ScenarioConfig, SurfaceChoice};
pub use error::{Error, Result};
pub use report::{report, ReportTable};
pub use scenario::{execute, run_scenario, RunArtifacts};
pub use study::{run_field_study, Study};
