//! Event-panel data model, conversions and I/O.

mod convert;
mod csv_io;
mod history;
mod panel;
mod positivity;

pub use convert::{discretize, to_continuous};
pub use csv_io::{infer_wide_k_max, load_long, load_panel, read_long, read_wide, write_long, write_wide};
pub use history::{ContinuousHistory, CovariateStep, HistorySet};
pub use panel::{Cohort, IntervalPanel};
pub use positivity::{positivity_report, PositivityReport, PositivityRow};
