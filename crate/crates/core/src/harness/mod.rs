//! Property suites and studies, each producing a [`StudyRecord`], and the
//! report writer.

pub mod ap;
pub mod error_vs_loss;
pub mod operators;
pub mod record;
pub mod report;

pub use ap::run_ap_study;
pub use error_vs_loss::run_error_vs_loss_study;
pub use operators::{run_operator_suite, tail_mass};
pub use record::{PlotKind, PlotSpec, Status, StudyRecord, Table, Verdict};
pub use report::emit_report;
