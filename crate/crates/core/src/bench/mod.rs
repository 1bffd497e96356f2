//! Convergence experiments, rate fitting and CSV reports.

mod experiments;
mod rate;
mod report;

pub use experiments::{
    acceptance_bands, run_elasticity, run_interp1d, run_interp2d, run_poisson, ExperimentConfig, Interp1dCase,
    PLATE_MATERIAL,
};
pub use rate::estimate_rate;
pub use report::{
    emit_report, rate_from_rows, read_report_rows, summary, AcceptanceBand, BandTarget, Column,
    ConvergenceReport, ExperimentMeta, ReportRow, RATE_LEVELS,
};
