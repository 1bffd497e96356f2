use super::rate::estimate_rate;
use crate::error::{CigaError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub level: u32,
    pub h: f64,
    pub dof_count: usize,
    pub error_l2: Option<f64>,
    pub error_h1_broken: Option<f64>,
    pub error_energy: Option<f64>,
    pub interface_deviation: Option<f64>,
}

/// Error column of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    ErrorL2,
    ErrorH1Broken,
    ErrorEnergy,
    InterfaceDeviation,
}

impl Column {
    pub const ALL: [Column; 4] = [
        Column::ErrorL2,
        Column::ErrorH1Broken,
        Column::ErrorEnergy,
        Column::InterfaceDeviation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::ErrorL2 => "error_l2",
            Column::ErrorH1Broken => "error_h1_broken",
            Column::ErrorEnergy => "error_energy",
            Column::InterfaceDeviation => "interface_deviation",
        }
    }

    pub fn get(self, row: &ReportRow) -> Option<f64> {
        match self {
            Column::ErrorL2 => row.error_l2,
            Column::ErrorH1Broken => row.error_h1_broken,
            Column::ErrorEnergy => row.error_energy,
            Column::InterfaceDeviation => row.interface_deviation,
        }
    }
}

/// Experiment parameters recorded with a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub experiment: String,
    pub case: Option<String>,
    pub p: usize,
    pub s: usize,
    pub a: f64,
    pub compat_mode: String,
    pub rbf: String,
}

impl ExperimentMeta {
    /// File stem, e.g. `poisson_g0_p3_s3`.
    pub fn stem(&self) -> String {
        let mut s = self.experiment.clone();
        if let Some(c) = &self.case {
            s.push('_');
            s.push_str(c);
        }
        if self.experiment != "interp1d" {
            s.push('_');
            s.push_str(&self.compat_mode);
        }
        format!("{s}_p{}_s{}", self.p, self.s)
    }
}

/// Rows of a convergence study plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub meta: ExperimentMeta,
    pub rows: Vec<ReportRow>,
}

/// Number of finest levels used for fitted rates.
pub const RATE_LEVELS: usize = 3;

impl ConvergenceReport {
    /// Slope over the finest `RATE_LEVELS` levels with data in `col`.
    pub fn fitted_rate(&self, col: Column) -> Option<f64> {
        fit_rows(&self.rows, col)
    }

    pub fn column(&self, col: Column) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| col.get(r)).collect()
    }
}

fn fit_rows(rows: &[ReportRow], col: Column) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| col.get(r).map(|e| (r.h, e))).collect();
    if pts.len() < RATE_LEVELS {
        return None;
    }
    let tail = &pts[pts.len() - RATE_LEVELS..];
    let h: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let e: Vec<f64> = tail.iter().map(|p| p.1).collect();
    estimate_rate(&e, &h).ok()
}

/// What a band constrains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandTarget {
    /// Fitted rate of the column.
    Rate(Column),
    /// Largest value of the column over all levels.
    MaxValue(Column),
    /// Column value at the level with this many elements per direction
    /// (h = 1 / n for the 2D benchmarks).
    ValueAt(Column, usize),
}

/// Closed interval an observed quantity must fall into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceBand {
    pub label: String,
    pub target: BandTarget,
    pub lo: f64,
    pub hi: f64,
}

impl AcceptanceBand {
    pub fn new(label: impl Into<String>, target: BandTarget, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            target,
            lo,
            hi,
        }
    }

    pub fn observe(&self, report: &ConvergenceReport) -> Option<f64> {
        match self.target {
            BandTarget::Rate(c) => report.fitted_rate(c),
            BandTarget::MaxValue(c) => {
                let v: Vec<f64> = report.column(c).into_iter().flatten().collect();
                if v.is_empty() {
                    None
                } else {
                    Some(v.into_iter().fold(f64::NEG_INFINITY, f64::max))
                }
            }
            BandTarget::ValueAt(c, n) => report
                .rows
                .iter()
                .find(|r| (r.h * n as f64 - 1.0).abs() < 1e-9)
                .and_then(|r| c.get(r)),
        }
    }

    pub fn passes(&self, report: &ConvergenceReport) -> bool {
        self.observe(report).is_some_and(|v| v >= self.lo && v <= self.hi)
    }
}

/// Writes `<stem>.csv` and `<stem>_summary.txt`; returns the CSV path.
pub fn emit_report(report: &ConvergenceReport, out_dir: &Path, bands: &[AcceptanceBand]) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let stem = report.meta.stem();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    if report.rows.is_empty() {
        w.write_record(["level", "h", "dof_count", "error_l2", "error_h1_broken", "error_energy", "interface_deviation"])?;
    }
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    std::fs::write(out_dir.join(format!("{stem}_summary.txt")), summary(report, bands))?;
    Ok(csv_path)
}

/// Human-readable rates and band verdicts.
pub fn summary(report: &ConvergenceReport, bands: &[AcceptanceBand]) -> String {
    let m = &report.meta;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} case={} p={} s={} a={} compat={} rbf={}",
        m.experiment,
        m.case.as_deref().unwrap_or("-"),
        m.p,
        m.s,
        m.a,
        m.compat_mode,
        m.rbf
    );
    for c in Column::ALL {
        if let Some(r) = report.fitted_rate(c) {
            let _ = writeln!(s, "rate {:<20} {r:.4}", c.name());
        }
    }
    for b in bands {
        let obs = b.observe(report);
        let verdict = if b.passes(report) { "PASS" } else { "FAIL" };
        let obs = obs.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
        let _ = writeln!(s, "{verdict} {} observed {obs} band [{:e}, {:e}]", b.label, b.lo, b.hi);
    }
    s
}

/// Rows of a CSV written by `emit_report`.
pub fn read_report_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
    if rows.windows(2).any(|w| w[1].level <= w[0].level) {
        return Err(CigaError::Config("report rows are not sorted by level".into()));
    }
    Ok(rows)
}

/// Fitted rate recomputed from parsed rows.
pub fn rate_from_rows(rows: &[ReportRow], col: Column) -> Option<f64> {
    fit_rows(rows, col)
}
