//! Canned studies. Each produces a [`StudyTable`] of checked rows and writes
//! `table.csv`, `summary.json` and `plot.svg` into a directory of its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::output::{csv_line, fmt_f64, json_f64};
use crate::plot::{line_plot_svg, Series};

mod cluster;
mod homogenized;
mod league;
mod perforated;
mod rectangle;
mod triangle;

pub use cluster::{cluster_closed_form, run_cluster_study};
pub use homogenized::{run_homogenized_study, HomogenizedConfig};
pub use league::{run_league_table, LeagueEntry};
pub use perforated::{lattice_hole_count, run_perforated_study};
pub use rectangle::run_rectangle_study;
pub use triangle::{run_triangle_criticality, CriticalityIntegrals};

/// Where a row's expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// A published value or inequality.
    #[serde(rename = "paper")]
    Published,
    /// Computed independently (closed form, series, brute force).
    Derived,
    /// Immediate from symmetry or definitions.
    Trivial,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Published => "paper",
            Provenance::Derived => "derived",
            Provenance::Trivial => "trivial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Pass,
    Fail,
    /// Reported only.
    Info,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Pass => "pass",
            RowStatus::Fail => "fail",
            RowStatus::Info => "info",
        }
    }
}

/// One measured quantity and the check applied to it. Bounds already include
/// the tolerance; `margin` is the distance to the nearest violated side
/// (negative on failure).
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub parameter: String,
    pub quantity: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: f64,
    pub margin: f64,
    pub status: RowStatus,
    pub provenance: Provenance,
    pub note: String,
}

impl StudyRow {
    fn new(parameter: impl ToString, quantity: &str, value: f64, provenance: Provenance) -> Self {
        StudyRow {
            parameter: parameter.to_string(),
            quantity: quantity.into(),
            value,
            lower: None,
            upper: None,
            target: None,
            tolerance: 0.0,
            margin: f64::NAN,
            status: RowStatus::Info,
            provenance,
            note: String::new(),
        }
    }

    /// `lower <= value <= upper`, either side optional.
    pub fn between(
        parameter: impl ToString,
        quantity: &str,
        value: f64,
        lower: Option<f64>,
        upper: Option<f64>,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        let mut row = Self::new(parameter, quantity, value, provenance);
        row.lower = lower;
        row.upper = upper;
        row.tolerance = tolerance;
        let lo = lower.map_or(f64::INFINITY, |l| value - (l - tolerance));
        let hi = upper.map_or(f64::INFINITY, |u| (u + tolerance) - value);
        row.margin = lo.min(hi);
        row.status = if row.margin >= 0.0 {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        };
        row
    }

    pub fn at_most(
        parameter: impl ToString,
        quantity: &str,
        value: f64,
        upper: f64,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        Self::between(
            parameter,
            quantity,
            value,
            None,
            Some(upper),
            tolerance,
            provenance,
        )
    }

    pub fn at_least(
        parameter: impl ToString,
        quantity: &str,
        value: f64,
        lower: f64,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        Self::between(
            parameter,
            quantity,
            value,
            Some(lower),
            None,
            tolerance,
            provenance,
        )
    }

    /// `|value - target| <= rel_tol·|target|`.
    pub fn relative(
        parameter: impl ToString,
        quantity: &str,
        value: f64,
        target: f64,
        rel_tol: f64,
        provenance: Provenance,
    ) -> Self {
        let tol = rel_tol * target.abs();
        let mut row = Self::between(
            parameter,
            quantity,
            value,
            Some(target),
            Some(target),
            tol,
            provenance,
        );
        row.target = Some(target);
        row.lower = None;
        row.upper = None;
        row.note = format!("relative tolerance {rel_tol:e}");
        row
    }

    /// `|value - target| <= abs_tol`.
    pub fn absolute(
        parameter: impl ToString,
        quantity: &str,
        value: f64,
        target: f64,
        abs_tol: f64,
        provenance: Provenance,
    ) -> Self {
        let mut row = Self::between(
            parameter,
            quantity,
            value,
            Some(target),
            Some(target),
            abs_tol,
            provenance,
        );
        row.target = Some(target);
        row.lower = None;
        row.upper = None;
        row
    }

    /// A yes/no property such as monotonicity; `value` is 1 or 0.
    pub fn flag(
        parameter: impl ToString,
        quantity: &str,
        holds: bool,
        provenance: Provenance,
    ) -> Self {
        let mut row = Self::new(
            parameter,
            quantity,
            if holds { 1.0 } else { 0.0 },
            provenance,
        );
        row.target = Some(1.0);
        row.margin = if holds { 0.0 } else { -1.0 };
        row.status = if holds {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        };
        row
    }

    pub fn info(
        parameter: impl ToString,
        quantity: &str,
        value: f64,
        provenance: Provenance,
    ) -> Self {
        Self::new(parameter, quantity, value, provenance)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != RowStatus::Fail
    }
}

/// Data for `plot.svg`.
#[derive(Debug, Clone, Default)]
pub struct StudyPlot {
    pub title: String,
    pub x_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
    pub reference_lines: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct StudyTable {
    pub study: String,
    pub rows: Vec<StudyRow>,
    /// Headline numbers copied into `summary.json`.
    pub values: BTreeMap<String, f64>,
    /// Structured extras for `summary.json` (per-parameter reports).
    pub details: Value,
    pub plot: StudyPlot,
}

impl StudyTable {
    pub fn new(study: &str) -> Self {
        StudyTable {
            study: study.into(),
            rows: Vec::new(),
            values: BTreeMap::new(),
            details: Value::Null,
            plot: StudyPlot::default(),
        }
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(StudyRow::passed)
    }

    pub fn failures(&self) -> Vec<&StudyRow> {
        self.rows.iter().filter(|r| !r.passed()).collect()
    }

    /// First row with this quantity and parameter.
    pub fn row(&self, parameter: &str, quantity: &str) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.parameter == parameter && r.quantity == quantity)
    }

    pub fn to_csv(&self) -> String {
        let header = [
            "study",
            "parameter",
            "quantity",
            "value",
            "lower",
            "upper",
            "target",
            "tolerance",
            "margin",
            "status",
            "provenance",
            "note",
        ];
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut out = csv_line(&header.map(String::from));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&csv_line(&[
                self.study.clone(),
                r.parameter.clone(),
                r.quantity.clone(),
                fmt_f64(r.value),
                opt(r.lower),
                opt(r.upper),
                opt(r.target),
                fmt_f64(r.tolerance),
                fmt_f64(r.margin),
                r.status.as_str().into(),
                r.provenance.as_str().into(),
                r.note.clone(),
            ]));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut values = Map::new();
        for (k, v) in &self.values {
            values.insert(k.clone(), json_f64(*v));
        }
        let failed: Vec<Value> = self
            .failures()
            .iter()
            .map(|r| json!({"parameter": r.parameter, "quantity": r.quantity, "value": json_f64(r.value), "margin": json_f64(r.margin)}))
            .collect();
        json!({
            "study": self.study,
            "passed": self.passed(),
            "rows": self.rows.len(),
            "failed": failed,
            "values": Value::Object(values),
            "details": self.details,
        })
    }

    pub fn to_svg(&self) -> String {
        let series: Vec<Series> = self
            .plot
            .series
            .iter()
            .map(|(label, points)| Series {
                label: label.clone(),
                points: points.clone(),
            })
            .collect();
        line_plot_svg(
            &self.plot.title,
            &self.plot.x_label,
            &series,
            &self.plot.reference_lines,
        )
    }

    /// Writes the three artifacts into `dir/<study>/` and returns that path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let out = dir.join(&self.study);
        fs::create_dir_all(&out)?;
        fs::write(out.join("table.csv"), self.to_csv())?;
        let mut json = serde_json::to_string_pretty(&self.to_json()).expect("json");
        json.push('\n');
        fs::write(out.join("summary.json"), json)?;
        fs::write(out.join("plot.svg"), self.to_svg())?;
        Ok(out)
    }
}

/// Mesh resolution shared by the FEM studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Target edge length of the coarsest mesh.
    pub h: f64,
    /// Number of nested levels (`>= 2`).
    pub levels: usize,
}

impl Resolution {
    pub fn new(h: f64, levels: usize) -> Self {
        Resolution { h, levels }
    }

    pub fn finest_h(&self) -> f64 {
        self.h / 2f64.powi(self.levels as i32 - 1)
    }
}

/// `true` when every value is strictly larger than the one before.
pub fn increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

pub fn decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests;
