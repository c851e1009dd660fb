use std::f64::consts::PI;

use rayon::prelude::*;
use serde_json::json;

use super::{increasing, Provenance, Resolution, StudyRow, StudyTable};
use crate::error::{Error, Result};
use crate::functionals::{functional_report, FunctionalReport};
use crate::geometry::{build_domain, DomainSpec};

/// `M` may exceed `1/8` by this much.
pub const M_TOLERANCE: f64 = 1e-3;
/// Slack on both sides of the `G` window.
pub const G_TOLERANCE: f64 = 1e-3;

/// Rectangles `(-n, n) x (0, 1)`: the convex upper bound for `F` is
/// approached, with the eigenvalue and torsion maximum squeezed between
/// explicit bounds.
pub fn run_rectangle_study(n_list: &[f64], res: Resolution) -> Result<StudyTable> {
    if let Some(n) = n_list.iter().find(|n| !(**n >= 2.0)) {
        return Err(Error::InvalidParameter(format!(
            "rectangle n = {n} (need n >= 2)"
        )));
    }
    let reports: Vec<FunctionalReport> = n_list
        .par_iter()
        .map(|&n| {
            functional_report(
                &build_domain(&DomainSpec::Rectangle { n })?,
                res.h,
                res.levels,
            )
        })
        .collect::<Result<_>>()?;

    let mut table = StudyTable::new("rectangle");
    let pi2 = PI * PI;
    for (&n, r) in n_list.iter().zip(&reports) {
        let p = n;
        table.rows.push(StudyRow::between(
            p,
            "F",
            r.f,
            Some(2.0 / 3.0 - 16.0 / n),
            Some(2.0 / 3.0),
            0.0,
            Provenance::Published,
        ));
        table.rows.push(StudyRow::at_most(
            p,
            "M",
            r.max_torsion,
            0.125,
            M_TOLERANCE,
            Provenance::Published,
        ));
        table.rows.push(StudyRow::at_most(
            p,
            "lambda1",
            r.lambda1,
            pi2 + 1.0 / (n - 2.0 / 3.0),
            0.0,
            Provenance::Published,
        ));
        table.rows.push(StudyRow::relative(
            p,
            "lambda1_exact",
            r.lambda1,
            pi2 * (1.0 + 1.0 / (4.0 * n * n)),
            1e-3,
            Provenance::Derived,
        ));
        table.rows.push(StudyRow::between(
            p,
            "G",
            r.g,
            Some(pi2 / 8.0),
            Some(pi2 / 8.0 + 1.0 / (8.0 * (n - 2.0 / 3.0))),
            G_TOLERANCE,
            Provenance::Published,
        ));
        table.rows.push(StudyRow::info(
            p,
            "G_uncertainty",
            r.g_uncertainty,
            Provenance::Derived,
        ));
    }
    let fs: Vec<f64> = reports.iter().map(|r| r.f).collect();
    let sorted = n_list.windows(2).all(|w| w[1] > w[0]);
    if sorted && n_list.len() > 1 {
        table.rows.push(
            StudyRow::flag(
                "all",
                "F_increasing_in_n",
                increasing(&fs),
                Provenance::Published,
            )
            .with_note("F approaches 2/3 along the sequence"),
        );
    }
    if let Some(last) = reports.last() {
        table.values.insert("F_largest_n".into(), last.f);
        table.values.insert("G_largest_n".into(), last.g);
    }
    table.details = json!({ "resolution": res, "reports": reports });
    table.plot.title = "Rectangles (-n, n) x (0, 1)".into();
    table.plot.x_label = "n".into();
    table.plot.series = vec![
        (
            "F".into(),
            n_list.iter().copied().zip(fs.iter().copied()).collect(),
        ),
        (
            "F lower bound 2/3 - 16/n".into(),
            n_list
                .iter()
                .map(|&n| (n, (2.0 / 3.0 - 16.0 / n).max(0.0)))
                .collect(),
        ),
        (
            "G".into(),
            n_list
                .iter()
                .copied()
                .zip(reports.iter().map(|r| r.g))
                .collect(),
        ),
    ];
    table.plot.reference_lines = vec![("2/3".into(), 2.0 / 3.0), ("pi^2/8".into(), pi2 / 8.0)];
    Ok(table)
}
