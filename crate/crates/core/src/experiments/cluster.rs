use rayon::prelude::*;
use serde_json::json;

use super::{decreasing, Provenance, Resolution, StudyRow, StudyTable};
use crate::error::Result;
use crate::functionals::{functional_report, FunctionalReport};
use crate::geometry::{build_domain, cluster_radius, DomainSpec};

/// Relative agreement required between measured and closed-form `F`.
pub const CLUSTER_TOLERANCE: f64 = 1e-2;

/// `F` of the unit disk plus `n` disjoint disks of radius `r = n^(-1/4)`:
/// `T = (π/8)(1 + n r⁴)`, `M = 1/4`, `|Ω| = π (1 + n r²)`.
pub fn cluster_closed_form(n: usize) -> f64 {
    let r = cluster_radius(n);
    let nf = n as f64;
    0.5 * (1.0 + nf * r.powi(4)) / (1.0 + nf * r * r)
}

/// Disk clusters along which `F → 0`.
pub fn run_cluster_study(
    n_list: &[usize],
    n_segments: usize,
    res: Resolution,
) -> Result<StudyTable> {
    let reports: Vec<FunctionalReport> = n_list
        .par_iter()
        .map(|&n| {
            let spec = DomainSpec::BallCluster {
                n,
                n_segments,
                max_extent: 1e3,
            };
            functional_report(&build_domain(&spec)?, res.h, res.levels)
        })
        .collect::<Result<_>>()?;
    let mut table = StudyTable::new("cluster");
    for (&n, r) in n_list.iter().zip(&reports) {
        let exact = cluster_closed_form(n);
        table.rows.push(StudyRow::relative(
            n,
            "F",
            r.f,
            exact,
            CLUSTER_TOLERANCE,
            Provenance::Derived,
        ));
        table.rows.push(StudyRow::relative(
            n,
            "M",
            r.max_torsion,
            0.25,
            CLUSTER_TOLERANCE,
            Provenance::Derived,
        ));
        table.rows.push(StudyRow::at_most(
            n,
            "F_at_most_one",
            r.f,
            1.0,
            0.0,
            Provenance::Published,
        ));
        table.values.insert(format!("F_{n}"), r.f);
    }
    let fs: Vec<f64> = reports.iter().map(|r| r.f).collect();
    if n_list.len() > 1 && n_list.windows(2).all(|w| w[1] > w[0]) {
        table.rows.push(StudyRow::flag(
            "all",
            "F_decreasing_in_n",
            decreasing(&fs),
            Provenance::Published,
        ));
    }
    table.details = json!({ "resolution": res, "n_segments": n_segments, "reports": reports });
    table.plot.title = "Disk clusters".into();
    table.plot.x_label = "n".into();
    table.plot.series = vec![
        (
            "F measured".into(),
            n_list.iter().map(|&n| n as f64).zip(fs).collect(),
        ),
        (
            "F closed form".into(),
            n_list
                .iter()
                .map(|&n| (n as f64, cluster_closed_form(n)))
                .collect(),
        ),
    ];
    table.plot.reference_lines = vec![("0".into(), 0.0)];
    Ok(table)
}
