use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Provenance, Resolution, StudyRow, StudyTable};
use crate::error::Result;
use crate::functionals::functional_report;
use crate::geometry::{build_domain, DomainSpec};

/// A gap between neighbours counts as resolved when it exceeds this many
/// times the larger of the two uncertainties.
pub const GAP_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Serialize)]
pub struct LeagueEntry {
    pub label: String,
    pub g: f64,
    /// Difference of the last two per-level values.
    pub uncertainty: f64,
    pub lambda1: f64,
    pub max_torsion: f64,
    pub f: f64,
}

/// `G` for each labelled domain, sorted from largest to smallest, with a check
/// that neighbouring values are separated beyond their uncertainty.
pub fn run_league_table(domains: &[(String, DomainSpec)], res: Resolution) -> Result<StudyTable> {
    let mut entries: Vec<LeagueEntry> = domains
        .par_iter()
        .map(|(label, spec)| {
            let r = functional_report(&build_domain(spec)?, res.h, res.levels)?;
            Ok(LeagueEntry {
                label: label.clone(),
                g: r.g,
                uncertainty: r.g_uncertainty,
                lambda1: r.lambda1,
                max_torsion: r.max_torsion,
                f: r.f,
            })
        })
        .collect::<Result<_>>()?;
    let g_of = |kind: fn(&DomainSpec) -> bool| {
        domains
            .iter()
            .zip(&entries)
            .find(|((_, s), _)| kind(s))
            .map(|(_, e)| e.g)
    };
    let triangle = g_of(|s| matches!(s, DomainSpec::EquilateralTriangle { .. }));
    let disk = g_of(|s| {
        matches!(s, DomainSpec::Disk { .. })
            || matches!(s, DomainSpec::Ellipse { a, b, .. } if a == b)
    });
    // stable sort keeps the input order for ties
    entries.sort_by(|a, b| b.g.total_cmp(&a.g));

    let mut t = StudyTable::new("league");
    for (rank, e) in entries.iter().enumerate() {
        t.rows.push(
            StudyRow::info(&e.label, "G", e.g, Provenance::Derived)
                .with_note(format!("rank {}", rank + 1)),
        );
        t.rows.push(StudyRow::info(
            &e.label,
            "G_uncertainty",
            e.uncertainty,
            Provenance::Derived,
        ));
        t.values.insert(format!("G_{}", e.label), e.g);
    }
    for w in entries.windows(2) {
        let gap = w[0].g - w[1].g;
        let unc = w[0].uncertainty.max(w[1].uncertainty);
        t.rows.push(
            StudyRow::at_least(
                format!("{}>{}", w[0].label, w[1].label),
                "gap_over_uncertainty",
                if unc > 0.0 { gap / unc } else { f64::INFINITY },
                GAP_FACTOR,
                0.0,
                Provenance::Derived,
            )
            .with_note(format!("gap {gap:.6e}, uncertainty {unc:.3e}")),
        );
    }
    if let (Some(tri), Some(disk)) = (triangle, disk) {
        t.rows.push(StudyRow::flag(
            "triangle>disk",
            "G_triangle_exceeds_disk",
            tri > disk,
            Provenance::Published,
        ));
    }
    t.details = json!({ "resolution": res, "entries": entries });
    t.plot.title = "G league table".into();
    t.plot.x_label = "rank".into();
    t.plot.series = vec![(
        "G".into(),
        entries
            .iter()
            .enumerate()
            .map(|(i, e)| ((i + 1) as f64, e.g))
            .collect(),
    )];
    t.plot.reference_lines = vec![
        (
            "4 pi^2/27".into(),
            4.0 * std::f64::consts::PI.powi(2) / 27.0,
        ),
        ("pi^2/8".into(), std::f64::consts::PI.powi(2) / 8.0),
    ];
    Ok(t)
}
