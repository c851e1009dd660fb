use super::*;
use crate::geometry::{build_domain, DomainSpec};

#[test]
fn row_margins_and_status() {
    let r = StudyRow::between(
        "p",
        "x",
        0.5,
        Some(0.0),
        Some(1.0),
        0.0,
        Provenance::Trivial,
    );
    assert!(r.passed());
    assert_eq!(r.margin, 0.5);
    let r = StudyRow::at_most("p", "x", 1.0005, 1.0, 1e-3, Provenance::Published);
    assert!(r.passed());
    let r = StudyRow::at_least("p", "x", 0.9, 1.0, 0.0, Provenance::Published);
    assert!(!r.passed());
    assert!(r.margin < 0.0);
    let r = StudyRow::relative("p", "x", 1.02, 1.0, 0.01, Provenance::Derived);
    assert!(!r.passed());
    assert!(StudyRow::info("p", "x", f64::NAN, Provenance::Derived).passed());
    assert!(!StudyRow::flag("p", "x", false, Provenance::Published).passed());
}

#[test]
fn cluster_closed_form_values() {
    assert!((cluster_closed_form(1) - 0.5).abs() < 1e-15);
    assert!((cluster_closed_form(16) - 0.2).abs() < 1e-15);
    assert!((cluster_closed_form(81) - 0.1).abs() < 1e-15);
}

#[test]
fn lattice_count_on_unit_square() {
    let square = build_domain(&DomainSpec::unit_square()).unwrap();
    let r = (-0.05f64 / (1.0 / 64.0)).exp();
    assert!((r - 0.0408).abs() < 1e-4);
    assert_eq!(lattice_hole_count(&square, 0.125, r), 16);
    assert_eq!(lattice_hole_count(&square, 0.1, (-5.0f64).exp()), 25);
    let spec = DomainSpec::Perforated {
        base: Box::new(DomainSpec::unit_square()),
        params: crate::geometry::PerforationParams::new(0.125, 0.05).unwrap(),
    };
    assert_eq!(build_domain(&spec).unwrap().hole_count(), 16);
}

#[test]
fn triangle_criticality_table() {
    let t = run_triangle_criticality().unwrap();
    assert!(t.passed(), "{:?}", t.failures());
    let v = t.values["tau_plus_sigma_over_27"];
    assert!((v + 0.1235944831608947).abs() < 1e-12, "{v}");
    assert!((t.values["sigma"] + 3.318128510613077).abs() < 1e-10);
}

#[test]
fn table_output_is_deterministic() {
    let a = run_triangle_criticality().unwrap();
    let b = run_triangle_criticality().unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let dir = tempfile::tempdir().unwrap();
    let out = a.write(dir.path()).unwrap();
    for f in ["table.csv", "summary.json", "plot.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["study"], "triangle_crit");
    assert!(json["values"]["tau_plus_sigma_over_27"].as_f64().unwrap() < -0.12);
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), a.rows.len() + 1);
}

#[test]
fn homogenized_rejects_unresolved_layer() {
    let cfg = HomogenizedConfig {
        resolution: Resolution::new(0.05, 2),
        ..HomogenizedConfig::default()
    };
    match run_homogenized_study(&cfg) {
        Err(crate::Error::InvalidParameter(msg)) => assert!(msg.contains("0.0025"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn homogenized_small_a_trend() {
    let cfg = HomogenizedConfig {
        a_list: vec![10.0, 100.0],
        resolution: Resolution::new(0.05, 2),
        eigen_resolution: Resolution::new(0.1, 2),
        ..HomogenizedConfig::default()
    };
    let t = run_homogenized_study(&cfg).unwrap();
    assert!(t.passed(), "{:?}", t.failures());
    assert!(t.values["F_hat_10"] > 0.477);
}

#[test]
fn rectangle_study_coarse() {
    let t = run_rectangle_study(&[3.0, 5.0], Resolution::new(0.1, 2)).unwrap();
    assert!(t.passed(), "{:?}", t.failures());
    assert!(run_rectangle_study(&[1.5], Resolution::new(0.1, 2)).is_err());
}

#[test]
fn league_orders_rectangle_last() {
    let entries = vec![
        ("disk".to_string(), DomainSpec::unit_disk(128)),
        ("rectangle5".to_string(), DomainSpec::Rectangle { n: 5.0 }),
    ];
    let t = run_league_table(&entries, Resolution::new(0.1, 2)).unwrap();
    assert!(t.passed(), "{:?}", t.failures());
    assert!(t.values["G_rectangle5"] < 1.25);
    assert!(t.values["G_disk"] > 1.44);
}
