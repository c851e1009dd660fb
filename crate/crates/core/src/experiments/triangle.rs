use std::f64::consts::PI;

use serde::Serialize;
use serde_json::json;

use super::{Provenance, StudyRow, StudyTable};
use crate::error::Result;
use crate::quadrature::integrate;

/// Absolute tolerance handed to the quadrature.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// Below this distance from `x = 1/2` the weight is evaluated in the
/// cancelled form.
const CANCEL_BAND: f64 = 0.05;

/// Integrals deciding whether the equilateral triangle satisfies the
/// optimality condition along the test deformations `Re z^6`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalityIntegrals {
    pub i0: f64,
    pub i2: f64,
    pub i4: f64,
    pub sigma: f64,
    /// Direct quadrature of `P · w`.
    pub tau: f64,
    /// `I₄ − I₂ − (7/48) I₀ − σ/27`.
    pub tau_factored: f64,
    pub tau_plus_sigma_over_27: f64,
    /// Largest `|P − ((x² − 1/4)(x⁴ − x² − 7/48) − 1/27)|` on a sample grid.
    pub factorization_residual: f64,
    pub quadrature_error: f64,
}

fn bump(x: f64) -> f64 {
    let c = 1.0 + (2.0 * PI * x).cos();
    c * c
}

/// `(1 + cos 2πx)² / (x² − 1/4)`; with `e = 1/2 − x` this is
/// `−4 sin⁴(πe) / (e (1 − e))`, which stays finite at `x = 1/2`.
pub fn singular_weight(x: f64) -> f64 {
    let e = 0.5 - x;
    if e.abs() < CANCEL_BAND {
        if e == 0.0 {
            return 0.0;
        }
        let s = (PI * e).sin();
        -4.0 * s.powi(4) / (e * (1.0 - e))
    } else {
        bump(x) / (x * x - 0.25)
    }
}

pub fn p_polynomial(x: f64) -> f64 {
    let x2 = x * x;
    ((x2 - 1.25) * x2 + 5.0 / 48.0) * x2 - 1.0 / 1728.0
}

fn p_factored(x: f64) -> f64 {
    let x2 = x * x;
    (x2 - 0.25) * (x2 * x2 - x2 - 7.0 / 48.0) - 1.0 / 27.0
}

pub fn i0_exact() -> f64 {
    0.75
}

pub fn i2_exact() -> f64 {
    1.0 / 16.0 - 15.0 / (32.0 * PI * PI)
}

pub fn i4_exact() -> f64 {
    3.0 / 320.0 - 15.0 / (64.0 * PI * PI) + 189.0 / (128.0 * PI.powi(4))
}

pub fn tau_plus_sigma_over_27_exact() -> f64 {
    -13.0 / 80.0 + 15.0 / (64.0 * PI * PI) + 189.0 / (128.0 * PI.powi(4))
}

pub fn criticality_integrals() -> Result<CriticalityIntegrals> {
    let q0 = integrate(bump, 0.0, 0.5, QUADRATURE_TOL)?;
    let q2 = integrate(|x| x * x * bump(x), 0.0, 0.5, QUADRATURE_TOL)?;
    let q4 = integrate(|x| x.powi(4) * bump(x), 0.0, 0.5, QUADRATURE_TOL)?;
    let qs = integrate(singular_weight, 0.0, 0.5, QUADRATURE_TOL)?;
    let qt = integrate(
        |x| p_polynomial(x) * singular_weight(x),
        0.0,
        0.5,
        QUADRATURE_TOL,
    )?;
    let factorization_residual = (0..=1000)
        .map(|k| {
            let x = k as f64 / 1000.0;
            (p_polynomial(x) - p_factored(x)).abs()
        })
        .fold(0.0, f64::max);
    let tau_factored = q4.value - q2.value - 7.0 / 48.0 * q0.value - qs.value / 27.0;
    Ok(CriticalityIntegrals {
        i0: q0.value,
        i2: q2.value,
        i4: q4.value,
        sigma: qs.value,
        tau: qt.value,
        tau_factored,
        tau_plus_sigma_over_27: qt.value + qs.value / 27.0,
        factorization_residual,
        quadrature_error: [q0, q2, q4, qs, qt]
            .iter()
            .map(|q| q.error)
            .fold(0.0, f64::max),
    })
}

/// Pure quadrature; no meshes involved.
pub fn run_triangle_criticality() -> Result<StudyTable> {
    let c = criticality_integrals()?;
    let mut t = StudyTable::new("triangle_crit");
    let p = "triangle";
    t.rows.push(StudyRow::absolute(
        p,
        "I0",
        c.i0,
        i0_exact(),
        1e-10,
        Provenance::Published,
    ));
    t.rows.push(StudyRow::absolute(
        p,
        "I2",
        c.i2,
        i2_exact(),
        1e-10,
        Provenance::Published,
    ));
    t.rows.push(StudyRow::absolute(
        p,
        "I4",
        c.i4,
        i4_exact(),
        1e-10,
        Provenance::Published,
    ));
    t.rows.push(StudyRow::at_most(
        p,
        "factorization_residual",
        c.factorization_residual,
        1e-14,
        0.0,
        Provenance::Derived,
    ));
    t.rows.push(
        StudyRow::absolute(
            p,
            "tau_consistency",
            c.tau,
            c.tau_factored,
            1e-10,
            Provenance::Derived,
        )
        .with_note("direct quadrature against I4 - I2 - 7/48 I0 - sigma/27"),
    );
    t.rows.push(StudyRow::absolute(
        p,
        "tau_plus_sigma_over_27",
        c.tau_plus_sigma_over_27,
        tau_plus_sigma_over_27_exact(),
        1e-8,
        Provenance::Published,
    ));
    let gap = (c.tau_plus_sigma_over_27 + 0.125).abs();
    t.rows.push(
        StudyRow::at_least(
            p,
            "distance_to_minus_one_eighth",
            gap,
            1e-3,
            0.0,
            Provenance::Published,
        )
        .with_note("criticality would force tau + sigma/27 = -1/8"),
    );
    t.rows.push(
        StudyRow::info(p, "sigma", c.sigma, Provenance::Derived)
            .with_note("criticality would force -27/8"),
    );
    t.rows.push(
        StudyRow::info(p, "tau", c.tau, Provenance::Derived).with_note("criticality would force 0"),
    );
    for (k, v) in [
        ("I0", c.i0),
        ("I2", c.i2),
        ("I4", c.i4),
        ("sigma", c.sigma),
        ("tau", c.tau),
        ("tau_plus_sigma_over_27", c.tau_plus_sigma_over_27),
        (
            "tau_plus_sigma_over_27_closed_form",
            tau_plus_sigma_over_27_exact(),
        ),
        ("criticality_requirement", -0.125),
    ] {
        t.values.insert(k.into(), v);
    }
    t.details = json!({ "integrals": c, "quadrature_tolerance": QUADRATURE_TOL });
    t.plot.title = "Criticality weight (1 + cos 2 pi x)^2 / (x^2 - 1/4)".into();
    t.plot.x_label = "x".into();
    t.plot.series = vec![
        (
            "weight".into(),
            (0..=100)
                .map(|k| {
                    let x = 0.005 * k as f64;
                    (x, singular_weight(x))
                })
                .collect(),
        ),
        (
            "P(x) * weight".into(),
            (0..=100)
                .map(|k| {
                    let x = 0.005 * k as f64;
                    (x, p_polynomial(x) * singular_weight(x))
                })
                .collect(),
        ),
    ];
    t.plot.reference_lines = vec![("0".into(), 0.0)];
    Ok(t)
}
