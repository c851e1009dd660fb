//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub const MAX_SUBDIVISIONS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-interval Kronrod–Gauss differences.
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by position so the subdivision order is deterministic
        self.error
            .total_cmp(&other.error)
            .then(other.a.total_cmp(&self.a))
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to absolute accuracy `abs_tol`, bisecting the interval with the
/// largest error estimate until the summed estimate is below the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) || !(abs_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "integration over [{a}, {b}] with tolerance {abs_tol}"
        )));
    }
    let (value, error) = kronrod(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut evaluations = 15;
    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !total.is_finite() {
            return Err(Error::Quadrature(f64::NAN));
        }
        if err <= abs_tol {
            // sum in position order so the result does not depend on the heap
            let mut pieces: Vec<&Piece> = heap.iter().collect();
            pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
            return Ok(Quadrature {
                value: pieces.iter().map(|p| p.value).sum(),
                error: err,
                evaluations,
            });
        }
        if heap.len() >= MAX_SUBDIVISIONS {
            return Err(Error::Quadrature(err));
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature(err));
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = kronrod(&f, lo, hi);
            heap.push(Piece {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomials() {
        let q = integrate(|x| x.powi(20) - 3.0 * x.powi(7), -1.0, 2.0, 1e-12).unwrap();
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert_relative_eq!(q.value, exact, max_relative = 1e-14);
        let cubic = integrate(|x| x * x * x, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(cubic.evaluations, 15);
    }

    #[test]
    fn oscillatory_integrand() {
        let q = integrate(|x| (40.0 * x).cos(), 0.0, PI, 1e-12).unwrap();
        assert!((q.value - (40.0 * PI).sin() / 40.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let q = integrate(|x: f64| x.sqrt().ln(), 0.0, 1.0, 1e-10).unwrap();
        assert!((q.value + 0.5).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn non_integrable_reports_failure() {
        assert!(matches!(
            integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12),
            Err(Error::Quadrature(_))
        ));
        assert!(integrate(|x| x, 0.0, 1.0, 0.0).is_err());
    }
}
