//! Projected gradient ascent of `G` over convex polygons of unit area.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{richardson, LevelSolution};
use crate::geometry::{
    build_domain, convex_project, is_convex_polygon, polygon_centroid, signed_area, DomainSpec,
    Vec2,
};
use crate::mesh::{triangulate, Mesh};
use crate::plot::polygon_svg;
use crate::shape::CriticalityLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Mesh edge length on the unit-area iterates.
    pub h: f64,
    /// Nested levels per evaluation (`>= 2`, the last two are extrapolated).
    pub levels: usize,
    pub max_iters: usize,
    /// Largest vertex displacement of the first trial step.
    pub initial_move: f64,
    pub armijo: f64,
    pub backtrack: f64,
    /// Consecutive rejected trial steps before giving up.
    pub max_failures: usize,
    /// Stop once the projected gradient norm is below `grad_tol · G`.
    pub grad_tol: f64,
    /// Directional finite-difference checks of the gradient at the seed.
    pub fd_probes: usize,
    pub fd_step: f64,
    pub fd_tolerance: f64,
    /// Directional derivatives below this are compared in absolute terms;
    /// near stationary shapes the discretization error dominates them.
    pub fd_floor: f64,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            h: 0.05,
            levels: 2,
            max_iters: 30,
            initial_move: 0.05,
            armijo: 0.1,
            backtrack: 0.5,
            max_failures: 20,
            grad_tol: 1e-4,
            fd_probes: 3,
            fd_step: 1e-3,
            fd_tolerance: 0.05,
            fd_floor: 1e-2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimStatus {
    Converged,
    MaxIters,
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct Iterate {
    pub vertices: Vec<[f64; 2]>,
    pub g: f64,
    pub gradient_norm: f64,
    /// Step length that produced this iterate (0 for the seed).
    pub step: f64,
    pub rejected_trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientProbe {
    pub predicted: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimTrace {
    pub iterates: Vec<Iterate>,
    pub status: OptimStatus,
    pub best: Vec<[f64; 2]>,
    pub best_g: f64,
    pub probes: Vec<GradientProbe>,
    pub diagnostics: String,
}

impl OptimTrace {
    pub fn accepted_steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn is_monotone(&self) -> bool {
        self.iterates.windows(2).all(|w| w[1].g >= w[0].g)
    }

    pub fn probes_pass(&self) -> bool {
        self.probes.iter().all(|p| p.within_tolerance)
    }

    /// `trace.json`, `final.txt` and one SVG frame per iterate under `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir.join("frames"))?;
        let mut json = serde_json::to_string_pretty(self).expect("json");
        json.push('\n');
        fs::write(dir.join("trace.json"), json)?;
        for (k, it) in self.iterates.iter().enumerate() {
            let pts: Vec<Vec2> = it.vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
            fs::write(
                dir.join("frames").join(format!("iter_{k:03}.svg")),
                polygon_svg(&pts),
            )?;
        }
        let mut text = String::new();
        for v in &self.best {
            text.push_str(&format!(
                "{} {}\n",
                crate::output::fmt_f64(v[0]),
                crate::output::fmt_f64(v[1])
            ));
        }
        fs::write(dir.join("final.txt"), text)?;
        Ok(dir.to_path_buf())
    }
}

/// `G` and its vertex gradient for one polygon.
#[derive(Debug, Clone)]
struct Evaluation {
    g: f64,
    gradient: Vec<Vec2>,
    meshes: Vec<Mesh>,
}

fn to_points(v: &[[f64; 2]]) -> Vec<Vec2> {
    v.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

fn to_arrays(v: &[Vec2]) -> Vec<[f64; 2]> {
    v.iter().map(|p| [p.x, p.y]).collect()
}

/// Rescales about the centroid to unit area.
fn normalize(vertices: &[Vec2]) -> Vec<Vec2> {
    let c = polygon_centroid(vertices);
    let s = 1.0 / signed_area(vertices).abs().sqrt();
    vertices.iter().map(|p| c + (p - c) * s).collect()
}

fn hierarchy(vertices: &[Vec2], cfg: &OptimConfig) -> Result<Vec<Mesh>> {
    let domain = build_domain(&DomainSpec::Polygon {
        vertices: to_arrays(vertices),
    })?;
    let mut meshes = vec![triangulate(&domain, cfg.h)?];
    while meshes.len() < cfg.levels {
        let m = meshes.last().expect("non-empty").refine();
        meshes.push(m);
    }
    Ok(meshes)
}

/// Hat-function weights `(side, 1 - s, s)` of every boundary edge midpoint.
fn side_weights(mesh: &Mesh, vertices: &[Vec2]) -> Vec<(usize, f64)> {
    let n = vertices.len();
    mesh.boundary_edges
        .iter()
        .map(|e| {
            let p = mesh.edge_midpoint(e);
            let mut best = (f64::INFINITY, 0, 0.0);
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let d = b - a;
                let s = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
                let dist = (a + d * s - p).norm();
                if dist < best.0 {
                    best = (dist, i, s);
                }
            }
            (best.1, best.2)
        })
        .collect()
}

fn level_gradient(level: &LevelSolution, vertices: &[Vec2]) -> Result<Vec<Vec2>> {
    let crit = CriticalityLevel::new(level)?;
    let mesh = &level.mesh;
    let n = vertices.len();
    let mut grad = vec![Vec2::zeros(); n];
    for (k, (e, (side, s))) in mesh
        .boundary_edges
        .iter()
        .zip(side_weights(mesh, vertices))
        .enumerate()
    {
        let w = mesh.edge_normal(e) * (crit.residual[k] * mesh.edge_length(e));
        grad[side] += w * (1.0 - s);
        grad[(side + 1) % n] += w * s;
    }
    Ok(grad)
}

fn extrapolated_g(sols: &[LevelSolution]) -> f64 {
    let n = sols.len();
    richardson(sols[n - 2].max_torsion(), sols[n - 1].max_torsion())
        * richardson(sols[n - 2].lambda(), sols[n - 1].lambda())
}

fn g_only(vertices: &[Vec2], cfg: &OptimConfig) -> Result<f64> {
    let sols: Vec<LevelSolution> = hierarchy(vertices, cfg)?
        .into_iter()
        .map(LevelSolution::solve)
        .collect::<Result<_>>()?;
    Ok(extrapolated_g(&sols))
}

fn evaluate(vertices: &[Vec2], cfg: &OptimConfig) -> Result<Evaluation> {
    let meshes = hierarchy(vertices, cfg)?;
    let sols: Vec<LevelSolution> = meshes
        .iter()
        .cloned()
        .map(LevelSolution::solve)
        .collect::<Result<_>>()?;
    let n = sols.len();
    let coarse = level_gradient(&sols[n - 2], vertices)?;
    let fine = level_gradient(&sols[n - 1], vertices)?;
    let gradient = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| Vec2::new(richardson(c.x, f.x), richardson(c.y, f.y)))
        .collect();
    Ok(Evaluation {
        g: extrapolated_g(&sols),
        gradient,
        meshes,
    })
}

/// Removes the components along dilation, rotation and translation, which do
/// not change `G` of the normalized shape.
fn project_gradient(vertices: &[Vec2], gradient: &[Vec2]) -> Vec<Vec2> {
    let c = polygon_centroid(vertices);
    let mut basis: Vec<Vec<Vec2>> = vec![
        vertices.iter().map(|p| p - c).collect(),
        vertices
            .iter()
            .map(|p| Vec2::new(c.y - p.y, p.x - c.x))
            .collect(),
        vec![Vec2::new(1.0, 0.0); vertices.len()],
        vec![Vec2::new(0.0, 1.0); vertices.len()],
    ];
    let dot = |a: &[Vec2], b: &[Vec2]| a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>();
    // Gram-Schmidt
    for i in 0..basis.len() {
        for j in 0..i {
            let (head, tail) = basis.split_at_mut(i);
            let proj = dot(&tail[0], &head[j]);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= y * proj;
            }
        }
        let norm = dot(&basis[i], &basis[i]).sqrt();
        for x in basis[i].iter_mut() {
            *x /= norm;
        }
    }
    let mut out = gradient.to_vec();
    for b in &basis {
        let proj = dot(&out, b);
        for (x, y) in out.iter_mut().zip(b) {
            *x -= y * proj;
        }
    }
    out
}

fn norm(v: &[Vec2]) -> f64 {
    v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Mean value coordinates of `p` with respect to a convex polygon; exact
/// linear interpolation on the sides.
fn mean_value_weights(vertices: &[Vec2], p: Vec2) -> Vec<f64> {
    let n = vertices.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let d = b - a;
        let s = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        if (a + d * s - p).norm() <= 1e-12 * d.norm() {
            w[i] = 1.0 - s;
            w[(i + 1) % n] = s;
            return w;
        }
    }
    let r: Vec<Vec2> = vertices.iter().map(|v| v - p).collect();
    let half_tan = |i: usize| {
        let (u, v) = (r[i], r[(i + 1) % n]);
        let angle = crate::geometry::cross(u, v).atan2(u.dot(&v));
        (0.5 * angle).tan()
    };
    let mut total = 0.0;
    for i in 0..n {
        w[i] = (half_tan((i + n - 1) % n) + half_tan(i)) / r[i].norm();
        total += w[i];
    }
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `G` of the polygon `vertices + τ δ` on the hierarchy of `vertices`
/// carried along by mean value coordinates.
fn morphed_g(meshes: &[Mesh], vertices: &[Vec2], displaced: &[Vec2]) -> Result<f64> {
    let n = meshes.len();
    let sols: Vec<LevelSolution> = meshes[n - 2..]
        .iter()
        .map(|mesh| {
            let mut moved = mesh.clone();
            for p in moved.vertices.iter_mut() {
                let w = mean_value_weights(vertices, *p);
                *p = w.iter().zip(displaced).map(|(wi, d)| d * *wi).sum();
            }
            let moved = Mesh::from_parts(
                moved.vertices,
                moved.triangles,
                moved.boundary_edges,
                vec![crate::geometry::Curve::Segments; mesh.loop_curves.len()],
            );
            moved.validate()?;
            LevelSolution::solve(moved)
        })
        .collect::<Result<_>>()?;
    Ok(extrapolated_g(&sols))
}

fn gradient_probes(
    vertices: &[Vec2],
    eval: &Evaluation,
    cfg: &OptimConfig,
) -> Result<Vec<GradientProbe>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let projected = project_gradient(vertices, &eval.gradient);
    let gnorm = norm(&projected);
    let directions: Vec<Vec<Vec2>> = (0..cfg.fd_probes)
        .map(|_| {
            // random directions, tilted towards the gradient so that the
            // predicted change is not lost in roundoff
            let mut d: Vec<Vec2> = (0..vertices.len())
                .map(|_| Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let dn = norm(&d);
            if gnorm > 0.0 {
                for (x, g) in d.iter_mut().zip(&projected) {
                    *x = *x / dn + g / gnorm;
                }
            }
            let dn = norm(&d);
            d.iter().map(|x| x / dn).collect()
        })
        .collect();
    directions
        .par_iter()
        .map(|d| {
            let predicted: f64 = d.iter().zip(&eval.gradient).map(|(a, b)| a.dot(b)).sum();
            let shifted =
                |s: f64| -> Vec<Vec2> { vertices.iter().zip(d).map(|(v, x)| v + x * s).collect() };
            let tau = cfg.fd_step;
            let plus = morphed_g(&eval.meshes, vertices, &shifted(tau))?;
            let minus = morphed_g(&eval.meshes, vertices, &shifted(-tau))?;
            let fd = (plus - minus) / (2.0 * tau);
            let err = (predicted - fd).abs();
            Ok(GradientProbe {
                predicted,
                finite_difference: fd,
                relative_error: err / fd.abs().max(1e-300),
                within_tolerance: err <= cfg.fd_tolerance * fd.abs().max(cfg.fd_floor),
            })
        })
        .collect()
}

/// Projected gradient ascent from `seed`. Every iterate is convex with unit
/// area; a trial step is accepted when it gains at least `armijo` times the
/// first-order prediction.
pub fn maximize_g(seed: &[[f64; 2]], cfg: &OptimConfig) -> Result<OptimTrace> {
    if seed.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "seed has {} vertices",
            seed.len()
        )));
    }
    if cfg.levels < 2 || !(cfg.h > 0.0) || !(cfg.backtrack > 0.0 && cfg.backtrack < 1.0) {
        return Err(Error::InvalidParameter("optimizer configuration".into()));
    }
    let start = to_points(seed);
    if !is_convex_polygon(&start)
        && !is_convex_polygon(&start.iter().rev().copied().collect::<Vec<_>>())
    {
        return Err(Error::InvalidParameter("seed polygon is not convex".into()));
    }
    let mut x = normalize(&convex_project(&start)?);
    let mut eval = evaluate(&x, cfg)?;
    let probes = if cfg.fd_probes > 0 {
        gradient_probes(&x, &eval, cfg)?
    } else {
        Vec::new()
    };
    let mut dir = project_gradient(&x, &eval.gradient);
    let mut gnorm = norm(&dir);
    let mut iterates = vec![Iterate {
        vertices: to_arrays(&x),
        g: eval.g,
        gradient_norm: gnorm,
        step: 0.0,
        rejected_trials: 0,
    }];
    let max_vertex = |v: &[Vec2]| v.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut step = if gnorm > 0.0 {
        cfg.initial_move / max_vertex(&dir)
    } else {
        0.0
    };
    let batch = rayon::current_num_threads().clamp(1, 4);
    let mut status = OptimStatus::MaxIters;
    let mut diagnostics = String::new();

    for _ in 0..cfg.max_iters {
        if gnorm < cfg.grad_tol * eval.g {
            status = OptimStatus::Converged;
            break;
        }
        let mut failures = 0;
        let mut accepted = None;
        while accepted.is_none() && failures < cfg.max_failures {
            let steps: Vec<f64> = (0..batch.min(cfg.max_failures - failures))
                .map(|k| step * cfg.backtrack.powi(k as i32))
                .collect();
            let trials: Vec<Result<(Vec<Vec2>, f64)>> = steps
                .par_iter()
                .map(|&s| {
                    let moved: Vec<Vec2> = x.iter().zip(&dir).map(|(p, d)| p + d * s).collect();
                    let y = normalize(&convex_project(&moved)?);
                    let g = g_only(&y, cfg)?;
                    Ok((y, g))
                })
                .collect();
            for (s, trial) in steps.iter().zip(trials) {
                let ok = match trial {
                    Ok((y, g)) => {
                        // first-order gain of the actual (projected) move
                        let c = polygon_centroid(&x);
                        let moved: Vec<Vec2> = {
                            let cy = polygon_centroid(&y);
                            let s = (signed_area(&x).abs() / signed_area(&y).abs()).sqrt();
                            y.iter().map(|p| c + (p - cy) * s).collect()
                        };
                        let gain: f64 = moved
                            .iter()
                            .zip(&x)
                            .zip(&eval.gradient)
                            .map(|((m, p), g)| (m - p).dot(g))
                            .sum();
                        if gain > 0.0 && g >= eval.g + cfg.armijo * gain {
                            Some((y, *s))
                        } else {
                            None
                        }
                    }
                    Err(_) => None,
                };
                match ok {
                    Some(hit) => {
                        accepted = Some(hit);
                        break;
                    }
                    None => failures += 1,
                }
            }
            step *= cfg.backtrack.powi(steps.len() as i32);
        }
        let Some((y, s)) = accepted else {
            status = OptimStatus::Stalled;
            diagnostics = format!(
                "{failures} consecutive rejected steps at G = {:.8}, projected gradient norm {:.3e}, last trial step {:.3e}",
                eval.g, gnorm, step
            );
            break;
        };
        x = y;
        eval = evaluate(&x, cfg)?;
        dir = project_gradient(&x, &eval.gradient);
        gnorm = norm(&dir);
        iterates.push(Iterate {
            vertices: to_arrays(&x),
            g: eval.g,
            gradient_norm: gnorm,
            step: s,
            rejected_trials: failures,
        });
        // allow the step to grow back after a success
        step = s / cfg.backtrack;
    }
    if status == OptimStatus::MaxIters && gnorm < cfg.grad_tol * eval.g {
        status = OptimStatus::Converged;
    }
    let best = iterates
        .iter()
        .max_by(|a, b| a.g.total_cmp(&b.g))
        .expect("seed iterate");
    Ok(OptimTrace {
        best: best.vertices.clone(),
        best_g: best.g,
        iterates,
        status,
        probes,
        diagnostics,
    })
}

/// Regular `n`-gon of unit area.
pub fn regular_polygon(n: usize) -> Vec<[f64; 2]> {
    let pts: Vec<Vec2> = (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + std::f64::consts::FRAC_PI_2;
            Vec2::new(t.cos(), t.sin())
        })
        .collect();
    to_arrays(&normalize(&pts))
}

/// `w x 1` rectangle as a 4-gon.
pub fn rectangle_polygon(w: f64) -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [w, 0.0], [w, 1.0], [0.0, 1.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_value_weights_reproduce_points() {
        let poly = to_points(&regular_polygon(5));
        for p in [
            Vec2::new(0.1, -0.2),
            Vec2::zeros(),
            (poly[1] + poly[2]) * 0.5,
        ] {
            let w = mean_value_weights(&poly, p);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let q: Vec2 = w.iter().zip(&poly).map(|(wi, v)| v * *wi).sum();
            assert!((q - p).norm() < 1e-13, "{q:?} {p:?}");
        }
    }

    #[test]
    fn projection_removes_rigid_and_dilation() {
        let poly = to_points(&regular_polygon(6));
        let dil: Vec<Vec2> = poly
            .iter()
            .map(|p| p * 2.0 + Vec2::new(0.3, -1.0))
            .collect();
        assert!(norm(&project_gradient(&poly, &dil)) < 1e-12);
        let other: Vec<Vec2> = poly
            .iter()
            .enumerate()
            .map(|(i, _)| Vec2::new(i as f64, 0.0))
            .collect();
        assert!(norm(&project_gradient(&poly, &other)) > 0.1);
    }

    #[test]
    fn normalization_gives_unit_area() {
        let r = normalize(&to_points(&rectangle_polygon(3.0)));
        assert!((signed_area(&r) - 1.0).abs() < 1e-14);
        assert!((regular_polygon(7).len()) == 7);
    }

    #[test]
    fn rejects_bad_seed() {
        let cfg = OptimConfig::default();
        assert!(maximize_g(&[[0.0, 0.0], [1.0, 0.0]], &cfg).is_err());
        let dart = [[0.0, 0.0], [2.0, 1.0], [0.0, 2.0], [0.5, 1.0]];
        assert!(maximize_g(&dart, &cfg).is_err());
    }
}
