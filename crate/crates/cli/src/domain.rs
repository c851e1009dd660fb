//! Short textual domain descriptions such as `triangle` or `ellipse:2,1`.

use torsionlab::geometry::{DomainSpec, PerforationParams};

use crate::CliError;

pub const DEFAULT_SEGMENTS: usize = 256;

fn numbers(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("'{t}' is not a number")))
        })
        .collect()
}

fn count(s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("'{s}' is not a count")))
}

/// Parses `kind[:args[:segments]]`.
///
/// | text | domain |
/// |---|---|
/// | `triangle`, `triangle:s` | equilateral triangle of side 1 (or `s`), centroid at 0 |
/// | `square` | unit square |
/// | `disk`, `disk:segments` | unit disk |
/// | `ellipse:a,b`, `ellipse:a,b:segments` | ellipse with semi-axes `a`, `b` |
/// | `rectangle:n` | `(-n, n) x (0, 1)` |
/// | `box:w,h` | `(0, w) x (0, h)` |
/// | `cluster:n`, `cluster:n:segments` | unit disk plus `n` disks of radius `n^(-1/4)` |
/// | `perforated:eps,c0` | unit square with holes of radius `exp(-c0/eps²)` |
/// | `polygon:x,y;x,y;...` | polygon through the listed vertices |
pub fn parse_domain(text: &str) -> Result<DomainSpec, CliError> {
    let mut parts = text.trim().splitn(3, ':');
    let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
    let args = parts.next();
    let extra = parts.next();
    let need =
        |what: &str| args.ok_or_else(|| CliError::Input(format!("domain '{kind}' needs {what}")));
    let segments = |s: Option<&str>| {
        s.map(count)
            .transpose()
            .map(|n| n.unwrap_or(DEFAULT_SEGMENTS))
    };
    let spec = match kind.as_str() {
        "triangle" => DomainSpec::EquilateralTriangle {
            side: args.map(numbers).transpose()?.map_or(1.0, |v| v[0]),
        },
        "square" => DomainSpec::unit_square(),
        "disk" => DomainSpec::unit_disk(segments(args)?),
        "ellipse" => {
            let v = numbers(need("a,b")?)?;
            if v.len() != 2 {
                return Err(CliError::Input("ellipse needs two semi-axes".into()));
            }
            DomainSpec::Ellipse {
                a: v[0],
                b: v[1],
                n_segments: segments(extra)?,
            }
        }
        "rectangle" => DomainSpec::Rectangle {
            n: numbers(need("n")?)?[0],
        },
        "box" => {
            let v = numbers(need("w,h")?)?;
            if v.len() != 2 {
                return Err(CliError::Input("box needs width and height".into()));
            }
            DomainSpec::axis_box(0.0, 0.0, v[0], v[1])
        }
        "cluster" => DomainSpec::BallCluster {
            n: count(need("n")?)?,
            n_segments: extra.map(count).transpose()?.unwrap_or(64),
            max_extent: 1e3,
        },
        "perforated" => {
            let v = numbers(need("eps,c0")?)?;
            if v.len() != 2 {
                return Err(CliError::Input("perforated needs eps,c0".into()));
            }
            DomainSpec::Perforated {
                base: Box::new(DomainSpec::unit_square()),
                params: PerforationParams::new(v[0], v[1]).map_err(CliError::from_core)?,
            }
        }
        "polygon" => {
            let vertices = need("vertices")?
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|p| {
                    let v = numbers(p)?;
                    if v.len() != 2 {
                        return Err(CliError::Input(format!("vertex '{p}' needs x,y")));
                    }
                    Ok([v[0], v[1]])
                })
                .collect::<Result<Vec<_>, _>>()?;
            DomainSpec::Polygon { vertices }
        }
        other => return Err(CliError::Input(format!("unknown domain '{other}'"))),
    };
    Ok(spec)
}

/// Optimizer seeds: `rect:w` (a `w x 1` rectangle), `regular:n`, `triangle`,
/// or `polygon:x,y;...`.
pub fn parse_seed(text: &str) -> Result<Vec<[f64; 2]>, CliError> {
    use torsionlab::optimizer::{rectangle_polygon, regular_polygon};
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    match kind {
        "rect" => Ok(rectangle_polygon(if args.is_empty() {
            3.0
        } else {
            numbers(args)?[0]
        })),
        "regular" => {
            let n = count(args)?;
            if n < 3 {
                return Err(CliError::Input("regular polygons need n >= 3".into()));
            }
            Ok(regular_polygon(n))
        }
        "triangle" => Ok(regular_polygon(3)),
        "polygon" => match parse_domain(text)? {
            DomainSpec::Polygon { vertices } => Ok(vertices),
            _ => unreachable!(),
        },
        other => Err(CliError::Input(format!("unknown seed '{other}'"))),
    }
}
