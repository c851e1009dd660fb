//! `torsionlab` command-line tool. Exit status: 0 on success, 1 when a check
//! fails under `--assert` or a computation does not converge, 2 on bad input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod domain;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(torsionlab::Error),
}

impl CliError {
    /// Splits library errors into bad input and failed computations.
    pub fn from_core(e: torsionlab::Error) -> Self {
        use torsionlab::Error as E;
        match e {
            E::InvalidDomain(_)
            | E::SelfIntersecting { .. }
            | E::ClusterPlacement(_)
            | E::FeatureTooSmall(_)
            | E::UnresolvedFeature { .. }
            | E::Degenerate(_)
            | E::MeshTooCoarse
            | E::InvalidPoint(_)
            | E::NotApplicable(_)
            | E::InvalidParameter(_) => CliError::Input(e.to_string()),
            other => CliError::Core(other),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<torsionlab::Error> for CliError {
    fn from(e: torsionlab::Error) -> Self {
        CliError::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("output: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "torsionlab",
    version,
    about = "Torsion and eigenvalue shape functionals on plane domains"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 1 when any check fails.
    #[arg(long, global = true)]
    assert: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct MeshArgs {
    /// Domain, e.g. `triangle`, `disk`, `ellipse:2,1`, `rectangle:5`.
    #[arg(long)]
    pub domain: Option<String>,
    /// Target edge length of the coarsest mesh.
    #[arg(long)]
    pub h: Option<f64>,
    /// Nested mesh levels.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// T, M, λ₁, F and G with extrapolation over nested meshes.
    Report(MeshArgs),
    /// Checks the known inequalities for F and G.
    Audit(MeshArgs),
    /// Boundary optimality residual of G.
    Residual(MeshArgs),
    /// Shape derivative of G along a named velocity field.
    Derivative {
        #[command(flatten)]
        mesh: MeshArgs,
        /// translate-x, translate-y, dilate, squeeze or rotate.
        #[arg(long, default_value = "translate-x")]
        field: String,
    },
    /// Topological field R at given points.
    Topo {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Evaluation point `x,y`; repeatable.
        #[arg(long = "point", allow_hyphen_values = true)]
        points: Vec<String>,
    },
    /// Canned studies.
    Study {
        #[command(subcommand)]
        kind: StudyKind,
    },
    /// Projected gradient ascent of G over convex polygons.
    Optimize {
        /// `rect:w`, `regular:n`, `triangle` or `polygon:x,y;...`.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Target edge length of the coarsest mesh.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Writes the mesh of a domain.
    MeshExport {
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        h: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum StudyKind {
    /// Thin rectangles: bounds on F, lambda1, M and G as the aspect ratio grows.
    Rectangle(StudyArgs),
    /// Disk clusters against the closed-form F.
    Cluster(StudyArgs),
    /// Screened torsion problem for large absorption.
    Homog(StudyArgs),
    /// Square with a lattice of small holes.
    Perforated(StudyArgs),
    /// Boundary integrals behind the criticality test of the triangle.
    TriangleCrit,
    /// Ranking of G over several domains.
    League(StudyArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct StudyArgs {
    /// Target edge length of the coarsest mesh.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.assert |= cli.assert;
    if cfg.threads > 0 {
        // fails only if a pool already exists, which keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    let output = match cli.command {
        Command::Report(m) => commands::report(&cfg, &m)?,
        Command::Audit(m) => commands::audit(&cfg, &m)?,
        Command::Residual(m) => commands::residual(&cfg, &m)?,
        Command::Derivative { mesh, field } => commands::derivative(&cfg, &mesh, &field)?,
        Command::Topo { mesh, points } => commands::topo(&cfg, &mesh, &points)?,
        Command::Study { kind } => commands::study(&cfg, kind)?,
        Command::Optimize {
            seed,
            max_iters,
            h,
            levels,
        } => commands::optimize(&cfg, seed, max_iters, h, levels)?,
        Command::MeshExport { domain, h } => commands::mesh_export(&cfg, domain, h)?,
    };
    let table = output.table;
    let dir = table.write(&cfg.out)?;
    if let Some(extra) = output.extra {
        extra(&dir)?;
    }
    let summary = serde_json::to_string_pretty(&table.to_json()).expect("json");
    println!("{summary}");
    for row in table.failures() {
        eprintln!(
            "FAIL {} {} = {} (margin {})",
            row.parameter, row.quantity, row.value, row.margin
        );
    }
    eprintln!("wrote {}", dir.display());
    Ok(!cfg.assert || table.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
