//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure,
//! 3 validation failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector, Point2};

use crate::assembly::{
    assemble, element_data, internal_force_from, scatter, solve_with, SolverOptions,
    SOLVER_TOLERANCE,
};
use crate::element::{ElementError, Stabilization};
use crate::material::{Material, PlaneMode};
use crate::mesh::{generate_structured, generate_voronoi, Domain, Mesh, MeshError};
use crate::postproc::{
    beam_theory_max_stress, beam_theory_tip, export, recover_from, scalar_metrics, ExportFormat, Metrics,
};
use crate::problem::Problem;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vem2d", version, about = "Lowest-order virtual element solver for 2D linear elasticity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file and write displacements, fields and metrics.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Probe point `X,Y` for the reported displacement (default: middle
        /// of the right end of the bounding box).
        #[arg(long, value_parser = parse_point)]
        probe: Option<Point2<f64>>,
        #[command(flatten)]
        numeric: NumericArgs,
    },
    /// Print the projector and stiffness matrices of a one-element problem.
    ElementCheck {
        problem: PathBuf,
        #[command(flatten)]
        numeric: NumericArgs,
    },
    /// Generate a mesh and write it as a problem file.
    Meshgen {
        #[command(flatten)]
        generator: GeneratorArgs,
        /// Attach the supports and loads of a preset load case.
        #[arg(long, value_enum)]
        case: Option<Case>,
        /// Tip load (cantilever) or edge traction (plate).
        #[arg(long, default_value_t = 0.1)]
        load: f64,
        #[command(flatten)]
        material: MaterialArgs,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Refinement study on a generated cantilever or plate quadrant.
    Convergence {
        #[arg(long, value_enum)]
        case: Case,
        /// Comma-separated element counts.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        lloyd: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tip load (cantilever) or edge traction (plate); defaults 0.1 and 1.
        #[arg(long)]
        load: Option<f64>,
        #[command(flatten)]
        material: MaterialArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        numeric: NumericArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    /// 12 × 1 strip pinned at x = 0, end load at the middle of x = 12.
    Cantilever,
    /// 5 × 5 quadrant with a hole of radius 1, tension on x = 5.
    Plate,
}

#[derive(Debug, Clone, Args)]
pub struct NumericArgs {
    /// Stabilization: `dof-trace:τ`, `trace:τ` or `diag:α₀`.
    #[arg(long, default_value_t = Stabilization::default())]
    pub stab: Stabilization,
    /// Relative residual tolerance of the linear solve.
    #[arg(long, default_value_t = SOLVER_TOLERANCE)]
    pub tol: f64,
    /// Cross-check projector identities on every element.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("shape").required(true).multiple(false))]
pub struct GeneratorArgs {
    /// Structured quadrilaterals.
    #[arg(long, num_args = 4, value_names = ["W", "H", "NX", "NY"], group = "shape")]
    pub structured: Option<Vec<f64>>,
    /// Voronoi cells in a rectangle.
    #[arg(long, num_args = 3, value_names = ["W", "H", "N"], group = "shape")]
    pub voronoi: Option<Vec<f64>>,
    /// Voronoi cells in a rectangle minus a quarter disc at the origin.
    #[arg(long, num_args = 4, value_names = ["W", "H", "R", "N"], group = "shape")]
    pub plate: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub lloyd: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct MaterialArgs {
    #[arg(long = "youngs", default_value_t = 1000.0)]
    pub youngs: f64,
    #[arg(long = "poisson", default_value_t = 0.3)]
    pub poisson: f64,
    #[arg(long, default_value = "plane_stress")]
    pub mode: PlaneMode,
}

impl MaterialArgs {
    fn material(&self) -> Result<Material> {
        Ok(Material::new(self.youngs, self.poisson, self.mode)?)
    }
}

fn parse_point(s: &str) -> Result<Point2<f64>, String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let x = x.trim().parse().map_err(|_| format!("invalid x '{x}'"))?;
    let y = y.trim().parse().map_err(|_| format!("invalid y '{y}'"))?;
    Ok(Point2::new(x, y))
}

fn count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(MeshError::Parameter(format!("{what} must be a positive integer, got {v}")).into())
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_USAGE,
        Error::Mesh(MeshError::Parameter(_)) => EXIT_USAGE,
        Error::Mesh(_) => EXIT_NUMERICAL,
        Error::Solve(_) => EXIT_NUMERICAL,
        Error::Element { source, .. } => match source {
            ElementError::Geometry(_) | ElementError::DofLength { .. } => EXIT_VALIDATION,
            ElementError::IllConditioned(_) | ElementError::Verification { .. } => EXIT_NUMERICAL,
        },
        Error::Geometry(_) | Error::Material(_) | Error::Parse(_) | Error::Invalid(_) => EXIT_VALIDATION,
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: Command, out: &mut dyn std::io::Write) -> Result<()> {
    let text = match command {
        Command::Solve {
            problem,
            out,
            probe,
            numeric,
        } => cmd_solve(&problem, &out, probe, &numeric)?,
        Command::ElementCheck { problem, numeric } => {
            let p = Problem::read(&problem)?;
            let (text, result) = cmd_element_check(&p, &numeric);
            write_stdout(out, &text)?;
            return result;
        }
        Command::Meshgen {
            generator,
            case,
            load,
            material,
            out: path,
        } => {
            let problem = cmd_meshgen(&generator, case, load, &material)?;
            match path {
                Some(path) => {
                    problem.write(&path)?;
                    format!(
                        "wrote {} ({} nodes, {} elements)\n",
                        path.display(),
                        problem.mesh.num_nodes(),
                        problem.mesh.num_elements()
                    )
                }
                None => problem.to_string(),
            }
        }
        Command::Convergence {
            case,
            levels,
            lloyd,
            seed,
            load,
            material,
            out,
            numeric,
        } => {
            let load = load.unwrap_or(match case {
                Case::Cantilever => 0.1,
                Case::Plate => 1.0,
            });
            cmd_convergence(case, &levels, lloyd, seed, load, &material.material()?, &numeric, &out)?
        }
    };
    write_stdout(out, &text)
}

fn write_stdout(out: &mut dyn std::io::Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Result of a full solve with everything needed for reporting.
#[derive(Debug, Clone)]
pub struct Solved {
    pub u: DVector<f64>,
    pub field: crate::postproc::SolutionField,
    pub metrics: Metrics,
    pub relative_residual: f64,
    pub free_dofs: usize,
    pub applied: [f64; 2],
    pub reactions: [f64; 2],
    /// `‖F_int − K u‖ / ‖K u‖`.
    pub internal_force_error: f64,
}

/// Validates, assembles, solves and post-processes `problem`.
pub fn solve_problem(problem: &Problem, numeric: &NumericArgs, probe: Option<Point2<f64>>) -> Result<Solved> {
    let report = problem.mesh.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(format!("mesh validation failed:\n{report}")));
    }
    let formulation = problem
        .formulation()
        .with_stabilization(numeric.stab)
        .with_verify(numeric.verify);
    let lc = problem.load_case()?;
    let data = element_data(&problem.mesh, &formulation)?;
    let system = crate::assembly::GlobalSystem {
        k: scatter(&problem.mesh, &data),
        f: crate::assembly::assemble_loads(&problem.mesh, &lc)?,
        constraints: lc.dirichlet.clone(),
    };
    let options = SolverOptions {
        tolerance: numeric.tol,
        ..Default::default()
    };
    let (u, rep) = solve_with(&system, &options)?;
    let field = recover_from(&problem.mesh, &data, &problem.material, &u)?;
    let probe = probe.or_else(|| {
        problem
            .mesh
            .bounding_box()
            .map(|(lo, hi)| Point2::new(hi.x, 0.5 * (lo.y + hi.y)))
    });
    let metrics = scalar_metrics(&field, &problem.mesh, probe)?;
    let r = system.reactions(&u);
    let sum = |v: &DVector<f64>, c: usize| v.iter().skip(c).step_by(2).sum::<f64>();
    let f_int = internal_force_from(&problem.mesh, &data, &u);
    let ku = crate::assembly::spmv(&system.k, &u);
    let scale = ku.norm().max(f64::MIN_POSITIVE);
    Ok(Solved {
        relative_residual: rep.relative_residual,
        free_dofs: rep.free_dofs,
        applied: [sum(&system.f, 0), sum(&system.f, 1)],
        reactions: [sum(&r, 0), sum(&r, 1)],
        internal_force_error: (f_int - ku).norm() / scale,
        u,
        field,
        metrics,
    })
}

fn cmd_solve(path: &Path, out: &Path, probe: Option<Point2<f64>>, numeric: &NumericArgs) -> Result<String> {
    let problem = Problem::read(path)?;
    let s = solve_problem(&problem, numeric, probe)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = export(&s.field, &problem.mesh, ExportFormat::Csv, out)?;
    files.extend(export(&s.field, &problem.mesh, ExportFormat::VtkLegacy, out)?);

    let mut kv = String::new();
    let _ = writeln!(kv, "n_nodes={}", problem.mesh.num_nodes());
    let _ = writeln!(kv, "n_elements={}", problem.mesh.num_elements());
    let _ = writeln!(kv, "free_dofs={}", s.free_dofs);
    let _ = writeln!(kv, "stabilization={}", numeric.stab);
    let _ = writeln!(kv, "relative_residual={:e}", s.relative_residual);
    let _ = writeln!(kv, "applied_fx={}", s.applied[0]);
    let _ = writeln!(kv, "applied_fy={}", s.applied[1]);
    let _ = writeln!(kv, "reaction_fx={}", s.reactions[0]);
    let _ = writeln!(kv, "reaction_fy={}", s.reactions[1]);
    kv.push_str(&s.metrics.to_key_values());
    let metrics_path = out.join("metrics.txt");
    std::fs::write(&metrics_path, &kv).map_err(|e| Error::io(&metrics_path, e))?;
    files.push(metrics_path);

    let m = &s.metrics;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} nodes, {} elements, {} free dofs, stabilization {}",
        problem.mesh.num_nodes(),
        problem.mesh.num_elements(),
        s.free_dofs,
        numeric.stab
    );
    let _ = writeln!(text, "relative residual {:.3e}", s.relative_residual);
    if let Some(p) = &m.probe {
        let _ = writeln!(
            text,
            "node {} at ({:.4}, {:.4}): ux = {:.6}, uy = {:.6}",
            p.node + 1,
            p.position.x,
            p.position.y,
            p.displacement[0],
            p.displacement[1]
        );
    }
    let _ = writeln!(text, "sigma_x  max {:.4}  min {:.4}", m.max_stress.x, m.min_stress.x);
    let _ = writeln!(text, "sigma_y  max {:.4}  min {:.4}", m.max_stress.y, m.min_stress.y);
    let _ = writeln!(text, "tau_xy   max {:.4}  min {:.4}", m.max_stress.z, m.min_stress.z);
    let _ = writeln!(
        text,
        "applied ({:.6}, {:.6}), reactions ({:.6}, {:.6})",
        s.applied[0], s.applied[1], s.reactions[0], s.reactions[1]
    );
    for f in files {
        let _ = writeln!(text, "wrote {}", f.display());
    }
    Ok(text)
}

/// Fixed-point matrix dump, 4 decimals, one row per line.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let _ = write!(s, "{:10.4}", m[(i, j)]);
        }
        s.push('\n');
    }
    s
}

/// Dump of the single element of `problem`; the text is returned even when
/// the solve fails so the matrices can still be inspected.
pub fn cmd_element_check(problem: &Problem, numeric: &NumericArgs) -> (String, Result<()>) {
    let mut text = String::new();
    let result = element_check_into(problem, numeric, &mut text);
    (text, result)
}

fn element_check_into(problem: &Problem, numeric: &NumericArgs, s: &mut String) -> Result<()> {
    if problem.mesh.num_elements() != 1 {
        return Err(Error::Invalid(format!(
            "element-check requires exactly one element, found {}",
            problem.mesh.num_elements()
        )));
    }
    let report = problem.mesh.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(format!("mesh validation failed:\n{report}")));
    }
    let formulation = problem
        .formulation()
        .with_stabilization(numeric.stab)
        .with_verify(numeric.verify);
    let data = element_data(&problem.mesh, &formulation)?.remove(0);
    let g = &data.geometry;
    let p = &data.projectors;
    let c = g.frame.centroid;
    let _ = writeln!(s, "centroid {:.4} {:.4}", c.x, c.y);
    let _ = writeln!(s, "n_v {}", g.num_vertices());
    let _ = writeln!(s, "2n_d {}", g.num_dofs());
    let _ = writeln!(s, "h_E {:.4}", g.frame.diameter);
    let _ = writeln!(s, "area {:.4}", g.polygon.area());
    let _ = writeln!(s, "stabilization {}", numeric.stab);
    let square = |m: &nalgebra::Matrix6<f64>| DMatrix::from_column_slice(6, 6, m.as_slice());
    for (name, m) in [
        ("B_bar", p.b_bar.clone()),
        ("D", p.d.clone()),
        ("G", square(&p.g)),
        ("Pi_tilde", p.pi_tilde.clone()),
        ("Pi", p.pi.clone()),
        ("k_E", data.stiffness.clone()),
    ] {
        let _ = writeln!(s, "{name}");
        s.push_str(&format_matrix(&m));
    }
    let lc = problem.load_case()?;
    let system = assemble(&problem.mesh, &formulation, &lc)?;
    let options = SolverOptions {
        tolerance: numeric.tol,
        ..Default::default()
    };
    let (u, _) = solve_with(&system, &options)?;
    let field = recover_from(&problem.mesh, std::slice::from_ref(&data), &problem.material, &u)?;
    let _ = writeln!(s, "displacements");
    let nodal = DMatrix::from_fn(problem.mesh.num_nodes(), 2, |i, j| u[2 * i + j]);
    s.push_str(&format_matrix(&nodal));
    let _ = writeln!(s, "strains");
    s.push_str(&format_matrix(&DMatrix::from_column_slice(3, 1, field.strains[0].as_slice())));
    let _ = writeln!(s, "stresses");
    s.push_str(&format_matrix(&DMatrix::from_column_slice(3, 1, field.stresses[0].as_slice())));
    Ok(())
}

/// Domain of a preset case.
pub fn case_domain(case: Case) -> Domain {
    match case {
        Case::Cantilever => Domain::Rectangle {
            width: 12.0,
            height: 1.0,
        },
        Case::Plate => Domain::QuarterPlate {
            width: 5.0,
            height: 5.0,
            radius: 1.0,
        },
    }
}

/// Problem for a preset case on an already generated mesh.
pub fn case_problem(case: Case, mesh: Mesh, material: Material, load: f64) -> Result<Problem> {
    match case {
        Case::Cantilever => Problem::cantilever(mesh, material, load),
        Case::Plate => Problem::plate_in_tension(mesh, material, load),
    }
}

pub fn cmd_meshgen(
    generator: &GeneratorArgs,
    case: Option<Case>,
    load: f64,
    material: &MaterialArgs,
) -> Result<Problem> {
    let mesh = if let Some(v) = &generator.structured {
        generate_structured(v[0], v[1], count(v[2], "NX")?, count(v[3], "NY")?)?
    } else if let Some(v) = &generator.voronoi {
        let domain = Domain::Rectangle {
            width: v[0],
            height: v[1],
        };
        generate_voronoi(&domain, count(v[2], "N")?, generator.lloyd, generator.seed)?
    } else if let Some(v) = &generator.plate {
        let domain = Domain::QuarterPlate {
            width: v[0],
            height: v[1],
            radius: v[2],
        };
        generate_voronoi(&domain, count(v[3], "N")?, generator.lloyd, generator.seed)?
    } else {
        unreachable!("clap enforces one generator")
    };
    let material = material.material()?;
    match case {
        Some(c) => case_problem(c, mesh, material, load),
        None => Ok(Problem::new(material, mesh)),
    }
}

/// One row of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_elements: usize,
    pub n_nodes: usize,
    pub tip_uy: f64,
    pub max_sxx: f64,
    pub max_abs_sxx: f64,
}

pub fn convergence_rows(
    case: Case,
    levels: &[usize],
    lloyd: usize,
    seed: u64,
    load: f64,
    material: &Material,
    numeric: &NumericArgs,
) -> Result<Vec<ConvergenceRow>> {
    let domain = case_domain(case);
    levels
        .iter()
        .map(|&n| {
            let mesh = generate_voronoi(&domain, n, lloyd, seed)?;
            let problem = case_problem(case, mesh, *material, load)?;
            let s = solve_problem(&problem, numeric, None)?;
            Ok(ConvergenceRow {
                n_elements: problem.mesh.num_elements(),
                n_nodes: problem.mesh.num_nodes(),
                tip_uy: s.metrics.probe.map_or(0.0, |p| p.displacement[1]),
                max_sxx: s.metrics.max_stress.x,
                max_abs_sxx: s.metrics.max_abs_sxx,
            })
        })
        .collect()
}

pub const CONVERGENCE_CSV_HEADER: &str = "n_elements,n_nodes,tip_uy,max_sxx,max_abs_sxx";

#[allow(clippy::too_many_arguments)]
fn cmd_convergence(
    case: Case,
    levels: &[usize],
    lloyd: usize,
    seed: u64,
    load: f64,
    material: &Material,
    numeric: &NumericArgs,
    out: &Path,
) -> Result<String> {
    let rows = convergence_rows(case, levels, lloyd, seed, load, material, numeric)?;
    let mut csv = String::from(CONVERGENCE_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.n_elements, r.n_nodes, r.tip_uy, r.max_sxx, r.max_abs_sxx
        );
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("convergence.csv");
    std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;

    let mut text = String::new();
    let _ = writeln!(text, "{:>10} {:>8} {:>12} {:>10}", "elements", "nodes", "tip uy", "max sx");
    for r in &rows {
        let _ = writeln!(
            text,
            "{:>10} {:>8} {:>12.6} {:>10.4}",
            r.n_elements, r.n_nodes, r.tip_uy, r.max_sxx
        );
    }
    if case == Case::Cantilever {
        let (w, h) = case_domain(case).extent();
        let i = h.powi(3) / 12.0;
        let _ = writeln!(
            text,
            "beam theory: tip {:.6}, max bending stress {:.4}",
            beam_theory_tip(load, w, material.youngs_modulus(), i),
            beam_theory_max_stress(load, w, h, 1.0)
        );
    }
    let _ = writeln!(text, "wrote {}", path.display());
    Ok(text)
}
