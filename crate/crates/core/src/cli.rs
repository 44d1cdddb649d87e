//! Command-line driver.
//!
//! A `--config FILE` of `key = value` lines may supply any subcommand flag;
//! flags given on the command line take precedence.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::afem::{afem_run_with, AfemConfig, AfemLevel, EpsStrategy};
use crate::bench::{
    benchmark, export_vtk, fitted_rate, image_problem_benchmark, load_pgm, pairwise_rates,
    pixel_l2_error_sq, rasterize, read_convergence_csv, synthetic_image, write_convergence_csv,
    write_pgm, Benchmark, ConvergenceRow, ImageData, VtkField,
};
use crate::error::{Error, Result};
use crate::fem::{p0_project_fn, P0Function};
use crate::mesh::refine_uniform;
use crate::rof::{FlowConfig, LinearSolver};

#[derive(Debug, Parser)]
#[command(name = "rof-afem", version, about = "Adaptive finite elements for total-variation denoising")]
struct Cli {
    /// File of `key = value` lines supplying default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the adaptive loop on a registered benchmark.
    #[command(args_override_self = true)]
    RunBenchmark(RunBenchmark),
    /// Denoise a PGM image (or the built-in synthetic image) adaptively.
    #[command(args_override_self = true)]
    DenoiseImage(DenoiseImage),
    /// Print experimental convergence rates of a convergence table.
    #[command(args_override_self = true)]
    Rates(Rates),
    /// Write a benchmark mesh with its data to a VTK file.
    #[command(args_override_self = true)]
    Export(Export),
}

#[derive(Debug, Args)]
struct LoopArgs {
    /// Number of levels, counting the initial mesh.
    #[arg(long, default_value_t = 10)]
    levels: usize,
    /// Dörfler bulk parameter.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Regularization strategy.
    #[arg(long, default_value = "global", value_parser = ["local", "global"])]
    eps: String,
    /// Refine every element on every level.
    #[arg(long)]
    uniform: bool,
    /// Gradient-flow step size.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Flow stops once the residual is below this factor times the mesh size.
    #[arg(long)]
    stop_factor: Option<f64>,
    /// Linear solver for each flow step.
    #[arg(long, default_value = "cholesky", value_parser = ["cholesky", "cg"])]
    solver: String,
    /// Maximum gradient-flow steps per level.
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    /// Stop refining once a mesh would exceed this many vertices.
    #[arg(long)]
    max_vertices: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Skip the per-level VTK files.
    #[arg(long)]
    no_vtk: bool,
}

#[derive(Debug, Args)]
struct RunBenchmark {
    /// one_disk_2d, one_disk_3d, two_disks, cone, square or image.
    #[arg(long)]
    name: String,
    #[command(flatten)]
    common: LoopArgs,
}

#[derive(Debug, Args)]
struct DenoiseImage {
    /// Input graymap; the built-in synthetic image when omitted.
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[arg(long, default_value_t = 1e4)]
    alpha: f64,
    /// Cells per axis of the initial mesh.
    #[arg(long, default_value_t = 4)]
    subdivisions: usize,
    #[command(flatten)]
    common: LoopArgs,
}

#[derive(Debug, Args)]
struct Rates {
    /// Convergence table written by run-benchmark or denoise-image.
    #[arg(long)]
    csv: PathBuf,
    /// Spatial dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Fit over the last K rows only.
    #[arg(long)]
    last: Option<usize>,
}

#[derive(Debug, Args)]
struct Export {
    #[arg(long)]
    name: String,
    /// Uniform refinements of the initial mesh.
    #[arg(long, default_value_t = 0)]
    refinements: usize,
    /// Target VTK file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the benchmark's image data as PGM (image benchmark only).
    #[arg(long)]
    pgm_out: Option<PathBuf>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("config line {}: expected key = value", k + 1))
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(Error::InvalidParameter(format!("config line {}: empty key", k + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

const SUBCOMMANDS: [&str; 4] = ["run-benchmark", "denoise-image", "rates", "export"];
const SWITCHES: [&str; 2] = ["uniform", "no-vtk"];

/// Inserts config-file flags right after the subcommand name so that later
/// command-line occurrences override them.
fn merge_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let mut config = None;
    let mut k = 1;
    while k < args.len() {
        let a = args[k].to_string_lossy();
        if a == "--config" {
            config = args.get(k + 1).map(PathBuf::from);
            k += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        }
        k += 1;
    }
    let Some(path) = config else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let pairs = parse_config(&text).map_err(|e| e.to_string())?;
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let mut injected = Vec::new();
    for (key, value) in pairs {
        if SWITCHES.contains(&key.as_str()) {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                _ => return Err(format!("config key {key}: expected a boolean, got `{value}`")),
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    let mut merged = args[..=pos].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

fn afem_config(a: &LoopArgs) -> Result<AfemConfig> {
    let solver = if a.solver == "cg" { LinearSolver::Cg } else { LinearSolver::Cholesky };
    let mut flow = FlowConfig {
        tau: a.tau,
        max_steps: a.max_steps,
        solver,
        ..FlowConfig::default()
    };
    if let Some(f) = a.stop_factor {
        flow.stop_factor = f;
    }
    Ok(AfemConfig {
        theta: a.theta,
        eps_strategy: a.eps.parse::<EpsStrategy>()?,
        max_levels: a.levels,
        max_vertices: a.max_vertices,
        flow,
        uniform: a.uniform,
        ..AfemConfig::default()
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn row(level: &AfemLevel) -> ConvergenceRow {
    ConvergenceRow {
        level: level.level,
        n_vertices: level.n_vertices,
        h: level.h,
        eta: level.eta_sq.max(0.0).sqrt(),
        rho_tilde: level.rho_tilde_sq.map(|r| r.max(0.0).sqrt()),
        linf_zbar: level.linf_zbar,
        flow_steps: level.flow_steps,
        wall_time: level.wall_time,
    }
}

fn write_level_vtk(dir: &Path, level: &AfemLevel) -> Result<()> {
    let mesh = level.mesh();
    let local = P0Function { values: level.eta_sq_local.clone() };
    export_vtk(
        mesh,
        &[
            VtkField::Cr("u_bar", &level.u_bar),
            VtkField::Rt("z_bar", &level.z_bar),
            VtkField::P0("eta_sq_local", &local),
            VtkField::P0("eps", level.eps()),
            VtkField::P0("g_h", &level.problem.g_h),
        ],
        dir.join(format!("level_{:03}.vtk", level.level)),
    )
}

fn run_loop(
    bench: &Benchmark,
    args: &LoopArgs,
    out: &mut dyn Write,
) -> Result<Vec<AfemLevel>> {
    let cfg = afem_config(args)?;
    create_dir(&args.out)?;
    let _ = writeln!(out, "{:>5} {:>9} {:>12} {:>12} {:>12} {:>6} {:>8}", "level", "vertices", "h", "eta", "rho_tilde", "steps", "time[s]");
    let mut vtk_error = None;
    let run = afem_run_with(bench, &cfg, bench.initial_mesh(), |level| {
        let r = row(level);
        let rho = r.rho_tilde.map(|x| format!("{x:12.5e}")).unwrap_or_else(|| format!("{:>12}", "-"));
        let _ = writeln!(
            out,
            "{:>5} {:>9} {:>12.5e} {:>12.5e} {} {:>6} {:>8.2}",
            r.level, r.n_vertices, r.h, r.eta, rho, r.flow_steps, r.wall_time
        );
        if !args.no_vtk && vtk_error.is_none() {
            vtk_error = write_level_vtk(&args.out, level).err();
        }
    });
    let rows: Vec<ConvergenceRow> = run.levels.iter().map(row).collect();
    write_convergence_csv(&rows, bench.dim(), args.out.join("convergence.csv"))?;
    if let Some(e) = vtk_error {
        return Err(e);
    }
    let levels = run.into_result()?;
    if rows.len() >= 2 {
        let n: Vec<usize> = rows.iter().map(|r| r.n_vertices).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.eta).collect();
        let _ = writeln!(out, "fitted rate of eta: {:.4}", fitted_rate(&n, &e, bench.dim()));
    }
    Ok(levels)
}

fn run_command(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::RunBenchmark(a) => {
            let bench = benchmark(&a.name)?;
            run_loop(&bench, &a.common, out)?;
        }
        Command::DenoiseImage(a) => {
            let img = match &a.pgm {
                Some(p) => load_pgm(p)?,
                None => synthetic_image(),
            };
            let bench = image_problem_benchmark("image", img.clone(), a.alpha, a.subdivisions);
            let levels = run_loop(&bench, &a.common, out)?;
            if let Some(last) = levels.last() {
                let raster = rasterize(last.mesh(), &last.u_bar, img.width, img.height);
                let pixels = raster.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                write_pgm(
                    &ImageData::new(img.width, img.height, pixels)?,
                    a.common.out.join("denoised.pgm"),
                )?;
                let err = pixel_l2_error_sq(last.mesh(), &last.u_bar, &img);
                let _ = writeln!(out, "squared L2 distance to the input: {err:.6e}");
                let _ = writeln!(out, "final vertices: {}", last.n_vertices);
            }
        }
        Command::Rates(a) => {
            let rows = read_convergence_csv(&a.csv)?;
            let skip = a.last.map(|k| rows.len().saturating_sub(k)).unwrap_or(0);
            let rows = &rows[skip..];
            if rows.len() < 2 {
                return Err(Error::InvalidParameter("at least two rows are needed".into()));
            }
            for (r, rate) in rows.iter().zip(pairwise_rates(rows, a.dim)) {
                match rate {
                    Some(x) => writeln!(out, "level {:>3}: N = {:>9}, rate {x:.4}", r.level, r.n_vertices),
                    None => writeln!(out, "level {:>3}: N = {:>9}", r.level, r.n_vertices),
                }
                .ok();
            }
            let n: Vec<usize> = rows.iter().map(|r| r.n_vertices).collect();
            let e: Vec<f64> = rows.iter().map(|r| r.eta).collect();
            let _ = writeln!(out, "fitted rate: {:.4}", fitted_rate(&n, &e, a.dim));
        }
        Command::Export(a) => {
            let bench = benchmark(&a.name)?;
            let mut mesh = bench.initial_mesh()?;
            for _ in 0..a.refinements {
                mesh = refine_uniform(&mesh)?;
            }
            let g_h = bench.project_data(&mesh)?;
            let u = match &bench.exact {
                Some(e) => {
                    let u = e.u.clone();
                    Some(p0_project_fn(&mesh, move |x| u(x), 5)?)
                }
                None => None,
            };
            let mut fields = vec![VtkField::P0("g_h", &g_h)];
            if let Some(u) = &u {
                fields.push(VtkField::P0("u_exact", u));
            }
            if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            export_vtk(&mesh, &fields, &a.out)?;
            if let Some(p) = &a.pgm_out {
                if a.name != "image" {
                    return Err(Error::InvalidParameter("--pgm-out needs the image benchmark".into()));
                }
                write_pgm(&synthetic_image(), p)?;
            }
            let _ = writeln!(
                out,
                "wrote {} ({} vertices, {} elements)",
                a.out.display(),
                mesh.n_vertices(),
                mesh.n_elements()
            );
        }
    }
    Ok(())
}

/// Runs the command line `args` (program name first), writing reports to
/// `out`, and returns the process exit code: 0 on success, 1 on runtime
/// failures, 2 on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Full usage text.
pub fn usage() -> String {
    Cli::command().render_long_help().to_string()
}
