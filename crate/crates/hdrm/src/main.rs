use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdrm::output::{emit_outputs, solution_csv, OutputFormat};
use hdrm::{compare_methods, mesh_io, run_method, BenchmarkReport, DriverError, Method, ProblemFile};

/// Hybrid dual-reciprocity / finite-element solver.
///
/// Log verbosity is read from HDRM_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "hdrm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem with one method.
    Solve {
        problem: PathBuf,
        /// hdrm, gauss_seidel, dynamic_relaxation or dual_reciprocity;
        /// defaults to the first method listed in the file.
        #[arg(long)]
        method: Option<String>,
        /// Directory for the solution and report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every listed method and tabulate their errors.
    Compare {
        problem: PathBuf,
        /// Directory for the CSV tables, report and plot series.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a summary of a mesh file.
    MeshInfo { mesh: PathBuf },
}

const FORMATS: [OutputFormat; 2] = [OutputFormat::Csv, OutputFormat::PlotData];

fn print_summary(report: &BenchmarkReport) {
    println!("{:<20} {:>24} {:>12} {:>10} {:>10}", "method", "final_error", "iterations", "rate", "time_s");
    for r in &report.reports {
        let err = r.final_error.map_or_else(|| "NA".to_string(), |e| format!("{e:.6e}"));
        println!(
            "{:<20} {:>24} {:>12} {:>10} {:>10.3}",
            r.method.label(),
            err,
            r.iterations,
            r.rate.as_str(),
            r.wall_time.as_secs_f64()
        );
    }
}

fn written(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn solve(problem: &Path, method: Option<&str>, out: Option<&Path>) -> Result<(), DriverError> {
    let pf = ProblemFile::read(problem)?;
    let method = match method {
        Some(m) => m.parse::<Method>().map_err(|e| DriverError::Validation(vec![hdrm::Issue::general(e)]))?,
        None => pf.methods.first().copied().unwrap_or(Method::Hdrm),
    };
    let report = run_method(&pf, method)?;
    let converged = report.converged;
    let bench = BenchmarkReport::from_reports(vec![report]);
    print_summary(&bench);
    if let Some(dir) = out {
        let mut files = emit_outputs(&bench, dir, &FORMATS)?;
        let r = &bench.reports[0];
        let path = dir.join("solution.csv");
        std::fs::write(&path, solution_csv(&r.mesh, &r.u)).map_err(|e| DriverError::io(&path, e))?;
        files.push(path);
        written(&files);
    }
    if converged {
        Ok(())
    } else {
        Err(DriverError::NotConverged(method.label().to_string()))
    }
}

fn compare(problem: &Path, out: Option<&Path>) -> Result<(), DriverError> {
    let pf = ProblemFile::read(problem)?;
    let report = compare_methods(&pf)?;
    print_summary(&report);
    if let Some(dir) = out {
        written(&emit_outputs(&report, dir, &FORMATS)?);
    }
    let failed = report.unconverged();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|m| m.label()).collect();
        Err(DriverError::NotConverged(names.join(", ")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HDRM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { problem, method, out } => solve(problem, method.as_deref(), out.as_deref()),
        Command::Compare { problem, out } => compare(problem, out.as_deref()),
        Command::MeshInfo { mesh } => mesh_io::read_mesh(mesh).map(|m| print!("{}", mesh_io::describe(&m))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
