//! CSV tables and gnuplot series.
//!
//! Numbers are written in Rust's shortest round-trip form so that reading a
//! file back reproduces the in-memory values exactly. Missing values are
//! written as `NA`. Wall-clock times never enter these files, which keeps
//! repeated runs byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hdrm_core::adapt::AdaptiveReport;
use hdrm_core::Mesh;
use hdrm_core::newton::NewtonState;

use crate::driver::{BenchmarkReport, SolverReport};
use crate::error::{DriverError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// `convergence.csv`, `errors.csv`, `delta.csv`, `report.txt`, plus the
    /// Newton and refinement histories of each method.
    Csv,
    /// One whitespace-separated `iteration error` file per method.
    PlotData,
}

/// Explanation placed at the top of `report.txt`.
pub const REPORT_HEADER: &str = "\
# error: L2 norm of (u_h - u_exact) over the final mesh
# iterations: fixed budget for gauss_seidel and dynamic_relaxation;
#   Newton iterations for dual_reciprocity; cumulative Newton iterations
#   over all refinement generations for hdrm
# rate: least-squares slope s of log(error) against log(iteration) over the
#   recorded checkpoints; Fast if s <= -1, Moderate if -1 < s <= -0.5,
#   Slow otherwise; a single checkpoint counts as Fast
# delta: |E_i - E_j| for every pair of listed methods
";

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

pub fn convergence_csv(report: &BenchmarkReport) -> String {
    let mut o = String::from("method,iteration,error\n");
    for r in &report.reports {
        for &(it, e) in &r.trace {
            let _ = writeln!(o, "{},{it},{}", r.method, num(e));
        }
    }
    o
}

pub fn errors_csv(report: &BenchmarkReport) -> String {
    let mut o = String::from("method,final_error,iterations,rate,converged\n");
    for r in &report.reports {
        let _ = writeln!(
            o,
            "{},{},{},{},{}",
            r.method,
            opt(r.final_error),
            r.iterations,
            r.rate.as_str(),
            r.converged
        );
    }
    o
}

pub fn delta_csv(report: &BenchmarkReport) -> String {
    let mut o = String::from("method_a,method_b,delta_error\n");
    for (i, j, d) in report.delta.pairs() {
        let _ = writeln!(o, "{},{},{}", report.delta.methods[i], report.delta.methods[j], num(d));
    }
    o
}

/// `iter, residual_norm, step_H1, inner_iters`
pub fn newton_csv(trace: &[NewtonState]) -> String {
    let mut o = String::from("iter,residual_norm,step_H1,inner_iters\n");
    for s in trace {
        let _ = writeln!(
            o,
            "{},{},{},{}",
            s.iteration,
            num(s.residual_norm),
            opt(s.step_norm),
            s.inner_iterations
        );
    }
    o
}

/// `generation, elements, nodes, marked, L2_error, newton_iters`
pub fn adapt_csv(report: &AdaptiveReport) -> String {
    let mut o = String::from("generation,elements,nodes,marked,L2_error,newton_iters\n");
    for g in &report.generations {
        let _ = writeln!(
            o,
            "{},{},{},{},{},{}",
            g.generation,
            g.elements,
            g.nodes,
            g.marked,
            opt(g.l2_error),
            g.newton_iterations
        );
    }
    o
}

/// `node, x, y, u`
pub fn solution_csv(mesh: &Mesh, u: &[f64]) -> String {
    let mut o = String::from("node,x,y,u\n");
    for (n, v) in mesh.nodes().iter().zip(u) {
        let _ = writeln!(o, "{},{},{},{}", n.id, n.x, n.y, num(*v));
    }
    o
}

pub fn series(report: &SolverReport) -> String {
    let mut o = format!("# {} ({})\n# iteration error\n", report.method.label(), report.method);
    for &(it, e) in &report.trace {
        let _ = writeln!(o, "{it} {}", num(e));
    }
    o
}

pub fn report_text(report: &BenchmarkReport) -> String {
    let mut o = String::from(REPORT_HEADER);
    let _ = writeln!(o, "\n{:<20} {:>24} {:>12} {:>10}", "method", "final_error", "iterations", "rate");
    for r in &report.reports {
        let _ = writeln!(
            o,
            "{:<20} {:>24} {:>12} {:>10}",
            r.method.label(),
            opt(r.final_error),
            r.iterations,
            r.rate.as_str()
        );
    }
    let _ = writeln!(o, "\n{:<42} {:>24}", "pair", "delta_error");
    for (i, j, d) in report.delta.pairs() {
        let pair = format!("{} / {}", report.reports[i].method.label(), report.reports[j].method.label());
        let _ = writeln!(o, "{pair:<42} {:>24}", num(d));
    }
    o
}

fn write(dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| DriverError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the requested formats into `dir` (created if needed) and returns
/// the files written, in order. Per-method files carry the method's position
/// in the list so a method listed twice does not overwrite itself.
pub fn emit_outputs(report: &BenchmarkReport, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| DriverError::io(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&OutputFormat::Csv) {
        write(dir, "convergence.csv", &convergence_csv(report), &mut written)?;
        write(dir, "errors.csv", &errors_csv(report), &mut written)?;
        write(dir, "delta.csv", &delta_csv(report), &mut written)?;
        write(dir, "report.txt", &report_text(report), &mut written)?;
        for (i, r) in report.reports.iter().enumerate() {
            if !r.newton_trace.is_empty() {
                write(dir, &format!("newton_{i}_{}.csv", r.method), &newton_csv(&r.newton_trace), &mut written)?;
            }
            if let Some(a) = &r.adapt {
                write(dir, &format!("adapt_{i}_{}.csv", r.method), &adapt_csv(a), &mut written)?;
            }
        }
    }
    if formats.contains(&OutputFormat::PlotData) {
        for (i, r) in report.reports.iter().enumerate() {
            write(dir, &format!("convergence_{i}_{}.dat", r.method), &series(r), &mut written)?;
        }
    }
    Ok(written)
}

fn value(s: &str) -> std::result::Result<f64, String> {
    if s == "NA" {
        Ok(f64::NAN)
    } else {
        s.parse().map_err(|_| format!("malformed number `{s}`"))
    }
}

fn rows<'a>(text: &'a str, header: &str, width: usize) -> std::result::Result<Vec<Vec<&'a str>>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(format!("expected header `{header}`"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() == width {
                Ok(cols)
            } else {
                Err(format!("row {}: expected {width} columns, found {}", i + 1, cols.len()))
            }
        })
        .collect()
}

/// Rows of `convergence.csv` as `(method, iteration, error)`.
pub fn parse_convergence_csv(text: &str) -> std::result::Result<Vec<(String, usize, f64)>, String> {
    rows(text, "method,iteration,error", 3)?
        .into_iter()
        .map(|c| {
            let it = c[1].parse().map_err(|_| format!("malformed iteration `{}`", c[1]))?;
            Ok((c[0].to_string(), it, value(c[2])?))
        })
        .collect()
}

/// Rows of `errors.csv` as `(method, final_error, iterations, rate, converged)`.
pub fn parse_errors_csv(text: &str) -> std::result::Result<Vec<(String, f64, usize, String, bool)>, String> {
    rows(text, "method,final_error,iterations,rate,converged", 5)?
        .into_iter()
        .map(|c| {
            let it = c[2].parse().map_err(|_| format!("malformed iteration count `{}`", c[2]))?;
            let conv = c[4].parse().map_err(|_| format!("malformed flag `{}`", c[4]))?;
            Ok((c[0].to_string(), value(c[1])?, it, c[3].to_string(), conv))
        })
        .collect()
}

/// Rows of `delta.csv` as `(method_a, method_b, delta)`.
pub fn parse_delta_csv(text: &str) -> std::result::Result<Vec<(String, String, f64)>, String> {
    rows(text, "method_a,method_b,delta_error", 3)?
        .into_iter()
        .map(|c| Ok((c[0].to_string(), c[1].to_string(), value(c[2])?)))
        .collect()
}
