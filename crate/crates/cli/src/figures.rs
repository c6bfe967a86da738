//! The `figures` subcommand: assembles delimited data files for the
//! standard plots from previously written run reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::output::{read_report, RunReportDoc};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct FiguresArgs {
    /// Figure id: window-histogram, error-vs-order, or adaptive-vs-order.
    #[arg(long)]
    pub id: String,
    /// Run reports feeding the figure.
    #[arg(long, required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Output directory for the data files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn load_reports(paths: &[PathBuf]) -> Result<Vec<(PathBuf, RunReportDoc)>, CliError> {
    paths
        .iter()
        .map(|p| read_report(p).map(|doc| (p.clone(), doc)))
        .collect()
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Entry point for `sassim figures`.
pub fn figures(args: &FiguresArgs) -> Result<(), CliError> {
    let reports = load_reports(&args.runs)?;
    let written = match args.id.as_str() {
        "window-histogram" => window_histogram(&args.out_dir, &reports)?,
        "error-vs-order" => error_vs_order(&args.out_dir, &reports)?,
        "adaptive-vs-order" => adaptive_vs_order(&args.out_dir, &reports)?,
        other => {
            return Err(CliError::Figures(format!(
                "unknown figure id {other:?}; available: window-histogram, error-vs-order, \
                 adaptive-vs-order"
            )))
        }
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Per-window step series of each run.
fn window_histogram(
    out_dir: &Path,
    reports: &[(PathBuf, RunReportDoc)],
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (k, (path, doc)) in reports.iter().enumerate() {
        let t0_col = doc
            .windows
            .columns
            .iter()
            .position(|c| c == "t0")
            .ok_or_else(|| {
                CliError::Figures(format!(
                    "{} has no window table; rerun the simulation to regenerate it",
                    path.display()
                ))
            })?;
        let h_col = doc.windows.columns.iter().position(|c| c == "h").unwrap();
        let mut out = String::new();
        out.push_str("# accepted window lengths of one run\n");
        out.push_str("# column 1: window index\n");
        out.push_str("# column 2: window start time (s)\n");
        out.push_str("# column 3: accepted window length (s)\n");
        for (i, row) in doc.windows.rows.iter().enumerate() {
            writeln!(out, "{i} {:.9e} {:.9e}", row[t0_col], row[h_col]).unwrap();
        }
        written.push(write_file(
            out_dir,
            &format!("window_histogram_{k}.dat"),
            &out,
        )?);
    }
    Ok(written)
}

fn benchmark_echo<'a>(
    path: &Path,
    doc: &'a RunReportDoc,
) -> Result<&'a crate::output::BenchmarkEcho, CliError> {
    doc.benchmark.as_ref().ok_or_else(|| {
        CliError::Figures(format!(
            "{} is not a benchmark report; run `sassim run --benchmark linear ...` first",
            path.display()
        ))
    })
}

/// Order/error pairs from fixed-window benchmark runs.
fn error_vs_order(
    out_dir: &Path,
    reports: &[(PathBuf, RunReportDoc)],
) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for (path, doc) in reports {
        let bench = benchmark_echo(path, doc)?;
        rows.push((doc.config.order, bench.max_abs_error));
    }
    rows.sort_by_key(|(order, _)| *order);
    let mut out = String::new();
    out.push_str("# largest absolute benchmark error per series order\n");
    out.push_str("# column 1: series order\n");
    out.push_str("# column 2: max |e(t)| against the closed form\n");
    for (order, err) in rows {
        writeln!(out, "{order} {err:.9e}").unwrap();
    }
    Ok(vec![write_file(out_dir, "error_vs_order.dat", &out)?])
}

/// Mean adaptive window per order (plus tolerance and error columns).
fn adaptive_vs_order(
    out_dir: &Path,
    reports: &[(PathBuf, RunReportDoc)],
) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for (path, doc) in reports {
        if !doc.config.adaptive {
            return Err(CliError::Figures(format!(
                "{} is a fixed-window run; rerun with --adaptive",
                path.display()
            )));
        }
        let bench = benchmark_echo(path, doc)?;
        rows.push((
            doc.config.order,
            doc.config.eps.unwrap_or(f64::NAN),
            bench.mean_window_s,
            bench.max_abs_error,
        ));
    }
    rows.sort_by_key(|(order, ..)| *order);
    let mut out = String::new();
    out.push_str("# adaptive-window statistics per series order\n");
    out.push_str("# column 1: series order\n");
    out.push_str("# column 2: error-rate tolerance\n");
    out.push_str("# column 3: mean accepted window (s)\n");
    out.push_str("# column 4: max |e(t)| against the closed form\n");
    for (order, eps, mean, err) in rows {
        writeln!(out, "{order} {eps:.6e} {mean:.9e} {err:.9e}").unwrap();
    }
    Ok(vec![write_file(out_dir, "adaptive_vs_order.dat", &out)?])
}
