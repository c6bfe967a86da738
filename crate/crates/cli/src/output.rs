//! Artifact writers and readers: delimited-text trajectories and the
//! structured run report.
//!
//! Trajectory files carry a self-describing header row and one row per
//! output time; floats are written with 17 fractional digits in scientific
//! notation, which round-trips `f64` exactly. Reports are TOML documents
//! with a config echo, counters, phase timings, and the per-window table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sassim_core::engine::{RunStats, Trajectory, WindowMeta};

use crate::CliError;

fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

/// Writes a trajectory as comma-separated text: `t`, one column per
/// channel, and a trailing 0/1 `interpolated` marker.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut out = String::new();
    out.push('t');
    for c in &traj.channels {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",interpolated\n");
    for (k, t) in traj.times.iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for v in &traj.values[k] {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push(if traj.interpolated[k] { '1' } else { '0' });
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a trajectory written by [`write_trajectory`] (window metadata is
/// not part of the text format).
pub fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse = |detail: String| CliError::Parse {
        path: path.to_path_buf(),
        detail,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse("empty file".into()))?;
    let mut cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.last() != Some(&"interpolated") {
        return Err(parse(
            "header must start with `t` and end with `interpolated`".into(),
        ));
    }
    cols.remove(0);
    cols.pop();
    let channels: Vec<String> = cols.iter().map(|s| s.to_string()).collect();
    let mut traj = Trajectory {
        channels,
        ..Trajectory::default()
    };
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != traj.channels.len() + 2 {
            return Err(parse(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                traj.channels.len() + 2,
                fields.len()
            )));
        }
        let mut nums = Vec::with_capacity(fields.len() - 1);
        for f in &fields[..fields.len() - 1] {
            nums.push(f.parse::<f64>().map_err(|e| {
                parse(format!("line {}: bad float {f:?}: {e}", lineno + 2))
            })?);
        }
        traj.times.push(nums[0]);
        traj.values.push(nums[1..].to_vec());
        traj.interpolated
            .push(fields[fields.len() - 1].trim() == "1");
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub method: String,
    pub order: usize,
    pub v_order: usize,
    pub t_end: f64,
    pub adaptive: bool,
    pub fixed_window: Option<f64>,
    pub dt: Option<f64>,
    /// Single-class tolerance (benchmark runs).
    pub eps: Option<f64>,
    pub eps_angle_deg_per_s: Option<f64>,
    pub eps_voltage_pu_per_s: Option<f64>,
    pub eps_power_pu_per_s: Option<f64>,
    pub alpha: f64,
    pub h_pre: f64,
    pub h_min: f64,
    pub h_max_cap: f64,
    pub tol_v: f64,
    pub max_iface_iter: usize,
    pub decimation: usize,
    pub case: Option<String>,
    pub benchmark: Option<String>,
    pub events: Vec<String>,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counts {
    pub windows: usize,
    /// Interface solves attributed to accepted windows.
    pub network_solves: usize,
    /// Solves at t = 0 and immediately after events.
    pub extra_solves: usize,
    pub voltage_refits: usize,
    pub mean_window_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub device_sas_s: f64,
    pub network_s: f64,
    pub window_selection_s: f64,
    pub voltage_fit_s: f64,
    pub total_s: f64,
}

/// One row per accepted window:
/// `[t0, h, proposed_h, bisected, self_start, iface_iters, r...]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffEntry {
    pub channel: String,
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkEcho {
    pub omega: f64,
    pub sigma: f64,
    pub x0: f64,
    pub xdot0: f64,
    pub max_abs_error: f64,
    pub first_window_s: f64,
    pub mean_window_s: f64,
    pub window_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReportDoc {
    pub format_version: u32,
    pub config: ConfigEcho,
    pub counts: Counts,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Vec<DiffEntry>>,
    pub windows: WindowTable,
}

pub fn window_table(windows: &[WindowMeta], n_classes: usize) -> WindowTable {
    let mut columns = vec![
        "t0".to_string(),
        "h".to_string(),
        "proposed_h".to_string(),
        "bisected".to_string(),
        "self_start".to_string(),
        "iface_iters".to_string(),
    ];
    for k in 0..n_classes {
        columns.push(format!("r{k}"));
    }
    let rows = windows
        .iter()
        .map(|w| {
            let mut row = vec![
                w.t0,
                w.h,
                w.proposed_h,
                w.bisected as u8 as f64,
                w.self_start as u8 as f64,
                w.iface_iters as f64,
            ];
            for k in 0..n_classes {
                row.push(w.r.get(k).copied().unwrap_or(f64::NAN));
            }
            row
        })
        .collect();
    WindowTable { columns, rows }
}

pub fn counts(stats: &RunStats, windows: &[WindowMeta]) -> Counts {
    let mean = if windows.is_empty() {
        0.0
    } else {
        windows.iter().map(|w| w.h).sum::<f64>() / windows.len() as f64
    };
    Counts {
        windows: stats.windows,
        network_solves: stats.network_solves,
        extra_solves: stats.extra_solves,
        voltage_refits: stats.refits,
        mean_window_s: mean,
    }
}

pub fn timings(stats: &RunStats) -> Timings {
    Timings {
        device_sas_s: stats.device_sas_s,
        network_s: stats.network_s,
        window_selection_s: stats.window_selection_s,
        voltage_fit_s: stats.voltage_fit_s,
        total_s: stats.total_s,
    }
}

pub fn write_report(path: &Path, doc: &RunReportDoc) -> Result<(), CliError> {
    let text = toml::to_string_pretty(doc).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        detail: format!("report serialization failed: {e}"),
    })?;
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<RunReportDoc, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
