//! Trajectory container, per-window metadata, phase accounting, and
//! trajectory comparison.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Simulation output: named channels sampled on a strictly increasing time
/// grid, plus per-window metadata aligned with accepted windows.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub channels: Vec<String>,
    pub times: Vec<f64>,
    /// One row per time, one column per channel.
    pub values: Vec<Vec<f64>>,
    /// Rows sampled from the window polynomial rather than a solved state.
    pub interpolated: Vec<bool>,
    pub windows: Vec<WindowMeta>,
}

/// Metadata of one accepted window.
#[derive(Debug, Clone)]
pub struct WindowMeta {
    pub t0: f64,
    pub h: f64,
    /// Stepper proposal before verification and event snapping (equal to
    /// `h` for fixed windows).
    pub proposed_h: f64,
    pub bisected: bool,
    pub self_start: bool,
    pub iface_iters: usize,
    /// Per-class error-rate bound over the accepted window (empty for
    /// fixed-step methods).
    pub r: Vec<f64>,
}

/// Wall-clock phase accounting and counters for one run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub windows: usize,
    /// Network solves performed inside window interface iterations.
    pub network_solves: usize,
    /// Extra solves at t = 0 and immediately after events.
    pub extra_solves: usize,
    pub refits: usize,
    pub device_sas_s: f64,
    pub network_s: f64,
    pub window_selection_s: f64,
    pub voltage_fit_s: f64,
    pub total_s: f64,
}

impl Trajectory {
    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[index]).collect()
    }

    fn interpolate_at(&self, col: usize, t: f64) -> f64 {
        let times = &self.times;
        match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => self.values[i][col],
            Err(i) => {
                if i == 0 {
                    self.values[0][col]
                } else if i >= times.len() {
                    self.values[times.len() - 1][col]
                } else {
                    let (t0, t1) = (times[i - 1], times[i]);
                    let (y0, y1) = (self.values[i - 1][col], self.values[i][col]);
                    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDiff {
    pub channel: String,
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompareError {
    DisjointRanges,
    UnknownChannel(String),
    Empty,
}

impl fmt::Display for CompareError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompareError::DisjointRanges => write!(f, "trajectories share no time range"),
            CompareError::UnknownChannel(c) => {
                write!(f, "channel {c} missing from one trajectory")
            }
            CompareError::Empty => write!(f, "empty trajectory"),
        }
    }
}

impl core::error::Error for CompareError {}

/// Per-channel max/mean absolute difference over the common time range.
/// The denser trajectory is interpolated onto the sparser grid.
pub fn compare(
    a: &Trajectory,
    b: &Trajectory,
    channels: &[String],
) -> Result<Vec<ChannelDiff>, CompareError> {
    if a.times.is_empty() || b.times.is_empty() {
        return Err(CompareError::Empty);
    }
    let start = a.times[0].max(b.times[0]);
    let end = a.times[a.times.len() - 1].min(b.times[b.times.len() - 1]);
    if end < start {
        return Err(CompareError::DisjointRanges);
    }
    let names: Vec<String> = if channels.is_empty() {
        a.channels
            .iter()
            .filter(|c| b.channel_index(c).is_some())
            .cloned()
            .collect()
    } else {
        channels.to_vec()
    };
    let (sparse, dense) = if a.times.len() <= b.times.len() {
        (a, b)
    } else {
        (b, a)
    };
    let grid: Vec<f64> = sparse
        .times
        .iter()
        .copied()
        .filter(|&t| t >= start && t <= end)
        .collect();
    if grid.is_empty() {
        return Err(CompareError::DisjointRanges);
    }
    let mut out = Vec::with_capacity(names.len());
    for name in &names {
        let ia = sparse
            .channel_index(name)
            .ok_or_else(|| CompareError::UnknownChannel(name.clone()))?;
        let ib = dense
            .channel_index(name)
            .ok_or_else(|| CompareError::UnknownChannel(name.clone()))?;
        let mut max_abs = 0.0f64;
        let mut sum = 0.0f64;
        for (k, &t) in grid.iter().enumerate() {
            let ys = sparse.values[sparse
                .times
                .iter()
                .position(|&x| x == t)
                .unwrap_or(k)][ia];
            let yd = dense.interpolate_at(ib, t);
            let d = math::abs(ys - yd);
            max_abs = max_abs.max(d);
            sum += d;
        }
        out.push(ChannelDiff {
            channel: name.clone(),
            max_abs,
            mean_abs: sum / grid.len() as f64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn traj(times: Vec<f64>, vals: Vec<f64>) -> Trajectory {
        Trajectory {
            channels: vec!["x".to_string()],
            values: times.iter().zip(&vals).map(|(_, &v)| vec![v]).collect(),
            interpolated: vec![false; times.len()],
            times,
            windows: Vec::new(),
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = traj(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        let d = compare(&a, &a, &[]).unwrap();
        assert_eq!(d[0].max_abs, 0.0);
        assert_eq!(d[0].mean_abs, 0.0);
    }

    #[test]
    fn constant_offset() {
        let a = traj(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]);
        let b = traj(vec![0.0, 0.5, 1.0, 1.5, 2.0], vec![2.0; 5]);
        let d = compare(&a, &b, &[]).unwrap();
        assert_eq!(d[0].max_abs, 1.0);
        assert_eq!(d[0].mean_abs, 1.0);
    }

    #[test]
    fn disjoint_ranges_error() {
        let a = traj(vec![0.0, 1.0], vec![0.0, 0.0]);
        let b = traj(vec![5.0, 6.0], vec![0.0, 0.0]);
        assert_eq!(compare(&a, &b, &[]).unwrap_err(), CompareError::DisjointRanges);
    }

    #[test]
    fn linear_interpolation_onto_sparser_grid() {
        let a = traj(vec![0.0, 2.0], vec![0.0, 2.0]);
        let dense_times: Vec<f64> = (0..21).map(|k| 0.1 * k as f64).collect();
        let dense_vals: Vec<f64> = dense_times.iter().map(|&t| t).collect();
        let b = traj(dense_times, dense_vals);
        let d = compare(&a, &b, &[]).unwrap();
        assert!(d[0].max_abs < 1e-12);
    }
}
