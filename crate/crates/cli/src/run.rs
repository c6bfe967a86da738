//! The `run` subcommand: builds the simulation configuration from flags,
//! drives the engine or the linear benchmark, and writes the artifacts.

use std::path::PathBuf;

use clap::Args;

use sassim_core::engine::benchmark::{run_linear_benchmark, BenchConfig, LinearBenchmark};
use sassim_core::engine::{
    compare, simulate, Method, SimConfig, TimedEvent, Trajectory, WindowMeta, WindowPolicy,
};
use sassim_core::network::{default_fault_admittance, NetworkEvent};
use sassim_core::stepper::{StepperConfig, ToleranceSet};
use sassim_core::Complex64;

use crate::caseio::{load_case, LoadedCase};
use crate::exec::{WallClock, WorkerPool};
use crate::output::{
    self, read_trajectory, write_report, write_trajectory, BenchmarkEcho, ConfigEcho, DiffEntry,
    RunReportDoc,
};
use crate::{from_sim_error, CliError};

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Case file to simulate (TOML).
    #[arg(long, conflicts_with = "benchmark")]
    pub case: Option<PathBuf>,
    /// Built-in benchmark instead of a case; only `linear` exists.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Integration method: sas, fe, or rk4.
    #[arg(long, default_value = "sas")]
    pub method: String,
    /// Series order n.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Voltage-polynomial order n_v.
    #[arg(long, default_value_t = 1)]
    pub vorder: usize,
    /// Simulated horizon (s).
    #[arg(long, default_value_t = 10.0)]
    pub tend: f64,
    /// Fixed step for fe/rk4 (s).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Force fixed windows of this length for the sas method (s).
    #[arg(long)]
    pub fixed_window: Option<f64>,
    /// Adaptive windows (default for sas case runs; benchmark runs default
    /// to fixed 0.01 s windows unless this is set).
    #[arg(long)]
    pub adaptive: bool,
    /// Single error-rate tolerance for benchmark runs.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Rotor-angle error-rate tolerance (degrees per second).
    #[arg(long, default_value_t = 2.0)]
    pub eps_angle: f64,
    /// Voltage-state error-rate tolerance (pu per second).
    #[arg(long, default_value_t = 0.01)]
    pub eps_voltage: f64,
    /// Mechanical-power error-rate tolerance (pu per second).
    #[arg(long, default_value_t = 0.001)]
    pub eps_power: f64,
    /// Probe safety factor.
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    /// Initial previous-window length (s).
    #[arg(long, default_value_t = 1e-3)]
    pub hpre: f64,
    /// Window floor (s).
    #[arg(long)]
    pub hmin: Option<f64>,
    /// Window cap (s).
    #[arg(long)]
    pub hmax: Option<f64>,
    /// Bus fault: `bus=ID,t=TIME[,tclear=TIME][,g=G][,b=B]` (repeatable).
    #[arg(long)]
    pub fault: Vec<String>,
    /// Branch trip: `from=ID,to=ID,t=TIME[,tclose=TIME]` (repeatable).
    #[arg(long)]
    pub trip: Vec<String>,
    /// Trajectory output path (default `trajectory.csv`).
    #[arg(long)]
    pub out_traj: Option<PathBuf>,
    /// Report output path (default `report.toml`).
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Record every k-th window.
    #[arg(long, default_value_t = 1)]
    pub decim: usize,
    /// Additionally sample the accepted window polynomials every this many
    /// seconds (rows marked interpolated).
    #[arg(long)]
    pub dense_dt: Option<f64>,
    /// Reference trajectory to diff against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Channels for the comparison (default: all shared).
    #[arg(long)]
    pub compare_channels: Vec<String>,
    /// Interface-iteration voltage tolerance (pu).
    #[arg(long, default_value_t = 2e-9)]
    pub tol_v: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iface_iter: usize,
    /// Benchmark parameters.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub omega: f64,
    #[arg(long, default_value_t = -0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub xdot0: f64,
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    match s {
        "sas" => Ok(Method::Sas),
        "fe" => Ok(Method::Fe),
        "rk4" => Ok(Method::Rk4),
        other => Err(CliError::Usage(format!(
            "unknown method {other:?} (expected sas, fe, or rk4)"
        ))),
    }
}

fn parse_kv(spec: &str) -> Result<Vec<(String, f64)>, CliError> {
    spec.split(',')
        .map(|pair| {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("expected key=value in event spec, got {pair:?}"))
            })?;
            let val = v.parse::<f64>().map_err(|e| {
                CliError::Usage(format!("bad number {v:?} for {k} in event spec: {e}"))
            })?;
            Ok((k.trim().to_string(), val))
        })
        .collect()
}

fn take(map: &mut Vec<(String, f64)>, key: &str) -> Option<f64> {
    map.iter()
        .position(|(k, _)| k == key)
        .map(|i| map.remove(i).1)
}

/// Expands `--fault`/`--trip` specs into timed events, sorted by time.
pub fn parse_events(
    loaded: &LoadedCase,
    faults: &[String],
    trips: &[String],
) -> Result<(Vec<TimedEvent>, Vec<String>), CliError> {
    let mut events = Vec::new();
    let mut echo = Vec::new();
    for spec in faults {
        let mut kv = parse_kv(spec)?;
        let bus_id = take(&mut kv, "bus")
            .ok_or_else(|| CliError::Usage(format!("fault spec {spec:?} needs bus=")))?
            as u32;
        let t = take(&mut kv, "t")
            .ok_or_else(|| CliError::Usage(format!("fault spec {spec:?} needs t=")))?;
        let tclear = take(&mut kv, "tclear");
        let g = take(&mut kv, "g");
        let b = take(&mut kv, "b");
        if !kv.is_empty() {
            return Err(CliError::Usage(format!(
                "unknown keys in fault spec {spec:?}: {:?}",
                kv.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>()
            )));
        }
        let bus = loaded.bus_index_of(bus_id)?;
        let default_y = default_fault_admittance();
        let admittance = Complex64::new(g.unwrap_or(default_y.re), b.unwrap_or(default_y.im));
        events.push(TimedEvent {
            time: t,
            event: NetworkEvent::FaultOn { bus, admittance },
        });
        echo.push(format!("fault-on bus {bus_id} at {t} s"));
        if let Some(tc) = tclear {
            events.push(TimedEvent {
                time: tc,
                event: NetworkEvent::FaultOff { bus },
            });
            echo.push(format!("fault-off bus {bus_id} at {tc} s"));
        }
    }
    for spec in trips {
        let mut kv = parse_kv(spec)?;
        let from_id = take(&mut kv, "from")
            .ok_or_else(|| CliError::Usage(format!("trip spec {spec:?} needs from=")))?
            as u32;
        let to_id = take(&mut kv, "to")
            .ok_or_else(|| CliError::Usage(format!("trip spec {spec:?} needs to=")))?
            as u32;
        let t = take(&mut kv, "t")
            .ok_or_else(|| CliError::Usage(format!("trip spec {spec:?} needs t=")))?;
        let tclose = take(&mut kv, "tclose");
        if !kv.is_empty() {
            return Err(CliError::Usage(format!(
                "unknown keys in trip spec {spec:?}"
            )));
        }
        let from = loaded.bus_index_of(from_id)?;
        let to = loaded.bus_index_of(to_id)?;
        events.push(TimedEvent {
            time: t,
            event: NetworkEvent::BranchTrip { from, to },
        });
        echo.push(format!("trip branch {from_id}-{to_id} at {t} s"));
        if let Some(tc) = tclose {
            events.push(TimedEvent {
                time: tc,
                event: NetworkEvent::BranchClose { from, to },
            });
            echo.push(format!("close branch {from_id}-{to_id} at {tc} s"));
        }
    }
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    Ok((events, echo))
}

fn stepper_config(args: &RunArgs, benchmark: bool) -> StepperConfig {
    let mut cfg = StepperConfig {
        alpha: args.alpha,
        h_pre: args.hpre,
        ..StepperConfig::default()
    };
    if benchmark {
        // benchmark runs lift the cap: window growth is bounded by the
        // tolerance alone
        cfg.h_min = 1e-6;
        cfg.h_max_cap = 20.0;
    }
    if let Some(hmin) = args.hmin {
        cfg.h_min = hmin;
    }
    if let Some(hmax) = args.hmax {
        cfg.h_max_cap = hmax;
    }
    cfg
}

/// Entry point for `sassim run`.
pub fn run(args: &RunArgs) -> Result<(), CliError> {
    match (&args.case, &args.benchmark) {
        (Some(_), None) => run_case(args),
        (None, Some(name)) if name == "linear" => run_benchmark(args),
        (None, Some(other)) => Err(CliError::Usage(format!(
            "unknown benchmark {other:?} (only `linear` exists)"
        ))),
        (None, None) => Err(CliError::Usage(
            "either --case or --benchmark is required".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn run_case(args: &RunArgs) -> Result<(), CliError> {
    let path = args.case.as_ref().unwrap();
    let loaded = load_case(path)?;
    let method = parse_method(&args.method)?;
    let (events, event_echo) = parse_events(&loaded, &args.fault, &args.trip)?;

    let mut cfg = SimConfig::new(method, args.tend);
    cfg.order = args.order;
    cfg.v_order = args.vorder;
    cfg.tolerances = ToleranceSet::power_system(args.eps_angle, args.eps_voltage, args.eps_power);
    cfg.stepper = stepper_config(args, false);
    cfg.window = match args.fixed_window {
        Some(dt) => WindowPolicy::Fixed(dt),
        None => WindowPolicy::Adaptive,
    };
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    cfg.events = events;
    cfg.decimation = args.decim;
    cfg.dense_dt = args.dense_dt;
    cfg.tol_v = args.tol_v;
    cfg.max_iface_iter = args.max_iface_iter;

    let pool = WorkerPool::from_env();
    let clock = WallClock::new();
    let out =
        simulate(&loaded.case, &cfg, &pool, &clock).map_err(|e| from_sim_error(e, path))?;

    let traj_path = args
        .out_traj
        .clone()
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    write_trajectory(&traj_path, &out.trajectory)?;

    let comparison = match &args.compare {
        Some(ref_path) => {
            let reference = read_trajectory(ref_path)?;
            let diffs = compare(&out.trajectory, &reference, &args.compare_channels)
                .map_err(|e| CliError::Compare(e.to_string()))?;
            Some(
                diffs
                    .into_iter()
                    .map(|d| DiffEntry {
                        channel: d.channel,
                        max_abs: d.max_abs,
                        mean_abs: d.mean_abs,
                    })
                    .collect(),
            )
        }
        None => None,
    };

    let doc = RunReportDoc {
        format_version: 1,
        config: ConfigEcho {
            method: args.method.clone(),
            order: cfg.order,
            v_order: cfg.v_order,
            t_end: cfg.t_end,
            adaptive: matches!(cfg.window, WindowPolicy::Adaptive),
            fixed_window: args.fixed_window,
            dt: args.dt,
            eps: None,
            eps_angle_deg_per_s: Some(args.eps_angle),
            eps_voltage_pu_per_s: Some(args.eps_voltage),
            eps_power_pu_per_s: Some(args.eps_power),
            alpha: cfg.stepper.alpha,
            h_pre: cfg.stepper.h_pre,
            h_min: cfg.stepper.h_min,
            h_max_cap: cfg.stepper.h_max_cap,
            tol_v: cfg.tol_v,
            max_iface_iter: cfg.max_iface_iter,
            decimation: cfg.decimation,
            case: Some(path.display().to_string()),
            benchmark: None,
            events: event_echo,
            workers: pool.workers,
        },
        counts: output::counts(&out.stats, &out.trajectory.windows),
        timings: output::timings(&out.stats),
        benchmark: None,
        comparison,
        windows: output::window_table(&out.trajectory.windows, 3),
    };
    let report_path = args
        .out_report
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.toml"));
    write_report(&report_path, &doc)?;
    println!(
        "wrote {} ({} windows) and {}",
        traj_path.display(),
        out.stats.windows,
        report_path.display()
    );
    Ok(())
}

fn run_benchmark(args: &RunArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let bench = LinearBenchmark {
        omega: args.omega,
        sigma: args.sigma,
        x0: args.x0,
        xdot0: args.xdot0,
    };
    let eps = args.eps.unwrap_or(0.006);
    let window = if args.adaptive {
        WindowPolicy::Adaptive
    } else {
        WindowPolicy::Fixed(args.fixed_window.unwrap_or(0.01))
    };
    let cfg = BenchConfig {
        method,
        order: args.order,
        dt: args.dt.unwrap_or(0.01),
        window,
        eps,
        stepper: stepper_config(args, true),
        t_end: args.tend,
        error_samples: 8,
    };
    let report = run_linear_benchmark(&bench, &cfg)
        .map_err(|e| from_sim_error(e, std::path::Path::new("benchmark")))?;

    // window-end trajectory for plotting
    let mut traj = Trajectory {
        channels: vec!["x".into(), "xdot".into()],
        ..Trajectory::default()
    };
    traj.times.push(0.0);
    traj.values.push(vec![bench.x0, bench.xdot0]);
    traj.interpolated.push(false);
    for (k, w) in report.windows.iter().enumerate() {
        // the state reached at the end of window k is the start of k + 1
        let end_state = match report.windows.get(k + 1) {
            Some(next) => vec![next.x0, next.xdot0],
            None => vec![report.final_state.0, report.final_state.1],
        };
        traj.times.push(w.t0 + w.h);
        traj.values.push(end_state);
        traj.interpolated.push(false);
        traj.windows.push(WindowMeta {
            t0: w.t0,
            h: w.h,
            proposed_h: w.proposed,
            bisected: w.bisected,
            self_start: false,
            iface_iters: 0,
            r: vec![w.r_accepted],
        });
    }

    let traj_path = args
        .out_traj
        .clone()
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    write_trajectory(&traj_path, &traj)?;

    let doc = RunReportDoc {
        format_version: 1,
        config: ConfigEcho {
            method: args.method.clone(),
            order: args.order,
            v_order: 0,
            t_end: args.tend,
            adaptive: args.adaptive,
            fixed_window: match window {
                WindowPolicy::Fixed(dt) => Some(dt),
                WindowPolicy::Adaptive => None,
            },
            dt: args.dt,
            eps: Some(eps),
            eps_angle_deg_per_s: None,
            eps_voltage_pu_per_s: None,
            eps_power_pu_per_s: None,
            alpha: cfg.stepper.alpha,
            h_pre: cfg.stepper.h_pre,
            h_min: cfg.stepper.h_min,
            h_max_cap: cfg.stepper.h_max_cap,
            tol_v: 0.0,
            max_iface_iter: 0,
            decimation: 1,
            case: None,
            benchmark: Some("linear".into()),
            events: Vec::new(),
            workers: 1,
        },
        counts: output::Counts {
            windows: report.window_count(),
            network_solves: 0,
            extra_solves: 0,
            voltage_refits: 0,
            mean_window_s: report.mean_window,
        },
        timings: output::Timings {
            device_sas_s: 0.0,
            network_s: 0.0,
            window_selection_s: 0.0,
            voltage_fit_s: 0.0,
            total_s: 0.0,
        },
        benchmark: Some(BenchmarkEcho {
            omega: bench.omega,
            sigma: bench.sigma,
            x0: bench.x0,
            xdot0: bench.xdot0,
            max_abs_error: report.max_abs_error,
            first_window_s: report.first_window().unwrap_or(0.0),
            mean_window_s: report.mean_window,
            window_count: report.window_count(),
        }),
        comparison: None,
        windows: output::window_table(&traj.windows, 1),
    };
    let report_path = args
        .out_report
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.toml"));
    write_report(&report_path, &doc)?;
    println!(
        "benchmark: max |e(t)| = {:.4e}, first window = {:.4} s, mean window = {:.4} s \
         ({} windows); wrote {} and {}",
        report.max_abs_error,
        report.first_window().unwrap_or(0.0),
        report.mean_window,
        report.window_count(),
        traj_path.display(),
        report_path.display()
    );
    Ok(())
}
