//! Simulation orchestrator: initialization at the power-flow equilibrium,
//! disturbance application, window selection, per-device series evaluation,
//! network interface iteration, and voltage-series refitting -- plus the
//! fixed-step forward-Euler and RK4 reference integrators sharing the same
//! interface code path.

pub mod benchmark;
mod trajectory;

pub use trajectory::{compare, ChannelDiff, CompareError, RunStats, Trajectory, WindowMeta};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::devices::{
    generator_norton_admittance, generator_terminal_current, init_generator, init_motor,
    motor_drawn_current, zip_injection, DeviceError, GenField, GeneratorParams, GeneratorState,
    MotorField, MotorParams, MotorState, PowerFlowPoint, ZipLoad, GEN_STATES, MOTOR_STATES,
};
use crate::exec::{Clock, ParallelExec};
use crate::math;
use crate::model::{Case, CaseError};
use crate::network::{
    build_ybus, fit_voltage_series, interface_iteration, BusVoltageSeries, NetworkError,
    NetworkEvent, NetworkModel, SampleBuffer, VoltageSeries,
};
use crate::series::{propagate, SeriesError, SeriesField, SeriesVector};
use crate::stepper::{self, StepperConfig, ToleranceSet, VarClass};

/// Largest device derivative allowed at the initialized equilibrium.
pub const INIT_RESIDUAL_TOL: f64 = 1e-8;

const T_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sas,
    Fe,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowPolicy {
    Adaptive,
    /// Forced fixed windows of the given length (events still snap).
    Fixed(f64),
}

/// A network event scheduled at an absolute simulation time.
#[derive(Debug, Clone, Copy)]
pub struct TimedEvent {
    pub time: f64,
    pub event: NetworkEvent,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub method: Method,
    /// Series order `n` for the windowed solution.
    pub order: usize,
    /// Voltage-polynomial order `n_v`.
    pub v_order: usize,
    pub tolerances: ToleranceSet,
    pub stepper: StepperConfig,
    pub window: WindowPolicy,
    /// Fixed step for FE/RK4.
    pub dt: f64,
    pub t_end: f64,
    pub events: Vec<TimedEvent>,
    /// Record every k-th window (first, last, and event windows always).
    pub decimation: usize,
    /// Optional intra-window sampling of the accepted polynomials.
    pub dense_dt: Option<f64>,
    /// Interface-iteration voltage tolerance (pu).
    pub tol_v: f64,
    pub max_iface_iter: usize,
}

impl SimConfig {
    pub fn new(method: Method, t_end: f64) -> Self {
        Self {
            method,
            order: 2,
            v_order: 1,
            tolerances: ToleranceSet::power_system(2.0, 0.01, 0.001),
            stepper: StepperConfig::default(),
            window: WindowPolicy::Adaptive,
            dt: 1e-3,
            t_end,
            events: Vec::new(),
            decimation: 1,
            dense_dt: None,
            // tighter than the voltage contract alone so the per-window
            // power balance holds at 1e-8 after re-evaluating injections at
            // the solved voltages
            tol_v: 2e-9,
            max_iface_iter: 20,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.t_end > 0.0) {
            return Err(SimError::BadConfig {
                detail: "t_end must be positive",
            });
        }
        if self.order == 0 {
            return Err(SimError::BadConfig {
                detail: "series order must be at least 1",
            });
        }
        if matches!(self.method, Method::Fe | Method::Rk4) && !(self.dt > 0.0) {
            return Err(SimError::BadConfig {
                detail: "fixed-step methods need a positive dt",
            });
        }
        if let WindowPolicy::Fixed(dt) = self.window {
            if !(dt > 0.0) {
                return Err(SimError::BadConfig {
                    detail: "fixed windows need a positive length",
                });
            }
        }
        if self.decimation == 0 {
            return Err(SimError::BadConfig {
                detail: "decimation must be at least 1",
            });
        }
        let mut prev = 0.0;
        for ev in &self.events {
            if !(ev.time > 0.0 && ev.time <= self.t_end) {
                return Err(SimError::BadConfig {
                    detail: "event times must lie in (0, t_end]",
                });
            }
            if ev.time < prev {
                return Err(SimError::BadConfig {
                    detail: "events must be sorted by time",
                });
            }
            prev = ev.time;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum SimError {
    Case(CaseError),
    Device(DeviceError),
    InitResidual { device: usize, residual: f64 },
    Propagation { t: f64, device: usize, source: SeriesError },
    Interface { t: f64, source: NetworkError },
    Network { t: f64, source: NetworkError },
    StepUnderflow { t: f64, h_min: f64 },
    BadConfig { detail: &'static str },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Case(e) => write!(f, "case error: {e}"),
            SimError::Device(e) => write!(f, "device initialization failed: {e}"),
            SimError::InitResidual { device, residual } => write!(
                f,
                "device {device} initialization residual {residual:.3e} exceeds \
                 {INIT_RESIDUAL_TOL:.1e}"
            ),
            SimError::Propagation { t, device, source } => {
                if *device == usize::MAX {
                    write!(f, "series propagation failed at t = {t:.6} s: {source}")
                } else {
                    write!(
                        f,
                        "series propagation failed at t = {t:.6} s (device {device}): {source}"
                    )
                }
            }
            SimError::Interface { t, source } => {
                write!(f, "interface iteration failed at t = {t:.6} s: {source}")
            }
            SimError::Network { t, source } => {
                write!(f, "network operation failed at t = {t:.6} s: {source}")
            }
            SimError::StepUnderflow { t, h_min } => write!(
                f,
                "adaptive window pinned at h_min = {h_min:.3e} s three times in a row \
                 near t = {t:.6} s"
            ),
            SimError::BadConfig { detail } => write!(f, "invalid configuration: {detail}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<CaseError> for SimError {
    fn from(e: CaseError) -> Self {
        SimError::Case(e)
    }
}

impl From<DeviceError> for SimError {
    fn from(e: DeviceError) -> Self {
        SimError::Device(e)
    }
}

/// One forward-Euler step of a series field.
pub fn euler_step(
    field: &dyn SeriesField,
    t: f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, SeriesError> {
    let f = field.eval_at(t, x)?;
    Ok(x.iter().zip(&f).map(|(xi, fi)| xi + h * fi).collect())
}

/// One classical RK4 step of a series field.
pub fn rk4_step(
    field: &dyn SeriesField,
    t: f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, SeriesError> {
    let dim = x.len();
    let k1 = field.eval_at(t, x)?;
    let mut stage = vec![0.0; dim];
    for i in 0..dim {
        stage[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = field.eval_at(t + 0.5 * h, &stage)?;
    for i in 0..dim {
        stage[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = field.eval_at(t + 0.5 * h, &stage)?;
    for i in 0..dim {
        stage[i] = x[i] + h * k3[i];
    }
    let k4 = field.eval_at(t + h, &stage)?;
    Ok((0..dim)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Runtime device: parameters plus the committed state.
#[derive(Debug, Clone)]
pub enum DeviceRt {
    Gen {
        params: GeneratorParams,
        state: [f64; GEN_STATES],
        norton: Complex64,
    },
    Motor {
        params: MotorParams,
        state: [f64; MOTOR_STATES],
    },
}

impl DeviceRt {
    pub fn bus(&self) -> usize {
        match self {
            DeviceRt::Gen { params, .. } => params.bus,
            DeviceRt::Motor { params, .. } => params.bus,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DeviceRt::Gen { .. } => GEN_STATES,
            DeviceRt::Motor { .. } => MOTOR_STATES,
        }
    }

    pub fn state(&self) -> &[f64] {
        match self {
            DeviceRt::Gen { state, .. } => state,
            DeviceRt::Motor { state, .. } => state,
        }
    }

    fn set_state(&mut self, x: &[f64]) {
        match self {
            DeviceRt::Gen { state, .. } => state.copy_from_slice(x),
            DeviceRt::Motor { state, .. } => state.copy_from_slice(x),
        }
    }

    fn sas(&self, v: &BusVoltageSeries, t0: f64, n: usize) -> Result<SeriesVector, SeriesError> {
        match self {
            DeviceRt::Gen { params, state, .. } => {
                propagate(&GenField::new(params, v), state, t0, n)
            }
            DeviceRt::Motor { params, state } => {
                propagate(&MotorField::new(params, v), state, t0, n)
            }
        }
    }

    fn deriv(&self, t: f64, x: &[f64], v: &BusVoltageSeries) -> Result<Vec<f64>, SeriesError> {
        match self {
            DeviceRt::Gen { params, .. } => GenField::new(params, v).eval_at(t, x),
            DeviceRt::Motor { params, .. } => MotorField::new(params, v).eval_at(t, x),
        }
    }

    fn error_bound(
        &self,
        sas: &SeriesVector,
        v: &BusVoltageSeries,
        n_classes: usize,
        h: f64,
        samples: usize,
    ) -> Result<Vec<f64>, SeriesError> {
        let classes = self.classes(n_classes);
        match self {
            DeviceRt::Gen { params, .. } => stepper::error_rate_bound(
                sas,
                &GenField::new(params, v),
                &classes,
                n_classes,
                h,
                samples,
            ),
            DeviceRt::Motor { params, .. } => stepper::error_rate_bound(
                sas,
                &MotorField::new(params, v),
                &classes,
                n_classes,
                h,
                samples,
            ),
        }
    }

    /// Bus injection of this device at the candidate voltage, given a state.
    /// Generators add the Norton compensation `y_n v`; motors draw current.
    fn injection_at(&self, x: &[f64], v: Complex64) -> Complex64 {
        match self {
            DeviceRt::Gen { params, norton, .. } => {
                let st = GeneratorState::from_slice(x);
                let (ig, _) = generator_terminal_current(&st, params, v);
                ig + norton * v
            }
            DeviceRt::Motor { params, .. } => {
                let st = MotorState::from_slice(x);
                -motor_drawn_current(&st, params, v)
            }
        }
    }

    /// Tolerance-class of every state. With a single-class tolerance set all
    /// states collapse to class 0; with the three-class split, angles map to
    /// the angle class, EMF-like states to the voltage class, and
    /// speed/slip/mechanical power to the power class.
    fn classes(&self, n_classes: usize) -> Vec<usize> {
        if n_classes == 1 {
            return vec![0; self.dim()];
        }
        match self {
            DeviceRt::Gen { .. } => vec![
                VarClass::Angle as usize,
                VarClass::Power as usize,
                VarClass::Voltage as usize,
                VarClass::Voltage as usize,
                VarClass::Voltage as usize,
                VarClass::Voltage as usize,
                VarClass::Voltage as usize,
                VarClass::Power as usize,
            ],
            DeviceRt::Motor { .. } => vec![
                VarClass::Power as usize,
                VarClass::Voltage as usize,
                VarClass::Voltage as usize,
            ],
        }
    }

    fn state_names(&self) -> &'static [&'static str] {
        match self {
            DeviceRt::Gen { .. } => &[
                "delta", "domega", "eqp", "edp", "eqpp", "edpp", "efd", "pm",
            ],
            DeviceRt::Motor { .. } => &["s", "vdp", "vqp"],
        }
    }

    fn kind_prefix(&self) -> &'static str {
        match self {
            DeviceRt::Gen { .. } => "gen",
            DeviceRt::Motor { .. } => "motor",
        }
    }
}

/// Devices, static loads, and the network assembled at the case equilibrium.
#[derive(Debug, Clone)]
pub struct InitializedSystem {
    pub devices: Vec<DeviceRt>,
    pub zips: Vec<ZipLoad>,
    pub net: NetworkModel,
    /// Case power-flow voltages.
    pub voltages: Vec<Complex64>,
}

/// Initializes every device at the stored power-flow point and assembles
/// the admittance matrix (impedance load shares, generator Norton shunts,
/// and the motor reactive-compensation shunts fixed by initialization).
pub fn initialize(case: &Case) -> Result<InitializedSystem, SimError> {
    case.validate()?;
    let v0 = case.bus_voltages();
    let mut devices = Vec::new();
    for gen in &case.generators {
        let mut params = gen.params.clone();
        let v_term = v0[params.bus];
        let state = init_generator(
            &mut params,
            PowerFlowPoint {
                p: gen.p,
                q: gen.q,
                v: v_term,
            },
        )?;
        let norton = generator_norton_admittance(&params);
        devices.push(DeviceRt::Gen {
            params,
            state: state.as_array(),
            norton,
        });
    }
    let mut extra_shunts = Vec::new();
    for motor in &case.motors {
        let mut params = motor.params.clone();
        let bus = params.bus;
        let load = case
            .loads
            .iter()
            .find(|l| l.bus == bus)
            .expect("validated: motor has a co-located load");
        let p_target = motor.p_share * load.p0;
        let state = init_motor(
            &mut params,
            PowerFlowPoint {
                p: p_target,
                q: 0.0,
                v: v0[bus],
            },
        )?;
        // the machine draws its equivalent-circuit reactive power; a fixed
        // shunt makes up the difference against the scheduled motor share
        let drawn = v0[bus] * motor_drawn_current(&state, &params, v0[bus]).conj();
        let q_sched = motor.q_share * load.q0;
        let vmag2 = math::cabs(v0[bus]) * math::cabs(v0[bus]);
        extra_shunts.push((bus, Complex64::new(0.0, (drawn.im - q_sched) / vmag2)));
        devices.push(DeviceRt::Motor {
            params,
            state: state.as_array(),
        });
    }
    let net = build_ybus(case, &extra_shunts).map_err(|e| SimError::Network { t: 0.0, source: e })?;

    // every derivative must vanish at the initialized point
    for (i, dev) in devices.iter().enumerate() {
        let v = v0[dev.bus()];
        let voltage = BusVoltageSeries::constant(0.0, math::cabs(v), math::carg(v), 0);
        let ddt = dev
            .deriv(0.0, dev.state(), &voltage)
            .map_err(|e| SimError::Propagation {
                t: 0.0,
                device: i,
                source: e,
            })?;
        let residual = ddt.iter().map(|d| math::abs(*d)).fold(0.0, f64::max);
        if residual > INIT_RESIDUAL_TOL {
            return Err(SimError::InitResidual {
                device: i,
                residual,
            });
        }
    }

    Ok(InitializedSystem {
        devices,
        zips: case.loads.clone(),
        net,
        voltages: v0,
    })
}

/// Simulation output.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub stats: RunStats,
}

/// Runs one simulation over `[0, t_end]`.
pub fn simulate(
    case: &Case,
    cfg: &SimConfig,
    exec: &dyn ParallelExec,
    clock: &dyn Clock,
) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    let mut runner = Runner::new(case, cfg, exec, clock)?;
    match cfg.method {
        Method::Sas => runner.run_sas()?,
        Method::Fe | Method::Rk4 => runner.run_fixed()?,
    }
    Ok(runner.finish())
}

fn assemble_injections(
    devices: &[DeviceRt],
    states: &[Vec<f64>],
    zips: &[ZipLoad],
    v: &[Complex64],
    n: usize,
) -> Vec<Complex64> {
    let mut inj = vec![Complex64::new(0.0, 0.0); n];
    for (dev, x) in devices.iter().zip(states) {
        inj[dev.bus()] += dev.injection_at(x, v[dev.bus()]);
    }
    for z in zips {
        inj[z.bus] -= zip_injection(z, v[z.bus]);
    }
    inj
}

struct Runner<'a> {
    case: &'a Case,
    cfg: &'a SimConfig,
    exec: &'a dyn ParallelExec,
    clock: &'a dyn Clock,
    devices: Vec<DeviceRt>,
    zips: Vec<ZipLoad>,
    net: NetworkModel,
    v: Vec<Complex64>,
    buffer: SampleBuffer,
    vseries: VoltageSeries,
    traj: Trajectory,
    stats: RunStats,
    events: Vec<TimedEvent>,
    event_idx: usize,
    t: f64,
    windows_since_record: usize,
    started_at: f64,
}

impl<'a> Runner<'a> {
    fn new(
        case: &'a Case,
        cfg: &'a SimConfig,
        exec: &'a dyn ParallelExec,
        clock: &'a dyn Clock,
    ) -> Result<Self, SimError> {
        let started_at = clock.now();
        let sys = initialize(case)?;
        let n = case.bus_count();
        let mut net = sys.net;
        let devices = sys.devices;
        let zips = sys.zips;

        // polish the network point once so the first sample is the solved
        // voltage under the device interface
        let states: Vec<Vec<f64>> = devices.iter().map(|d| d.state().to_vec()).collect();
        let mut inject =
            |v: &[Complex64]| assemble_injections(&devices, &states, &zips, v, n);
        let iface = interface_iteration(
            &mut net,
            &mut inject,
            &sys.voltages,
            cfg.tol_v,
            cfg.max_iface_iter,
        )
        .map_err(|e| SimError::Interface { t: 0.0, source: e })?;

        let mut buffer = SampleBuffer::new(
            n,
            SampleBuffer::capacity_for_order(cfg.v_order),
        );
        buffer
            .push(0.0, &iface.voltages)
            .expect("first sample always advances");

        let mut channels = Vec::new();
        let mut used = alloc::collections::BTreeSet::new();
        for dev in &devices {
            let bus_id = case.buses[dev.bus()].id;
            let mut base = format!("{}{}", dev.kind_prefix(), bus_id);
            let mut k = 1;
            while !used.insert(base.clone()) {
                k += 1;
                base = format!("{}{}_{k}", dev.kind_prefix(), bus_id);
            }
            for name in dev.state_names() {
                channels.push(format!("{base}.{name}"));
            }
        }
        for bus in &case.buses {
            channels.push(format!("bus{}.vm", bus.id));
            channels.push(format!("bus{}.va", bus.id));
        }

        let mut events = cfg.events.clone();
        events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());

        let vseries = Self::constant_vseries(&buffer, 0.0, cfg.v_order);
        let mut runner = Self {
            case,
            cfg,
            exec,
            clock,
            devices,
            zips,
            net,
            v: iface.voltages,
            buffer,
            vseries,
            traj: Trajectory {
                channels,
                ..Trajectory::default()
            },
            stats: RunStats {
                extra_solves: iface.iterations,
                ..RunStats::default()
            },
            events,
            event_idx: 0,
            t: 0.0,
            windows_since_record: 0,
            started_at,
        };
        runner.record_row(0.0, false);
        Ok(runner)
    }

    fn constant_vseries(buffer: &SampleBuffer, t0: f64, order: usize) -> VoltageSeries {
        let polar: Vec<(f64, f64)> = (0..buffer.bus_count())
            .map(|b| {
                let s = buffer.samples(b).last().expect("buffer seeded at t = 0");
                (s.vm, s.va)
            })
            .collect();
        VoltageSeries::constant(t0, &polar, order)
    }

    fn next_stop(&self) -> f64 {
        if self.event_idx < self.events.len() {
            self.events[self.event_idx].time.min(self.cfg.t_end)
        } else {
            self.cfg.t_end
        }
    }

    /// Records one non-interpolated row from committed states and the
    /// newest buffered voltage samples.
    fn record_row(&mut self, t: f64, interpolated: bool) {
        let mut row = Vec::with_capacity(self.traj.channels.len());
        for dev in &self.devices {
            row.extend_from_slice(dev.state());
        }
        for b in 0..self.case.bus_count() {
            let s = self.buffer.samples(b).last().expect("seeded");
            row.push(s.vm);
            row.push(s.va);
        }
        self.traj.times.push(t);
        self.traj.values.push(row);
        self.traj.interpolated.push(interpolated);
    }

    fn maybe_record(&mut self, t: f64, force: bool) {
        self.windows_since_record += 1;
        if force || self.windows_since_record >= self.cfg.decimation {
            self.record_row(t, false);
            self.windows_since_record = 0;
        }
    }

    /// Applies all events due at the current time, re-solves the network at
    /// the committed states, and restarts the voltage buffer.
    fn apply_due_events(&mut self) -> Result<bool, SimError> {
        let mut had = false;
        while self.event_idx < self.events.len()
            && self.events[self.event_idx].time <= self.t + T_EPS
        {
            let ev = self.events[self.event_idx];
            self.net
                .apply_event(ev.event)
                .map_err(|e| SimError::Network {
                    t: self.t,
                    source: e,
                })?;
            self.event_idx += 1;
            had = true;
        }
        if had {
            let states: Vec<Vec<f64>> =
                self.devices.iter().map(|d| d.state().to_vec()).collect();
            let n = self.case.bus_count();
            let devices = &self.devices;
            let zips = &self.zips;
            let mut inject =
                |v: &[Complex64]| assemble_injections(devices, &states, zips, v, n);
            let guess = self.v.clone();
            // the post-event solve restarts from the pre-event voltage, a
            // far colder guess than window predictions get, so it runs with
            // a doubled iteration budget
            let iface = interface_iteration(
                &mut self.net,
                &mut inject,
                &guess,
                self.cfg.tol_v,
                2 * self.cfg.max_iface_iter,
            )
            .map_err(|e| SimError::Interface {
                t: self.t,
                source: e,
            })?;
            self.stats.extra_solves += iface.iterations;
            self.v = iface.voltages;
            self.buffer.clear();
            self.buffer
                .push(self.t, &self.v)
                .expect("cleared buffer accepts any time");
        }
        Ok(had)
    }

    /// Refits the voltage series at the current time, or keeps a constant
    /// series anchored at the newest sample while the buffer is short.
    fn refresh_vseries(&mut self) -> Result<(), SimError> {
        let tick = self.clock.now();
        if self.buffer.len() >= self.cfg.v_order + 1 {
            self.vseries = fit_voltage_series(&self.buffer, self.t, self.cfg.v_order)
                .map_err(|e| SimError::Network {
                    t: self.t,
                    source: e,
                })?;
            self.stats.refits += 1;
        } else {
            self.vseries = Self::constant_vseries(&self.buffer, self.t, self.cfg.v_order);
        }
        self.stats.voltage_fit_s += self.clock.now() - tick;
        Ok(())
    }

    /// Global per-class bound over all devices at a candidate window.
    fn global_bound(
        &self,
        sas_list: &[SeriesVector],
        vs: &VoltageSeries,
        h: f64,
    ) -> Result<Vec<f64>, SeriesError> {
        let n_classes = self.cfg.tolerances.class_count();
        let mut r = vec![0.0f64; n_classes];
        for (dev, sas) in self.devices.iter().zip(sas_list) {
            let rd = dev.error_bound(
                sas,
                vs.bus(dev.bus()),
                n_classes,
                h,
                self.cfg.stepper.samples,
            )?;
            for (acc, val) in r.iter_mut().zip(rd) {
                if val > *acc {
                    *acc = val;
                }
            }
        }
        Ok(r)
    }

    fn build_sas(
        &self,
        vs: &VoltageSeries,
        t0: f64,
        order: usize,
    ) -> Result<Vec<SeriesVector>, SimError> {
        let devices = &self.devices;
        let results = self.exec.map_indexed(devices.len(), &|i| {
            devices[i].sas(vs.bus(devices[i].bus()), t0, order)
        });
        results
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| SimError::Propagation {
                    t: t0,
                    device: i,
                    source: e,
                })
            })
            .collect()
    }

    fn run_sas(&mut self) -> Result<(), SimError> {
        let n_v = self.cfg.v_order;
        let order = self.cfg.order;
        let adaptive = matches!(self.cfg.window, WindowPolicy::Adaptive);
        let mut h_pre = self.cfg.stepper.h_pre;
        let mut self_start_left = if adaptive { n_v + 2 } else { 0 };
        let mut self_start_h = 0.0f64;
        let mut underflow_run = 0usize;

        while self.t < self.cfg.t_end - T_EPS {
            let t0 = self.t;
            let vs_used = if self_start_left > 0 {
                Self::constant_vseries(&self.buffer, t0, n_v)
            } else {
                self.vseries.clone()
            };

            let tick = self.clock.now();
            let sas_list = self.build_sas(&vs_used, t0, order)?;
            self.stats.device_sas_s += self.clock.now() - tick;

            let tick = self.clock.now();
            let stop = self.next_stop();
            let (mut h, proposed, bisected, r_acc, is_ss) = match self.cfg.window {
                WindowPolicy::Fixed(dt) => (dt, dt, false, Vec::new(), false),
                WindowPolicy::Adaptive => {
                    if self_start_left > 0 {
                        if self_start_left == n_v + 2 {
                            // size the post-event block with constant-voltage
                            // series, then split it into equal sub-windows
                            let sel = stepper::select_window_with(
                                &mut |h| self.global_bound(&sas_list, &vs_used, h),
                                &self.cfg.tolerances,
                                &self.cfg.stepper,
                                h_pre,
                            )
                            .map_err(|e| SimError::Propagation {
                                t: t0,
                                device: usize::MAX,
                                source: e,
                            })?;
                            let block = sel.accepted.min(stop - t0);
                            self_start_h = block / (n_v + 2) as f64;
                        }
                        (self_start_h, self_start_h, false, Vec::new(), true)
                    } else {
                        let sel = stepper::select_window_with(
                            &mut |h| self.global_bound(&sas_list, &vs_used, h),
                            &self.cfg.tolerances,
                            &self.cfg.stepper,
                            h_pre,
                        )
                        .map_err(|e| SimError::Propagation {
                            t: t0,
                            device: usize::MAX,
                            source: e,
                        })?;
                        if sel.accepted <= self.cfg.stepper.h_min * (1.0 + 1e-9) {
                            underflow_run += 1;
                            if underflow_run >= 3 {
                                return Err(SimError::StepUnderflow {
                                    t: t0,
                                    h_min: self.cfg.stepper.h_min,
                                });
                            }
                        } else {
                            underflow_run = 0;
                        }
                        (sel.accepted, sel.proposed, sel.bisected, sel.r_accepted, false)
                    }
                }
            };
            self.stats.window_selection_s += self.clock.now() - tick;

            let mut t_new = t0 + h;
            if t_new >= stop - T_EPS {
                t_new = stop;
                h = stop - t0;
            }

            // dense intra-window output from the accepted polynomials
            if let Some(dd) = self.cfg.dense_dt {
                let mut s = t0 + dd;
                while s < t_new - T_EPS {
                    let mut row = Vec::with_capacity(self.traj.channels.len());
                    for sas in &sas_list {
                        row.extend(sas.evaluate(s));
                    }
                    for b in 0..self.case.bus_count() {
                        let bus = vs_used.bus(b);
                        row.push(bus.vm.evaluate(s));
                        row.push(bus.va.evaluate(s));
                    }
                    self.traj.times.push(s);
                    self.traj.values.push(row);
                    self.traj.interpolated.push(true);
                    s += dd;
                }
            }

            let states_end: Vec<Vec<f64>> =
                sas_list.iter().map(|s| s.evaluate(t_new)).collect();

            let tick = self.clock.now();
            let guess = vs_used.evaluate_all(t_new);
            let n = self.case.bus_count();
            let devices = &self.devices;
            let zips = &self.zips;
            let mut inject =
                |v: &[Complex64]| assemble_injections(devices, &states_end, zips, v, n);
            let iface = interface_iteration(
                &mut self.net,
                &mut inject,
                &guess,
                self.cfg.tol_v,
                self.cfg.max_iface_iter,
            )
            .map_err(|e| SimError::Interface {
                t: t_new,
                source: e,
            })?;
            self.stats.network_s += self.clock.now() - tick;
            self.stats.network_solves += iface.iterations;

            for (dev, x) in self.devices.iter_mut().zip(&states_end) {
                dev.set_state(x);
            }
            self.v = iface.voltages;
            self.t = t_new;
            self.buffer
                .push(t_new, &self.v)
                .map_err(|e| SimError::Network {
                    t: t_new,
                    source: e,
                })?;

            let had_event = self.apply_due_events()?;
            let finished = self.t >= self.cfg.t_end - T_EPS;
            self.traj.windows.push(WindowMeta {
                t0,
                h,
                proposed_h: proposed,
                bisected,
                self_start: is_ss,
                iface_iters: iface.iterations,
                r: r_acc,
            });
            self.stats.windows += 1;
            self.maybe_record(t_new, had_event || finished);

            if had_event {
                self_start_left = if adaptive { n_v + 2 } else { 0 };
                self_start_h = 0.0;
                h_pre = self.cfg.stepper.h_pre;
                underflow_run = 0;
                self.refresh_vseries()?;
            } else {
                if self_start_left > 0 {
                    self_start_left -= 1;
                }
                h_pre = h;
                self.refresh_vseries()?;
            }
        }
        Ok(())
    }

    fn run_fixed(&mut self) -> Result<(), SimError> {
        let mut underflow_guard = 0usize;
        while self.t < self.cfg.t_end - T_EPS {
            let t0 = self.t;
            let stop = self.next_stop();
            let h = self.cfg.dt.min(stop - t0);
            if h <= 0.0 {
                underflow_guard += 1;
                if underflow_guard > 3 {
                    return Err(SimError::StepUnderflow {
                        t: t0,
                        h_min: self.cfg.dt,
                    });
                }
                continue;
            }

            // device derivatives with the terminal voltage frozen at the
            // last solved value
            let tick = self.clock.now();
            let mut states_end = Vec::with_capacity(self.devices.len());
            for dev in &self.devices {
                let s = self.buffer.samples(dev.bus()).last().expect("seeded");
                let voltage = BusVoltageSeries::constant(t0, s.vm, s.va, 0);
                let next = match self.cfg.method {
                    Method::Fe => euler_step(
                        &ConstVoltageField { dev, voltage: &voltage },
                        t0,
                        dev.state(),
                        h,
                    ),
                    _ => rk4_step(
                        &ConstVoltageField { dev, voltage: &voltage },
                        t0,
                        dev.state(),
                        h,
                    ),
                }
                .map_err(|e| SimError::Propagation {
                    t: t0,
                    device: 0,
                    source: e,
                })?;
                states_end.push(next);
            }
            self.stats.device_sas_s += self.clock.now() - tick;

            let mut t_new = t0 + h;
            if t_new >= stop - T_EPS {
                t_new = stop;
            }

            let tick = self.clock.now();
            let guess = self.vseries.evaluate_all(t_new);
            let n = self.case.bus_count();
            let devices = &self.devices;
            let zips = &self.zips;
            let mut inject =
                |v: &[Complex64]| assemble_injections(devices, &states_end, zips, v, n);
            let iface = interface_iteration(
                &mut self.net,
                &mut inject,
                &guess,
                self.cfg.tol_v,
                self.cfg.max_iface_iter,
            )
            .map_err(|e| SimError::Interface {
                t: t_new,
                source: e,
            })?;
            self.stats.network_s += self.clock.now() - tick;
            self.stats.network_solves += iface.iterations;

            for (dev, x) in self.devices.iter_mut().zip(&states_end) {
                dev.set_state(x);
            }
            self.v = iface.voltages;
            self.t = t_new;
            self.buffer
                .push(t_new, &self.v)
                .map_err(|e| SimError::Network {
                    t: t_new,
                    source: e,
                })?;

            let had_event = self.apply_due_events()?;
            let finished = self.t >= self.cfg.t_end - T_EPS;
            self.traj.windows.push(WindowMeta {
                t0,
                h: t_new - t0,
                proposed_h: h,
                bisected: false,
                self_start: false,
                iface_iters: iface.iterations,
                r: Vec::new(),
            });
            self.stats.windows += 1;
            self.maybe_record(t_new, had_event || finished);
            self.refresh_vseries()?;
        }
        Ok(())
    }

    fn finish(mut self) -> SimOutcome {
        self.stats.total_s = self.clock.now() - self.started_at;
        SimOutcome {
            trajectory: self.traj,
            stats: self.stats,
        }
    }
}

/// Device field with a fixed terminal-voltage polynomial, used by the
/// fixed-step integrators.
struct ConstVoltageField<'a> {
    dev: &'a DeviceRt,
    voltage: &'a BusVoltageSeries,
}

impl SeriesField for ConstVoltageField<'_> {
    fn dim(&self) -> usize {
        self.dev.dim()
    }

    fn eval_series(&self, x: &SeriesVector) -> Result<SeriesVector, SeriesError> {
        match self.dev {
            DeviceRt::Gen { params, .. } => GenField::new(params, self.voltage).eval_series(x),
            DeviceRt::Motor { params, .. } => {
                MotorField::new(params, self.voltage).eval_series(x)
            }
        }
    }
}
