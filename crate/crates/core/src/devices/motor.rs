//! Third-order induction motor: slip plus dq transient voltages, with the
//! slip-dependent equivalent impedance supplying the stator current and the
//! load torque `f1 s^lambda1 + f2 (1 - s)^lambda2`.

use alloc::vec;

use num_complex::Complex64;

use super::{DeviceError, PowerFlowPoint};
use crate::math;
use crate::network::BusVoltageSeries;
use crate::series::{propagate, PowerSeries, SeriesError, SeriesField, SeriesVector};

pub const MOTOR_STATES: usize = 3;

#[derive(Debug, Clone)]
pub struct MotorParams {
    pub bus: usize,
    /// Shaft inertia constant (s).
    pub h: f64,
    pub rs: f64,
    pub rr: f64,
    pub xs: f64,
    pub xsp: f64,
    pub xr: f64,
    /// Load-torque coefficients; rescaled by initialization so the torque
    /// balance holds at the equilibrium slip.
    pub f1: f64,
    pub lambda1: f64,
    pub f2: f64,
    pub lambda2: f64,
    pub omega_s: f64,
}

/// States in equation order: slip, d-axis and q-axis transient voltages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorState {
    pub s: f64,
    pub vdp: f64,
    pub vqp: f64,
}

impl MotorState {
    pub fn as_array(&self) -> [f64; MOTOR_STATES] {
        [self.s, self.vdp, self.vqp]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            s: x[0],
            vdp: x[1],
            vqp: x[2],
        }
    }
}

/// Slip-dependent equivalent impedance `z(s) = z_re + j z_im`.
fn impedance(p: &MotorParams, s: f64) -> Complex64 {
    let y = s * p.xr / p.rr;
    let g = 1.0 / (1.0 + y * y);
    Complex64::new(
        p.rs + y * (p.xs - p.xsp) * g,
        p.xsp + (p.xs - p.xsp) * g,
    )
}

/// Stator current drawn from the bus at a voltage point.
pub fn motor_drawn_current(state: &MotorState, params: &MotorParams, v: Complex64) -> Complex64 {
    v / impedance(params, state.s)
}

fn active_power_drawn(p: &MotorParams, s: f64, vmag: f64) -> f64 {
    let z = impedance(p, s);
    vmag * vmag * z.re / (z.re * z.re + z.im * z.im)
}

/// Load torque at a slip point with the stored coefficients.
fn load_torque(p: &MotorParams, s: f64) -> f64 {
    p.f1 * math::powf(s, p.lambda1) + p.f2 * math::powf(1.0 - s, p.lambda2)
}

const SLIP_MIN: f64 = 1e-6;
const SLIP_MAX: f64 = 0.5;

/// Finds the equilibrium slip drawing `pf.p` at the terminal voltage, then
/// rescales `f1`/`f2` so the load torque balances the electrical torque
/// exactly. The smallest slip crossing is taken (stable branch).
pub fn init_motor(params: &mut MotorParams, pf: PowerFlowPoint) -> Result<MotorState, DeviceError> {
    if pf.p <= 0.0 {
        return Err(DeviceError::NonPositiveLoad { p_target: pf.p });
    }
    let vmag = math::cabs(pf.v);
    if vmag <= 0.0 {
        return Err(DeviceError::InfeasiblePoint {
            detail: "terminal voltage magnitude must be positive",
        });
    }
    // bracket the first crossing of the monotone-rising branch
    const SCAN: usize = 512;
    let residual = |s: f64| active_power_drawn(params, s, vmag) - pf.p;
    let mut lo = SLIP_MIN;
    if residual(lo) > 0.0 {
        return Err(DeviceError::NoEquilibriumSlip { p_target: pf.p });
    }
    let mut hi = SLIP_MAX;
    let mut found = false;
    for k in 1..=SCAN {
        let s = SLIP_MIN + (SLIP_MAX - SLIP_MIN) * k as f64 / SCAN as f64;
        if residual(s) >= 0.0 {
            hi = s;
            found = true;
            break;
        }
        lo = s;
    }
    if !found {
        return Err(DeviceError::NoEquilibriumSlip { p_target: pf.p });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);

    let i = pf.v / impedance(params, s);
    let (idm, iqm) = (i.re, i.im);
    let dx = params.xs - params.xsp;
    let y = s * params.xr / params.rr;
    let g = 1.0 / (1.0 + y * y);
    let vdp = dx * (y * idm - iqm) * g;
    let vqp = dx * (idm + y * iqm) * g;
    let t_motor = vdp * idm + vqp * iqm;

    // scale the load-torque shape so the balance holds at s exactly
    let shape = load_torque(params, s);
    if shape > 0.0 && shape.is_finite() {
        let c = t_motor / shape;
        params.f1 *= c;
        params.f2 *= c;
    } else {
        params.f1 = 0.0;
        params.f2 = t_motor / math::powf(1.0 - s, params.lambda2);
    }

    Ok(MotorState { s, vdp, vqp })
}

/// Series-evaluation context for the motor right-hand side.
pub struct MotorField<'a> {
    params: &'a MotorParams,
    voltage: &'a BusVoltageSeries,
}

impl<'a> MotorField<'a> {
    pub fn new(params: &'a MotorParams, voltage: &'a BusVoltageSeries) -> Self {
        Self { params, voltage }
    }
}

/// Torque-shape term `s^lambda` on series. Integer exponents reduce to
/// repeated products (valid at any slip); fractional exponents need a
/// positive constant term.
fn power_term(s: &PowerSeries, lambda: f64) -> Result<PowerSeries, SeriesError> {
    if lambda == 0.0 {
        return Ok(PowerSeries::constant(s.t0(), 1.0, s.order()));
    }
    if lambda >= 0.0 && lambda == math::round(lambda) && lambda <= 16.0 {
        return Ok(s.powi(lambda as u32));
    }
    s.powf(lambda)
}

impl SeriesField for MotorField<'_> {
    fn dim(&self) -> usize {
        MOTOR_STATES
    }

    fn eval_series(&self, x: &SeriesVector) -> Result<SeriesVector, SeriesError> {
        let p = self.params;
        let t0 = x.t0();
        let n = x.order();
        let vm = self.voltage.vm.recentered(t0).resized(n);
        let va = self.voltage.va.recentered(t0).resized(n);

        let s = x.component(0);
        let vdp = x.component(1);
        let vqp = x.component(2);

        let (sin_a, cos_a) = va.sin_cos();
        let vre = vm.mul(&cos_a)?;
        let vim = vm.mul(&sin_a)?;

        let dx = p.xs - p.xsp;
        let y = s.scale(p.xr / p.rr);
        let g = y.mul(&y)?.add_constant(1.0).recip()?;
        let zre = y.mul(&g)?.scale(dx).add_constant(p.rs);
        let zim = g.scale(dx).add_constant(p.xsp);
        let zmag2 = zre.mul(&zre)?.add(&zim.mul(&zim)?)?;
        let zinv = zmag2.recip()?;
        let idm = vre.mul(&zre)?.add(&vim.mul(&zim)?)?.mul(&zinv)?;
        let iqm = vim.mul(&zre)?.sub(&vre.mul(&zim)?)?.mul(&zinv)?;

        let t_motor = vdp.mul(&idm)?.add(&vqp.mul(&iqm)?)?;
        let t1 = power_term(s, p.lambda1)?.scale(p.f1);
        let one_minus_s = s.neg().add_constant(1.0);
        let t2 = power_term(&one_minus_s, p.lambda2)?.scale(p.f2);
        let t_load = t1.add(&t2)?;

        let d_s = t_load.sub(&t_motor)?.scale(1.0 / (2.0 * p.h));
        let k = p.omega_s * p.rr / p.xr;
        let d_vdp = iqm
            .scale(dx)
            .add(vdp)?
            .scale(-k)
            .add(&s.mul(vqp)?.scale(p.omega_s))?;
        let d_vqp = idm
            .scale(dx)
            .sub(vqp)?
            .scale(k)
            .sub(&s.mul(vdp)?.scale(p.omega_s))?;

        SeriesVector::new(vec![d_s, d_vdp, d_vqp])
    }
}

#[derive(Debug, Clone)]
pub struct MotorDerivs {
    pub ddt: [f64; MOTOR_STATES],
    /// Current drawn from the bus (load convention).
    pub i_drawn: Complex64,
}

/// Right-hand sides of the motor equations at a point.
pub fn motor_derivatives(
    state: &MotorState,
    params: &MotorParams,
    v: Complex64,
) -> MotorDerivs {
    let voltage = BusVoltageSeries::constant(0.0, math::cabs(v), math::carg(v), 0);
    let field = MotorField::new(params, &voltage);
    let out = field
        .eval_at(0.0, &state.as_array())
        .expect("order-0 motor evaluation cannot fail at interior slip");
    let mut ddt = [0.0; MOTOR_STATES];
    ddt.copy_from_slice(&out);
    MotorDerivs {
        ddt,
        i_drawn: motor_drawn_current(state, params, v),
    }
}

/// Truncated series solution of the motor equations over one window.
pub fn motor_sas(
    state: &MotorState,
    params: &MotorParams,
    voltage: &BusVoltageSeries,
    t0: f64,
    n: usize,
) -> Result<SeriesVector, SeriesError> {
    let field = MotorField::new(params, voltage);
    propagate(&field, &state.as_array(), t0, n)
}
