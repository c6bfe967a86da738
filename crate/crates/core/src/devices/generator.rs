//! Sixth-order synchronous generator with a first-order exciter and a
//! first-order governor.
//!
//! States, in order: rotor angle delta (rad), speed deviation domega (pu),
//! transient voltages eqp/edp, sub-transient voltages eqpp/edpp, field
//! voltage efd, mechanical power pm. The stator interface works in the
//! machine dq frame through the rotation `(vd + j vq) = e^{-j(delta - pi/2)} V`.

use alloc::vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::{DeviceError, PowerFlowPoint};
use crate::math;
use crate::network::BusVoltageSeries;
use crate::series::{propagate, SeriesError, SeriesField, SeriesVector};

pub const GEN_STATES: usize = 8;

#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub bus: usize,
    pub xd: f64,
    pub xdp: f64,
    pub xdpp: f64,
    pub xq: f64,
    pub xqp: f64,
    pub xqpp: f64,
    pub td0p: f64,
    pub td0pp: f64,
    pub tq0p: f64,
    pub tq0pp: f64,
    pub h: f64,
    pub d: f64,
    pub ra: f64,
    pub omega_s: f64,
    pub exciter_k: f64,
    pub exciter_te: f64,
    /// Exciter setpoint; overwritten by initialization.
    pub vref: f64,
    /// Governor setpoint; overwritten by initialization.
    pub pref: f64,
    pub governor_r: f64,
    pub governor_tg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorState {
    pub delta: f64,
    pub domega: f64,
    pub eqp: f64,
    pub edp: f64,
    pub eqpp: f64,
    pub edpp: f64,
    pub efd: f64,
    pub pm: f64,
}

impl GeneratorState {
    pub fn as_array(&self) -> [f64; GEN_STATES] {
        [
            self.delta, self.domega, self.eqp, self.edp, self.eqpp, self.edpp, self.efd, self.pm,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            delta: x[0],
            domega: x[1],
            eqp: x[2],
            edp: x[3],
            eqpp: x[4],
            edpp: x[5],
            efd: x[6],
            pm: x[7],
        }
    }
}

/// Norton shunt admittance stamped into the admittance matrix for the
/// machine's current-source interface: `1 / (ra + j xdpp)`.
pub fn generator_norton_admittance(params: &GeneratorParams) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(params.ra, params.xdpp)
}

/// Steady-state initialization from a terminal power-flow point. All eight
/// derivatives vanish at the returned state; `vref`/`pref` inside `params`
/// are overwritten with the balancing setpoints.
pub fn init_generator(
    params: &mut GeneratorParams,
    pf: PowerFlowPoint,
) -> Result<GeneratorState, DeviceError> {
    let vmag = math::cabs(pf.v);
    if vmag <= 0.0 || !vmag.is_finite() {
        return Err(DeviceError::InfeasiblePoint {
            detail: "terminal voltage magnitude must be positive",
        });
    }
    let s = Complex64::new(pf.p, pf.q);
    let it = (s / pf.v).conj();
    // q-axis locator: delta = arg(V + (ra + j xq) I)
    let eq_locator = pf.v + Complex64::new(params.ra, params.xq) * it;
    if math::cabs(eq_locator) == 0.0 {
        return Err(DeviceError::InfeasiblePoint {
            detail: "internal EMF vanishes",
        });
    }
    let delta = math::carg(eq_locator);
    let rot = math::cis(-(delta - FRAC_PI_2));
    let vdq = rot * pf.v;
    let idq = rot * it;
    let (vd, vq) = (vdq.re, vdq.im);
    let (id, iq) = (idq.re, idq.im);
    let eqpp = vq + params.ra * iq + params.xdpp * id;
    let edpp = vd + params.ra * id - params.xqpp * iq;
    let eqp = eqpp + (params.xdp - params.xdpp) * id;
    let edp = edpp - (params.xqp - params.xqpp) * iq;
    let efd = eqp + (params.xd - params.xdp) * id;
    let pe = vd * id + vq * iq;
    if !(efd.is_finite() && pe.is_finite()) {
        return Err(DeviceError::InfeasiblePoint {
            detail: "computed internal EMF is not finite",
        });
    }
    params.vref = vmag + efd / params.exciter_k;
    params.pref = pe;
    Ok(GeneratorState {
        delta,
        domega: 0.0,
        eqp,
        edp,
        eqpp,
        edpp,
        efd,
        pm: pe,
    })
}

/// Stator-interface quantities at a point: injected current and electrical
/// power.
pub fn generator_terminal_current(
    state: &GeneratorState,
    params: &GeneratorParams,
    v: Complex64,
) -> (Complex64, f64) {
    let rot = math::cis(-(state.delta - FRAC_PI_2));
    let vdq = rot * v;
    let (vd, vq) = (vdq.re, vdq.im);
    let den = params.ra * params.ra + params.xdpp * params.xqpp;
    let ed = state.edpp - vd;
    let eq = state.eqpp - vq;
    let id = (ed * params.ra + eq * params.xqpp) / den;
    let iq = (-ed * params.xdpp + eq * params.ra) / den;
    let ig = rot.conj() * Complex64::new(id, iq);
    let pe = vd * id + vq * iq;
    (ig, pe)
}

/// Series-evaluation context: the generator right-hand side with the
/// terminal voltage prescribed as a polar-form time polynomial.
pub struct GenField<'a> {
    params: &'a GeneratorParams,
    voltage: &'a BusVoltageSeries,
}

impl<'a> GenField<'a> {
    pub fn new(params: &'a GeneratorParams, voltage: &'a BusVoltageSeries) -> Self {
        Self { params, voltage }
    }
}

impl SeriesField for GenField<'_> {
    fn dim(&self) -> usize {
        GEN_STATES
    }

    fn eval_series(&self, x: &SeriesVector) -> Result<SeriesVector, SeriesError> {
        let p = self.params;
        let t0 = x.t0();
        let n = x.order();
        let vm = self.voltage.vm.recentered(t0).resized(n);
        let va = self.voltage.va.recentered(t0).resized(n);

        let delta = x.component(0);
        let domega = x.component(1);
        let eqp = x.component(2);
        let edp = x.component(3);
        let eqpp = x.component(4);
        let edpp = x.component(5);
        let efd = x.component(6);
        let pm = x.component(7);

        // (vd + j vq) = vm e^{j(va - delta + pi/2)}
        let theta = va.sub(delta)?.add_constant(FRAC_PI_2);
        let (sin_t, cos_t) = theta.sin_cos();
        let vd = vm.mul(&cos_t)?;
        let vq = vm.mul(&sin_t)?;

        let den = p.ra * p.ra + p.xdpp * p.xqpp;
        let ed = edpp.sub(&vd)?;
        let eq = eqpp.sub(&vq)?;
        let id = ed.scale(p.ra).add(&eq.scale(p.xqpp))?.scale(1.0 / den);
        let iq = ed.scale(-p.xdpp).add(&eq.scale(p.ra))?.scale(1.0 / den);
        let pe = vd.mul(&id)?.add(&vq.mul(&iq)?)?;

        let d_delta = domega.scale(p.omega_s);
        let d_domega = pm
            .sub(&pe)?
            .sub(&domega.scale(p.d))?
            .scale(1.0 / (2.0 * p.h));
        let kd = (p.xd - p.xdpp) / (p.xdp - p.xdpp);
        let kd2 = (p.xd - p.xdp) / (p.xdp - p.xdpp);
        let d_eqp = eqp
            .scale(-kd)
            .add(&eqpp.scale(kd2))?
            .add(efd)?
            .scale(1.0 / p.td0p);
        let kq = (p.xq - p.xqpp) / (p.xqp - p.xqpp);
        let kq2 = (p.xq - p.xqp) / (p.xqp - p.xqpp);
        let d_edp = edp.scale(-kq).add(&edpp.scale(kq2))?.scale(1.0 / p.tq0p);
        let d_eqpp = eqp
            .sub(eqpp)?
            .sub(&id.scale(p.xdp - p.xdpp))?
            .scale(1.0 / p.td0pp);
        let d_edpp = edp
            .sub(edpp)?
            .add(&iq.scale(p.xqp - p.xqpp))?
            .scale(1.0 / p.tq0pp);
        // polar form: |V| is the magnitude polynomial itself
        let d_efd = vm
            .scale(-p.exciter_k)
            .add_constant(p.exciter_k * p.vref)
            .sub(efd)?
            .scale(1.0 / p.exciter_te);
        let d_pm = pm
            .neg()
            .add_constant(p.pref)
            .sub(&domega.scale(1.0 / p.governor_r))?
            .scale(1.0 / p.governor_tg);

        SeriesVector::new(vec![
            d_delta, d_domega, d_eqp, d_edp, d_eqpp, d_edpp, d_efd, d_pm,
        ])
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorDerivs {
    pub ddt: [f64; GEN_STATES],
    pub p_e: f64,
    pub i_g: Complex64,
}

/// Right-hand sides of the generator equations at a point, plus the stator
/// quantities `p_e` and injected current `i_g`.
pub fn generator_derivatives(
    state: &GeneratorState,
    params: &GeneratorParams,
    v: Complex64,
) -> GeneratorDerivs {
    let voltage = BusVoltageSeries::constant(0.0, math::cabs(v), math::carg(v), 0);
    let field = GenField::new(params, &voltage);
    let out = field
        .eval_at(0.0, &state.as_array())
        .expect("order-0 generator evaluation cannot fail");
    let mut ddt = [0.0; GEN_STATES];
    ddt.copy_from_slice(&out);
    let (i_g, p_e) = generator_terminal_current(state, params, v);
    GeneratorDerivs { ddt, p_e, i_g }
}

/// Truncated series solution of the generator equations over one window,
/// with the terminal voltage prescribed by `voltage`.
pub fn generator_sas(
    state: &GeneratorState,
    params: &GeneratorParams,
    voltage: &BusVoltageSeries,
    t0: f64,
    n: usize,
) -> Result<SeriesVector, SeriesError> {
    let field = GenField::new(params, voltage);
    propagate(&field, &state.as_array(), t0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn test_params() -> GeneratorParams {
        GeneratorParams {
            bus: 0,
            xd: 1.6,
            xdp: 0.25,
            xdpp: 0.18,
            xq: 1.55,
            xqp: 0.45,
            xqpp: 0.18,
            td0p: 7.0,
            td0pp: 0.045,
            tq0p: 0.8,
            tq0pp: 0.07,
            h: 6.0,
            d: 2.0,
            ra: 0.003,
            omega_s: 2.0 * core::f64::consts::PI * 60.0,
            exciter_k: 25.0,
            exciter_te: 0.25,
            vref: 0.0,
            pref: 0.0,
            governor_r: 0.05,
            governor_tg: 0.6,
        }
    }

    fn max_abs(x: &[f64]) -> f64 {
        x.iter().map(|v| math::abs(*v)).fold(0.0, f64::max)
    }

    #[test]
    fn unloaded_machine_init() {
        let mut p = test_params();
        let st = init_generator(
            &mut p,
            PowerFlowPoint {
                p: 0.0,
                q: 0.0,
                v: Complex64::new(1.0, 0.0),
            },
        )
        .unwrap();
        assert_eq!(st.domega, 0.0);
        assert!(math::abs(st.pm) < 1e-14);
        let d = generator_derivatives(&st, &p, Complex64::new(1.0, 0.0));
        assert!(math::abs(d.p_e) < 1e-14);
        assert!(max_abs(&d.ddt) < 1e-12);
    }

    #[test]
    fn loaded_init_zeroes_derivatives() {
        // frozen from an independent straight-line implementation of the
        // machine algebra (P=0.8, Q=0.2, V=1.02 at 5 degrees)
        let v = 1.02 * math::cis(5f64.to_radians());
        let mut p = test_params();
        let st = init_generator(&mut p, PowerFlowPoint { p: 0.8, q: 0.2, v }).unwrap();
        assert!(math::abs(st.delta - 0.8289458764586262) < 1e-12);
        assert!(math::abs(st.efd - 1.8324605181744995) < 1e-12);
        assert!(math::abs(p.vref - 1.09329842072698) < 1e-12);
        let d = generator_derivatives(&st, &p, v);
        assert!(max_abs(&d.ddt) <= 1e-8, "residual {}", max_abs(&d.ddt));
        assert!(math::abs(d.p_e - 0.8) < 1e-12);
    }

    #[test]
    fn init_rejects_zero_voltage() {
        let mut p = test_params();
        assert!(matches!(
            init_generator(
                &mut p,
                PowerFlowPoint {
                    p: 0.1,
                    q: 0.0,
                    v: Complex64::new(0.0, 0.0)
                }
            ),
            Err(DeviceError::InfeasiblePoint { .. })
        ));
    }

    #[test]
    fn voltage_dip_accelerates_machine() {
        let v = Complex64::new(1.0, 0.0);
        let mut p = test_params();
        let st = init_generator(&mut p, PowerFlowPoint { p: 0.8, q: 0.1, v }).unwrap();
        let dipped = generator_derivatives(&st, &p, Complex64::new(0.5, 0.0));
        assert!(dipped.p_e < st.pm);
        assert!(dipped.ddt[1] > 0.0, "swing must accelerate");
    }

    #[test]
    fn rotation_roundtrip() {
        let delta = 0.7342;
        let rot = math::cis(-(delta - FRAC_PI_2));
        let z = Complex64::new(0.3, -1.2);
        let back = rot.conj() * (rot * z);
        assert!(math::cabs(back - z) < 1e-12);
    }

    #[test]
    fn stator_power_consistency() {
        // P_e from dq products equals Re(V conj(I_g))
        let v = 1.01 * math::cis(0.12);
        let mut p = test_params();
        let st = init_generator(&mut p, PowerFlowPoint { p: 0.6, q: 0.25, v }).unwrap();
        let mut state = st;
        state.eqpp += 0.05;
        state.delta -= 0.2;
        let (ig, pe) = generator_terminal_current(&state, &p, v);
        let s = v * ig.conj();
        assert!(math::abs(pe - s.re) < 1e-10);
    }

    #[test]
    fn sas_constant_voltage_at_equilibrium_is_constant() {
        let v = Complex64::new(1.0, 0.0);
        let mut p = test_params();
        let st = init_generator(&mut p, PowerFlowPoint { p: 0.5, q: 0.1, v }).unwrap();
        let voltage = BusVoltageSeries::constant(0.0, 1.0, 0.0, 2);
        let sas = generator_sas(&st, &p, &voltage, 0.0, 3).unwrap();
        for i in 0..GEN_STATES {
            for k in 1..=3 {
                assert!(
                    math::abs(sas.component(i).coeff(k)) < 1e-9,
                    "state {i} coefficient {k}"
                );
            }
        }
    }

    #[test]
    fn sas_order1_is_euler_step() {
        let v = 1.02 * math::cis(0.05);
        let mut p = test_params();
        let mut st = init_generator(&mut p, PowerFlowPoint { p: 0.7, q: 0.2, v }).unwrap();
        st.domega = 0.002;
        st.eqpp -= 0.03;
        let voltage = BusVoltageSeries::constant(0.0, math::cabs(v), math::carg(v), 1);
        let sas = generator_sas(&st, &p, &voltage, 0.0, 1).unwrap();
        let d = generator_derivatives(&st, &p, v);
        let h = 0.004;
        let x = st.as_array();
        let end = sas.evaluate(h);
        for i in 0..GEN_STATES {
            let euler = x[i] + h * d.ddt[i];
            assert_eq!(end[i], euler, "state {i}");
        }
    }
}
