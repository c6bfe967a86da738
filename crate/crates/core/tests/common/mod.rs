//! Shared builders for consistent in-memory test cases. The power-flow
//! point is reverse-engineered from a chosen voltage profile, so the stored
//! solution satisfies the network equations to machine precision.

// not every test file uses every builder
#![allow(dead_code)]

use num_complex::Complex64;
use sassim_core::devices::{GeneratorParams, MotorParams, ZipLoad};
use sassim_core::model::{Branch, Case, GeneratorEntry, MotorEntry};

pub const OMEGA_S: f64 = 2.0 * core::f64::consts::PI * 60.0;

pub fn gen_params(bus: usize) -> GeneratorParams {
    GeneratorParams {
        bus,
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
        d: 4.0,
        ra: 0.003,
        omega_s: OMEGA_S,
        exciter_k: 12.0,
        exciter_te: 0.4,
        vref: 0.0,
        pref: 0.0,
        governor_r: 0.05,
        governor_tg: 0.6,
    }
}

/// Motor constants expressed on the machine base, rescaled onto the system
/// base by `scale` = system MVA / machine MVA so the magnetizing demand
/// stays proportionate to the served load.
pub fn motor_params(bus: usize, scale: f64) -> MotorParams {
    MotorParams {
        bus,
        h: 0.8,
        rs: 0.02 * scale,
        rr: 0.02 * scale,
        xs: 1.8 * scale,
        xsp: 0.15 * scale,
        xr: 1.75 * scale,
        f1: 0.0,
        lambda1: 0.0,
        f2: 0.0,
        lambda2: 2.0,
        omega_s: OMEGA_S,
    }
}

/// Plain-network complex injections for a case voltage profile.
fn injections(case: &Case) -> Vec<Complex64> {
    let v = case.bus_voltages();
    let n = v.len();
    let mut i_net = vec![Complex64::new(0.0, 0.0); n];
    for br in &case.branches {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let ysh = Complex64::new(0.0, br.charging / 2.0);
        i_net[br.from] += (ys + ysh) / (br.tap * br.tap) * v[br.from] - ys / br.tap * v[br.to];
        i_net[br.to] += (ys + ysh) * v[br.to] - ys / br.tap * v[br.from];
    }
    (0..n).map(|i| v[i] * i_net[i].conj()).collect()
}

/// Three-bus chain: generator at bus 0, ZIP loads at buses 1 and 2, and
/// optionally an induction motor carrying part of the bus-2 load.
pub fn three_bus_case(with_motor: bool) -> Case {
    let mut case = Case::empty(3, 100.0, 60.0);
    case.buses[0].vm = 1.03;
    case.buses[0].va = 0.05;
    case.buses[1].vm = 1.0;
    case.buses[1].va = -0.02;
    case.buses[2].vm = 0.97;
    case.buses[2].va = -0.08;
    case.branches.push(Branch {
        from: 0,
        to: 1,
        r: 0.0,
        x: 0.10,
        charging: 0.0,
        tap: 1.0,
    });
    case.branches.push(Branch {
        from: 1,
        to: 2,
        r: 0.02,
        x: 0.15,
        charging: 0.04,
        tap: 1.0,
    });
    let s = injections(&case);
    case.generators.push(GeneratorEntry {
        params: gen_params(0),
        p: s[0].re,
        q: s[0].im,
    });
    case.loads.push(ZipLoad {
        bus: 1,
        p0: -s[1].re,
        q0: -s[1].im,
        v0: case.voltage(1),
        pz: 0.4,
        pi: 0.3,
        pp: 0.3,
        pm: 0.0,
        qz: 0.4,
        qi: 0.3,
        qp: 0.3,
        qm: 0.0,
    });
    let (pm, qm) = if with_motor { (0.4, 0.2) } else { (0.0, 0.0) };
    case.loads.push(ZipLoad {
        bus: 2,
        p0: -s[2].re,
        q0: -s[2].im,
        v0: case.voltage(2),
        pz: 0.2,
        pi: 0.2,
        pp: 0.6 - pm,
        pm,
        qz: 0.3,
        qi: 0.2,
        qp: 0.5 - qm,
        qm,
    });
    if with_motor {
        case.motors.push(MotorEntry {
            params: motor_params(2, 5.0),
            p_share: pm,
            q_share: qm,
        });
    }
    case
}
