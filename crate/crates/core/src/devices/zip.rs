//! ZIP static load: constant-impedance, constant-current, constant-power
//! shares plus the motor share handled by a separate dynamic device.
//!
//! The impedance share is stamped into the admittance matrix at build time;
//! [`zip_injection`] returns only the constant-current and constant-power
//! contributions.

use num_complex::Complex64;

use crate::math;

/// Below this voltage magnitude (pu), the constant-current and
/// constant-power shares convert to the impedance computed at the floor
/// voltage so the current law stays bounded near a collapsed bus.
pub const LOW_VOLTAGE_FLOOR: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct ZipLoad {
    pub bus: usize,
    /// Scheduled active load at initialization (pu).
    pub p0: f64,
    /// Scheduled reactive load at initialization (pu).
    pub q0: f64,
    /// Bus voltage at initialization.
    pub v0: Complex64,
    pub pz: f64,
    pub pi: f64,
    pub pp: f64,
    pub pm: f64,
    pub qz: f64,
    pub qi: f64,
    pub qp: f64,
    pub qm: f64,
}

impl ZipLoad {
    /// Admittance of the constant-impedance share, stamped into the
    /// admittance matrix.
    pub fn impedance_admittance(&self) -> Complex64 {
        let vmag2 = math::cabs(self.v0) * math::cabs(self.v0);
        Complex64::new(self.pz * self.p0, -self.qz * self.q0) / vmag2
    }
}

/// Current drawn by the constant-current and constant-power shares (load
/// convention: subtract this from the bus injection).
///
/// `I = (pi P0 |V|/|V0| - j qi Q0 |V|/|V0| + pp P0 - j qp Q0) / V*`; below
/// [`LOW_VOLTAGE_FLOOR`] both shares convert to the equivalent impedance at
/// the floor voltage, which matches the law continuously at the threshold.
pub fn zip_injection(load: &ZipLoad, v: Complex64) -> Complex64 {
    let v0mag = math::cabs(load.v0);
    let vmag = math::cabs(v);
    if vmag < LOW_VOLTAGE_FLOOR {
        let s_cc = Complex64::new(
            load.pi * load.p0 * LOW_VOLTAGE_FLOOR / v0mag,
            load.qi * load.q0 * LOW_VOLTAGE_FLOOR / v0mag,
        );
        let s_cp = Complex64::new(load.pp * load.p0, load.qp * load.q0);
        let y_eq = (s_cc + s_cp).conj() / (LOW_VOLTAGE_FLOOR * LOW_VOLTAGE_FLOOR);
        return y_eq * v;
    }
    let numer = Complex64::new(
        load.pi * load.p0 * vmag / v0mag + load.pp * load.p0,
        -(load.qi * load.q0 * vmag / v0mag + load.qp * load.q0),
    );
    numer / v.conj()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(pz: f64, pi: f64, pp: f64, qz: f64, qi: f64, qp: f64) -> ZipLoad {
        ZipLoad {
            bus: 0,
            p0: 1.2,
            q0: 0.4,
            v0: Complex64::new(1.0, 0.0),
            pz,
            pi,
            pp,
            pm: 0.0,
            qz,
            qi,
            qp,
            qm: 0.0,
        }
    }

    #[test]
    fn pure_impedance_injects_nothing() {
        let l = load(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let i = zip_injection(&l, Complex64::new(0.97, 0.1));
        assert_eq!(i, Complex64::new(0.0, 0.0));
        assert_eq!(l.impedance_admittance(), Complex64::new(1.2, -0.4));
    }

    #[test]
    fn initialization_consistency() {
        // at V = V0 the drawn power is exactly the non-impedance share
        let l = load(0.2, 0.3, 0.5, 0.2, 0.3, 0.5);
        let i = zip_injection(&l, l.v0);
        let s = l.v0 * i.conj();
        assert!(math::abs(s.re - 0.8 * l.p0) < 1e-14);
        assert!(math::abs(s.im - 0.8 * l.q0) < 1e-14);
    }

    #[test]
    fn constant_power_current_doubles_when_voltage_halves() {
        let l = load(0.0, 0.0, 1.0, 0.0, 0.0, 1.0);
        let i1 = zip_injection(&l, Complex64::new(1.0, 0.0));
        let i2 = zip_injection(&l, Complex64::new(0.5, 0.0));
        assert!(math::abs(math::cabs(i2) / math::cabs(i1) - 2.0) < 1e-13);
    }

    #[test]
    fn low_voltage_conversion_is_continuous_and_bounded() {
        let l = load(0.1, 0.4, 0.5, 0.1, 0.4, 0.5);
        let above = zip_injection(&l, Complex64::new(LOW_VOLTAGE_FLOOR + 1e-12, 0.0));
        let below = zip_injection(&l, Complex64::new(LOW_VOLTAGE_FLOOR - 1e-12, 0.0));
        assert!(math::cabs(above - below) < 1e-9);
        let collapsed = zip_injection(&l, Complex64::new(1e-9, 0.0));
        assert!(math::cabs(collapsed) < 1e-8, "current must vanish with V");
    }
}
