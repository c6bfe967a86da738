//! In-memory system model: buses, branches, device records, and the
//! power-flow operating point they were initialized from.
//!
//! Bus references are zero-based indices into `buses`; the `id` field keeps
//! the external numbering from the case file for naming and diagnostics.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;

use crate::devices::{GeneratorParams, MotorParams, ZipLoad};
use crate::math;

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: u32,
    pub base_kv: f64,
    /// Power-flow voltage magnitude (pu).
    pub vm: f64,
    /// Power-flow voltage angle (rad).
    pub va: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance (pu).
    pub charging: f64,
    /// Off-nominal turns ratio on the `from` side; 1.0 when absent.
    pub tap: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratorEntry {
    pub params: GeneratorParams,
    /// Scheduled active injection (pu).
    pub p: f64,
    /// Scheduled reactive injection (pu).
    pub q: f64,
}

#[derive(Debug, Clone)]
pub struct MotorEntry {
    pub params: MotorParams,
    /// Fraction of the co-located load's active power served by the motor.
    pub p_share: f64,
    pub q_share: f64,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub base_mva: f64,
    pub frequency_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<GeneratorEntry>,
    pub motors: Vec<MotorEntry>,
    pub loads: Vec<ZipLoad>,
}

/// Per-bus complex power mismatch allowed for the stored power-flow point.
pub const PF_MISMATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum CaseError {
    BusIndexOutOfRange { what: &'static str, index: usize },
    DuplicateBranch { from: usize, to: usize },
    BadBranch { index: usize, detail: &'static str },
    ShareOutOfRange { bus: usize, share: f64 },
    SharesDoNotSumToOne { bus: usize, sum_p: f64, sum_q: f64 },
    MotorShareMismatch { bus: usize },
    MotorWithoutLoad { bus: usize },
    BadGeneratorParams { bus: usize, detail: &'static str },
    BadMotorParams { bus: usize, detail: &'static str },
    PowerFlowMismatch { bus: usize, mismatch: f64 },
    NonFinite { what: &'static str },
}

impl fmt::Display for CaseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseError::BusIndexOutOfRange { what, index } => {
                write!(f, "{what} references bus index {index} outside the bus list")
            }
            CaseError::DuplicateBranch { from, to } => {
                write!(f, "duplicate branch between bus indices {from} and {to}")
            }
            CaseError::BadBranch { index, detail } => {
                write!(f, "branch {index}: {detail}")
            }
            CaseError::ShareOutOfRange { bus, share } => {
                write!(f, "load at bus index {bus}: share {share} outside [0, 1]")
            }
            CaseError::SharesDoNotSumToOne { bus, sum_p, sum_q } => write!(
                f,
                "load at bus index {bus}: shares sum to {sum_p} (P) / {sum_q} (Q), expected 1"
            ),
            CaseError::MotorShareMismatch { bus } => write!(
                f,
                "motor at bus index {bus}: share disagrees with the co-located load record"
            ),
            CaseError::MotorWithoutLoad { bus } => {
                write!(f, "motor at bus index {bus} has no co-located load record")
            }
            CaseError::BadGeneratorParams { bus, detail } => {
                write!(f, "generator at bus index {bus}: {detail}")
            }
            CaseError::BadMotorParams { bus, detail } => {
                write!(f, "motor at bus index {bus}: {detail}")
            }
            CaseError::PowerFlowMismatch { bus, mismatch } => write!(
                f,
                "power-flow solution violates the network equations at bus index {bus} \
                 (|dS| = {mismatch:.3e} pu, allowed {PF_MISMATCH_TOL:.1e})"
            ),
            CaseError::NonFinite { what } => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for CaseError {}

impl Case {
    /// Case skeleton with flat 1.0 pu voltages, used by tests and builders.
    pub fn empty(bus_count: usize, base_mva: f64, frequency_hz: f64) -> Self {
        Self {
            base_mva,
            frequency_hz,
            buses: (0..bus_count)
                .map(|i| Bus {
                    id: (i + 1) as u32,
                    base_kv: 1.0,
                    vm: 1.0,
                    va: 0.0,
                })
                .collect(),
            branches: Vec::new(),
            generators: Vec::new(),
            motors: Vec::new(),
            loads: Vec::new(),
        }
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    /// Complex power-flow voltage of one bus.
    pub fn voltage(&self, bus: usize) -> Complex64 {
        let b = &self.buses[bus];
        b.vm * math::cis(b.va)
    }

    pub fn bus_voltages(&self) -> Vec<Complex64> {
        (0..self.buses.len()).map(|i| self.voltage(i)).collect()
    }

    /// Per-bus complex power mismatch of the stored power-flow point against
    /// the plain branch network (no device shunts).
    pub fn power_flow_mismatch(&self) -> Vec<Complex64> {
        let n = self.buses.len();
        let v = self.bus_voltages();
        let mut i_net = vec![Complex64::new(0.0, 0.0); n];
        for br in &self.branches {
            let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
            let ysh = Complex64::new(0.0, br.charging / 2.0);
            let tap = if br.tap == 0.0 { 1.0 } else { br.tap };
            i_net[br.from] += (ys + ysh) / (tap * tap) * v[br.from] - ys / tap * v[br.to];
            i_net[br.to] += (ys + ysh) * v[br.to] - ys / tap * v[br.from];
        }
        let mut sched = vec![Complex64::new(0.0, 0.0); n];
        for g in &self.generators {
            sched[g.params.bus] += Complex64::new(g.p, g.q);
        }
        for l in &self.loads {
            sched[l.bus] -= Complex64::new(l.p0, l.q0);
        }
        (0..n)
            .map(|i| sched[i] - v[i] * i_net[i].conj())
            .collect()
    }

    /// Checks structural invariants and the power-flow point.
    pub fn validate(&self) -> Result<(), CaseError> {
        let n = self.buses.len();
        for b in &self.buses {
            if !(b.vm.is_finite() && b.va.is_finite() && b.base_kv.is_finite()) {
                return Err(CaseError::NonFinite { what: "bus record" });
            }
        }
        let mut seen = BTreeSetPairs::new();
        for (i, br) in self.branches.iter().enumerate() {
            if br.from >= n || br.to >= n {
                return Err(CaseError::BusIndexOutOfRange {
                    what: "branch",
                    index: br.from.max(br.to),
                });
            }
            if br.from == br.to {
                return Err(CaseError::BadBranch {
                    index: i,
                    detail: "self-loop",
                });
            }
            if ![br.r, br.x, br.charging, br.tap].iter().all(|v| v.is_finite()) {
                return Err(CaseError::NonFinite { what: "branch record" });
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(CaseError::BadBranch {
                    index: i,
                    detail: "zero impedance",
                });
            }
            if !seen.insert(br.from, br.to) {
                return Err(CaseError::DuplicateBranch {
                    from: br.from,
                    to: br.to,
                });
            }
        }
        for g in &self.generators {
            let p = &g.params;
            if p.bus >= n {
                return Err(CaseError::BusIndexOutOfRange {
                    what: "generator",
                    index: p.bus,
                });
            }
            if !(p.xd >= p.xdp && p.xdp >= p.xdpp && p.xdpp > 0.0) {
                return Err(CaseError::BadGeneratorParams {
                    bus: p.bus,
                    detail: "requires xd >= xdp >= xdpp > 0",
                });
            }
            if !(p.xq >= p.xqp && p.xqp >= p.xqpp && p.xqpp > 0.0) {
                return Err(CaseError::BadGeneratorParams {
                    bus: p.bus,
                    detail: "requires xq >= xqp >= xqpp > 0",
                });
            }
            if [p.td0p, p.td0pp, p.tq0p, p.tq0pp, p.exciter_te, p.governor_tg]
                .iter()
                .any(|t| *t <= 0.0)
            {
                return Err(CaseError::BadGeneratorParams {
                    bus: p.bus,
                    detail: "time constants must be positive",
                });
            }
            if p.h <= 0.0 {
                return Err(CaseError::BadGeneratorParams {
                    bus: p.bus,
                    detail: "inertia must be positive",
                });
            }
        }
        for m in &self.motors {
            let p = &m.params;
            if p.bus >= n {
                return Err(CaseError::BusIndexOutOfRange {
                    what: "motor",
                    index: p.bus,
                });
            }
            if p.h <= 0.0 || p.rr <= 0.0 || p.xr <= 0.0 {
                return Err(CaseError::BadMotorParams {
                    bus: p.bus,
                    detail: "h, rr, xr must be positive",
                });
            }
            if !(p.xs > p.xsp && p.xsp > 0.0) {
                return Err(CaseError::BadMotorParams {
                    bus: p.bus,
                    detail: "requires xs > xsp > 0",
                });
            }
            let load = self
                .loads
                .iter()
                .find(|l| l.bus == p.bus)
                .ok_or(CaseError::MotorWithoutLoad { bus: p.bus })?;
            if (load.pm - m.p_share).abs() > 1e-9 || (load.qm - m.q_share).abs() > 1e-9 {
                return Err(CaseError::MotorShareMismatch { bus: p.bus });
            }
        }
        for l in &self.loads {
            if l.bus >= n {
                return Err(CaseError::BusIndexOutOfRange {
                    what: "load",
                    index: l.bus,
                });
            }
            for share in [l.pz, l.pi, l.pp, l.pm, l.qz, l.qi, l.qp, l.qm] {
                if !(0.0..=1.0).contains(&share) {
                    return Err(CaseError::ShareOutOfRange {
                        bus: l.bus,
                        share,
                    });
                }
            }
            let sum_p = l.pz + l.pi + l.pp + l.pm;
            let sum_q = l.qz + l.qi + l.qp + l.qm;
            if (sum_p - 1.0).abs() > 1e-9 || (sum_q - 1.0).abs() > 1e-9 {
                return Err(CaseError::SharesDoNotSumToOne {
                    bus: l.bus,
                    sum_p,
                    sum_q,
                });
            }
            if l.pm > 0.0 && !self.motors.iter().any(|m| m.params.bus == l.bus) {
                return Err(CaseError::MotorWithoutLoad { bus: l.bus });
            }
        }
        for (bus, ds) in self.power_flow_mismatch().iter().enumerate() {
            let mag = math::cabs(*ds);
            if mag > PF_MISMATCH_TOL {
                return Err(CaseError::PowerFlowMismatch { bus, mismatch: mag });
            }
        }
        Ok(())
    }
}

/// Tiny set of normalized index pairs (duplicate-branch detection).
struct BTreeSetPairs {
    inner: alloc::collections::BTreeSet<(usize, usize)>,
}

impl BTreeSetPairs {
    fn new() -> Self {
        Self {
            inner: alloc::collections::BTreeSet::new(),
        }
    }
    fn insert(&mut self, a: usize, b: usize) -> bool {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.inner.insert(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{MotorParams, ZipLoad};
    use num_complex::Complex64;

    fn bare_case() -> Case {
        let mut case = Case::empty(3, 100.0, 60.0);
        for (f, t) in [(0usize, 1usize), (1, 2)] {
            case.branches.push(Branch {
                from: f,
                to: t,
                r: 0.01,
                x: 0.1,
                charging: 0.0,
                tap: 1.0,
            });
        }
        case
    }

    #[test]
    fn rejects_duplicate_and_degenerate_branches() {
        let mut case = bare_case();
        case.branches.push(Branch {
            from: 2,
            to: 1,
            r: 0.02,
            x: 0.2,
            charging: 0.0,
            tap: 1.0,
        });
        assert!(matches!(
            case.validate(),
            Err(CaseError::DuplicateBranch { .. })
        ));

        let mut case = bare_case();
        case.branches[0].to = 0;
        assert!(matches!(case.validate(), Err(CaseError::BadBranch { .. })));

        let mut case = bare_case();
        case.branches[1].r = 0.0;
        case.branches[1].x = 0.0;
        assert!(matches!(case.validate(), Err(CaseError::BadBranch { .. })));
    }

    #[test]
    fn rejects_inconsistent_machine_parameters() {
        let mut case = bare_case();
        let mut params = crate::devices::GeneratorParams {
            bus: 0,
            xd: 0.2, // below the transient reactance
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
            omega_s: case.omega_s(),
            exciter_k: 12.0,
            exciter_te: 0.4,
            vref: 0.0,
            pref: 0.0,
            governor_r: 0.05,
            governor_tg: 0.6,
        };
        case.generators.push(GeneratorEntry {
            params: params.clone(),
            p: 0.0,
            q: 0.0,
        });
        assert!(matches!(
            case.validate(),
            Err(CaseError::BadGeneratorParams { .. })
        ));
        params.xd = 1.6;
        params.td0pp = 0.0;
        case.generators[0].params = params;
        assert!(matches!(
            case.validate(),
            Err(CaseError::BadGeneratorParams { .. })
        ));
    }

    #[test]
    fn rejects_motor_inconsistencies() {
        let mut case = bare_case();
        case.motors.push(MotorEntry {
            params: MotorParams {
                bus: 2,
                h: 1.0,
                rs: 0.05,
                rr: 0.05,
                xs: 4.0,
                xsp: 0.4,
                xr: 4.0,
                f1: 0.0,
                lambda1: 0.0,
                f2: 0.0,
                lambda2: 2.0,
                omega_s: case.omega_s(),
            },
            p_share: 0.3,
            q_share: 0.2,
        });
        // no co-located load record
        assert!(matches!(
            case.validate(),
            Err(CaseError::MotorWithoutLoad { bus: 2 })
        ));

        case.loads.push(ZipLoad {
            bus: 2,
            p0: 0.5,
            q0: 0.2,
            v0: Complex64::new(1.0, 0.0),
            pz: 0.4,
            pi: 0.2,
            pp: 0.1,
            pm: 0.25, // disagrees with the motor record
            qz: 0.4,
            qi: 0.2,
            qp: 0.2,
            qm: 0.2,
        });
        assert!(matches!(
            case.validate(),
            Err(CaseError::MotorShareMismatch { bus: 2 })
        ));
    }

    #[test]
    fn rejects_bad_shares() {
        let mut case = bare_case();
        case.loads.push(ZipLoad {
            bus: 1,
            p0: 0.3,
            q0: 0.1,
            v0: Complex64::new(1.0, 0.0),
            pz: 0.5,
            pi: 0.3,
            pp: 0.3, // sums to 1.1
            pm: 0.0,
            qz: 1.0,
            qi: 0.0,
            qp: 0.0,
            qm: 0.0,
        });
        assert!(matches!(
            case.validate(),
            Err(CaseError::SharesDoNotSumToOne { bus: 1, .. })
        ));
        case.loads[0].pp = -0.1;
        assert!(matches!(
            case.validate(),
            Err(CaseError::ShareOutOfRange { bus: 1, .. })
        ));
    }

    #[test]
    fn rejects_power_flow_mismatch() {
        let mut case = bare_case();
        // flat profile with no injections leaves charging-free lines happy,
        // but an unserved load breaks the balance
        case.loads.push(ZipLoad {
            bus: 2,
            p0: 0.4,
            q0: 0.1,
            v0: Complex64::new(1.0, 0.0),
            pz: 1.0,
            pi: 0.0,
            pp: 0.0,
            pm: 0.0,
            qz: 1.0,
            qi: 0.0,
            qp: 0.0,
            qm: 0.0,
        });
        assert!(matches!(
            case.validate(),
            Err(CaseError::PowerFlowMismatch { .. })
        ));
    }
}
