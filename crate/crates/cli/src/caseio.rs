//! Case-file schema and conversion into the in-memory model.
//!
//! The on-disk format is TOML with a `format_version` field; see the
//! bundled cases under `cases/` for the full layout. Bus references use the
//! external bus ids; conversion maps them onto dense indices and rebuilds
//! the ZIP motor shares from the motor records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use sassim_core::devices::{GeneratorParams, MotorParams, ZipLoad};
use sassim_core::model::{Branch, Bus, Case, GeneratorEntry, MotorEntry};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    format_version: u32,
    system: SystemDoc,
    buses: Vec<BusDoc>,
    branches: Vec<BranchDoc>,
    #[serde(default)]
    generators: Vec<GenDoc>,
    #[serde(default)]
    loads: Vec<LoadDoc>,
    #[serde(default)]
    motors: Vec<MotorDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    base_mva: f64,
    frequency_hz: f64,
    #[serde(default)]
    #[allow(dead_code)]
    description: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: u32,
    base_kv: f64,
    vm: f64,
    va_deg: f64,
}

fn default_tap() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchDoc {
    from_bus: u32,
    to_bus: u32,
    r: f64,
    x: f64,
    #[serde(default)]
    charging: f64,
    #[serde(default = "default_tap")]
    tap: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDoc {
    bus: u32,
    p: f64,
    q: f64,
    xd: f64,
    xdp: f64,
    xdpp: f64,
    xq: f64,
    xqp: f64,
    xqpp: f64,
    td0p: f64,
    td0pp: f64,
    tq0p: f64,
    tq0pp: f64,
    h: f64,
    d: f64,
    ra: f64,
    exciter_k: f64,
    exciter_te: f64,
    governor_r: f64,
    governor_tg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    bus: u32,
    p: f64,
    q: f64,
    pz: f64,
    pi: f64,
    pp: f64,
    qz: f64,
    qi: f64,
    qp: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotorDoc {
    bus: u32,
    p_share: f64,
    q_share: f64,
    h: f64,
    rs: f64,
    rr: f64,
    xs: f64,
    xsp: f64,
    xr: f64,
    #[serde(default)]
    f1: f64,
    #[serde(default)]
    lambda1: f64,
    #[serde(default)]
    f2: f64,
    #[serde(default = "default_lambda2")]
    lambda2: f64,
}

fn default_lambda2() -> f64 {
    2.0
}

/// Loaded case plus the id-to-index mapping needed to resolve event flags.
#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub case: Case,
    pub bus_index: BTreeMap<u32, usize>,
}

impl LoadedCase {
    pub fn bus_index_of(&self, id: u32) -> Result<usize, CliError> {
        self.bus_index.get(&id).copied().ok_or_else(|| {
            CliError::Usage(format!("bus id {id} does not exist in the case"))
        })
    }
}

/// Parses and validates a case file.
pub fn load_case(path: &Path) -> Result<LoadedCase, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: CaseDoc = toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let validation = |detail: String| CliError::Validation {
        path: path.to_path_buf(),
        detail,
    };
    if doc.format_version != FORMAT_VERSION {
        return Err(validation(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }

    let mut bus_index = BTreeMap::new();
    let mut buses = Vec::with_capacity(doc.buses.len());
    for (i, b) in doc.buses.iter().enumerate() {
        if bus_index.insert(b.id, i).is_some() {
            return Err(validation(format!("buses[{i}]: duplicate bus id {}", b.id)));
        }
        buses.push(Bus {
            id: b.id,
            base_kv: b.base_kv,
            vm: b.vm,
            va: b.va_deg.to_radians(),
        });
    }
    let resolve = |id: u32, what: &str| -> Result<usize, CliError> {
        bus_index
            .get(&id)
            .copied()
            .ok_or_else(|| validation(format!("{what}: unknown bus id {id}")))
    };

    let omega_s = 2.0 * std::f64::consts::PI * doc.system.frequency_hz;
    let mut case = Case::empty(buses.len(), doc.system.base_mva, doc.system.frequency_hz);
    case.buses = buses;

    for (i, br) in doc.branches.iter().enumerate() {
        case.branches.push(Branch {
            from: resolve(br.from_bus, &format!("branches[{i}].from_bus"))?,
            to: resolve(br.to_bus, &format!("branches[{i}].to_bus"))?,
            r: br.r,
            x: br.x,
            charging: br.charging,
            tap: br.tap,
        });
    }
    for (i, g) in doc.generators.iter().enumerate() {
        let bus = resolve(g.bus, &format!("generators[{i}].bus"))?;
        case.generators.push(GeneratorEntry {
            params: GeneratorParams {
                bus,
                xd: g.xd,
                xdp: g.xdp,
                xdpp: g.xdpp,
                xq: g.xq,
                xqp: g.xqp,
                xqpp: g.xqpp,
                td0p: g.td0p,
                td0pp: g.td0pp,
                tq0p: g.tq0p,
                tq0pp: g.tq0pp,
                h: g.h,
                d: g.d,
                ra: g.ra,
                omega_s,
                exciter_k: g.exciter_k,
                exciter_te: g.exciter_te,
                vref: 0.0,
                pref: 0.0,
                governor_r: g.governor_r,
                governor_tg: g.governor_tg,
            },
            p: g.p,
            q: g.q,
        });
    }
    for (i, m) in doc.motors.iter().enumerate() {
        let bus = resolve(m.bus, &format!("motors[{i}].bus"))?;
        case.motors.push(MotorEntry {
            params: MotorParams {
                bus,
                h: m.h,
                rs: m.rs,
                rr: m.rr,
                xs: m.xs,
                xsp: m.xsp,
                xr: m.xr,
                f1: m.f1,
                lambda1: m.lambda1,
                f2: m.f2,
                lambda2: m.lambda2,
                omega_s,
            },
            p_share: m.p_share,
            q_share: m.q_share,
        });
    }
    for (i, l) in doc.loads.iter().enumerate() {
        let bus = resolve(l.bus, &format!("loads[{i}].bus"))?;
        let motor = doc.motors.iter().find(|m| m.bus == l.bus);
        let (pm, qm) = motor.map(|m| (m.p_share, m.q_share)).unwrap_or((0.0, 0.0));
        let sum_p = l.pz + l.pi + l.pp + pm;
        let sum_q = l.qz + l.qi + l.qp + qm;
        if (sum_p - 1.0).abs() > 1e-9 || (sum_q - 1.0).abs() > 1e-9 {
            return Err(validation(format!(
                "loads[{i}] (bus id {}): shares sum to {sum_p} (P) / {sum_q} (Q) including the \
                 motor share, expected 1",
                l.bus
            )));
        }
        case.loads.push(ZipLoad {
            bus,
            p0: l.p,
            q0: l.q,
            v0: case.voltage(bus),
            pz: l.pz,
            pi: l.pi,
            pp: l.pp,
            pm,
            qz: l.qz,
            qi: l.qi,
            qp: l.qp,
            qm,
        });
    }

    case.validate()
        .map_err(|e| validation(e.to_string()))?;
    Ok(LoadedCase { case, bus_index })
}
