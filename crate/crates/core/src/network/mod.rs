//! Admittance-matrix assembly and modification, sparse network solution,
//! the device-network interface iteration, and polar voltage-series fitting
//! for dynamic buses.

pub mod sparse;

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;

use crate::math;
use crate::model::Case;
use crate::series::PowerSeries;
use sparse::{CscComplex, SingularMatrix, SparseLu};

/// Relative residual enforced by [`NetworkModel::solve`].
pub const SOLVE_RTOL: f64 = 1e-10;

/// Default shunt admittance stamped for a three-phase fault.
pub fn default_fault_admittance() -> Complex64 {
    Complex64::new(1e6, -1e6)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    Singular(SingularMatrix),
    ResidualTooLarge { achieved: f64, required: f64 },
    Disconnected { bus: usize },
    UnknownBus { bus: usize },
    UnknownBranch { from: usize, to: usize },
    EventConflict { detail: &'static str },
    NonConvergence { iterations: usize, mismatch: f64 },
    InsufficientSamples { have: usize, need: usize },
    AnchorMismatch { t0: f64, newest: f64 },
    NonMonotonicSample { t: f64, last: f64 },
    FitSingular,
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::Singular(s) => write!(f, "{s}"),
            NetworkError::ResidualTooLarge { achieved, required } => write!(
                f,
                "network solve residual {achieved:.3e} exceeds {required:.3e} after refinement"
            ),
            NetworkError::Disconnected { bus } => {
                write!(f, "bus index {bus} is not connected to the reference island")
            }
            NetworkError::UnknownBus { bus } => write!(f, "bus index {bus} out of range"),
            NetworkError::UnknownBranch { from, to } => {
                write!(f, "no branch between bus indices {from} and {to}")
            }
            NetworkError::EventConflict { detail } => write!(f, "network event conflict: {detail}"),
            NetworkError::NonConvergence {
                iterations,
                mismatch,
            } => write!(
                f,
                "interface iteration failed to converge in {iterations} iterations \
                 (last voltage change {mismatch:.3e} pu)"
            ),
            NetworkError::InsufficientSamples { have, need } => write!(
                f,
                "voltage fit needs {need} samples but only {have} are buffered; \
                 run the self-start procedure first"
            ),
            NetworkError::AnchorMismatch { t0, newest } => write!(
                f,
                "voltage fit must anchor at the newest sample (t0 = {t0}, newest = {newest})"
            ),
            NetworkError::NonMonotonicSample { t, last } => {
                write!(f, "sample time {t} does not advance past {last}")
            }
            NetworkError::FitSingular => write!(f, "voltage fit normal equations are singular"),
        }
    }
}

impl core::error::Error for NetworkError {}

impl From<SingularMatrix> for NetworkError {
    fn from(s: SingularMatrix) -> Self {
        NetworkError::Singular(s)
    }
}

/// Admittance modification events applied as invertible overlays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkEvent {
    FaultOn { bus: usize, admittance: Complex64 },
    FaultOff { bus: usize },
    BranchTrip { from: usize, to: usize },
    BranchClose { from: usize, to: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum OverlayKey {
    Fault(usize),
    Trip(usize, usize),
}

#[derive(Debug, Clone)]
struct Overlay {
    key: OverlayKey,
    deltas: Vec<(usize, usize, Complex64)>,
}

/// Sparse admittance matrix with an overlay stack and a cached factorization.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    n: usize,
    base_triplets: Vec<(usize, usize, Complex64)>,
    /// Branch stamps keyed by normalized (min, max) endpoints, for trips.
    branch_stamps: Vec<((usize, usize), [(usize, usize, Complex64); 4])>,
    overlays: Vec<Overlay>,
    effective: CscComplex,
    factors: Option<SparseLu>,
}

fn branch_key(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Assembles the admittance matrix from the case: branch pi-models with tap
/// ratios, constant-impedance load shares, generator Norton shunts, and any
/// extra (bus, admittance) shunts supplied by device initialization.
pub fn build_ybus(
    case: &Case,
    extra_shunts: &[(usize, Complex64)],
) -> Result<NetworkModel, NetworkError> {
    let n = case.buses.len();

    // connectivity of the branch graph
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for br in &case.branches {
        adjacency[br.from].push(br.to);
        adjacency[br.to].push(br.from);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(b) = stack.pop() {
        for &o in &adjacency[b] {
            if !seen[o] {
                seen[o] = true;
                stack.push(o);
            }
        }
    }
    if let Some(bus) = seen.iter().position(|s| !s) {
        return Err(NetworkError::Disconnected { bus });
    }

    let mut triplets = Vec::new();
    let mut branch_stamps = Vec::new();
    for br in &case.branches {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let ysh = Complex64::new(0.0, br.charging / 2.0);
        let tap = if br.tap == 0.0 { 1.0 } else { br.tap };
        let stamp = [
            (br.from, br.from, (ys + ysh) / (tap * tap)),
            (br.to, br.to, ys + ysh),
            (br.from, br.to, -ys / tap),
            (br.to, br.from, -ys / tap),
        ];
        triplets.extend_from_slice(&stamp);
        branch_stamps.push((branch_key(br.from, br.to), stamp));
    }
    for load in &case.loads {
        let vmag2 = math::cabs(load.v0) * math::cabs(load.v0);
        let y = Complex64::new(load.pz * load.p0, -load.qz * load.q0) / vmag2;
        triplets.push((load.bus, load.bus, y));
    }
    for gen in &case.generators {
        let y = Complex64::new(1.0, 0.0)
            / Complex64::new(gen.params.ra, gen.params.xdpp);
        triplets.push((gen.params.bus, gen.params.bus, y));
    }
    for &(bus, y) in extra_shunts {
        if bus >= n {
            return Err(NetworkError::UnknownBus { bus });
        }
        triplets.push((bus, bus, y));
    }

    let effective = CscComplex::from_triplets(n, &triplets);
    Ok(NetworkModel {
        n,
        base_triplets: triplets,
        branch_stamps,
        overlays: Vec::new(),
        effective,
        factors: None,
    })
}

impl NetworkModel {
    pub fn bus_count(&self) -> usize {
        self.n
    }

    fn rebuild(&mut self) {
        let mut triplets = self.base_triplets.clone();
        for ov in &self.overlays {
            triplets.extend_from_slice(&ov.deltas);
        }
        self.effective = CscComplex::from_triplets(self.n, &triplets);
        self.factors = None;
    }

    /// Applies a fault or topology event; the factorization cache is
    /// invalidated. Events are invertible: the matching clearing event
    /// removes the overlay so the original matrix is restored bit-exactly.
    pub fn apply_event(&mut self, event: NetworkEvent) -> Result<(), NetworkError> {
        match event {
            NetworkEvent::FaultOn { bus, admittance } => {
                if bus >= self.n {
                    return Err(NetworkError::UnknownBus { bus });
                }
                if self
                    .overlays
                    .iter()
                    .any(|o| o.key == OverlayKey::Fault(bus))
                {
                    return Err(NetworkError::EventConflict {
                        detail: "fault already applied at this bus",
                    });
                }
                self.overlays.push(Overlay {
                    key: OverlayKey::Fault(bus),
                    deltas: vec![(bus, bus, admittance)],
                });
            }
            NetworkEvent::FaultOff { bus } => {
                let pos = self
                    .overlays
                    .iter()
                    .position(|o| o.key == OverlayKey::Fault(bus))
                    .ok_or(NetworkError::EventConflict {
                        detail: "no fault to clear at this bus",
                    })?;
                self.overlays.remove(pos);
            }
            NetworkEvent::BranchTrip { from, to } => {
                let key = branch_key(from, to);
                let stamp = self
                    .branch_stamps
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, s)| *s)
                    .ok_or(NetworkError::UnknownBranch { from, to })?;
                if self
                    .overlays
                    .iter()
                    .any(|o| o.key == OverlayKey::Trip(key.0, key.1))
                {
                    return Err(NetworkError::EventConflict {
                        detail: "branch already tripped",
                    });
                }
                let deltas = stamp.iter().map(|&(r, c, v)| (r, c, -v)).collect();
                self.overlays.push(Overlay {
                    key: OverlayKey::Trip(key.0, key.1),
                    deltas,
                });
            }
            NetworkEvent::BranchClose { from, to } => {
                let key = branch_key(from, to);
                let pos = self
                    .overlays
                    .iter()
                    .position(|o| o.key == OverlayKey::Trip(key.0, key.1))
                    .ok_or(NetworkError::EventConflict {
                        detail: "branch is not tripped",
                    })?;
                self.overlays.remove(pos);
            }
        }
        self.rebuild();
        Ok(())
    }

    /// Effective admittance matrix (base plus overlays).
    pub fn ybus(&self) -> &CscComplex {
        &self.effective
    }

    fn ensure_factors(&mut self) -> Result<(), NetworkError> {
        if self.factors.is_none() {
            self.factors = Some(SparseLu::factor(&self.effective)?);
        }
        Ok(())
    }

    /// Solves `Y v = i` reusing the cached factorization, with iterative
    /// refinement until the residual satisfies [`SOLVE_RTOL`].
    pub fn solve(&mut self, injections: &[Complex64]) -> Result<Vec<Complex64>, NetworkError> {
        self.ensure_factors()?;
        let lu = self.factors.as_ref().unwrap();
        let bnorm = injections.iter().map(|v| math::cabs(*v)).fold(0.0, f64::max);
        let mut x = lu.solve(injections);
        let tol = if bnorm > 0.0 {
            SOLVE_RTOL * bnorm
        } else {
            f64::MIN_POSITIVE
        };
        for _ in 0..3 {
            let ax = self.effective.matvec(&x);
            let mut rnorm = 0.0f64;
            let mut r = vec![Complex64::new(0.0, 0.0); self.n];
            for i in 0..self.n {
                r[i] = injections[i] - ax[i];
                rnorm = rnorm.max(math::cabs(r[i]));
            }
            if rnorm <= tol {
                return Ok(x);
            }
            let dx = lu.solve(&r);
            for i in 0..self.n {
                x[i] += dx[i];
            }
        }
        let ax = self.effective.matvec(&x);
        let rnorm = (0..self.n)
            .map(|i| math::cabs(injections[i] - ax[i]))
            .fold(0.0, f64::max);
        if rnorm <= tol {
            Ok(x)
        } else {
            Err(NetworkError::ResidualTooLarge {
                achieved: rnorm,
                required: tol,
            })
        }
    }
}

/// Result of the device-network interface iteration. `voltages` is the
/// network solution of the returned `injections`, so the pair satisfies
/// `Y v = i` to the solver residual.
#[derive(Debug, Clone)]
pub struct InterfaceResult {
    pub voltages: Vec<Complex64>,
    pub injections: Vec<Complex64>,
    pub iterations: usize,
}

/// Fixed-point iteration `v <- solve(injections(v))`, converged when the
/// largest per-bus voltage change is at most `tol_v`.
///
/// Every second step applies an Aitken extrapolation along the dominant
/// contraction mode estimated from two consecutive updates, which keeps the
/// iteration within its budget when the plain map contracts slowly (faulted
/// buses with converted loads) or oscillates. The returned pair is always a
/// solver output and the injections that produced it, so `Y v = i` holds to
/// the solver residual.
pub fn interface_iteration(
    net: &mut NetworkModel,
    injections: &mut dyn FnMut(&[Complex64]) -> Vec<Complex64>,
    v_guess: &[Complex64],
    tol_v: f64,
    max_iter: usize,
) -> Result<InterfaceResult, NetworkError> {
    let mut v = v_guess.to_vec();
    let mut mismatch = f64::INFINITY;
    let mut prev_delta: Option<Vec<Complex64>> = None;
    for iter in 1..=max_iter {
        let inj = injections(&v);
        let v_next = net.solve(&inj)?;
        let delta: Vec<Complex64> = v_next.iter().zip(&v).map(|(n, o)| n - o).collect();
        mismatch = delta.iter().map(|d| math::cabs(*d)).fold(0.0, f64::max);
        if mismatch <= tol_v {
            return Ok(InterfaceResult {
                voltages: v_next,
                injections: inj,
                iterations: iter,
            });
        }
        match prev_delta.take() {
            Some(pd) => {
                // contraction of the dominant mode: g = <d_k, d_{k-1}> / |d_{k-1}|^2
                let num: Complex64 = delta
                    .iter()
                    .zip(&pd)
                    .map(|(d, p)| d * p.conj())
                    .sum();
                let den: f64 = pd.iter().map(|p| p.norm_sqr()).sum();
                v = v_next;
                if den > 0.0 {
                    let g = num / den;
                    let one_minus_g = Complex64::new(1.0, 0.0) - g;
                    if math::cabs(one_minus_g) > 0.2 {
                        let mut theta = g / one_minus_g;
                        let mag = math::cabs(theta);
                        if mag > 3.0 {
                            theta *= 3.0 / mag;
                        }
                        for (vi, d) in v.iter_mut().zip(&delta) {
                            *vi += theta * d;
                        }
                    }
                }
            }
            None => {
                v = v_next;
                prev_delta = Some(delta);
            }
        }
    }
    Err(NetworkError::NonConvergence {
        iterations: max_iter,
        mismatch,
    })
}

/// Polar-form voltage polynomial of one bus: `V(t) = vm(t) e^{j va(t)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BusVoltageSeries {
    pub vm: PowerSeries,
    pub va: PowerSeries,
}

impl BusVoltageSeries {
    pub fn constant(t0: f64, vm: f64, va: f64, order: usize) -> Self {
        Self {
            vm: PowerSeries::constant(t0, vm, order),
            va: PowerSeries::constant(t0, va, order),
        }
    }

    pub fn evaluate(&self, t: f64) -> Complex64 {
        let m = self.vm.evaluate(t);
        let a = self.va.evaluate(t);
        m * math::cis(a)
    }
}

/// Voltage polynomials for every bus, sharing one origin and order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSeries {
    buses: Vec<BusVoltageSeries>,
}

impl VoltageSeries {
    pub fn new(buses: Vec<BusVoltageSeries>) -> Self {
        Self { buses }
    }

    /// Constant series anchored at the given polar samples.
    pub fn constant(t0: f64, samples: &[(f64, f64)], order: usize) -> Self {
        Self {
            buses: samples
                .iter()
                .map(|&(vm, va)| BusVoltageSeries::constant(t0, vm, va, order))
                .collect(),
        }
    }

    pub fn bus(&self, i: usize) -> &BusVoltageSeries {
        &self.buses[i]
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn t0(&self) -> f64 {
        self.buses[0].vm.t0()
    }

    pub fn order(&self) -> usize {
        self.buses[0].vm.order()
    }

    pub fn evaluate_all(&self, t: f64) -> Vec<Complex64> {
        self.buses.iter().map(|b| b.evaluate(t)).collect()
    }
}

/// One buffered polar voltage sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub vm: f64,
    pub va: f64,
}

/// Per-bus ring of recent window-end voltage samples with unwrapped angles.
#[derive(Debug, Clone)]
pub struct SampleBuffer {
    capacity: usize,
    buses: Vec<Vec<Sample>>,
}

impl SampleBuffer {
    pub fn new(bus_count: usize, capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            buses: vec![Vec::new(); bus_count],
        }
    }

    /// Recommended capacity for fitting order `n_v`.
    pub fn capacity_for_order(n_v: usize) -> usize {
        2 * (n_v + 1)
    }

    pub fn clear(&mut self) {
        for b in &mut self.buses {
            b.clear();
        }
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Sample count per bus (identical across buses).
    pub fn len(&self) -> usize {
        self.buses.first().map(|b| b.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self, bus: usize) -> &[Sample] {
        &self.buses[bus]
    }

    /// Appends one sample per bus, unwrapping angles against the previous
    /// sample so consecutive entries never jump by more than pi.
    pub fn push(&mut self, t: f64, voltages: &[Complex64]) -> Result<(), NetworkError> {
        debug_assert_eq!(voltages.len(), self.buses.len());
        if let Some(last) = self.buses.first().and_then(|b| b.last()) {
            if t <= last.t {
                return Err(NetworkError::NonMonotonicSample { t, last: last.t });
            }
        }
        for (bus, &v) in self.buses.iter_mut().zip(voltages) {
            let vm = math::cabs(v);
            let mut va = math::carg(v);
            if let Some(prev) = bus.last() {
                va += 2.0 * PI * math::round((prev.va - va) / (2.0 * PI));
            }
            if bus.len() == self.capacity {
                bus.remove(0);
            }
            bus.push(Sample { t, vm, va });
        }
        Ok(())
    }
}

/// Solves the small real system `G c = b` in place by Gaussian elimination
/// with partial pivoting.
fn solve_small(g: &mut [f64], n: usize, b: &mut [f64]) -> Result<(), NetworkError> {
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if math::abs(g[i * n + k]) > math::abs(g[piv * n + k]) {
                piv = i;
            }
        }
        if g[piv * n + k] == 0.0 {
            return Err(NetworkError::FitSingular);
        }
        if piv != k {
            for j in 0..n {
                g.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        for i in (k + 1)..n {
            let m = g[i * n + k] / g[k * n + k];
            for j in k..n {
                g[i * n + j] -= m * g[k * n + j];
            }
            b[i] -= m * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc -= g[k * n + j] * b[j];
        }
        b[k] = acc / g[k * n + k];
    }
    Ok(())
}

fn fit_component(
    samples: &[Sample],
    t0: f64,
    n_v: usize,
    pick: fn(&Sample) -> f64,
) -> Result<PowerSeries, NetworkError> {
    let newest = pick(samples.last().unwrap());
    if n_v == 0 {
        return Ok(PowerSeries::constant(t0, newest, 0));
    }
    // constrained least squares: p(t0) = newest exactly, remaining
    // coefficients from the normal equations of the anchored residuals
    let m = n_v;
    let mut g = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for s in samples {
        let tau = s.t - t0;
        let dy = pick(s) - newest;
        let mut powers = vec![0.0; m + 1];
        powers[0] = 1.0;
        for j in 1..=m {
            powers[j] = powers[j - 1] * tau;
        }
        for k in 1..=m {
            rhs[k - 1] += powers[k] * dy;
            for l in 1..=m {
                g[(k - 1) * m + (l - 1)] += powers[k] * powers[l];
            }
        }
    }
    solve_small(&mut g, m, &mut rhs)?;
    let mut coeffs = vec![newest];
    coeffs.extend_from_slice(&rhs);
    Ok(PowerSeries::raw(t0, coeffs))
}

/// Fits degree-`n_v` polar voltage polynomials per bus from buffered
/// samples, constrained to pass exactly through the newest sample so the
/// series anchor matches the last solved network voltage.
pub fn fit_voltage_series(
    buffer: &SampleBuffer,
    t0: f64,
    n_v: usize,
) -> Result<VoltageSeries, NetworkError> {
    let have = buffer.len();
    if have < n_v + 1 {
        return Err(NetworkError::InsufficientSamples {
            have,
            need: n_v + 1,
        });
    }
    let mut buses = Vec::with_capacity(buffer.buses.len());
    for samples in &buffer.buses {
        let newest = samples.last().unwrap();
        if newest.t != t0 {
            return Err(NetworkError::AnchorMismatch {
                t0,
                newest: newest.t,
            });
        }
        let vm = fit_component(samples, t0, n_v, |s| s.vm)?;
        let va = fit_component(samples, t0, n_v, |s| s.va)?;
        buses.push(BusVoltageSeries { vm, va });
    }
    Ok(VoltageSeries { buses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Branch, Case};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_bus_case() -> Case {
        let mut case = Case::empty(2, 100.0, 60.0);
        case.branches.push(Branch {
            from: 0,
            to: 1,
            r: 0.0,
            x: 0.5,
            charging: 0.0,
            tap: 1.0,
        });
        case
    }

    #[test]
    fn two_bus_ybus() {
        let net = build_ybus(&two_bus_case(), &[]).unwrap();
        let y = c(0.0, -2.0); // 1 / (j 0.5)
        assert_eq!(net.ybus().get(0, 0), y);
        assert_eq!(net.ybus().get(1, 1), y);
        assert_eq!(net.ybus().get(0, 1), -y);
        assert_eq!(net.ybus().get(1, 0), -y);
    }

    #[test]
    fn impedance_load_touches_only_diagonal() {
        let mut case = two_bus_case();
        case.loads.push(crate::devices::ZipLoad {
            bus: 1,
            p0: 0.5,
            q0: 0.2,
            v0: c(1.0, 0.0),
            pz: 1.0,
            pi: 0.0,
            pp: 0.0,
            pm: 0.0,
            qz: 1.0,
            qi: 0.0,
            qp: 0.0,
            qm: 0.0,
        });
        let plain = build_ybus(&two_bus_case(), &[]).unwrap();
        let with_load = build_ybus(&case, &[]).unwrap();
        assert_eq!(with_load.ybus().get(0, 0), plain.ybus().get(0, 0));
        assert_eq!(with_load.ybus().get(0, 1), plain.ybus().get(0, 1));
        let delta = with_load.ybus().get(1, 1) - plain.ybus().get(1, 1);
        assert!(math::cabs(delta - c(0.5, -0.2)) < 1e-15);
    }

    #[test]
    fn disconnected_bus_rejected() {
        let case = Case::empty(2, 100.0, 60.0);
        assert_eq!(
            build_ybus(&case, &[]).unwrap_err(),
            NetworkError::Disconnected { bus: 1 }
        );
    }

    #[test]
    fn fault_overlay_roundtrip_is_bit_exact() {
        let mut net = build_ybus(&two_bus_case(), &[]).unwrap();
        let before = net.ybus().clone();
        net.apply_event(NetworkEvent::FaultOn {
            bus: 1,
            admittance: default_fault_admittance(),
        })
        .unwrap();
        assert_ne!(net.ybus(), &before);
        net.apply_event(NetworkEvent::FaultOff { bus: 1 }).unwrap();
        assert_eq!(net.ybus(), &before);
    }

    #[test]
    fn branch_trip_zeroes_coupling() {
        let mut case = two_bus_case();
        // second path so the island stays connected for the build check
        case.branches.push(Branch {
            from: 0,
            to: 1,
            r: 1.0,
            x: 0.0,
            charging: 0.0,
            tap: 1.0,
        });
        let mut net = build_ybus(&case, &[]).unwrap();
        let before = net.ybus().clone();
        // normalized key refers to the first stamp found; here both stamps
        // share endpoints, so trip removes the first branch listed
        net.apply_event(NetworkEvent::BranchTrip { from: 1, to: 0 })
            .unwrap();
        assert_eq!(net.ybus().get(0, 1), c(-1.0, 0.0));
        net.apply_event(NetworkEvent::BranchClose { from: 0, to: 1 })
            .unwrap();
        assert_eq!(net.ybus(), &before);
    }

    #[test]
    fn event_errors_are_distinct() {
        let mut net = build_ybus(&two_bus_case(), &[]).unwrap();
        assert!(matches!(
            net.apply_event(NetworkEvent::FaultOff { bus: 0 }),
            Err(NetworkError::EventConflict { .. })
        ));
        assert!(matches!(
            net.apply_event(NetworkEvent::BranchTrip { from: 0, to: 5 }),
            Err(NetworkError::UnknownBranch { .. })
        ));
        assert!(matches!(
            net.apply_event(NetworkEvent::FaultOn {
                bus: 7,
                admittance: c(1.0, 0.0)
            }),
            Err(NetworkError::UnknownBus { bus: 7 })
        ));
    }

    #[test]
    fn solve_identity_and_zero() {
        let mut case = Case::empty(3, 100.0, 60.0);
        for (f, t) in [(0usize, 1usize), (1, 2)] {
            case.branches.push(Branch {
                from: f,
                to: t,
                r: 0.1,
                x: 0.3,
                charging: 0.02,
                tap: 1.0,
            });
        }
        let mut net = build_ybus(&case, &[]).unwrap();
        let zero = vec![c(0.0, 0.0); 3];
        let v = net.solve(&zero).unwrap();
        assert_eq!(v, zero);
    }

    #[test]
    fn interface_converges_in_one_iteration_without_devices() {
        let mut case = two_bus_case();
        case.loads.push(crate::devices::ZipLoad {
            bus: 1,
            p0: 0.4,
            q0: 0.1,
            v0: c(1.0, 0.0),
            pz: 1.0,
            pi: 0.0,
            pp: 0.0,
            pm: 0.0,
            qz: 1.0,
            qi: 0.0,
            qp: 0.0,
            qm: 0.0,
        });
        let mut net = build_ybus(&case, &[]).unwrap();
        // impedance-only network with zero sources: solution is zero
        let guess = vec![c(0.0, 0.0); 2];
        let mut inject = |_: &[Complex64]| vec![c(0.0, 0.0); 2];
        let out = interface_iteration(&mut net, &mut inject, &guess, 1e-8, 20).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.voltages, guess);
    }

    #[test]
    fn sample_buffer_unwraps_angles() {
        let mut buf = SampleBuffer::new(1, 8);
        buf.push(0.0, &[c(-1.0, -1e-9)]).unwrap(); // angle ~ -pi
        buf.push(1.0, &[c(-1.0, 1e-9)]).unwrap(); // raw angle ~ +pi
        let s = buf.samples(0);
        assert!((s[1].va - s[0].va).abs() < 1e-6);
    }

    #[test]
    fn sample_buffer_rejects_stale_time() {
        let mut buf = SampleBuffer::new(1, 4);
        buf.push(1.0, &[c(1.0, 0.0)]).unwrap();
        assert!(matches!(
            buf.push(1.0, &[c(1.0, 0.0)]),
            Err(NetworkError::NonMonotonicSample { .. })
        ));
    }

    #[test]
    fn fit_constant_samples() {
        let mut buf = SampleBuffer::new(1, 8);
        for t in [0.0, 0.1, 0.2, 0.3] {
            buf.push(t, &[c(0.98, 0.0)]).unwrap();
        }
        let vs = fit_voltage_series(&buf, 0.3, 2).unwrap();
        let vm = vs.bus(0).vm.coeffs();
        assert!((vm[0] - 0.98).abs() < 1e-15);
        assert!(vm[1].abs() < 1e-12 && vm[2].abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_exact_line() {
        let mut buf = SampleBuffer::new(1, 8);
        for k in 0..5 {
            let t = k as f64 * 0.05;
            let vm = 1.0 + 0.3 * (t - 0.2);
            buf.push(t, &[c(vm, 0.0)]).unwrap();
        }
        let vs = fit_voltage_series(&buf, 0.2, 1).unwrap();
        let vm = vs.bus(0).vm.coeffs();
        assert!((vm[0] - 1.0).abs() < 1e-14);
        assert!((vm[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn fit_requires_enough_samples() {
        let mut buf = SampleBuffer::new(1, 8);
        buf.push(0.0, &[c(1.0, 0.0)]).unwrap();
        assert_eq!(
            fit_voltage_series(&buf, 0.0, 1).unwrap_err(),
            NetworkError::InsufficientSamples { have: 1, need: 2 }
        );
    }

    #[test]
    fn fit_interpolates_with_minimal_samples() {
        // n_v + 1 samples: least squares degenerates to interpolation
        let mut buf = SampleBuffer::new(1, 8);
        let poly = |t: f64| 0.9 + 0.2 * t - 0.05 * t * t;
        for k in 0..3 {
            let t = k as f64 * 0.4;
            buf.push(t, &[c(poly(t), 0.0)]).unwrap();
        }
        let vs = fit_voltage_series(&buf, 0.8, 2).unwrap();
        for k in 0..3 {
            let t = k as f64 * 0.4;
            assert!((vs.bus(0).vm.evaluate(t) - poly(t)).abs() < 1e-12);
        }
    }
}
