//! Linear second-order benchmark with a closed-form solution, used to
//! calibrate series order, window policy, and the reference integrators.
//!
//! The system is `x'' - 2 sigma x' + (omega^2 + sigma^2) x = 0` with
//! solution `e^{sigma t} (c1 cos omega t + c2 sin omega t)`. The windowed
//! series solution carries the scalar polynomial built from the coefficient
//! recursion; its derivative polynomial supplies the second state, so the
//! window residual lives entirely in the second equation.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{Method, SimError, WindowPolicy};
use crate::math;
use crate::series::{PowerSeries, SeriesError, SeriesField, SeriesVector};
use crate::stepper::{self, StepperConfig, ToleranceSet};

#[derive(Debug, Clone, Copy)]
pub struct LinearBenchmark {
    pub omega: f64,
    pub sigma: f64,
    pub x0: f64,
    pub xdot0: f64,
}

impl Default for LinearBenchmark {
    fn default() -> Self {
        Self {
            omega: core::f64::consts::PI,
            sigma: -0.1,
            x0: 0.0,
            xdot0: core::f64::consts::PI,
        }
    }
}

impl LinearBenchmark {
    fn omega2(&self) -> f64 {
        self.omega * self.omega + self.sigma * self.sigma
    }

    /// Exact solution `tau` seconds after a state `(x, xdot)`.
    pub fn closed_form(&self, x: f64, xdot: f64, tau: f64) -> (f64, f64) {
        let (om, sg) = (self.omega, self.sigma);
        let c1 = x;
        let c2 = (xdot - sg * x) / om;
        let e = math::exp(sg * tau);
        let (s, c) = (math::sin(om * tau), math::cos(om * tau));
        let xt = e * (c1 * c + c2 * s);
        let xdt = sg * xt + e * om * (c2 * c - c1 * s);
        (xt, xdt)
    }

    /// Coefficients of the degree-`n` series solution from the two-term
    /// recursion `a[k] = (2 sigma (k-1) a[k-1] - (omega^2 + sigma^2) a[k-2])
    /// / (k (k-1))`.
    pub fn recursion_coefficients(&self, x: f64, xdot: f64, n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n + 1];
        a[0] = x;
        if n >= 1 {
            a[1] = xdot;
        }
        for k in 2..=n {
            a[k] = (2.0 * self.sigma * (k - 1) as f64 * a[k - 1] - self.omega2() * a[k - 2])
                / (k * (k - 1)) as f64;
        }
        a
    }

    /// Two-state series pair `(p, p')` for window selection; the derivative
    /// polynomial is zero-padded to the shared order.
    fn sas_pair(&self, x: f64, xdot: f64, t0: f64, n: usize) -> SeriesVector {
        let a = self.recursion_coefficients(x, xdot, n);
        let p = PowerSeries::new(t0, a).expect("finite coefficients");
        let dp = p.differentiate().resized(n);
        SeriesVector::new(vec![p, dp]).expect("matching origin and order")
    }
}

/// First-order form of the benchmark dynamics.
#[derive(Debug, Clone, Copy)]
pub struct BenchField {
    pub omega: f64,
    pub sigma: f64,
}

impl From<&LinearBenchmark> for BenchField {
    fn from(b: &LinearBenchmark) -> Self {
        Self {
            omega: b.omega,
            sigma: b.sigma,
        }
    }
}

impl SeriesField for BenchField {
    fn dim(&self) -> usize {
        2
    }

    fn eval_series(&self, x: &SeriesVector) -> Result<SeriesVector, SeriesError> {
        let omega2 = self.omega * self.omega + self.sigma * self.sigma;
        let d0 = x.component(1).clone();
        let d1 = x
            .component(1)
            .scale(2.0 * self.sigma)
            .sub(&x.component(0).scale(omega2))?;
        SeriesVector::new(vec![d0, d1])
    }
}

/// Settings for one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub method: Method,
    /// Series order for the windowed solution (unused by FE/RK4).
    pub order: usize,
    /// Fixed step for FE/RK4.
    pub dt: f64,
    pub window: WindowPolicy,
    /// Error-rate tolerance for adaptive windows.
    pub eps: f64,
    pub stepper: StepperConfig,
    pub t_end: f64,
    /// Error samples per window when scanning `max |e(t)|`.
    pub error_samples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            method: Method::Sas,
            order: 5,
            dt: 0.01,
            window: WindowPolicy::Fixed(0.01),
            eps: 0.006,
            stepper: StepperConfig {
                h_max_cap: 20.0,
                h_min: 1e-6,
                ..StepperConfig::default()
            },
            t_end: 10.0,
            error_samples: 8,
        }
    }
}

/// One accepted benchmark window with enough context to recheck the
/// error-rate bound against the exact local solution.
#[derive(Debug, Clone, Copy)]
pub struct BenchWindow {
    pub t0: f64,
    pub h: f64,
    pub proposed: f64,
    pub bisected: bool,
    pub x0: f64,
    pub xdot0: f64,
    /// Sampled practical bound over the accepted window.
    pub r_accepted: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub windows: Vec<BenchWindow>,
    pub max_abs_error: f64,
    pub mean_window: f64,
    pub final_state: (f64, f64),
}

impl BenchReport {
    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    pub fn first_window(&self) -> Option<f64> {
        self.windows.first().map(|w| w.h)
    }
}

/// Runs the benchmark and reports the largest absolute error against the
/// closed form, sampled inside every window, plus per-window lengths.
pub fn run_linear_benchmark(
    bench: &LinearBenchmark,
    cfg: &BenchConfig,
) -> Result<BenchReport, SimError> {
    match cfg.method {
        Method::Sas => run_sas(bench, cfg),
        Method::Fe | Method::Rk4 => run_fixed(bench, cfg),
    }
}

fn run_sas(bench: &LinearBenchmark, cfg: &BenchConfig) -> Result<BenchReport, SimError> {
    let field = BenchField::from(bench);
    let tol = ToleranceSet::single(cfg.eps);
    let classes = [0usize, 0usize];
    let mut t = 0.0;
    let (mut x, mut xd) = (bench.x0, bench.xdot0);
    let mut h_pre = cfg.stepper.h_pre;
    let mut windows = Vec::new();
    let mut max_err = 0.0f64;
    while t < cfg.t_end - 1e-12 {
        let sas = bench.sas_pair(x, xd, t, cfg.order);
        let (mut h, proposed, bisected, r_acc) = match cfg.window {
            WindowPolicy::Fixed(dt) => {
                let r = stepper::error_rate_bound(
                    &sas,
                    &field,
                    &classes,
                    1,
                    dt,
                    cfg.stepper.samples,
                )
                .map_err(|e| SimError::Propagation {
                    t,
                    device: 0,
                    source: e,
                })?;
                (dt, dt, false, r[0])
            }
            WindowPolicy::Adaptive => {
                let sel = stepper::select_window(
                    &sas,
                    &field,
                    &classes,
                    &tol,
                    &cfg.stepper,
                    h_pre,
                )
                .map_err(|e| SimError::Propagation {
                    t,
                    device: 0,
                    source: e,
                })?;
                (sel.accepted, sel.proposed, sel.bisected, sel.r_accepted[0])
            }
        };
        if t + h > cfg.t_end {
            h = cfg.t_end - t;
        }
        // sample the error inside the window against the global closed form
        let m = cfg.error_samples.max(1);
        for k in 1..=m {
            let tau = h * k as f64 / m as f64;
            let (xt, _) = bench.closed_form(bench.x0, bench.xdot0, t + tau);
            let err = math::abs(sas.component(0).evaluate(t + tau) - xt);
            max_err = max_err.max(err);
        }
        windows.push(BenchWindow {
            t0: t,
            h,
            proposed,
            bisected,
            x0: x,
            xdot0: xd,
            r_accepted: r_acc,
        });
        x = sas.component(0).evaluate(t + h);
        xd = sas.component(0).differentiate().evaluate(t + h);
        t += h;
        h_pre = h;
    }
    let mean = windows.iter().map(|w| w.h).sum::<f64>() / windows.len().max(1) as f64;
    Ok(BenchReport {
        max_abs_error: max_err,
        mean_window: mean,
        final_state: (x, xd),
        windows,
    })
}

fn run_fixed(bench: &LinearBenchmark, cfg: &BenchConfig) -> Result<BenchReport, SimError> {
    let field = BenchField::from(bench);
    let mut t = 0.0;
    let mut state = vec![bench.x0, bench.xdot0];
    let mut windows = Vec::new();
    let mut max_err = 0.0f64;
    while t < cfg.t_end - 1e-12 {
        let h = cfg.dt.min(cfg.t_end - t);
        windows.push(BenchWindow {
            t0: t,
            h,
            proposed: h,
            bisected: false,
            x0: state[0],
            xdot0: state[1],
            r_accepted: 0.0,
        });
        state = match cfg.method {
            Method::Fe => super::euler_step(&field, t, &state, h).map_err(|e| {
                SimError::Propagation {
                    t,
                    device: 0,
                    source: e,
                }
            })?,
            _ => super::rk4_step(&field, t, &state, h).map_err(|e| SimError::Propagation {
                t,
                device: 0,
                source: e,
            })?,
        };
        t += h;
        let (xt, _) = bench.closed_form(bench.x0, bench.xdot0, t);
        max_err = max_err.max(math::abs(state[0] - xt));
    }
    let mean = windows.iter().map(|w| w.h).sum::<f64>() / windows.len().max(1) as f64;
    Ok(BenchReport {
        max_abs_error: max_err,
        mean_window: mean,
        final_state: (state[0], state[1]),
        windows,
    })
}
