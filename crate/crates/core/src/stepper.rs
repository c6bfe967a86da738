//! Error-rate-bounded adaptive window selection.
//!
//! The practical error-rate bound samples `||f(x_sas(t)) - x_sas'(t)||` over
//! a candidate window; the residual vanishes at the window origin by
//! construction and grows with the leading truncated order. The window
//! length comes from the exponential surrogate `r_hat(h) = mu (e^h - 1)`
//! fitted at a probe point `alpha * h_pre` into the current window, solved
//! in closed form for `r_hat(h) = eps`. [`select_window`] additionally
//! verifies the proposal against the sampled bound and shrinks it by
//! bisection when the surrogate extrapolated too far (the first window after
//! a cold start or an event probes at a length far from the accepted one).

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::series::{SeriesError, SeriesField, SeriesVector};

/// Variable classes carrying separate error-rate tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarClass {
    /// Rotor angles; tolerance entered in degrees per second.
    Angle = 0,
    /// Voltage-like states (pu per second).
    Voltage = 1,
    /// Mechanical power and other swing-coupled states (pu per second).
    Power = 2,
}

/// Per-class error-rate tolerances, stored in internal units (rad/s for the
/// angle class). The norm within a class is the infinity norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSet {
    eps: Vec<f64>,
}

impl ToleranceSet {
    /// Single tolerance applied to the whole state vector.
    pub fn single(eps: f64) -> Self {
        assert!(eps > 0.0, "tolerance must be positive");
        Self { eps: vec![eps] }
    }

    /// The three-class split used for power-system runs. The angle
    /// tolerance is entered in degrees per second and converted to rad/s.
    pub fn power_system(angle_deg_per_s: f64, voltage_pu_per_s: f64, power_pu_per_s: f64) -> Self {
        assert!(
            angle_deg_per_s > 0.0 && voltage_pu_per_s > 0.0 && power_pu_per_s > 0.0,
            "tolerances must be positive"
        );
        Self {
            eps: vec![
                angle_deg_per_s.to_radians(),
                voltage_pu_per_s,
                power_pu_per_s,
            ],
        }
    }

    pub fn class_count(&self) -> usize {
        self.eps.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eps
    }

    /// Angle tolerance back in degrees per second (reporting).
    pub fn angle_deg_per_s(&self) -> Option<f64> {
        (self.eps.len() == 3).then(|| self.eps[0].to_degrees())
    }
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    /// Safety factor applied to the probe point (and to bisected windows).
    pub alpha: f64,
    /// Initial previous-window length used before any window is accepted.
    pub h_pre: f64,
    pub h_min: f64,
    pub h_max_cap: f64,
    /// Supremum sample count over a candidate window, endpoints included.
    pub samples: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            h_pre: 1e-3,
            h_min: 1e-4,
            // the error-rate bound cannot see the terminal-voltage
            // prediction error, which grows with the square of the window,
            // so the cap has to stay well inside the swing period; 12 ms
            // keeps the prediction error subordinate on desk-scale systems
            h_max_cap: 0.012,
            samples: 16,
        }
    }
}

/// Per-class sampled error-rate bound over `[t0, t0 + h]`:
/// `r_c(h) = max over samples of max over states in class c of
/// |f_i(x_sas(t)) - x_sas_i'(t)|`.
///
/// `classes[i]` maps state `i` to its class index; `n_classes` sizes the
/// result.
pub fn error_rate_bound(
    sas: &SeriesVector,
    field: &dyn SeriesField,
    classes: &[usize],
    n_classes: usize,
    h: f64,
    samples: usize,
) -> Result<Vec<f64>, SeriesError> {
    debug_assert_eq!(classes.len(), sas.dim());
    let t0 = sas.t0();
    let dsas = sas.differentiate();
    let m = samples.max(2);
    let mut r = vec![0.0f64; n_classes];
    for k in 0..m {
        let t = t0 + h * k as f64 / (m - 1) as f64;
        let x = sas.evaluate(t);
        let f = field.eval_at(t, &x)?;
        let xdot = dsas.evaluate(t);
        for (i, &class) in classes.iter().enumerate() {
            let res = math::abs(f[i] - xdot[i]);
            if !res.is_finite() {
                return Err(SeriesError::Diverged {
                    component: i,
                    order: sas.order(),
                });
            }
            if res > r[class] {
                r[class] = res;
            }
        }
    }
    Ok(r)
}

/// Closed-form window from one probe: `mu = r_probe / (e^{alpha h_pre} - 1)`
/// and `h_step = ln(eps (e^{alpha h_pre} - 1) / r_probe + 1)`, clamped to
/// `[h_min, h_max_cap]`. A zero residual yields the cap.
pub fn adaptive_window(r_probe: f64, cfg: &StepperConfig, h_pre: f64, eps: f64) -> f64 {
    let h = if r_probe <= 0.0 {
        cfg.h_max_cap
    } else {
        let growth = math::expm1(cfg.alpha * h_pre);
        math::ln1p(eps * growth / r_probe)
    };
    h.clamp(cfg.h_min, cfg.h_max_cap)
}

/// Minimum over classes of [`adaptive_window`].
pub fn multi_class_window(
    r_probe: &[f64],
    eps: &[f64],
    cfg: &StepperConfig,
    h_pre: f64,
) -> f64 {
    debug_assert_eq!(r_probe.len(), eps.len());
    debug_assert!(!eps.is_empty());
    r_probe
        .iter()
        .zip(eps)
        .map(|(&r, &e)| adaptive_window(r, cfg, h_pre, e))
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of window selection for one simulation step.
#[derive(Debug, Clone)]
pub struct WindowSelection {
    /// Surrogate proposal from the probe, after clamping.
    pub proposed: f64,
    /// Verified window length actually used.
    pub accepted: f64,
    /// Whether the proposal failed verification and was bisected down.
    pub bisected: bool,
    /// Per-class sampled bound over the accepted window.
    pub r_accepted: Vec<f64>,
}

fn within(r: &[f64], eps: &[f64]) -> bool {
    r.iter().zip(eps).all(|(&a, &e)| a <= e)
}

/// Window selection against an arbitrary sampled-bound evaluator
/// `r_of(h) -> per-class bounds`. Probes at `alpha * h_pre`, proposes a
/// window with the exponential surrogate, verifies the proposal, and bisects
/// to the tolerance crossing if the surrogate extrapolated past it.
pub fn select_window_with(
    r_of: &mut dyn FnMut(f64) -> Result<Vec<f64>, SeriesError>,
    tol: &ToleranceSet,
    cfg: &StepperConfig,
    h_pre: f64,
) -> Result<WindowSelection, SeriesError> {
    let eps = tol.as_slice();
    let probe = cfg.alpha * h_pre;
    let r_probe = r_of(probe)?;
    let proposed = multi_class_window(&r_probe, eps, cfg, h_pre);

    let r_full = r_of(proposed)?;
    if within(&r_full, eps) {
        return Ok(WindowSelection {
            proposed,
            accepted: proposed,
            bisected: false,
            r_accepted: r_full,
        });
    }

    // the sampled bound is nondecreasing in h and passes at h = 0
    let mut lo = 0.0f64;
    let mut hi = proposed;
    for _ in 0..60 {
        if hi - lo <= 1e-3 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if within(&r_of(mid)?, eps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let accepted = (cfg.alpha * lo).max(cfg.h_min);
    let r_accepted = r_of(accepted)?;
    Ok(WindowSelection {
        proposed,
        accepted,
        bisected: true,
        r_accepted,
    })
}

/// [`select_window_with`] for a single series solution and field.
pub fn select_window(
    sas: &SeriesVector,
    field: &dyn SeriesField,
    classes: &[usize],
    tol: &ToleranceSet,
    cfg: &StepperConfig,
    h_pre: f64,
) -> Result<WindowSelection, SeriesError> {
    let n_classes = tol.class_count();
    let samples = cfg.samples;
    select_window_with(
        &mut |h| error_rate_bound(sas, field, classes, n_classes, h, samples),
        tol,
        cfg,
        h_pre,
    )
}
