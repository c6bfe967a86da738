//! Truncated power-series arithmetic and order-by-order Taylor propagation.
//!
//! A [`PowerSeries`] is a dense polynomial in `(t - t0)`. Device right-hand
//! sides are evaluated on series through the usual composition recurrences
//! (Cauchy products, exp/sin/cos/reciprocal/power), and [`propagate`] builds
//! the truncated solution of `x' = f(x)` one order at a time: the coefficient
//! of order `k` of `f` evaluated on the order-`k` partial series depends only
//! on solution coefficients `0..=k`, so `a[k+1] = b[k] / (k + 1)` closes the
//! recursion.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Coefficient magnitude above which propagation is treated as divergent.
pub const COEFF_LIMIT: f64 = 1e12;

/// Errors from series construction, composition, and propagation.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesError {
    /// A series must carry at least the order-0 coefficient.
    EmptyCoefficients,
    /// Non-finite coefficient at the given index.
    NonFinite { index: usize },
    /// Binary operation on series with different expansion origins.
    MismatchedOrigin { left: f64, right: f64 },
    /// Binary operation on series with different truncation orders.
    MismatchedOrder { left: usize, right: usize },
    /// Composition (reciprocal or non-integer power) with a singular
    /// constant term.
    SingularComposition { constant: f64 },
    /// Propagation produced a non-finite or oversized coefficient.
    Diverged { component: usize, order: usize },
    /// A vector field was evaluated with the wrong state dimension.
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::EmptyCoefficients => write!(f, "series has no coefficients"),
            SeriesError::NonFinite { index } => {
                write!(f, "non-finite series coefficient at index {index}")
            }
            SeriesError::MismatchedOrigin { left, right } => {
                write!(f, "series origins differ: {left} vs {right}")
            }
            SeriesError::MismatchedOrder { left, right } => {
                write!(f, "series orders differ: {left} vs {right}")
            }
            SeriesError::SingularComposition { constant } => {
                write!(f, "singular series composition (constant term {constant})")
            }
            SeriesError::Diverged { component, order } => write!(
                f,
                "series propagation diverged at component {component}, order {order}"
            ),
            SeriesError::DimensionMismatch { expected, got } => {
                write!(f, "state dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for SeriesError {}

/// Truncated power series `sum_k coeffs[k] * (t - t0)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    t0: f64,
    coeffs: Vec<f64>,
}

impl PowerSeries {
    /// Builds a series after validating that the coefficient list is
    /// non-empty and finite.
    pub fn new(t0: f64, coeffs: Vec<f64>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::EmptyCoefficients);
        }
        if !t0.is_finite() {
            return Err(SeriesError::NonFinite { index: 0 });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SeriesError::NonFinite { index });
        }
        Ok(Self { t0, coeffs })
    }

    pub(crate) fn raw(t0: f64, coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { t0, coeffs }
    }

    /// Constant series of the requested order.
    pub fn constant(t0: f64, value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { t0, coeffs }
    }

    pub fn zero(t0: f64, order: usize) -> Self {
        Self {
            t0,
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Truncation order `n`; the series carries `n + 1` coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `(t - t0)^k`, zero above the truncation order.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    fn check_compat(&self, rhs: &Self) -> Result<(), SeriesError> {
        if self.t0 != rhs.t0 {
            return Err(SeriesError::MismatchedOrigin {
                left: self.t0,
                right: rhs.t0,
            });
        }
        if self.coeffs.len() != rhs.coeffs.len() {
            return Err(SeriesError::MismatchedOrder {
                left: self.order(),
                right: rhs.order(),
            });
        }
        Ok(())
    }

    /// Coefficient-wise sum. Requires matching origin and order.
    pub fn add(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.check_compat(rhs)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::raw(self.t0, coeffs))
    }

    /// Coefficient-wise difference. Requires matching origin and order.
    pub fn sub(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.check_compat(rhs)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::raw(self.t0, coeffs))
    }

    /// Cauchy product truncated to the common order:
    /// `c[k] = sum_{j=0..=k} a[j] * b[k-j]`.
    pub fn mul(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.check_compat(rhs)?;
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let n = self.coeffs.len();
        let mut coeffs = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.coeffs[j] * rhs.coeffs[k - j];
            }
            coeffs[k] = acc;
        }
        Self::raw(self.t0, coeffs)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::raw(self.t0, self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// Adds a constant to the order-0 coefficient.
    pub fn add_constant(&self, value: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += value;
        Self::raw(self.t0, coeffs)
    }

    /// Series exponential: `w' = a' w` gives
    /// `w[k] = (1/k) sum_{j=1..=k} j a[j] w[k-j]`.
    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let mut w = vec![0.0; n];
        w[0] = math::exp(self.coeffs[0]);
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * self.coeffs[j] * w[k - j];
            }
            w[k] = acc / k as f64;
        }
        Self::raw(self.t0, w)
    }

    /// Joint sine/cosine: `s' = a' c`, `c' = -a' s`.
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.coeffs.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = math::sin(self.coeffs[0]);
        c[0] = math::cos(self.coeffs[0]);
        for k in 1..n {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let ja = (j as f64) * self.coeffs[j];
                acc_s += ja * c[k - j];
                acc_c += ja * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = -acc_c / k as f64;
        }
        (Self::raw(self.t0, s), Self::raw(self.t0, c))
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    /// Series reciprocal; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Self, SeriesError> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 {
            return Err(SeriesError::SingularComposition { constant: a0 });
        }
        let n = self.coeffs.len();
        let mut w = vec![0.0; n];
        w[0] = 1.0 / a0;
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.coeffs[j] * w[k - j];
            }
            w[k] = -acc / a0;
        }
        Ok(Self::raw(self.t0, w))
    }

    /// Real power `a^lambda` via the logarithmic-derivative recurrence
    /// `a w' = lambda a' w`:
    /// `w[k] = (1/(k a0)) sum_{j=1..=k} (lambda j - (k - j)) a[j] w[k-j]`.
    ///
    /// Requires `a0 != 0` and, for non-integer `lambda`, `a0 > 0`.
    pub fn powf(&self, lambda: f64) -> Result<Self, SeriesError> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 {
            return Err(SeriesError::SingularComposition { constant: a0 });
        }
        let w0 = math::powf(a0, lambda);
        if !w0.is_finite() {
            return Err(SeriesError::SingularComposition { constant: a0 });
        }
        let n = self.coeffs.len();
        let mut w = vec![0.0; n];
        w[0] = w0;
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (lambda * j as f64 - (k - j) as f64) * self.coeffs[j] * w[k - j];
            }
            w[k] = acc / (k as f64 * a0);
        }
        Ok(Self::raw(self.t0, w))
    }

    /// Nonnegative integer power by repeated multiplication; valid for any
    /// constant term.
    pub fn powi(&self, exponent: u32) -> Self {
        let mut result = Self::constant(self.t0, 1.0, self.order());
        for _ in 0..exponent {
            result = result.mul_unchecked(self);
        }
        result
    }

    /// Horner evaluation at `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * tau + c;
        }
        acc
    }

    /// Derivative series of order `n - 1` (order-0 input yields the zero
    /// series of order 0).
    pub fn differentiate(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero(self.t0, 0);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        Self::raw(self.t0, coeffs)
    }

    /// Truncates to order `n` (no-op if already at or below).
    pub fn truncated(&self, n: usize) -> Self {
        let len = (n + 1).min(self.coeffs.len());
        Self::raw(self.t0, self.coeffs[..len].to_vec())
    }

    /// Truncates or zero-pads to exactly order `n`.
    pub fn resized(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n + 1, 0.0);
        coeffs.truncate(n + 1);
        Self::raw(self.t0, coeffs)
    }

    /// Re-expands the same polynomial around a new origin (exact Taylor
    /// shift by synthetic division). A shift to the current origin is an
    /// exact no-op.
    pub fn recentered(&self, new_t0: f64) -> Self {
        let delta = new_t0 - self.t0;
        if delta == 0.0 {
            return Self::raw(new_t0, self.coeffs.clone());
        }
        let mut c = self.coeffs.clone();
        let n = c.len() - 1;
        for i in 0..n {
            for j in (i..n).rev() {
                let upd = delta * c[j + 1];
                c[j] += upd;
            }
        }
        Self::raw(new_t0, c)
    }
}

/// Elementary composition selector mirroring the series operation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Exp,
    Sin,
    Cos,
    Reciprocal,
    Power(f64),
}

/// Applies an elementary composition `g(a(t))` exact to the truncation order.
pub fn elementary(a: &PowerSeries, kind: Elementary) -> Result<PowerSeries, SeriesError> {
    match kind {
        Elementary::Exp => Ok(a.exp()),
        Elementary::Sin => Ok(a.sin()),
        Elementary::Cos => Ok(a.cos()),
        Elementary::Reciprocal => a.recip(),
        Elementary::Power(lambda) => a.powf(lambda),
    }
}

/// Vector of series sharing one origin and one order.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesVector {
    components: Vec<PowerSeries>,
}

impl SeriesVector {
    pub fn new(components: Vec<PowerSeries>) -> Result<Self, SeriesError> {
        if components.is_empty() {
            return Err(SeriesError::EmptyCoefficients);
        }
        let t0 = components[0].t0();
        let order = components[0].order();
        for c in &components[1..] {
            if c.t0() != t0 {
                return Err(SeriesError::MismatchedOrigin {
                    left: t0,
                    right: c.t0(),
                });
            }
            if c.order() != order {
                return Err(SeriesError::MismatchedOrder {
                    left: order,
                    right: c.order(),
                });
            }
        }
        Ok(Self { components })
    }

    /// Constant (order-`order`) series vector anchored at a state point.
    pub fn from_point(t0: f64, x: &[f64], order: usize) -> Self {
        Self {
            components: x
                .iter()
                .map(|&v| PowerSeries::constant(t0, v, order))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn t0(&self) -> f64 {
        self.components[0].t0()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn component(&self, i: usize) -> &PowerSeries {
        &self.components[i]
    }

    pub fn components(&self) -> &[PowerSeries] {
        &self.components
    }

    /// Order-`k` coefficient of every component.
    pub fn coeff_at(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|c| c.coeff(k)).collect()
    }

    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.evaluate(t)).collect()
    }

    pub fn differentiate(&self) -> Self {
        Self {
            components: self.components.iter().map(|c| c.differentiate()).collect(),
        }
    }
}

/// Evaluation contract for a smooth vector field on series arguments.
///
/// `eval_series` must return the series of `f(x(t))` truncated to the input
/// order; on an order-0 (constant) input, coefficient 0 is the plain
/// derivative `f(x0)`. Composition through the operations in this module
/// guarantees the order-`k` output coefficient depends only on input
/// coefficients `0..=k`.
pub trait SeriesField {
    fn dim(&self) -> usize;

    fn eval_series(&self, x: &SeriesVector) -> Result<SeriesVector, SeriesError>;

    /// Plain derivative evaluation at time `t` and state `x`, routed through
    /// the order-0 series path so that point and series evaluations agree
    /// bit-for-bit.
    fn eval_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, SeriesError> {
        if x.len() != self.dim() {
            return Err(SeriesError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let sv = SeriesVector::from_point(t, x, 0);
        Ok(self.eval_series(&sv)?.coeff_at(0))
    }
}

/// Builds the order-`n` truncated series solution of `x' = f(x)`, `x(t0) = x0`
/// by the recursion `a[k+1] = b[k] / (k + 1)`.
pub fn propagate(
    field: &dyn SeriesField,
    x0: &[f64],
    t0: f64,
    n: usize,
) -> Result<SeriesVector, SeriesError> {
    let dim = field.dim();
    if x0.len() != dim {
        return Err(SeriesError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    let mut coeffs: Vec<Vec<f64>> = x0.iter().map(|&v| vec![v]).collect();
    for k in 0..n {
        let partial = SeriesVector::new(
            coeffs
                .iter()
                .map(|c| PowerSeries::raw(t0, c.clone()))
                .collect(),
        )?;
        let b = field.eval_series(&partial)?;
        if b.dim() != dim {
            return Err(SeriesError::DimensionMismatch {
                expected: dim,
                got: b.dim(),
            });
        }
        for (i, c) in coeffs.iter_mut().enumerate() {
            let a_next = b.component(i).coeff(k) / (k + 1) as f64;
            if !a_next.is_finite() || math::abs(a_next) > COEFF_LIMIT {
                return Err(SeriesError::Diverged {
                    component: i,
                    order: k + 1,
                });
            }
            c.push(a_next);
        }
    }
    SeriesVector::new(
        coeffs
            .into_iter()
            .map(|c| PowerSeries::raw(t0, c))
            .collect(),
    )
}
