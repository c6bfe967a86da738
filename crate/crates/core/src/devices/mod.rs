//! Dynamic-element models: sixth-order synchronous generator with exciter
//! and governor, third-order induction motor, and ZIP static load.
//!
//! Every model exposes steady-state initialization from a power-flow point,
//! plain derivative evaluation, current injection toward the network, and
//! per-device series generation against a prescribed terminal-voltage
//! polynomial. Derivatives are computed through the order-0 series path so
//! point and series evaluations of the same right-hand side agree exactly.

mod generator;
mod motor;
mod zip;

pub use generator::{
    generator_derivatives, generator_norton_admittance, generator_sas, generator_terminal_current,
    init_generator, GenField, GeneratorDerivs, GeneratorParams, GeneratorState, GEN_STATES,
};
pub use motor::{
    init_motor, motor_derivatives, motor_drawn_current, motor_sas, MotorDerivs, MotorField,
    MotorParams, MotorState, MOTOR_STATES,
};
pub use zip::{zip_injection, ZipLoad, LOW_VOLTAGE_FLOOR};

use core::fmt;

use num_complex::Complex64;

/// Terminal operating point handed to device initialization.
#[derive(Debug, Clone, Copy)]
pub struct PowerFlowPoint {
    /// Active power injected (generator) or drawn (motor), pu.
    pub p: f64,
    /// Reactive power injected, pu (unused by motor initialization).
    pub q: f64,
    /// Complex terminal voltage, pu.
    pub v: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceError {
    /// The power-flow point cannot be realized by the machine.
    InfeasiblePoint { detail: &'static str },
    /// No torque-balance slip exists in the search interval.
    NoEquilibriumSlip { p_target: f64 },
    /// Motor initialization needs a strictly positive power draw.
    NonPositiveLoad { p_target: f64 },
}

impl fmt::Display for DeviceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceError::InfeasiblePoint { detail } => {
                write!(f, "infeasible power-flow point: {detail}")
            }
            DeviceError::NoEquilibriumSlip { p_target } => write!(
                f,
                "no equilibrium slip in (0, 0.5) for motor power draw {p_target} pu (stalled)"
            ),
            DeviceError::NonPositiveLoad { p_target } => write!(
                f,
                "motor initialization requires a positive power draw, got {p_target} pu"
            ),
        }
    }
}

impl core::error::Error for DeviceError {}
