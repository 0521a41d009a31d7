//! Discrete-time LFC controllers.
//!
//! Sign convention: a positive ACE (over-frequency or over-export) commands
//! a generation decrease, so `dP_C = bias - (kp*e + ki*integral + kd*de/dt)`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Symmetric clamp on the controller output, pu power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_limit: Option<f64>,
    /// Constant offset added to the output.
    #[serde(default)]
    pub bias: f64,
}

impl PidGains {
    pub const DISABLED: PidGains = PidGains {
        kp: 0.0,
        ki: 0.0,
        kd: 0.0,
        output_limit: None,
        bias: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "controller gain {name} must be non-negative, got {v}"
                )));
            }
        }
        if let Some(limit) = self.output_limit {
            if !(limit > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "controller output limit must be positive, got {limit}"
                )));
            }
        }
        if !self.bias.is_finite() {
            return Err(Error::InvalidParameter("controller bias must be finite".into()));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.kp > 0.0 || self.ki > 0.0 || self.kd > 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerState {
    /// Accumulated `sum(ace * dt)`, pu power seconds.
    pub integral: f64,
    pub previous_error: f64,
}

/// One PID update: rectangle-rule integral, backward-difference derivative.
///
/// While the output is clamped the integrator holds its previous value.
pub fn controller_step(
    gains: &PidGains,
    state: ControllerState,
    ace: f64,
    dt: f64,
) -> (f64, ControllerState) {
    let integral = state.integral + ace * dt;
    let derivative = (ace - state.previous_error) / dt;
    let raw = gains.bias - (gains.kp * ace + gains.ki * integral + gains.kd * derivative);
    match gains.output_limit {
        Some(limit) if raw.abs() > limit => (
            raw.clamp(-limit, limit),
            ControllerState {
                integral: state.integral,
                previous_error: ace,
            },
        ),
        _ => (
            raw,
            ControllerState {
                integral,
                previous_error: ace,
            },
        ),
    }
}

/// A controller form that maps ACE samples to LFC commands.
pub trait Controller: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn gains(&self) -> PidGains;

    fn step(&self, state: ControllerState, ace: f64, dt: f64) -> (f64, ControllerState);
}

#[derive(Debug, Clone)]
pub struct Pid {
    gains: PidGains,
}

impl Pid {
    pub fn new(gains: PidGains) -> Result<Self> {
        gains.validate()?;
        Ok(Pid { gains })
    }
}

impl Controller for Pid {
    fn name(&self) -> &'static str {
        "pid"
    }

    fn gains(&self) -> PidGains {
        self.gains
    }

    fn step(&self, state: ControllerState, ace: f64, dt: f64) -> (f64, ControllerState) {
        controller_step(&self.gains, state, ace, dt)
    }
}

/// Pure integral controller with a constant compensation offset, the form
/// used by the real-time setup.
#[derive(Debug, Clone)]
pub struct Integral {
    gains: PidGains,
}

impl Integral {
    pub fn new(ki: f64, bias: f64, output_limit: Option<f64>) -> Result<Self> {
        let gains = PidGains {
            kp: 0.0,
            ki,
            kd: 0.0,
            output_limit,
            bias,
        };
        gains.validate()?;
        Ok(Integral { gains })
    }
}

impl Controller for Integral {
    fn name(&self) -> &'static str {
        "integral"
    }

    fn gains(&self) -> PidGains {
        self.gains
    }

    fn step(&self, state: ControllerState, ace: f64, dt: f64) -> (f64, ControllerState) {
        controller_step(&self.gains, state, ace, dt)
    }
}

pub type ControllerFactory = dyn Fn(&PidGains) -> Result<Box<dyn Controller>> + Send + Sync;

/// Built-in controller forms: `pid` and `integral`.
pub fn controllers() -> &'static Registry<ControllerFactory> {
    static REGISTRY: OnceLock<Registry<ControllerFactory>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg: Registry<ControllerFactory> = Registry::new("controller");
        reg.register(
            "pid",
            Box::new(|g: &PidGains| Ok(Box::new(Pid::new(*g)?) as Box<dyn Controller>)),
        )
        .expect("fresh registry");
        reg.register(
            "integral",
            Box::new(|g: &PidGains| {
                if g.kp != 0.0 || g.kd != 0.0 {
                    return Err(Error::InvalidParameter(
                        "integral controller takes only ki, bias and output_limit".into(),
                    ));
                }
                Ok(Box::new(Integral::new(g.ki, g.bias, g.output_limit)?) as Box<dyn Controller>)
            }),
        )
        .expect("fresh registry");
        reg
    })
}

pub fn build_controller(name: &str, gains: &PidGains) -> Result<Box<dyn Controller>> {
    (controllers().get(name)?)(gains)
}
