//! Coupled multi-area discrete-time simulation.
//!
//! Each area advances with its own zero-order-hold matrices. Areas couple
//! through `v_i = sum_j T_ij * df_j` evaluated on the current sample, which
//! is then held over the step (an explicit one-step lag).

pub mod attack;

use std::fmt;

use serde::Serialize;

use crate::control::{Controller, ControllerState};
use crate::error::{Error, Result};
use crate::model::{build_area_matrices, check_tie_symmetry, compute_beta, AreaMatrices, AreaParams};
use crate::numerics::{zoh_discretize, Matrix};

pub use attack::{AttackContext, LoadAttack};

/// Any state magnitude above this ends the run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

pub struct AreaModel {
    pub params: AreaParams,
    pub matrices: AreaMatrices,
    pub beta: f64,
    pub ad: Matrix,
    /// Discretized columns for `[dP_L, v]`.
    pub b1d: Matrix,
    pub b2d: Matrix,
    pub controller: Box<dyn Controller>,
}

impl fmt::Debug for AreaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AreaModel")
            .field("order", &self.params.order())
            .field("beta", &self.beta)
            .field("controller", &self.controller)
            .finish()
    }
}

#[derive(Debug)]
pub struct SystemModel {
    pub areas: Vec<AreaModel>,
    pub dt: f64,
    pub nominal_frequency: f64,
}

impl SystemModel {
    pub fn new(
        areas: Vec<(AreaParams, Box<dyn Controller>)>,
        dt: f64,
        nominal_frequency: f64,
    ) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::InvalidParameter("system has no areas".into()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if !(nominal_frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nominal frequency must be positive, got {nominal_frequency}"
            )));
        }
        let params: Vec<AreaParams> = areas.iter().map(|(p, _)| p.clone()).collect();
        check_tie_symmetry(&params)?;
        let areas = areas
            .into_iter()
            .map(|(params, controller)| {
                let matrices = build_area_matrices(&params)?;
                let beta = compute_beta(&params)?;
                let inputs = concat_columns(&matrices.b1, &matrices.b2);
                let (ad, bd) = zoh_discretize(&matrices.a, &inputs, dt)?;
                Ok(AreaModel {
                    b1d: bd.columns(0, 2).into_owned(),
                    b2d: bd.columns(2, 1).into_owned(),
                    ad,
                    beta,
                    matrices,
                    params,
                    controller,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SystemModel {
            areas,
            dt,
            nominal_frequency,
        })
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }
}

fn concat_columns(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Coupling input of area `i` from the other areas' frequency deviations.
pub fn coupling_input(system: &SystemModel, area_index: usize, freq_devs: &[f64]) -> f64 {
    system.areas[area_index]
        .params
        .tie_coefficients
        .iter()
        .map(|(&j, &t)| t * freq_devs[j])
        .sum()
}

/// Composite scenario: the listed attacks are superposed.
#[derive(Debug, Default)]
pub struct AttackScenario {
    pub id: String,
    pub description: String,
    pub attack_start: f64,
    pub attacks: Vec<Box<dyn LoadAttack>>,
}

impl AttackScenario {
    pub fn none() -> Self {
        AttackScenario {
            id: "baseline".into(),
            ..Default::default()
        }
    }

    pub fn scheduled_load(&self, area: usize, t: f64) -> f64 {
        self.attacks.iter().map(|a| a.scheduled_load(area, t)).sum()
    }

    pub fn feedback_gain(&self, area: usize, t: f64) -> f64 {
        self.attacks.iter().map(|a| a.feedback_gain(area, t)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// A state passed the divergence threshold; the trace ends with that
    /// sample at `time`.
    Diverged { time: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AreaTrace {
    /// Frequency deviation, pu.
    pub freq_dev: Vec<f64>,
    pub tie: Vec<f64>,
    /// Turbine output per generator, indexed `[generator][sample]`.
    pub mech: Vec<Vec<f64>>,
    /// Governor output per generator.
    pub gov: Vec<Vec<f64>>,
    pub ace: Vec<f64>,
    pub control: Vec<f64>,
    /// Total injected load change (scheduled plus feedback), pu.
    pub injected_load: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl AreaTrace {
    fn with_generators(n: usize, capacity: usize) -> Self {
        AreaTrace {
            freq_dev: Vec::with_capacity(capacity),
            tie: Vec::with_capacity(capacity),
            mech: vec![Vec::with_capacity(capacity); n],
            gov: vec![Vec::with_capacity(capacity); n],
            ace: Vec::with_capacity(capacity),
            control: Vec::with_capacity(capacity),
            injected_load: Vec::with_capacity(capacity),
            coupling: Vec::with_capacity(capacity),
        }
    }

    /// State vector at sample `k`, in model ordering.
    pub fn state(&self, k: usize) -> Vec<f64> {
        let mut x = vec![self.freq_dev[k], self.tie[k]];
        x.extend(self.mech.iter().map(|s| s[k]));
        x.extend(self.gov.iter().map(|s| s[k]));
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub time: Vec<f64>,
    pub areas: Vec<AreaTrace>,
    pub status: RunStatus,
    pub dt: f64,
    pub nominal_frequency: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    /// Frequency of `area` in Hz.
    pub fn frequency_hz(&self, area: usize) -> Vec<f64> {
        self.areas[area]
            .freq_dev
            .iter()
            .map(|df| self.nominal_frequency * (1.0 + df))
            .collect()
    }
}

pub fn simulate(system: &SystemModel, scenario: &AttackScenario, duration: f64) -> Result<Trace> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidParameter(format!("duration must be positive, got {duration}")));
    }
    let dt = system.dt;
    let steps = (duration / dt).round() as usize;
    let n_areas = system.n_areas();

    let mut states: Vec<nalgebra::DVector<f64>> = system
        .areas
        .iter()
        .map(|a| nalgebra::DVector::zeros(a.params.order()))
        .collect();
    let mut controller_states = vec![ControllerState::default(); n_areas];
    let mut traces: Vec<AreaTrace> = system
        .areas
        .iter()
        .map(|a| AreaTrace::with_generators(a.params.generators.len(), steps + 1))
        .collect();
    let mut time = Vec::with_capacity(steps + 1);
    let mut status = RunStatus::Completed;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let freq_devs: Vec<f64> = states.iter().map(|x| x[0]).collect();
        let blown = states
            .iter()
            .any(|x| x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD));
        let last = blown || k == steps;
        time.push(t);
        let mut next_states = Vec::with_capacity(n_areas);
        for (i, area) in system.areas.iter().enumerate() {
            let x = &states[i];
            let v = coupling_input(system, i, &freq_devs);
            let load = scenario.scheduled_load(i, t) - scenario.feedback_gain(i, t) * x[0];
            let ace = area.beta * x[0] + x[1];
            let (u, next_ctrl) = area.controller.step(controller_states[i], ace, dt);
            controller_states[i] = next_ctrl;

            let trace = &mut traces[i];
            let n = area.params.generators.len();
            trace.freq_dev.push(x[0]);
            trace.tie.push(x[1]);
            for g in 0..n {
                trace.mech[g].push(x[2 + g]);
                trace.gov[g].push(x[2 + n + g]);
            }
            trace.ace.push(ace);
            trace.control.push(u);
            trace.injected_load.push(load);
            trace.coupling.push(v);

            if !last {
                let next = &area.ad * x
                    + &area.b1d.column(0) * load
                    + &area.b1d.column(1) * v
                    + &area.b2d.column(0) * u;
                next_states.push(next);
            }
        }
        if blown {
            status = RunStatus::Diverged { time: t };
        }
        if last {
            break;
        }
        states = next_states;
    }

    Ok(Trace {
        time,
        areas: traces,
        status,
        dt,
        nominal_frequency: system.nominal_frequency,
    })
}
