//! Load altering attack injectors.
//!
//! Every attack kind implements [`LoadAttack`] and is built from its scenario
//! table by a factory registered under the kind's name (`step`, `multistep`,
//! `dlaa_feedback`). A scenario may stack several attacks; their open-loop
//! loads and feedback gains add.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::registry::Registry;

/// What an attack factory may look up while resolving its parameters.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    /// Nominal load of each area, pu. Fractional attacks scale these.
    pub base_loads: &'a [f64],
    /// Default start time for attacks that do not name their own.
    pub attack_start: f64,
    /// Bus id to area index, for attacks addressed by bus.
    pub bus_area: &'a BTreeMap<usize, usize>,
}

impl AttackContext<'_> {
    pub fn n_areas(&self) -> usize {
        self.base_loads.len()
    }
}

pub trait LoadAttack: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Open-loop load change injected into `area` at time `t`, pu.
    fn scheduled_load(&self, _area: usize, _t: f64) -> f64 {
        0.0
    }

    /// Gain `K` of the frequency-feedback load `d = -K * df` active in
    /// `area` at time `t`.
    fn feedback_gain(&self, _area: usize, _t: f64) -> f64 {
        0.0
    }
}

/// Piecewise-constant load schedule: each `(time, value)` holds until the
/// next entry. Zero before the first entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSchedule {
    entries: Vec<(f64, f64)>,
}

impl LoadSchedule {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter(
                "load schedule times must be nondecreasing".into(),
            ));
        }
        if entries.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *t < 0.0) {
            return Err(Error::InvalidParameter(
                "load schedule entries must be finite with non-negative times".into(),
            ));
        }
        Ok(LoadSchedule { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self.entries.partition_point(|(time, _)| *time <= t) {
            0 => 0.0,
            k => self.entries[k - 1].1,
        }
    }
}

/// Single load step per area.
#[derive(Debug, Clone)]
pub struct StepAttack {
    schedules: Vec<LoadSchedule>,
}

impl StepAttack {
    pub fn new(start: f64, magnitudes: &[f64]) -> Result<Self> {
        check_start(start)?;
        let schedules = magnitudes
            .iter()
            .map(|&m| LoadSchedule::new(vec![(start, m)]))
            .collect::<Result<_>>()?;
        Ok(StepAttack { schedules })
    }
}

impl LoadAttack for StepAttack {
    fn name(&self) -> &'static str {
        "step"
    }

    fn scheduled_load(&self, area: usize, t: f64) -> f64 {
        self.schedules.get(area).map_or(0.0, |s| s.value_at(t))
    }
}

/// Staircase reaching the target in `steps` equal increments spaced by
/// `interval` seconds.
#[derive(Debug, Clone)]
pub struct MultistepAttack {
    schedules: Vec<LoadSchedule>,
}

impl MultistepAttack {
    pub fn new(start: f64, targets: &[f64], steps: usize, interval: f64) -> Result<Self> {
        check_start(start)?;
        if steps == 0 {
            return Err(Error::InvalidParameter("multistep attack needs at least one step".into()));
        }
        if !(interval > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "multistep interval must be positive, got {interval}"
            )));
        }
        let schedules = targets
            .iter()
            .map(|&target| {
                LoadSchedule::new(
                    (0..steps)
                        .map(|k| {
                            (
                                start + k as f64 * interval,
                                target * (k + 1) as f64 / steps as f64,
                            )
                        })
                        .collect(),
                )
            })
            .collect::<Result<_>>()?;
        Ok(MultistepAttack { schedules })
    }

    pub fn schedule(&self, area: usize) -> Option<&LoadSchedule> {
        self.schedules.get(area)
    }
}

impl LoadAttack for MultistepAttack {
    fn name(&self) -> &'static str {
        "multistep"
    }

    fn scheduled_load(&self, area: usize, t: f64) -> f64 {
        self.schedules.get(area).map_or(0.0, |s| s.value_at(t))
    }
}

/// Dynamic attack: load proportional to the negated frequency deviation,
/// engaged from `engage_time` on.
#[derive(Debug, Clone)]
pub struct DlaaFeedback {
    gains: Vec<f64>,
    engage_time: f64,
}

impl DlaaFeedback {
    pub fn new(engage_time: f64, gains: Vec<f64>) -> Result<Self> {
        check_start(engage_time)?;
        if gains.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(Error::InvalidParameter(
                "DLAA gains must be finite and non-negative".into(),
            ));
        }
        Ok(DlaaFeedback { gains, engage_time })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
}

impl LoadAttack for DlaaFeedback {
    fn name(&self) -> &'static str {
        "dlaa_feedback"
    }

    fn feedback_gain(&self, area: usize, t: f64) -> f64 {
        if t >= self.engage_time {
            self.gains.get(area).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

fn check_start(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "attack start must be a non-negative time, got {t}"
        )));
    }
    Ok(())
}

pub type AttackFactory =
    dyn Fn(&toml::Table, &AttackContext<'_>) -> Result<Box<dyn LoadAttack>> + Send + Sync;

/// Built-in attack kinds.
pub fn attacks() -> &'static Registry<AttackFactory> {
    static REGISTRY: OnceLock<Registry<AttackFactory>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg: Registry<AttackFactory> = Registry::new("attack kind");
        reg.register("step", Box::new(|t, ctx| {
            let start = opt_f64(t, "start")?.unwrap_or(ctx.attack_start);
            Ok(Box::new(StepAttack::new(start, &area_magnitudes(t, ctx)?)?) as Box<dyn LoadAttack>)
        }))
        .expect("fresh registry");
        reg.register("multistep", Box::new(|t, ctx| {
            let start = opt_f64(t, "start")?.unwrap_or(ctx.attack_start);
            let steps = opt_usize(t, "steps")?.unwrap_or(4);
            let interval = opt_f64(t, "interval")?.unwrap_or(30.0);
            Ok(Box::new(MultistepAttack::new(start, &area_magnitudes(t, ctx)?, steps, interval)?)
                as Box<dyn LoadAttack>)
        }))
        .expect("fresh registry");
        reg.register("dlaa_feedback", Box::new(|t, ctx| {
            let engage = opt_f64(t, "engage_time")?.unwrap_or(ctx.attack_start);
            Ok(Box::new(DlaaFeedback::new(engage, area_gains(t, ctx)?)?) as Box<dyn LoadAttack>)
        }))
        .expect("fresh registry");
        reg
    })
}

/// Builds one attack from its scenario table; the `kind` key selects the
/// factory.
pub fn build_attack(table: &toml::Table, ctx: &AttackContext<'_>) -> Result<Box<dyn LoadAttack>> {
    let kind = table
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::schema("attack", "missing string field `kind`"))?;
    (attacks().get(kind)?)(table, ctx)
}

/// Per-area magnitudes from either `magnitude` (pu) or `load_fraction`
/// (share of each area's base load).
fn area_magnitudes(t: &toml::Table, ctx: &AttackContext<'_>) -> Result<Vec<f64>> {
    let magnitude = opt_f64_array(t, "magnitude")?;
    let fraction = opt_f64_array(t, "load_fraction")?;
    let values = match (magnitude, fraction) {
        (Some(m), None) => m,
        (None, Some(f)) => {
            if f.len() == ctx.n_areas() {
                f.iter().zip(ctx.base_loads).map(|(f, base)| f * base).collect()
            } else {
                f
            }
        }
        (Some(_), Some(_)) => {
            return Err(Error::schema("attack", "give either `magnitude` or `load_fraction`, not both"))
        }
        (None, None) => {
            return Err(Error::schema("attack", "one of `magnitude` or `load_fraction` is required"))
        }
    };
    if values.len() != ctx.n_areas() {
        return Err(Error::schema(
            "attack",
            format!("expected {} per-area values, got {}", ctx.n_areas(), values.len()),
        ));
    }
    Ok(values)
}

/// Per-area feedback gains from `gains` (one per area) or from `buses` and
/// `gains` (one per bus, summed into the bus's area).
fn area_gains(t: &toml::Table, ctx: &AttackContext<'_>) -> Result<Vec<f64>> {
    let gains = opt_f64_array(t, "gains")?
        .ok_or_else(|| Error::schema("attack", "dlaa_feedback requires `gains`"))?;
    match opt_usize_array(t, "buses")? {
        None => {
            if gains.len() != ctx.n_areas() {
                return Err(Error::schema(
                    "attack",
                    format!("expected {} per-area gains, got {}", ctx.n_areas(), gains.len()),
                ));
            }
            Ok(gains)
        }
        Some(buses) => {
            if buses.len() != gains.len() {
                return Err(Error::schema("attack", "`buses` and `gains` differ in length"));
            }
            let mut per_area = vec![0.0; ctx.n_areas()];
            for (bus, gain) in buses.iter().zip(gains) {
                let area = ctx.bus_area.get(bus).copied().ok_or_else(|| {
                    Error::schema("attack", format!("bus {bus} is not assigned to an area"))
                })?;
                per_area[area] += gain;
            }
            Ok(per_area)
        }
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

pub(crate) fn opt_f64(t: &toml::Table, key: &str) -> Result<Option<f64>> {
    t.get(key)
        .map(|v| as_f64(v).ok_or_else(|| Error::schema(format!("attack.{key}"), "expected a number")))
        .transpose()
}

fn opt_usize(t: &toml::Table, key: &str) -> Result<Option<usize>> {
    t.get(key)
        .map(|v| {
            v.as_integer()
                .filter(|i| *i >= 0)
                .map(|i| i as usize)
                .ok_or_else(|| Error::schema(format!("attack.{key}"), "expected a non-negative integer"))
        })
        .transpose()
}

fn opt_f64_array(t: &toml::Table, key: &str) -> Result<Option<Vec<f64>>> {
    t.get(key)
        .map(|v| {
            v.as_array()
                .and_then(|a| a.iter().map(as_f64).collect::<Option<Vec<_>>>())
                .ok_or_else(|| Error::schema(format!("attack.{key}"), "expected an array of numbers"))
        })
        .transpose()
}

fn opt_usize_array(t: &toml::Table, key: &str) -> Result<Option<Vec<usize>>> {
    t.get(key)
        .map(|v| {
            v.as_array()
                .and_then(|a| {
                    a.iter()
                        .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                        .collect::<Option<Vec<_>>>()
                })
                .ok_or_else(|| Error::schema(format!("attack.{key}"), "expected an array of bus ids"))
        })
        .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>(loads: &'a [f64], map: &'a BTreeMap<usize, usize>) -> AttackContext<'a> {
        AttackContext {
            base_loads: loads,
            attack_start: 30.0,
            bus_area: map,
        }
    }

    #[test]
    fn schedule_lookup() {
        let s = LoadSchedule::new(vec![(1.0, 0.1), (2.0, 0.3)]).unwrap();
        assert_eq!(s.value_at(0.5), 0.0);
        assert_eq!(s.value_at(1.0), 0.1);
        assert_eq!(s.value_at(1.999), 0.1);
        assert_eq!(s.value_at(5.0), 0.3);
        assert!(LoadSchedule::new(vec![(2.0, 0.1), (1.0, 0.3)]).is_err());
    }

    #[test]
    fn multistep_staircase() {
        let a = MultistepAttack::new(30.0, &[0.16], 4, 30.0).unwrap();
        let s = a.schedule(0).unwrap();
        assert_eq!(s.entries(), &[(30.0, 0.04), (60.0, 0.08), (90.0, 0.12), (120.0, 0.16)]);
        assert_eq!(a.scheduled_load(0, 200.0), 0.16);
    }

    #[test]
    fn factories_resolve_fractions_and_buses() {
        let map = BTreeMap::from([(16, 2), (21, 2), (4, 1)]);
        let loads = [2.0, 1.0, 3.0];
        let c = ctx(&loads, &map);
        let step: toml::Table = toml::from_str("kind = 'step'\nload_fraction = [0.1, 0.0, 0.2]").unwrap();
        let a = build_attack(&step, &c).unwrap();
        assert_eq!(a.name(), "step");
        assert_eq!(a.scheduled_load(0, 29.99), 0.0);
        assert!((a.scheduled_load(0, 30.0) - 0.2).abs() < 1e-15);
        assert!((a.scheduled_load(2, 31.0) - 0.6).abs() < 1e-15);

        let dlaa: toml::Table =
            toml::from_str("kind = 'dlaa_feedback'\nbuses = [16, 21, 4]\ngains = [1.5, 2.5, 1]").unwrap();
        let d = build_attack(&dlaa, &c).unwrap();
        assert_eq!(d.feedback_gain(2, 10.0), 0.0);
        assert_eq!(d.feedback_gain(2, 30.0), 4.0);
        assert_eq!(d.feedback_gain(1, 30.0), 1.0);
        assert_eq!(d.feedback_gain(0, 30.0), 0.0);
    }

    #[test]
    fn factory_errors() {
        let map = BTreeMap::new();
        let loads = [1.0, 1.0];
        let c = ctx(&loads, &map);
        let bad_kind: toml::Table = toml::from_str("kind = 'ramp'").unwrap();
        assert!(matches!(build_attack(&bad_kind, &c), Err(Error::Unknown { .. })));
        let wrong_len: toml::Table = toml::from_str("kind = 'step'\nmagnitude = [0.1]").unwrap();
        assert!(build_attack(&wrong_len, &c).is_err());
        let unknown_bus: toml::Table =
            toml::from_str("kind = 'dlaa_feedback'\nbuses = [99]\ngains = [1.0]").unwrap();
        assert!(build_attack(&unknown_bus, &c).is_err());
        let negative: toml::Table = toml::from_str("kind = 'dlaa_feedback'\ngains = [-1.0, 0.0]").unwrap();
        assert!(build_attack(&negative, &c).is_err());
    }
}
