//! Attack scenario files and the shipped fixtures.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::dataset::Dataset;
use crate::network::NetworkModel;
use crate::sim::attack::{build_attack, AttackContext};
use crate::sim::AttackScenario;

pub const SCENARIO_SCHEMA: &str = "lfc-laa-scenario/1";

pub const DEFAULT_DURATION: f64 = 300.0;

const FIXTURES: &[(&str, &str)] = &[
    ("baseline", include_str!("../../data/scenarios/baseline.toml")),
    ("I.1", include_str!("../../data/scenarios/I.1.toml")),
    ("I.2", include_str!("../../data/scenarios/I.2.toml")),
    ("I.3", include_str!("../../data/scenarios/I.3.toml")),
    ("I.4", include_str!("../../data/scenarios/I.4.toml")),
    ("I.5", include_str!("../../data/scenarios/I.5.toml")),
    ("II", include_str!("../../data/scenarios/II.toml")),
    ("III", include_str!("../../data/scenarios/III.toml")),
];

pub fn builtin_scenario_ids() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(id, _)| *id)
}

/// Frequency-feedback attack on the bus-level network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkAttack {
    pub buses: Vec<usize>,
    pub gains: Vec<f64>,
}

impl NetworkAttack {
    /// Copy of `net` with these gains on the named load buses.
    pub fn apply(&self, net: &NetworkModel) -> Result<NetworkModel> {
        if self.buses.len() != self.gains.len() {
            return Err(Error::schema("network_attack", "`buses` and `gains` differ in length"));
        }
        let mut out = net.clone();
        for (&bus, &gain) in self.buses.iter().zip(&self.gains) {
            let k = out.load_index(bus)?;
            out.k_lg[k] = gain;
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema: String,
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_start")]
    pub attack_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(rename = "attack", default)]
    pub attacks: Vec<toml::Table>,
    /// Gains for eigenvalue studies of the same attack on the bus network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network_attack: Option<NetworkAttack>,
}

fn default_start() -> f64 {
    30.0
}

impl ScenarioSpec {
    pub fn builtin(id: &str) -> Result<Self> {
        let text = FIXTURES
            .iter()
            .find(|(name, _)| *name == id)
            .map(|(_, text)| *text)
            .ok_or_else(|| Error::Unknown {
                kind: "scenario",
                name: id.to_string(),
                available: builtin_scenario_ids().collect::<Vec<_>>().join(", "),
            })?;
        ScenarioSpec::from_toml_str(text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::schema("scenario", e.to_string()))?;
        if spec.schema != SCENARIO_SCHEMA {
            return Err(Error::schema(
                "scenario.schema",
                format!("expected `{SCENARIO_SCHEMA}`, got `{}`", spec.schema),
            ));
        }
        if !(spec.attack_start >= 0.0) {
            return Err(Error::schema("scenario.attack_start", "must be non-negative"));
        }
        if let Some(d) = spec.duration {
            if !(d > 0.0) {
                return Err(Error::schema("scenario.duration", "must be positive"));
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioSpec::from_toml_str(&text)
    }

    /// A fixture id, or a path to a scenario file.
    pub fn resolve(source: &str) -> Result<Self> {
        if FIXTURES.iter().any(|(id, _)| *id == source) {
            ScenarioSpec::builtin(source)
        } else {
            ScenarioSpec::load(Path::new(source))
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or(DEFAULT_DURATION)
    }

    /// Resolves every attack table against the dataset.
    pub fn build(&self, dataset: &Dataset) -> Result<AttackScenario> {
        let base_loads = dataset.base_loads();
        let bus_area = dataset.bus_areas();
        let ctx = AttackContext {
            base_loads: &base_loads,
            attack_start: self.attack_start,
            bus_area: &bus_area,
        };
        let attacks = self
            .attacks
            .iter()
            .enumerate()
            .map(|(k, table)| {
                build_attack(table, &ctx).map_err(|e| match e {
                    Error::Schema { location, message } => {
                        Error::schema(format!("scenario {} attack[{k}] {location}", self.id), message)
                    }
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AttackScenario {
            id: self.id.clone(),
            description: self.description.clone(),
            attack_start: self.attack_start,
            attacks,
        })
    }
}
