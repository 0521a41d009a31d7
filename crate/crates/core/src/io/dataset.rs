//! Versioned TOML dataset: LFC areas, generators, tie lines and the bus
//! network.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{build_controller, PidGains};
use crate::error::{Error, Result};
use crate::model::{tie_coefficient, AreaParams, GeneratorParams, PARTICIPATION_SUM_TOLERANCE};
use crate::network::{is_connected, Branch, GeneratorConstants, NetworkModel};
use crate::sim::SystemModel;

pub const DATASET_SCHEMA: &str = "lfc-laa-dataset/1";

pub const BUILTIN_IEEE39: &str = include_str!("../../data/ieee39-3area.toml");

pub const DEFAULT_DATASET: &str = "ieee39-3area";
pub const BUILTIN_DATASETS: &[&str] = &["ieee39-3area"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub nominal_frequency: f64,
    #[serde(rename = "area")]
    pub areas: Vec<AreaSpec>,
    #[serde(rename = "generator")]
    pub generators: Vec<GeneratorSpec>,
    #[serde(rename = "tie", default)]
    pub ties: Vec<TieSpec>,
    pub network: NetworkSpec,
    #[serde(rename = "bus")]
    pub buses: Vec<BusSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub name: String,
    pub damping: f64,
    pub inertia: f64,
    /// Nominal area load, pu on the area base.
    pub base_load: f64,
    #[serde(default = "default_controller")]
    pub controller: String,
    pub gains: PidGains,
}

fn default_controller() -> String {
    "pid".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub number: usize,
    pub bus: usize,
    /// 1-based area number.
    pub area: usize,
    pub turbine_time_constant: f64,
    pub governor_time_constant: f64,
    pub droop: f64,
    pub participation: f64,
    pub m: f64,
    pub d_g: f64,
    pub k_p: f64,
    pub k_i: f64,
}

/// Tie line between two areas. Either give `coefficient` directly or the
/// terminal voltages, angles and reactance it derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieSpec {
    pub areas: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buses: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltages: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reactance: Option<f64>,
}

impl TieSpec {
    pub fn coefficient(&self) -> Result<f64> {
        match (self.coefficient, self.voltages, self.angles_deg, self.reactance) {
            (Some(t), None, None, None) => Ok(t),
            (None, Some(v), Some(a), Some(x)) => {
                tie_coefficient(v[0], v[1], x, a[0].to_radians(), a[1].to_radians())
            }
            _ => Err(Error::schema(
                format!("tie {:?}", self.areas),
                "give either `coefficient` or all of `voltages`, `angles_deg` and `reactance`",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub base_mva: f64,
    /// `[from, to, reactance]` per branch, reactance in pu on `base_mva`.
    pub branches: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: usize,
    pub area: usize,
    #[serde(default)]
    pub load_mw: f64,
}

impl Dataset {
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "ieee39-3area" => Dataset::from_toml_str(BUILTIN_IEEE39),
            _ => Err(Error::Unknown {
                kind: "built-in dataset",
                name: name.to_string(),
                available: BUILTIN_DATASETS.join(", "),
            }),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let ds: Dataset = toml::from_str(text).map_err(|e| Error::schema("dataset", e.to_string()))?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_toml_str(&text).map_err(|e| match e {
            Error::Schema { location, message } => Error::Schema {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Loads `source` as a file if it exists, else as a built-in name.
    /// `None` selects the default built-in dataset.
    pub fn resolve(source: Option<&str>) -> Result<Self> {
        match source {
            None => Dataset::builtin(DEFAULT_DATASET),
            Some(s) if Path::new(s).exists() => Dataset::load(Path::new(s)),
            Some(s) if BUILTIN_DATASETS.contains(&s) => Dataset::builtin(s),
            Some(s) => Dataset::load(Path::new(s)),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::schema("dataset", e.to_string()))
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |loc: String, msg: String| Err(Error::schema(loc, msg));
        if self.schema != DATASET_SCHEMA {
            return err("schema".into(), format!("expected `{DATASET_SCHEMA}`, got `{}`", self.schema));
        }
        if !(self.nominal_frequency > 0.0) {
            return err("nominal_frequency".into(), "must be positive".into());
        }
        if self.areas.is_empty() {
            return err("area".into(), "at least one area is required".into());
        }
        let n_areas = self.areas.len();
        for (i, a) in self.areas.iter().enumerate() {
            if !(a.base_load >= 0.0) {
                return err(format!("area[{i}].base_load"), "must be non-negative".into());
            }
        }

        let mut numbers = BTreeSet::new();
        for (k, g) in self.generators.iter().enumerate() {
            let loc = format!("generator[{k}]");
            if !(1..=n_areas).contains(&g.area) {
                return err(loc, format!("area {} does not exist", g.area));
            }
            if !numbers.insert(g.number) {
                return err(loc, format!("generator number {} repeated", g.number));
            }
            self.generator_params(g).validate().map_err(|e| Error::schema(loc.clone(), e.to_string()))?;
            for (name, v) in [("d_g", g.d_g), ("k_p", g.k_p), ("k_i", g.k_i)] {
                if !(v >= 0.0) {
                    return err(format!("{loc}.{name}"), "must be non-negative".into());
                }
            }
            if !(g.m > 0.0) {
                return err(format!("{loc}.m"), "must be positive".into());
            }
            if g.k_i > 0.0 && g.participation == 0.0 {
                return err(format!("{loc}.k_i"), "secondary control gain on a generator outside LFC".into());
            }
        }
        if numbers.iter().copied().ne(1..=self.generators.len()) {
            return err("generator".into(), "generator numbers must run 1..=n".into());
        }
        for a in 1..=n_areas {
            let gens: Vec<&GeneratorSpec> = self.generators.iter().filter(|g| g.area == a).collect();
            if gens.is_empty() {
                return err(format!("area[{}]", a - 1), "has no generators".into());
            }
            let total: f64 = gens.iter().map(|g| g.participation).sum();
            if (total - 1.0).abs() > PARTICIPATION_SUM_TOLERANCE {
                return err(
                    format!("area[{}]", a - 1),
                    format!("participation factors sum to {total}, expected 1"),
                );
            }
        }

        for (k, t) in self.ties.iter().enumerate() {
            let loc = format!("tie[{k}]");
            let [a, b] = t.areas;
            if a == b || !(1..=n_areas).contains(&a) || !(1..=n_areas).contains(&b) {
                return err(loc, format!("invalid area pair {:?}", t.areas));
            }
            t.coefficient().map_err(|e| Error::schema(loc, e.to_string()))?;
        }

        let mut bus_ids = BTreeSet::new();
        for (k, b) in self.buses.iter().enumerate() {
            if !bus_ids.insert(b.id) {
                return err(format!("bus[{k}]"), format!("bus {} repeated", b.id));
            }
            if !(1..=n_areas).contains(&b.area) {
                return err(format!("bus[{k}]"), format!("area {} does not exist", b.area));
            }
            if !(b.load_mw >= 0.0) {
                return err(format!("bus[{k}].load_mw"), "must be non-negative".into());
            }
        }
        for g in &self.generators {
            match self.buses.iter().find(|b| b.id == g.bus) {
                None => return err(format!("generator {}", g.number), format!("bus {} is not listed", g.bus)),
                Some(b) if b.area != g.area => {
                    return err(
                        format!("generator {}", g.number),
                        format!("bus {} lies in area {}, generator says {}", g.bus, b.area, g.area),
                    )
                }
                _ => {}
            }
        }
        if !(self.network.base_mva > 0.0) {
            return err("network.base_mva".into(), "must be positive".into());
        }
        for (k, &(f, t, x)) in self.network.branches.iter().enumerate() {
            if !bus_ids.contains(&f) || !bus_ids.contains(&t) {
                return err(format!("network.branches[{k}]"), format!("branch {f}-{t} names an unlisted bus"));
            }
            if !(x > 0.0) {
                return err(format!("network.branches[{k}]"), "reactance must be positive".into());
            }
        }
        let all: Vec<usize> = bus_ids.iter().copied().collect();
        if !is_connected(&all, &self.branches()) {
            return err("network.branches".into(), "branch graph is not connected".into());
        }
        Ok(())
    }

    fn generator_params(&self, g: &GeneratorSpec) -> GeneratorParams {
        GeneratorParams {
            turbine_time_constant: g.turbine_time_constant,
            governor_time_constant: g.governor_time_constant,
            droop: g.droop,
            participation: g.participation,
        }
    }

    pub fn branches(&self) -> Vec<Branch> {
        self.network
            .branches
            .iter()
            .map(|&(from, to, reactance)| Branch { from, to, reactance })
            .collect()
    }

    /// Generator numbers per area, in the order their states appear.
    pub fn area_generators(&self) -> Vec<Vec<usize>> {
        (1..=self.n_areas())
            .map(|a| self.generators.iter().filter(|g| g.area == a).map(|g| g.number).collect())
            .collect()
    }

    pub fn area_params(&self) -> Result<Vec<AreaParams>> {
        let mut ties: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n_areas()];
        for t in &self.ties {
            let c = t.coefficient()?;
            let (i, j) = (t.areas[0] - 1, t.areas[1] - 1);
            *ties[i].entry(j).or_insert(0.0) += c;
            *ties[j].entry(i).or_insert(0.0) += c;
        }
        Ok(self
            .areas
            .iter()
            .zip(ties)
            .enumerate()
            .map(|(i, (a, tie_coefficients))| AreaParams {
                damping: a.damping,
                inertia: a.inertia,
                generators: self
                    .generators
                    .iter()
                    .filter(|g| g.area == i + 1)
                    .map(|g| self.generator_params(g))
                    .collect(),
                tie_coefficients,
            })
            .collect())
    }

    pub fn base_loads(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a.base_load).collect()
    }

    /// Bus id to 0-based area index.
    pub fn bus_areas(&self) -> BTreeMap<usize, usize> {
        self.buses.iter().map(|b| (b.id, b.area - 1)).collect()
    }

    pub fn system_model(&self, dt: f64) -> Result<SystemModel> {
        let areas = self
            .area_params()?
            .into_iter()
            .zip(&self.areas)
            .map(|(p, spec)| Ok((p, build_controller(&spec.controller, &spec.gains)?)))
            .collect::<Result<Vec<_>>>()?;
        SystemModel::new(areas, dt, self.nominal_frequency)
    }

    /// Bus-level model, generators in number order and load buses (every
    /// non-generator bus) ascending.
    pub fn network_model(&self) -> Result<NetworkModel> {
        let mut gens: Vec<&GeneratorSpec> = self.generators.iter().collect();
        gens.sort_by_key(|g| g.number);
        let gen_buses: Vec<usize> = gens.iter().map(|g| g.bus).collect();
        let load_buses: Vec<usize> = self
            .buses
            .iter()
            .map(|b| b.id)
            .filter(|id| !gen_buses.contains(id))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let p_ls = load_buses
            .iter()
            .map(|id| {
                let bus = self.buses.iter().find(|b| b.id == *id).expect("listed bus");
                bus.load_mw / self.network.base_mva
            })
            .collect();
        NetworkModel::from_branches(
            &gen_buses,
            &load_buses,
            &self.branches(),
            GeneratorConstants {
                m: gens.iter().map(|g| g.m).collect(),
                d_g: gens.iter().map(|g| g.d_g).collect(),
                k_p: gens.iter().map(|g| g.k_p).collect(),
                k_i: gens.iter().map(|g| g.k_i).collect(),
            },
            p_ls,
        )
    }
}
