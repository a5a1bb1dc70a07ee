//! TOML scenario format.
//!
//! ```toml
//! [plant]
//! a = [[0.99, 0.0], [0.0, 1.01]]      # row-major
//! b = [[1.0], [0.0]]
//! w = { lo = [-1.0], hi = [1.0] }
//!
//! [[sensors]]
//! id = 1
//! c = [[1.0, 0.0]]                    # omit for a sensor without measurements
//! v = { lo = [-1.0], hi = [1.0] }
//!
//! [graph]
//! edges = [[1, 2]]                    # [from, to]: `from` sends to `to`
//!
//! [init]
//! true_x0 = [0.0, 0.0]
//! default = { lo = [-20.0, -20.0], hi = [20.0, 20.0] }
//! [[init.beliefs]]                    # optional per-sensor override
//! sensor = 2
//! cz = { center = [0.0, 0.0], generators = [[1.0, 0.0], [0.0, 1.0]], conA = [], conB = [] }
//!
//! [run]
//! horizon = 200
//! seed = 1
//! max_gen = 40                        # default 20 n
//! max_con = 20                        # default 10 n
//! tolerances = { rank = 1e-9, eig = 1e-7 }
//! ```

use std::path::Path;

use dsmf_core::linalg::{mat_from_rows, mat_to_rows};
use dsmf_core::{
    ConstrainedZonotope, DsmfError, Hyperbox, Mat, PlantModel, Scenario, SensorGraph, SensorId, SensorModel,
    Tolerances, Vector,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scenario loading failure with a stable code.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{code}: {message}")]
pub struct LoadError {
    pub code: &'static str,
    pub message: String,
}

impl LoadError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn dim(message: impl Into<String>) -> Self {
        Self::new("DIM_MISMATCH", message)
    }
}

impl From<DsmfError> for LoadError {
    fn from(e: DsmfError) -> Self {
        match &e {
            DsmfError::InvalidScenario { kind, message } => Self::new(kind.code(), message.clone()),
            DsmfError::DimensionMismatch { .. } => Self::dim(e.to_string()),
            _ => Self::new("INVALID", e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub w: BoxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<BoxSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefOverride {
    pub sensor: usize,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz: Option<ConstrainedZonotope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub true_x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beliefs: Vec<BeliefOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolSection {
    pub rank: f64,
    pub eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gen: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_con: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: PlantSection,
    pub sensors: Vec<SensorSection>,
    #[serde(default = "empty_graph")]
    pub graph: GraphSection,
    pub init: InitSection,
    pub run: RunSection,
}

fn empty_graph() -> GraphSection {
    GraphSection { edges: Vec::new() }
}

fn matrix(name: &str, rows: &[Vec<f64>], cols: usize) -> Result<Mat, LoadError> {
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != cols) {
        return Err(LoadError::dim(format!(
            "{name} row {} has {} entries, expected {cols}",
            r + 1,
            row.len()
        )));
    }
    Ok(mat_from_rows(rows, cols))
}

fn hyperbox(name: &str, b: &BoxSpec, dim: usize) -> Result<Hyperbox, LoadError> {
    if b.lo.len() != dim || b.hi.len() != dim {
        return Err(LoadError::dim(format!(
            "{name} has lo/hi lengths {}/{}, expected {dim}",
            b.lo.len(),
            b.hi.len()
        )));
    }
    if b.lo.iter().chain(&b.hi).any(|v| v.is_infinite()) {
        return Err(LoadError::new("UNBOUNDED_BOX", format!("{name} has an infinite bound")));
    }
    Hyperbox::new(b.lo.clone(), b.hi.clone()).map_err(LoadError::from)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        toml::from_str(text).map_err(|e| LoadError::new("PARSE", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    /// Builds and validates the scenario.
    pub fn build(&self) -> Result<Scenario, LoadError> {
        let n = self.plant.a.len();
        let a = matrix("plant.a", &self.plant.a, n)?;
        let p = self.plant.b.first().map_or(0, |r| r.len());
        if self.plant.b.len() != n {
            return Err(LoadError::dim(format!(
                "plant.b has {} rows, expected {n}",
                self.plant.b.len()
            )));
        }
        let b = matrix("plant.b", &self.plant.b, p)?;
        let w = hyperbox("plant.w", &self.plant.w, p)?;
        let mut sensors = Vec::with_capacity(self.sensors.len());
        for (k, sec) in self.sensors.iter().enumerate() {
            if sec.id != k + 1 {
                return Err(LoadError::new(
                    "BAD_GRAPH",
                    format!(
                        "sensors must be listed with ids 1, 2, ... in order; entry {} has id {}",
                        k + 1,
                        sec.id
                    ),
                ));
            }
            let c = match &sec.c {
                Some(rows) => matrix(&format!("sensors[{}].c", sec.id), rows, n)?,
                None => Mat::zeros(0, n),
            };
            let v = match &sec.v {
                Some(v) => hyperbox(&format!("sensors[{}].v", sec.id), v, c.nrows())?,
                None if c.nrows() == 0 => Hyperbox::symmetric(0, 0.0),
                None => {
                    return Err(LoadError::dim(format!(
                        "sensor {} has measurements but no noise box v",
                        sec.id
                    )));
                }
            };
            sensors.push(SensorModel {
                id: SensorId(sec.id),
                c,
                v,
            });
        }
        let edges: Vec<(usize, usize)> = self.graph.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = SensorGraph::new(sensors.len(), &edges)?;
        let default = match &self.init.default {
            Some(bx) => Some(hyperbox("init.default", bx, n)?.to_cz()),
            None => None,
        };
        let mut beliefs: Vec<Option<ConstrainedZonotope>> = vec![default; sensors.len()];
        for ov in &self.init.beliefs {
            if ov.sensor == 0 || ov.sensor > sensors.len() {
                return Err(LoadError::new(
                    "BAD_GRAPH",
                    format!("belief override names unknown sensor {}", ov.sensor),
                ));
            }
            let z = match (&ov.bbox, &ov.cz) {
                (Some(bx), None) => hyperbox(&format!("init.beliefs[{}].box", ov.sensor), bx, n)?.to_cz(),
                (None, Some(z)) => z.clone(),
                _ => {
                    return Err(LoadError::new(
                        "PARSE",
                        format!(
                            "belief override for sensor {} needs exactly one of box or cz",
                            ov.sensor
                        ),
                    ));
                }
            };
            beliefs[ov.sensor - 1] = Some(z);
        }
        let initial_beliefs = beliefs
            .into_iter()
            .enumerate()
            .map(|(k, z)| {
                z.ok_or_else(|| {
                    LoadError::new(
                        "PARSE",
                        format!("sensor {} has no initial belief and there is no init.default", k + 1),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (dg, dc) = Scenario::default_budget(n);
        let tolerances = self
            .run
            .tolerances
            .map(|t| Tolerances {
                rank: t.rank,
                eig: t.eig,
            })
            .unwrap_or_default();
        let s = Scenario {
            plant: PlantModel { a, b, w },
            sensors,
            graph,
            initial_beliefs,
            true_x0: Vector::from_vec(self.init.true_x0.clone()),
            horizon: self.run.horizon,
            seed: self.run.seed,
            max_gen: self.run.max_gen.unwrap_or(dg),
            max_con: self.run.max_con.unwrap_or(dc),
            tolerances,
        };
        s.validate()?;
        Ok(s)
    }

    /// File form of a scenario; every initial belief is written explicitly.
    pub fn from_scenario(s: &Scenario) -> Self {
        let boxspec = |b: &Hyperbox| BoxSpec {
            lo: b.lower.clone(),
            hi: b.upper.clone(),
        };
        Self {
            plant: PlantSection {
                a: mat_to_rows(&s.plant.a),
                b: mat_to_rows(&s.plant.b),
                w: boxspec(&s.plant.w),
            },
            sensors: s
                .sensors
                .iter()
                .map(|sn| SensorSection {
                    id: sn.id.0,
                    c: (sn.num_outputs() > 0).then(|| mat_to_rows(&sn.c)),
                    v: (sn.num_outputs() > 0).then(|| boxspec(&sn.v)),
                })
                .collect(),
            graph: GraphSection {
                edges: s.graph.edges().map(|(a, b)| [a.0, b.0]).collect(),
            },
            init: InitSection {
                true_x0: s.true_x0.iter().copied().collect(),
                default: None,
                beliefs: s
                    .initial_beliefs
                    .iter()
                    .enumerate()
                    .map(|(k, z)| BeliefOverride {
                        sensor: k + 1,
                        bbox: None,
                        cz: Some(z.clone()),
                    })
                    .collect(),
            },
            run: RunSection {
                horizon: s.horizon,
                seed: s.seed,
                max_gen: Some(s.max_gen),
                max_con: Some(s.max_con),
                tolerances: Some(TolSection {
                    rank: s.tolerances.rank,
                    eig: s.tolerances.eig,
                }),
            },
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, LoadError> {
    ScenarioFile::parse(text)?.build()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError::new("IO", format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn scenario_to_toml(s: &Scenario) -> String {
    ScenarioFile::from_scenario(s).to_toml()
}

/// The bundled 12-sensor reference network.
pub const REFERENCE_SCENARIO: &str = include_str!("../scenarios/reference_12_sensor.toml");

pub fn reference_scenario() -> Scenario {
    parse_scenario(REFERENCE_SCENARIO).expect("bundled scenario is valid")
}
