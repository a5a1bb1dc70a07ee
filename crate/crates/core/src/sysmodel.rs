//! Plant and sensor models, scenarios, and ground-truth simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, invalid, Result, ScenarioIssue};
use crate::graph::{SensorGraph, SensorId, SourceComponent};
use crate::linalg::{vstack, Mat, Vector};
use crate::setops::{ConstrainedZonotope, Hyperbox, Strip};

/// `x_{k+1} = A x_k + B w_k` with `w_k ∈ W`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: Mat,
    pub b: Mat,
    pub w: Hyperbox,
}

impl PlantModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `B W` as a constrained zonotope.
    pub fn noise_set(&self) -> ConstrainedZonotope {
        let w = self.w.to_cz();
        w.linear_map(&self.b).expect("B columns match W by validation")
    }
}

/// `y_k^i = C_i x_k + v_k^i` with `v_k^i ∈ V_i`. A sensor with no rows in
/// `C_i` takes no measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub id: SensorId,
    pub c: Mat,
    pub v: Hyperbox,
}

impl SensorModel {
    pub fn num_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn strip(&self, y: &Vector) -> Result<Strip> {
        Strip::new(self.c.clone(), y.clone(), self.v.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative singular-value threshold for rank decisions.
    pub rank: f64,
    /// Distance from the unit circle below which `|λ| = 1`.
    pub eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank: 1e-9, eig: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantModel,
    pub sensors: Vec<SensorModel>,
    pub graph: SensorGraph,
    /// Initial prior belief per sensor, indexed by `SensorId::index`.
    pub initial_beliefs: Vec<ConstrainedZonotope>,
    pub true_x0: Vector,
    pub horizon: usize,
    pub seed: u64,
    pub max_gen: usize,
    pub max_con: usize,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.plant.dim()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn sensor(&self, i: SensorId) -> &SensorModel {
        &self.sensors[i.index()]
    }

    /// Default reduction budget `(20 n, 10 n)`.
    pub fn default_budget(n: usize) -> (usize, usize) {
        (20 * n, 10 * n)
    }

    /// Checks every structural invariant: shapes, bounded boxes, invertible
    /// `A`, sensor ids and non-empty initial beliefs.
    pub fn validate(&self) -> Result<()> {
        let n = self.plant.a.nrows();
        let dim = |what: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(invalid(
                    ScenarioIssue::DimMismatch,
                    format!("{what}: expected {expected}, found {found}"),
                ))
            }
        };
        dim("A columns", n, self.plant.a.ncols())?;
        dim("B rows", n, self.plant.b.nrows())?;
        dim("W dimension", self.plant.b.ncols(), self.plant.w.dim())?;
        check_finite("A", self.plant.a.iter())?;
        check_finite("B", self.plant.b.iter())?;
        check_box("W", &self.plant.w)?;
        if n == 0 {
            return Err(invalid(ScenarioIssue::DimMismatch, "state dimension is zero"));
        }
        let sv = self.plant.a.clone().svd(false, false).singular_values;
        if sv.min() <= self.tolerances.rank * sv.max().max(1.0) {
            return Err(invalid(
                ScenarioIssue::SingularA,
                format!("A is singular (smallest singular value {:e})", sv.min()),
            ));
        }
        dim("sensor count vs graph", self.graph.num_sensors(), self.sensors.len())?;
        for (k, s) in self.sensors.iter().enumerate() {
            if s.id != SensorId::from_index(k) {
                return Err(invalid(
                    ScenarioIssue::BadGraph,
                    format!("sensor at position {} has id {}, expected {}", k + 1, s.id, k + 1),
                ));
            }
            dim("sensor C columns", n, s.c.ncols())?;
            dim("sensor V dimension", s.c.nrows(), s.v.dim())?;
            check_finite("C", s.c.iter())?;
            check_box("V", &s.v)?;
        }
        dim("initial belief count", self.sensors.len(), self.initial_beliefs.len())?;
        for (k, b) in self.initial_beliefs.iter().enumerate() {
            dim("initial belief dimension", n, b.dim())?;
            check_finite(
                "initial belief",
                b.center()
                    .iter()
                    .chain(b.generators().iter())
                    .chain(b.con_a().iter())
                    .chain(b.con_b().iter()),
            )?;
            if b.is_empty()? {
                return Err(invalid(
                    ScenarioIssue::BadValue,
                    format!("initial belief of sensor {} is empty", k + 1),
                ));
            }
        }
        dim("true_x0", n, self.true_x0.len())?;
        if self.max_gen < n {
            return Err(invalid(
                ScenarioIssue::BadValue,
                format!("max_gen {} is below the state dimension {n}", self.max_gen),
            ));
        }
        if !(self.tolerances.rank > 0.0 && self.tolerances.eig > 0.0) {
            return Err(invalid(ScenarioIssue::BadValue, "tolerances must be positive"));
        }
        Ok(())
    }
}

fn check_finite<'a>(what: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(
            ScenarioIssue::BadValue,
            format!("{what} has a non-finite entry"),
        ))
    }
}

fn check_box(what: &str, b: &Hyperbox) -> Result<()> {
    if !b.is_bounded() {
        return Err(invalid(
            ScenarioIssue::UnboundedBox,
            format!("{what} is not a bounded box"),
        ));
    }
    if (0..b.dim()).any(|j| b.lower[j] > b.upper[j]) {
        return Err(invalid(ScenarioIssue::BadValue, format!("{what} has lower > upper")));
    }
    Ok(())
}

/// One realization of the plant and every sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0..x_K`
    pub states: Vec<Vector>,
    /// `w_0..w_{K-1}`
    pub process_noises: Vec<Vector>,
    /// `measurements[k][i]` is `y_k` of the sensor with index `i`.
    pub measurements: Vec<Vec<Vector>>,
    pub measurement_noises: Vec<Vec<Vector>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn measurement(&self, k: usize, i: SensorId) -> &Vector {
        &self.measurements[k][i.index()]
    }

    /// Rebuilds states and measurements from stored noises.
    pub fn replay(s: &Scenario, process_noises: Vec<Vector>, measurement_noises: Vec<Vec<Vector>>) -> Result<Self> {
        check_dim(
            "measurement noise steps",
            process_noises.len() + 1,
            measurement_noises.len(),
        )?;
        let mut states = Vec::with_capacity(measurement_noises.len());
        let mut x = s.true_x0.clone();
        for w in &process_noises {
            let next = &s.plant.a * &x + &s.plant.b * w;
            states.push(std::mem::replace(&mut x, next));
        }
        states.push(x);
        let measurements = states
            .iter()
            .zip(&measurement_noises)
            .map(|(x, vs)| s.sensors.iter().zip(vs).map(|(sensor, v)| &sensor.c * x + v).collect())
            .collect();
        Ok(Self {
            states,
            process_noises,
            measurements,
            measurement_noises,
        })
    }
}

fn draw(rng: &mut ChaCha8Rng, b: &Hyperbox) -> Vector {
    Vector::from_fn(b.dim(), |j, _| {
        let u: f64 = rng.random();
        b.lower[j] + (b.upper[j] - b.lower[j]) * u
    })
}

/// Simulates `K` steps with noises uniform over their boxes. Draw order is
/// `w_0, v_0^1..v_0^N, w_1, ...`, all from one stream seeded by the scenario.
pub fn simulate_truth(s: &Scenario) -> Result<Trajectory> {
    for (k, b) in s.initial_beliefs.iter().enumerate() {
        if !b.contains_point(&s.true_x0)? {
            return Err(invalid(
                ScenarioIssue::InitialStateOutside,
                format!("true initial state is outside the initial belief of sensor {}", k + 1),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut process_noises = Vec::with_capacity(s.horizon);
    let mut measurement_noises = Vec::with_capacity(s.horizon + 1);
    for k in 0..=s.horizon {
        if k < s.horizon {
            process_noises.push(draw(&mut rng, &s.plant.w));
        }
        measurement_noises.push(s.sensors.iter().map(|sn| draw(&mut rng, &sn.v)).collect());
    }
    Trajectory::replay(s, process_noises, measurement_noises)
}

/// Stacks `C_i` over the component's members in ascending id order.
pub fn joint_measurement_matrix(s: &Scenario, c: &SourceComponent) -> Mat {
    let parts: Vec<&Mat> = c.vertices.iter().map(|&i| &s.sensor(i).c).collect();
    vstack(&parts, s.dim())
}
