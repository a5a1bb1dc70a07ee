//! Synchronous predict / update / fuse rounds across the network.
//!
//! Every round reads only the previous round's fused beliefs, so all local
//! posteriors of step `k` exist before any sensor fuses. Fusion intersects a
//! sensor's own posterior with its in-neighbours' posteriors of the same step.

use crate::error::{DsmfError, Result};
use crate::graph::SensorId;
use crate::linalg::Vector;
use crate::setops::{ConstrainedZonotope, Hyperbox};
use crate::sysmodel::{PlantModel, Scenario, SensorModel, Trajectory};

/// Which sets a run keeps in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    /// Prior, local posterior and fused belief of every (sensor, step).
    Full,
    /// Fused beliefs only.
    Fused,
    /// Hulls and sizes only.
    StatsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    /// `None` runs without any order reduction; sets then grow with every
    /// round and the mode is meant for short verification horizons.
    pub budget: Option<(usize, usize)>,
    pub retention: Retention,
    /// Compute the interval hull of each fused belief (also detects emptiness).
    pub hulls: bool,
    /// Record whether the true state lies in each fused belief.
    pub check_truth: bool,
}

impl FilterOptions {
    /// Reduced run with the scenario's budget, keeping statistics only.
    pub fn reduced(s: &Scenario) -> Self {
        Self {
            budget: Some((s.max_gen, s.max_con)),
            retention: Retention::StatsOnly,
            hulls: true,
            check_truth: true,
        }
    }

    /// Unreduced run keeping every set, for the outer-bound checks.
    pub fn exact() -> Self {
        Self {
            budget: None,
            retention: Retention::Full,
            hulls: false,
            check_truth: false,
        }
    }
}

/// What a run recorded for one sensor at one step. Every field is empty for
/// sensors left out of a subset run.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStep {
    pub prior: Option<ConstrainedZonotope>,
    pub posterior: Option<ConstrainedZonotope>,
    pub fused: Option<ConstrainedZonotope>,
    pub hull: Option<Hyperbox>,
    pub truth_inside: Option<bool>,
    pub generators: usize,
    pub constraints: usize,
}

impl SensorStep {
    fn skipped() -> Self {
        Self {
            prior: None,
            posterior: None,
            fused: None,
            hull: None,
            truth_inside: None,
            generators: 0,
            constraints: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefHistory {
    /// `steps[k][i]` for step `k` and sensor index `i`.
    pub steps: Vec<Vec<SensorStep>>,
    pub options: FilterOptions,
}

impl BeliefHistory {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn step(&self, k: usize, i: SensorId) -> &SensorStep {
        &self.steps[k][i.index()]
    }

    pub fn fused(&self, k: usize, i: SensorId) -> Result<&ConstrainedZonotope> {
        self.step(k, i)
            .fused
            .as_ref()
            .ok_or_else(|| DsmfError::Precondition("fused beliefs were not retained".into()))
    }

    pub fn hull(&self, k: usize, i: SensorId) -> Result<&Hyperbox> {
        self.step(k, i)
            .hull
            .as_ref()
            .ok_or_else(|| DsmfError::Precondition("hulls were not computed".into()))
    }

    /// Widths of the fused hull of sensor `i` along the 0-based axis `dim` for every step.
    pub fn widths(&self, i: SensorId, dim: usize) -> Result<Vec<f64>> {
        (0..self.steps.len())
            .map(|k| self.hull(k, i).map(|h| h.upper[dim] - h.lower[dim]))
            .collect()
    }
}

/// `A b ⊕ B W`, reduced to `budget` when one is given.
pub fn predict(
    b: &ConstrainedZonotope,
    plant: &PlantModel,
    budget: Option<(usize, usize)>,
) -> Result<ConstrainedZonotope> {
    let next = b.linear_map(&plant.a)?.minkowski_sum(&plant.noise_set())?;
    match budget {
        Some((g, m)) => next.reduce(g, m),
        None => Ok(next),
    }
}

fn update_unchecked(prior: &ConstrainedZonotope, sensor: &SensorModel, y: &Vector) -> Result<ConstrainedZonotope> {
    if sensor.num_outputs() == 0 {
        return Ok(prior.clone());
    }
    prior.intersect_strip(&sensor.strip(y)?)
}

/// `prior ∩ {x : y - C x ∈ V}`; a sensor without outputs returns the prior.
pub fn local_update(prior: &ConstrainedZonotope, sensor: &SensorModel, y: &Vector) -> Result<ConstrainedZonotope> {
    let post = update_unchecked(prior, sensor, y)?;
    if post.is_empty()? {
        return Err(DsmfError::EmptyBelief {
            step: 0,
            sensor: sensor.id.0,
            stage: "local update",
            measurement: y.iter().copied().collect(),
        });
    }
    Ok(post)
}

fn fuse_unchecked(own: &ConstrainedZonotope, neighbors: &[&ConstrainedZonotope]) -> Result<ConstrainedZonotope> {
    let mut acc = own.clone();
    for nb in neighbors {
        acc = acc.intersect(nb)?;
    }
    Ok(acc)
}

/// Left-fold intersection of `own` with each neighbour, then reduction.
pub fn fuse(
    own: &ConstrainedZonotope,
    neighbors: &[&ConstrainedZonotope],
    budget: Option<(usize, usize)>,
) -> Result<ConstrainedZonotope> {
    let acc = fuse_unchecked(own, neighbors)?;
    if acc.is_empty()? {
        return Err(DsmfError::EmptySet("fusion"));
    }
    match budget {
        Some((g, m)) => acc.reduce(g, m),
        None => Ok(acc),
    }
}

/// Runs the filter over the whole trajectory.
pub fn run_dsmf(s: &Scenario, t: &Trajectory, opts: FilterOptions) -> Result<BeliefHistory> {
    run_dsmf_until(s, t, opts, t.horizon())
}

/// Runs steps `0..=last` only.
pub fn run_dsmf_until(s: &Scenario, t: &Trajectory, opts: FilterOptions, last: usize) -> Result<BeliefHistory> {
    let all: Vec<SensorId> = s.graph.sensors().collect();
    run_dsmf_subset(s, t, opts, last, &all)
}

/// Runs steps `0..=last` for `sensors` only. The subset must contain the
/// in-neighbors of each of its members; the other sensors get empty records.
pub fn run_dsmf_subset(
    s: &Scenario,
    t: &Trajectory,
    opts: FilterOptions,
    last: usize,
    sensors: &[SensorId],
) -> Result<BeliefHistory> {
    if last > t.horizon() {
        return Err(DsmfError::Precondition(format!(
            "requested step {last} beyond the trajectory horizon {}",
            t.horizon()
        )));
    }
    let n_s = s.num_sensors();
    let mut active = vec![false; n_s];
    for &i in sensors {
        if i.0 == 0 || i.0 > n_s {
            return Err(DsmfError::Precondition(format!("unknown sensor {i}")));
        }
        active[i.index()] = true;
    }
    for &i in sensors {
        if let Some(j) = s.graph.in_neighbors(i).iter().find(|j| !active[j.index()]) {
            return Err(DsmfError::Precondition(format!(
                "sensor {i} listens to {j}, which is not in the subset"
            )));
        }
    }
    // Leave room for the process-noise generators so prediction stays within budget.
    let fused_budget = opts.budget.map(|(g, m)| {
        let p = s.plant.b.ncols();
        if g >= 2 * s.dim() + p {
            (g - p, m)
        } else {
            (g, m)
        }
    });
    let mut carried: Vec<Option<ConstrainedZonotope>> = s
        .initial_beliefs
        .iter()
        .enumerate()
        .map(|(i, b)| active[i].then(|| b.clone()))
        .collect();
    let mut steps = Vec::with_capacity(last + 1);
    for k in 0..=last {
        let priors: Vec<Option<ConstrainedZonotope>> = if k == 0 {
            std::mem::take(&mut carried)
        } else {
            carried
                .iter()
                .map(|b| b.as_ref().map(|b| predict(b, &s.plant, opts.budget)).transpose())
                .collect::<Result<_>>()?
        };
        let posts: Vec<Option<ConstrainedZonotope>> = priors
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.as_ref()
                    .map(|p| update_unchecked(p, &s.sensors[i], &t.measurements[k][i]))
                    .transpose()
            })
            .collect::<Result<_>>()?;
        // Barrier: every posterior of round k exists before fusion starts.
        let mut row = Vec::with_capacity(n_s);
        let mut next = Vec::with_capacity(n_s);
        for (i, sensor) in s.sensors.iter().enumerate() {
            let (Some(prior), Some(post)) = (&priors[i], &posts[i]) else {
                row.push(SensorStep::skipped());
                next.push(None);
                continue;
            };
            let id = sensor.id;
            let nbs: Vec<&ConstrainedZonotope> = s
                .graph
                .in_neighbors(id)
                .iter()
                .map(|j| posts[j.index()].as_ref().expect("subset is closed under in-neighbors"))
                .collect();
            let exact = fuse_unchecked(post, &nbs)?;
            let empty = |e: DsmfError| -> Result<DsmfError> {
                match e {
                    DsmfError::EmptySet(_) => {
                        let stage = if post.is_empty()? { "local update" } else { "fusion" };
                        Ok(DsmfError::EmptyBelief {
                            step: k,
                            sensor: id.0,
                            stage,
                            measurement: t.measurements[k][i].iter().copied().collect(),
                        })
                    }
                    other => Ok(other),
                }
            };
            let (fused, hull) = match fused_budget {
                Some((g, m)) => match exact.reduce_with_hull(g, m) {
                    Ok(pair) => pair,
                    Err(e) => return Err(empty(e)?),
                },
                None => (exact, None),
            };
            let hull = match (opts.hulls, hull) {
                (false, _) => None,
                (true, Some(h)) => Some(h),
                (true, None) => match fused.interval_hull() {
                    Ok(h) => Some(h),
                    Err(e) => return Err(empty(e)?),
                },
            };
            let truth_inside = if opts.check_truth {
                let x = &t.states[k];
                Some(fused.contains_point_within(x, 1e-9 * (1.0 + x.amax()))?)
            } else {
                None
            };
            let keep_all = opts.retention == Retention::Full;
            row.push(SensorStep {
                prior: keep_all.then(|| prior.clone()),
                posterior: keep_all.then(|| post.clone()),
                fused: (opts.retention != Retention::StatsOnly).then(|| fused.clone()),
                hull,
                truth_inside,
                generators: fused.num_generators(),
                constraints: fused.num_constraints(),
            });
            next.push(Some(fused));
        }
        steps.push(row);
        carried = next;
    }
    Ok(BeliefHistory { steps, options: opts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SensorGraph;
    use crate::linalg::Mat;
    use crate::sysmodel::{simulate_truth, Tolerances};

    fn assert_box(h: &Hyperbox, lower: &[f64], upper: &[f64]) {
        for j in 0..lower.len() {
            assert!(
                (h.lower[j] - lower[j]).abs() < 1e-9 && (h.upper[j] - upper[j]).abs() < 1e-9,
                "{h:?}"
            );
        }
    }

    fn plant(a: Mat, b: Mat, w: f64) -> PlantModel {
        let p = b.ncols();
        PlantModel {
            a,
            b,
            w: Hyperbox::symmetric(p, w),
        }
    }

    #[test]
    fn predict_cases() {
        let b = Hyperbox::symmetric(2, 1.0).to_cz();
        let still = plant(Mat::identity(2, 2), Mat::zeros(2, 1), 1.0);
        assert_box(
            &predict(&b, &still, None).unwrap().interval_hull().unwrap(),
            &[-1.0, -1.0],
            &[1.0, 1.0],
        );
        let zero = PlantModel {
            a: Mat::zeros(2, 2),
            b: Mat::identity(2, 2),
            w: Hyperbox::symmetric(2, 0.0),
        };
        assert_box(
            &predict(&b, &zero, None).unwrap().interval_hull().unwrap(),
            &[0.0, 0.0],
            &[0.0, 0.0],
        );
    }

    #[test]
    fn update_cases() {
        let prior = Hyperbox::symmetric(2, 1.0).to_cz();
        let blind = SensorModel {
            id: SensorId(1),
            c: Mat::zeros(0, 2),
            v: Hyperbox::symmetric(0, 0.0),
        };
        assert_eq!(local_update(&prior, &blind, &Vector::zeros(0)).unwrap(), prior);
        let exact = SensorModel {
            id: SensorId(1),
            c: Mat::identity(2, 2),
            v: Hyperbox::symmetric(2, 0.0),
        };
        let y = Vector::from_vec(vec![0.3, -0.4]);
        assert_box(
            &local_update(&prior, &exact, &y).unwrap().interval_hull().unwrap(),
            &[0.3, -0.4],
            &[0.3, -0.4],
        );
        let clip = SensorModel {
            id: SensorId(1),
            c: Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            v: Hyperbox::symmetric(1, 0.25),
        };
        let h = local_update(&prior, &clip, &Vector::from_vec(vec![0.9]))
            .unwrap()
            .interval_hull()
            .unwrap();
        assert_box(&h, &[0.65, -1.0], &[1.0, 1.0]);
        let miss = local_update(&prior, &clip, &Vector::from_vec(vec![5.0]));
        assert!(matches!(miss, Err(DsmfError::EmptyBelief { .. })));
    }

    #[test]
    fn fuse_cases() {
        let own = Hyperbox::symmetric(2, 1.0).to_cz();
        assert_eq!(fuse(&own, &[], None).unwrap(), own);
        let same = fuse(&own, &[&own, &own], None).unwrap();
        assert_box(&same.interval_hull().unwrap(), &[-1.0, -1.0], &[1.0, 1.0]);
        let right = Hyperbox::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap().to_cz();
        assert_box(
            &fuse(&own, &[&right], None).unwrap().interval_hull().unwrap(),
            &[0.0, -1.0],
            &[1.0, 1.0],
        );
    }

    fn network(n_sensors: usize, edges: &[(usize, usize)], c: Mat, v: f64, w: f64) -> Scenario {
        let n = c.ncols();
        Scenario {
            plant: plant(Mat::identity(n, n) * 0.95, Mat::identity(n, n), w),
            sensors: (1..=n_sensors)
                .map(|i| SensorModel {
                    id: SensorId(i),
                    c: c.clone(),
                    v: Hyperbox::symmetric(c.nrows(), v),
                })
                .collect(),
            graph: SensorGraph::new(n_sensors, edges).unwrap(),
            initial_beliefs: vec![Hyperbox::symmetric(n, 10.0).to_cz(); n_sensors],
            true_x0: Vector::from_element(n, 0.5),
            horizon: 8,
            seed: 3,
            max_gen: 20 * n,
            max_con: 10 * n,
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn perfect_information_collapses_to_truth() {
        let s = network(1, &[], Mat::identity(2, 2), 0.0, 0.0);
        let t = simulate_truth(&s).unwrap();
        let h = run_dsmf(&s, &t, FilterOptions::reduced(&s)).unwrap();
        for k in 0..=t.horizon() {
            let x = &t.states[k];
            assert_box(h.hull(k, SensorId(1)).unwrap(), x.as_slice(), x.as_slice());
        }
    }

    #[test]
    fn symmetric_pair_gets_identical_beliefs() {
        let s = network(2, &[(1, 2), (2, 1)], Mat::from_row_slice(1, 2, &[1.0, 0.5]), 0.0, 0.5);
        let mut t = simulate_truth(&s).unwrap();
        // Identical sensors must also see identical measurements.
        for ys in &mut t.measurements {
            ys[1] = ys[0].clone();
        }
        let h = run_dsmf(&s, &t, FilterOptions::reduced(&s)).unwrap();
        for k in 0..=t.horizon() {
            assert_eq!(h.hull(k, SensorId(1)).unwrap(), h.hull(k, SensorId(2)).unwrap());
        }
    }

    #[test]
    fn beliefs_contain_truth_and_nest() {
        let s = network(
            3,
            &[(1, 2), (2, 3), (3, 1)],
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            0.5,
            0.2,
        );
        let t = simulate_truth(&s).unwrap();
        let mut opts = FilterOptions::reduced(&s);
        opts.retention = Retention::Full;
        let h = run_dsmf(&s, &t, opts).unwrap();
        for k in 0..=t.horizon() {
            for i in s.graph.sensors() {
                let st = h.step(k, i);
                assert_eq!(st.truth_inside, Some(true));
                let post_hull = st.posterior.as_ref().unwrap().interval_hull().unwrap();
                let prior_hull = st.prior.as_ref().unwrap().interval_hull().unwrap();
                let fused_exact = {
                    let nbs: Vec<_> = s
                        .graph
                        .in_neighbors(i)
                        .iter()
                        .map(|j| h.step(k, *j).posterior.clone().unwrap())
                        .collect();
                    let refs: Vec<_> = nbs.iter().collect();
                    fuse_unchecked(st.posterior.as_ref().unwrap(), &refs)
                        .unwrap()
                        .interval_hull()
                        .unwrap()
                };
                assert!(fused_exact.is_subset_of(&post_hull, 1e-9));
                assert!(post_hull.is_subset_of(&prior_hull, 1e-9));
            }
        }
    }

    #[test]
    fn unreduced_run_keeps_every_set() {
        let s = network(2, &[(1, 2)], Mat::from_row_slice(1, 2, &[0.0, 1.0]), 0.5, 0.2);
        let t = simulate_truth(&s).unwrap();
        let h = run_dsmf_until(&s, &t, FilterOptions::exact(), 3).unwrap();
        assert_eq!(h.horizon(), 3);
        let st = h.step(3, SensorId(2));
        assert!(st.prior.is_some() && st.posterior.is_some() && st.fused.is_some());
        assert!(st.hull.is_none());
        assert!(h.fused(3, SensorId(2)).unwrap().contains_point(&t.states[3]).unwrap());
    }
}
