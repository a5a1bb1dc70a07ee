//! Outer-bound constructs used to check unreduced filter runs: observation
//! information sets, state-evolution sets, the collective observation
//! information tower (COIT), and the decomposition-based bound on the
//! unobservable coordinates.
//!
//! Observation-information sets contain `ker C` and are never materialized;
//! membership is a small box-constrained feasibility problem. State-evolution
//! sets and `S̃` are bounded and are built as constrained zonotopes.

use std::cell::{OnceCell, RefCell};
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomp::{observability_decomposition, ObservabilityDecomposition};
use crate::error::{DsmfError, Result};
use crate::filter::{run_dsmf_subset, BeliefHistory, FilterOptions, Retention};
use crate::graph::{SensorId, SourceComponent};
use crate::linalg::{hstack, Mat, Vector};
use crate::lp::lp_feasible;
use crate::setops::ConstrainedZonotope;
use crate::sysmodel::{joint_measurement_matrix, Scenario, Trajectory};

/// Generator cap for materialized verification sets.
pub const GROWTH_CAP: usize = 5000;

/// Slack used when testing sampled boundary points for membership.
pub fn membership_eps(x: &Vector) -> f64 {
    1e-6 * (1.0 + x.amax())
}

/// Membership data for one `O_{k,r}^l`:
/// `x ∈ O  ⟺  ∃ z ∈ [-1,1]^d : coeffs z = base - M x`.
#[derive(Debug, Clone)]
struct ObsTerm {
    m: Mat,
    coeffs: Mat,
    base: Vector,
}

impl ObsTerm {
    fn contains(&self, x: &Vector, eps: f64) -> Result<bool> {
        let rhs = &self.base - &self.m * x;
        let q = rhs.len();
        if q == 1 {
            let reach: f64 =
                self.coeffs.iter().map(|v| v.abs()).sum::<f64>() + eps * self.m.iter().map(|v| v.abs()).sum::<f64>();
            return Ok(rhs[0].abs() <= reach + 1e-9 * (1.0 + rhs[0].abs()));
        }
        let a = hstack(&[&self.coeffs, &(&self.m * eps)], q);
        Ok(lp_feasible(&a, &rhs)?.is_some())
    }

    /// Largest possible deviation of the left-hand side, per row.
    fn reach(&self) -> f64 {
        (0..self.coeffs.nrows())
            .map(|r| self.coeffs.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Which parts of a check are deliberately corrupted to test the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FaultInjection {
    /// Shift the measurement of one observation-information term.
    pub corrupt_measurement: bool,
    /// Contract `Aobar` and drop the `A21` and `Bobar` terms of `S̃`.
    pub contract_decomposition: bool,
}

impl FaultInjection {
    pub fn all() -> Self {
        Self {
            corrupt_measurement: true,
            contract_decomposition: true,
        }
    }

    pub fn any(&self) -> bool {
        self.corrupt_measurement || self.contract_decomposition
    }
}

/// Sampled fused-belief points keyed by (k, sensor, count, seed).
type SampleCache = BTreeMap<(usize, SensorId, usize, u64), Vec<Vector>>;

/// Membership oracles bound to one scenario and trajectory.
pub struct Analyzer<'a> {
    s: &'a Scenario,
    t: &'a Trajectory,
    a_pows: Vec<Mat>,
    a_inv_pows: Vec<Mat>,
    evo: Vec<Vec<OnceCell<ConstrainedZonotope>>>,
    samples: RefCell<SampleCache>,
}

impl<'a> Analyzer<'a> {
    /// Prepares oracles for steps `0..=kmax`.
    pub fn new(s: &'a Scenario, t: &'a Trajectory, kmax: usize) -> Result<Self> {
        if kmax > t.horizon() {
            return Err(DsmfError::Precondition(format!(
                "step {kmax} is beyond the trajectory horizon {}",
                t.horizon()
            )));
        }
        let a = &s.plant.a;
        let n = a.nrows();
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| DsmfError::Precondition("A is singular".into()))?;
        let mut a_pows = vec![Mat::identity(n, n)];
        let mut a_inv_pows = vec![Mat::identity(n, n)];
        for j in 1..=kmax {
            a_pows.push(a * &a_pows[j - 1]);
            a_inv_pows.push(&a_inv * &a_inv_pows[j - 1]);
        }
        let evo = (0..s.num_sensors())
            .map(|_| (0..=kmax).map(|_| OnceCell::new()).collect())
            .collect();
        Ok(Self {
            s,
            t,
            a_pows,
            a_inv_pows,
            evo,
            samples: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn kmax(&self) -> usize {
        self.a_pows.len() - 1
    }

    fn check_step(&self, k: usize) -> Result<()> {
        if k > self.kmax() {
            return Err(DsmfError::Precondition(format!(
                "step {k} is beyond the prepared range 0..={}",
                self.kmax()
            )));
        }
        Ok(())
    }

    /// `None` when sensor `l` takes no measurements (the set is the whole space).
    fn obs_term(&self, k: usize, r: usize, l: SensorId, y_shift: f64) -> Option<ObsTerm> {
        let sensor = self.s.sensor(l);
        let q = sensor.num_outputs();
        if q == 0 {
            return None;
        }
        let plant = &self.s.plant;
        let m = &sensor.c * &self.a_inv_pows[k - r];
        let w_mid = plant.w.midpoint();
        let w_rad = Mat::from_diagonal(&plant.w.radius());
        let mut blocks = Vec::with_capacity(k - r + 1);
        let mut base = self.t.measurement(r, l) - sensor.v.midpoint();
        for tau in r..k {
            let mb = &m * &self.a_pows[k - 1 - tau] * &plant.b;
            base += &mb * &w_mid;
            blocks.push(-(&mb * &w_rad));
        }
        blocks.push(Mat::from_diagonal(&sensor.v.radius()));
        let refs: Vec<&Mat> = blocks.iter().collect();
        let coeffs = hstack(&refs, q);
        base[0] += y_shift;
        Some(ObsTerm { m, coeffs, base })
    }

    /// `x ∈ O_{k,r}^l`, up to `eps` slack on `x`.
    pub fn obs_info_membership(&self, x: &Vector, k: usize, r: usize, l: SensorId, eps: f64) -> Result<bool> {
        self.check_step(k)?;
        if r > k {
            return Err(DsmfError::Precondition(format!("r = {r} exceeds k = {k}")));
        }
        match self.obs_term(k, r, l, 0.0) {
            Some(term) => term.contains(x, eps),
            None => Ok(true),
        }
    }

    /// `E_k^l = A^k B_l^-(x_0) ⊕ Σ A^{k-1-τ} B W`, unreduced.
    pub fn state_evo_set(&self, k: usize, l: SensorId) -> Result<&ConstrainedZonotope> {
        self.check_step(k)?;
        if let Some(z) = self.evo[l.index()][k].get() {
            return Ok(z);
        }
        let z = if k == 0 {
            self.s.initial_beliefs[l.index()].clone()
        } else {
            let prev = self.state_evo_set(k - 1, l)?;
            prev.linear_map(&self.s.plant.a)?
                .minkowski_sum(&self.s.plant.noise_set())?
        };
        if z.num_generators() > GROWTH_CAP {
            return Err(DsmfError::GrowthCap {
                generators: z.num_generators(),
                cap: GROWTH_CAP,
            });
        }
        Ok(self.evo[l.index()][k].get_or_init(|| z))
    }

    pub fn state_evo_membership(&self, x: &Vector, k: usize, l: SensorId, eps: f64) -> Result<bool> {
        self.state_evo_set(k, l)?.contains_point_within(x, eps)
    }

    /// `(r, l)` pairs whose observation sets make up `C_k^(t)`.
    pub fn coit_terms(&self, k: usize, c: &SourceComponent) -> Vec<(usize, SensorId)> {
        let Some(last) = (k + 1).checked_sub(c.rho_tilde) else {
            return Vec::new();
        };
        let last = last.min(k);
        (0..=last)
            .flat_map(|r| c.vertices.iter().map(move |&l| (r, l)))
            .collect()
    }

    /// `x ∈ C_k^(t)`: the conjunction of every COIT observation term.
    pub fn coit_membership(&self, x: &Vector, k: usize, c: &SourceComponent, eps: f64) -> Result<bool> {
        self.check_step(k)?;
        for (r, l) in self.coit_terms(k, c) {
            if !self.obs_info_membership(x, k, r, l, eps)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Picks the observation term to corrupt among `candidates`, preferring
    /// the latest measurement (no process noise in between).
    fn fault_target(&self, k: usize, candidates: &[(usize, SensorId)]) -> Option<(usize, SensorId, f64)> {
        candidates
            .iter()
            .filter(|(_, l)| self.s.sensor(*l).num_outputs() > 0)
            .max_by_key(|(r, l)| (*r, std::cmp::Reverse(*l)))
            .map(|&(r, l)| {
                let reach = self.obs_term(k, r, l, 0.0).map_or(0.0, |t| t.reach());
                (r, l, 2.0 * reach + 1.0)
            })
    }

    /// Samples the fused belief of sensor `i` at step `k` and checks every
    /// term of the intersection-based outer bound.
    pub fn verify_prop1(
        &self,
        h: &BeliefHistory,
        k: usize,
        i: SensorId,
        samples: usize,
        seed: u64,
        fault: FaultInjection,
    ) -> Result<BoundCheckReport> {
        self.check_step(k)?;
        let g = &self.s.graph;
        let mut o_pairs = Vec::new();
        for r in 0..=k {
            for l in g.m_set(i, k - r) {
                o_pairs.push((r, l));
            }
        }
        let target = fault
            .corrupt_measurement
            .then(|| self.fault_target(k, &o_pairs))
            .flatten();
        let mut terms: Vec<(String, Option<ObsTerm>)> = Vec::with_capacity(o_pairs.len());
        for &(r, l) in &o_pairs {
            let shift = match target {
                Some((tr, tl, d)) if tr == r && tl == l => d,
                _ => 0.0,
            };
            terms.push((format!("O[k={k},r={r},l={l}]"), self.obs_term(k, r, l, shift)));
        }
        let e_sensors: Vec<SensorId> = g.m_set(i, k).into_iter().collect();
        for &l in &e_sensors {
            self.state_evo_set(k, l)?;
        }
        let points = self.sample(h, k, i, samples, seed)?;
        let mut report = BoundCheckReport::new("prop1", k, i, None, points.len(), fault);
        for x in &points {
            let eps = membership_eps(x);
            let mut failed = false;
            for (label, term) in &terms {
                if let Some(term) = term {
                    if !term.contains(x, eps)? {
                        *report.term_failures.entry(label.clone()).or_default() += 1;
                        failed = true;
                    }
                }
            }
            for &l in &e_sensors {
                if !self.state_evo_membership(x, k, l, eps)? {
                    *report.term_failures.entry(format!("E[k={k},l={l}]")).or_default() += 1;
                    failed = true;
                }
            }
            report.violations += usize::from(failed);
        }
        Ok(report)
    }

    /// `S̃_k^i`, built in the unobservable coordinates of component `c`.
    pub fn prop2_tilde_s(
        &self,
        h: &BeliefHistory,
        d: &ObservabilityDecomposition,
        i: SensorId,
        k: usize,
        fault: FaultInjection,
    ) -> Result<ConstrainedZonotope> {
        self.check_step(k)?;
        let contract = fault.contract_decomposition;
        let aobar = if contract { &d.aobar * 0.5 } else { d.aobar.clone() };
        let nb = d.n_unobs();
        let coupling = &d.a21 * d.p_o();
        let noise = self.s.plant.w.to_cz().linear_map(&d.bobar)?;
        let negligible = |m: &Mat| m.amax() <= 1e-12;
        let mut acc = self.s.initial_beliefs[i.index()].linear_map(&d.p_obar())?;
        for j in 0..k {
            acc = acc.linear_map(&aobar)?;
            if !contract && !negligible(&coupling) {
                acc = acc.minkowski_sum(&h.fused(j, i)?.linear_map(&coupling)?)?;
            }
            if !contract && !negligible(&d.bobar) {
                acc = acc.minkowski_sum(&noise)?;
            }
            if acc.num_generators() > GROWTH_CAP {
                return Err(DsmfError::GrowthCap {
                    generators: acc.num_generators(),
                    cap: GROWTH_CAP,
                });
            }
        }
        debug_assert_eq!(acc.dim(), nb);
        Ok(acc)
    }

    /// Samples the fused belief of sensor `i` at step `k > ρ̃` and checks COIT
    /// membership and `P_ō x ∈ S̃_k^i`.
    #[allow(clippy::too_many_arguments)]
    pub fn verify_prop2(
        &self,
        h: &BeliefHistory,
        c: &SourceComponent,
        d: &ObservabilityDecomposition,
        i: SensorId,
        k: usize,
        samples: usize,
        seed: u64,
        fault: FaultInjection,
    ) -> Result<BoundCheckReport> {
        self.check_step(k)?;
        if k <= c.rho_tilde {
            return Err(DsmfError::Precondition(format!(
                "the decomposition bound needs k > {}, got k = {k}",
                c.rho_tilde
            )));
        }
        if !c.contains(i) {
            return Err(DsmfError::Precondition(format!(
                "sensor {i} is not in component {}",
                c.index
            )));
        }
        let pairs = self.coit_terms(k, c);
        let target = fault
            .corrupt_measurement
            .then(|| self.fault_target(k, &pairs))
            .flatten();
        let terms: Vec<(String, ObsTerm)> = pairs
            .iter()
            .filter_map(|&(r, l)| {
                let shift = match target {
                    Some((tr, tl, dd)) if tr == r && tl == l => dd,
                    _ => 0.0,
                };
                self.obs_term(k, r, l, shift)
                    .map(|t| (format!("COIT O[k={k},r={r},l={l}]"), t))
            })
            .collect();
        let tilde_s = self.prop2_tilde_s(h, d, i, k, fault)?;
        let p_obar = d.p_obar();
        let points = self.sample(h, k, i, samples, seed)?;
        let mut report = BoundCheckReport::new("prop2", k, i, Some(c.index), points.len(), fault);
        for x in &points {
            let eps = membership_eps(x);
            let mut failed = false;
            for (label, term) in &terms {
                if !term.contains(x, eps)? {
                    *report.term_failures.entry(label.clone()).or_default() += 1;
                    failed = true;
                }
            }
            let z = &p_obar * x;
            if d.n_unobs() > 0 && !tilde_s.contains_point_within(&z, eps)? {
                *report.term_failures.entry(format!("S~[k={k},i={i}]")).or_default() += 1;
                failed = true;
            }
            report.violations += usize::from(failed);
        }
        Ok(report)
    }

    /// Samples of the fused belief, shared between the two checks. The cache
    /// assumes one analyzer is only ever used with one history.
    fn sample(&self, h: &BeliefHistory, k: usize, i: SensorId, samples: usize, seed: u64) -> Result<Vec<Vector>> {
        let key = (k, i, samples, seed);
        if let Some(points) = self.samples.borrow().get(&key) {
            return Ok(points.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ i.0 as u64);
        let points = h.fused(k, i)?.sample_points(&mut rng, samples)?;
        self.samples.borrow_mut().insert(key, points.clone());
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub construct: &'static str,
    pub k: usize,
    pub sensor: SensorId,
    pub component: Option<usize>,
    pub checked: usize,
    pub violations: usize,
    /// Failing sample count per term.
    pub term_failures: BTreeMap<String, usize>,
    pub fault: FaultInjection,
}

impl BoundCheckReport {
    fn new(
        construct: &'static str,
        k: usize,
        sensor: SensorId,
        component: Option<usize>,
        checked: usize,
        fault: FaultInjection,
    ) -> Self {
        Self {
            construct,
            k,
            sensor,
            component,
            checked,
            violations: 0,
            term_failures: BTreeMap::new(),
            fault,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrowthFlag {
    Bounded,
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessEntry {
    pub sensor: SensorId,
    pub dim: usize,
    pub early_max: f64,
    pub tail_max: f64,
    pub ratio: f64,
    pub flag: GrowthFlag,
}

/// Tail-to-early ratio of the largest hull width per (sensor, dimension).
/// Windows are inclusive step ranges; `dim` in the output is 1-based.
pub fn boundedness_diagnostic(
    h: &BeliefHistory,
    early: (usize, usize),
    tail: (usize, usize),
    threshold: f64,
) -> Result<Vec<BoundednessEntry>> {
    let k_end = h.horizon();
    if early.0 > early.1 || tail.0 > tail.1 || early.1 > k_end || tail.1 > k_end {
        return Err(DsmfError::Precondition(format!(
            "windows {early:?} and {tail:?} must be ordered and within 0..={k_end}"
        )));
    }
    let n_s = h.steps[0].len();
    let n = h.hull(0, SensorId(1))?.dim();
    let mut out = Vec::with_capacity(n_s * n);
    for i in (0..n_s).map(SensorId::from_index) {
        for dim in 0..n {
            let widths = h.widths(i, dim)?;
            let max_in = |(a, b): (usize, usize)| widths[a..=b].iter().copied().fold(0.0, f64::max);
            let early_max = max_in(early);
            let tail_max = max_in(tail);
            let ratio = if early_max > 0.0 {
                tail_max / early_max
            } else if tail_max > 0.0 {
                f64::INFINITY
            } else {
                1.0
            };
            out.push(BoundednessEntry {
                sensor: i,
                dim: dim + 1,
                early_max,
                tail_max,
                ratio,
                flag: if ratio > threshold {
                    GrowthFlag::Growing
                } else {
                    GrowthFlag::Bounded
                },
            });
        }
    }
    Ok(out)
}

/// Outcome of running both outer-bound checks over a whole network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSummary {
    pub kmax: usize,
    pub samples: usize,
    pub fault: FaultInjection,
    pub sensors: Vec<SensorId>,
    pub prop1_checked: usize,
    pub prop1_violations: usize,
    pub prop2_checked: usize,
    pub prop2_violations: usize,
    pub reports: Vec<BoundCheckReport>,
}

impl VerificationSummary {
    pub fn violations(&self) -> usize {
        self.prop1_violations + self.prop2_violations
    }
}

/// Runs the unreduced filter on the source-component sensors up to `kmax`
/// and checks the intersection bound at every step and the decomposition
/// bound at every step past each component's `ρ̃`.
pub fn verify_network(
    s: &Scenario,
    t: &Trajectory,
    kmax: usize,
    samples: usize,
    seed: u64,
    fault: FaultInjection,
) -> Result<VerificationSummary> {
    let comps = s.graph.source_components();
    let mut sensors: Vec<SensorId> = comps.iter().flat_map(|c| c.vertices.iter().copied()).collect();
    sensors.sort();
    let opts = FilterOptions {
        budget: None,
        retention: Retention::Fused,
        hulls: false,
        check_truth: false,
    };
    let h = run_dsmf_subset(s, t, opts, kmax, &sensors)?;
    let an = Analyzer::new(s, t, kmax)?;
    let mut summary = VerificationSummary {
        kmax,
        samples,
        fault,
        sensors: sensors.clone(),
        prop1_checked: 0,
        prop1_violations: 0,
        prop2_checked: 0,
        prop2_violations: 0,
        reports: Vec::new(),
    };
    for k in 0..=kmax {
        for &i in &sensors {
            let rep = an.verify_prop1(&h, k, i, samples, seed, fault)?;
            summary.prop1_checked += rep.checked;
            summary.prop1_violations += rep.violations;
            summary.reports.push(rep);
        }
    }
    for c in &comps {
        let cj = joint_measurement_matrix(s, c);
        let d = observability_decomposition(&s.plant.a, &s.plant.b, &cj, s.tolerances.rank)?;
        for k in c.rho_tilde + 1..=kmax {
            for &i in &c.vertices {
                let rep = an.verify_prop2(&h, c, &d, i, k, samples, seed, fault)?;
                summary.prop2_checked += rep.checked;
                summary.prop2_violations += rep.violations;
                summary.reports.push(rep);
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{FilterOptions, SensorStep};
    use crate::graph::SensorGraph;
    use crate::setops::Hyperbox;
    use crate::sysmodel::{simulate_truth, PlantModel, SensorModel, Tolerances};

    fn scenario(c: Mat, v: f64, w: f64, a: Mat) -> Scenario {
        let n = a.nrows();
        Scenario {
            plant: PlantModel {
                a,
                b: Mat::identity(n, n),
                w: Hyperbox::symmetric(n, w),
            },
            sensors: vec![SensorModel {
                id: SensorId(1),
                v: Hyperbox::symmetric(c.nrows(), v),
                c,
            }],
            graph: SensorGraph::new(1, &[]).unwrap(),
            initial_beliefs: vec![Hyperbox::symmetric(n, 5.0).to_cz()],
            true_x0: Vector::from_vec(vec![0.5; n]),
            horizon: 6,
            seed: 11,
            max_gen: 20 * n,
            max_con: 10 * n,
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn exact_sensor_pins_the_state() {
        let s = scenario(Mat::identity(2, 2), 0.0, 0.3, Mat::identity(2, 2) * 0.9);
        let t = simulate_truth(&s).unwrap();
        let an = Analyzer::new(&s, &t, 3).unwrap();
        let y = t.measurement(2, SensorId(1)).clone();
        assert!(an.obs_info_membership(&y, 2, 2, SensorId(1), 0.0).unwrap());
        let off = &y + Vector::from_vec(vec![1e-3, 0.0]);
        assert!(!an.obs_info_membership(&off, 2, 2, SensorId(1), 0.0).unwrap());
    }

    #[test]
    fn blind_sensor_sees_everything() {
        let s = scenario(Mat::zeros(0, 2), 0.0, 0.3, Mat::identity(2, 2));
        let t = simulate_truth(&s).unwrap();
        let an = Analyzer::new(&s, &t, 2).unwrap();
        let far = Vector::from_vec(vec![1e6, -1e6]);
        assert!(an.obs_info_membership(&far, 2, 0, SensorId(1), 0.0).unwrap());
    }

    /// `O_{r+1,r} = A X_r ⊕ B W` checked against an explicit construction on a grid.
    #[test]
    fn one_step_observation_set_matches_grid_oracle() {
        let a = Mat::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 1.1]);
        let s = scenario(Mat::from_row_slice(1, 2, &[1.0, -0.5]), 0.4, 0.3, a.clone());
        let t = simulate_truth(&s).unwrap();
        let an = Analyzer::new(&s, &t, 3).unwrap();
        let y = t.measurement(1, SensorId(1))[0];
        // A X_1 ⊕ W, with X_1 clipped to a large window, as an explicit CZ.
        let window = Hyperbox::symmetric(2, 50.0).to_cz();
        let strip = s.sensors[0].strip(&Vector::from_vec(vec![y])).unwrap();
        let explicit = window
            .intersect_strip(&strip)
            .unwrap()
            .linear_map(&a)
            .unwrap()
            .minkowski_sum(&s.plant.noise_set())
            .unwrap();
        let center = &a * &t.states[1];
        let mut checked = 0;
        for gx in -10..=10 {
            for gy in -10..=10 {
                let x = &center + Vector::from_vec(vec![0.25 * gx as f64, 0.25 * gy as f64]);
                let lp = an.obs_info_membership(&x, 2, 1, SensorId(1), 0.0).unwrap();
                let ex = explicit.contains_point(&x).unwrap();
                let margin = explicit.contains_point_within(&x, 1e-6).unwrap() != ex;
                if !margin {
                    assert_eq!(lp, ex, "x = {x:?}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 400);
    }

    #[test]
    fn state_evolution_cases() {
        let s = scenario(Mat::identity(2, 2), 0.5, 0.0, Mat::identity(2, 2));
        let t = simulate_truth(&s).unwrap();
        let an = Analyzer::new(&s, &t, 4).unwrap();
        let x = Vector::from_vec(vec![4.9, -4.9]);
        assert!(an.state_evo_membership(&x, 0, SensorId(1), 0.0).unwrap());
        assert!(an.state_evo_membership(&x, 4, SensorId(1), 0.0).unwrap());
        assert!(!an
            .state_evo_membership(&Vector::from_vec(vec![5.1, 0.0]), 4, SensorId(1), 0.0)
            .unwrap());
    }

    #[test]
    fn truth_lies_in_every_oracle() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.95]);
        let s = scenario(Mat::from_row_slice(1, 2, &[1.0, 0.0]), 0.5, 0.2, a);
        let t = simulate_truth(&s).unwrap();
        let an = Analyzer::new(&s, &t, 6).unwrap();
        let comp = s.graph.source_components().remove(0);
        for k in 0..=6 {
            let x = &t.states[k];
            for r in 0..=k {
                assert!(an.obs_info_membership(x, k, r, SensorId(1), 0.0).unwrap());
            }
            assert!(an.state_evo_membership(x, k, SensorId(1), 1e-9).unwrap());
            assert!(an.coit_membership(x, k, &comp, 0.0).unwrap());
            assert!(!an
                .coit_membership(&(x + Vector::from_vec(vec![50.0, 0.0])), k, &comp, 0.0)
                .unwrap());
        }
    }

    #[test]
    fn singleton_window_covers_every_step() {
        let s = scenario(Mat::identity(2, 2), 0.5, 0.2, Mat::identity(2, 2));
        let t = simulate_truth(&s).unwrap();
        let an = Analyzer::new(&s, &t, 4).unwrap();
        let comp = s.graph.source_components().remove(0);
        assert_eq!(comp.rho_tilde, 1);
        let rs: Vec<usize> = an.coit_terms(4, &comp).iter().map(|p| p.0).collect();
        assert_eq!(rs, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn prop1_base_case_and_fault_control() {
        let s = scenario(
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
            0.5,
            0.2,
            Mat::identity(2, 2) * 1.02,
        );
        let t = simulate_truth(&s).unwrap();
        let h = crate::filter::run_dsmf_until(&s, &t, FilterOptions::exact(), 3).unwrap();
        let an = Analyzer::new(&s, &t, 3).unwrap();
        for k in 0..=3 {
            let rep = an
                .verify_prop1(&h, k, SensorId(1), 100, 5, FaultInjection::default())
                .unwrap();
            assert_eq!(rep.violations, 0, "{rep:?}");
        }
        let bad = an
            .verify_prop1(&h, 3, SensorId(1), 100, 5, FaultInjection::all())
            .unwrap();
        assert!(bad.violations > 0);
    }

    #[test]
    fn tilde_s_cases() {
        // x2 unobserved, A21 = 0: S̃_k = Aobar^k P_obar B(x0).
        let a = Mat::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]);
        let mut s = scenario(Mat::from_row_slice(1, 2, &[1.0, 0.0]), 0.5, 0.0, a.clone());
        s.plant.b = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        s.plant.w = Hyperbox::symmetric(1, 0.0);
        let t = simulate_truth(&s).unwrap();
        let h = crate::filter::run_dsmf_until(&s, &t, FilterOptions::exact(), 3).unwrap();
        let an = Analyzer::new(&s, &t, 3).unwrap();
        let d = crate::decomp::observability_decomposition(&s.plant.a, &s.plant.b, &s.sensors[0].c, 1e-9).unwrap();
        let s0 = an
            .prop2_tilde_s(&h, &d, SensorId(1), 0, FaultInjection::default())
            .unwrap();
        let w0 = s0.interval_hull().unwrap().widths()[0];
        assert!((w0 - 10.0).abs() < 1e-9);
        let s3 = an
            .prop2_tilde_s(&h, &d, SensorId(1), 3, FaultInjection::default())
            .unwrap();
        assert!((s3.interval_hull().unwrap().widths()[0] - 10.0 * 0.125).abs() < 1e-9);
        let comp = s.graph.source_components().remove(0);
        assert!(matches!(
            an.verify_prop2(&h, &comp, &d, SensorId(1), 1, 10, 1, FaultInjection::default()),
            Err(DsmfError::Precondition(_))
        ));
        let ok = an
            .verify_prop2(&h, &comp, &d, SensorId(1), 3, 50, 1, FaultInjection::default())
            .unwrap();
        assert_eq!(ok.violations, 0);
    }

    fn history_with_widths(widths: &[f64]) -> BeliefHistory {
        let steps = widths
            .iter()
            .map(|w| {
                vec![SensorStep {
                    prior: None,
                    posterior: None,
                    fused: None,
                    hull: Some(Hyperbox::new(vec![0.0], vec![*w]).unwrap()),
                    truth_inside: None,
                    generators: 0,
                    constraints: 0,
                }]
            })
            .collect();
        BeliefHistory {
            steps,
            options: FilterOptions::exact(),
        }
    }

    #[test]
    fn diagnostic_cases() {
        let flat = history_with_widths(&[2.0; 9]);
        let d = boundedness_diagnostic(&flat, (2, 4), (6, 8), 1.5).unwrap();
        assert_eq!((d[0].ratio, d[0].flag), (1.0, GrowthFlag::Bounded));
        let doubling: Vec<f64> = (0..9).map(|k| 2f64.powi(k)).collect();
        let d = boundedness_diagnostic(&history_with_widths(&doubling), (2, 4), (6, 8), 1.5).unwrap();
        assert_eq!((d[0].ratio, d[0].flag), (16.0, GrowthFlag::Growing));
        assert!(boundedness_diagnostic(&flat, (2, 4), (6, 9), 1.5).is_err());
    }
}
