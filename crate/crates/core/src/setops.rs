//! Boxes, strips and constrained zonotopes.
//!
//! A constrained zonotope is the set
//!
//! ```text
//!     { c + G ξ  :  ‖ξ‖∞ <= 1,  A ξ = b }
//! ```
//!
//! It is closed under linear maps, Minkowski sums and intersections, and
//! every membership / emptiness / hull query reduces to a linear program over
//! the unit box (see [`crate::lp`]). Strips `{x : y - Cx ∈ V}` stay symbolic
//! because they are unbounded whenever `C` has a kernel.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, invalid, DsmfError, Result, ScenarioIssue};
use crate::linalg::{hstack, mat_from_rows, mat_to_rows, Mat, Vector};
use crate::lp::{FeasibleRegion, LpOptions};

/// Simplex steps per random objective when drawing sample vertices.
const SAMPLE_WALK_PIVOTS: usize = 40;

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hyperbox {
    /// Grows every bound outward by `rel * (1 + |bound|)`.
    pub fn padded(&self, rel: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|l| l - rel * (1.0 + l.abs())).collect(),
            upper: self.upper.iter().map(|u| u + rel * (1.0 + u.abs())).collect(),
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        if let Some(j) = (0..lower.len()).find(|&j| lower[j].is_nan() || upper[j].is_nan() || lower[j] > upper[j]) {
            return Err(invalid(
                ScenarioIssue::BadValue,
                format!("box coordinate {j}: lower {} > upper {}", lower[j], upper[j]),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// `[-r, r]^dim`
    pub fn symmetric(dim: usize, radius: f64) -> Self {
        Self {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
        }
    }

    pub fn point(x: &[f64]) -> Self {
        Self {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn midpoint(&self) -> Vector {
        Vector::from_fn(self.dim(), |j, _| 0.5 * (self.lower[j] + self.upper[j]))
    }

    pub fn radius(&self) -> Vector {
        Vector::from_fn(self.dim(), |j, _| 0.5 * (self.upper[j] - self.lower[j]))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(j, v)| *v >= self.lower[j] - tol && *v <= self.upper[j] + tol)
    }

    /// True when `self ⊆ other` coordinate-wise, up to `tol`.
    pub fn is_subset_of(&self, other: &Hyperbox, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|j| self.lower[j] >= other.lower[j] - tol && self.upper[j] <= other.upper[j] + tol)
    }

    pub fn to_cz(&self) -> ConstrainedZonotope {
        let mid = self.midpoint();
        let rad = self.radius();
        let cols: Vec<usize> = (0..self.dim()).filter(|&j| rad[j] > 0.0).collect();
        let mut g = Mat::zeros(self.dim(), cols.len());
        for (k, &j) in cols.iter().enumerate() {
            g[(j, k)] = rad[j];
        }
        ConstrainedZonotope::unconstrained(mid, g)
    }
}

/// Measurement-consistent set `{x : y - C x ∈ V}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    pub c: Mat,
    pub y: Vector,
    pub v: Hyperbox,
}

impl Strip {
    pub fn new(c: Mat, y: Vector, v: Hyperbox) -> Result<Self> {
        check_dim("strip measurement", c.nrows(), y.len())?;
        check_dim("strip noise box", c.nrows(), v.dim())?;
        Ok(Self { c, y, v })
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let r = &self.y - &self.c * x;
        self.v.contains(r.as_slice(), tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    center: Vector,
    generators: Mat,
    con_a: Mat,
    con_b: Vector,
}

/// Tight interval hull together with the LP witnesses attaining each bound.
#[derive(Debug, Clone)]
pub struct HullReport {
    pub hull: Hyperbox,
    /// `lower_points[j]` is a member of the set whose j-th coordinate is `hull.lower[j]`.
    pub lower_points: Vec<Vector>,
    pub upper_points: Vec<Vector>,
    pub lower_xi: Vec<Vector>,
    pub upper_xi: Vec<Vector>,
}

impl ConstrainedZonotope {
    pub fn new(center: Vector, generators: Mat, con_a: Mat, con_b: Vector) -> Result<Self> {
        check_dim("generator rows", center.len(), generators.nrows())?;
        check_dim("constraint columns", generators.ncols(), con_a.ncols())?;
        check_dim("constraint rows", con_a.nrows(), con_b.len())?;
        Ok(Self {
            center,
            generators,
            con_a,
            con_b,
        })
    }

    pub fn unconstrained(center: Vector, generators: Mat) -> Self {
        let g = generators.ncols();
        Self {
            center,
            generators,
            con_a: Mat::zeros(0, g),
            con_b: Vector::zeros(0),
        }
    }

    pub fn point(x: Vector) -> Self {
        let n = x.len();
        Self::unconstrained(x, Mat::zeros(n, 0))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.con_a.nrows()
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn generators(&self) -> &Mat {
        &self.generators
    }

    pub fn con_a(&self) -> &Mat {
        &self.con_a
    }

    pub fn con_b(&self) -> &Vector {
        &self.con_b
    }

    /// Maps a parameter vector to its point `c + Gξ`.
    pub fn point_at(&self, xi: &Vector) -> Vector {
        &self.center + &self.generators * xi
    }

    /// `{M z : z ∈ Z}`
    pub fn linear_map(&self, m: &Mat) -> Result<Self> {
        check_dim("linear map columns", self.dim(), m.ncols())?;
        Ok(Self {
            center: m * &self.center,
            generators: m * &self.generators,
            con_a: self.con_a.clone(),
            con_b: self.con_b.clone(),
        })
    }

    pub fn translate(&self, d: &Vector) -> Result<Self> {
        check_dim("translation", self.dim(), d.len())?;
        let mut out = self.clone();
        out.center += d;
        Ok(out)
    }

    /// Exact Minkowski sum.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        check_dim("minkowski sum", self.dim(), other.dim())?;
        let n = self.dim();
        let generators = hstack(&[&self.generators, &other.generators], n);
        let con_a = block_diag(&self.con_a, &other.con_a);
        let con_b = concat(&self.con_b, &other.con_b);
        Ok(Self {
            center: &self.center + &other.center,
            generators,
            con_a,
            con_b,
        })
    }

    /// Exact intersection; the result may be empty.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        check_dim("intersection", self.dim(), other.dim())?;
        let (n, g1, g2) = (self.dim(), self.num_generators(), other.num_generators());
        let (m1, m2) = (self.num_constraints(), other.num_constraints());
        let mut generators = Mat::zeros(n, g1 + g2);
        generators.view_mut((0, 0), (n, g1)).copy_from(&self.generators);
        let mut con_a = Mat::zeros(m1 + m2 + n, g1 + g2);
        con_a.view_mut((0, 0), (m1, g1)).copy_from(&self.con_a);
        con_a.view_mut((m1, g1), (m2, g2)).copy_from(&other.con_a);
        con_a.view_mut((m1 + m2, 0), (n, g1)).copy_from(&self.generators);
        con_a.view_mut((m1 + m2, g1), (n, g2)).copy_from(&(-&other.generators));
        let tie = &other.center - &self.center;
        let con_b = concat(&concat(&self.con_b, &other.con_b), &tie);
        Ok(Self {
            center: self.center.clone(),
            generators,
            con_a,
            con_b,
        })
    }

    /// Exact `{z ∈ Z : y - C z ∈ V}`. Strips with no rows leave `Z` unchanged.
    pub fn intersect_strip(&self, strip: &Strip) -> Result<Self> {
        check_dim("strip columns", self.dim(), strip.c.ncols())?;
        let q = strip.c.nrows();
        if q == 0 {
            return Ok(self.clone());
        }
        let (n, g, m) = (self.dim(), self.num_generators(), self.num_constraints());
        let mid = strip.v.midpoint();
        let rad = strip.v.radius();
        let noise_cols: Vec<usize> = (0..q).filter(|&i| rad[i] > 0.0).collect();
        let extra = noise_cols.len();
        let mut generators = Mat::zeros(n, g + extra);
        generators.view_mut((0, 0), (n, g)).copy_from(&self.generators);
        let mut con_a = Mat::zeros(m + q, g + extra);
        con_a.view_mut((0, 0), (m, g)).copy_from(&self.con_a);
        con_a.view_mut((m, 0), (q, g)).copy_from(&(&strip.c * &self.generators));
        for (k, &i) in noise_cols.iter().enumerate() {
            con_a[(m + i, g + k)] = rad[i];
        }
        let rhs = &strip.y - &strip.c * &self.center - mid;
        Ok(Self {
            center: self.center.clone(),
            generators,
            con_a,
            con_b: concat(&self.con_b, &rhs),
        })
    }

    /// Cartesian product `Z1 × Z2`.
    pub fn cartesian_product(&self, other: &Self) -> Self {
        let (n1, n2) = (self.dim(), other.dim());
        let (g1, g2) = (self.num_generators(), other.num_generators());
        let mut generators = Mat::zeros(n1 + n2, g1 + g2);
        generators.view_mut((0, 0), (n1, g1)).copy_from(&self.generators);
        generators.view_mut((n1, g1), (n2, g2)).copy_from(&other.generators);
        Self {
            center: concat(&self.center, &other.center),
            generators,
            con_a: block_diag(&self.con_a, &other.con_a),
            con_b: concat(&self.con_b, &other.con_b),
        }
    }

    fn region(&self) -> Result<Option<FeasibleRegion>> {
        FeasibleRegion::new(&self.con_a, &self.con_b, LpOptions::default())
    }

    pub fn is_empty(&self) -> Result<bool> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        Ok(self.region()?.is_none())
    }

    /// Membership decided by the unit-box LP at its default tolerance.
    pub fn contains_point(&self, x: &Vector) -> Result<bool> {
        self.contains_point_within(x, 0.0)
    }

    /// Membership of `x` in `Z ⊕ [-eps, eps]^n`.
    pub fn contains_point_within(&self, x: &Vector, eps: f64) -> Result<bool> {
        check_dim("membership point", self.dim(), x.len())?;
        let (n, g, m) = (self.dim(), self.num_generators(), self.num_constraints());
        let slack = if eps > 0.0 { n } else { 0 };
        let mut a = Mat::zeros(m + n, g + slack);
        a.view_mut((0, 0), (m, g)).copy_from(&self.con_a);
        a.view_mut((m, 0), (n, g)).copy_from(&self.generators);
        for i in 0..slack {
            a[(m + i, g + i)] = eps;
        }
        let b = concat(&self.con_b, &(x - &self.center));
        Ok(FeasibleRegion::new(&a, &b, LpOptions::default())?.is_some())
    }

    /// Tight interval hull via `2n` linear programs sharing one phase 1.
    pub fn interval_hull(&self) -> Result<Hyperbox> {
        Ok(self.hull_report()?.hull)
    }

    pub fn hull_report(&self) -> Result<HullReport> {
        let n = self.dim();
        let mut region = self.region()?.ok_or(DsmfError::EmptySet("interval hull"))?;
        let mut report = HullReport {
            hull: Hyperbox::symmetric(n, 0.0),
            lower_points: Vec::with_capacity(n),
            upper_points: Vec::with_capacity(n),
            lower_xi: Vec::with_capacity(n),
            upper_xi: Vec::with_capacity(n),
        };
        for i in 0..n {
            let row: Vec<f64> = self.generators.row(i).iter().copied().collect();
            let lo = region.minimize(&row)?;
            let hi = region.maximize(&row)?;
            report.hull.lower[i] = self.center[i] + lo.objective;
            report.hull.upper[i] = self.center[i] + hi.objective;
            report.lower_points.push(self.point_at(&lo.xi));
            report.upper_points.push(self.point_at(&hi.xi));
            report.lower_xi.push(lo.xi);
            report.upper_xi.push(hi.xi);
        }
        Ok(report)
    }

    /// `(lowerD, upperD)` bracketing the Euclidean diameter.
    ///
    /// The upper bound is the diagonal of the interval hull. The lower bound is
    /// the largest distance between LP extreme points: the hull witnesses plus
    /// two rounds of antipodal refinement along the best pair found.
    pub fn diameter_bounds(&self) -> Result<(f64, f64)> {
        let report = self.hull_report()?;
        let upper = report.hull.widths().iter().map(|w| w * w).sum::<f64>().sqrt();
        let mut points: Vec<Vector> = report
            .lower_points
            .iter()
            .chain(&report.upper_points)
            .cloned()
            .collect();
        points.push(self.center.clone());
        let mut region = self.region()?.ok_or(DsmfError::EmptySet("diameter"))?;
        for _ in 0..2 {
            let (p, q, _) = farthest_pair(&points);
            let dir = &points[p] - &points[q];
            if dir.norm() == 0.0 {
                break;
            }
            let c: Vec<f64> = (self.generators.transpose() * &dir).iter().copied().collect();
            let lo = region.minimize(&c)?;
            let hi = region.maximize(&c)?;
            points.push(self.point_at(&lo.xi));
            points.push(self.point_at(&hi.xi));
        }
        let (_, _, lower) = farthest_pair(&points);
        Ok((lower.min(upper), upper))
    }

    /// Draws one member of the set.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        Ok(self.sample_points(rng, 1)?.remove(0))
    }

    /// Draws `count` members: simplex vertices reached by short walks towards
    /// random objectives, then random interpolations between pairs of them.
    pub fn sample_points<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<Vector>> {
        let (n, g) = (self.dim(), self.num_generators());
        let mut region = self.region()?.ok_or(DsmfError::EmptySet("sampling"))?;
        if g == 0 {
            return Ok(vec![self.center.clone(); count]);
        }
        let pool_size = count.min(16 + 2 * n);
        let mut pool = Vec::with_capacity(pool_size);
        for k in 0..pool_size {
            let c: Vec<f64> = if k % 2 == 0 {
                let dir = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                (self.generators.transpose() * dir).iter().copied().collect()
            } else {
                (0..g).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let xi = region.walk(&c, SAMPLE_WALK_PIVOTS)?;
            pool.push(self.point_at(&xi));
        }
        let mut out = pool.clone();
        while out.len() < count {
            let p = rng.random_range(0..pool.len());
            let q = rng.random_range(0..pool.len());
            let t: f64 = rng.random();
            out.push(&pool[p] * t + &pool[q] * (1.0 - t));
        }
        Ok(out)
    }

    /// Sound order reduction to at most `max_gen` generators and `max_con`
    /// constraints. The result always contains `self`.
    pub fn reduce(&self, max_gen: usize, max_con: usize) -> Result<Self> {
        Ok(self.reduce_with_hull(max_gen, max_con)?.0)
    }

    /// Like [`reduce`](Self::reduce), also returning the interval hull when one
    /// was computed along the way.
    ///
    /// With `max_gen >= 2n` and `max_con >= n` the reduced set is intersected
    /// with the (slightly padded) interval hull of `self`, so the reduction
    /// keeps the hull unchanged up to the padding.
    pub fn reduce_with_hull(&self, max_gen: usize, max_con: usize) -> Result<(Self, Option<Hyperbox>)> {
        let n = self.dim();
        if max_gen < n {
            return Err(DsmfError::Precondition(format!(
                "generator budget {max_gen} is below the dimension {n}"
            )));
        }
        if self.num_generators() <= max_gen && self.num_constraints() <= max_con {
            return Ok((self.clone(), None));
        }
        if max_gen == n && max_con == 0 {
            let hull = self.interval_hull()?;
            return Ok((hull.to_cz(), Some(hull)));
        }
        if max_gen >= 2 * n && max_con >= n {
            let hull = self.interval_hull()?;
            let inner = self.reduce_core(max_gen - n, max_con - n);
            let out = inner.intersect_box(&hull.padded(1e-9));
            return Ok((out, Some(hull)));
        }
        Ok((self.reduce_core(max_gen, max_con), None))
    }

    fn reduce_core(&self, max_gen: usize, max_con: usize) -> Self {
        let n = self.dim();
        let mut z = self.without_zero_columns();
        if z.num_generators() <= max_gen && z.num_constraints() <= max_con {
            return z;
        }
        z = z.rescaled().without_zero_columns();
        let con_budget = max_con.min(max_gen - n);
        z.eliminate_constraints(con_budget);
        if z.num_generators() > max_gen {
            z = z.box_generators(max_gen);
        }
        z
    }

    /// `{z ∈ Z : lo <= z <= hi}` with one slack generator per bounded axis.
    pub fn intersect_box(&self, h: &Hyperbox) -> Self {
        let (n, g, m) = (self.dim(), self.num_generators(), self.num_constraints());
        let mut generators = Mat::zeros(n, g + n);
        generators.view_mut((0, 0), (n, g)).copy_from(&self.generators);
        let mut con_a = Mat::zeros(m + n, g + n);
        con_a.view_mut((0, 0), (m, g)).copy_from(&self.con_a);
        con_a.view_mut((m, 0), (n, g)).copy_from(&self.generators);
        let mut con_b = Vector::zeros(m + n);
        con_b.rows_mut(0, m).copy_from(&self.con_b);
        for i in 0..n {
            let mid = 0.5 * (h.lower[i] + h.upper[i]);
            con_a[(m + i, g + i)] = 0.5 * (h.upper[i] - h.lower[i]);
            con_b[m + i] = mid - self.center[i];
        }
        Self {
            center: self.center.clone(),
            generators,
            con_a,
            con_b,
        }
        .without_zero_columns()
    }

    /// Re-parametrizes every ξ_j onto its propagated interval; the set is unchanged.
    fn rescaled(&self) -> Self {
        let (mut lo, mut hi) = self.propagated_bounds();
        // Guard against round-off in the propagation.
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            *l = (*l - 1e-12).max(-1.0);
            *h = (*h + 1e-12).min(1.0);
        }
        let mid = Vector::from_iterator(lo.len(), lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)));
        let rad: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect();
        let mut generators = self.generators.clone();
        let mut con_a = self.con_a.clone();
        for (j, r) in rad.iter().enumerate() {
            generators.column_mut(j).scale_mut(*r);
            con_a.column_mut(j).scale_mut(*r);
        }
        Self {
            center: &self.center + &self.generators * &mid,
            generators,
            con_b: &self.con_b - &self.con_a * &mid,
            con_a,
        }
    }

    fn without_zero_columns(&self) -> Self {
        let keep: Vec<usize> = (0..self.num_generators())
            .filter(|&j| self.generators.column(j).amax() > 0.0 || self.con_a.column(j).amax() > 0.0)
            .collect();
        let keep_rows: Vec<usize> = (0..self.num_constraints())
            .filter(|&r| self.con_a.row(r).amax() > 0.0 || self.con_b[r] != 0.0)
            .collect();
        Self {
            center: self.center.clone(),
            generators: self.generators.select_columns(&keep),
            con_a: self.con_a.select_columns(&keep).select_rows(&keep_rows),
            con_b: self.con_b.select_rows(&keep_rows),
        }
    }

    /// Interval bounds on ξ implied by the constraints (two propagation sweeps).
    fn propagated_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let g = self.num_generators();
        let (mut lo, mut hi) = (vec![-1.0; g], vec![1.0; g]);
        for _ in 0..2 {
            for r in 0..self.num_constraints() {
                let row = self.con_a.row(r);
                let (mut smin, mut smax) = (0.0, 0.0);
                for j in 0..g {
                    let a = row[j];
                    if a != 0.0 {
                        smin += (a * lo[j]).min(a * hi[j]);
                        smax += (a * lo[j]).max(a * hi[j]);
                    }
                }
                for j in 0..g {
                    let a = row[j];
                    if a.abs() < 1e-12 {
                        continue;
                    }
                    let rest_min = smin - (a * lo[j]).min(a * hi[j]);
                    let rest_max = smax - (a * lo[j]).max(a * hi[j]);
                    let (mut l, mut u) = ((self.con_b[r] - rest_max) / a, (self.con_b[r] - rest_min) / a);
                    if l > u {
                        std::mem::swap(&mut l, &mut u);
                    }
                    lo[j] = lo[j].max(l);
                    hi[j] = hi[j].min(u);
                    if lo[j] > hi[j] {
                        // Infeasible; keep the original bounds, emptiness is
                        // the LP's call.
                        lo[j] = -1.0;
                        hi[j] = 1.0;
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Eliminates constraints by solving a row for one ξ-component. Pivots are
    /// scored by the interval excess they give up and applied in batches; a
    /// stale score only costs tightness, never soundness.
    fn eliminate_constraints(&mut self, budget: usize) {
        while self.num_constraints() > budget {
            let (lo, hi) = self.propagated_bounds();
            let (m, g) = (self.num_constraints(), self.num_generators());
            let gen_norms: Vec<f64> = (0..g).map(|j| self.generators.column(j).norm()).collect();
            // Cheapest pivot of every row.
            let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(m);
            for r in 0..m {
                let row = self.con_a.row(r);
                let row_max = row.amax();
                if row_max == 0.0 {
                    continue;
                }
                let (mut smin, mut smax) = (0.0, 0.0);
                for j in 0..g {
                    let a = row[j];
                    if a != 0.0 {
                        smin += (a * lo[j]).min(a * hi[j]);
                        smax += (a * lo[j]).max(a * hi[j]);
                    }
                }
                let mut best: Option<(f64, usize)> = None;
                for j in 0..g {
                    let a = row[j];
                    if a.abs() < 0.1 * row_max {
                        continue;
                    }
                    let rest_min = smin - (a * lo[j]).min(a * hi[j]);
                    let rest_max = smax - (a * lo[j]).max(a * hi[j]);
                    let (mut l, mut u) = ((self.con_b[r] - rest_max) / a, (self.con_b[r] - rest_min) / a);
                    if l > u {
                        std::mem::swap(&mut l, &mut u);
                    }
                    let excess = (u - 1.0).max(0.0) + (-1.0 - l).max(0.0);
                    let cost = excess * gen_norms[j] - 1e-9 * a.abs() / row_max;
                    if best.is_none_or(|(c, _)| cost < c) {
                        best = Some((cost, j));
                    }
                }
                if let Some((cost, j)) = best {
                    candidates.push((cost, r, j));
                }
            }
            if candidates.is_empty() {
                // Only all-zero rows remain; they carry no information.
                let keep: Vec<usize> = (0..budget.min(m)).collect();
                self.con_a = self.con_a.select_rows(&keep);
                self.con_b = self.con_b.select_rows(&keep);
                return;
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let batch = ((m - budget) / 4).max(1);
            // Apply in descending index order so earlier removals do not shift later ones.
            let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(batch);
            for &(_, r, j) in &candidates {
                if chosen.len() == batch {
                    break;
                }
                if chosen.iter().all(|&(cr, cj)| cr != r && cj != j) {
                    chosen.push((r, j));
                }
            }
            let mut applied = 0;
            for idx in 0..chosen.len() {
                let (r, j) = chosen[idx];
                // Re-check the pivot after earlier eliminations filled the row in.
                let row_max = self.con_a.row(r).amax();
                if row_max == 0.0 || self.con_a[(r, j)].abs() < 0.1 * row_max {
                    continue;
                }
                self.eliminate(r, j);
                applied += 1;
                for later in chosen.iter_mut().skip(idx + 1) {
                    if later.0 > r {
                        later.0 -= 1;
                    }
                    if later.1 > j {
                        later.1 -= 1;
                    }
                }
            }
            if applied == 0 {
                let (_, r, j) = candidates[0];
                self.eliminate(r, j);
            }
        }
    }

    fn eliminate(&mut self, r: usize, j: usize) {
        let a = self.con_a[(r, j)];
        let pivot_row: Vector = self.con_a.row(r).transpose() / a;
        let br = self.con_b[r] / a;
        let gj = self.generators.column(j).clone_owned();
        let aj = self.con_a.column(j).clone_owned();
        self.center += &gj * br;
        for col in 0..self.num_generators() {
            let f = pivot_row[col];
            if f != 0.0 {
                for i in 0..self.dim() {
                    self.generators[(i, col)] -= gj[i] * f;
                }
                for i in 0..self.num_constraints() {
                    if aj[i] != 0.0 {
                        self.con_a[(i, col)] -= aj[i] * f;
                    }
                }
            }
        }
        for i in 0..self.num_constraints() {
            self.con_b[i] -= aj[i] * br;
        }
        let keep_cols: Vec<usize> = (0..self.num_generators()).filter(|&c| c != j).collect();
        let keep_rows: Vec<usize> = (0..self.num_constraints()).filter(|&i| i != r).collect();
        self.generators = self.generators.select_columns(&keep_cols);
        self.con_a = self.con_a.select_columns(&keep_cols).select_rows(&keep_rows);
        self.con_b = self.con_b.select_rows(&keep_rows);
    }

    /// Boxes the least important generators of the lifted zonotope
    /// `[c; -b] + [G; A] ξ` so that at most `max_gen` generators remain.
    fn box_generators(&self, max_gen: usize) -> Self {
        let (n, g, m) = (self.dim(), self.num_generators(), self.num_constraints());
        // Row-normalize the constraints so they are comparable with the state rows.
        let mut con_a = self.con_a.clone();
        let mut con_b = self.con_b.clone();
        for r in 0..m {
            let s = con_a.row(r).amax();
            if s > 0.0 {
                con_a.row_mut(r).scale_mut(1.0 / s);
                con_b[r] /= s;
            }
        }
        let lifted = |j: usize| {
            self.generators
                .column(j)
                .iter()
                .chain(con_a.column(j).iter())
                .map(|v| v.abs())
                .collect::<Vec<f64>>()
        };
        let mut scores: Vec<(f64, usize)> = (0..g)
            .map(|j| {
                let h = lifted(j);
                let l1: f64 = h.iter().sum();
                let linf = h.iter().fold(0.0_f64, |a, v| a.max(*v));
                (l1 - linf, j)
            })
            .collect();
        scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let keep_count = max_gen.saturating_sub(n + m);
        let mut kept: Vec<usize> = scores[..keep_count.min(g)].iter().map(|s| s.1).collect();
        kept.sort_unstable();
        let boxed: Vec<usize> = scores[keep_count.min(g)..].iter().map(|s| s.1).collect();
        let mut sums = vec![0.0; n + m];
        for &j in &boxed {
            for (s, v) in sums.iter_mut().zip(lifted(j)) {
                *s += v;
            }
        }
        let new_cols: Vec<usize> = (0..n + m).filter(|&i| sums[i] > 0.0).collect();
        let total = kept.len() + new_cols.len();
        let mut generators = Mat::zeros(n, total);
        let mut new_a = Mat::zeros(m, total);
        for (k, &j) in kept.iter().enumerate() {
            generators.column_mut(k).copy_from(&self.generators.column(j));
            new_a.column_mut(k).copy_from(&con_a.column(j));
        }
        for (k, &i) in new_cols.iter().enumerate() {
            let col = kept.len() + k;
            if i < n {
                generators[(i, col)] = sums[i];
            } else {
                new_a[(i - n, col)] = sums[i];
            }
        }
        Self {
            center: self.center.clone(),
            generators,
            con_a: new_a,
            con_b,
        }
    }
}

fn farthest_pair(points: &[Vector]) -> (usize, usize, f64) {
    let mut best = (0, 0, 0.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (&points[i] - &points[j]).norm();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    best
}

fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

fn concat(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Canonical textual form used in JSON and scenario files.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CzRepr {
    center: Vec<f64>,
    generators: Vec<Vec<f64>>,
    #[serde(rename = "conA", default)]
    con_a: Vec<Vec<f64>>,
    #[serde(rename = "conB", default)]
    con_b: Vec<f64>,
}

impl Serialize for ConstrainedZonotope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CzRepr {
            center: self.center.iter().copied().collect(),
            generators: mat_to_rows(&self.generators),
            con_a: mat_to_rows(&self.con_a),
            con_b: self.con_b.iter().copied().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConstrainedZonotope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = CzRepr::deserialize(deserializer)?;
        let n = repr.center.len();
        let g = repr.generators.first().map_or(0, |r| r.len());
        if repr.generators.len() != n || repr.generators.iter().any(|r| r.len() != g) {
            return Err(D::Error::custom(
                "generators must have one row of equal length per center coordinate",
            ));
        }
        if repr.con_a.iter().any(|r| r.len() != g) {
            return Err(D::Error::custom("conA rows must have one entry per generator"));
        }
        ConstrainedZonotope::new(
            Vector::from_vec(repr.center),
            mat_from_rows(&repr.generators, g),
            mat_from_rows(&repr.con_a, g),
            Vector::from_vec(repr.con_b),
        )
        .map_err(D::Error::custom)
    }
}
