//! Bounded-variable primal simplex over the unit box.
//!
//! Every problem solved here has the shape
//!
//! ```text
//!     find / minimize c·ξ   subject to   A ξ = b,   -1 <= ξ_j <= 1
//! ```
//!
//! which is exactly the parameter space of a constrained zonotope. Variables
//! are shifted to `u = ξ + 1 ∈ [0, 2]` internally and phase 1 uses one
//! artificial per row. After phase 1 the tableau is kept, so several
//! objectives (interval hulls, sampling directions) can be optimized from the
//! same feasible basis.

use crate::error::{DsmfError, Result};
use crate::linalg::{Mat, Vector};

/// Pivot and feasibility tolerance (absolute, on row-normalized data).
pub const LP_TOL: f64 = 1e-9;

/// Smallest tableau entry accepted as a pivot.
const PIVOT_TOL: f64 = 1e-7;

/// Pivots between two refactorizations of the basis (at least `2m`, since a
/// refactorization costs about as much as `m` pivots).
const REFACTOR_EVERY: usize = 1000;

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub tol: f64,
    /// Residual above which a solution is rejected as ill-conditioned.
    pub residual_tol: f64,
    pub max_pivots: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            tol: LP_TOL,
            residual_tol: 1e-6,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// A phase-1-feasible simplex tableau for `{ξ ∈ [-1,1]^g : Aξ = b}`.
#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    a: Mat,
    b: Vector,
    opts: LpOptions,
    m: usize,
    g: usize,
    /// Structural plus artificial variables.
    ncols: usize,
    /// Row-major `m x g` tableau `B^{-1} A'`. Artificial columns are never
    /// stored: once an artificial leaves the basis it cannot re-enter.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<f64>,
    /// Right-hand side of the scaled, shifted system; used for refinement.
    rhs: Vec<f64>,
    scaled: Vec<f64>,
    pivots: usize,
    /// True until an objective moves an unconstrained problem off ξ = 0.
    at_origin: bool,
}

/// Outcome of an optimization over a [`FeasibleRegion`].
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub xi: Vector,
}

/// Decides whether `{ξ : ‖ξ‖∞ <= 1, Aξ = b}` is non-empty and returns a witness.
pub fn lp_feasible(a: &Mat, b: &Vector) -> Result<Option<Vector>> {
    if a.nrows() == 0 {
        return Ok(Some(Vector::zeros(a.ncols())));
    }
    Ok(FeasibleRegion::new(a, b, LpOptions::default())?.map(|r| r.witness()))
}

/// Minimizes `c·ξ` over the box-constrained equality system, `None` if infeasible.
pub fn lp_minimize(a: &Mat, b: &Vector, c: &Vector) -> Result<Option<LpSolution>> {
    match FeasibleRegion::new(a, b, LpOptions::default())? {
        Some(mut region) => region.minimize(c.as_slice()).map(Some),
        None => Ok(None),
    }
}

impl FeasibleRegion {
    /// Runs phase 1. Returns `Ok(None)` when the system is infeasible.
    pub fn new(a: &Mat, b: &Vector, opts: LpOptions) -> Result<Option<Self>> {
        if a.nrows() != b.len() {
            return Err(DsmfError::DimensionMismatch {
                context: "lp rows",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        let g = a.ncols();

        // Normalize rows, drop empty ones, shift to u = ξ + 1.
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(a.nrows());
        for r in 0..a.nrows() {
            let row: Vec<f64> = (0..g).map(|j| a[(r, j)]).collect();
            let scale = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if scale <= opts.tol * 1e-3 {
                if b[r].abs() > opts.tol {
                    return Ok(None);
                }
                continue;
            }
            let mut row: Vec<f64> = row.into_iter().map(|v| v / scale).collect();
            let mut rhs = b[r] / scale + row.iter().sum::<f64>();
            if rhs < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
            }
            rows.push((row, rhs));
        }
        let m = rows.len();
        let ncols = g + m;
        let mut t = vec![0.0; m * g];
        let mut beta = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        let mut scaled = vec![0.0; m * g];
        for (r, (row, value)) in rows.into_iter().enumerate() {
            t[r * g..(r + 1) * g].copy_from_slice(&row);
            scaled[r * g..(r + 1) * g].copy_from_slice(&row);
            beta[r] = value;
            rhs[r] = value;
        }
        let mut state = vec![VarState::AtLower; ncols];
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            state[g + r] = VarState::Basic(r);
            basis.push(g + r);
        }
        let mut upper = vec![2.0; ncols];
        upper[g..].iter_mut().for_each(|u| *u = f64::INFINITY);

        let mut region = Self {
            a: a.clone(),
            b: b.clone(),
            opts,
            m,
            g,
            ncols,
            t,
            beta,
            basis,
            state,
            upper,
            rhs,
            scaled,
            pivots: 0,
            at_origin: m == 0,
        };

        if m > 0 {
            let mut cost = vec![0.0; ncols];
            cost[g..].iter_mut().for_each(|c| *c = 1.0);
            region.optimize(&cost)?;
            let infeasibility: f64 = (0..m)
                .filter(|&r| region.basis[r] >= g)
                .map(|r| region.beta[r].max(0.0))
                .sum();
            if infeasibility > opts.tol {
                region.refactor()?;
                let infeasibility: f64 = (0..m)
                    .filter(|&r| region.basis[r] >= g)
                    .map(|r| region.beta[r].max(0.0))
                    .sum();
                if infeasibility > opts.tol {
                    return Ok(None);
                }
            }
            region.retire_artificials();
            region.drop_artificials();
        }
        region.check_residual()?;
        Ok(Some(region))
    }

    pub fn num_vars(&self) -> usize {
        self.g
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Current basic feasible point in ξ coordinates.
    pub fn witness(&self) -> Vector {
        if self.at_origin {
            return Vector::zeros(self.g);
        }
        Vector::from_fn(self.g, |j, _| {
            let u = match self.state[j] {
                VarState::Basic(r) => self.beta[r],
                VarState::AtLower => 0.0,
                VarState::AtUpper => 2.0,
            };
            (u - 1.0).clamp(-1.0, 1.0)
        })
    }

    /// Minimizes `c·ξ` starting from the current feasible basis.
    pub fn minimize(&mut self, c: &[f64]) -> Result<LpSolution> {
        if c.len() != self.g {
            return Err(DsmfError::DimensionMismatch {
                context: "lp objective",
                expected: self.g,
                found: c.len(),
            });
        }
        let mut cost = vec![0.0; self.ncols];
        cost[..self.g].copy_from_slice(c);
        self.at_origin = false;
        self.optimize(&cost)?;
        if self.residual() > self.opts.tol * self.residual_scale() {
            // Drifted tableau: rebuild it and re-optimize from the fresh factorization.
            self.refactor()?;
            self.optimize(&cost)?;
        }
        self.check_residual()?;
        let xi = self.witness();
        let objective = c.iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
        Ok(LpSolution { objective, xi })
    }

    /// Moves at most `max_pivots` simplex steps towards the minimum of `c·ξ`
    /// and returns the basic feasible point reached.
    pub fn walk(&mut self, c: &[f64], max_pivots: usize) -> Result<Vector> {
        if c.len() != self.g {
            return Err(DsmfError::DimensionMismatch {
                context: "lp objective",
                expected: self.g,
                found: c.len(),
            });
        }
        let mut cost = vec![0.0; self.ncols];
        cost[..self.g].copy_from_slice(c);
        self.at_origin = false;
        self.optimize_for(&cost, Some(max_pivots))?;
        if self.residual() > self.opts.tol * self.residual_scale() {
            self.refactor()?;
        }
        self.check_residual()?;
        Ok(self.witness())
    }

    pub fn maximize(&mut self, c: &[f64]) -> Result<LpSolution> {
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut sol = self.minimize(&neg)?;
        sol.objective = -sol.objective;
        Ok(sol)
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(r) => self.beta[r],
            VarState::AtLower => 0.0,
            VarState::AtUpper => self.upper[j],
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let g = self.g;
        let mut d = cost[..g].to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * g..(r + 1) * g];
                for (dj, tj) in d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<()> {
        self.optimize_for(cost, None)
    }

    /// Runs the simplex; `stop_after` ends it early after that many pivots.
    fn optimize_for(&mut self, cost: &[f64], stop_after: Option<usize>) -> Result<()> {
        let (m, ncols, tol) = (self.m, self.ncols, self.opts.tol);
        let g = self.g;
        let mut d = self.reduced_costs(cost);
        let mut since_refactor = 0usize;
        let limit = self.opts.max_pivots.unwrap_or(200 * (m + ncols) + 1000);
        let mut degenerate_run = 0usize;
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > limit {
                return Err(DsmfError::IterationLimit(iterations));
            }
            let bland = degenerate_run > 50;
            let mut entering = None;
            let mut best = 0.0;
            #[allow(clippy::needless_range_loop)]
            for j in 0..g {
                let score = match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ if self.upper[j] <= 0.0 => continue,
                    VarState::AtLower if d[j] < -tol => -d[j],
                    VarState::AtUpper if d[j] > tol => d[j],
                    _ => continue,
                };
                if bland {
                    entering = Some(j);
                    break;
                }
                if score > best {
                    best = score;
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            if stop_after.is_some_and(|cap| iterations > cap) {
                return Ok(());
            }
            if since_refactor >= REFACTOR_EVERY.max(2 * m) {
                self.refactor()?;
                d = self.reduced_costs(cost);
                since_refactor = 0;
                continue;
            }
            since_refactor += 1;
            let dir = if self.state[j] == VarState::AtLower { 1.0 } else { -1.0 };

            // Harris ratio test: relaxed bound first, then the largest pivot.
            let mut theta_max = self.upper[j];
            for r in 0..m {
                let alpha = self.t[r * g + j] * dir;
                let var = self.basis[r];
                if alpha > PIVOT_TOL {
                    theta_max = theta_max.min((self.beta[r] + tol) / alpha);
                } else if alpha < -PIVOT_TOL && self.upper[var].is_finite() {
                    theta_max = theta_max.min((self.upper[var] - self.beta[r] + tol) / -alpha);
                }
            }
            if !theta_max.is_finite() {
                return Err(DsmfError::IllConditioned {
                    residual: f64::INFINITY,
                    tolerance: tol,
                });
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut best_alpha = 0.0;
            for r in 0..m {
                let alpha = self.t[r * g + j] * dir;
                let var = self.basis[r];
                let ratio = if alpha > PIVOT_TOL {
                    self.beta[r] / alpha
                } else if alpha < -PIVOT_TOL && self.upper[var].is_finite() {
                    (self.upper[var] - self.beta[r]) / -alpha
                } else {
                    continue;
                };
                if ratio <= theta_max && alpha.abs() > best_alpha {
                    best_alpha = alpha.abs();
                    leave = Some((r, ratio.max(0.0)));
                }
            }
            let theta = match leave {
                Some((_, ratio)) if ratio < self.upper[j] => ratio,
                _ => self.upper[j],
            };
            if theta < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for r in 0..m {
                let alpha = self.t[r * g + j] * dir;
                if alpha != 0.0 {
                    self.beta[r] -= alpha * theta;
                }
            }
            match leave {
                Some((r, ratio)) if ratio < self.upper[j] => {
                    let alpha = self.t[r * g + j] * dir;
                    let leaving = self.basis[r];
                    self.state[leaving] = if alpha > 0.0 {
                        VarState::AtLower
                    } else {
                        VarState::AtUpper
                    };
                    let entering_value = if dir > 0.0 { theta } else { self.upper[j] - theta };
                    self.pivot(r, j, &mut d);
                    self.beta[r] = entering_value;
                }
                _ => {
                    self.state[j] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let ncols = self.g;
        let p = self.t[r * ncols + j];
        {
            let row = &mut self.t[r * ncols..(r + 1) * ncols];
            row.iter_mut().for_each(|v| *v /= p);
            row[j] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> = self.t[r * ncols..(r + 1) * ncols]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (k, *v))
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * ncols + j];
            if f != 0.0 {
                let row = &mut self.t[i * ncols..(i + 1) * ncols];
                for &(k, pr) in &pivot_row {
                    row[k] -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = d[j];
        if f != 0.0 {
            for &(k, pr) in &pivot_row {
                d[k] -= f * pr;
            }
            d[j] = 0.0;
        }
        let old = self.basis[r];
        self.basis[r] = j;
        self.state[j] = VarState::Basic(r);
        if let VarState::Basic(_) = self.state[old] {
            self.state[old] = VarState::AtLower;
        }
        self.pivots += 1;
    }

    /// Fixes artificials at zero and pivots them out of the basis where possible.
    fn retire_artificials(&mut self) {
        let (g, ncols) = (self.g, self.ncols);
        for j in g..ncols {
            self.upper[j] = 0.0;
        }
        let mut scratch = vec![0.0; g];
        for r in 0..self.m {
            if self.basis[r] < g {
                continue;
            }
            let row = &self.t[r * g..(r + 1) * g];
            let mut best = None;
            let mut best_abs = 1e-7;
            for (j, v) in row.iter().enumerate() {
                if !matches!(self.state[j], VarState::Basic(_)) && v.abs() > best_abs {
                    best_abs = v.abs();
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                let value = self.value(j);
                let art = self.basis[r];
                self.pivot(r, j, &mut scratch);
                self.state[art] = VarState::AtLower;
                self.beta[r] = value;
            } else {
                self.beta[r] = 0.0;
            }
        }
    }

    /// Removes the artificial columns after phase 1, together with the rows
    /// whose artificial could not be pivoted out (they are redundant).
    fn drop_artificials(&mut self) {
        let g = self.g;
        let keep: Vec<usize> = (0..self.m).filter(|&r| self.basis[r] < g).collect();
        let mut t = Vec::with_capacity(keep.len() * g);
        let mut scaled = Vec::with_capacity(keep.len() * g);
        for &r in &keep {
            t.extend_from_slice(&self.t[r * g..(r + 1) * g]);
            scaled.extend_from_slice(&self.scaled[r * g..(r + 1) * g]);
        }
        self.beta = keep.iter().map(|&r| self.beta[r]).collect();
        self.rhs = keep.iter().map(|&r| self.rhs[r]).collect();
        self.basis = keep.iter().map(|&r| self.basis[r]).collect();
        self.t = t;
        self.scaled = scaled;
        self.m = keep.len();
        self.ncols = g;
        self.state.truncate(g);
        self.upper.truncate(g);
        for (r, &var) in self.basis.iter().enumerate() {
            self.state[var] = VarState::Basic(r);
        }
    }

    /// Rebuilds the tableau and the basic values from the original scaled
    /// system with an LU factorization of the current basis.
    fn refactor(&mut self) -> Result<()> {
        let (m, ncols) = (self.m, self.ncols);
        if m == 0 {
            return Ok(());
        }
        let mut basis_mat = Mat::zeros(m, m);
        for (k, &var) in self.basis.iter().enumerate() {
            for r in 0..m {
                basis_mat[(r, k)] = self.column_entry(r, var);
            }
        }
        let mut rhs = Vector::from_column_slice(&self.rhs);
        for j in 0..ncols {
            let value = match self.state[j] {
                VarState::Basic(_) => continue,
                _ => self.value(j),
            };
            if value != 0.0 {
                for r in 0..m {
                    rhs[r] -= self.column_entry(r, j) * value;
                }
            }
        }
        let g = self.g;
        let full = Mat::from_fn(m, g, |r, j| self.column_entry(r, j));
        let lu = basis_mat.lu();
        let singular = || DsmfError::IllConditioned {
            residual: f64::INFINITY,
            tolerance: self.opts.tol,
        };
        let t = lu.solve(&full).ok_or_else(singular)?;
        let beta = lu.solve(&rhs).ok_or_else(singular)?;
        if t.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(singular());
        }
        for r in 0..m {
            for j in 0..g {
                self.t[r * g + j] = t[(r, j)];
            }
        }
        for (r, &var) in self.basis.iter().enumerate() {
            if var < g {
                for i in 0..m {
                    self.t[i * g + var] = if i == r { 1.0 } else { 0.0 };
                }
            }
            self.beta[r] = beta[r];
        }
        Ok(())
    }

    fn column_entry(&self, r: usize, j: usize) -> f64 {
        if j < self.g {
            self.scaled[r * self.g + j]
        } else if j - self.g == r {
            1.0
        } else {
            0.0
        }
    }

    fn residual(&self) -> f64 {
        if self.a.nrows() == 0 {
            return 0.0;
        }
        let xi = self.witness();
        let r = &self.a * &xi - &self.b;
        r.amax()
    }

    fn residual_scale(&self) -> f64 {
        1.0 + self.b.amax() + self.a.amax()
    }

    fn check_residual(&mut self) -> Result<()> {
        let scale = self.residual_scale();
        let mut res = self.residual();
        if res > self.opts.tol * scale {
            self.refactor()?;
            res = self.residual();
        }
        if res > self.opts.residual_tol * scale {
            return Err(DsmfError::IllConditioned {
                residual: res,
                tolerance: self.opts.residual_tol * scale,
            });
        }
        Ok(())
    }
}
