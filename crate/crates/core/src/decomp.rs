//! Observability decomposition, spectra and ranks.
//!
//! The transformation `P` is orthogonal: its first `n_o` rows span the row
//! space of the observability matrix and the rest span its kernel, so
//!
//! ```text
//!     P A Pᵀ = [ Ao   0     ]      C Pᵀ = [ Co  0 ]
//!              [ A21  Aobar ]
//! ```

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{DsmfError, Result};
use crate::linalg::{complex_rank, complexify, spectral_norm, vstack, CMat, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityDecomposition {
    pub p: Mat,
    pub n_o: usize,
    pub ao: Mat,
    pub a12: Mat,
    pub a21: Mat,
    pub aobar: Mat,
    pub bo: Mat,
    pub bobar: Mat,
    pub co: Mat,
    /// `C Pᵀ` restricted to the unobservable coordinates; zero up to round-off.
    pub c_unobs: Mat,
    pub nu: usize,
    /// Singular values of the observability matrix, descending.
    pub singular_values: Vec<f64>,
}

impl ObservabilityDecomposition {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_unobs(&self) -> usize {
        self.dim() - self.n_o
    }

    pub fn p_o(&self) -> Mat {
        self.p.rows(0, self.n_o).clone_owned()
    }

    pub fn p_obar(&self) -> Mat {
        self.p.rows(self.n_o, self.n_unobs()).clone_owned()
    }

    /// Ratio of the last kept singular value to the first dropped one
    /// (infinite when nothing is dropped or nothing is kept).
    pub fn singular_gap(&self) -> f64 {
        let sv = &self.singular_values;
        if self.n_o == 0 || self.n_o >= sv.len() || sv[self.n_o] == 0.0 {
            return f64::INFINITY;
        }
        sv[self.n_o - 1] / sv[self.n_o]
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol · σ_max`.
pub fn matrix_rank(m: &Mat, tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else {
        return 0;
    };
    let threshold = if smax == 0.0 { tol } else { tol * smax };
    sv.iter().filter(|&&s| s > threshold).count()
}

/// `col(C, CA, …, CA^{steps-1})`
pub fn observability_matrix(a: &Mat, c: &Mat, steps: usize) -> Mat {
    let n = a.nrows();
    let mut blocks = Vec::with_capacity(steps);
    let mut block = c.clone();
    for _ in 0..steps {
        let next = &block * a;
        blocks.push(block);
        block = next;
    }
    let refs: Vec<&Mat> = blocks.iter().collect();
    vstack(&refs, n)
}

pub fn observability_decomposition(a: &Mat, b: &Mat, c: &Mat, tol: f64) -> Result<ObservabilityDecomposition> {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n || b.nrows() != n {
        return Err(DsmfError::DimensionMismatch {
            context: "observability decomposition",
            expected: n,
            found: if a.ncols() != n {
                a.ncols()
            } else if c.ncols() != n {
                c.ncols()
            } else {
                b.nrows()
            },
        });
    }
    let obs = observability_matrix(a, c, n);
    let (p, n_o, sv) = if obs.nrows() == 0 || obs.amax() == 0.0 {
        (Mat::identity(n, n), 0, vec![0.0; n.min(obs.nrows())])
    } else {
        let svd = obs.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let threshold = tol * sv[0];
        let n_o = sv.iter().filter(|&&s| s > threshold).count();
        // obs has q·n ≥ n rows here, so v_t is a full n×n orthogonal matrix.
        let p = Mat::from_fn(n, n, |r, col| v_t[(order[r], col)]);
        (p, n_o, sv)
    };
    let nb = n - n_o;
    let at = &p * a * p.transpose();
    let bt = &p * b;
    let ct = c * p.transpose();
    let ao = at.view((0, 0), (n_o, n_o)).clone_owned();
    let co = ct.columns(0, n_o).clone_owned();
    let nu = observability_index(&ao, &co, tol)?;
    Ok(ObservabilityDecomposition {
        a12: at.view((0, n_o), (n_o, nb)).clone_owned(),
        a21: at.view((n_o, 0), (nb, n_o)).clone_owned(),
        aobar: at.view((n_o, n_o), (nb, nb)).clone_owned(),
        bo: bt.rows(0, n_o).clone_owned(),
        bobar: bt.rows(n_o, nb).clone_owned(),
        c_unobs: ct.columns(n_o, nb).clone_owned(),
        ao,
        co,
        p,
        n_o,
        nu,
        singular_values: sv,
    })
}

/// Least `ν` with `rank col(Co, Co Ao, …, Co Ao^{ν-1}) = n_o`.
pub fn observability_index(ao: &Mat, co: &Mat, tol: f64) -> Result<usize> {
    let n = ao.nrows();
    if n == 0 {
        return Ok(0);
    }
    for ell in 1..=n {
        if matrix_rank(&observability_matrix(ao, co, ell), tol) == n {
            return Ok(ell);
        }
    }
    Err(DsmfError::NotObservable {
        rank: matrix_rank(&observability_matrix(ao, co, n), tol),
        dim: n,
    })
}

/// One distinct eigenvalue (a cluster of numerically equal ones).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub algebraic: usize,
    pub geometric: usize,
    pub on_unit_circle: bool,
}

impl Eigenvalue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn modulus(&self) -> f64 {
        self.value().norm()
    }

    pub fn semisimple(&self) -> bool {
        self.geometric == self.algebraic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Eigenvalue>,
}

impl SpectralReport {
    pub fn unit_circle(&self) -> impl Iterator<Item = &Eigenvalue> {
        self.eigenvalues.iter().filter(|e| e.on_unit_circle)
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.modulus()).fold(0.0, f64::max)
    }
}

const CLUSTER_TOL: f64 = 1e-6;

/// Eigenvalues of a real square matrix, clustered, with multiplicities.
pub fn spectrum(m: &Mat, eig_tol: f64, rank_tol: f64) -> Result<SpectralReport> {
    let n = m.nrows();
    if n == 0 {
        return Ok(SpectralReport {
            eigenvalues: Vec::new(),
        });
    }
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000 * n)
        .ok_or(DsmfError::EigenNonConvergence(n))?;
    let raw: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for lam in raw {
        match clusters
            .iter_mut()
            .find(|c| (c[0] - lam).norm() <= CLUSTER_TOL * lam.norm().max(1.0))
        {
            Some(c) => c.push(lam),
            None => clusters.push(vec![lam]),
        }
    }
    let cm = complexify(m);
    let scale = spectral_norm(m);
    let mut eigenvalues: Vec<Eigenvalue> = clusters
        .into_iter()
        .map(|c| {
            let mean = c.iter().sum::<Complex64>() / c.len() as f64;
            let spread = c.iter().map(|z| (z - mean).norm()).fold(0.0, f64::max);
            let shifted = &cm - CMat::identity(n, n) * mean;
            let threshold = (rank_tol * scale.max(1.0)).max(10.0 * spread);
            let rank = complex_rank(&shifted, threshold, 1.0);
            // Snap round-off imaginary parts of real eigenvalues.
            let im = if mean.im.abs() <= CLUSTER_TOL * mean.norm().max(1.0) {
                0.0
            } else {
                mean.im
            };
            Eigenvalue {
                re: mean.re,
                im,
                algebraic: c.len(),
                geometric: (n - rank).min(c.len()),
                on_unit_circle: (mean.norm() - 1.0).abs() <= eig_tol,
            }
        })
        .collect();
    eigenvalues.sort_by(|a, b| b.modulus().total_cmp(&a.modulus()).then(b.im.total_cmp(&a.im)));
    Ok(SpectralReport { eigenvalues })
}
