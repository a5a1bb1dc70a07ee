//! Boundedness certificates per source component.
//!
//! Two sufficient conditions are checked. Collective detectability is the PBH
//! test on `(A, C^(t))`. The weaker marginal-stability test asks that the
//! unobservable block `Aobar` be marginally stable, and that at every
//! unit-circle eigenvalue the columns of `[Bobar, A21]` lie in the range of
//! `Aobar - λI`. The rank form and the left-null-vector form of that range
//! condition are both computed and must agree.

use num_complex::Complex64;
use serde::Serialize;

use crate::decomp::{observability_decomposition, spectrum, ObservabilityDecomposition};
use crate::error::{DsmfError, Result};
use crate::graph::{SensorId, SourceComponent};
use crate::linalg::{complex_rank, complexify, hstack, spectral_norm, vstack, CMat, Mat};
use crate::sysmodel::{joint_measurement_matrix, Scenario, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Detectable,
    Theorem1Bounded,
    Uncertified,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Detectable => "DETECTABLE",
            Verdict::Theorem1Bounded => "THEOREM1_BOUNDED",
            Verdict::Uncertified => "UNCERTIFIED",
        }
    }

    pub fn is_bounded(self) -> bool {
        self != Verdict::Uncertified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbhWitness {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub rank: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectabilityCheck {
    pub detectable: bool,
    /// Every tested eigenvalue with `|λ| ≥ 1`; failures have `rank < dim`.
    pub tested: Vec<PbhWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenCheck {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub modulus: f64,
    pub on_unit_circle: bool,
    pub algebraic: usize,
    pub geometric: usize,
    pub semisimple: bool,
    /// `rank [Aobar - λI, Bobar, A21]`
    pub rank_lhs: usize,
    /// `rank (Aobar - λI)`
    pub rank_rhs: usize,
    /// Largest `|q [Bobar, A21]|` over unit left null vectors `q` of `Aobar - λI`.
    pub left_null_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Check {
    pub cond_i: bool,
    pub cond_ii: bool,
    pub n_o: usize,
    pub nu: usize,
    pub singular_gap: f64,
    pub eigs: Vec<EigenCheck>,
}

/// PBH: `rank [A - λI; C] = n` at every eigenvalue with `|λ| ≥ 1`.
pub fn check_collective_detectability(a: &Mat, c: &Mat, tol: &Tolerances) -> Result<DetectabilityCheck> {
    let n = a.nrows();
    let spec = spectrum(a, tol.eig, tol.rank)?;
    let scale = spectral_norm(&vstack(&[a, c], n));
    let stacked = complexify(&vstack(&[a, c], n));
    let mut tested = Vec::new();
    for e in spec.eigenvalues.iter().filter(|e| e.modulus() >= 1.0 - tol.eig) {
        let mut m = stacked.clone();
        for d in 0..n {
            m[(d, d)] -= e.value();
        }
        tested.push(PbhWitness {
            lambda_re: e.re,
            lambda_im: e.im,
            rank: complex_rank(&m, tol.rank, scale),
            dim: n,
        });
    }
    Ok(DetectabilityCheck {
        detectable: tested.iter().all(|w| w.rank == w.dim),
        tested,
    })
}

pub fn check_theorem1(
    a: &Mat,
    b: &Mat,
    c: &Mat,
    tol: &Tolerances,
) -> Result<(Theorem1Check, ObservabilityDecomposition)> {
    let d = observability_decomposition(a, b, c, tol.rank)?;
    let nb = d.n_unobs();
    let spec = spectrum(&d.aobar, tol.eig, tol.rank)?;
    let coupling = hstack(&[&d.bobar, &d.a21], nb);
    let scale = spectral_norm(&hstack(&[&d.aobar, &coupling], nb)).max(1.0);
    let threshold = tol.rank * scale;
    let cplx_aobar = complexify(&d.aobar);
    let cplx_coupling = complexify(&coupling);
    let mut eigs = Vec::with_capacity(spec.eigenvalues.len());
    let mut cond_i = true;
    let mut cond_ii = true;
    for e in &spec.eigenvalues {
        let lam = e.value();
        let shifted = &cplx_aobar - CMat::identity(nb, nb) * lam;
        let full = hstack_c(&shifted, &cplx_coupling);
        let rank_rhs = complex_rank(&shifted, threshold, 1.0);
        let rank_lhs = complex_rank(&full, threshold, 1.0);
        let residual = left_null_residual(&shifted, &cplx_coupling, threshold);
        if e.modulus() > 1.0 + tol.eig || (e.on_unit_circle && !e.semisimple()) {
            cond_i = false;
        }
        if e.on_unit_circle {
            let rank_ok = rank_lhs == rank_rhs;
            let vec_ok = residual <= threshold * (coupling.ncols().max(1) as f64).sqrt();
            if rank_ok != vec_ok {
                return Err(DsmfError::CertificateDisagreement { re: e.re, im: e.im });
            }
            cond_ii &= rank_ok;
        }
        eigs.push(EigenCheck {
            lambda_re: e.re,
            lambda_im: e.im,
            modulus: e.modulus(),
            on_unit_circle: e.on_unit_circle,
            algebraic: e.algebraic,
            geometric: e.geometric,
            semisimple: e.semisimple(),
            rank_lhs,
            rank_rhs,
            left_null_residual: residual,
        });
    }
    let check = Theorem1Check {
        cond_i,
        cond_ii,
        n_o: d.n_o,
        nu: d.nu,
        singular_gap: d.singular_gap(),
        eigs,
    };
    Ok((check, d))
}

fn hstack_c(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Max over left singular vectors `u` of `m` with singular value below
/// `threshold` of `|uᴴ x|₂`.
fn left_null_residual(m: &CMat, x: &CMat, threshold: f64) -> f64 {
    if m.nrows() == 0 || x.ncols() == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut worst: f64 = 0.0;
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            let q = u.column(j).adjoint();
            let r: f64 = (q * x).iter().map(|z: &Complex64| z.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCertificate {
    pub component: usize,
    pub vertices: Vec<SensorId>,
    pub detectable: bool,
    pub pbh: Vec<PbhWitness>,
    pub thm1: Theorem1Check,
    pub verdict: Verdict,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub network_verdict: Verdict,
    pub components: Vec<ComponentCertificate>,
    pub covered_by_predecessor: Vec<SensorId>,
    pub unreachable: Vec<SensorId>,
}

impl CertificateReport {
    /// Bounded verdict for every component and every sensor reachable.
    pub fn passes(&self) -> bool {
        self.network_verdict.is_bounded() && self.unreachable.is_empty()
    }
}

pub fn certify_component(s: &Scenario, comp: &SourceComponent) -> Result<ComponentCertificate> {
    let cj = joint_measurement_matrix(s, comp);
    let tol = s.tolerances;
    let det = check_collective_detectability(&s.plant.a, &cj, &tol)?;
    let (thm1, _) = check_theorem1(&s.plant.a, &s.plant.b, &cj, &tol)?;
    let verdict = if det.detectable {
        Verdict::Detectable
    } else if thm1.cond_i && thm1.cond_ii {
        Verdict::Theorem1Bounded
    } else {
        Verdict::Uncertified
    };
    Ok(ComponentCertificate {
        component: comp.index,
        vertices: comp.vertices.clone(),
        detectable: det.detectable,
        pbh: det.tested,
        thm1,
        verdict,
        tolerances: tol,
    })
}

pub fn certify_network(s: &Scenario) -> Result<CertificateReport> {
    let comps = s.graph.source_components();
    let components = comps
        .iter()
        .map(|c| certify_component(s, c))
        .collect::<Result<Vec<_>>>()?;
    let network_verdict = if components.iter().all(|c| c.verdict == Verdict::Detectable) {
        Verdict::Detectable
    } else if components.iter().all(|c| c.verdict.is_bounded()) {
        Verdict::Theorem1Bounded
    } else {
        Verdict::Uncertified
    };
    let unreachable = s.graph.unreachable_from_sources(&comps);
    let covered_by_predecessor = s
        .graph
        .sensors()
        .filter(|i| !comps.iter().any(|c| c.contains(*i)) && !unreachable.contains(i))
        .collect();
    Ok(CertificateReport {
        network_verdict,
        components,
        covered_by_predecessor,
        unreachable,
    })
}
