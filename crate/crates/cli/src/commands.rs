//! The three `dsmf` commands as library functions.

use std::fs;
use std::path::{Path, PathBuf};

use dsmf_core::analysis::{boundedness_diagnostic, BoundednessEntry, GrowthFlag};
use dsmf_core::{
    certify_network, run_dsmf, simulate_truth, verify_network, CertificateReport, DsmfError, FaultInjection,
    FilterOptions, Scenario, SensorId, VerificationSummary,
};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::output::{boundedness_csv, error_band_svg, sensor_csv, trajectory_csv, write_json};
use crate::scenario_file::LoadError;

/// Threshold on the tail/early width ratio above which a dimension is flagged.
pub const GROWTH_THRESHOLD: f64 = 1.5;

/// Seed for the verification samplers, mixed with the step and sensor.
pub const VERIFY_SEED: u64 = 0x5eed;

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Input(#[from] LoadError),
    #[error("{0}")]
    Runtime(#[from] DsmfError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CmdError {
    /// 2 for input errors, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Input(_) => 2,
            CmdError::Runtime(_) | CmdError::Io { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CmdError + '_ {
    move |source| CmdError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), CmdError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Early and tail windows for the growth diagnostic: the second and fourth
/// quarters of the horizon (`[50,100]` and `[150,200]` for 200 steps).
pub fn diagnostic_windows(horizon: usize) -> Option<((usize, usize), (usize, usize))> {
    (horizon >= 4).then(|| ((horizon / 4, horizon / 2), (3 * horizon / 4, horizon)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub horizon: usize,
    pub seed: u64,
    pub dim: usize,
    pub sensors: usize,
    pub max_gen: usize,
    pub max_con: usize,
    pub truth_checks: usize,
    pub truth_violations: usize,
    pub max_generators: usize,
    pub max_constraints: usize,
    pub growing: Vec<(SensorId, usize)>,
}

/// Simulates the scenario, runs the reduced filter and writes every artifact
/// into `out`. On a filter abort, `diagnostics.json` describes the failure.
pub fn cmd_run(s: &Scenario, out: &Path) -> Result<RunSummary, CmdError> {
    fs::create_dir_all(out.join("plots")).map_err(io_err(out))?;
    let t = simulate_truth(s).map_err(|e| match e {
        DsmfError::InvalidScenario { .. } => CmdError::Input(e.into()),
        other => CmdError::Runtime(other),
    })?;
    write(&out.join("trajectory.csv"), &trajectory_csv(&t))?;
    let h = match run_dsmf(s, &t, FilterOptions::reduced(s)) {
        Ok(h) => h,
        Err(e) => {
            let path = out.join("diagnostics.json");
            let detail = match &e {
                DsmfError::EmptyBelief {
                    step,
                    sensor,
                    stage,
                    measurement,
                } => json!({
                    "kind": "EMPTY_BELIEF",
                    "step": step,
                    "sensor": sensor,
                    "stage": stage,
                    "measurement": measurement,
                }),
                other => json!({ "kind": "RUNTIME", "message": other.to_string() }),
            };
            write_json(&path, &json!({ "status": "error", "error": detail })).map_err(io_err(&path))?;
            return Err(e.into());
        }
    };
    let n = s.dim();
    for i in s.graph.sensors() {
        write(&out.join(format!("sensor_{:02}.csv", i.0)), &sensor_csv(&h, &t, i)?)?;
        let ks = 0..=h.horizon();
        for d in 0..n {
            let (mut lower, mut upper) = (Vec::new(), Vec::new());
            for k in ks.clone() {
                let hull = h.hull(k, i)?;
                lower.push(hull.lower[d] - t.states[k][d]);
                upper.push(hull.upper[d] - t.states[k][d]);
            }
            let title = format!("sensor {} dimension {}: error range", i.0, d + 1);
            let path = out.join("plots").join(format!("sensor_{:02}_dim_{}.svg", i.0, d + 1));
            write(&path, &error_band_svg(&title, &lower, &upper))?;
        }
    }
    let entries: Vec<BoundednessEntry> = match diagnostic_windows(h.horizon()) {
        Some((early, tail)) => boundedness_diagnostic(&h, early, tail, GROWTH_THRESHOLD)?,
        None => Vec::new(),
    };
    write(&out.join("boundedness.csv"), &boundedness_csv(&entries))?;

    let steps = h.steps.iter().flatten();
    let truth_checks = steps.clone().filter(|st| st.truth_inside.is_some()).count();
    let truth_violations = steps.clone().filter(|st| st.truth_inside == Some(false)).count();
    let summary = RunSummary {
        horizon: h.horizon(),
        seed: s.seed,
        dim: n,
        sensors: s.num_sensors(),
        max_gen: s.max_gen,
        max_con: s.max_con,
        truth_checks,
        truth_violations,
        max_generators: steps.clone().map(|st| st.generators).max().unwrap_or(0),
        max_constraints: steps.map(|st| st.constraints).max().unwrap_or(0),
        growing: entries
            .iter()
            .filter(|e| e.flag == GrowthFlag::Growing)
            .map(|e| (e.sensor, e.dim))
            .collect(),
    };
    let path = out.join("summary.json");
    write_json(&path, &summary).map_err(io_err(&path))?;
    let path = out.join("diagnostics.json");
    let windows = diagnostic_windows(h.horizon());
    write_json(
        &path,
        &json!({
            "status": "ok",
            "windows": windows.map(|(e, t)| json!({ "early": [e.0, e.1], "tail": [t.0, t.1] })),
            "threshold": GROWTH_THRESHOLD,
            "boundedness": entries,
        }),
    )
    .map_err(io_err(&path))?;
    Ok(summary)
}

pub fn cmd_certify(s: &Scenario) -> Result<CertificateReport, CmdError> {
    Ok(certify_network(s)?)
}

/// Checks both outer bounds on the unreduced filter for steps `0..=kmax`.
pub fn cmd_verify(
    s: &Scenario,
    kmax: usize,
    samples: usize,
    inject_fault: bool,
) -> Result<VerificationSummary, CmdError> {
    let mut sim = s.clone();
    sim.horizon = sim.horizon.max(kmax);
    let t = simulate_truth(&sim)?;
    let fault = if inject_fault {
        FaultInjection::all()
    } else {
        FaultInjection::default()
    };
    Ok(verify_network(&sim, &t, kmax, samples, VERIFY_SEED, fault)?)
}
