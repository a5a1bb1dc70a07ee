//! Distributed set-membership filtering over sensor networks.
//!
//! Each sensor keeps a constrained-zonotope belief about the plant state,
//! updates it with its own measurement strip, and intersects it with the
//! beliefs of its in-neighbours. The certificate module decides, per strongly
//! connected source component, whether those beliefs stay bounded.

pub mod analysis;
pub mod certify;
pub mod decomp;
pub mod error;
pub mod filter;
pub mod graph;
pub mod linalg;
pub mod lp;
pub mod setops;
pub mod sysmodel;

pub use analysis::{verify_network, Analyzer, BoundCheckReport, FaultInjection, VerificationSummary};
pub use certify::{certify_network, CertificateReport, Verdict};
pub use decomp::{observability_decomposition, ObservabilityDecomposition, SpectralReport};
pub use error::{DsmfError, Result, ScenarioIssue};
pub use filter::{run_dsmf, BeliefHistory, FilterOptions, Retention};
pub use graph::{SensorGraph, SensorId, SourceComponent};
pub use linalg::{Mat, Vector};
pub use setops::{ConstrainedZonotope, HullReport, Hyperbox, Strip};
pub use sysmodel::{simulate_truth, PlantModel, Scenario, SensorModel, Tolerances, Trajectory};
