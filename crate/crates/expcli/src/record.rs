//! The experiment record written by sweeps and reports.

use onebit_core::bounds::BoundConstants;
use onebit_core::ensembles::RngSpec;
use onebit_core::Ensemble;
use serde::{Deserialize, Serialize};

/// Version stamped into every record and file header.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Parameters of the run that produced a record. Fields that do not apply
/// to an experiment are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordParams {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub dynamic_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub ensemble: Ensemble,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<BoundConstants>,
}

/// Breakdown of invalidity-pipeline outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub certificate: u64,
    pub no_certificate: u64,
    /// Trials whose distinguishing columns exceeded the tail threshold. Such
    /// trials can still yield a certificate, since dominance is checked
    /// directly.
    pub tail_check_failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub params: RecordParams,
    pub seed: RngSpec,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<OutcomeCounts>,
    pub wall_time_ms: u64,
    pub tool_version: String,
}

impl ExperimentRecord {
    /// Builds a record from raw counts; `trials` must be positive.
    pub fn from_counts(
        experiment_id: impl Into<String>,
        params: RecordParams,
        seed: RngSpec,
        successes: u64,
        trials: u64,
        wall_time_ms: u64,
    ) -> Self {
        assert!(trials > 0 && successes <= trials);
        let (estimate, stderr) = binomial_estimate(successes, trials);
        let (wilson_low, wilson_high) = wilson_interval(successes, trials);
        Self {
            experiment_id: experiment_id.into(),
            params,
            seed,
            trials,
            successes,
            estimate,
            stderr,
            wilson_low,
            wilson_high,
            outcomes: None,
            wall_time_ms,
            tool_version: TOOL_VERSION.to_string(),
        }
    }
}

/// `(successes / trials, sqrt(p (1 - p) / trials))`.
pub fn binomial_estimate(successes: u64, trials: u64) -> (f64, f64) {
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // the endpoints are exactly 0 and 1 at the extreme counts
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
