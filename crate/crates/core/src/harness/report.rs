//! The report of one scenario run and its exit status.

use super::scenario::Mode;
use crate::capacity::SolverStats;
use crate::geom::HypothesisCheck;
use crate::mass::MassEstimate;
use serde::Serialize;
use std::io::Write;

/// Outcome of a hypothesis check as recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisFlag {
    pub ok: bool,
    pub worst: f64,
    pub tolerance: f64,
}

impl From<&HypothesisCheck> for HypothesisFlag {
    fn from(c: &HypothesisCheck) -> Self {
        Self { ok: c.ok, worst: c.worst, tolerance: c.tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypotheses {
    pub superharmonic: HypothesisFlag,
    pub mean_convex: HypothesisFlag,
    pub minimal_boundary: HypothesisFlag,
    pub u_ge_one: HypothesisFlag,
}

impl Hypotheses {
    pub fn all_ok(&self) -> bool {
        self.failed().is_empty()
    }

    /// Names of the failed checks.
    pub fn failed(&self) -> Vec<&'static str> {
        [
            ("superharmonic", self.superharmonic.ok),
            ("mean_convex", self.mean_convex.ok),
            ("minimal_boundary", self.minimal_boundary.ok),
            ("u_ge_one", self.u_ge_one.ok),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect()
    }
}

/// The computed quantities. Field names follow the usual symbols.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantities {
    /// ADM mass.
    pub m: f64,
    /// Euclidean volume of Ω.
    pub V: f64,
    /// `(V/β_n)^{1/n}`.
    pub R: f64,
    /// Capacity of ∂Ω in `g`.
    pub C_g: f64,
    /// Flat capacity of ∂Ω.
    pub C_flat: f64,
    /// Symmetrized lower bound from the flat potential (grid path only).
    pub C_sym: Option<f64>,
    /// `(V/β_n)^{(n-2)/n}`.
    pub rhs_vol: f64,
    /// `½ (A/ω)^{(n-2)/(n-1)}` with `A` the area of ∂Ω in `g`.
    pub rhs_rpi: Option<f64>,
}

/// The links of the chain `m ≥ C_g ≥ C_flat ≥ rhs_vol`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margins {
    pub m_minus_C_g: f64,
    pub C_g_minus_C_flat: f64,
    pub C_flat_minus_rhs_vol: f64,
}

impl Margins {
    pub fn as_array(&self) -> [f64; 3] {
        [self.m_minus_C_g, self.C_g_minus_C_flat, self.C_flat_minus_rhs_vol]
    }
}

/// Error estimates of the quantities and of the margins.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEstimates {
    pub m: f64,
    pub V: f64,
    pub C_g: f64,
    pub C_flat: f64,
    pub rhs_vol: f64,
    pub margins: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityPath {
    Radial,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    ChainViolation,
    HypothesisFailure,
}

/// Everything computed for one scenario. Wall-clock times are kept out of
/// the report so that reruns are byte-identical; see [`Timings`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub n: usize,
    pub mode: Mode,
    pub h: f64,
    pub hypotheses: Hypotheses,
    /// Absent when strict mode stopped at a failed hypothesis.
    pub quantities: Option<Quantities>,
    pub margins: Option<Margins>,
    pub errors: Option<ErrorEstimates>,
    pub capacity_path: Option<CapacityPath>,
    pub mass: Option<MassEstimate>,
    pub solver: Vec<SolverStats>,
    /// Every margin is at least minus its error estimate.
    pub chain_holds: Option<bool>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl Report {
    pub fn exit_status(&self) -> ExitStatus {
        match self.verdict {
            Verdict::Pass => ExitStatus::Pass,
            Verdict::ChainViolation => ExitStatus::ChainViolation,
            Verdict::HypothesisFailure => ExitStatus::HypothesisFailure,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_json().as_bytes())
    }
}

/// Process exit codes. When several apply the largest wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Pass = 0,
    ChainViolation = 1,
    HypothesisFailure = 2,
    NumericalFailure = 3,
    InputError = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub scenario: String,
    pub stages: Vec<(String, f64)>,
    pub total: f64,
}

impl Timings {
    pub(crate) fn record(&mut self, stage: &str, seconds: f64) {
        self.stages.push((stage.to_string(), seconds));
        self.total += seconds;
    }
}
