//! One scenario run per value of a single parameter, as a CSV table.

use super::{run_scenario, ExitStatus, Report, Scenario};
use rayon::prelude::*;
use std::io::Write;

/// One row of a sweep: the report, or the reason there is none.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub report: Option<Report>,
    pub error: Option<String>,
    /// Verdict of the report, or the class of the failure.
    pub status: ExitStatus,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// The most severe row status; `Pass` for an empty sweep.
    pub fn exit_status(&self) -> ExitStatus {
        self.rows.iter().map(|r| r.status).max().unwrap_or(ExitStatus::Pass)
    }
}

/// Runs `template` with `parameter` set to each of `values` on up to
/// `workers` threads. Rows keep the order of `values`; failures are recorded
/// in the row and the sweep continues.
pub fn run_sweep(template: &Scenario, parameter: &str, values: &[f64], workers: usize) -> SweepTable {
    let run = |&value: &f64| {
        let outcome = template
            .with_parameter(parameter, value)
            .map_err(|e| (ExitStatus::InputError, e.to_string().replace('\n', "; ")))
            .and_then(|s| run_scenario(&s).map_err(|e| (ExitStatus::NumericalFailure, e.to_string())));
        match outcome {
            Ok((report, _)) => SweepRow { value, status: report.exit_status(), report: Some(report), error: None },
            Err((status, error)) => SweepRow { value, report: None, error: Some(error), status },
        }
    };
    let rows = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| values.par_iter().map(run).collect()),
        Err(_) => values.iter().map(run).collect(),
    };
    SweepTable { parameter: parameter.to_string(), rows }
}

/// Columns after the parameter value, in order.
pub const COLUMNS: [&str; 24] = [
    "scenario",
    "verdict",
    "capacity_path",
    "h",
    "m",
    "V",
    "R",
    "C_g",
    "C_flat",
    "C_sym",
    "rhs_vol",
    "rhs_rpi",
    "m_minus_C_g",
    "C_g_minus_C_flat",
    "C_flat_minus_rhs_vol",
    "err_m",
    "err_C_g",
    "err_C_flat",
    "err_rhs_vol",
    "superharmonic",
    "mean_convex",
    "minimal_boundary",
    "u_ge_one",
    "error",
];

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl SweepTable {
    /// CSV with a header row and LF line endings.
    pub fn write_csv<W: Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec![self.parameter.as_str()];
        header.extend(COLUMNS);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![num(row.value)];
            match &row.report {
                Some(r) => {
                    let q = r.quantities.as_ref();
                    let m = r.margins.as_ref();
                    let e = r.errors.as_ref();
                    let path = r.capacity_path.map(|p| format!("{p:?}").to_lowercase()).unwrap_or_default();
                    let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from));
                    rec.extend([r.scenario.clone(), verdict.unwrap_or_default(), path, num(r.h)]);
                    rec.extend([
                        opt(q.map(|q| q.m)),
                        opt(q.map(|q| q.V)),
                        opt(q.map(|q| q.R)),
                        opt(q.map(|q| q.C_g)),
                        opt(q.map(|q| q.C_flat)),
                        opt(q.and_then(|q| q.C_sym)),
                        opt(q.map(|q| q.rhs_vol)),
                        opt(q.and_then(|q| q.rhs_rpi)),
                        opt(m.map(|m| m.m_minus_C_g)),
                        opt(m.map(|m| m.C_g_minus_C_flat)),
                        opt(m.map(|m| m.C_flat_minus_rhs_vol)),
                        opt(e.map(|e| e.m)),
                        opt(e.map(|e| e.C_g)),
                        opt(e.map(|e| e.C_flat)),
                        opt(e.map(|e| e.rhs_vol)),
                    ]);
                    let h = &r.hypotheses;
                    for ok in [h.superharmonic.ok, h.mean_convex.ok, h.minimal_boundary.ok, h.u_ge_one.ok] {
                        rec.push(ok.to_string());
                    }
                    rec.push(String::new());
                }
                None => {
                    rec.extend(std::iter::repeat(String::new()).take(COLUMNS.len() - 1));
                    rec.push(row.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
