//! Machine-readable output documents and writers.
//!
//! The CSV trace schema is fixed:
//! `k,beta,eps,sigma,feas,grad_resid,nu_hat,y_norm,grad_evals,proj_evals,hvp_evals,wall_ms`
//! followed by a `#`-prefixed summary block. JSON documents carry the same
//! data structured. Every numeric field must be finite; the commands abort
//! with the numeric-fault exit code otherwise.

use serde::Serialize;

use ialm_core::ialm::{SolveReport, StopReason, TraceRecord};

use crate::config::RunConfig;
use crate::CliError;

pub const TRACE_HEADER: &str =
    "k,beta,eps,sigma,feas,grad_resid,nu_hat,y_norm,grad_evals,proj_evals,hvp_evals,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::config(format!(
                "format must be csv|json, got '{other}'"
            ))),
        }
    }
}

/// One trace row in the fixed schema.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub beta: f64,
    pub eps: f64,
    pub sigma: f64,
    pub feas: f64,
    pub grad_resid: f64,
    /// `None` marks a degenerate (feasible-point) regularity estimate and
    /// serializes as an empty CSV field / JSON null.
    pub nu_hat: Option<f64>,
    pub y_norm: f64,
    pub grad_evals: usize,
    pub proj_evals: usize,
    pub hvp_evals: usize,
    pub wall_ms: u64,
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        TraceRow {
            k: r.k,
            beta: r.beta,
            eps: r.eps,
            sigma: r.sigma,
            feas: r.feasibility,
            grad_resid: r.grad_residual,
            nu_hat: r.nu,
            y_norm: r.y_norm,
            grad_evals: r.oracle.grad_evals,
            proj_evals: r.oracle.prox_evals,
            hvp_evals: r.oracle.hvp_evals,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleTotals {
    pub f_evals: usize,
    pub grad_evals: usize,
    pub proj_evals: usize,
    pub hvp_evals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub certified: bool,
    pub stop_reason: &'static str,
    pub outer_iterations: usize,
    pub f_final: f64,
    pub feasibility_final: f64,
    pub grad_residual_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eig_final: Option<f64>,
    pub y_norm_final: f64,
    pub a1_norm: f64,
    pub y_max_bound: f64,
    pub totals: OracleTotals,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_recovery_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geneig_dense_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geneig_objective_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_agreement: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDocument {
    pub config: RunConfig,
    pub summary: SolveSummary,
    pub trace: Vec<TraceRow>,
}

pub fn stop_reason_str(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Certified => "certified",
        StopReason::MaxOuter => "max_outer",
        StopReason::InnerFailure => "inner_failure",
    }
}

pub fn trace_rows(report: &SolveReport) -> Vec<TraceRow> {
    report.trace.iter().map(TraceRow::from).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SolveDocument {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.beta,
                r.eps,
                r.sigma,
                r.feas,
                r.grad_resid,
                fmt_opt(r.nu_hat),
                r.y_norm,
                r.grad_evals,
                r.proj_evals,
                r.hvp_evals,
                r.wall_ms
            ));
        }
        out.push_str("# summary\n");
        let s = &self.summary;
        out.push_str(&format!("# certified = {}\n", s.certified));
        out.push_str(&format!("# stop_reason = {}\n", s.stop_reason));
        out.push_str(&format!("# outer_iterations = {}\n", s.outer_iterations));
        out.push_str(&format!("# f_final = {}\n", s.f_final));
        out.push_str(&format!("# feasibility_final = {}\n", s.feasibility_final));
        out.push_str(&format!("# grad_residual_final = {}\n", s.grad_residual_final));
        if let Some(v) = s.min_eig_final {
            out.push_str(&format!("# min_eig_final = {v}\n"));
        }
        out.push_str(&format!("# y_norm_final = {}\n", s.y_norm_final));
        out.push_str(&format!("# a1_norm = {}\n", s.a1_norm));
        out.push_str(&format!("# y_max_bound = {}\n", s.y_max_bound));
        out.push_str(&format!(
            "# totals = f:{} grad:{} proj:{} hvp:{}\n",
            s.totals.f_evals, s.totals.grad_evals, s.totals.proj_evals, s.totals.hvp_evals
        ));
        if let Some(v) = s.bp_recovery_rel_error {
            out.push_str(&format!("# bp_recovery_rel_error = {v}\n"));
        }
        if let Some(v) = s.geneig_dense_min {
            out.push_str(&format!("# geneig_dense_min = {v}\n"));
        }
        if let Some(v) = s.geneig_objective_rel_error {
            out.push_str(&format!("# geneig_objective_rel_error = {v}\n"));
        }
        if let Some(v) = s.cluster_agreement {
            out.push_str(&format!("# cluster_agreement = {v}\n"));
        }
        out.push_str(&config_footer(&self.config));
        out
    }

    /// All floats that the determinism/finiteness contract covers.
    pub fn numeric_fields(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.trace.len() * 8 + 8);
        for r in &self.trace {
            v.extend_from_slice(&[r.beta, r.eps, r.sigma, r.feas, r.grad_resid, r.y_norm]);
            if let Some(nu) = r.nu_hat {
                v.push(nu);
            }
        }
        let s = &self.summary;
        v.extend_from_slice(&[
            s.f_final,
            s.feasibility_final,
            s.grad_residual_final,
            s.y_norm_final,
            s.a1_norm,
            s.y_max_bound,
        ]);
        for opt in [
            s.min_eig_final,
            s.bp_recovery_rel_error,
            s.geneig_dense_min,
            s.geneig_objective_rel_error,
            s.cluster_agreement,
        ]
        .into_iter()
        .flatten()
        {
            v.push(opt);
        }
        v
    }
}

fn config_footer(cfg: &RunConfig) -> String {
    // Flat echo of the configuration actually used, defaults included.
    let mut out = String::from("# config\n");
    let json = serde_json::to_value(cfg).expect("config serializes");
    if let serde_json::Value::Object(map) = json {
        for (key, value) in map {
            out.push_str(&format!("# {key} = {value}\n"));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub tau_f: f64,
    /// Total first-order oracle calls (gradient evaluations).
    pub grad_evals: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepDocument {
    pub config: RunConfig,
    pub points: Vec<SweepPoint>,
    /// Log-log slope of T against 1/tau_f over certified points; absent
    /// when fewer than three certified points exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_residual: Option<f64>,
    pub unfit: bool,
}

impl SweepDocument {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_f,grad_evals,certified\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.tau_f, p.grad_evals, p.certified));
        }
        out.push_str("# summary\n");
        if let Some(s) = self.slope {
            out.push_str(&format!("# slope = {s}\n"));
        }
        if let Some(r) = self.fit_residual {
            out.push_str(&format!("# fit_residual = {r}\n"));
        }
        out.push_str(&format!("# unfit = {}\n", self.unfit));
        out.push_str(&config_footer(&self.config));
        out
    }

    pub fn numeric_fields(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.iter().map(|p| p.tau_f).collect();
        v.extend(self.slope);
        v.extend(self.fit_residual);
        v
    }
}

/// One per-iteration row of the regularity check table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub k: usize,
    pub feas: f64,
    pub nu_hat: Option<f64>,
    pub degenerate: bool,
    /// Closed-form lower bound at this iterate, when defined.
    pub lower_bound: Option<f64>,
    /// Whether the bound's preconditions held here.
    pub precond_holds: Option<bool>,
    /// Clustering: measured `||V^T V - I||`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vtv_deviation: Option<f64>,
    /// Clustering: strict interior of the trace ball.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior: Option<bool>,
    /// Basis pursuit: n-th largest magnitude of the decoded signal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_nth_magnitude: Option<f64>,
    /// Basis pursuit: whether the closed-form condition holds at nu_hat.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_condition_holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckDocument {
    pub config: RunConfig,
    pub certified: bool,
    pub stop_reason: &'static str,
    /// Rows where the bound held preconditions but `nu_hat` fell below it
    /// beyond tolerance.
    pub violations: usize,
    /// Basis pursuit: `min_{|T|=n} eta_n(B_T)` (exact for small d).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_min_subset_sv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_subset_exact: Option<bool>,
    pub rows: Vec<CheckRow>,
}

impl CheckDocument {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,feas,nu_hat,degenerate,lower_bound,precond_holds,vtv_deviation,interior,bp_nth_magnitude,bp_condition_holds\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.feas,
                fmt_opt(r.nu_hat),
                r.degenerate,
                fmt_opt(r.lower_bound),
                r.precond_holds.map(|b| b.to_string()).unwrap_or_default(),
                fmt_opt(r.vtv_deviation),
                r.interior.map(|b| b.to_string()).unwrap_or_default(),
                fmt_opt(r.bp_nth_magnitude),
                r.bp_condition_holds.map(|b| b.to_string()).unwrap_or_default(),
            ));
        }
        out.push_str("# summary\n");
        out.push_str(&format!("# certified = {}\n", self.certified));
        out.push_str(&format!("# stop_reason = {}\n", self.stop_reason));
        out.push_str(&format!("# violations = {}\n", self.violations));
        if let Some(v) = self.bp_min_subset_sv {
            out.push_str(&format!("# bp_min_subset_sv = {v}\n"));
        }
        if let Some(v) = self.bp_subset_exact {
            out.push_str(&format!("# bp_subset_exact = {v}\n"));
        }
        out.push_str(&config_footer(&self.config));
        out
    }

    pub fn numeric_fields(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for r in &self.rows {
            v.push(r.feas);
            v.extend(r.nu_hat);
            v.extend(r.lower_bound);
            v.extend(r.vtv_deviation);
            v.extend(r.bp_nth_magnitude);
        }
        v.extend(self.bp_min_subset_sv);
        v
    }
}

/// Serializes to pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Numeric(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Fails with the numeric-fault error when any value is NaN or infinite.
pub fn ensure_finite(values: &[f64]) -> Result<(), CliError> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Numeric(format!(
            "non-finite value {bad} in output"
        )));
    }
    Ok(())
}

/// Writes to the path, or stdout when no path is given.
pub fn emit(path: Option<&std::path::Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(p, content)?;
            Ok(())
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}
