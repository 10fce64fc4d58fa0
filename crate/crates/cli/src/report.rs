//! Machine-readable outputs: a versioned JSON report plus plot-ready CSV
//! traces. The report body is deterministic for fixed inputs; volatile
//! metadata (timestamp) lives in a separate `meta` block.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use rcstab_core::delay::{FeasibilityKind, FeasibilityVerdict};
use rcstab_core::hbeta::{
    ConditionResult, ConditionStatus, FullAnalysis, LimitConditions, SprScan,
};
use rcstab_core::sim::SimResult;

use crate::CliError;

pub const REPORT_SCHEMA: &str = "rcs-hbeta-report/1";

#[derive(Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub meta: Meta,
    pub body: ReportBody,
}

#[derive(Serialize)]
pub struct Meta {
    pub tool: String,
    pub generated_unix_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Meta {
    pub fn now(seed: Option<u64>) -> Self {
        Meta {
            tool: format!("rcstab {}", env!("CARGO_PKG_VERSION")),
            generated_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            seed,
        }
    }
}

#[derive(Serialize)]
pub struct ConditionJson {
    pub name: String,
    pub status: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_omega: Option<f64>,
}

impl From<&ConditionResult> for ConditionJson {
    fn from(c: &ConditionResult) -> Self {
        ConditionJson {
            name: c.name.to_string(),
            status: match c.status {
                ConditionStatus::Pass => "pass",
                ConditionStatus::Fail => "fail",
                ConditionStatus::NotApplicable => "not-applicable",
            }
            .to_string(),
            detail: c.detail.clone(),
            witness_omega: c.witness_omega,
        }
    }
}

#[derive(Serialize)]
pub struct DelayFeasibilityJson {
    pub kind: String,
    pub reason: String,
    pub probe_window: [f64; 2],
    pub sign_changes_x: usize,
    pub sign_changes_y: usize,
    pub envelope_decay_x: bool,
    pub envelope_decay_y: bool,
}

impl From<&FeasibilityVerdict> for DelayFeasibilityJson {
    fn from(v: &FeasibilityVerdict) -> Self {
        DelayFeasibilityJson {
            kind: match v.kind {
                FeasibilityKind::Feasible => "feasible",
                FeasibilityKind::InfeasibleByDelay => "infeasible-by-delay",
            }
            .to_string(),
            reason: v.reason.clone(),
            probe_window: [v.evidence.omega_lo, v.evidence.omega_hi],
            sign_changes_x: v.evidence.sign_changes_x,
            sign_changes_y: v.evidence.sign_changes_y,
            envelope_decay_x: v.evidence.envelope_decay_x,
            envelope_decay_y: v.evidence.envelope_decay_y,
        }
    }
}

#[derive(Serialize)]
pub struct SprJson {
    pub pass: bool,
    pub min_re: f64,
    pub argmin_omega: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

impl From<&SprScan> for SprJson {
    fn from(s: &SprScan) -> Self {
        SprJson {
            pass: s.pass,
            min_re: s.min_re,
            argmin_omega: s.argmin_omega,
            evaluated: s.evaluated,
            skipped: s.skipped,
        }
    }
}

#[derive(Serialize)]
pub struct LimitsJson {
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_degree: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_limit: Option<f64>,
}

impl From<&LimitConditions> for LimitsJson {
    fn from(l: &LimitConditions) -> Self {
        LimitsJson {
            applicable: l.applicable,
            relative_degree: l.relative_degree,
            analytic_limit: l.analytic_limit,
            numeric_limit: l.numeric_limit,
        }
    }
}

#[derive(Serialize)]
pub struct ReportBody {
    pub verdict: String,
    pub band: [f64; 2],
    pub band_limited: bool,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub theta_span: Option<f64>,
    pub feasible_xi: Option<[f64; 2]>,
    pub xi_midpoint: Option<f64>,
    pub sample_count: usize,
    pub undefined_samples: usize,
    pub conditions: Vec<ConditionJson>,
    pub delay_feasibility: DelayFeasibilityJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spr: Option<SprJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsJson>,
    pub notes: Vec<String>,
}

impl ReportBody {
    pub fn from_analysis(a: &FullAnalysis) -> Self {
        let r = &a.report;
        ReportBody {
            verdict: r.verdict.as_str().to_string(),
            band: [r.band.0, r.band.1],
            band_limited: r.band_limited,
            theta1: r.theta1,
            theta2: r.theta2,
            theta_span: match (r.theta1, r.theta2) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            },
            feasible_xi: r.feasible_xi.map(|(lo, hi)| [lo, hi]),
            xi_midpoint: a.xi_params.as_ref().map(|p| p.angle()),
            sample_count: r.samples.len(),
            undefined_samples: r.undefined_count,
            conditions: r.conditions.iter().map(ConditionJson::from).collect(),
            delay_feasibility: DelayFeasibilityJson::from(&a.delay_feasibility),
            spr: a.spr.as_ref().map(SprJson::from),
            limits: a.limits.as_ref().map(LimitsJson::from),
            notes: r.notes.clone(),
        }
    }
}

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_report(path: &Path, report: &Report) -> Result<(), CliError> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    atomic_write(path, &json)
}

/// Stability-vector trace: one row per analyzed frequency.
pub fn write_theta_trace(
    path: &Path,
    samples: &[rcstab_core::hbeta::NsvSample],
) -> Result<(), CliError> {
    let mut out = String::from("omega_rad_s,nx,ny,theta_rad,defined\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.omega,
            s.nx,
            s.ny,
            s.theta,
            if s.defined { 1 } else { 0 }
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Simulation trace with the reset flag marking post-jump rows.
pub fn write_sim_trace(path: &Path, res: &SimResult) -> Result<(), CliError> {
    let mut out = String::from("t,y,e_r,u_r,u_1,x_r,reset\n");
    for i in 0..res.times.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            res.times[i],
            res.y[i],
            res.e_r[i],
            res.u_r[i],
            res.u_1[i],
            res.states[i][0],
            if res.post_jump[i] { 1 } else { 0 }
        ));
    }
    atomic_write(path, out.as_bytes())
}
