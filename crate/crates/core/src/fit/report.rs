//! Fit reports (`fit-report v1` JSON) and trace CSV files, in boundary units:
//! rates in MHz (`rate/2π`), resonator frequency in GHz, fields in mT.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::anticrossing::{AnticrossingFit, BranchPoint};
use super::full::{FullModelFit, PARAM_NAMES};
use super::lorentzian::TracePoint;
use crate::analysis::{AnalysisReport, Stage};
use crate::units::{rad_to_ghz, rad_to_mhz, t_to_mt};

pub const REPORT_SCHEMA: &str = "fit-report v1";
pub const TRACE_CSV_HEADER: &str = "field_mT,center_GHz,fwhm_MHz,flag";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub unit: String,
    pub value: f64,
    /// 1σ, absent when the covariance is unavailable.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// `fitted`, `failed`, `skipped` or `not requested`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParameterEntry>,
    /// Covariance in the units of `parameters`, same order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cooperativity {
    pub value: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(rename = "g_eff_MHz")]
    pub g_eff_mhz: Option<f64>,
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: Option<f64>,
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: Option<f64>,
    pub g_s: Option<f64>,
    #[serde(rename = "B_FMR_mT")]
    pub b_fmr_mt: Option<f64>,
    pub cooperativity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub source: BTreeMap<String, String>,
    pub slices: StageReport,
    pub anticrossing: StageReport,
    pub full: StageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cooperativity: Option<Cooperativity>,
    pub summary: Summary,
}

/// `(name, unit, factor)` converting each internal parameter to its boundary unit.
const FULL_UNITS: [(&str, f64); 7] = [
    ("GHz", 1e-9 / std::f64::consts::TAU),
    ("MHz", 1e-6 / std::f64::consts::TAU),
    ("MHz", 1e-6 / std::f64::consts::TAU),
    ("MHz", 1e-6 / std::f64::consts::TAU),
    ("", 1.0),
    ("mT", 1e3),
    ("dB", 1.0),
];

const ANTICROSSING_UNITS: [(&str, &str, f64); 4] = [
    ("g_eff", "MHz", 1e-6 / std::f64::consts::TAU),
    ("b_fmr", "mT", 1e3),
    ("g_s", "", 1.0),
    ("omega_r", "GHz", 1e-9 / std::f64::consts::TAU),
];

fn scaled_covariance(cov: &[Vec<f64>], factors: &[f64]) -> Vec<Vec<f64>> {
    cov.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| v * factors[i] * factors[j])
                .collect()
        })
        .collect()
}

fn stage_status<T>(stage: &Stage<T>) -> (String, Option<String>) {
    match stage {
        Stage::NotRequested => ("not requested".into(), None),
        Stage::Skipped(m) => ("skipped".into(), Some(m.clone())),
        Stage::Failed(m) => ("failed".into(), Some(m.clone())),
        Stage::Done(_) => ("fitted".into(), None),
    }
}

fn empty_stage(status: String, message: Option<String>) -> StageReport {
    StageReport {
        status,
        message,
        parameters: Vec::new(),
        covariance: None,
        diagnostics: BTreeMap::new(),
    }
}

fn anticrossing_stage(fit: &AnticrossingFit) -> StageReport {
    let p = &fit.params;
    let values = [p.g_eff, p.b_fmr, p.g_s, p.omega_r];
    let factors: Vec<f64> = ANTICROSSING_UNITS.iter().map(|u| u.2).collect();
    let parameters = ANTICROSSING_UNITS
        .iter()
        .enumerate()
        .map(|(i, (name, unit, k))| ParameterEntry {
            name: name.to_string(),
            unit: unit.to_string(),
            value: values[i] * k,
            error: fit.standard_errors.map(|e| e[i] * k),
        })
        .collect();
    let covariance = fit.covariance.map(|c| {
        let rows: Vec<Vec<f64>> = c.iter().map(|r| r.to_vec()).collect();
        scaled_covariance(&rows, &factors)
    });
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("converged".into(), fit.converged.into());
    diagnostics.insert("iterations".into(), fit.iterations.into());
    diagnostics.insert("n_points".into(), fit.labels.len().into());
    diagnostics.insert("residual_rms_MHz".into(), rad_to_mhz(fit.residual_rms).into());
    StageReport {
        status: "fitted".into(),
        message: None,
        parameters,
        covariance,
        diagnostics,
    }
}

fn full_stage(fit: &FullModelFit) -> StageReport {
    let values = [
        fit.params.omega_r,
        fit.params.kappa,
        fit.params.g_eff,
        fit.params.gamma,
        fit.params.g_s,
        fit.params.b_fmr,
        fit.params.offset_db,
    ];
    let factors: Vec<f64> = FULL_UNITS.iter().map(|u| u.1).collect();
    let parameters = PARAM_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| ParameterEntry {
            name: name.to_string(),
            unit: FULL_UNITS[i].0.to_string(),
            value: values[i] * factors[i],
            error: fit.standard_errors.map(|e| e[i] * factors[i]),
        })
        .collect();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("converged".into(), fit.converged.into());
    diagnostics.insert("iterations".into(), fit.iterations.into());
    diagnostics.insert("termination".into(), fit.termination.clone().into());
    diagnostics.insert("rms_residual_dB".into(), fit.rms_residual_db.into());
    diagnostics.insert(
        "reduced_chi_square".into(),
        fit.reduced_chi_square.map_or(serde_json::Value::Null, Into::into),
    );
    diagnostics.insert("at_bound".into(), fit.at_bound.clone().into());
    diagnostics.insert(
        "implied_kappa_c_MHz".into(),
        rad_to_mhz(fit.params.implied_kappa_c()).into(),
    );
    StageReport {
        status: "fitted".into(),
        message: None,
        parameters,
        covariance: fit.covariance.as_ref().map(|c| scaled_covariance(c, &factors)),
        diagnostics,
    }
}

/// `C = g²/(κγ)` with its 1σ error propagated from the full-fit covariance.
pub fn cooperativity_with_error(fit: &FullModelFit) -> Option<Cooperativity> {
    let value = fit.cooperativity()?;
    let p = &fit.params;
    let error = fit.covariance.as_ref().map(|c| {
        // ∂C/∂(κ, g, γ) in parameter order 1, 2, 3
        let grad = [(1, -value / p.kappa), (2, 2.0 * value / p.g_eff), (3, -value / p.gamma)];
        let mut var = 0.0;
        for &(i, gi) in &grad {
            for &(j, gj) in &grad {
                var += gi * gj * c[i][j];
            }
        }
        var.max(0.0).sqrt()
    });
    Some(Cooperativity { value, error })
}

impl FitReport {
    pub fn from_analysis(report: &AnalysisReport, source: BTreeMap<String, String>) -> Self {
        let mut slices = empty_stage("fitted".into(), None);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for p in &report.trace {
            *counts.entry(p.flag.as_str().into()).or_default() += 1;
        }
        slices
            .diagnostics
            .insert("n_fields".into(), report.trace.len().into());
        slices.diagnostics.insert(
            "flags".into(),
            serde_json::to_value(&counts).unwrap_or_default(),
        );
        if let Some(w) = report.far_detuned_fwhm {
            slices
                .diagnostics
                .insert("far_detuned_fwhm_MHz".into(), (w * 1e-6).into());
        }
        if report.trace.is_empty() {
            slices.status = "not requested".into();
        }

        let anticrossing = match &report.anticrossing {
            Stage::Done(f) => anticrossing_stage(f),
            s => {
                let (st, m) = stage_status(s);
                empty_stage(st, m)
            }
        };
        let full = match &report.full {
            Stage::Done(f) => full_stage(f),
            s => {
                let (st, m) = stage_status(s);
                empty_stage(st, m)
            }
        };

        let full_fit = report.full.done();
        let ac = report.anticrossing.done();
        let cooperativity = full_fit.and_then(cooperativity_with_error);
        let summary = Summary {
            g_eff_mhz: full_fit
                .map(|f| f.params.g_eff)
                .or(ac.map(|a| a.params.g_eff))
                .map(rad_to_mhz),
            gamma_mhz: full_fit.map(|f| rad_to_mhz(f.params.gamma)),
            kappa_mhz: full_fit
                .map(|f| rad_to_mhz(f.params.kappa))
                .or(report.far_detuned_fwhm.map(|w| 0.5 * w * 1e-6)),
            g_s: full_fit.map(|f| f.params.g_s).or(ac.map(|a| a.params.g_s)),
            b_fmr_mt: full_fit
                .map(|f| f.params.b_fmr)
                .or(ac.map(|a| a.params.b_fmr))
                .map(t_to_mt),
            cooperativity: cooperativity.as_ref().map(|c| c.value),
        };
        FitReport {
            schema: REPORT_SCHEMA.into(),
            source,
            slices,
            anticrossing,
            full,
            cooperativity,
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Shortest form of `x` rounded to 12 significant digits, which drops the
/// binary noise of unit conversion (`144.00000000000003` mT). Non-finite
/// values become empty fields.
fn csv_number(x: f64) -> String {
    if x.is_finite() {
        let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
        format!("{rounded}")
    } else {
        String::new()
    }
}

/// Linewidth trace as `field_mT,center_GHz,fwhm_MHz,flag`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TracePoint]) -> io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for p in trace {
        writeln!(
            w,
            "{},{},{},{}",
            csv_number(t_to_mt(p.field)),
            csv_number(p.center * 1e-9),
            csv_number(p.fwhm * 1e-6),
            p.flag.as_str()
        )?;
    }
    Ok(())
}

/// Branch points in the trace column layout; `flag` holds the branch label
/// and the width column is empty.
pub fn write_branch_csv<W: Write>(mut w: W, points: &[BranchPoint]) -> io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},,{}",
            csv_number(t_to_mt(p.field)),
            csv_number(rad_to_ghz(p.omega)),
            p.branch.map_or("unassigned", |b| b.as_str())
        )?;
    }
    Ok(())
}
