//! The end-to-end analysis chain: slice fits, anticrossing detection and fit,
//! then a full 2D fit seeded from both.

use crate::constants::PhysicalConstants;
use crate::fit::{
    far_detuned_fwhm, fit_anticrossing, fit_full, linewidth_trace, AnticrossingFit,
    AnticrossingParams, AnticrossingSettings, BranchPoint, FullFitSettings, FullModelFit,
    FullModelParams, SliceFitSettings, TraceFlag, TracePoint,
};
use crate::synth::Spectrum2D;
use crate::units::hz_to_rad;

/// A slice centre further than this many median linewidths from the median
/// centre counts as evidence of an anticrossing.
pub const CENTER_DEVIATION_LINEWIDTHS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub slices: bool,
    pub anticrossing: bool,
    pub full: bool,
    pub slice: SliceFitSettings,
    pub anticrossing_settings: AnticrossingSettings,
    pub full_settings: FullFitSettings,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            slices: true,
            anticrossing: true,
            full: true,
            slice: SliceFitSettings::default(),
            anticrossing_settings: AnticrossingSettings::default(),
            full_settings: FullFitSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage<T> {
    NotRequested,
    /// Skipped because an earlier stage produced nothing to work from.
    Skipped(String),
    Failed(String),
    Done(T),
}

impl<T> Stage<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            Stage::Done(t) => Some(t),
            _ => None,
        }
    }
}

pub const NO_ANTICROSSING: &str = "no anticrossing detected";

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub trace: Vec<TracePoint>,
    /// Hz.
    pub far_detuned_fwhm: Option<f64>,
    pub branch_points: Vec<BranchPoint>,
    pub anticrossing_start: Option<AnticrossingParams>,
    pub anticrossing: Stage<AnticrossingFit>,
    pub full_start: Option<FullModelParams>,
    pub full: Stage<FullModelFit>,
}

impl AnalysisReport {
    pub fn anticrossing_detected(&self) -> bool {
        !matches!(&self.anticrossing, Stage::Skipped(m) if m == NO_ANTICROSSING)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn usable(p: &TracePoint) -> bool {
    matches!(p.flag, TraceFlag::Ok | TraceFlag::TwoPeak)
        && p.fit.as_ref().is_some_and(|f| f.primary.converged)
}

/// Slice-fit centres as unlabeled branch points: every usable primary line
/// plus the second line of two-peak slices.
pub fn branch_points(trace: &[TracePoint]) -> Vec<BranchPoint> {
    let mut pts = Vec::new();
    for p in trace.iter().filter(|p| usable(p)) {
        let fit = p.fit.as_ref().expect("usable point has a fit");
        pts.push(BranchPoint {
            field: p.field,
            omega: hz_to_rad(fit.primary.center),
            branch: None,
        });
        if p.flag == TraceFlag::TwoPeak {
            if let Some(s) = fit.secondary.filter(|s| s.converged) {
                pts.push(BranchPoint {
                    field: p.field,
                    omega: hz_to_rad(s.center),
                    branch: None,
                });
            }
        }
    }
    pts
}

/// Initial anticrossing parameters from the trace, or `None` when the trace
/// shows no anticrossing.
///
/// With resolved two-peak slices the narrowest splitting fixes the
/// resonance field and coupling; otherwise the largest jump of the line
/// centre across the median frequency does.
pub fn guess_anticrossing(trace: &[TracePoint]) -> Option<AnticrossingParams> {
    let fitted: Vec<&TracePoint> = trace.iter().filter(|p| usable(p)).collect();
    let centre = median(fitted.iter().map(|p| p.center).collect())?;
    let fwhm = median(fitted.iter().map(|p| p.fwhm).collect())?;

    let closest_pair = fitted
        .iter()
        .filter(|p| p.flag == TraceFlag::TwoPeak)
        .filter_map(|p| {
            let f = p.fit.as_ref()?;
            let s = f.secondary?;
            Some((p.field, (s.center - f.primary.center).abs()))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let (b_fmr, g_eff) = match closest_pair {
        Some((b, sep)) => (b, 0.5 * hz_to_rad(sep)),
        None => {
            let max_dev = fitted
                .iter()
                .map(|p| (p.center - centre).abs())
                .fold(0.0, f64::max);
            if max_dev <= CENTER_DEVIATION_LINEWIDTHS * fwhm {
                return None;
            }
            let (b, jump) = fitted
                .windows(2)
                .filter(|w| (w[0].center - centre) * (w[1].center - centre) < 0.0)
                .map(|w| (0.5 * (w[0].field + w[1].field), (w[1].center - w[0].center).abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))?;
            (b, 0.5 * hz_to_rad(jump))
        }
    };
    Some(AnticrossingParams {
        g_eff,
        b_fmr,
        g_s: 2.0,
        omega_r: hz_to_rad(centre),
    })
}

/// Initial full-model parameters: dispersion parameters from the
/// anticrossing fit, `κ` from the far-detuned linewidth and `γ` from the
/// widest resolved line, where each polariton carries half of `κ + γ/2`.
pub fn guess_full(
    spectrum: &Spectrum2D,
    trace: &[TracePoint],
    far_fwhm: Option<f64>,
    anticrossing: &AnticrossingParams,
) -> FullModelParams {
    let fitted: Vec<&TracePoint> = trace.iter().filter(|p| usable(p)).collect();
    let fwhm_far = far_fwhm
        .or_else(|| median(fitted.iter().map(|p| p.fwhm).collect()))
        .unwrap_or(1e6);
    let kappa = std::f64::consts::PI * fwhm_far;
    let widest = fitted
        .iter()
        .filter(|p| p.flag == TraceFlag::TwoPeak)
        .flat_map(|p| {
            let f = p.fit.as_ref().expect("usable point has a fit");
            std::iter::once(f.primary.fwhm).chain(f.secondary.map(|s| s.fwhm))
        })
        .fold(0.0, f64::max);
    let mut gamma = 2.0 * (hz_to_rad(widest) - kappa);
    if !(gamma > 0.0) {
        gamma = 10.0 * kappa;
    }
    let peak_db = spectrum
        .power_db
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    FullModelParams {
        omega_r: anticrossing.omega_r,
        kappa,
        g_eff: anticrossing.g_eff,
        gamma,
        g_s: anticrossing.g_s,
        b_fmr: anticrossing.b_fmr,
        offset_db: peak_db + 20.0 * kappa.log10(),
    }
}

/// Runs the requested stages. A later stage needs the earlier ones: the
/// anticrossing fit uses slice centres and the full fit starts from the
/// anticrossing fit.
pub fn analyze(spectrum: &Spectrum2D, options: &AnalysisOptions, c: &PhysicalConstants) -> AnalysisReport {
    let need_trace = options.slices || options.anticrossing || options.full;
    let trace = if need_trace {
        linewidth_trace(spectrum, &options.slice)
    } else {
        Vec::new()
    };
    let mut report = AnalysisReport {
        far_detuned_fwhm: None,
        branch_points: Vec::new(),
        anticrossing_start: None,
        anticrossing: Stage::NotRequested,
        full_start: None,
        full: Stage::NotRequested,
        trace,
    };
    let guess = guess_anticrossing(&report.trace);
    report.far_detuned_fwhm = match &guess {
        Some(g) => far_detuned_fwhm(&report.trace, g.b_fmr),
        // without an anticrossing every slice is far detuned
        None => median(
            report
                .trace
                .iter()
                .filter(|p| p.flag == TraceFlag::Ok)
                .map(|p| p.fwhm)
                .collect(),
        ),
    };
    if !(options.anticrossing || options.full) {
        return report;
    }

    let Some(start) = guess else {
        report.anticrossing = Stage::Skipped(NO_ANTICROSSING.into());
        if options.full {
            report.full = Stage::Skipped(NO_ANTICROSSING.into());
        }
        return report;
    };
    report.anticrossing_start = Some(start);
    report.branch_points = branch_points(&report.trace);
    let fit = match fit_anticrossing(&report.branch_points, &start, &options.anticrossing_settings, c) {
        Ok(f) => f,
        Err(e) => {
            report.anticrossing = Stage::Failed(e.to_string());
            if options.full {
                report.full = Stage::Skipped("anticrossing fit failed".into());
            }
            return report;
        }
    };
    // Attach the labels the fit settled on.
    for (p, &b) in report.branch_points.iter_mut().zip(&fit.labels) {
        p.branch = Some(b);
    }
    report.far_detuned_fwhm = far_detuned_fwhm(&report.trace, fit.params.b_fmr);
    let dispersion = fit.params;
    report.anticrossing = Stage::Done(fit);

    if options.full {
        let start = guess_full(spectrum, &report.trace, report.far_detuned_fwhm, &dispersion);
        report.full_start = Some(start);
        report.full = match fit_full(spectrum, &start, &options.full_settings, c) {
            Ok(f) => Stage::Done(f),
            Err(e) => Stage::Failed(e.to_string()),
        };
    }
    report
}
