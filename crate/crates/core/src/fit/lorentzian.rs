//! Lorentzian fits of constant-field slices and the linewidth trace.
//!
//! Slices are fitted in linear power, where a decoupled resonance is exactly
//! `A·(Γ/2)²/((f − f₀)² + (Γ/2)²) + b`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lm::{least_squares, LeastSquaresProblem, LmError, OptimizerSettings};
use crate::synth::Spectrum2D;
use crate::units::{db_to_power, power_to_db};

/// Smallest height of a secondary peak, as a fraction of the primary peak
/// height above baseline.
pub const SECONDARY_PEAK_MIN_RELATIVE_HEIGHT: f64 = 0.05;

/// A secondary peak must stand this many relative-noise units above the
/// valley separating it from the primary.
pub const SECONDARY_PEAK_NOISE_FACTOR: f64 = 4.0;

/// Trace points whose fwhm differs from the local median by more than this
/// factor (either way) are flagged as outliers.
pub const OUTLIER_FACTOR: f64 = 10.0;

/// `A·(Γ/2)²/((f − f₀)² + (Γ/2)²) + b`.
pub fn lorentzian(f: f64, center: f64, fwhm: f64, amplitude: f64, baseline: f64) -> f64 {
    let hw2 = 0.25 * fwhm * fwhm;
    amplitude * hw2 / ((f - center).powi(2) + hw2) + baseline
}

/// Residuals `model − y` with parameters `[f₀, u, A, b]`, `Γ = |u|`.
#[derive(Debug, Clone)]
pub struct LorentzianProblem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LeastSquaresProblem for LorentzianProblem {
    fn num_params(&self) -> usize {
        4
    }

    fn num_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &x), &y) in out.iter_mut().zip(&self.x).zip(&self.y) {
            *o = lorentzian(x, p[0], p[1].abs(), p[2], p[3]) - y;
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let hw = 0.5 * p[1].abs();
        let hw2 = hw * hw;
        let sign = if p[1] < 0.0 { -1.0 } else { 1.0 };
        for (i, &x) in self.x.iter().enumerate() {
            let dx = x - p[0];
            let den = dx * dx + hw2;
            let shape = hw2 / den;
            jac[(i, 0)] = p[2] * 2.0 * dx * hw2 / (den * den);
            // ∂shape/∂hw · ∂hw/∂u
            jac[(i, 1)] = p[2] * 2.0 * hw * dx * dx / (den * den) * 0.5 * sign;
            jac[(i, 2)] = shape;
            jac[(i, 3)] = 1.0;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceFitSettings {
    pub optimizer: OptimizerSettings,
    /// Half-width of the fit window in units of the initial fwhm estimate.
    pub window_fwhms: f64,
    pub min_samples: usize,
    /// Detection threshold above baseline in units of the noise estimate.
    pub noise_threshold_sigma: f64,
}

impl Default for SliceFitSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            window_fwhms: 4.0,
            min_samples: 8,
            noise_threshold_sigma: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// Hz.
    pub center: f64,
    /// Hz.
    pub fwhm: f64,
    /// Peak height above baseline, linear power.
    pub amplitude: f64,
    /// Linear power.
    pub baseline: f64,
    /// Covariance of `[center, fwhm, amplitude, baseline]`.
    pub covariance: Option<[[f64; 4]; 4]>,
    pub converged: bool,
    pub iterations: usize,
}

impl LorentzianFit {
    /// Peak height over baseline, dB.
    pub fn amplitude_db(&self) -> f64 {
        power_to_db((self.amplitude + self.baseline) / self.baseline)
    }

    pub fn baseline_db(&self) -> f64 {
        power_to_db(self.baseline)
    }

    pub fn center_error(&self) -> Option<f64> {
        self.covariance.map(|c| c[0][0].max(0.0).sqrt())
    }

    pub fn fwhm_error(&self) -> Option<f64> {
        self.covariance.map(|c| c[1][1].max(0.0).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceKind {
    Single,
    /// Two resolved maxima, separation larger than their mean fwhm.
    TwoPeak,
    /// A second maximum overlapping the primary line; the single-line fit is
    /// broadened by it.
    Broadened,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceFit {
    pub primary: LorentzianFit,
    pub secondary: Option<LorentzianFit>,
    pub kind: SliceKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum SliceError {
    #[error("no peak above baseline + {threshold_sigma}σ")]
    NoPeak { threshold_sigma: f64 },
    #[error("slice has {got} samples, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("field index {0} out of range")]
    FieldIndex(usize),
    #[error("Lorentzian fit failed: {0}")]
    FitFailed(String),
}

impl From<LmError> for SliceError {
    fn from(e: LmError) -> Self {
        SliceError::FitFailed(e.to_string())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust noise estimates from first differences: absolute, and relative
/// to the local signal level.
fn noise_estimates(y: &[f64]) -> (f64, f64) {
    let mut abs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut rel: Vec<f64> = y
        .windows(2)
        .map(|w| {
            let m = 0.5 * (w[0].abs() + w[1].abs());
            if m > 0.0 {
                (w[1] - w[0]).abs() / m
            } else {
                0.0
            }
        })
        .collect();
    let k = 1.4826 / std::f64::consts::SQRT_2;
    (k * median(&mut abs), k * median(&mut rel))
}

/// Full width at half maximum read off the samples around `peak`.
fn half_max_width(f: &[f64], y: &[f64], peak: usize, baseline: f64) -> f64 {
    let half = 0.5 * (y[peak] + baseline);
    let cross = |dir: isize| -> Option<f64> {
        let mut i = peak as isize;
        loop {
            let j = i + dir;
            if j < 0 || j >= y.len() as isize {
                return None;
            }
            let (a, b) = (i as usize, j as usize);
            if y[b] <= half {
                let t = (y[a] - half) / (y[a] - y[b]);
                return Some(f[a] + t * (f[b] - f[a]));
            }
            i = j;
        }
    };
    let step = (f[f.len() - 1] - f[0]).abs() / (f.len() - 1) as f64;
    match (cross(-1), cross(1)) {
        (Some(lo), Some(hi)) => (hi - lo).abs().max(step),
        (Some(x), None) | (None, Some(x)) => (2.0 * (x - f[peak]).abs()).max(step),
        (None, None) => step * y.len() as f64 * 0.25,
    }
}

/// Highest local maximum other than `primary` whose prominence over the
/// valley towards the primary clears the noise-scaled margin.
fn find_secondary(y: &[f64], primary: usize, baseline: f64, abs_margin: f64, rel_noise: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in 1..y.len().saturating_sub(1) {
        if k == primary || !(y[k] >= y[k - 1] && y[k] > y[k + 1]) {
            continue;
        }
        let (lo, hi) = if k < primary { (k, primary) } else { (primary, k) };
        let valley = y[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
        let margin = abs_margin + SECONDARY_PEAK_NOISE_FACTOR * rel_noise * y[k];
        if y[k] - valley.max(baseline) >= margin && best.is_none_or(|b| y[k] > y[b]) {
            best = Some(k);
        }
    }
    best
}

/// Index range fitted for the peak at `peak`: ±`half_width` in frequency,
/// cut at the valley towards `other`, widened to at least `min_samples`.
fn window(
    f: &[f64],
    y: &[f64],
    peak: usize,
    half_width: f64,
    other: Option<usize>,
    min_samples: usize,
) -> (usize, usize) {
    let n = f.len();
    let mut lo = peak;
    while lo > 0 && (f[lo - 1] - f[peak]).abs() <= half_width {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < n && (f[hi + 1] - f[peak]).abs() <= half_width {
        hi += 1;
    }
    if let Some(o) = other {
        let (a, b) = if o < peak { (o, peak) } else { (peak, o) };
        let valley = (a..=b).min_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap_or(peak);
        if o < peak {
            lo = lo.max(valley);
        } else {
            hi = hi.min(valley);
        }
    }
    while hi - lo + 1 < min_samples.min(n) {
        if lo > 0 && (hi + 1 >= n || peak - lo <= hi - peak) {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Fits one Lorentzian to samples `[lo, hi]` starting from the given
/// center/width estimates.
fn fit_window(
    f: &[f64],
    y: &[f64],
    (lo, hi): (usize, usize),
    center0: f64,
    fwhm0: f64,
    baseline0: f64,
    settings: &OptimizerSettings,
) -> Result<LorentzianFit, SliceError> {
    let ymax = y[lo..=hi].iter().cloned().fold(f64::MIN, f64::max);
    let scale = if ymax > 0.0 { ymax } else { 1.0 };
    let problem = LorentzianProblem {
        x: f[lo..=hi].iter().map(|v| (v - center0) / fwhm0).collect(),
        y: y[lo..=hi].iter().map(|v| v / scale).collect(),
    };
    let b0 = baseline0 / scale;
    let start = [0.0, 1.0, 1.0 - b0, b0];
    let res = least_squares(&problem, &start, settings)?;
    let p = &res.params;
    let s = [fwhm0, fwhm0 * p[1].signum(), scale, scale];
    let covariance = res.covariance().map(|c| {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = c[(i, j)] * s[i] * s[j];
            }
        }
        out
    });
    let fit = LorentzianFit {
        center: center0 + fwhm0 * p[0],
        fwhm: fwhm0 * p[1].abs(),
        amplitude: scale * p[2],
        baseline: scale * p[3],
        covariance,
        converged: res.converged,
        iterations: res.iterations,
    };
    if !(fit.fwhm > 0.0 && fit.center.is_finite()) {
        return Err(SliceError::FitFailed("degenerate width".into()));
    }
    Ok(fit)
}

/// Fits a Lorentzian lineshape to linear-power samples `y` at frequencies `f`.
pub fn fit_lorentzian_samples(
    f: &[f64],
    y: &[f64],
    settings: &SliceFitSettings,
) -> Result<SliceFit, SliceError> {
    let n = f.len();
    if n < settings.min_samples || n < 3 {
        return Err(SliceError::TooFewSamples {
            got: n,
            need: settings.min_samples.max(3),
        });
    }
    let baseline0 = median(&mut y.to_vec());
    let (sigma, rel_noise) = noise_estimates(y);
    let peak = (0..n).max_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap_or(0);
    let height = y[peak] - baseline0;
    if !(height > settings.noise_threshold_sigma * sigma) || height <= 0.0 {
        return Err(SliceError::NoPeak {
            threshold_sigma: settings.noise_threshold_sigma,
        });
    }
    let abs_margin =
        (settings.noise_threshold_sigma * sigma).max(SECONDARY_PEAK_MIN_RELATIVE_HEIGHT * height);
    let second = find_secondary(y, peak, baseline0, abs_margin, rel_noise);

    let fwhm0 = half_max_width(f, y, peak, baseline0);
    let win = window(f, y, peak, settings.window_fwhms * fwhm0, second, settings.min_samples);
    let primary = fit_window(f, y, win, f[peak], fwhm0, baseline0, &settings.optimizer)?;

    let Some(k) = second else {
        return Ok(SliceFit {
            primary,
            secondary: None,
            kind: SliceKind::Single,
        });
    };
    let fwhm_k = half_max_width(f, y, k, baseline0);
    let win_k = window(f, y, k, settings.window_fwhms * fwhm_k, Some(peak), settings.min_samples);
    let secondary = fit_window(f, y, win_k, f[k], fwhm_k, baseline0, &settings.optimizer).ok();
    let (sep, mean_fwhm) = match &secondary {
        Some(s) => ((s.center - primary.center).abs(), 0.5 * (s.fwhm + primary.fwhm)),
        None => ((f[k] - f[peak]).abs(), 0.5 * (fwhm_k + fwhm0)),
    };
    let kind = if sep > mean_fwhm {
        SliceKind::TwoPeak
    } else {
        SliceKind::Broadened
    };
    Ok(SliceFit {
        primary,
        secondary,
        kind,
    })
}

/// Fits the constant-field slice `field_index` of a dB spectrum.
pub fn fit_slice(
    spectrum: &Spectrum2D,
    field_index: usize,
    settings: &SliceFitSettings,
) -> Result<SliceFit, SliceError> {
    if field_index >= spectrum.n_field() {
        return Err(SliceError::FieldIndex(field_index));
    }
    let y: Vec<f64> = spectrum.row(field_index).iter().map(|&d| db_to_power(d)).collect();
    fit_lorentzian_samples(&spectrum.freq_axis, &y, settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFlag {
    Ok,
    Broadened,
    TwoPeak,
    NoPeak,
    Failed,
    Outlier,
}

impl TraceFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceFlag::Ok => "ok",
            TraceFlag::Broadened => "broadened",
            TraceFlag::TwoPeak => "two_peak",
            TraceFlag::NoPeak => "no_peak",
            TraceFlag::Failed => "failed",
            TraceFlag::Outlier => "outlier",
        }
    }

    /// The slice produced a usable primary line.
    pub fn has_fit(self) -> bool {
        matches!(self, TraceFlag::Ok | TraceFlag::Broadened | TraceFlag::TwoPeak)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    /// T.
    pub field: f64,
    /// Hz, `NaN` without a fit.
    pub center: f64,
    /// Hz, `NaN` without a fit.
    pub fwhm: f64,
    pub flag: TraceFlag,
    pub fit: Option<SliceFit>,
}

/// Per-field slice fits, in field order.
pub fn linewidth_trace(spectrum: &Spectrum2D, settings: &SliceFitSettings) -> Vec<TracePoint> {
    let mut trace: Vec<TracePoint> = (0..spectrum.n_field())
        .into_par_iter()
        .map(|i| {
            let field = spectrum.field_axis[i];
            match fit_slice(spectrum, i, settings) {
                Ok(fit) => TracePoint {
                    field,
                    center: fit.primary.center,
                    fwhm: fit.primary.fwhm,
                    flag: match fit.kind {
                        SliceKind::Single => TraceFlag::Ok,
                        SliceKind::TwoPeak => TraceFlag::TwoPeak,
                        SliceKind::Broadened => TraceFlag::Broadened,
                    },
                    fit: Some(fit),
                },
                Err(e) => TracePoint {
                    field,
                    center: f64::NAN,
                    fwhm: f64::NAN,
                    flag: match e {
                        SliceError::NoPeak { .. } => TraceFlag::NoPeak,
                        _ => TraceFlag::Failed,
                    },
                    fit: None,
                },
            }
        })
        .collect();
    flag_outliers(&mut trace);
    trace
}

/// Marks points whose fwhm is off by more than [`OUTLIER_FACTOR`] from the
/// median of up to five fitted neighbours on each side.
fn flag_outliers(trace: &mut [TracePoint]) {
    let fitted: Vec<usize> = (0..trace.len()).filter(|&i| trace[i].flag.has_fit()).collect();
    let mut outliers = Vec::new();
    for (pos, &i) in fitted.iter().enumerate() {
        let lo = pos.saturating_sub(5);
        let hi = (pos + 6).min(fitted.len());
        let mut neighbours: Vec<f64> = fitted[lo..hi]
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| trace[j].fwhm)
            .collect();
        if neighbours.len() < 2 {
            continue;
        }
        let m = median(&mut neighbours);
        let ratio = trace[i].fwhm / m;
        if !(ratio.is_finite() && (1.0 / OUTLIER_FACTOR..=OUTLIER_FACTOR).contains(&ratio)) {
            outliers.push(i);
        }
    }
    for i in outliers {
        trace[i].flag = TraceFlag::Outlier;
    }
}

/// Median fwhm over the fitted points in the outermost quartile of
/// `|B − b_fmr|`; estimates `2κ` (in Hz) for a well-separated resonator.
pub fn far_detuned_fwhm(trace: &[TracePoint], b_fmr: f64) -> Option<f64> {
    let mut fitted: Vec<&TracePoint> = trace
        .iter()
        .filter(|p| p.flag == TraceFlag::Ok && p.fwhm.is_finite())
        .collect();
    if fitted.is_empty() {
        return None;
    }
    fitted.sort_by(|a, b| (a.field - b_fmr).abs().total_cmp(&(b.field - b_fmr).abs()));
    let take = fitted.len().div_ceil(4);
    let mut widths: Vec<f64> = fitted[fitted.len() - take..].iter().map(|p| p.fwhm).collect();
    Some(median(&mut widths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exact_lorentzian_recovered() {
        let f = grid(5.85e9, 5.95e9, 201);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian(x, 5.9013e9, 6.2e6, 0.01, 2e-5))
            .collect();
        let fit = fit_lorentzian_samples(&f, &y, &SliceFitSettings::default()).unwrap();
        let p = fit.primary;
        assert_eq!(fit.kind, SliceKind::Single);
        assert!((p.center / 5.9013e9 - 1.0).abs() < 1e-9);
        assert!((p.fwhm / 6.2e6 - 1.0).abs() < 1e-9);
        assert!((p.amplitude / 0.01 - 1.0).abs() < 1e-9);
        assert!((p.baseline / 2e-5 - 1.0).abs() < 1e-9);
        assert!(p.converged);
    }

    #[test]
    fn flat_slice_has_no_peak() {
        let f = grid(1.0, 2.0, 50);
        let y: Vec<f64> = (0..50).map(|i| 1.0 + 1e-3 * ((i * 7919) % 13) as f64).collect();
        assert!(matches!(
            fit_lorentzian_samples(&f, &y, &SliceFitSettings::default()),
            Err(SliceError::NoPeak { .. })
        ));
    }

    #[test]
    fn too_few_samples() {
        let f = grid(1.0, 2.0, 5);
        assert!(matches!(
            fit_lorentzian_samples(&f, &[0.0, 1.0, 3.0, 1.0, 0.0], &SliceFitSettings::default()),
            Err(SliceError::TooFewSamples { got: 5, need: 8 })
        ));
    }

    #[test]
    fn two_separated_peaks() {
        let f = grid(0.0, 100.0, 1001);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian(x, 30.0, 2.0, 1.0, 0.0) + lorentzian(x, 70.0, 4.0, 0.6, 0.0) + 1e-4)
            .collect();
        let fit = fit_lorentzian_samples(&f, &y, &SliceFitSettings::default()).unwrap();
        assert_eq!(fit.kind, SliceKind::TwoPeak);
        assert!((fit.primary.center - 30.0).abs() < 0.01);
        let s = fit.secondary.unwrap();
        assert!((s.center - 70.0).abs() < 0.05, "{}", s.center);
    }

    #[test]
    fn overlapping_peaks_flagged_broadened() {
        let f = grid(0.0, 100.0, 1001);
        let y: Vec<f64> = f
            .iter()
            .map(|&x| lorentzian(x, 48.0, 2.0, 1.0, 0.0) + lorentzian(x, 52.5, 2.0, 0.8, 0.0))
            .collect();
        let fit = fit_lorentzian_samples(&f, &y, &SliceFitSettings::default()).unwrap();
        assert_ne!(fit.kind, SliceKind::Single);
    }

    #[test]
    fn far_detuned_median_uses_outer_quartile() {
        let mk = |b: f64, w: f64| TracePoint {
            field: b,
            center: 0.0,
            fwhm: w,
            flag: TraceFlag::Ok,
            fit: None,
        };
        let trace: Vec<TracePoint> = (0..8).map(|i| mk(i as f64, if i >= 6 { 1.0 } else { 5.0 })).collect();
        assert_eq!(far_detuned_fwhm(&trace, 0.0), Some(1.0));
    }

    #[test]
    fn outlier_flagged() {
        let mut trace: Vec<TracePoint> = (0..11)
            .map(|i| TracePoint {
                field: i as f64,
                center: 0.0,
                fwhm: if i == 5 { 100.0 } else { 1.0 },
                flag: TraceFlag::Ok,
                fit: None,
            })
            .collect();
        flag_outliers(&mut trace);
        assert_eq!(trace[5].flag, TraceFlag::Outlier);
        assert_eq!(trace.iter().filter(|p| p.flag == TraceFlag::Outlier).count(), 1);
    }
}
