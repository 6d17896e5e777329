//! Fits of the two-oscillator normal-mode frequencies to branch points.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lm::{least_squares, LeastSquaresProblem, LmError, OptimizerSettings};
use crate::constants::PhysicalConstants;
use crate::physics::branches_at_detuning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        }
    }

    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

/// A measured normal-mode frequency. Unlabeled points are assigned to the
/// nearest branch of the current model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    /// Applied field, T.
    pub field: f64,
    /// rad/s.
    pub omega: f64,
    pub branch: Option<Branch>,
}

/// Model parameters: rates in rad/s, field in T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnticrossingParams {
    pub g_eff: f64,
    pub b_fmr: f64,
    pub g_s: f64,
    pub omega_r: f64,
}

impl AnticrossingParams {
    fn to_vec(self) -> [f64; 4] {
        [self.g_eff, self.b_fmr, self.g_s, self.omega_r]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self {
            g_eff: p[0].abs(),
            b_fmr: p[1],
            g_s: p[2],
            omega_r: p[3],
        }
    }

    /// Frequency of `branch` at applied field `b_ext`.
    pub fn branch_frequency(&self, branch: Branch, b_ext: f64, c: &PhysicalConstants) -> f64 {
        let delta = c.gyromagnetic_ratio(self.g_s) * (b_ext - self.b_fmr);
        let b = branches_at_detuning(self.omega_r, delta, self.g_eff);
        match branch {
            Branch::Upper => b.upper,
            Branch::Lower => b.lower,
        }
    }

    pub fn nearest_branch(&self, b_ext: f64, omega: f64, c: &PhysicalConstants) -> Branch {
        let up = self.branch_frequency(Branch::Upper, b_ext, c);
        let lo = self.branch_frequency(Branch::Lower, b_ext, c);
        if (omega - up).abs() <= (omega - lo).abs() {
            Branch::Upper
        } else {
            Branch::Lower
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnticrossingFit {
    pub params: AnticrossingParams,
    /// 1σ errors of `[g_eff, b_fmr, g_s, omega_r]`; `None` if the normal
    /// matrix is singular.
    pub standard_errors: Option<[f64; 4]>,
    pub covariance: Option<[[f64; 4]; 4]>,
    /// rad/s.
    pub residual_rms: f64,
    pub labels: Vec<Branch>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnticrossingSettings {
    pub optimizer: OptimizerSettings,
    /// Additional starting values of `g_s`; the best final cost wins.
    pub g_s_starts: Vec<f64>,
    /// Relabel-and-refit rounds for unlabeled points.
    pub max_relabel_rounds: usize,
}

impl Default for AnticrossingSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            g_s_starts: (0..=6).map(|i| 1.8 + 0.1 * i as f64).collect(),
            max_relabel_rounds: 5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnticrossingError {
    #[error("need at least 6 branch points, got {0}")]
    TooFewPoints(usize),
    #[error("branch points do not span both sides of the resonance field")]
    OneSided,
    #[error("all points lie on the {0} branch; coupling and resonance field are not separately determined (rank deficient)")]
    RankDeficient(&'static str),
    #[error("non-finite branch point at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Optimizer(#[from] LmError),
}

/// Residuals `ω_model(B_i) − ω_i` with parameters `[u, B_FMR, g_s, ω_r]`,
/// `g_eff = |u|`.
pub struct AnticrossingProblem<'a> {
    pub fields: &'a [f64],
    pub omegas: &'a [f64],
    pub branches: &'a [Branch],
    pub constants: &'a PhysicalConstants,
}

impl LeastSquaresProblem for AnticrossingProblem<'_> {
    fn num_params(&self) -> usize {
        4
    }

    fn num_residuals(&self) -> usize {
        self.fields.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let m = AnticrossingParams::from_slice(p);
        for i in 0..self.fields.len() {
            out[i] = m.branch_frequency(self.branches[i], self.fields[i], self.constants) - self.omegas[i];
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let c = self.constants;
        let g = p[0].abs();
        let u_sign = if p[0] < 0.0 { -1.0 } else { 1.0 };
        let gamma_e = c.gyromagnetic_ratio(p[2]);
        for i in 0..self.fields.len() {
            let sign = self.branches[i].sign();
            let db = self.fields[i] - p[1];
            let delta = gamma_e * db;
            let s = delta.hypot(2.0 * g).max(f64::MIN_POSITIVE);
            let d_delta = 0.5 + sign * 0.5 * delta / s;
            jac[(i, 0)] = sign * 2.0 * g / s * u_sign;
            jac[(i, 1)] = -gamma_e * d_delta;
            jac[(i, 2)] = c.mu_b / c.hbar * db * d_delta;
            jac[(i, 3)] = 1.0;
        }
        true
    }
}

fn validate(points: &[BranchPoint], initial: &AnticrossingParams) -> Result<(), AnticrossingError> {
    if points.len() < 6 {
        return Err(AnticrossingError::TooFewPoints(points.len()));
    }
    if let Some(i) = points
        .iter()
        .position(|p| !(p.field.is_finite() && p.omega.is_finite()))
    {
        return Err(AnticrossingError::NonFinite(i));
    }
    let below = points.iter().any(|p| p.field < initial.b_fmr);
    let above = points.iter().any(|p| p.field > initial.b_fmr);
    if !(below && above) {
        return Err(AnticrossingError::OneSided);
    }
    Ok(())
}

fn fit_labeled(
    fields: &[f64],
    omegas: &[f64],
    labels: &[Branch],
    starts: &[AnticrossingParams],
    settings: &OptimizerSettings,
    c: &PhysicalConstants,
) -> Result<super::lm::LeastSquaresResult, AnticrossingError> {
    let problem = AnticrossingProblem {
        fields,
        omegas,
        branches: labels,
        constants: c,
    };
    let mut best: Option<super::lm::LeastSquaresResult> = None;
    for s in starts {
        let res = least_squares(&problem, &s.to_vec(), settings)?;
        if best.as_ref().is_none_or(|b| res.cost < b.cost) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Least-squares fit of `[g_eff, B_FMR, g_s, ω_r]` to branch points.
///
/// Unlabeled points take the label of the nearest branch of the current
/// model; labels are refreshed after each fit until they stop changing.
pub fn fit_anticrossing(
    points: &[BranchPoint],
    initial: &AnticrossingParams,
    settings: &AnticrossingSettings,
    c: &PhysicalConstants,
) -> Result<AnticrossingFit, AnticrossingError> {
    validate(points, initial)?;
    let fields: Vec<f64> = points.iter().map(|p| p.field).collect();
    let omegas: Vec<f64> = points.iter().map(|p| p.omega).collect();

    let mut starts = vec![*initial];
    for &g_s in &settings.g_s_starts {
        if (g_s - initial.g_s).abs() > 1e-9 {
            starts.push(AnticrossingParams { g_s, ..*initial });
        }
    }

    let label_with = |m: &AnticrossingParams| -> Vec<Branch> {
        points
            .iter()
            .map(|p| p.branch.unwrap_or_else(|| m.nearest_branch(p.field, p.omega, c)))
            .collect()
    };
    let mut labels = label_with(initial);
    let mut rounds = 0;
    let res = loop {
        if labels.iter().all(|&b| b == labels[0]) {
            return Err(AnticrossingError::RankDeficient(labels[0].as_str()));
        }
        let res = fit_labeled(&fields, &omegas, &labels, &starts, &settings.optimizer, c)?;
        let model = AnticrossingParams::from_slice(&res.params);
        let relabeled = label_with(&model);
        rounds += 1;
        if relabeled == labels || rounds > settings.max_relabel_rounds {
            break res;
        }
        labels = relabeled;
        starts = vec![model];
    };

    let params = AnticrossingParams::from_slice(&res.params);
    let covariance = res.covariance().map(|m| {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                // d g_eff / d u = sign(u)
                let si = if i == 0 { res.params[0].signum() } else { 1.0 };
                let sj = if j == 0 { res.params[0].signum() } else { 1.0 };
                *v = m[(i, j)] * si * sj;
            }
        }
        out
    });
    let standard_errors = covariance.map(|m| std::array::from_fn(|i| m[i][i].max(0.0).sqrt()));
    Ok(AnticrossingFit {
        params,
        standard_errors,
        covariance,
        residual_rms: (2.0 * res.cost / points.len() as f64).sqrt(),
        labels,
        converged: res.converged,
        iterations: res.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CODATA_2018 as C;
    use crate::units::*;

    fn truth() -> AnticrossingParams {
        AnticrossingParams {
            g_eff: mhz_to_rad(450.0),
            b_fmr: mt_to_t(170.0),
            g_s: 2.17,
            omega_r: ghz_to_rad(5.9),
        }
    }

    fn exact_points(m: &AnticrossingParams, labeled: bool) -> Vec<BranchPoint> {
        let mut pts = Vec::new();
        for k in 0..29 {
            let b = mt_to_t(100.0 + 5.0 * k as f64);
            for br in [Branch::Upper, Branch::Lower] {
                pts.push(BranchPoint {
                    field: b,
                    omega: m.branch_frequency(br, b, &C),
                    branch: labeled.then_some(br),
                });
            }
        }
        pts
    }

    fn rough_start() -> AnticrossingParams {
        AnticrossingParams {
            g_eff: mhz_to_rad(300.0),
            b_fmr: mt_to_t(160.0),
            g_s: 2.0,
            omega_r: ghz_to_rad(5.85),
        }
    }

    #[test]
    fn exact_points_recovered() {
        let t = truth();
        for labeled in [true, false] {
            let fit = fit_anticrossing(&exact_points(&t, labeled), &rough_start(), &Default::default(), &C)
                .unwrap();
            let p = fit.params;
            assert!((p.g_eff / t.g_eff - 1.0).abs() < 1e-6);
            assert!((p.b_fmr / t.b_fmr - 1.0).abs() < 1e-6);
            assert!((p.g_s / t.g_s - 1.0).abs() < 1e-6);
            assert!((p.omega_r / t.omega_r - 1.0).abs() < 1e-6);
            assert!(fit.converged);
        }
    }

    #[test]
    fn one_branch_is_rank_deficient() {
        let pts: Vec<BranchPoint> = exact_points(&truth(), true)
            .into_iter()
            .filter(|p| p.branch == Some(Branch::Upper))
            .collect();
        assert_eq!(
            fit_anticrossing(&pts, &rough_start(), &Default::default(), &C).unwrap_err(),
            AnticrossingError::RankDeficient("upper")
        );
    }

    #[test]
    fn input_checks() {
        let pts = exact_points(&truth(), true);
        assert_eq!(
            fit_anticrossing(&pts[..4], &rough_start(), &Default::default(), &C).unwrap_err(),
            AnticrossingError::TooFewPoints(4)
        );
        let low: Vec<BranchPoint> = pts.iter().copied().filter(|p| p.field < 0.15).collect();
        assert_eq!(
            fit_anticrossing(&low, &rough_start(), &Default::default(), &C).unwrap_err(),
            AnticrossingError::OneSided
        );
    }
}
