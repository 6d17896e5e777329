//! Fit of the input-output transmission model to a whole field–frequency map.
//!
//! The map is fitted in dB, `y = offset − 10·log10|den|²` with
//! `den = i(ω − ω_r) − κ + g²/(i(ω − ω_F) − γ/2)`. The coupling amplitude
//! `κ_c`, any insertion gain and the baseline level only enter through the
//! single additive `offset`, so they are not separately identifiable.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lm::{least_squares, LeastSquaresProblem, LmError, OptimizerSettings};
use crate::constants::PhysicalConstants;
use crate::physics::{cooperativity_from_rates, s21_denominator};
use crate::synth::Spectrum2D;
use crate::units::hz_to_rad;

const DB_PER_NEPER_SQ: f64 = 20.0 / std::f64::consts::LN_10;

pub const PARAM_NAMES: [&str; 7] = ["omega_r", "kappa", "g_eff", "gamma", "g_s", "b_fmr", "offset_db"];

/// Rates in rad/s, field in T, offset in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelParams {
    pub omega_r: f64,
    /// Total resonator half-width `κ_c + κ_i`.
    pub kappa: f64,
    pub g_eff: f64,
    /// Full spin linewidth; the spin half-width is `γ/2`.
    pub gamma: f64,
    pub g_s: f64,
    pub b_fmr: f64,
    /// `10·log10(κ_c²·scale)`: amplitude scale and baseline level in one term.
    pub offset_db: f64,
}

impl FullModelParams {
    fn to_vec(self) -> [f64; 7] {
        [
            self.omega_r,
            self.kappa,
            self.g_eff,
            self.gamma,
            self.g_s,
            self.b_fmr,
            self.offset_db,
        ]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self {
            omega_r: p[0],
            kappa: p[1].abs(),
            g_eff: p[2].abs(),
            gamma: p[3].abs(),
            g_s: p[4],
            b_fmr: p[5],
            offset_db: p[6],
        }
    }

    /// Model value in dB, `None` exactly on a spin pole.
    pub fn power_db(&self, b_ext: f64, omega: f64, c: &PhysicalConstants) -> Option<f64> {
        let omega_f = self.omega_r + c.gyromagnetic_ratio(self.g_s) * (b_ext - self.b_fmr);
        let den = s21_denominator(omega, self.omega_r, self.kappa, omega_f, self.gamma, self.g_eff)?;
        Some(self.offset_db - 10.0 * den.norm_sqr().log10())
    }

    /// `κ_c` implied by the offset if the feedline adds no gain or loss.
    pub fn implied_kappa_c(&self) -> f64 {
        10f64.powf(self.offset_db / 20.0)
    }
}

/// Residuals `model_dB − data_dB` over a row-major `field × frequency` grid,
/// parameters `[ω_r, κ, g_eff, γ, g_s, B_FMR, offset]` with the three rates
/// entering through their absolute values.
pub struct FullModelProblem<'a> {
    pub fields: &'a [f64],
    /// Probe angular frequencies, rad/s.
    pub omegas: &'a [f64],
    pub data_db: &'a [f64],
    pub constants: &'a PhysicalConstants,
}

impl FullModelProblem<'_> {
    fn denominators(&self, p: &[f64], mut visit: impl FnMut(usize, f64, Complex64, Complex64)) {
        let m = FullModelParams::from_slice(p);
        let gamma_e = self.constants.gyromagnetic_ratio(m.g_s);
        let nf = self.omegas.len();
        for (i, &b) in self.fields.iter().enumerate() {
            let omega_f = m.omega_r + gamma_e * (b - m.b_fmr);
            for (j, &w) in self.omegas.iter().enumerate() {
                let q = Complex64::new(-0.5 * m.gamma, w - omega_f);
                let den = Complex64::new(-m.kappa, w - m.omega_r) + m.g_eff * m.g_eff / q;
                visit(i * nf + j, b, q, den);
            }
        }
    }
}

impl LeastSquaresProblem for FullModelProblem<'_> {
    fn num_params(&self) -> usize {
        7
    }

    fn num_residuals(&self) -> usize {
        self.fields.len() * self.omegas.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let offset = p[6];
        self.denominators(p, |k, _, _, den| {
            out[k] = offset - 10.0 * den.norm_sqr().log10() - self.data_db[k];
        });
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let m = FullModelParams::from_slice(p);
        let c = self.constants;
        let g2 = m.g_eff * m.g_eff;
        let gamma_e = c.gyromagnetic_ratio(m.g_s);
        let dgamma_e = c.mu_b / c.hbar;
        let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
        let (s_kappa, s_g, s_gamma) = (sign(p[1]), sign(p[2]), sign(p[3]));
        let i1 = Complex64::i();
        self.denominators(p, |k, b, q, den| {
            let inv_den = 1.0 / den;
            let g2_q2 = g2 / (q * q);
            let d = |dden: Complex64| -DB_PER_NEPER_SQ * (dden * inv_den).re;
            jac[(k, 0)] = d(-i1 + i1 * g2_q2);
            jac[(k, 1)] = d(Complex64::new(-s_kappa, 0.0));
            jac[(k, 2)] = d(2.0 * m.g_eff * s_g / q);
            jac[(k, 3)] = d(0.5 * s_gamma * g2_q2);
            jac[(k, 4)] = d(i1 * g2_q2 * dgamma_e * (b - m.b_fmr));
            jac[(k, 5)] = d(-i1 * g2_q2 * gamma_e);
            jac[(k, 6)] = 1.0;
        });
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct FullFitSettings {
    pub optimizer: OptimizerSettings,
    /// Stated per-point noise in dB for the reduced chi-square.
    pub noise_sigma_db: Option<f64>,
}


/// Standard deviation in dB of a small relative amplitude error `σ`.
pub fn amplitude_sigma_to_db(sigma: f64) -> f64 {
    DB_PER_NEPER_SQ * sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullModelFit {
    pub params: FullModelParams,
    /// 1σ errors in the order of [`PARAM_NAMES`].
    pub standard_errors: Option<[f64; 7]>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub rms_residual_db: f64,
    /// `Σr²/((m − n)·σ²)` against the stated noise.
    pub reduced_chi_square: Option<f64>,
    pub converged: bool,
    pub termination: String,
    pub iterations: usize,
    /// Rates that ended at zero.
    pub at_bound: Vec<String>,
}

impl FullModelFit {
    pub fn cooperativity(&self) -> Option<f64> {
        let p = &self.params;
        cooperativity_from_rates(p.g_eff, p.kappa, p.gamma).ok()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FullFitError {
    #[error("spectrum has fewer points ({0}) than parameters")]
    TooFewPoints(usize),
    #[error("spectrum contains non-finite values")]
    NonFiniteData,
    #[error("initial parameters give a non-finite model")]
    BadInitial,
    #[error(transparent)]
    Optimizer(LmError),
}

impl From<LmError> for FullFitError {
    fn from(e: LmError) -> Self {
        match e {
            LmError::NonFiniteInitial => FullFitError::BadInitial,
            e => FullFitError::Optimizer(e),
        }
    }
}

/// Fits all model parameters to a dB spectrum from `initial`.
pub fn fit_full(
    spectrum: &Spectrum2D,
    initial: &FullModelParams,
    settings: &FullFitSettings,
    c: &PhysicalConstants,
) -> Result<FullModelFit, FullFitError> {
    let n = spectrum.power_db.len();
    if n <= 7 {
        return Err(FullFitError::TooFewPoints(n));
    }
    if spectrum.power_db.iter().any(|v| !v.is_finite()) {
        return Err(FullFitError::NonFiniteData);
    }
    let omegas: Vec<f64> = spectrum.freq_axis.iter().map(|&f| hz_to_rad(f)).collect();
    let problem = FullModelProblem {
        fields: &spectrum.field_axis,
        omegas: &omegas,
        data_db: &spectrum.power_db,
        constants: c,
    };
    let res = least_squares(&problem, &initial.to_vec(), &settings.optimizer)?;
    let params = FullModelParams::from_slice(&res.params);

    let signs: [f64; 7] = std::array::from_fn(|i| {
        if (1..=3).contains(&i) && res.params[i] < 0.0 {
            -1.0
        } else {
            1.0
        }
    });
    let covariance = res.covariance().map(|m| {
        (0..7)
            .map(|i| (0..7).map(|j| m[(i, j)] * signs[i] * signs[j]).collect())
            .collect::<Vec<Vec<f64>>>()
    });
    let standard_errors = covariance
        .as_ref()
        .map(|m| std::array::from_fn(|i| m[i][i].max(0.0).sqrt()));
    let sum_sq = 2.0 * res.cost;
    let reduced_chi_square = settings
        .noise_sigma_db
        .filter(|s| *s > 0.0)
        .map(|s| sum_sq / ((n - 7) as f64 * s * s));
    let floor = 1e-12 * params.omega_r.abs();
    let at_bound = [("kappa", params.kappa), ("g_eff", params.g_eff), ("gamma", params.gamma)]
        .iter()
        .filter(|(_, v)| *v <= floor)
        .map(|(name, _)| name.to_string())
        .collect();

    Ok(FullModelFit {
        params,
        standard_errors,
        covariance,
        rms_residual_db: (sum_sq / n as f64).sqrt(),
        reduced_chi_square,
        converged: res.converged,
        termination: format!("{:?}", res.termination),
        iterations: res.iterations,
        at_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CODATA_2018 as C;
    use crate::units::*;

    fn truth() -> FullModelParams {
        FullModelParams {
            omega_r: ghz_to_rad(5.9),
            kappa: mhz_to_rad(3.0),
            g_eff: mhz_to_rad(450.0),
            gamma: mhz_to_rad(50.0),
            g_s: 2.17,
            b_fmr: mt_to_t(170.26),
            offset_db: 20.0 * mhz_to_rad(0.3).log10(),
        }
    }

    fn map(p: &FullModelParams) -> Spectrum2D {
        let fields: Vec<f64> = (0..41).map(|i| mt_to_t(90.0 + 4.0 * i as f64)).collect();
        let freqs: Vec<f64> = (0..301).map(|j| 5.3e9 + 4e6 * j as f64).collect();
        let mut db = Vec::new();
        for &b in &fields {
            for &f in &freqs {
                db.push(p.power_db(b, hz_to_rad(f), &C).unwrap());
            }
        }
        Spectrum2D::new(fields, freqs, db, Default::default()).unwrap()
    }

    #[test]
    fn model_matches_transmission() {
        use crate::physics::{s21, HybridModel, ResonatorParams, SpinEnsembleParams};
        let res = ResonatorParams::new(ghz_to_rad(5.9), mhz_to_rad(0.3), mhz_to_rad(2.7)).unwrap();
        let ens = SpinEnsembleParams::new(2.17, mt_to_t(24.0), mhz_to_rad(50.0)).unwrap();
        let h = HybridModel::from_parameters(res, ens, mhz_to_rad(450.0), &C).unwrap();
        let p = FullModelParams {
            b_fmr: h.b_fmr,
            ..truth()
        };
        for (b, f) in [(0.15, 5.95e9), (0.1702, 6.2e9), (0.4, 5.9e9)] {
            let w = hz_to_rad(f);
            let direct = power_to_db(s21(&h, b, w, &C).unwrap().norm_sqr());
            assert!((p.power_db(b, w, &C).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_from_nearby_start() {
        let t = truth();
        let sp = map(&t);
        let start = FullModelParams {
            omega_r: t.omega_r + mhz_to_rad(2.0),
            kappa: t.kappa * 1.3,
            g_eff: t.g_eff * 0.95,
            gamma: t.gamma * 0.7,
            g_s: 2.1,
            b_fmr: t.b_fmr + 0.003,
            offset_db: t.offset_db - 3.0,
        };
        let fit = fit_full(&sp, &start, &Default::default(), &C).unwrap();
        let p = fit.params;
        assert!(fit.converged, "{}", fit.termination);
        for (a, b) in p.to_vec().iter().zip(t.to_vec()) {
            assert!((a / b - 1.0).abs() < 1e-8, "{a} vs {b}");
        }
        assert!(fit.at_bound.is_empty());
        assert!(fit.reduced_chi_square.is_none());
    }

    #[test]
    fn rejects_bad_input() {
        let mut sp = map(&truth());
        sp.power_db[3] = f64::NAN;
        assert_eq!(
            fit_full(&sp, &truth(), &Default::default(), &C).unwrap_err(),
            FullFitError::NonFiniteData
        );
    }
}
