//! Closed-form physics of the spin-ensemble / resonator hybrid.
//!
//! Every rate here is an angular rate in rad/s and every field is in tesla
//! (see [`crate::units`] for the boundary conversions). Resonator loss rates
//! `kappa_c`, `kappa_i` and the spin rate `gamma` enter the transmission
//! amplitude exactly as
//!
//! ```text
//! S21 = κc / ( i(ω−ωr) − (κc+κi) + |g_eff|² / ( i(ω−ω_FMR) − γ/2 ) )
//! ```
//!
//! so `kappa_c + kappa_i` is the resonator half-width and `gamma / 2` is the
//! spin half-width.

use num_complex::Complex64;
use thiserror::Error;

use crate::constants::PhysicalConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("effective field {0} T is negative; the linear FMR dispersion is not valid below saturation")]
    NegativeEffectiveField(f64),
    #[error("resonator mode volume is not set")]
    MissingModeVolume,
    #[error("spin density is not set")]
    MissingSpinDensity,
    #[error("transmission denominator vanishes (lossless system probed at a pole)")]
    Singular,
}

pub type Result<T> = std::result::Result<T, PhysicsError>;

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

/// One microwave resonator mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorParams {
    /// Resonance frequency, rad/s.
    pub omega_r: f64,
    /// External (feedline) coupling half-rate, rad/s.
    pub kappa_c: f64,
    /// Intrinsic loss half-rate, rad/s.
    pub kappa_i: f64,
    /// Mode volume, m³. Only the vacuum-field estimators need it.
    pub mode_volume: Option<f64>,
}

impl ResonatorParams {
    pub fn new(omega_r: f64, kappa_c: f64, kappa_i: f64) -> Result<Self> {
        let r = Self {
            omega_r,
            kappa_c,
            kappa_i,
            mode_volume: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_mode_volume(mut self, v_m: f64) -> Result<Self> {
        check("mode_volume", v_m, v_m > 0.0, "must be > 0")?;
        self.mode_volume = Some(v_m);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check("omega_r", self.omega_r, self.omega_r > 0.0, "must be > 0")?;
        check("kappa_c", self.kappa_c, self.kappa_c >= 0.0, "must be >= 0")?;
        check("kappa_i", self.kappa_i, self.kappa_i >= 0.0, "must be >= 0")?;
        check(
            "kappa",
            self.kappa(),
            self.kappa() > 0.0,
            "kappa_c + kappa_i must be > 0",
        )?;
        if let Some(v) = self.mode_volume {
            check("mode_volume", v, v > 0.0, "must be > 0")?;
        }
        Ok(())
    }

    /// Total resonator half-width `kappa_c + kappa_i`.
    pub fn kappa(&self) -> f64 {
        self.kappa_c + self.kappa_i
    }
}

/// The exchange-locked spin ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinEnsembleParams {
    pub g_s: f64,
    /// Scalar anisotropy field added to the applied field, T.
    pub b_a: f64,
    /// Spin density, m⁻³.
    pub rho: Option<f64>,
    /// Number of spins coupled to the mode. Kept as a real number so that
    /// counts like 4.5e16 need no integer type.
    pub n_spins: f64,
    /// Spin relaxation rate, rad/s. Enters the transmission as `gamma / 2`.
    pub gamma: f64,
}

impl SpinEnsembleParams {
    pub fn new(g_s: f64, b_a: f64, gamma: f64) -> Result<Self> {
        let e = Self {
            g_s,
            b_a,
            rho: None,
            n_spins: 1.0,
            gamma,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn with_spin_count(mut self, n: f64) -> Result<Self> {
        check("n_spins", n, n >= 1.0, "must be >= 1")?;
        self.n_spins = n;
        Ok(self)
    }

    pub fn with_density(mut self, rho: f64) -> Result<Self> {
        check("rho", rho, rho > 0.0, "must be > 0")?;
        self.rho = Some(rho);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check("g_s", self.g_s, self.g_s > 0.0, "must be > 0")?;
        check("b_a", self.b_a, true, "must be finite")?;
        check("gamma", self.gamma, self.gamma >= 0.0, "must be >= 0")?;
        check("n_spins", self.n_spins, self.n_spins >= 1.0, "must be >= 1")?;
        if let Some(rho) = self.rho {
            check("rho", rho, rho > 0.0, "must be > 0")?;
        }
        Ok(())
    }
}

/// Resonator plus ensemble plus the coupling between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridModel {
    pub resonator: ResonatorParams,
    pub ensemble: SpinEnsembleParams,
    /// Collective coupling rate, rad/s.
    pub g_eff: f64,
    /// Applied field at which the FMR frequency equals `omega_r`, T.
    pub b_fmr: f64,
}

impl HybridModel {
    /// Builds the model with `b_fmr` derived from the resonator frequency and
    /// the ensemble's g-factor and anisotropy field.
    pub fn from_parameters(
        resonator: ResonatorParams,
        ensemble: SpinEnsembleParams,
        g_eff: f64,
        c: &PhysicalConstants,
    ) -> Result<Self> {
        resonator.validate()?;
        ensemble.validate()?;
        check("g_eff", g_eff, g_eff >= 0.0, "must be >= 0")?;
        let b_fmr = resonance_field(&ensemble, resonator.omega_r, c)?;
        Ok(Self {
            resonator,
            ensemble,
            g_eff,
            b_fmr,
        })
    }

    /// Builds the model with an explicit resonance field, as returned by a fit.
    /// The ensemble's anisotropy field is re-derived so the two stay consistent.
    pub fn with_resonance_field(
        resonator: ResonatorParams,
        mut ensemble: SpinEnsembleParams,
        g_eff: f64,
        b_fmr: f64,
        c: &PhysicalConstants,
    ) -> Result<Self> {
        resonator.validate()?;
        ensemble.validate()?;
        check("g_eff", g_eff, g_eff >= 0.0, "must be >= 0")?;
        check("b_fmr", b_fmr, true, "must be finite")?;
        ensemble.b_a = c.hbar * resonator.omega_r / (ensemble.g_s * c.mu_b) - b_fmr;
        Ok(Self {
            resonator,
            ensemble,
            g_eff,
            b_fmr,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.resonator.kappa()
    }

    /// FMR angular frequency at applied field `b_ext`, written as `omega_r + detuning`.
    pub fn omega_fmr(&self, b_ext: f64, c: &PhysicalConstants) -> f64 {
        self.resonator.omega_r + detuning(self, b_ext, c)
    }
}

/// `g_s·μ_B·(B_ext + B_a)/ħ`.
pub fn fmr_frequency(ens: &SpinEnsembleParams, b_ext: f64, c: &PhysicalConstants) -> Result<f64> {
    let b_eff = b_ext + ens.b_a;
    if b_eff < 0.0 {
        return Err(PhysicsError::NegativeEffectiveField(b_eff));
    }
    Ok(c.gyromagnetic_ratio(ens.g_s) * b_eff)
}

/// Applied field at which the FMR frequency equals `omega_target`.
pub fn resonance_field(
    ens: &SpinEnsembleParams,
    omega_target: f64,
    c: &PhysicalConstants,
) -> Result<f64> {
    check(
        "omega_target",
        omega_target,
        omega_target > 0.0,
        "must be > 0",
    )?;
    Ok(c.hbar * omega_target / (ens.g_s * c.mu_b) - ens.b_a)
}

/// FMR minus resonator frequency, `g_s·μ_B·(B_ext − B_FMR)/ħ`.
pub fn detuning(model: &HybridModel, b_ext: f64, c: &PhysicalConstants) -> f64 {
    c.gyromagnetic_ratio(model.ensemble.g_s) * (b_ext - model.b_fmr)
}

/// Normal-mode frequencies of two coupled oscillators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonBranches {
    pub upper: f64,
    pub lower: f64,
}

impl PolaritonBranches {
    pub fn splitting(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `omega_r + Δ/2 ± ½·√(Δ² + 4g²)` for a given detuning.
pub fn branches_at_detuning(omega_r: f64, delta: f64, g_eff: f64) -> PolaritonBranches {
    let half_split = 0.5 * delta.hypot(2.0 * g_eff);
    let mid = omega_r + 0.5 * delta;
    PolaritonBranches {
        upper: mid + half_split,
        lower: mid - half_split,
    }
}

pub fn polariton_branches(
    model: &HybridModel,
    b_ext: f64,
    c: &PhysicalConstants,
) -> PolaritonBranches {
    branches_at_detuning(
        model.resonator.omega_r,
        detuning(model, b_ext, c),
        model.g_eff,
    )
}

/// Denominator of the input-output transmission.
///
/// `kappa` is the total resonator half-width. Returns `None` when the spin
/// term itself has a pole (`gamma = 0` probed exactly at `omega_fmr`); the
/// transmission is zero there.
#[inline]
pub(crate) fn s21_denominator(
    omega: f64,
    omega_r: f64,
    kappa: f64,
    omega_fmr: f64,
    gamma: f64,
    g_eff: f64,
) -> Option<Complex64> {
    let spin = Complex64::new(-0.5 * gamma, omega - omega_fmr);
    let cavity = Complex64::new(-kappa, omega - omega_r);
    if g_eff == 0.0 {
        return Some(cavity);
    }
    if spin.re == 0.0 && spin.im == 0.0 {
        return None;
    }
    Some(cavity + g_eff * g_eff / spin)
}

/// Transmission amplitude with all inputs as bare angular rates.
pub fn s21_at(
    omega: f64,
    omega_r: f64,
    kappa_c: f64,
    kappa_i: f64,
    omega_fmr: f64,
    gamma: f64,
    g_eff: f64,
) -> Result<Complex64> {
    match s21_denominator(omega, omega_r, kappa_c + kappa_i, omega_fmr, gamma, g_eff) {
        None => Ok(Complex64::new(0.0, 0.0)),
        Some(den) if den.norm_sqr() == 0.0 || !den.is_finite() => Err(PhysicsError::Singular),
        Some(den) => Ok(Complex64::new(kappa_c, 0.0) / den),
    }
}

/// Complex feedline transmission of the hybrid at applied field `b_ext` and
/// probe frequency `omega_probe`.
pub fn s21(
    model: &HybridModel,
    b_ext: f64,
    omega_probe: f64,
    c: &PhysicalConstants,
) -> Result<Complex64> {
    let r = &model.resonator;
    s21_at(
        omega_probe,
        r.omega_r,
        r.kappa_c,
        r.kappa_i,
        model.omega_fmr(b_ext, c),
        model.ensemble.gamma,
        model.g_eff,
    )
}

/// Zero-point magnetic field of the resonator mode, `√(μ0·ħ·ω_r / 2V_m)`.
pub fn vacuum_field(res: &ResonatorParams, c: &PhysicalConstants) -> Result<f64> {
    let v_m = res.mode_volume.ok_or(PhysicsError::MissingModeVolume)?;
    check("mode_volume", v_m, v_m > 0.0, "must be > 0")?;
    check("omega_r", res.omega_r, res.omega_r >= 0.0, "must be >= 0")?;
    Ok((c.mu_0 * c.hbar * res.omega_r / (2.0 * v_m)).sqrt())
}

/// Coupling rate of one spin to the mode, `(g_s·μ_B/2ħ)·B_1,0`.
pub fn single_spin_coupling(
    res: &ResonatorParams,
    ens: &SpinEnsembleParams,
    c: &PhysicalConstants,
) -> Result<f64> {
    Ok(0.5 * c.gyromagnetic_ratio(ens.g_s) * vacuum_field(res, c)?)
}

/// Vacuum field that corresponds to a given single-spin coupling rate.
pub fn vacuum_field_from_coupling(g_single: f64, g_s: f64, c: &PhysicalConstants) -> f64 {
    2.0 * g_single / c.gyromagnetic_ratio(g_s)
}

/// Collective coupling from spin density and filling factor `V/V_m`:
/// `(g_s·μ_B/2ħ)·√(μ0·ρ·ħ·ω_r·(V/V_m) / 2)`.
///
/// The mode volume cancels; only density and filling matter.
pub fn collective_coupling(
    res: &ResonatorParams,
    ens: &SpinEnsembleParams,
    filling: f64,
    c: &PhysicalConstants,
) -> Result<f64> {
    check("filling", filling, filling > 0.0, "must be > 0")?;
    let rho = ens.rho.ok_or(PhysicsError::MissingSpinDensity)?;
    check("rho", rho, rho > 0.0, "must be > 0")?;
    let b_eff_sq = c.mu_0 * rho * c.hbar * res.omega_r * filling / 2.0;
    Ok(0.5 * c.gyromagnetic_ratio(ens.g_s) * b_eff_sq.sqrt())
}

/// `g·√N`.
pub fn collective_from_count(g_single: f64, n_spins: f64) -> f64 {
    g_single * n_spins.sqrt()
}

/// Number of spins in the field-filled volume `length × width × depth`.
pub fn spin_count_from_geometry(
    overlap_length: f64,
    track_width: f64,
    field_depth: f64,
    rho: f64,
) -> Result<f64> {
    check("overlap_length", overlap_length, overlap_length > 0.0, "must be > 0")?;
    check("track_width", track_width, track_width > 0.0, "must be > 0")?;
    check("field_depth", field_depth, field_depth > 0.0, "must be > 0")?;
    check("rho", rho, rho > 0.0, "must be > 0")?;
    Ok(rho * (overlap_length * track_width * field_depth))
}

/// Spin density of a crystal from spins per unit cell and the cell volume.
pub fn yig_spin_density(spins_per_cell: f64, cell_volume: f64) -> Result<f64> {
    check("spins_per_cell", spins_per_cell, spins_per_cell > 0.0, "must be > 0")?;
    check("cell_volume", cell_volume, cell_volume > 0.0, "must be > 0")?;
    Ok(spins_per_cell / cell_volume)
}

/// `g²/(κγ)` from bare rates (any common unit).
pub fn cooperativity_from_rates(g_eff: f64, kappa: f64, gamma: f64) -> Result<f64> {
    check("kappa", kappa, kappa > 0.0, "must be > 0")?;
    check("gamma", gamma, gamma > 0.0, "must be > 0")?;
    Ok(g_eff * g_eff / (kappa * gamma))
}

/// Cooperativity with the same `kappa` and `gamma` that enter the transmission.
pub fn cooperativity(model: &HybridModel) -> Result<f64> {
    cooperativity_from_rates(model.g_eff, model.kappa(), model.ensemble.gamma)
}

/// Bose–Einstein occupancy `1/(exp(ħω/k_B T) − 1)`.
pub fn thermal_occupancy(temperature: f64, omega: f64, c: &PhysicalConstants) -> Result<f64> {
    check("temperature", temperature, temperature > 0.0, "must be > 0")?;
    check("omega", omega, omega > 0.0, "must be > 0")?;
    let x = c.hbar * omega / (c.k_b * temperature);
    Ok(1.0 / x.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CODATA_2018 as C;
    use crate::units::*;
    use std::f64::consts::TAU;

    fn yig(b_a_mt: f64) -> SpinEnsembleParams {
        SpinEnsembleParams::new(2.17, mt_to_t(b_a_mt), mhz_to_rad(50.0)).unwrap()
    }

    fn paper_model() -> HybridModel {
        let res = ResonatorParams::new(ghz_to_rad(5.90), mhz_to_rad(0.3), mhz_to_rad(2.7)).unwrap();
        HybridModel::from_parameters(res, yig(24.0), mhz_to_rad(450.0), &C).unwrap()
    }

    #[test]
    fn fmr_at_resonance_field_matches_resonator() {
        let w = fmr_frequency(&yig(24.0), 0.170, &C).unwrap();
        assert!((rad_to_ghz(w) - 5.90).abs() < 0.02);
    }

    #[test]
    fn fmr_zero_field() {
        assert_eq!(fmr_frequency(&yig(0.0), 0.0, &C).unwrap(), 0.0);
    }

    #[test]
    fn fmr_free_electron_one_tesla() {
        let e = SpinEnsembleParams::new(2.0, 0.0, 0.0).unwrap();
        let f = rad_to_ghz(fmr_frequency(&e, 1.0, &C).unwrap());
        // 2·9.2740100783e-24 / 6.62607015e-34 = 27.9924900 GHz
        assert!((f - 27.992_490).abs() < 1e-5);
    }

    #[test]
    fn fmr_rejects_negative_effective_field() {
        assert!(matches!(
            fmr_frequency(&yig(24.0), -0.03, &C),
            Err(PhysicsError::NegativeEffectiveField(_))
        ));
    }

    #[test]
    fn resonance_field_values() {
        let bare = resonance_field(&yig(0.0), ghz_to_rad(5.90), &C).unwrap();
        assert!((t_to_mt(bare) - 194.0).abs() < 1.0);
        let shifted = resonance_field(&yig(24.0), ghz_to_rad(5.90), &C).unwrap();
        assert!((t_to_mt(shifted) - 170.0).abs() < 1.0);
    }

    #[test]
    fn resonance_field_round_trip() {
        let e = yig(24.0);
        let w = fmr_frequency(&e, 0.3, &C).unwrap();
        let b = resonance_field(&e, w, &C).unwrap();
        assert!((b - 0.3).abs() < 1e-15);
        let w2 = fmr_frequency(&e, b, &C).unwrap();
        assert!((w2 - w).abs() <= 1e-12 * w);
    }

    #[test]
    fn detuning_values() {
        let m = paper_model();
        assert_eq!(detuning(&m, m.b_fmr, &C), 0.0);
        let d = detuning(&m, m.b_fmr + 0.010, &C);
        // 2.17 · 13.99624 GHz/T · 10 mT
        assert!((rad_to_mhz(d) - 303.72).abs() < 0.05);
        assert!(detuning(&m, m.b_fmr - 0.001, &C) < 0.0);
    }

    #[test]
    fn hybrid_consistency_invariant() {
        let m = paper_model();
        let lhs = C.hbar * m.resonator.omega_r;
        let rhs = m.ensemble.g_s * C.mu_b * (m.b_fmr + m.ensemble.b_a);
        assert!((lhs - rhs).abs() <= 1e-9 * lhs);
    }

    #[test]
    fn branches_on_resonance() {
        let m = paper_model();
        let b = polariton_branches(&m, m.b_fmr, &C);
        assert!((rad_to_ghz(b.upper) - 6.35).abs() < 1e-9);
        assert!((rad_to_ghz(b.lower) - 5.45).abs() < 1e-9);
        assert!((rad_to_mhz(b.splitting()) - 900.0).abs() < 1e-6);
    }

    #[test]
    fn branches_decoupled() {
        let b = branches_at_detuning(10.0, 3.0, 0.0);
        assert_eq!((b.lower, b.upper), (10.0, 13.0));
        let b = branches_at_detuning(10.0, -3.0, 0.0);
        assert_eq!((b.lower, b.upper), (7.0, 10.0));
    }

    #[test]
    fn branches_at_two_g_detuning() {
        let g = 1.7;
        let b = branches_at_detuning(100.0, 2.0 * g, g);
        assert!((b.splitting() - 2.0 * 2f64.sqrt() * g).abs() < 1e-12);
    }

    #[test]
    fn s21_far_detuned_is_bare_lorentzian() {
        // dispersive shift g²/Δ must be ≪ κ
        let mut m = paper_model();
        m.g_eff = mhz_to_rad(45.0);
        let w = m.resonator.omega_r;
        let s = s21(&m, 20.0, w, &C).unwrap();
        let expect = -m.resonator.kappa_c / m.kappa();
        assert!((s.re - expect).abs() < 1e-3 * expect.abs());
    }

    #[test]
    fn s21_on_double_resonance_is_suppressed() {
        let m = paper_model();
        let w = m.resonator.omega_r;
        let ratio = s21(&m, m.b_fmr, w, &C).unwrap().norm() / (m.resonator.kappa_c / m.kappa());
        // κ/(κ + 2g²/γ) = 3/8103
        assert!((ratio - 3.0 / 8103.0).abs() < 1e-12);
    }

    #[test]
    fn s21_decoupled_lorentzian_pointwise() {
        let mut m = paper_model();
        m.g_eff = 0.0;
        let k = m.kappa();
        for i in -50..=50 {
            let w = m.resonator.omega_r + f64::from(i) * 0.3 * k;
            let p = s21(&m, 0.1, w, &C).unwrap().norm_sqr();
            let d = w - m.resonator.omega_r;
            let lor = m.resonator.kappa_c.powi(2) / (d * d + k * k);
            assert!((p - lor).abs() <= 1e-14 * lor.max(1e-300));
        }
    }

    #[test]
    fn s21_maxima_near_branches() {
        // dense-grid argmax on each side of the midpoint
        let m = paper_model();
        let b_ext = m.b_fmr + 0.004;
        let br = polariton_branches(&m, b_ext, &C);
        let mid = 0.5 * (br.upper + br.lower);
        let scan = |lo: f64, hi: f64| {
            let n = 200_000;
            (0..=n)
                .map(|i| lo + (hi - lo) * f64::from(i) / f64::from(n))
                .map(|w| (w, s21(&m, b_ext, w, &C).unwrap().norm_sqr()))
                .fold((0.0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
                .0
        };
        let span = 2.0 * br.splitting();
        let lo = scan(mid - span, mid);
        let hi = scan(mid, mid + span);
        let gamma = m.ensemble.gamma;
        assert!((lo - br.lower).abs() < gamma);
        assert!((hi - br.upper).abs() < gamma);
    }

    #[test]
    fn s21_singular_when_lossless_at_pole() {
        // κ = γ = 0, probe at a normal mode frequency
        let g = 1.0;
        let w = 10.0 + g;
        assert_eq!(
            s21_at(w, 10.0, 0.0, 0.0, 10.0, 0.0, g),
            Err(PhysicsError::Singular)
        );
        // spin pole with γ = 0 gives zero transmission
        assert_eq!(s21_at(10.0, 10.0, 0.0, 0.0, 10.0, 0.0, g).unwrap().norm(), 0.0);
    }

    fn resonator_with_5hz_coupling() -> ResonatorParams {
        // V_m that makes g/2π = 5 Hz for g_s = 2 at 5.90 GHz
        let b10 = vacuum_field_from_coupling(hz_to_rad(5.0), 2.0, &C);
        let w = ghz_to_rad(5.90);
        let v_m = C.mu_0 * C.hbar * w / (2.0 * b10 * b10);
        ResonatorParams::new(w, 1.0, 1.0).unwrap().with_mode_volume(v_m).unwrap()
    }

    #[test]
    fn vacuum_field_example() {
        let res = resonator_with_5hz_coupling();
        assert!((res.mode_volume.unwrap() - 1.925e-11).abs() < 0.01e-11);
        let b = vacuum_field(&res, &C).unwrap();
        assert!((b - 3.572e-10).abs() < 0.01e-10);
        let quad = res.with_mode_volume(4.0 * res.mode_volume.unwrap()).unwrap();
        assert!((vacuum_field(&quad, &C).unwrap() - 0.5 * b).abs() < 1e-15 * b);
        let mut dc = res;
        dc.omega_r = 0.0;
        assert_eq!(vacuum_field(&dc, &C).unwrap(), 0.0);
        let mut none = res;
        none.mode_volume = None;
        assert_eq!(vacuum_field(&none, &C), Err(PhysicsError::MissingModeVolume));
    }

    #[test]
    fn single_spin_coupling_five_hz() {
        let res = resonator_with_5hz_coupling();
        let e2 = SpinEnsembleParams::new(2.0, 0.0, 0.0).unwrap();
        let g = single_spin_coupling(&res, &e2, &C).unwrap();
        assert!((rad_to_hz(g) - 5.0).abs() < 1e-12);
        let e4 = SpinEnsembleParams::new(4.0, 0.0, 0.0).unwrap();
        let g4 = single_spin_coupling(&res, &e4, &C).unwrap();
        assert!((g4 - 2.0 * g).abs() < 1e-14 * g);
    }

    #[test]
    fn collective_matches_single_times_sqrt_n() {
        let res = resonator_with_5hz_coupling();
        let v_m = res.mode_volume.unwrap();
        let filling = 0.37;
        let rho = 2e28;
        let ens = SpinEnsembleParams::new(2.0, 0.0, 0.0)
            .unwrap()
            .with_density(rho)
            .unwrap();
        let n = rho * filling * v_m;
        let g = single_spin_coupling(&res, &ens, &C).unwrap();
        let g_eff = collective_coupling(&res, &ens, filling, &C).unwrap();
        assert!((g_eff - collective_from_count(g, n)).abs() <= 1e-12 * g_eff);

        // N = 1 reduces to the single-spin rate
        let one = ens.with_density(1.0 / v_m).unwrap();
        let g1 = collective_coupling(&res, &one, 1.0, &C).unwrap();
        assert!((g1 - g).abs() <= 1e-12 * g);

        // ρ ×4 → g_eff ×2
        let four = ens.with_density(4.0 * rho).unwrap();
        let g4 = collective_coupling(&res, &four, filling, &C).unwrap();
        assert!((g4 - 2.0 * g_eff).abs() <= 1e-12 * g4);
    }

    #[test]
    fn collective_from_five_hz_and_paper_count() {
        let g_eff = collective_from_count(hz_to_rad(5.0), 4.5e16);
        assert!((rad_to_ghz(g_eff) - 1.0607).abs() < 1e-3);
    }

    #[test]
    fn geometry_count() {
        let n = spin_count_from_geometry(2.5e-3, 30e-6, 30e-6, 2e28).unwrap();
        assert!((n / 4.5e16 - 1.0).abs() < 1e-12);
        assert_eq!(spin_count_from_geometry(1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(spin_count_from_geometry(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn yig_density() {
        let rho = yig_spin_density(40.0, 1.8956e-27).unwrap();
        // m⁻³ → cm⁻³
        assert!((rho * 1e-6 / 1e22 - 2.110).abs() < 1e-3);
        assert_eq!(yig_spin_density(1.0, 1.0).unwrap(), 1.0);
        let half = yig_spin_density(40.0, 2.0 * 1.8956e-27).unwrap();
        assert!((half - 0.5 * rho).abs() < 1e-12 * rho);
    }

    #[test]
    fn cooperativity_values() {
        let m = paper_model();
        assert!((cooperativity(&m).unwrap() - 1350.0).abs() < 1e-9);
        assert_eq!(cooperativity_from_rates(0.0, 1.0, 1.0).unwrap(), 0.0);
        let c1 = cooperativity_from_rates(3.0, 5.0, 7.0).unwrap();
        let c2 = cooperativity_from_rates(6.0, 20.0, 7.0).unwrap();
        assert!((c1 - c2).abs() < 1e-15);
        assert!(cooperativity_from_rates(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn thermal_occupancy_values() {
        let n = thermal_occupancy(70.0, ghz_to_rad(5.90), &C).unwrap();
        // 1/(exp(hf/kT) − 1) with hf/k = 0.283155 K
        assert!((n - 246.72).abs() < 0.05, "{n}");
        let cold = thermal_occupancy(0.01, ghz_to_rad(5.90), &C).unwrap();
        assert!(cold < 1e-10);
        let w = TAU * 1e9;
        let t = 60.0 * C.hbar * w / C.k_b;
        let hot = thermal_occupancy(t, w, &C).unwrap();
        assert!((hot / 60.0 - 1.0).abs() < 0.01);
    }
}
