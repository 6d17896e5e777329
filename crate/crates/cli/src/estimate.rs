//! Coupling estimates from sample geometry.

use magnon_cavity_lab::physics::{
    collective_from_count, single_spin_coupling, spin_count_from_geometry, thermal_occupancy,
    vacuum_field, vacuum_field_from_coupling, yig_spin_density,
};
use magnon_cavity_lab::units::{ghz_to_rad, hz_to_rad, mhz_to_rad, rad_to_hz, rad_to_mhz};
use magnon_cavity_lab::{PhysicalConstants, ResonatorParams, SpinEnsembleParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Free-form remarks, one per entry; ignored by the estimator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub resonator: ResonatorGeometry,
    pub g_s: f64,
    /// Single-spin coupling g/2π. Computed from the mode volume when absent.
    #[serde(default, rename = "single_spin_g_Hz")]
    pub single_spin_g_hz: Option<f64>,
    /// Spin count. Computed from geometry and density when absent.
    #[serde(default)]
    pub n_spins: Option<f64>,
    #[serde(default)]
    pub geometry: Option<Geometry>,
    #[serde(default, rename = "spin_density_cm3")]
    pub spin_density_cm3: Option<f64>,
    #[serde(default)]
    pub unit_cell: Option<UnitCell>,
    #[serde(default, rename = "temperature_K")]
    pub temperature_k: Option<f64>,
    /// Measured collective coupling g_eff/2π to compare against.
    #[serde(default, rename = "measured_g_eff_MHz")]
    pub measured_g_eff_mhz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorGeometry {
    #[serde(rename = "f_GHz")]
    pub f_ghz: f64,
    #[serde(default, rename = "mode_volume_m3")]
    pub mode_volume_m3: Option<f64>,
}

/// Volume filled by the resonator field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(rename = "overlap_length_mm")]
    pub overlap_length_mm: f64,
    #[serde(rename = "track_width_um")]
    pub track_width_um: f64,
    #[serde(rename = "field_depth_um")]
    pub field_depth_um: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCell {
    pub spins: f64,
    #[serde(rename = "volume_nm3")]
    pub volume_nm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub n_spins: f64,
    #[serde(rename = "spin_density_cm3", skip_serializing_if = "Option::is_none")]
    pub spin_density_cm3: Option<f64>,
    #[serde(rename = "single_spin_g_Hz")]
    pub single_spin_g_hz: f64,
    #[serde(rename = "g_eff_MHz")]
    pub g_eff_mhz: f64,
    #[serde(rename = "vacuum_field_T")]
    pub vacuum_field_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermal_photons: Option<f64>,
    #[serde(rename = "measured_g_eff_MHz", skip_serializing_if = "Option::is_none")]
    pub measured_g_eff_mhz: Option<f64>,
    /// Predicted over measured g_eff.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_to_measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_factor_two: Option<bool>,
}

fn missing(what: &str) -> String {
    format!("missing {what}")
}

impl EstimateConfig {
    fn density_m3(&self) -> Result<Option<f64>, String> {
        match (self.spin_density_cm3, &self.unit_cell) {
            (Some(_), Some(_)) => Err("give only one of `spin_density_cm3` and `unit_cell`".into()),
            (Some(rho), None) => Ok(Some(rho * 1e6)),
            (None, Some(u)) => yig_spin_density(u.spins, u.volume_nm3 * 1e-27)
                .map(Some)
                .map_err(|e| format!("unit_cell: {e}")),
            (None, None) => Ok(None),
        }
    }

    pub fn evaluate(&self, c: &PhysicalConstants) -> Result<Estimate, String> {
        let rho = self.density_m3()?;
        let n_spins = match (self.n_spins, &self.geometry) {
            (Some(n), _) => n,
            (None, Some(g)) => {
                let rho = rho.ok_or_else(|| missing("`spin_density_cm3` or `unit_cell`"))?;
                spin_count_from_geometry(
                    g.overlap_length_mm * 1e-3,
                    g.track_width_um * 1e-6,
                    g.field_depth_um * 1e-6,
                    rho,
                )
                .map_err(|e| format!("geometry: {e}"))?
            }
            (None, None) => return Err(missing("`geometry` (or `n_spins`)")),
        };
        if !(n_spins.is_finite() && n_spins >= 1.0) {
            return Err(format!("n_spins: {n_spins} must be >= 1"));
        }

        let omega_r = ghz_to_rad(self.resonator.f_ghz);
        if !(omega_r > 0.0 && omega_r.is_finite()) {
            return Err(format!("resonator.f_GHz: {} must be > 0", self.resonator.f_ghz));
        }
        // only the frequency and mode volume matter here; the loss rates are unused
        let res = ResonatorParams {
            omega_r,
            kappa_c: 0.0,
            kappa_i: 0.0,
            mode_volume: self.resonator.mode_volume_m3,
        };
        let ens = SpinEnsembleParams::new(self.g_s, 0.0, 0.0).map_err(|e| format!("g_s: {e}"))?;
        let (g, b10) = match (self.single_spin_g_hz, res.mode_volume) {
            (Some(g_hz), _) => {
                let g = hz_to_rad(g_hz);
                let b10 = match res.mode_volume {
                    Some(_) => vacuum_field(&res, c).map_err(|e| e.to_string())?,
                    None => vacuum_field_from_coupling(g, self.g_s, c),
                };
                (g, b10)
            }
            (None, Some(_)) => (
                single_spin_coupling(&res, &ens, c).map_err(|e| e.to_string())?,
                vacuum_field(&res, c).map_err(|e| e.to_string())?,
            ),
            (None, None) => return Err(missing("`single_spin_g_Hz` or `resonator.mode_volume_m3`")),
        };
        let g_eff = collective_from_count(g, n_spins);
        let thermal_photons = self
            .temperature_k
            .map(|t| thermal_occupancy(t, omega_r, c))
            .transpose()
            .map_err(|e| format!("temperature_K: {e}"))?;
        let ratio = self
            .measured_g_eff_mhz
            .map(|m| g_eff / mhz_to_rad(m));
        Ok(Estimate {
            n_spins,
            spin_density_cm3: rho.map(|r| r * 1e-6),
            single_spin_g_hz: rad_to_hz(g),
            g_eff_mhz: rad_to_mhz(g_eff),
            vacuum_field_t: b10,
            thermal_photons,
            measured_g_eff_mhz: self.measured_g_eff_mhz,
            ratio_to_measured: ratio,
            within_factor_two: ratio.map(|r| (0.5..=2.0).contains(&r)),
        })
    }
}

impl Estimate {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| out.push_str(&format!("{k:<24}{v}\n"));
        row("N", format!("{:.4e}", self.n_spins));
        if let Some(rho) = self.spin_density_cm3 {
            row("spin density", format!("{rho:.4e} cm^-3"));
        }
        row("g/2π", format!("{:.4} Hz", self.single_spin_g_hz));
        row("g_eff/2π", format!("{:.2} MHz", self.g_eff_mhz));
        row("B_1,0", format!("{:.4e} T", self.vacuum_field_t));
        if let Some(n) = self.thermal_photons {
            row("thermal photons", format!("{n:.1}"));
        }
        if let (Some(m), Some(r), Some(ok)) = (self.measured_g_eff_mhz, self.ratio_to_measured, self.within_factor_two) {
            let verdict = if ok { "within" } else { "NOT within" };
            row(
                "vs measured",
                format!("{r:.2} × {m} MHz: {verdict} a factor of 2"),
            );
        }
        out
    }
}
