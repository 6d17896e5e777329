//! Synthetic field–frequency transmission maps.
//!
//! A scene is the loaded hybrid resonator, optional field-shifted bystander
//! resonators on the same feedline, an optional broad box mode that also
//! couples to the FMR line, two sampling grids and a noise model. All
//! contributions share one feedline, so their complex amplitudes are summed
//! before taking `|·|²`.

mod noise;
mod spectrum;

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::PhysicalConstants;
use crate::physics::{self, HybridModel, PhysicsError, ResonatorParams, SpinEnsembleParams};
use crate::units::*;

pub use noise::{NoiseConfig, RowNoise};
pub use spectrum::{Spectrum2D, SpectrumError, COLUMNS, FILE_HEADER};

/// Upper bound on `n_field × n_freq` for one synthesized map.
pub const MAX_GRID_POINTS: usize = 16_777_216;

/// Power written for an exactly vanishing transmission, dB.
pub const ZERO_POWER_DB: f64 = -300.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene config: {0}")]
    Config(String),
    #[error("scene config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: usize, limit: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Uniform grid `start, start + step, ...` up to `stop` (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn validate(&self, name: &str) -> Result<(), SynthError> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && self.stop > self.start;
        if !ok {
            return Err(SynthError::Config(format!(
                "{name}: need finite start < stop and step > 0"
            )));
        }
        let n = self.len();
        let end = self.start + (n - 1) as f64 * self.step;
        if (end - self.stop).abs() > 1e-6 * self.step {
            return Err(SynthError::Config(format!(
                "{name}: (stop - start) is not a whole number of steps"
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

/// A resonator that does not touch the spin ensemble. Its frequency drifts
/// with field as `ω₀·(1 + lin·B + quad·B²)`, `B` in mT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BystanderMode {
    pub resonator: ResonatorParams,
    pub shift_linear_per_mt: f64,
    pub shift_quadratic_per_mt2: f64,
}

impl BystanderMode {
    pub fn omega_at(&self, b_ext: f64) -> f64 {
        let b = t_to_mt(b_ext);
        self.resonator.omega_r
            * (1.0 + self.shift_linear_per_mt * b + self.shift_quadratic_per_mt2 * b * b)
    }
}

/// Broad parasitic mode with its own weak coupling to the FMR line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMode {
    pub resonator: ResonatorParams,
    pub g_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub hybrid: HybridModel,
    pub bystanders: Vec<BystanderMode>,
    pub box_mode: Option<BoxMode>,
    /// Applied field grid, T.
    pub field_grid: Grid,
    /// Probe frequency grid, Hz.
    pub freq_grid: Grid,
    pub noise: NoiseConfig,
    pub description: Option<String>,
}

// ---- boundary (file) representation: GHz, MHz, mT ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec {
    #[serde(rename = "f_GHz")]
    pub f_ghz: f64,
    #[serde(rename = "kappa_c_MHz")]
    pub kappa_c_mhz: f64,
    #[serde(rename = "kappa_i_MHz")]
    pub kappa_i_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub g_s: f64,
    #[serde(rename = "B_a_mT")]
    pub b_a_mt: f64,
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BystanderSpec {
    #[serde(rename = "f_GHz")]
    pub f_ghz: f64,
    #[serde(rename = "kappa_c_MHz")]
    pub kappa_c_mhz: f64,
    #[serde(rename = "kappa_i_MHz")]
    pub kappa_i_mhz: f64,
    #[serde(rename = "shift_linear_per_mT", default)]
    pub shift_linear_per_mt: f64,
    #[serde(rename = "shift_quadratic_per_mT2", default)]
    pub shift_quadratic_per_mt2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxModeSpec {
    #[serde(rename = "f_GHz")]
    pub f_ghz: f64,
    #[serde(rename = "kappa_c_MHz")]
    pub kappa_c_mhz: f64,
    #[serde(rename = "kappa_i_MHz")]
    pub kappa_i_mhz: f64,
    #[serde(rename = "g_eff_MHz")]
    pub g_eff_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl BystanderSpec {
    fn resonator_spec(&self) -> ResonatorSpec {
        ResonatorSpec {
            f_ghz: self.f_ghz,
            kappa_c_mhz: self.kappa_c_mhz,
            kappa_i_mhz: self.kappa_i_mhz,
        }
    }
}

impl BoxModeSpec {
    fn resonator_spec(&self) -> ResonatorSpec {
        ResonatorSpec {
            f_ghz: self.f_ghz,
            kappa_c_mhz: self.kappa_c_mhz,
            kappa_i_mhz: self.kappa_i_mhz,
        }
    }
}

/// Scene file as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub resonator: ResonatorSpec,
    pub ensemble: EnsembleSpec,
    #[serde(rename = "g_eff_MHz")]
    pub g_eff_mhz: f64,
    #[serde(default)]
    pub bystanders: Vec<BystanderSpec>,
    #[serde(default)]
    pub box_mode: Option<BoxModeSpec>,
    #[serde(rename = "field_grid_mT")]
    pub field_grid_mt: GridSpec,
    #[serde(rename = "freq_grid_GHz")]
    pub freq_grid_ghz: GridSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
}

fn resonator_from_spec(r: &ResonatorSpec, what: &str) -> Result<ResonatorParams, SynthError> {
    ResonatorParams::new(
        ghz_to_rad(r.f_ghz),
        mhz_to_rad(r.kappa_c_mhz),
        mhz_to_rad(r.kappa_i_mhz),
    )
    .map_err(|e| SynthError::Config(format!("{what}: {e}")))
}

fn resonator_to_spec(r: &ResonatorParams) -> ResonatorSpec {
    ResonatorSpec {
        f_ghz: rad_to_ghz(r.omega_r),
        kappa_c_mhz: rad_to_mhz(r.kappa_c),
        kappa_i_mhz: rad_to_mhz(r.kappa_i),
    }
}

impl SceneFile {
    pub fn into_scene(self, c: &PhysicalConstants) -> Result<SceneConfig, SynthError> {
        let resonator = resonator_from_spec(&self.resonator, "resonator")?;
        let ensemble = SpinEnsembleParams::new(
            self.ensemble.g_s,
            mt_to_t(self.ensemble.b_a_mt),
            mhz_to_rad(self.ensemble.gamma_mhz),
        )
        .map_err(|e| SynthError::Config(format!("ensemble: {e}")))?;
        if !(self.g_eff_mhz.is_finite() && self.g_eff_mhz >= 0.0) {
            return Err(SynthError::Config("g_eff_MHz: must be >= 0".into()));
        }
        let hybrid = HybridModel::from_parameters(resonator, ensemble, mhz_to_rad(self.g_eff_mhz), c)?;
        let bystanders = self
            .bystanders
            .iter()
            .enumerate()
            .map(|(i, b)| {
                Ok(BystanderMode {
                    resonator: resonator_from_spec(&b.resonator_spec(), &format!("bystanders[{i}]"))?,
                    shift_linear_per_mt: b.shift_linear_per_mt,
                    shift_quadratic_per_mt2: b.shift_quadratic_per_mt2,
                })
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        let box_mode = match &self.box_mode {
            Some(b) => Some(BoxMode {
                resonator: resonator_from_spec(&b.resonator_spec(), "box_mode")?,
                g_eff: mhz_to_rad(b.g_eff_mhz),
            }),
            None => None,
        };
        let g = self.field_grid_mt;
        let f = self.freq_grid_ghz;
        let scene = SceneConfig {
            hybrid,
            bystanders,
            box_mode,
            field_grid: Grid {
                start: mt_to_t(g.start),
                stop: mt_to_t(g.stop),
                step: mt_to_t(g.step),
            },
            freq_grid: Grid {
                start: f.start * 1e9,
                stop: f.stop * 1e9,
                step: f.step * 1e9,
            },
            noise: self.noise,
            description: self.description,
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl SceneConfig {
    pub fn from_json(text: &str, c: &PhysicalConstants) -> Result<Self, SynthError> {
        serde_json::from_str::<SceneFile>(text)?.into_scene(c)
    }

    pub fn from_file(path: impl AsRef<Path>, c: &PhysicalConstants) -> Result<Self, SynthError> {
        Self::from_json(&std::fs::read_to_string(path)?, c)
    }

    pub fn to_file(&self) -> SceneFile {
        let h = &self.hybrid;
        SceneFile {
            description: self.description.clone(),
            resonator: resonator_to_spec(&h.resonator),
            ensemble: EnsembleSpec {
                g_s: h.ensemble.g_s,
                b_a_mt: t_to_mt(h.ensemble.b_a),
                gamma_mhz: rad_to_mhz(h.ensemble.gamma),
            },
            g_eff_mhz: rad_to_mhz(h.g_eff),
            bystanders: self
                .bystanders
                .iter()
                .map(|b| BystanderSpec {
                    f_ghz: rad_to_ghz(b.resonator.omega_r),
                    kappa_c_mhz: rad_to_mhz(b.resonator.kappa_c),
                    kappa_i_mhz: rad_to_mhz(b.resonator.kappa_i),
                    shift_linear_per_mt: b.shift_linear_per_mt,
                    shift_quadratic_per_mt2: b.shift_quadratic_per_mt2,
                })
                .collect(),
            box_mode: self.box_mode.map(|b| BoxModeSpec {
                f_ghz: rad_to_ghz(b.resonator.omega_r),
                kappa_c_mhz: rad_to_mhz(b.resonator.kappa_c),
                kappa_i_mhz: rad_to_mhz(b.resonator.kappa_i),
                g_eff_mhz: rad_to_mhz(b.g_eff),
            }),
            field_grid_mt: GridSpec {
                start: t_to_mt(self.field_grid.start),
                stop: t_to_mt(self.field_grid.stop),
                step: t_to_mt(self.field_grid.step),
            },
            freq_grid_ghz: GridSpec {
                start: self.freq_grid.start * 1e-9,
                stop: self.freq_grid.stop * 1e-9,
                step: self.freq_grid.step * 1e-9,
            },
            noise: self.noise,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.field_grid.validate("field_grid")?;
        self.freq_grid.validate("freq_grid")?;
        if self.freq_grid.start <= 0.0 {
            return Err(SynthError::Config("freq_grid: frequencies must be > 0".into()));
        }
        let s = self.noise.amplitude_sigma;
        if !(s.is_finite() && s >= 0.0) {
            return Err(SynthError::Config("noise.amplitude_sigma: must be >= 0".into()));
        }
        if let Some(f) = self.noise.floor_db {
            if !f.is_finite() {
                return Err(SynthError::Config("noise.floor_db: must be finite".into()));
            }
        }
        let low = self.field_grid.start + self.hybrid.ensemble.b_a;
        if low < 0.0 {
            return Err(SynthError::Config(format!(
                "field_grid: effective field {} mT at the start of the grid is negative",
                t_to_mt(low)
            )));
        }
        let points = self.field_grid.len().saturating_mul(self.freq_grid.len());
        if points > MAX_GRID_POINTS {
            return Err(SynthError::GridTooLarge {
                points,
                limit: MAX_GRID_POINTS,
            });
        }
        Ok(())
    }

    /// Non-fatal problems, e.g. bystanders overlapping the hybrid resonance.
    pub fn warnings(&self) -> Vec<String> {
        let w0 = self.hybrid.resonator.omega_r;
        self.bystanders
            .iter()
            .enumerate()
            .filter(|(_, b)| (b.resonator.omega_r - w0).abs() <= 10.0 * b.resonator.kappa())
            .map(|(i, b)| {
                format!(
                    "bystander {i} at {:.6} GHz lies within 10 linewidths of the hybrid resonator",
                    rad_to_ghz(b.resonator.omega_r)
                )
            })
            .collect()
    }

    fn box_hybrid(&self, c: &PhysicalConstants) -> Result<Option<HybridModel>, SynthError> {
        self.box_mode
            .map(|b| HybridModel::from_parameters(b.resonator, self.hybrid.ensemble, b.g_eff, c))
            .transpose()
            .map_err(SynthError::from)
    }

    /// Noise-free complex transmission summed over all modes.
    pub fn transmission(
        &self,
        b_ext: f64,
        omega: f64,
        c: &PhysicalConstants,
    ) -> Result<Complex64, SynthError> {
        let box_h = self.box_hybrid(c)?;
        self.transmission_with(box_h.as_ref(), b_ext, omega, c)
    }

    fn transmission_with(
        &self,
        box_h: Option<&HybridModel>,
        b_ext: f64,
        omega: f64,
        c: &PhysicalConstants,
    ) -> Result<Complex64, SynthError> {
        let mut s = physics::s21(&self.hybrid, b_ext, omega, c)?;
        for b in &self.bystanders {
            let r = &b.resonator;
            s += physics::s21_at(omega, b.omega_at(b_ext), r.kappa_c, r.kappa_i, 0.0, 0.0, 0.0)?;
        }
        if let Some(h) = box_h {
            s += physics::s21(h, b_ext, omega, c)?;
        }
        Ok(s)
    }
}

/// Generates the |S21|² map of a scene in dB. Rows are computed in parallel;
/// the output is bit-identical for a fixed scene and seed.
pub fn synthesize(scene: &SceneConfig, c: &PhysicalConstants) -> Result<Spectrum2D, SynthError> {
    scene.validate()?;
    let fields = scene.field_grid.points();
    let freqs = scene.freq_grid.points();
    let box_h = scene.box_hybrid(c)?;

    let rows: Vec<Vec<f64>> = fields
        .par_iter()
        .enumerate()
        .map(|(i, &b)| {
            let mut noise = RowNoise::new(&scene.noise, i);
            freqs
                .iter()
                .map(|&f| {
                    let s = scene.transmission_with(box_h.as_ref(), b, hz_to_rad(f), c)?;
                    let p = noise.apply(s.norm());
                    Ok(if p > 0.0 { power_to_db(p) } else { ZERO_POWER_DB })
                })
                .collect::<Result<Vec<f64>, SynthError>>()
        })
        .collect::<Result<_, _>>()?;

    let mut meta = BTreeMap::new();
    meta.insert("source".to_string(), "synthetic".to_string());
    meta.insert(
        "generator".to_string(),
        format!("magnon-cavity-lab {}", env!("CARGO_PKG_VERSION")),
    );
    meta.insert("scene".to_string(), serde_json::to_string(&scene.to_file())?);

    Ok(Spectrum2D::new(fields, freqs, rows.concat(), meta)?)
}
