//! Seeded detector noise.
//!
//! Each field row owns an independent ChaCha stream selected by the row
//! index, so rows can be generated in any order or in parallel and still
//! produce identical bytes for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Standard deviation of the relative error on the linear amplitude |S21|.
    #[serde(default)]
    pub amplitude_sigma: f64,
    /// Mean power of an additive incoherent floor, dB. `None` disables it.
    #[serde(default)]
    pub floor_db: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            amplitude_sigma: 0.0,
            floor_db: None,
        }
    }
}

impl NoiseConfig {
    pub fn is_silent(&self) -> bool {
        self.amplitude_sigma == 0.0 && self.floor_db.is_none()
    }
}

/// Noise source for one field row.
pub struct RowNoise {
    rng: ChaCha8Rng,
    sigma: f64,
    floor: f64,
}

impl RowNoise {
    pub fn new(cfg: &NoiseConfig, row: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(row as u64);
        Self {
            rng,
            sigma: cfg.amplitude_sigma,
            floor: cfg.floor_db.map_or(0.0, crate::units::db_to_power),
        }
    }

    /// Noisy power for a clean amplitude `|S21|`. Always draws three normals
    /// so the amplitude stream does not depend on whether the floor is on.
    pub fn apply(&mut self, amplitude: f64) -> f64 {
        let a: f64 = self.rng.sample(StandardNormal);
        let x: f64 = self.rng.sample(StandardNormal);
        let y: f64 = self.rng.sample(StandardNormal);
        let noisy = amplitude * (1.0 + self.sigma * a);
        noisy * noisy + self.floor * 0.5 * (x * x + y * y)
    }

    /// Relative amplitude error `|S|_noisy/|S| − 1` of the next sample.
    pub fn next_relative_error(&mut self) -> f64 {
        let a: f64 = self.rng.sample(StandardNormal);
        let _: f64 = self.rng.sample(StandardNormal);
        let _: f64 = self.rng.sample(StandardNormal);
        self.sigma * a
    }
}
