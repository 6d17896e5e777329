//! Forward models and parameter extraction for hybrids of an exchange-locked
//! spin ensemble (a ferrimagnet such as Ga-doped YIG) and a microwave resonator.
//!
//! * [`physics`]: FMR dispersion, coupled-oscillator branches, input-output
//!   transmission, vacuum-field and collective-coupling estimators.
//! * [`macrospin`]: exact diagonalization of the macrospin–photon ladder.
//! * [`synth`]: seeded synthetic field–frequency transmission maps and the
//!   spectrum file format.
//! * [`fit`]: damped least squares, Lorentzian slice fits, anticrossing fits
//!   and full 2D transmission fits.
//!
//! All internal rates are angular (rad/s) and all fields are in tesla; the
//! [`units`] module holds the boundary conversions.

pub mod analysis;
pub mod constants;
pub mod fit;
pub mod macrospin;
pub mod physics;
pub mod synth;
pub mod tridiag;
pub mod units;

pub use constants::{PhysicalConstants, CODATA_2018};
pub use physics::{HybridModel, ResonatorParams, SpinEnsembleParams};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/dispersion.md")]
    mod dispersion {}
    #[doc = include_str!("../../../book/src/transmission.md")]
    mod transmission {}
    #[doc = include_str!("../../../book/src/estimates.md")]
    mod estimates {}
    #[doc = include_str!("../../../book/src/macrospin.md")]
    mod macrospin {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
