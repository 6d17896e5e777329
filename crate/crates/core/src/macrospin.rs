//! Exact diagonalization of the macrospin–photon Hamiltonian
//!
//! ```text
//! H = ħω_r a†a + g_s μ_B B_eff S_z + ħg (a S₊ + a† S₋)
//! ```
//!
//! restricted to the fully symmetric ladder `ℓ = N/2`. The Hamiltonian
//! conserves the number of quanta `E = n + s` above the fully polarized,
//! photon-free ground state, where `n` is the photon number and
//! `s = N/2 − m` counts spin flips. Each `E` gives an independent real
//! symmetric tridiagonal block of dimension `min(E, N) + 1`.
//!
//! Energies are angular frequencies measured from the ground state, which
//! keeps blocks for `N ~ 1e16` free of the huge `S_z` offset.

use thiserror::Error;

use crate::tridiag::{symmetric_tridiagonal_eigenvalues, EigenError};

/// Largest block dimension the diagonalization routines accept.
pub const MAX_BLOCK_DIM: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LadderError {
    #[error("spin count {0} must be a whole number >= 1")]
    SpinCount(f64),
    #[error("flip count {s} is outside 0..={n}")]
    FlipOutOfRange { s: u64, n: f64 },
    #[error("excitation number must be >= 1")]
    NoExcitations,
    #[error("coupling must be finite and >= 0, got {0}")]
    Coupling(f64),
    #[error("block dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: u64, cap: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

pub type Result<T> = std::result::Result<T, LadderError>;

fn check_spin_count(n_spins: f64) -> Result<()> {
    if n_spins.is_finite() && n_spins >= 1.0 && n_spins.fract() == 0.0 {
        Ok(())
    } else {
        Err(LadderError::SpinCount(n_spins))
    }
}

/// `⟨s+1| S₊ |s⟩ = √((N − s)(s + 1))` in flip-count labelling.
pub fn ladder_element(n_spins: f64, s: u64) -> Result<f64> {
    check_spin_count(n_spins)?;
    let sf = s as f64;
    if sf > n_spins {
        return Err(LadderError::FlipOutOfRange { s, n: n_spins });
    }
    Ok(((n_spins - sf) * (sf + 1.0)).sqrt())
}

/// A basis state `|n photons, s flips⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisState {
    pub photons: u64,
    pub flips: u64,
}

/// Fixed-excitation subspace. Basis states are ordered by ascending flip
/// count, so index 0 is the all-photon state `|E, 0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderSubspace {
    pub n_spins: f64,
    pub excitations: u64,
    pub basis: Vec<BasisState>,
}

impl LadderSubspace {
    pub fn new(n_spins: f64, excitations: u64) -> Result<Self> {
        let dim = Self::dimension(n_spins, excitations)?;
        if dim > MAX_BLOCK_DIM as u64 {
            return Err(LadderError::DimensionCap {
                dim,
                cap: MAX_BLOCK_DIM,
            });
        }
        let basis = (0..dim)
            .map(|s| BasisState {
                photons: excitations - s,
                flips: s,
            })
            .collect();
        Ok(Self {
            n_spins,
            excitations,
            basis,
        })
    }

    /// `min(E, N) + 1`, without building anything.
    pub fn dimension(n_spins: f64, excitations: u64) -> Result<u64> {
        check_spin_count(n_spins)?;
        let e = excitations as f64;
        Ok(if e < n_spins {
            excitations + 1
        } else {
            n_spins as u64 + 1
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalHamiltonian {
    pub diag: Vec<f64>,
    /// `offdiag[k]` couples basis states `k` and `k + 1`; all entries are >= 0.
    pub offdiag: Vec<f64>,
    pub subspace: LadderSubspace,
}

impl TridiagonalHamiltonian {
    /// Same block with every diagonal entry lowered by `E·omega_ref`.
    ///
    /// Excitation conservation makes this an exact global shift; on
    /// resonance with `omega_ref = omega_r` it removes the large common
    /// offset so small splittings keep full relative precision.
    pub fn rotating_frame(&self, omega_ref: f64) -> Self {
        let shift = self.subspace.excitations as f64 * omega_ref;
        Self {
            diag: self.diag.iter().map(|d| d - shift).collect(),
            offdiag: self.offdiag.clone(),
            subspace: self.subspace.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }
}

/// Block of fixed excitation number `E`.
///
/// `diag[k] = n·ω_r + s·ω_FMR` and `offdiag[k] = g·√n·√((N−s)(s+1))` for basis
/// state `k = (n, s)`, coupling it to `(n−1, s+1)`.
pub fn build_hamiltonian(
    n_spins: f64,
    excitations: u64,
    omega_r: f64,
    omega_fmr: f64,
    g: f64,
) -> Result<TridiagonalHamiltonian> {
    if excitations == 0 {
        return Err(LadderError::NoExcitations);
    }
    if !(g.is_finite() && g >= 0.0) {
        return Err(LadderError::Coupling(g));
    }
    let subspace = LadderSubspace::new(n_spins, excitations)?;
    let diag = subspace
        .basis
        .iter()
        .map(|b| b.photons as f64 * omega_r + b.flips as f64 * omega_fmr)
        .collect();
    let offdiag = subspace.basis[..subspace.dim() - 1]
        .iter()
        .map(|b| Ok(g * (b.photons as f64).sqrt() * ladder_element(n_spins, b.flips)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(TridiagonalHamiltonian {
        diag,
        offdiag,
        subspace,
    })
}

/// Ascending eigenvalues of a block.
pub fn eigenvalues(h: &TridiagonalHamiltonian) -> Result<Vec<f64>> {
    Ok(symmetric_tridiagonal_eigenvalues(&h.diag, &h.offdiag)?)
}

/// Gap of the single-excitation block on resonance; equals `2g√N`.
pub fn vacuum_rabi_splitting(n_spins: f64, omega_r: f64, g: f64) -> Result<f64> {
    let h = build_hamiltonian(n_spins, 1, omega_r, omega_r, g)?.rotating_frame(omega_r);
    let ev = eigenvalues(&h)?;
    Ok(ev[1] - ev[0])
}

/// Level spacing at the centre of a block's spectrum.
///
/// For an even number of levels this is the gap between the two levels that
/// straddle the centre; for an odd number it is half the distance between the
/// neighbours of the central level. In the harmonic (`E ≪ N`) limit both equal
/// `2g√N` on resonance.
fn central_spacing(ev: &[f64]) -> f64 {
    let m = ev.len() / 2;
    if ev.len().is_multiple_of(2) {
        ev[m] - ev[m - 1]
    } else {
        0.5 * (ev[m + 1] - ev[m - 1])
    }
}

/// Central level spacing of each block `E = 1..=e_max` on resonance,
/// normalized by the single-excitation splitting `2g√N`.
///
/// For `E ≪ N` every block behaves like two coupled harmonic oscillators and
/// the ratio stays at 1; as `E` approaches `N` the finite spin length bends
/// the ladder and the ratio drops below 1.
pub fn splitting_vs_excitation(n_spins: f64, g: f64, e_max: u64) -> Result<Vec<(u64, f64)>> {
    if e_max == 0 {
        return Err(LadderError::NoExcitations);
    }
    let dim = LadderSubspace::dimension(n_spins, e_max)?;
    if dim > MAX_BLOCK_DIM as u64 {
        return Err(LadderError::DimensionCap {
            dim,
            cap: MAX_BLOCK_DIM,
        });
    }
    let norm = 2.0 * g * n_spins.sqrt();
    (1..=e_max)
        .map(|e| {
            // all diagonal entries are E·ω_r on resonance; drop them
            let h = build_hamiltonian(n_spins, e, 0.0, 0.0, g)?;
            let ev = eigenvalues(&h)?;
            Ok((e, central_spacing(&ev) / norm))
        })
        .collect()
}

/// Eigenvalues of the single-excitation block at detuning `delta`, as
/// `(lower, upper)`, measured in the frame rotating at `omega_r`.
pub fn single_excitation_levels(n_spins: f64, delta: f64, g: f64) -> Result<(f64, f64)> {
    let h = build_hamiltonian(n_spins, 1, 0.0, delta, g)?;
    let ev = eigenvalues(&h)?;
    Ok((ev[0], ev[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::branches_at_detuning;

    #[test]
    fn ladder_elements() {
        assert_eq!(ladder_element(7.0, 0).unwrap(), 7f64.sqrt());
        assert_eq!(ladder_element(2.0, 1).unwrap(), 2f64.sqrt());
        assert_eq!(ladder_element(5.0, 5).unwrap(), 0.0);
        assert!(matches!(
            ladder_element(5.0, 6),
            Err(LadderError::FlipOutOfRange { .. })
        ));
        assert!(matches!(ladder_element(2.5, 0), Err(LadderError::SpinCount(_))));
    }

    #[test]
    fn subspace_basis() {
        let s = LadderSubspace::new(3.0, 5).unwrap();
        assert_eq!(s.dim(), 4);
        for (k, b) in s.basis.iter().enumerate() {
            assert_eq!(b.flips, k as u64);
            assert_eq!(b.photons + b.flips, 5);
            assert!(b.flips as f64 <= s.n_spins);
        }
        assert_eq!(LadderSubspace::new(1e6, 3).unwrap().dim(), 4);
    }

    #[test]
    fn single_excitation_block() {
        let h = build_hamiltonian(9.0, 1, 5.0, 6.0, 0.5).unwrap();
        assert_eq!(h.diag, vec![5.0, 6.0]);
        assert_eq!(h.offdiag, vec![0.5 * 3.0]);
    }

    #[test]
    fn two_spins_two_quanta() {
        let g = 0.8;
        let h = build_hamiltonian(2.0, 2, 0.0, 0.0, g).unwrap();
        assert!((h.offdiag[0] - 2.0 * g).abs() < 1e-15);
        assert!((h.offdiag[1] - 2f64.sqrt() * g).abs() < 1e-15);
        let ev = eigenvalues(&h).unwrap();
        let r = 6f64.sqrt() * g;
        for (a, b) in ev.iter().zip([-r, 0.0, r]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_block_is_diagonal() {
        let h = build_hamiltonian(4.0, 3, 2.0, 3.5, 0.0).unwrap();
        let mut d = h.diag.clone();
        d.sort_by(f64::total_cmp);
        assert_eq!(eigenvalues(&h).unwrap(), d);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            build_hamiltonian(2.0, 0, 1.0, 1.0, 1.0),
            Err(LadderError::NoExcitations)
        );
        assert!(matches!(
            build_hamiltonian(2.0, 1, 1.0, 1.0, -1.0),
            Err(LadderError::Coupling(_))
        ));
        assert!(matches!(
            build_hamiltonian(1e9, 200_000, 1.0, 1.0, 1.0),
            Err(LadderError::DimensionCap { .. })
        ));
    }

    #[test]
    fn rabi_splitting_scaling() {
        let g = 0.3;
        let one = vacuum_rabi_splitting(1.0, 1e10, g).unwrap();
        assert!((one - 2.0 * g).abs() <= 1e-12 * one);
        let four = vacuum_rabi_splitting(4.0, 1e10, g).unwrap();
        assert!((four / one - 2.0).abs() < 1e-12);
    }

    #[test]
    fn splitting_normalization_and_quench() {
        let v = splitting_vs_excitation(10.0, 1.0, 10).unwrap();
        assert!((v[0].1 - 1.0).abs() < 1e-14);
        assert!(v[1].1 < 1.0 && v[1].1 > 0.9);
        for w in v.windows(2) {
            assert!(w[1].1 < w[0].1);
        }
    }

    #[test]
    fn harmonic_limit_large_n() {
        let v = splitting_vs_excitation(1e12, 1.0, 6).unwrap();
        for (_, r) in v {
            assert!((r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_excitation_matches_coupled_oscillators() {
        let n: f64 = 4.5e16;
        let g = 31.4;
        let ge = g * n.sqrt();
        for k in -5..=5 {
            let delta = f64::from(k) * 0.7 * ge;
            let (lo, hi) = single_excitation_levels(n, delta, g).unwrap();
            let b = branches_at_detuning(0.0, delta, ge);
            assert!((lo - b.lower).abs() <= 1e-12 * b.lower.abs().max(ge));
            assert!((hi - b.upper).abs() <= 1e-12 * b.upper.abs().max(ge));
        }
    }
}
