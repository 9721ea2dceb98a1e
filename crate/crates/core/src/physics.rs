//! Cavity-QED rates and figures of merit derived from resonator geometry and
//! atomic constants.
//!
//! All rates are kept in s⁻¹ with the conventions: g₀ is half the
//! single-photon Rabi frequency at the field maximum, γ is half the
//! excited-state population decay rate, and κ is half the decay rate of the
//! optical power stored in the cavity, related to the finesse by
//! κ = πc/(2Lℱ).

use serde::{Deserialize, Serialize};

use crate::constants::{
    HBAR, RB85_D2_CYCLING_DIPOLE, RB85_D2_WAVELENGTH, RB85_GAMMA, SPEED_OF_LIGHT,
    VACUUM_PERMITTIVITY, ZEEMAN_F3_AVERAGE,
};
use crate::error::{Error, Result};

/// Plano-concave resonator geometry and its probe coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Mirror separation L (m).
    pub length: f64,
    /// Mode waist w₀ (m).
    pub waist: f64,
    /// Radius of curvature of the concave mirror (m).
    pub mirror_curvature: f64,
    /// Finesse ℱ.
    pub finesse: f64,
    /// Resonant wavelength λ (m).
    pub wavelength: f64,
    /// Input-coupling contrast β, defined by the resonant empty-cavity
    /// reflection I₁/I₀ = (1−β)².
    pub input_coupling: f64,
}

impl CavityGeometry {
    pub fn new(
        length: f64,
        waist: f64,
        mirror_curvature: f64,
        finesse: f64,
        wavelength: f64,
        input_coupling: f64,
    ) -> Result<Self> {
        let geom = Self { length, waist, mirror_curvature, finesse, wavelength, input_coupling };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &'static str, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { field, message: message.to_string() })
            }
        };
        check(self.length > 0.0, "length", "cavity length must be positive")?;
        check(self.waist > 0.0, "waist", "mode waist must be positive")?;
        check(self.mirror_curvature > 0.0, "mirror_curvature", "curvature must be positive")?;
        check(self.finesse >= 1.0, "finesse", "finesse must be >= 1")?;
        check(self.wavelength > 0.0, "wavelength", "wavelength must be positive")?;
        check(
            (0.0..=1.0).contains(&self.input_coupling),
            "input_coupling",
            "beta must lie in [0, 1]",
        )?;
        Ok(())
    }

    /// Angular frequency of the resonant mode, ω = 2πc/λ (rad/s).
    pub fn mode_angular_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.wavelength
    }
}

/// Atomic transition constants entering the coupling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    /// Electric dipole transition moment μ (C·m).
    pub dipole_moment: f64,
    /// Half the excited-state population decay rate γ (s⁻¹).
    pub gamma: f64,
    /// Average of g²/g₀² over the populated ground sublevels (1 for a pure
    /// cycling transition, 3/7 for molasses-mixed F=3).
    pub zeeman_factor: f64,
    /// Transition angular frequency ω_A (rad/s).
    pub transition_angular_frequency: f64,
}

impl AtomSpecies {
    pub fn new(
        dipole_moment: f64,
        gamma: f64,
        zeeman_factor: f64,
        transition_angular_frequency: f64,
    ) -> Result<Self> {
        let species =
            Self { dipole_moment, gamma, zeeman_factor, transition_angular_frequency };
        species.validate()?;
        Ok(species)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dipole_moment <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "dipole_moment",
                message: "dipole moment must be positive".into(),
            });
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "gamma",
                message: "gamma must be positive".into(),
            });
        }
        if !(self.zeeman_factor > 0.0 && self.zeeman_factor <= 1.0) {
            return Err(Error::InvalidParameter {
                field: "zeeman_factor",
                message: "zeeman factor must lie in (0, 1]".into(),
            });
        }
        if self.transition_angular_frequency <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "transition_angular_frequency",
                message: "transition frequency must be positive".into(),
            });
        }
        Ok(())
    }

    /// ⁸⁵Rb D₂ with molasses-mixed F=3 sublevels (g² = (3/7)·g₀²).
    pub fn rb85_d2() -> Self {
        Self {
            dipole_moment: RB85_D2_CYCLING_DIPOLE,
            gamma: RB85_GAMMA,
            zeeman_factor: ZEEMAN_F3_AVERAGE,
            transition_angular_frequency: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT
                / RB85_D2_WAVELENGTH,
        }
    }
}

/// Derived rate bundle used by all spectrum and emission math.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledRates {
    /// Peak coupling rate g₀ (rad/s), half the single-photon Rabi frequency.
    pub g0: f64,
    /// Zeeman-averaged squared coupling g² ((rad/s)²).
    pub g_squared: f64,
    /// Cavity field decay rate κ (s⁻¹).
    pub kappa: f64,
    /// Atomic dipole decay rate γ (s⁻¹).
    pub gamma: f64,
    /// Critical atom number κγ/g₀² (computed with the unaveraged g₀).
    pub critical_atom_number: f64,
}

impl CoupledRates {
    /// Cooperativity per effective atom, C = g²/(κγ), with the
    /// Zeeman-averaged g².
    pub fn cooperativity(&self) -> f64 {
        self.g_squared / (self.kappa * self.gamma)
    }
}

/// Mode volume of the standing-wave TEM₀₀ mode, V = πw₀²L/4.
pub fn mode_volume(geom: &CavityGeometry) -> f64 {
    std::f64::consts::PI * geom.waist * geom.waist * geom.length / 4.0
}

/// Peak atom-cavity coupling rate g₀ = μ·√(ω_C/(2ħε₀V)), with the cavity
/// tuned to the atomic resonance (ω_C = ω_A).
pub fn coupling_g0(species: &AtomSpecies, geom: &CavityGeometry) -> f64 {
    let omega_c = species.transition_angular_frequency;
    let volume = mode_volume(geom);
    species.dipole_moment * (omega_c / (2.0 * HBAR * VACUUM_PERMITTIVITY * volume)).sqrt()
}

/// Cavity field decay rate from the finesse, κ = πc/(2Lℱ).
pub fn kappa_from_finesse(geom: &CavityGeometry) -> f64 {
    std::f64::consts::PI * SPEED_OF_LIGHT / (2.0 * geom.length * geom.finesse)
}

/// Derive the full rate bundle for a species-resonator pair.
pub fn derive_rates(species: &AtomSpecies, geom: &CavityGeometry) -> CoupledRates {
    let g0 = coupling_g0(species, geom);
    let kappa = kappa_from_finesse(geom);
    CoupledRates {
        g0,
        g_squared: species.zeeman_factor * g0 * g0,
        kappa,
        gamma: species.gamma,
        critical_atom_number: kappa * species.gamma / (g0 * g0),
    }
}
