//! Standing-wave Gaussian mode intensity and effective atom numbers.
//!
//! The normalized TEM₀₀ intensity is D(ρ,z) = (w₀/w)²·sin²(kz)·exp(−2ρ²/w²)
//! with w = w₀√(1+(z/z_R)²). The axial phase is the literal sin²(kz):
//! nodes sit at kz = mπ and antinodes at kz = (m+½)π, so the antinode
//! nearest the waist is at |z| = λ/4. The envelope is symmetric about the
//! waist at z = 0.

use serde::{Deserialize, Serialize};

use crate::physics::CavityGeometry;

/// Atom position in mode cylindrical coordinates: transverse radius and
/// axial distance from the waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomPosition {
    /// Transverse distance from the cavity axis (m), ≥ 0.
    pub radial: f64,
    /// Axial coordinate measured from the waist (m).
    pub axial: f64,
}

impl AtomPosition {
    pub fn new(radial: f64, axial: f64) -> Self {
        Self { radial: radial.abs(), axial }
    }
}

/// Rayleigh length z_R = πw₀²/λ = k·w₀²/2.
pub fn rayleigh_length(geom: &CavityGeometry) -> f64 {
    std::f64::consts::PI * geom.waist * geom.waist / geom.wavelength
}

/// Transverse mode size w(z) = w₀·√(1+(z/z_R)²).
pub fn waist_at(geom: &CavityGeometry, axial: f64) -> f64 {
    let zr = rayleigh_length(geom);
    geom.waist * (1.0 + (axial / zr).powi(2)).sqrt()
}

/// Normalized mode intensity D(ρ,z) ∈ [0, 1].
pub fn mode_intensity(geom: &CavityGeometry, pos: &AtomPosition) -> f64 {
    let w = waist_at(geom, pos.axial);
    let k = 2.0 * std::f64::consts::PI / geom.wavelength;
    let envelope = (geom.waist / w).powi(2);
    let axial = (k * pos.axial).sin().powi(2);
    let transverse = (-2.0 * pos.radial * pos.radial / (w * w)).exp();
    envelope * axial * transverse
}

/// Effective atom number N = Σⱼ D(ρⱼ, zⱼ); an empty list gives 0.
pub fn effective_atom_number(geom: &CavityGeometry, positions: &[AtomPosition]) -> f64 {
    positions.iter().map(|p| mode_intensity(geom, p)).sum()
}
