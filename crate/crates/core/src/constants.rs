//! Physical constants in SI units.

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Standard gravitational acceleration (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Mass of ⁸⁵Rb (kg).
pub const RB85_MASS: f64 = 1.409_993_440_748_739_7e-25;

/// Half the natural decay rate of the ⁸⁵Rb 5P₃/₂ excited-state population (s⁻¹).
pub const RB85_GAMMA: f64 = 1.9e7;

/// D₂ transition wavelength of ⁸⁵Rb (m).
pub const RB85_D2_WAVELENGTH: f64 = 780e-9;

/// Effective dipole moment of the ⁸⁵Rb D₂ cycling transition
/// |F=3, M=±3⟩ → |F′=4, M′=±4⟩ for σ±-polarized light (C·m).
///
/// Calibrated to reproduce the measured vacuum coupling rate
/// g₀ = 6.1×10⁸ s⁻¹ of the reference resonator (L = 130 µm, w₀ = 4.6 µm,
/// λ = 780 nm); the literature value 2.534×10⁻²⁹ C·m gives 6.2×10⁸ s⁻¹
/// for the same geometry.
pub const RB85_D2_CYCLING_DIPOLE: f64 = 2.493_324_143_352_383e-29;

/// Zeeman average of the squared coupling over the F=3 ground sublevels,
/// g² = (3/7)·g₀², appropriate after state mixing in optical molasses.
pub const ZEEMAN_F3_AVERAGE: f64 = 3.0 / 7.0;
