//! Physical constants of the two-condensate system and the trap unit system.
//!
//! Internally everything is expressed in trap units: `hbar = m = omega_m = 1`
//! where `omega_m = sqrt((omega_a^2 + omega_b^2) / 2)`. Lengths are then in
//! units of the oscillator length `sqrt(hbar / (m omega_m))`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant in J s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Atomic mass unit in kg.
pub const AMU_SI: f64 = 1.660_539_066_60e-27;
/// Mass of a rubidium-87 atom in kg.
pub const RB87_MASS_SI: f64 = 86.909_180_527 * AMU_SI;

/// Experimental inputs in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub n_atoms: f64,
    pub mass_kg: f64,
    /// Angular trap frequency of species A, rad/s.
    pub omega_a: f64,
    /// Angular trap frequency of species B, rad/s.
    pub omega_b: f64,
    pub scattering_length_m: f64,
    /// Josephson coupling, rad/s.
    pub lambda: f64,
}

/// Conversion factors between trap units and SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub length_m: f64,
    pub time_s: f64,
    pub mass_kg: f64,
}

impl UnitSystem {
    pub fn energy_j(&self) -> f64 {
        HBAR_SI / self.time_s
    }
}

/// Validated parameters in trap units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub n_total: f64,
    pub mass: f64,
    pub hbar: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    /// Contact coupling `4 pi hbar^2 a_sc / m`.
    pub u0: f64,
    pub lambda_coupling: f64,
    /// Scale factors back to SI; `None` for parameters built directly in trap units.
    pub units: Option<UnitSystem>,
}

impl PhysicalParams {
    /// Builds parameters directly in trap units (`hbar = m = 1`).
    pub fn dimensionless(
        n_total: f64,
        omega_a: f64,
        omega_b: f64,
        u0: f64,
        lambda_coupling: f64,
    ) -> Result<Self> {
        let p = PhysicalParams {
            n_total,
            mass: 1.0,
            hbar: 1.0,
            omega_a,
            omega_b,
            u0,
            lambda_coupling,
            units: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Converts SI inputs to trap units.
    pub fn from_si(raw: &RawParams) -> Result<Self> {
        check_positive("n_atoms", raw.n_atoms)?;
        if raw.n_atoms < 1.0 {
            return Err(Error::param("n_atoms", "need at least one atom"));
        }
        check_positive("mass_kg", raw.mass_kg)?;
        check_positive("omega_a", raw.omega_a)?;
        check_positive("omega_b", raw.omega_b)?;
        check_nonnegative("lambda", raw.lambda)?;
        if !raw.scattering_length_m.is_finite() {
            return Err(Error::param("scattering_length_m", "must be finite"));
        }
        let omega_m = ((raw.omega_a.powi(2) + raw.omega_b.powi(2)) / 2.0).sqrt();
        let units = UnitSystem {
            length_m: (HBAR_SI / (raw.mass_kg * omega_m)).sqrt(),
            time_s: 1.0 / omega_m,
            mass_kg: raw.mass_kg,
        };
        let p = PhysicalParams {
            n_total: raw.n_atoms,
            mass: 1.0,
            hbar: 1.0,
            omega_a: raw.omega_a / omega_m,
            omega_b: raw.omega_b / omega_m,
            u0: 4.0 * PI * raw.scattering_length_m / units.length_m,
            lambda_coupling: raw.lambda / omega_m,
            units: Some(units),
        };
        p.validate()?;
        Ok(p)
    }

    /// Inverse of [`PhysicalParams::from_si`].
    pub fn to_si(&self) -> Option<RawParams> {
        let u = self.units?;
        let omega_m = 1.0 / u.time_s;
        Some(RawParams {
            n_atoms: self.n_total,
            mass_kg: u.mass_kg * self.mass,
            omega_a: self.omega_a * omega_m,
            omega_b: self.omega_b * omega_m,
            scattering_length_m: self.u0 * self.mass * u.length_m / (4.0 * PI * self.hbar.powi(2)),
            lambda: self.lambda_coupling * omega_m,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("n_total", self.n_total)?;
        if self.n_total < 1.0 {
            return Err(Error::param("n_total", "need at least one atom"));
        }
        check_positive("mass", self.mass)?;
        check_positive("hbar", self.hbar)?;
        check_positive("omega_a", self.omega_a)?;
        check_positive("omega_b", self.omega_b)?;
        check_nonnegative("lambda_coupling", self.lambda_coupling)?;
        if !self.u0.is_finite() {
            return Err(Error::param("u0", "must be finite"));
        }
        Ok(())
    }

    /// `(omega_a^2 + omega_b^2) / 2`.
    pub fn omega_mean_sq(&self) -> f64 {
        (self.omega_a.powi(2) + self.omega_b.powi(2)) / 2.0
    }

    /// `(omega_a^2 - omega_b^2) / 2`, so that `dV(r) = m * delta_omega_sq * r^2 / 2`.
    pub fn delta_omega_sq(&self) -> f64 {
        (self.omega_a.powi(2) - self.omega_b.powi(2)) / 2.0
    }

    pub fn v_a(&self, r: f64) -> f64 {
        0.5 * self.mass * self.omega_a.powi(2) * r * r
    }

    pub fn v_b(&self, r: f64) -> f64 {
        0.5 * self.mass * self.omega_b.powi(2) * r * r
    }

    /// Mean potential `(V_A + V_B) / 2`.
    pub fn v_mean(&self, r: f64) -> f64 {
        0.5 * self.mass * self.omega_mean_sq() * r * r
    }

    /// Half-difference `(V_A - V_B) / 2`.
    pub fn delta_v(&self, r: f64) -> f64 {
        0.5 * self.mass * self.delta_omega_sq() * r * r
    }

    /// Same parameters with `delta_omega_sq` replaced, keeping the mean frequency.
    pub fn with_delta_omega_sq(&self, delta_omega_sq: f64) -> Result<Self> {
        let mean = self.omega_mean_sq();
        let a2 = mean + delta_omega_sq;
        let b2 = mean - delta_omega_sq;
        if a2 <= 0.0 || b2 <= 0.0 {
            return Err(Error::param(
                "delta_omega_sq",
                "exceeds the mean squared frequency",
            ));
        }
        let mut p = *self;
        p.omega_a = a2.sqrt();
        p.omega_b = b2.sqrt();
        p.validate()?;
        Ok(p)
    }
}

fn check_positive(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive, got {x}")))
    }
}

fn check_nonnegative(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            field,
            format!("must be non-negative, got {x}"),
        ))
    }
}
