//! Physical parameters and the dimensionless unit system.
//!
//! Positions are measured internally in `X = sqrt(2 m omega / hbar) x` and time in
//! `T = omega t / (2 pi)`, so one oscillator period is `T = 1`. The equations of
//! motion in `(X, T)` are exactly those of a particle with `m = 1`, `omega = 2 pi`
//! and `hbar = 4 pi`; [`PhysicalParams::dimensionless`] returns that set, which
//! makes every conversion below the identity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    pub omega: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, omega: f64) -> Result<Self> {
        let params = Self { mass, hbar, omega };
        params.validate()?;
        Ok(params)
    }

    /// Parameters under which dimensionless coordinates are the simulation
    /// coordinates: `m = 1`, `omega = 2 pi`, `hbar = 2 m omega = 4 pi`.
    pub fn dimensionless() -> Self {
        Self {
            mass: 1.0,
            hbar: 4.0 * PI,
            omega: 2.0 * PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mass", self.mass), ("hbar", self.hbar), ("omega", self.omega)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `sqrt(2 m omega / hbar)`: dimensionless length per physical length.
    pub fn length_scale(&self) -> f64 {
        (2.0 * self.mass * self.omega / self.hbar).sqrt()
    }

    /// `hbar^2 / 8m`, the prefactor shared by every interworld potential.
    pub fn quantum_prefactor(&self) -> f64 {
        self.hbar * self.hbar / (8.0 * self.mass)
    }

    /// Ground-state energy `hbar omega / 2`.
    pub fn ground_energy(&self) -> f64 {
        0.5 * self.hbar * self.omega
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::dimensionless()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    #[default]
    Dimensionless,
    Physical,
}

impl UnitSystem {
    /// Parameters used for internal computation. Physical inputs are always
    /// converted at the boundary, so this is the dimensionless set in both modes.
    pub fn internal_params(&self) -> PhysicalParams {
        PhysicalParams::dimensionless()
    }
}

pub fn to_dimensionless(x: f64, params: &PhysicalParams) -> f64 {
    params.length_scale() * x
}

pub fn from_dimensionless(x: f64, params: &PhysicalParams) -> f64 {
    x / params.length_scale()
}

pub fn to_dimensionless_time(t: f64, params: &PhysicalParams) -> f64 {
    params.omega * t / (2.0 * PI)
}

pub fn from_dimensionless_time(t: f64, params: &PhysicalParams) -> f64 {
    2.0 * PI * t / params.omega
}

/// Converts an internal momentum (`m = 1`, `dX/dT`) to a physical momentum `m dx/dt`.
pub fn momentum_from_dimensionless(p: f64, params: &PhysicalParams) -> f64 {
    p * params.mass * params.omega / (2.0 * PI * params.length_scale())
}
