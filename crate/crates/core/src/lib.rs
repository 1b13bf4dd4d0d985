//! Many Interacting Worlds (MIW) dynamics for a single particle in one dimension.
//!
//! An ensemble of `N` classical "worlds" replaces the wavefunction. Each world
//! carries one particle position; a repulsive interworld potential built from
//! nearby world positions approximates Bohm's quantum potential. The crate
//! provides:
//!
//! * [`units`] and [`ensemble`]: parameters, unit conversions and the world state;
//! * [`density`]: harmonic-oscillator eigenstate densities and equal-area sampling;
//! * [`stencil`]: exact finite-difference coefficients on the uniform `u` grid;
//! * [`potential`]: the toy, rational-smoothing and equivariance potentials with
//!   analytic forces;
//! * [`integrator`]: velocity-Verlet evolution with pinned worlds;
//! * [`scenarios`]: canned harmonic-oscillator experiments and their diagnostics;
//! * [`cli`]: configuration files and CSV/JSON output used by the `miw` binary.

pub mod cli;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod potential;
pub mod scenarios;
pub mod stencil;
pub mod units;

pub use density::{DensityKind, DensityModel};
pub use ensemble::{Validity, WorldEnsemble};
pub use error::{Error, Result};
pub use integrator::{
    EnergyBreakdown, ExternalPotential, RunResult, SimulationConfig, Termination,
    TrajectoryRecord,
};
pub use potential::{EdgePolicy, PotentialKind, PotentialSpec};
pub use scenarios::{Outcome, ScenarioName, ScenarioOverrides, ScenarioReport};
pub use stencil::{OffsetSet, StencilCoefficients};
pub use units::{PhysicalParams, UnitSystem};
