//! Interworld potentials `U(X) = (hbar^2 / 8m) sum_n (P'_n / P_n)^2` and their
//! exact forces.
//!
//! Three estimates of the log-derivative `P'/P` at each world are provided:
//! the nearest-neighbour toy model, rational smoothing of arbitrary order
//! (finite differences of the inverse CDF) and the cubic equivariance fit.
//! All forces are analytic gradients, summed term by term in index order so
//! that results are bit-reproducible.

mod equivariance;
mod rational;
mod toy;

use serde::{Deserialize, Serialize};

pub use equivariance::{
    equivariance_coefficients, equivariance_force, equivariance_potential, Equivariance,
    EquivarianceCoefficients,
};
pub use rational::{rational_force, rational_potential, RationalSmoothing};
pub use toy::{toy_force, toy_potential};

use crate::ensemble::WorldEnsemble;
use crate::error::{Error, Result};
use crate::stencil::StencilCoefficients;
use crate::units::PhysicalParams;

/// How local terms that lack a full neighbourhood are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    /// Omit terms whose neighbourhood would reference missing worlds.
    #[default]
    SkipBoundaryTerms,
    /// Use a one-sided neighbourhood of the same size near the ends.
    OneSidedStencil,
}

#[derive(Clone, Debug)]
pub enum PotentialKind {
    Toy,
    RationalSmoothing(RationalSmoothing),
    Equivariance(Equivariance),
}

#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub edge_policy: EdgePolicy,
}

impl PotentialSpec {
    pub fn toy() -> Self {
        Self { kind: PotentialKind::Toy, edge_policy: EdgePolicy::SkipBoundaryTerms }
    }

    /// Rational smoothing of order `order` on the narrowest symmetric offset set.
    pub fn rational(order: usize, edge_policy: EdgePolicy) -> Result<Self> {
        let stencil = RationalSmoothing::of_order(order, edge_policy)?;
        Ok(Self { kind: PotentialKind::RationalSmoothing(stencil), edge_policy })
    }

    pub fn rational_with(stencil: StencilCoefficients, edge_policy: EdgePolicy) -> Result<Self> {
        let r = RationalSmoothing::new(stencil, edge_policy)?;
        Ok(Self { kind: PotentialKind::RationalSmoothing(r), edge_policy })
    }

    pub fn equivariance(edge_policy: EdgePolicy) -> Self {
        Self { kind: PotentialKind::Equivariance(Equivariance::new(edge_policy)), edge_policy }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PotentialKind::Toy => "toy".into(),
            PotentialKind::RationalSmoothing(r) => format!("rational_L{}", r.stencil().order()),
            PotentialKind::Equivariance(_) => "equivariance".into(),
        }
    }

    /// Largest index distance between a world and any world its local term reads.
    pub fn term_reach(&self) -> usize {
        match &self.kind {
            PotentialKind::Toy => 1,
            PotentialKind::RationalSmoothing(r) => r.stencil().offsets().max_abs(),
            PotentialKind::Equivariance(_) => 2,
        }
    }

    /// Largest index distance over which a world's position affects another
    /// world's force.
    pub fn force_reach(&self) -> usize {
        2 * self.term_reach()
    }

    pub fn energy(&self, positions: &[f64], params: &PhysicalParams) -> Result<f64> {
        match &self.kind {
            PotentialKind::Toy => toy::energy(positions, params),
            PotentialKind::RationalSmoothing(r) => r.energy(positions, params),
            PotentialKind::Equivariance(e) => e.energy(positions, params),
        }
    }

    /// Writes the interworld force `-dU/dx_m` for every world into `out`.
    pub fn forces_into(&self, positions: &[f64], params: &PhysicalParams, out: &mut [f64]) -> Result<()> {
        assert_eq!(positions.len(), out.len());
        out.iter_mut().for_each(|f| *f = 0.0);
        match &self.kind {
            PotentialKind::Toy => toy::forces_into(positions, params, out),
            PotentialKind::RationalSmoothing(r) => r.forces_into(positions, params, out),
            PotentialKind::Equivariance(e) => e.forces_into(positions, params, out),
        }
    }

    pub fn forces(&self, positions: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
        let mut out = vec![0.0; positions.len()];
        self.forces_into(positions, params, &mut out)?;
        Ok(out)
    }

    pub fn potential(&self, e: &WorldEnsemble, params: &PhysicalParams) -> Result<f64> {
        e.validate().into_result()?;
        self.energy(&e.positions, params)
    }

    pub fn force(&self, e: &WorldEnsemble, params: &PhysicalParams) -> Result<Vec<f64>> {
        e.validate().into_result()?;
        self.forces(&e.positions, params)
    }
}

/// Fails with the first non-positive gap, naming its left world (1-based).
pub(crate) fn check_gaps(positions: &[f64]) -> Result<()> {
    match crate::ensemble::first_disorder(positions) {
        Some(i) => Err(Error::Singularity {
            world: i + 1,
            reason: format!("worlds {} and {} coincide or are out of order", i + 1, i + 2),
        }),
        None => Ok(()),
    }
}
