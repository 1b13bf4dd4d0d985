//! Rational-smoothing potential
//! `U = (hbar^2/8m) sum_n { [sum_c a_{c2} d_c] / [sum_c a_{c1} d_c]^2 }^2`,
//! `d_c = x_{n+c} - x_n`, i.e. the log-derivative `-y''/(y')^2` of the inverse
//! CDF estimated with finite-difference weights.

use log::warn;

use super::{check_gaps, EdgePolicy};
use crate::ensemble::WorldEnsemble;
use crate::error::{Error, Result};
use crate::stencil::{build_stencil, OffsetSet, StencilCoefficients};
use crate::units::PhysicalParams;

/// First- and second-derivative weights for one local term.
#[derive(Clone, Debug, PartialEq)]
struct Weights {
    offsets: Vec<i64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Weights {
    fn from_stencil(s: &StencilCoefficients) -> Self {
        let (first, second) = s.column(1).into_iter().zip(s.column(2)).map(|((_, a), (_, b))| (a, b)).unzip();
        Self { offsets: s.offsets().as_slice().to_vec(), first, second }
    }

    fn one_sided(template: &OffsetSet, order: usize, left: usize, right: usize) -> Result<Self> {
        let offsets = nearest_offsets(template.len(), left, right)?;
        Ok(Self::from_stencil(&build_stencil(&OffsetSet::new(offsets)?, order)?))
    }
}

/// The `count` nonzero offsets of smallest magnitude within `[-left, right]`,
/// preferring the left side on ties.
fn nearest_offsets(count: usize, left: usize, right: usize) -> Result<Vec<i64>> {
    if left + right < count {
        return Err(Error::TooFewWorlds { needed: count + 1, got: left + right + 1 });
    }
    let mut picked = Vec::with_capacity(count);
    let (mut l, mut r) = (1usize, 1usize);
    while picked.len() < count {
        let take_left = l <= left && (l <= r || r > right);
        if take_left {
            picked.push(-(l as i64));
            l += 1;
        } else {
            picked.push(r as i64);
            r += 1;
        }
    }
    picked.sort_unstable();
    Ok(picked)
}

/// A symmetric rational-smoothing stencil plus the one-sided variants used
/// near the ends under [`EdgePolicy::OneSidedStencil`].
#[derive(Clone, Debug)]
pub struct RationalSmoothing {
    stencil: StencilCoefficients,
    edge_policy: EdgePolicy,
    interior: Weights,
    /// `near_left[j]`: only `j` worlds exist to the left (`j < reach`).
    near_left: Vec<Weights>,
    near_right: Vec<Weights>,
}

impl RationalSmoothing {
    pub fn new(stencil: StencilCoefficients, edge_policy: EdgePolicy) -> Result<Self> {
        if !stencil.offsets().is_symmetric() {
            return Err(Error::Offsets(format!(
                "rational smoothing needs a symmetric offset set, got {:?}",
                stencil.offsets().as_slice()
            )));
        }
        if stencil.order() < 2 {
            return Err(Error::Order(stencil.order()));
        }
        let reach = stencil.offsets().max_abs();
        let (mut near_left, mut near_right) = (Vec::new(), Vec::new());
        if edge_policy == EdgePolicy::OneSidedStencil {
            let c = stencil.offsets().len();
            for j in 0..reach {
                near_left.push(Weights::one_sided(stencil.offsets(), stencil.order(), j, c)?);
                near_right.push(Weights::one_sided(stencil.offsets(), stencil.order(), c, j)?);
            }
        }
        Ok(Self { interior: Weights::from_stencil(&stencil), stencil, edge_policy, near_left, near_right })
    }

    pub fn of_order(order: usize, edge_policy: EdgePolicy) -> Result<Self> {
        let offsets = OffsetSet::symmetric_for_order(order)?;
        Self::new(build_stencil(&offsets, order)?, edge_policy)
    }

    pub fn stencil(&self) -> &StencilCoefficients {
        &self.stencil
    }

    fn min_worlds(&self) -> usize {
        match self.edge_policy {
            EdgePolicy::SkipBoundaryTerms => 2 * self.stencil.offsets().max_abs() + 1,
            EdgePolicy::OneSidedStencil => self.stencil.offsets().len() + 1,
        }
    }

    /// Visits each local term `n` (0-based) with the weights it uses.
    fn for_each_term(
        &self,
        n_worlds: usize,
        mut visit: impl FnMut(usize, &Weights) -> Result<()>,
    ) -> Result<()> {
        if n_worlds < self.min_worlds() {
            return Err(Error::TooFewWorlds { needed: self.min_worlds(), got: n_worlds });
        }
        let reach = self.stencil.offsets().max_abs();
        let mut scratch;
        for n in 0..n_worlds {
            let left = n;
            let right = n_worlds - 1 - n;
            let w = if left >= reach && right >= reach {
                &self.interior
            } else {
                match self.edge_policy {
                    EdgePolicy::SkipBoundaryTerms => continue,
                    EdgePolicy::OneSidedStencil => {
                        if left < reach && right >= self.interior.offsets.len() {
                            &self.near_left[left]
                        } else if right < reach && left >= self.interior.offsets.len() {
                            &self.near_right[right]
                        } else {
                            scratch = Weights::one_sided(self.stencil.offsets(), self.stencil.order(), left, right)?;
                            &scratch
                        }
                    }
                }
            };
            visit(n, w)?;
        }
        Ok(())
    }

    pub(crate) fn energy(&self, positions: &[f64], params: &PhysicalParams) -> Result<f64> {
        check_gaps(positions)?;
        let k = params.quantum_prefactor();
        let mut total = 0.0;
        self.for_each_term(positions.len(), |n, w| {
            let t = local_term(positions, n, w)?;
            total += k * t.ratio * t.ratio;
            Ok(())
        })?;
        Ok(total)
    }

    pub(crate) fn forces_into(&self, positions: &[f64], params: &PhysicalParams, out: &mut [f64]) -> Result<()> {
        check_gaps(positions)?;
        let k = params.quantum_prefactor();
        self.for_each_term(positions.len(), |n, w| {
            let t = local_term(positions, n, w)?;
            // U_n = k g^2, g = B / A^2
            let du_db = 2.0 * k * t.ratio / (t.first * t.first);
            let du_da = -2.0 * du_db * t.second / t.first;
            let mut centre = 0.0;
            for ((&c, &a1), &a2) in w.offsets.iter().zip(&w.first).zip(&w.second) {
                let g = du_da * a1 + du_db * a2;
                out[(n as i64 + c) as usize] -= g;
                centre += g;
            }
            out[n] += centre;
            Ok(())
        })
    }
}

struct LocalTerm {
    first: f64,
    second: f64,
    ratio: f64,
}

fn local_term(xs: &[f64], n: usize, w: &Weights) -> Result<LocalTerm> {
    let xn = xs[n];
    let (mut first, mut second, mut scale) = (0.0, 0.0, 0.0f64);
    for ((&c, &a1), &a2) in w.offsets.iter().zip(&w.first).zip(&w.second) {
        let d = xs[(n as i64 + c) as usize] - xn;
        first += a1 * d;
        second += a2 * d;
        scale = scale.max(d.abs() / c.unsigned_abs() as f64);
    }
    if !(first > 0.0) {
        return Err(Error::Singularity {
            world: n + 1,
            reason: format!("first-derivative estimate {first:e} is not positive"),
        });
    }
    if first < 1e-12 * scale {
        warn!("world {}: first-derivative estimate {first:e} is ill-conditioned (gap scale {scale:e})", n + 1);
    }
    Ok(LocalTerm { first, second, ratio: second / (first * first) })
}

/// `U_{alpha,L}` with boundary terms skipped.
pub fn rational_potential(e: &WorldEnsemble, s: &StencilCoefficients, params: &PhysicalParams) -> Result<f64> {
    RationalSmoothing::new(s.clone(), EdgePolicy::SkipBoundaryTerms)?.energy(&e.positions, params)
}

pub fn rational_force(e: &WorldEnsemble, s: &StencilCoefficients, params: &PhysicalParams) -> Result<Vec<f64>> {
    let r = RationalSmoothing::new(s.clone(), EdgePolicy::SkipBoundaryTerms)?;
    let mut out = vec![0.0; e.len()];
    r.forces_into(&e.positions, params, &mut out)?;
    Ok(out)
}
