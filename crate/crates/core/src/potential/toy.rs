//! The nearest-neighbour toy potential
//! `U = (hbar^2/8m) sum_n (1/(x_{n+1}-x_n) - 1/(x_n-x_{n-1}))^2`
//! with `x_0 = -inf` and `x_{N+1} = +inf`.

use super::check_gaps;
use crate::ensemble::WorldEnsemble;
use crate::error::Result;
use crate::units::PhysicalParams;

/// Inverse gaps `r_j = 1/(x_{j+1} - x_j)`, padded with the infinite-boundary zeros
/// so that `r[0]` and `r[N]` vanish.
fn inverse_gaps(positions: &[f64]) -> Result<Vec<f64>> {
    check_gaps(positions)?;
    let n = positions.len();
    let mut r = vec![0.0; n + 1];
    for j in 1..n {
        r[j] = 1.0 / (positions[j] - positions[j - 1]);
    }
    Ok(r)
}

pub(crate) fn energy(positions: &[f64], params: &PhysicalParams) -> Result<f64> {
    let r = inverse_gaps(positions)?;
    let sum: f64 = r.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(params.quantum_prefactor() * sum)
}

pub(crate) fn forces_into(positions: &[f64], params: &PhysicalParams, out: &mut [f64]) -> Result<()> {
    let r = inverse_gaps(positions)?;
    let n = positions.len();
    let k = params.quantum_prefactor();
    // s_j = r_j - r_{j-1} for worlds j = 1..N (indices into r shifted by one).
    // dU/dr_j = 2k (s_j - s_{j+1}); dr_j/dx_{j+1} = -r_j^2, dr_j/dx_j = +r_j^2.
    for j in 1..n {
        let s_left = r[j] - r[j - 1];
        let s_right = r[j + 1] - r[j];
        let du_dr = 2.0 * k * (s_left - s_right);
        let g = du_dr * r[j] * r[j];
        // gap j joins worlds j-1 and j (0-based)
        out[j - 1] -= g;
        out[j] += g;
    }
    Ok(())
}

pub fn toy_potential(e: &WorldEnsemble, params: &PhysicalParams) -> Result<f64> {
    energy(&e.positions, params)
}

pub fn toy_force(e: &WorldEnsemble, params: &PhysicalParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; e.len()];
    forces_into(&e.positions, params, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::potential::testing::{fd_forces, max_rel_error, random_positions};

    fn hm1() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 1.0).unwrap()
    }

    fn ens(xs: &[f64]) -> WorldEnsemble {
        WorldEnsemble::from_positions(xs.to_vec()).unwrap()
    }

    #[test]
    fn single_world_is_free() {
        assert_eq!(toy_potential(&ens(&[0.3]), &hm1()).unwrap(), 0.0);
        assert_eq!(toy_force(&ens(&[0.3]), &hm1()).unwrap(), vec![0.0]);
    }

    #[test]
    fn three_unit_spaced_worlds() {
        assert!((toy_potential(&ens(&[0.0, 1.0, 2.0]), &hm1()).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn uniform_interior_terms_vanish() {
        // Only the two boundary terms (1/h)^2 survive.
        let h = 0.37;
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * h).collect();
        let u = toy_potential(&ens(&xs), &hm1()).unwrap();
        assert!((u - 2.0 / (8.0 * h * h)).abs() < 1e-12);
        let f = toy_force(&ens(&xs[..5]), &hm1()).unwrap();
        assert!(f[2].abs() < 1e-12);
    }

    #[test]
    fn matches_finite_differences() {
        let p = hm1();
        for seed in 0..50 {
            let xs = random_positions(seed, 5 + (seed as usize % 30));
            let analytic = toy_force(&ens(&xs), &p).unwrap();
            let fd = fd_forces(|x| energy(x, &p).unwrap(), &xs, 1e-6);
            assert!(max_rel_error(&analytic, &fd) < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn coincident_worlds_are_singular() {
        let e = WorldEnsemble { positions: vec![0.0, 1.0, 1.0], momenta: vec![0.0; 3], pinned: vec![false; 3] };
        assert!(matches!(energy(&e.positions, &hm1()), Err(Error::Singularity { world: 2, .. })));
    }
}
