//! Velocity-Verlet evolution of the world ensemble under
//! `H = sum_n (p_n^2 / 2m + V(x_n)) + U(X)`, with pinned worlds held fixed.

use serde::{Deserialize, Serialize};

use crate::ensemble::{first_disorder, WorldEnsemble};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::units::PhysicalParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalPotential {
    #[default]
    None,
    /// `V(q) = m omega^2 q^2 / 2`.
    Harmonic { omega: f64 },
}

impl ExternalPotential {
    pub fn energy(&self, x: f64, params: &PhysicalParams) -> f64 {
        match *self {
            ExternalPotential::None => 0.0,
            ExternalPotential::Harmonic { omega } => 0.5 * params.mass * omega * omega * x * x,
        }
    }

    /// `-V'(x)`.
    pub fn force(&self, x: f64, params: &PhysicalParams) -> f64 {
        match *self {
            ExternalPotential::None => 0.0,
            ExternalPotential::Harmonic { omega } => -params.mass * omega * omega * x,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub potential: PotentialSpec,
    pub external_potential: ExternalPotential,
    pub dt: f64,
    pub steps: u64,
    pub record_every: u64,
    pub pinned_left: usize,
    pub pinned_right: usize,
}

impl SimulationConfig {
    pub fn new(potential: PotentialSpec, external_potential: ExternalPotential, dt: f64, steps: u64) -> Self {
        Self { potential, external_potential, dt, steps, record_every: 1, pinned_left: 0, pinned_right: 0 }
    }

    pub fn validate(&self, n_worlds: usize) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.pinned_left + self.pinned_right >= n_worlds {
            return Err(Error::Config(format!(
                "pinning {} + {} worlds leaves none of {n_worlds} free",
                self.pinned_left, self.pinned_right
            )));
        }
        if let ExternalPotential::Harmonic { omega } = self.external_potential {
            if !(omega.is_finite() && omega > 0.0) {
                return Err(Error::Config(format!("harmonic omega must be positive, got {omega}")));
            }
        }
        Ok(())
    }

    /// Copy of `e` with the configured boundary worlds added to its pin mask.
    pub fn apply_pins(&self, e: &WorldEnsemble) -> WorldEnsemble {
        let mut out = e.clone();
        let n = out.len();
        for i in (0..self.pinned_left.min(n)).chain(n.saturating_sub(self.pinned_right)..n) {
            out.pinned[i] = true;
        }
        for (p, pinned) in out.momenta.iter_mut().zip(&out.pinned) {
            if *pinned {
                *p = 0.0;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub external: f64,
    pub interworld: f64,
    pub total: f64,
}

pub fn total_energy(e: &WorldEnsemble, cfg: &SimulationConfig, params: &PhysicalParams) -> Result<EnergyBreakdown> {
    e.validate().into_result()?;
    energy_of(&e.positions, &e.momenta, cfg, params)
}

fn energy_of(x: &[f64], p: &[f64], cfg: &SimulationConfig, params: &PhysicalParams) -> Result<EnergyBreakdown> {
    let kinetic = p.iter().map(|p| p * p).sum::<f64>() / (2.0 * params.mass);
    let external = x.iter().map(|&x| cfg.external_potential.energy(x, params)).sum::<f64>();
    let interworld = cfg.potential.energy(x, params)?;
    Ok(EnergyBreakdown { kinetic, external, interworld, total: kinetic + external + interworld })
}

/// Stepping state that carries the force at the current positions between steps.
pub struct Stepper<'a> {
    cfg: &'a SimulationConfig,
    params: &'a PhysicalParams,
    state: WorldEnsemble,
    force: Vec<f64>,
    steps_taken: u64,
}

impl<'a> Stepper<'a> {
    pub fn new(state: WorldEnsemble, cfg: &'a SimulationConfig, params: &'a PhysicalParams) -> Result<Self> {
        state.validate().into_result()?;
        let mut s = Self { cfg, params, force: vec![0.0; state.len()], state, steps_taken: 0 };
        s.refresh_force()?;
        Ok(s)
    }

    fn refresh_force(&mut self) -> Result<()> {
        let Self { cfg, params, state, force, .. } = self;
        cfg.potential.forces_into(&state.positions, params, force)?;
        for ((f, &x), &pinned) in force.iter_mut().zip(&state.positions).zip(&state.pinned) {
            *f = if pinned { 0.0 } else { *f + cfg.external_potential.force(x, params) };
        }
        Ok(())
    }

    pub fn state(&self) -> &WorldEnsemble {
        &self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Half kick, drift, half kick. On a collapse the state is left at the
    /// offending positions.
    pub fn step(&mut self) -> Result<()> {
        let half = 0.5 * self.cfg.dt;
        let inv_m = 1.0 / self.params.mass;
        let s = &mut self.state;
        for i in 0..s.len() {
            if s.pinned[i] {
                s.momenta[i] = 0.0;
                continue;
            }
            s.momenta[i] += half * self.force[i];
            s.positions[i] += self.cfg.dt * inv_m * s.momenta[i];
        }
        self.steps_taken += 1;
        if let Some(i) = first_disorder(&self.state.positions) {
            return Err(Error::Collapse { step: self.steps_taken, left: i + 1, right: i + 2 });
        }
        if let Some(i) = self.state.positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::Singularity { world: i + 1, reason: "position became non-finite".into() });
        }
        self.refresh_force().map_err(|e| self.annotate(e))?;
        let s = &mut self.state;
        for i in 0..s.len() {
            if !s.pinned[i] {
                s.momenta[i] += half * self.force[i];
            }
        }
        Ok(())
    }

    fn annotate(&self, e: Error) -> Error {
        match e {
            Error::Singularity { world, reason } => {
                Error::Singularity { world, reason: format!("{reason} (step {})", self.steps_taken) }
            }
            other => other,
        }
    }

    pub fn energy(&self) -> Result<EnergyBreakdown> {
        energy_of(&self.state.positions, &self.state.momenta, self.cfg, self.params)
    }

    pub fn into_state(self) -> WorldEnsemble {
        self.state
    }
}

/// One velocity-Verlet step from `e`.
pub fn step(e: &WorldEnsemble, cfg: &SimulationConfig, params: &PhysicalParams) -> Result<WorldEnsemble> {
    let mut s = Stepper::new(e.clone(), cfg, params)?;
    s.step()?;
    Ok(s.into_state())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<WorldEnsemble>,
    pub energies: Vec<EnergyBreakdown>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, step: u64, dt: f64, state: &WorldEnsemble, energy: EnergyBreakdown) {
        self.steps.push(step);
        self.times.push(step as f64 * dt);
        self.snapshots.push(state.clone());
        self.energies.push(energy);
    }

    /// Largest `|E(t) - E(0)| / |E(0)|` over the recorded snapshots.
    pub fn energy_drift(&self) -> f64 {
        let Some(first) = self.energies.first() else { return 0.0 };
        let e0 = first.total;
        self.energies.iter().map(|e| (e.total - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Why a run stopped.
#[derive(Debug)]
pub enum Termination {
    Completed,
    /// The observer asked to stop after this step.
    Stopped { step: u64 },
    /// Collapse or singularity; the trajectory holds everything before it.
    Failed(Error),
}

#[derive(Debug)]
pub struct RunResult {
    pub trajectory: TrajectoryRecord,
    pub termination: Termination,
    /// Final state reached (the offending state on failure).
    pub final_state: WorldEnsemble,
    pub steps_taken: u64,
}

/// Observer decision after each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub fn run(initial: &WorldEnsemble, cfg: &SimulationConfig, params: &PhysicalParams) -> Result<RunResult> {
    run_observed(initial, cfg, params, |_, _| Control::Continue)
}

/// Like [`run`], calling `observer(step, state)` after every step. Snapshots
/// are taken at step 0, every `record_every` steps, at the last step and at
/// the step where the observer stops the run.
pub fn run_observed(
    initial: &WorldEnsemble,
    cfg: &SimulationConfig,
    params: &PhysicalParams,
    mut observer: impl FnMut(u64, &WorldEnsemble) -> Control,
) -> Result<RunResult> {
    params.validate()?;
    cfg.validate(initial.len())?;
    let start = cfg.apply_pins(initial);
    let mut stepper = Stepper::new(start, cfg, params)?;
    let mut traj = TrajectoryRecord::default();
    traj.push(0, cfg.dt, stepper.state(), stepper.energy()?);

    let mut termination = Termination::Completed;
    for k in 1..=cfg.steps {
        if let Err(e) = stepper.step() {
            termination = Termination::Failed(e);
            break;
        }
        let stop = observer(k, stepper.state()) == Control::Stop;
        if k % cfg.record_every == 0 || k == cfg.steps || stop {
            match stepper.energy() {
                Ok(energy) => traj.push(k, cfg.dt, stepper.state(), energy),
                Err(e) => {
                    termination = Termination::Failed(e);
                    break;
                }
            }
        }
        if stop {
            termination = Termination::Stopped { step: k };
            break;
        }
    }
    let steps_taken = stepper.steps_taken();
    Ok(RunResult { trajectory: traj, termination, final_state: stepper.into_state(), steps_taken })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hm1() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 1.0).unwrap()
    }

    fn cfg(potential: PotentialSpec, ext: ExternalPotential, dt: f64, steps: u64) -> SimulationConfig {
        SimulationConfig::new(potential, ext, dt, steps)
    }

    #[test]
    fn energy_examples() {
        let single = WorldEnsemble::from_positions(vec![0.7]).unwrap();
        let c = cfg(PotentialSpec::toy(), ExternalPotential::None, 1e-3, 1);
        assert_eq!(total_energy(&single, &c, &hm1()).unwrap().total, 0.0);

        let three = WorldEnsemble::from_positions(vec![0.0, 1.0, 2.0]).unwrap();
        let e = total_energy(&three, &c, &hm1()).unwrap();
        assert!((e.total - 0.25).abs() < 1e-15);

        let c = cfg(PotentialSpec::toy(), ExternalPotential::Harmonic { omega: 2.0 * PI }, 1e-3, 1);
        let e = total_energy(&three, &c, &hm1()).unwrap();
        assert!((e.external - 0.5 * (2.0 * PI).powi(2) * 5.0).abs() < 1e-12);
        assert!((e.total - (0.25 + e.external)).abs() < 1e-12);
    }

    #[test]
    fn rest_without_forces_is_a_fixed_point() {
        let e = WorldEnsemble::from_positions(vec![-1.0]).unwrap();
        let c = cfg(PotentialSpec::toy(), ExternalPotential::None, 0.1, 1);
        assert_eq!(step(&e, &c, &hm1()).unwrap(), e);
    }

    #[test]
    fn free_classical_oscillator() {
        let omega = 2.0 * PI;
        let x0 = 0.8;
        let dt = 1e-4;
        let steps = 2500u64;
        let c = cfg(PotentialSpec::toy(), ExternalPotential::Harmonic { omega }, dt, steps);
        let r = run(&WorldEnsemble::from_positions(vec![x0]).unwrap(), &c, &hm1()).unwrap();
        assert!(matches!(r.termination, Termination::Completed));
        let t = steps as f64 * dt;
        let exact = x0 * (omega * t).cos();
        // Global error of velocity Verlet is O(dt^2).
        assert!((r.final_state.positions[0] - exact).abs() < 10.0 * (omega * dt).powi(2));
        assert_eq!(r.trajectory.len(), 2501);
    }

    #[test]
    fn reversible() {
        let params = PhysicalParams::dimensionless();
        let e = WorldEnsemble::from_positions(vec![-1.3, -0.5, 0.1, 0.6, 1.4]).unwrap();
        let c = cfg(PotentialSpec::toy(), ExternalPotential::Harmonic { omega: 2.0 * PI }, 1e-4, 200);
        let fwd = run(&e, &c, &params).unwrap().final_state;
        let mut flipped = fwd.clone();
        flipped.momenta.iter_mut().for_each(|p| *p = -*p);
        let back = run(&flipped, &c, &params).unwrap().final_state;
        for (a, b) in back.positions.iter().zip(&e.positions) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_run_records_both_ends() {
        let e = WorldEnsemble::from_positions(vec![0.0, 1.0, 2.0]).unwrap();
        let mut c = cfg(PotentialSpec::toy(), ExternalPotential::None, 1e-3, 1);
        c.record_every = 10;
        let r = run(&e, &c, &hm1()).unwrap();
        assert_eq!(r.trajectory.steps, vec![0, 1]);
    }

    #[test]
    fn pinned_worlds_never_move() {
        let e = WorldEnsemble::from_positions(vec![-2.0, -1.1, -0.3, 0.2, 0.9, 2.2]).unwrap();
        let mut c = cfg(PotentialSpec::toy(), ExternalPotential::Harmonic { omega: 3.0 }, 1e-3, 500);
        c.pinned_left = 2;
        c.pinned_right = 1;
        let r = run(&e, &c, &hm1()).unwrap();
        for snap in &r.trajectory.snapshots {
            for i in [0usize, 1, 5] {
                assert_eq!(snap.positions[i].to_bits(), e.positions[i].to_bits());
                assert_eq!(snap.momenta[i], 0.0);
            }
        }
        assert_ne!(r.final_state.positions[2], e.positions[2]);
    }

    #[test]
    fn config_validation() {
        let e = WorldEnsemble::from_positions(vec![0.0, 1.0, 2.0]).unwrap();
        let p = hm1();
        let bad = [
            cfg(PotentialSpec::toy(), ExternalPotential::None, 0.0, 1),
            cfg(PotentialSpec::toy(), ExternalPotential::None, 1e-3, 0),
        ];
        for c in &bad {
            assert!(matches!(run(&e, c, &p), Err(Error::Config(_))));
        }
        let mut c = cfg(PotentialSpec::toy(), ExternalPotential::None, 1e-3, 1);
        c.pinned_left = 2;
        c.pinned_right = 1;
        assert!(matches!(run(&e, &c, &p), Err(Error::Config(_))));
    }

    #[test]
    fn crossing_is_reported_as_collapse() {
        let e = WorldEnsemble::new(vec![0.0, 1.0], vec![100.0, -100.0], vec![false, false]).unwrap();
        let c = cfg(PotentialSpec::toy(), ExternalPotential::None, 0.1, 10);
        let r = run(&e, &c, &PhysicalParams::new(1.0, 1e-3, 1.0).unwrap()).unwrap();
        match r.termination {
            Termination::Failed(Error::Collapse { step: 1, left: 1, right: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(r.trajectory.len(), 1);
    }

    #[test]
    fn deterministic() {
        let params = PhysicalParams::dimensionless();
        let e = crate::density::DensityModel::ground().sample_worlds(20).unwrap();
        let c = cfg(PotentialSpec::rational(4, Default::default()).unwrap(), ExternalPotential::Harmonic { omega: 2.0 * PI }, 1e-5, 300);
        let a = run(&e, &c, &params).unwrap();
        let b = run(&e, &c, &params).unwrap();
        for (x, y) in a.trajectory.snapshots.iter().zip(&b.trajectory.snapshots) {
            assert!(x.positions.iter().zip(&y.positions).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}
