//! Named harmonic-oscillator experiments and their diagnostics.
//!
//! Every scenario samples an eigenstate density, optionally cuts out a window
//! of worlds around the node, pins the worlds outside the free region and
//! evolves the ensemble inside the external harmonic well. Node scenarios are
//! stopped as soon as the node gap collapses.
//!
//! Windows keep at least `force_reach` pinned worlds on each side of the free
//! region, so free worlds feel exactly the force they would in the untruncated
//! ensemble with the same pins.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::ensemble::WorldEnsemble;
use crate::error::{Error, Result};
use crate::integrator::{run_observed, Control, ExternalPotential, SimulationConfig, Termination, TrajectoryRecord};
use crate::potential::{EdgePolicy, PotentialSpec};
use crate::units::PhysicalParams;

/// Gap fraction of its initial value below which the node counts as collapsed.
pub const COLLAPSE_GAP_FRACTION: f64 = 0.1;

/// Amplitude, as a fraction of the smaller adjacent initial spacing, up to
/// which a free world counts as stationary.
pub const STATIONARY_FRACTION: f64 = 0.2;

const SAMPLE_COUNT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Fig1GroundToy,
    Fig2ExcitedToy,
    Fig3TruncatedToy,
    #[serde(rename = "fig4_two_free_L4")]
    Fig4TwoFreeL4,
    #[serde(rename = "fig5_ten_free_L4")]
    Fig5TenFreeL4,
    #[serde(rename = "fig6_ten_free_L6")]
    Fig6TenFreeL6,
    #[serde(rename = "figA1_two_free_equiv")]
    FigA1TwoFreeEquiv,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Fig1GroundToy,
        ScenarioName::Fig2ExcitedToy,
        ScenarioName::Fig3TruncatedToy,
        ScenarioName::Fig4TwoFreeL4,
        ScenarioName::Fig5TenFreeL4,
        ScenarioName::Fig6TenFreeL6,
        ScenarioName::FigA1TwoFreeEquiv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Fig1GroundToy => "fig1_ground_toy",
            ScenarioName::Fig2ExcitedToy => "fig2_excited_toy",
            ScenarioName::Fig3TruncatedToy => "fig3_truncated_toy",
            ScenarioName::Fig4TwoFreeL4 => "fig4_two_free_L4",
            ScenarioName::Fig5TenFreeL4 => "fig5_ten_free_L4",
            ScenarioName::Fig6TenFreeL6 => "fig6_ten_free_L6",
            ScenarioName::FigA1TwoFreeEquiv => "figA1_two_free_equiv",
        }
    }

    /// Whether the sampled state has a node at `x = 0`.
    pub fn has_node(&self) -> bool {
        !matches!(self, ScenarioName::Fig1GroundToy)
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Partial configuration applied on top of a scenario's defaults.
#[derive(Clone, Debug, Default)]
pub struct ScenarioOverrides {
    pub dt: Option<f64>,
    /// Step count; takes precedence over the horizon.
    pub steps: Option<u64>,
    /// Simulated time in periods.
    pub horizon: Option<f64>,
    pub record_every: Option<u64>,
    pub potential: Option<PotentialSpec>,
    pub pinned_left: Option<usize>,
    pub pinned_right: Option<usize>,
    /// Use the one-period horizon instead of the desk-scale default.
    pub full: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Stationary,
    Oscillatory,
    NodeCollapse,
    Aborted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Stationary => "Stationary",
            Outcome::Oscillatory => "Oscillatory",
            Outcome::NodeCollapse => "NodeCollapse",
            Outcome::Aborted => "Aborted",
        })
    }
}

/// Fully resolved scenario: the ensemble that is evolved and how.
#[derive(Clone, Debug)]
pub struct ScenarioSetup {
    pub name: ScenarioName,
    pub density: DensityModel,
    /// Worlds sampled before any windowing.
    pub sampled_worlds: usize,
    /// 0-based index of the first sampled world kept.
    pub window_start: usize,
    pub initial: WorldEnsemble,
    pub config: SimulationConfig,
    pub params: PhysicalParams,
}

impl ScenarioSetup {
    pub fn new(name: ScenarioName, overrides: &ScenarioOverrides) -> Result<Self> {
        let params = PhysicalParams::dimensionless();
        let skip = EdgePolicy::SkipBoundaryTerms;
        // (density, sampled, free worlds or None for the whole ensemble, potential, dt, desk horizon, pins)
        let (density, sampled, free, default_potential, default_dt, desk_horizon, default_pins) = match name {
            ScenarioName::Fig1GroundToy => (DensityModel::ground(), 50, None, PotentialSpec::toy(), 1e-5, 1.0, 0),
            ScenarioName::Fig2ExcitedToy => (DensityModel::excited(), 40, None, PotentialSpec::toy(), 1e-6, 0.25, 0),
            ScenarioName::Fig3TruncatedToy => {
                (DensityModel::excited(), SAMPLE_COUNT, Some(10), PotentialSpec::toy(), 1e-8, 0.1, 5)
            }
            ScenarioName::Fig4TwoFreeL4 => {
                (DensityModel::excited(), SAMPLE_COUNT, Some(2), PotentialSpec::rational(4, skip)?, 1e-9, 0.01, 0)
            }
            ScenarioName::Fig5TenFreeL4 => {
                (DensityModel::excited(), SAMPLE_COUNT, Some(10), PotentialSpec::rational(4, skip)?, 1e-9, 0.01, 0)
            }
            ScenarioName::Fig6TenFreeL6 => {
                (DensityModel::excited(), SAMPLE_COUNT, Some(10), PotentialSpec::rational(6, skip)?, 1e-9, 0.01, 0)
            }
            ScenarioName::FigA1TwoFreeEquiv => {
                (DensityModel::excited(), SAMPLE_COUNT, Some(2), PotentialSpec::equivariance(skip), 1e-9, 0.01, 0)
            }
        };
        let potential = overrides.potential.clone().unwrap_or(default_potential);
        let dt = overrides.dt.unwrap_or(default_dt);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let horizon = match (overrides.horizon, overrides.full) {
            (Some(h), _) => h,
            (None, true) => 1.0,
            (None, false) => desk_horizon,
        };
        let steps = match overrides.steps {
            Some(s) => s,
            None => {
                if !(horizon.is_finite() && horizon > 0.0) {
                    return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
                }
                (horizon / dt).round().max(1.0) as u64
            }
        };

        let all = density.sample_worlds(sampled)?;
        let (initial, window_start, pinned_left, pinned_right) = match free {
            None => (all, 0, overrides.pinned_left.unwrap_or(default_pins), overrides.pinned_right.unwrap_or(default_pins)),
            Some(free) => {
                let margin = default_pins.max(potential.force_reach());
                let left = overrides.pinned_left.unwrap_or(margin);
                let right = overrides.pinned_right.unwrap_or(margin);
                let len = left + free + right;
                if len > sampled {
                    return Err(Error::Config(format!("window of {len} worlds exceeds the {sampled} sampled")));
                }
                let start = sampled / 2 - free / 2 - left;
                (all.window(start, len), start, left, right)
            }
        };

        let mut config = SimulationConfig::new(potential, ExternalPotential::Harmonic { omega: params.omega }, dt, steps);
        config.pinned_left = pinned_left;
        config.pinned_right = pinned_right;
        config.record_every = overrides.record_every.unwrap_or((steps / 1000).max(1));
        config.validate(initial.len())?;
        Ok(Self { name, density, sampled_worlds: sampled, window_start, initial, config, params })
    }

    /// 0-based indices of the worlds left free by the pins.
    pub fn free_worlds(&self) -> Vec<usize> {
        let n = self.initial.len();
        (self.config.pinned_left..n - self.config.pinned_right).collect()
    }
}

#[derive(Debug)]
pub struct ScenarioReport {
    pub name: ScenarioName,
    pub setup: ScenarioSetup,
    pub trajectory: TrajectoryRecord,
    pub metrics: BTreeMap<String, f64>,
    pub outcome: Outcome,
    /// Per-world `max |x(t) - x(0)|`, tracked at every step.
    pub amplitudes: Vec<f64>,
    /// Step at which the node was declared collapsed.
    pub collapse_step: Option<u64>,
    /// Error that ended the run early, other than an ordering collapse.
    pub abort_reason: Option<String>,
}

impl ScenarioReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// Amplitudes of the free worlds, in index order.
    pub fn free_amplitudes(&self) -> Vec<f64> {
        self.setup.free_worlds().into_iter().map(|i| self.amplitudes[i]).collect()
    }
}

/// Distance between the two worlds adjacent to the node, `x_{N/2+1} - x_{N/2}`.
pub fn node_gap_width(e: &WorldEnsemble) -> Result<f64> {
    let n = e.len();
    if n < 2 || n % 2 == 1 {
        return Err(Error::Domain(format!("node gap needs an even, nonzero world count, got {n}")));
    }
    let (left, right) = (e.positions[n / 2 - 1], e.positions[n / 2]);
    if !(left < 0.0 && right > 0.0) {
        return Err(Error::Domain(format!(
            "worlds {} and {} at {left} and {right} do not straddle the node",
            n / 2,
            n / 2 + 1
        )));
    }
    Ok(right - left)
}

/// Largest displacement of `world` (0-based) from its first recorded position.
pub fn oscillation_amplitude(traj: &TrajectoryRecord, world: usize) -> f64 {
    let Some(first) = traj.snapshots.first() else { return 0.0 };
    let x0 = first.positions[world];
    traj.snapshots.iter().map(|s| (s.positions[world] - x0).abs()).fold(0.0, f64::max)
}

pub fn run_scenario(name: ScenarioName, overrides: &ScenarioOverrides) -> Result<ScenarioReport> {
    run_setup(ScenarioSetup::new(name, overrides)?)
}

pub fn run_named(name: &str, overrides: &ScenarioOverrides) -> Result<ScenarioReport> {
    run_scenario(name.parse()?, overrides)
}

pub fn run_setup(setup: ScenarioSetup) -> Result<ScenarioReport> {
    let n = setup.initial.len();
    let x0 = setup.initial.positions.clone();
    let has_node = setup.name.has_node();
    let gap0 = if has_node { Some(node_gap_width(&setup.initial)?) } else { None };
    let mut gap_min = gap0.unwrap_or(f64::NAN);
    let mut gap_collapse = None;
    let mut amplitudes = vec![0.0; n];

    let result = run_observed(&setup.initial, &setup.config, &setup.params, |step, state| {
        for ((a, x), x0) in amplitudes.iter_mut().zip(&state.positions).zip(&x0) {
            *a = f64::max(*a, (x - x0).abs());
        }
        if let Some(g0) = gap0 {
            let g = state.positions[n / 2] - state.positions[n / 2 - 1];
            gap_min = gap_min.min(g);
            if g < COLLAPSE_GAP_FRACTION * g0 {
                gap_collapse = Some(step);
                return Control::Stop;
            }
        }
        Control::Continue
    })?;

    let (mut collapse_step, mut abort_reason) = (gap_collapse, None);
    match &result.termination {
        Termination::Failed(Error::Collapse { step, .. }) => collapse_step = Some(*step),
        Termination::Failed(e) => abort_reason = Some(e.to_string()),
        Termination::Completed | Termination::Stopped { .. } => {}
    }

    let dt = setup.config.dt;
    let traj = result.trajectory;
    let mut metrics = BTreeMap::new();
    metrics.insert("steps_taken".to_string(), result.steps_taken as f64);
    metrics.insert("time_final".to_string(), result.steps_taken as f64 * dt);
    metrics.insert("energy_drift_rel".to_string(), traj.energy_drift());
    let free = setup.free_worlds();
    let amplitude_max = free.iter().map(|&i| amplitudes[i]).fold(0.0, f64::max);
    metrics.insert("amplitude_max".to_string(), amplitude_max);
    if let Some(g0) = gap0 {
        metrics.insert("gap_width_initial".to_string(), g0);
        let last = traj.snapshots.last().map(|s| s.positions[n / 2] - s.positions[n / 2 - 1]).unwrap_or(g0);
        metrics.insert("gap_width_final".to_string(), last);
        metrics.insert("gap_width_min".to_string(), gap_min.min(last));
        metrics.insert("amplitude_max_rel_gap".to_string(), amplitude_max / g0);
    }
    if let Some(step) = collapse_step {
        metrics.insert("collapse_time".to_string(), step as f64 * dt);
    }
    let spacing_ratio = free
        .iter()
        .map(|&i| amplitudes[i] / local_spacing(&x0, i))
        .fold(0.0, f64::max);
    metrics.insert("displacement_max_rel_spacing".to_string(), spacing_ratio);

    let outcome = if collapse_step.is_some() {
        Outcome::NodeCollapse
    } else if abort_reason.is_some() {
        Outcome::Aborted
    } else if spacing_ratio <= STATIONARY_FRACTION {
        Outcome::Stationary
    } else {
        Outcome::Oscillatory
    };

    Ok(ScenarioReport {
        name: setup.name,
        setup,
        trajectory: traj,
        metrics,
        outcome,
        amplitudes,
        collapse_step,
        abort_reason,
    })
}

/// Smaller of the two initial gaps adjacent to world `i`.
pub fn local_spacing(x: &[f64], i: usize) -> f64 {
    let left = if i > 0 { x[i] - x[i - 1] } else { f64::INFINITY };
    let right = if i + 1 < x.len() { x[i + 1] - x[i] } else { f64::INFINITY };
    left.min(right)
}
