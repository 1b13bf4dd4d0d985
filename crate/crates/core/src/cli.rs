//! Command-line front end: argument parsing, run configuration files and the
//! CSV/JSON artifacts written by `miw`.
//!
//! All numeric CSV fields use `{:.16e}` (17 significant digits) so outputs are
//! byte-identical across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, DensityModel};
use crate::error::{Error, Result};
use crate::potential::{EdgePolicy, PotentialKind, PotentialSpec};
use crate::scenarios::{run_setup, Outcome, ScenarioName, ScenarioOverrides, ScenarioReport, ScenarioSetup};
use crate::stencil::{build_stencil, OffsetSet};
use crate::units::{from_dimensionless, from_dimensionless_time, momentum_from_dimensionless, PhysicalParams};

#[derive(Debug, Parser)]
#[command(name = "miw", version, about = "Many-interacting-worlds simulation of a 1D quantum particle")]
pub struct Cli {
    /// Directory for output files (overrides the config file).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Time step in oscillator periods.
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    #[arg(long, global = true)]
    pub steps: Option<u64>,

    /// Run scenarios over a full oscillator period.
    #[arg(long, global = true)]
    pub full: bool,

    #[command(flatten)]
    pub units: UnitArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Positions, times and momenta in sample and trajectory files are written
/// in physical units when `--physical` is given.
#[derive(Debug, Args)]
pub struct UnitArgs {
    #[arg(long, global = true)]
    pub physical: bool,

    #[arg(long, global = true, default_value_t = 1.0)]
    pub mass: f64,

    #[arg(long, global = true, default_value_t = 1.0)]
    pub hbar: f64,

    #[arg(long, global = true, default_value_t = 1.0)]
    pub omega: f64,
}

impl UnitArgs {
    fn output_units(&self) -> Result<Option<PhysicalParams>> {
        if self.physical {
            PhysicalParams::new(self.mass, self.hbar, self.omega).map(Some)
        } else {
            Ok(None)
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the stencil coefficient table for order L.
    Coeffs {
        #[arg(short = 'L', long = "L")]
        order: usize,
        /// Comma-separated neighbour offsets, e.g. -2,-1,1,2.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        offsets: Option<Vec<i64>>,
    },
    /// Write equal-area sampled world positions.
    Sample {
        /// `ground` or `excited`.
        model: DensityKind,
        worlds: usize,
        /// Output file (default `<out-dir>/sample_<model>_<N>.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario described by a TOML config file.
    Run { config: PathBuf },
    /// Compare interworld forces on the initial ensemble with the stationary-state force.
    Forces { config: PathBuf },
    /// Run a named scenario with default settings.
    Scenario { name: ScenarioName },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialName {
    Toy,
    Rational,
    Equivariance,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
    /// Initial ensemble for `forces`, in place of a scenario's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_policy: Option<EdgePolicy>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_right: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<OutputFormat>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub density: DensityKind,
    pub worlds: usize,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn formats(&self) -> Vec<OutputFormat> {
        self.output
            .as_ref()
            .and_then(|o| o.formats.clone())
            .unwrap_or_else(|| vec![OutputFormat::Csv, OutputFormat::Json])
    }

    fn potential_spec(&self) -> Result<Option<PotentialSpec>> {
        self.potential.as_ref().map(PotentialSection::to_spec).transpose()
    }

    /// Scenario overrides from the file, with command-line flags taking precedence.
    pub fn overrides(&self, dt: Option<f64>, steps: Option<u64>, full: bool) -> Result<ScenarioOverrides> {
        let integration = self.integration.clone().unwrap_or_default();
        let scenario = self.scenario.as_ref();
        Ok(ScenarioOverrides {
            dt: dt.or(integration.dt),
            steps: steps.or(integration.steps),
            horizon: scenario.and_then(|s| s.horizon),
            record_every: integration.record_every,
            potential: self.potential_spec()?,
            pinned_left: integration.pinned_left,
            pinned_right: integration.pinned_right,
            full: full || scenario.and_then(|s| s.full).unwrap_or(false),
        })
    }
}

impl PotentialSection {
    pub fn to_spec(&self) -> Result<PotentialSpec> {
        let policy = self.edge_policy.unwrap_or_default();
        match self.kind {
            PotentialName::Toy => Ok(PotentialSpec::toy()),
            PotentialName::Equivariance => Ok(PotentialSpec::equivariance(policy)),
            PotentialName::Rational => {
                let order = self
                    .order
                    .ok_or_else(|| Error::Config("rational potential needs `order`".into()))?;
                match &self.offsets {
                    None => PotentialSpec::rational(order, policy),
                    Some(c) => PotentialSpec::rational_with(build_stencil(&OffsetSet::new(c.clone())?, order)?, policy),
                }
            }
        }
    }

    pub fn from_spec(spec: &PotentialSpec) -> Self {
        let (kind, order, offsets) = match &spec.kind {
            PotentialKind::Toy => (PotentialName::Toy, None, None),
            PotentialKind::Equivariance(_) => (PotentialName::Equivariance, None, None),
            PotentialKind::RationalSmoothing(r) => {
                let s = r.stencil();
                (PotentialName::Rational, Some(s.order()), Some(s.offsets().as_slice().to_vec()))
            }
        };
        Self { kind, order, offsets, edge_policy: Some(spec.edge_policy) }
    }
}

/// Stable summary written as `summary.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: ScenarioName,
    pub outcome: Outcome,
    pub gap_width_initial: Option<f64>,
    pub gap_width_final: Option<f64>,
    pub amplitude_max: f64,
    pub energy_drift_rel: f64,
    pub collapse_time: Option<f64>,
    pub steps_taken: u64,
    /// 1-based indices of the free worlds.
    pub free_worlds: Vec<usize>,
    pub amplitudes: Vec<f64>,
    pub abort_reason: Option<String>,
    pub metrics: std::collections::BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn from_report(r: &ScenarioReport) -> Self {
        Self {
            scenario: r.name,
            outcome: r.outcome,
            gap_width_initial: r.metric("gap_width_initial"),
            gap_width_final: r.metric("gap_width_final"),
            amplitude_max: r.metric("amplitude_max").unwrap_or(0.0),
            energy_drift_rel: r.metric("energy_drift_rel").unwrap_or(0.0),
            collapse_time: r.metric("collapse_time"),
            steps_taken: r.metric("steps_taken").unwrap_or(0.0) as u64,
            free_worlds: r.setup.free_worlds().into_iter().map(|i| i + 1).collect(),
            amplitudes: r.free_amplitudes(),
            abort_reason: r.abort_reason.clone(),
            metrics: r.metrics.clone(),
        }
    }
}

/// Echo of the configuration a report actually ran with.
pub fn resolved_config(report: &ScenarioReport, out_dir: &Path, formats: &[OutputFormat]) -> RunConfigFile {
    let cfg = &report.setup.config;
    RunConfigFile {
        scenario: Some(ScenarioSection { name: report.name, horizon: None, full: None }),
        potential: Some(PotentialSection::from_spec(&cfg.potential)),
        integration: Some(IntegrationSection {
            dt: Some(cfg.dt),
            steps: Some(cfg.steps),
            record_every: Some(cfg.record_every),
            pinned_left: Some(cfg.pinned_left),
            pinned_right: Some(cfg.pinned_right),
        }),
        output: Some(OutputSection { directory: Some(out_dir.to_path_buf()), formats: Some(formats.to_vec()) }),
        ensemble: None,
    }
}

pub fn trajectory_csv(report: &ScenarioReport, units: Option<&PhysicalParams>) -> String {
    let mut s = String::from("step,T,world_index,position,momentum,pinned\n");
    let traj = &report.trajectory;
    for ((step, t), snap) in traj.steps.iter().zip(&traj.times).zip(&traj.snapshots) {
        let t = units.map_or(*t, |u| from_dimensionless_time(*t, u));
        for (i, ((x, p), pinned)) in snap.positions.iter().zip(&snap.momenta).zip(&snap.pinned).enumerate() {
            let (x, p) = match units {
                Some(u) => (from_dimensionless(*x, u), momentum_from_dimensionless(*p, u)),
                None => (*x, *p),
            };
            let _ = writeln!(s, "{step},{t:.16e},{},{x:.16e},{p:.16e},{}", i + 1, u8::from(*pinned));
        }
    }
    s
}

pub fn energy_csv(report: &ScenarioReport, units: Option<&PhysicalParams>) -> String {
    let mut s = String::from("step,T,kinetic,external,interworld,total\n");
    let traj = &report.trajectory;
    for ((step, t), e) in traj.steps.iter().zip(&traj.times).zip(&traj.energies) {
        let t = units.map_or(*t, |u| from_dimensionless_time(*t, u));
        let _ = writeln!(
            s,
            "{step},{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.kinetic, e.external, e.interworld, e.total
        );
    }
    s
}

pub fn sample_csv(positions: &[f64], units: Option<&PhysicalParams>) -> String {
    let mut s = String::from("index,position_dimensionless\n");
    for (i, x) in positions.iter().enumerate() {
        let x = units.map_or(*x, |u| from_dimensionless(*x, u));
        let _ = writeln!(s, "{},{x:.16e}", i + 1);
    }
    s
}

/// Per-world comparison of the interworld force with `+m omega^2 x`.
///
/// The trailing `flag` column marks worlds within the force reach of either
/// end (`boundary`) and the two worlds next to an excited-state node
/// (`near_node`). Values are dimensionless.
pub fn forces_csv(density: &DensityModel, positions: &[f64], spec: &PotentialSpec) -> Result<String> {
    let params = PhysicalParams::dimensionless();
    let forces = spec.forces(positions, &params)?;
    let n = positions.len();
    let reach = spec.force_reach();
    let mut s = String::from("world_index,position,interworld_force,oracle_force,relative_error,flag\n");
    for (i, (x, f)) in positions.iter().zip(&forces).enumerate() {
        let oracle = params.mass * params.omega * params.omega * x;
        let rel = (f - oracle).abs() / oracle.abs();
        let flag = if i < reach || i + reach >= n {
            "boundary"
        } else if density.kind == DensityKind::HarmonicFirstExcited && n.is_multiple_of(2) && (i + 1 == n / 2 || i == n / 2) {
            "near_node"
        } else {
            ""
        };
        let _ = writeln!(s, "{},{x:.16e},{f:.16e},{oracle:.16e},{rel:.16e},{flag}", i + 1);
    }
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes every artifact of a finished scenario into `dir`.
pub fn write_report(
    report: &ScenarioReport,
    dir: &Path,
    formats: &[OutputFormat],
    units: Option<&PhysicalParams>,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &body)?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&OutputFormat::Csv) {
        emit("trajectory.csv", trajectory_csv(report, units))?;
        emit("energy.csv", energy_csv(report, units))?;
    }
    if formats.contains(&OutputFormat::Json) {
        let summary = serde_json::to_string_pretty(&RunSummary::from_report(report))
            .map_err(|e| Error::Config(e.to_string()))?;
        emit("summary.json", summary + "\n")?;
    }
    emit("config.resolved.toml", resolved_config(report, dir, formats).to_toml()?)?;
    Ok(written)
}

fn resolve_dir(cli: Option<&PathBuf>, file: &RunConfigFile) -> PathBuf {
    cli.cloned()
        .or_else(|| file.output.as_ref().and_then(|o| o.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run_file(cli: &Cli, file: &RunConfigFile) -> Result<ScenarioReport> {
    let name = file
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [scenario] section".into()))?
        .name;
    let overrides = file.overrides(cli.dt, cli.steps, cli.full)?;
    let report = run_setup(ScenarioSetup::new(name, &overrides)?)?;
    let dir = resolve_dir(cli.out_dir.as_ref(), file);
    let units = cli.units.output_units()?;
    for path in write_report(&report, &dir, &file.formats(), units.as_ref())? {
        log::info!("wrote {}", path.display());
    }
    println!("{}: {}", report.name, report.outcome);
    if report.outcome == Outcome::Aborted {
        return Err(Error::Config(format!(
            "{} aborted: {}",
            report.name,
            report.abort_reason.as_deref().unwrap_or("unknown error")
        )));
    }
    Ok(report)
}

fn forces_file(cli: &Cli, file: &RunConfigFile) -> Result<PathBuf> {
    let (density, positions, default_potential) = match (&file.ensemble, &file.scenario) {
        (Some(e), _) => {
            let model = DensityModel::new(e.density, PhysicalParams::dimensionless());
            (model, model.sample_worlds(e.worlds)?.positions, PotentialSpec::toy())
        }
        (None, Some(s)) => {
            let setup = ScenarioSetup::new(s.name, &ScenarioOverrides::default())?;
            (setup.density, setup.initial.positions, setup.config.potential)
        }
        (None, None) => return Err(Error::Config("forces needs an [ensemble] or [scenario] section".into())),
    };
    let spec = file.potential_spec()?.unwrap_or(default_potential);
    let path = resolve_dir(cli.out_dir.as_ref(), file).join("forces.csv");
    write_file(&path, &forces_csv(&density, &positions, &spec)?)?;
    Ok(path)
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Coeffs { order, offsets } => {
            let set = match offsets {
                Some(c) => OffsetSet::new(c.clone())?,
                None => OffsetSet::symmetric_for_order(*order)?,
            };
            print!("{}", build_stencil(&set, *order)?);
        }
        Command::Sample { model, worlds, out } => {
            let positions = DensityModel::new(*model, PhysicalParams::dimensionless()).sample_worlds(*worlds)?.positions;
            let path = out.clone().unwrap_or_else(|| {
                cli.out_dir.clone().unwrap_or_default().join(format!("sample_{model}_{worlds}.csv"))
            });
            write_file(&path, &sample_csv(&positions, cli.units.output_units()?.as_ref()))?;
            println!("{}", path.display());
        }
        Command::Run { config } => {
            run_file(cli, &RunConfigFile::load(config)?)?;
        }
        Command::Forces { config } => {
            println!("{}", forces_file(cli, &RunConfigFile::load(config)?)?.display());
        }
        Command::Scenario { name } => {
            let file = RunConfigFile {
                scenario: Some(ScenarioSection { name: *name, horizon: None, full: None }),
                ..Default::default()
            };
            run_file(cli, &file)?;
        }
    }
    Ok(())
}
