//! Run configuration: a versioned JSON document, parsed strictly and then
//! checked for semantic consistency.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use sma_hybrid::benchmark::BenchmarkConfig;
use sma_hybrid::calibration::{FitSpec, StrainProfile};
use sma_hybrid::mas::LinearBarrier;
use sma_hybrid::output::Format;
use sma_hybrid::scenario::{RandomSteps, RobotSetup, Variant};
use sma_hybrid::solver::{Horizon, Signal, SolverOptions};
use sma_hybrid::structure::{BeamParams, Pretension};
use sma_hybrid::MaterialParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Model simulated by `simulate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    Hybrid,
    Mas,
    CoupledHybrid,
    CoupledMas,
}

impl ModelVariant {
    pub fn is_coupled(self) -> bool {
        matches!(self, ModelVariant::CoupledHybrid | ModelVariant::CoupledMas)
    }

    pub fn wire(self) -> Variant {
        match self {
            ModelVariant::Hybrid | ModelVariant::CoupledHybrid => Variant::Hybrid,
            ModelVariant::Mas | ModelVariant::CoupledMas => Variant::Mas,
        }
    }

    pub fn with_wire(self, wire: Variant) -> Self {
        match (self.is_coupled(), wire) {
            (false, Variant::Hybrid) => ModelVariant::Hybrid,
            (false, Variant::Mas) => ModelVariant::Mas,
            (true, Variant::Hybrid) => ModelVariant::CoupledHybrid,
            (true, Variant::Mas) => ModelVariant::CoupledMas,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::Hybrid => "hybrid",
            ModelVariant::Mas => "mas",
            ModelVariant::CoupledHybrid => "coupled-hybrid",
            ModelVariant::CoupledMas => "coupled-mas",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSpec {
    pub variant: ModelVariant,
    pub horizon: Horizon,
    /// Equivalent heating command of the coupled robot [W]. When absent a
    /// random step sequence is drawn from `random_steps` and `seed`.
    pub j_eq: Option<Signal>,
    pub random_steps: RandomSteps,
    pub seed: u64,
    /// Single wire: end velocity [m/s] and Joule heating [W].
    pub velocity: Signal,
    pub joule: Signal,
    /// Single wire: initial strain; the wire starts in austenite at ambient.
    pub initial_strain: f64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            variant: ModelVariant::CoupledHybrid,
            horizon: Horizon::new(100.0),
            j_eq: None,
            random_steps: RandomSteps::default(),
            seed: 1,
            velocity: Signal::constant(0.0),
            joule: Signal::constant(0.0),
            initial_strain: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsothermSpec {
    pub variant: Variant,
    /// Ambient temperatures of the sweeps [K].
    pub temperatures: Vec<f64>,
    pub profile: StrainProfile,
}

impl Default for IsothermSpec {
    fn default() -> Self {
        Self {
            variant: Variant::Hybrid,
            temperatures: vec![315.0],
            profile: StrainProfile::default(),
        }
    }
}

/// Measured isotherm: CSV with columns `eps,sigma_Pa,branch`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub path: PathBuf,
    pub ambient: f64,
}

/// Data generated from the configured material; the initial guess is the
/// material with each free parameter scaled by `1 ± perturbation`, signs
/// drawn from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub temperatures: Vec<f64>,
    pub points_per_branch: usize,
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            temperatures: vec![292.0, 315.0, 338.0],
            points_per_branch: 60,
            perturbation: 0.2,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSpec {
    pub data: Vec<CurveFile>,
    pub synthetic: Option<SyntheticSpec>,
    /// Initial guess; defaults to the configured material.
    pub guess: Option<MaterialParams>,
    pub fit: FitSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub format: Format,
}

fn default_ambient() -> f64 {
    298.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    /// Parameter file, resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material_path: Option<PathBuf>,
    /// Inline parameters; the bundled set when neither this nor
    /// `material_path` is given.
    #[serde(default)]
    pub material: Option<MaterialParams>,
    #[serde(default)]
    pub beam: BeamParams,
    #[serde(default)]
    pub pretension: Pretension,
    #[serde(default)]
    pub barrier: LinearBarrier,
    #[serde(default = "default_ambient")]
    pub ambient: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub isotherm: IsothermSpec,
    #[serde(default)]
    pub calibrate: CalibrateSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            material_path: None,
            material: None,
            beam: BeamParams::default(),
            pretension: Pretension::default(),
            barrier: LinearBarrier::default(),
            ambient: default_ambient(),
            solver: SolverOptions::default(),
            output: OutputSpec::default(),
            simulate: SimulateSpec::default(),
            benchmark: BenchmarkConfig::default(),
            isotherm: IsothermSpec::default(),
            calibrate: CalibrateSpec::default(),
        }
    }
}

/// Parses a config document, naming the offending field and position on error.
pub fn parse(text: &str, origin: &str) -> anyhow::Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let msg = inner.to_string();
        let msg = msg
            .strip_suffix(&format!(" at line {line} column {column}"))
            .unwrap_or(&msg);
        anyhow::anyhow!("{origin}: line {line}, column {column}: field `{path}`: {msg}")
    })?;
    Ok(config)
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = parse(&text, &path.display().to_string())?;
        config.resolve(path.parent().unwrap_or(Path::new(".")))?;
        Ok(config)
    }

    /// Loads referenced files so the config is self-contained.
    pub fn resolve(&mut self, base: &Path) -> anyhow::Result<()> {
        if let Some(rel) = self.material_path.take() {
            if self.material.is_some() {
                bail!("`material` and `material_path` are mutually exclusive");
            }
            let path = base.join(rel);
            let p = MaterialParams::from_json_file(&path)
                .with_context(|| format!("parameter file {}", path.display()))?;
            self.material = Some(p);
        }
        for curve in &mut self.calibrate.data {
            curve.path = base.join(&curve.path);
        }
        Ok(())
    }

    pub fn material(&self) -> MaterialParams {
        self.material.clone().unwrap_or_else(MaterialParams::cuznal)
    }

    pub fn robot(&self) -> RobotSetup {
        RobotSetup {
            material: self.material(),
            beam: self.beam.clone(),
            pretension: self.pretension.clone(),
            barrier: self.barrier,
            ambient: self.ambient,
            solver: self.solver.clone(),
        }
    }

    /// Semantic checks that the schema cannot express.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if !(self.ambient > 0.0 && self.ambient.is_finite()) {
            bail!("ambient: must be a positive temperature, got {}", self.ambient);
        }
        if !(self.barrier.c_g > 0.0 && self.barrier.c_g.is_finite()) {
            bail!("barrier.c_g: must be positive, got {}", self.barrier.c_g);
        }
        self.beam.validate().context("beam")?;
        let s = &self.solver;
        if !(s.rel_tol > 0.0 && s.abs_tol_scale > 0.0 && s.initial_step > 0.0 && s.min_step > 0.0) {
            bail!("solver: tolerances and step sizes must be positive");
        }
        let sim = &self.simulate;
        if !(sim.horizon.t_end > 0.0 && sim.horizon.t_end.is_finite()) {
            bail!("simulate.horizon.t_end: must be positive, got {}", sim.horizon.t_end);
        }
        if let Some(j) = &sim.j_eq {
            j.validate().context("simulate.j_eq")?;
        }
        sim.random_steps.validate().context("simulate.random_steps")?;
        sim.velocity.validate().context("simulate.velocity")?;
        sim.joule.validate().context("simulate.joule")?;
        let b = &self.benchmark;
        if b.scenarios == 0 {
            bail!("benchmark.scenarios: must be at least 1");
        }
        if b.repetitions == 0 {
            bail!("benchmark.repetitions: must be at least 1");
        }
        if b.grid_intervals == 0 {
            bail!("benchmark.grid_intervals: must be at least 1");
        }
        b.steps.validate().context("benchmark.steps")?;
        let iso = &self.isotherm;
        if iso.temperatures.is_empty() || iso.temperatures.iter().any(|t| !(*t > 0.0)) {
            bail!("isotherm.temperatures: need at least one positive temperature");
        }
        let c = &self.calibrate;
        if let Some(syn) = &c.synthetic {
            if syn.temperatures.is_empty() || syn.points_per_branch < 2 {
                bail!("calibrate.synthetic: need temperatures and at least 2 points per branch");
            }
            if !(0.0..1.0).contains(&syn.perturbation) {
                bail!("calibrate.synthetic.perturbation: must lie in [0, 1)");
            }
        }
        Ok(())
    }
}
