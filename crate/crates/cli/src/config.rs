use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qbsde_core::coupling::{CouplingConfig, LocalCorrelation};
use qbsde_core::forward::PipelineConfig;
use qbsde_core::martingale::{BinSpec, FamilyKind};
use qbsde_core::paths::TimeGrid;
use qbsde_core::pde::{ExtractOptions, SpaceGrid, TerminalCondition};
use qbsde_core::registry;
use qbsde_core::DriverSpec;

use crate::CliError;

/// One experiment, read from a single JSON document. Every field has a
/// default, and the fully materialized form is what gets hashed and echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry name with parameters, e.g. `quadratic:gamma=1`.
    pub driver: String,
    pub terminal: String,
    pub horizon: f64,
    pub steps: usize,
    pub dx: f64,
    pub half_width: f64,
    pub paths: usize,
    pub seed: u64,
    pub schedule: Vec<f64>,
    pub early_stop: Option<f64>,
    pub refine_residual: bool,
    pub bmo: BinSpec,
    /// Fail instead of warning when too many paths leave the space grid.
    pub strict: bool,
    pub clamp_threshold: f64,
    pub extract_margin: f64,
    pub validation_budget: usize,
    pub coupling: CouplingSection,
    pub check: CheckSection,
    pub outputs: Outputs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            driver: "quadratic:gamma=1".into(),
            terminal: "tanh".into(),
            horizon: 1.0,
            steps: 200,
            dx: 0.02,
            half_width: 8.0,
            paths: 10_000,
            seed: 0,
            schedule: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            early_stop: Some(1e-3),
            refine_residual: false,
            bmo: BinSpec::default(),
            strict: false,
            clamp_threshold: 1e-3,
            extract_margin: 0.0,
            validation_budget: 2000,
            coupling: CouplingSection::default(),
            check: CheckSection::default(),
            outputs: Outputs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub rules: Vec<LocalCorrelation>,
    /// Tail level for constant-correlation rows.
    pub tail_eps: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            rules: [0.0, 0.5, 0.9, 0.99, 1.0].iter().map(|&r| LocalCorrelation::Constant { r }).collect(),
            tail_eps: 0.1,
        }
    }
}

/// Which process the `check` subcommand tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    /// The largest-`k` pipeline solution.
    Pipeline,
    /// `Y = t + B` for `f = -z`.
    UnitDrift,
    /// `Y = t + int sign(B) dB`, which has the law but not the dynamics of `UnitDrift`.
    SignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub candidate: Candidate,
    pub family: FamilyKind,
    pub points: usize,
    pub eps: f64,
    pub r_y: f64,
    pub seed: u64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            candidate: Candidate::Pipeline,
            family: FamilyKind::Ansatz,
            points: 20,
            eps: 1.0,
            r_y: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub jsonl: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub grid: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Resolves every name and checks the numeric ranges.
    pub fn validate(&self) -> Result<(), CliError> {
        self.driver_spec()?;
        self.terminal_condition()?;
        self.time_grid()?;
        SpaceGrid::new(self.half_width, self.dx)?;
        if self.paths < 2 {
            return Err(CliError::Config(format!("paths = {} must be at least 2", self.paths)));
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) || self.schedule.iter().any(|k| !(*k > 0.0)) {
            return Err(CliError::Config(format!("schedule {:?} must be positive and strictly increasing", self.schedule)));
        }
        if !(0.0..=1.0).contains(&self.clamp_threshold) {
            return Err(CliError::Config(format!("clamp_threshold = {} must lie in [0, 1]", self.clamp_threshold)));
        }
        for rule in &self.coupling.rules {
            rule.validate()?;
        }
        if !(self.coupling.tail_eps > 0.0 && self.check.eps > 0.0 && self.check.r_y > 0.0) || self.check.points == 0 {
            return Err(CliError::Config("tail_eps, check.eps, check.r_y and check.points must be positive".into()));
        }
        Ok(())
    }

    pub fn driver_spec(&self) -> Result<DriverSpec, CliError> {
        Ok(registry::driver(&self.driver, 1, 1, self.horizon)?)
    }

    pub fn terminal_condition(&self) -> Result<TerminalCondition, CliError> {
        Ok(registry::terminal(&self.terminal)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.horizon, self.steps)?)
    }

    pub fn extract(&self) -> ExtractOptions {
        ExtractOptions {
            margin: self.extract_margin,
            clamp_threshold: self.clamp_threshold,
            strict: self.strict,
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let mut p = PipelineConfig::new(self.time_grid()?, self.half_width, self.dx, self.paths, self.seed);
        p.schedule = self.schedule.clone();
        p.early_stop = self.early_stop;
        p.refine_residual = self.refine_residual;
        p.bmo_bins = self.bmo;
        p.extract = self.extract();
        if let Some(v) = p.validation.as_mut() {
            v.budget = self.validation_budget;
            v.seed = self.seed;
        }
        Ok(p)
    }

    pub fn coupling_config(&self) -> Result<CouplingConfig, CliError> {
        Ok(CouplingConfig {
            grid: self.time_grid()?,
            half_width: self.half_width,
            dx: self.dx,
            paths: self.paths,
            seed: self.seed,
            extract: self.extract(),
        })
    }
}
