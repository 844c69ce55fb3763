//! Run configuration: a single JSON document with every block optional
//! except `command`.

use std::path::PathBuf;

use heston_amer::mc::McConfig;
use heston_amer::{GridSpec, HestonParams, PutSpec, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Price,
    Boundary,
    Eep,
    Verify,
    Converge,
    Symmetry,
}

/// Contract and starting state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instrument {
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
    pub y0: f64,
}

impl Default for Instrument {
    fn default() -> Self {
        Self {
            strike: 100.0,
            maturity: 1.0,
            spot: 100.0,
            y0: 0.04,
        }
    }
}

fn default_levels() -> u32 {
    3
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Engineering defaults: the desk configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "HestonParams::desk")]
    pub model: HestonParams,
    #[serde(default)]
    pub instrument: Instrument,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub mc: McConfig,
    /// Refinement levels of `converge`, counting the base grid.
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; `None` uses one per available core.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            model: HestonParams::desk(),
            instrument: Instrument::default(),
            grid: GridSpec::desk(),
            solver: SolverOptions::default(),
            mc: McConfig::default(),
            levels: default_levels(),
            out: default_out(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn spec(&self) -> PutSpec {
        PutSpec {
            strike: self.instrument.strike,
            maturity: self.instrument.maturity,
        }
    }

    /// Schema checks that need no solve. Building the lattice is cheap and
    /// catches bad grid blocks.
    pub fn validate(&self) -> Result<(), String> {
        self.model.validate().map_err(|e| e.to_string())?;
        let spec = PutSpec::new(self.instrument.strike, self.instrument.maturity)
            .map_err(|e| e.to_string())?;
        let Instrument { spot, y0, .. } = self.instrument;
        if !(spot.is_finite() && spot > 0.0) {
            return Err(format!("instrument.spot must be > 0, got {spot}"));
        }
        if !(y0.is_finite() && y0 >= 0.0) {
            return Err(format!("instrument.y0 must be >= 0, got {y0}"));
        }
        self.mc.validate().map_err(|e| e.to_string())?;
        if !(self.solver.newton_tol.is_finite() && self.solver.newton_tol > 0.0) {
            return Err("solver.newton_tol must be > 0".into());
        }
        if self.solver.max_newton == 0 || self.solver.max_linear == 0 {
            return Err("solver iteration limits must be >= 1".into());
        }
        self.grid
            .build(&self.model, &spec, spot, y0)
            .map_err(|e| e.to_string())?;
        if self.command == Command::Converge && self.levels < 2 {
            return Err(format!("levels must be >= 2, got {}", self.levels));
        }
        if self.threads == Some(0) {
            return Err("threads must be >= 1".into());
        }
        Ok(())
    }
}
