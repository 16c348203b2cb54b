//! Run configuration: one JSON document per invocation, validated before any
//! computation. Unknown keys are rejected at every level.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bernstein::{BernsteinSpec, Moment};
use crate::error::{CbfError, Result};
use crate::grid::Grid;
use crate::ops::Reconstruction;
use crate::sim::{SimConfig, SimMode, DEFAULT_MAX_CYCLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Kernels,
    Classify,
    Solve,
    Simulate,
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernels => "kernels",
            Command::Classify => "classify",
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
        }
    }
}

/// Source term `g` of the solver and the simulator functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant { value: f64 },
    /// `coef · s^exponent`
    Power { coef: f64, exponent: f64 },
    /// `amplitude · cos(frequency · s)`
    Cosine { amplitude: f64, frequency: f64 },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Constant { value: 0.0 }
    }
}

impl SourceSpec {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            SourceSpec::Constant { value } => value,
            SourceSpec::Power { coef, exponent } => coef * s.powf(exponent),
            SourceSpec::Cosine { amplitude, frequency } => amplitude * (frequency * s).cos(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SourceSpec::Constant { value } => value.is_finite(),
            SourceSpec::Power { coef, exponent } => coef.is_finite() && exponent >= 0.0 && exponent.is_finite(),
            SourceSpec::Cosine { amplitude, frequency } => amplitude.is_finite() && frequency.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(CbfError::Validation(format!("invalid source term {self:?}")))
        }
    }
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub phi0: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub g: SourceSpec,
    #[serde(default)]
    pub reconstruction: Reconstruction,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            lambda: 0.0,
            phi0: 0.0,
            tol: default_tol(),
            g: SourceSpec::default(),
            reconstruction: Reconstruction::default(),
        }
    }
}

fn default_max_cycles() -> usize {
    DEFAULT_MAX_CYCLES
}

fn default_dump_paths() -> usize {
    1000
}

/// Simulator settings; the Bernstein function comes from the top-level spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub x0: f64,
    pub dt: f64,
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_floor: Option<f64>,
    /// Number of leading paths written to the dump.
    #[serde(default = "default_dump_paths")]
    pub dump_paths: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsSection {
    /// Take the density from this function instead: a negative control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatched_density: Option<BernsteinSpec>,
    /// Points of the kernel table, evenly spaced on `(0, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0_override: Option<Moment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1_override: Option<Moment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// First cycle: `I_f g(x0)` against `E^x[∫₀^{τ_1} g(x - S_s) ds]`.
    Potential,
    /// `I_c g(x0)` against `E^x[∫₀^{τ_∞} g(S^c_t) dt]`.
    CensoredPotential,
    /// `Σ λ^j I_c^{j+1} g (x0)` against the discounted functional, `λ < 0`.
    Resolvent,
    /// `Σ λ^j I_c^j 1 (x0)` against `E^x[e^{λ τ_∞}]`, `λ < 0`.
    LifetimeLaplace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub identities: Vec<Identity>,
    /// Added to every analytic value; nonzero only for negative controls.
    #[serde(default)]
    pub analytic_offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub spec: BernsteinSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn require<'a, T>(section: &'a Option<T>, name: &str, command: Command) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| CbfError::Validation(format!("command `{}` needs a `{name}` section", command.name())))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CbfError::Validation(format!("config: {e}")))
    }

    pub fn grid(&self, command: Command) -> Result<Grid> {
        let g = *require(&self.grid, "grid", command)?;
        g.validate()?;
        Ok(g)
    }

    pub fn sim(&self, command: Command) -> Result<&SimSection> {
        require(&self.sim, "sim", command)
    }

    pub fn compare(&self, command: Command) -> Result<&CompareSection> {
        require(&self.compare, "compare", command)
    }

    pub fn solver(&self) -> SolverSection {
        self.solver.clone().unwrap_or_default()
    }

    pub fn sim_config(&self, command: Command) -> Result<SimConfig> {
        let s = self.sim(command)?;
        let c = SimConfig {
            spec: self.spec.clone(),
            x0: s.x0,
            dt: s.dt,
            n_paths: s.n_paths,
            seed: s.seed,
            max_cycles: s.max_cycles,
            mode: s.mode,
            level_floor: s.level_floor,
        };
        c.validate()?;
        Ok(c)
    }

    /// Checks everything the given command will read.
    pub fn validate(&self, command: Command) -> Result<()> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CbfError::Validation(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.spec.validate()?;
        if let Some(k) = &self.kernels {
            if let Some(m) = &k.mismatched_density {
                m.validate()?;
            }
            if k.table_points == Some(0) {
                return Err(CbfError::Validation("table_points must be positive".into()));
            }
        }
        let solver = self.solver();
        solver.g.validate()?;
        if !(solver.tol > 0.0) || !solver.lambda.is_finite() || !solver.phi0.is_finite() {
            return Err(CbfError::Validation("solver needs finite lambda, phi0 and tol > 0".into()));
        }
        match command {
            Command::Kernels | Command::Solve => {
                self.grid(command)?;
            }
            Command::Classify => {}
            Command::Simulate => {
                self.sim_config(command)?;
            }
            Command::Compare => {
                let grid = self.grid(command)?;
                let sim = self.sim_config(command)?;
                if sim.x0 > grid.t_end {
                    return Err(CbfError::Validation(format!(
                        "x0 = {} lies beyond the grid end T = {}",
                        sim.x0, grid.t_end
                    )));
                }
                let cmp = self.compare(command)?;
                if cmp.identities.is_empty() {
                    return Err(CbfError::Validation("compare needs at least one identity".into()));
                }
                if !cmp.analytic_offset.is_finite() {
                    return Err(CbfError::Validation("analytic_offset must be finite".into()));
                }
            }
        }
        Ok(())
    }
}
