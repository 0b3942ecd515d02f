//! Strict run configuration.

use std::path::{Path, PathBuf};

use boostedgs::bounds::CaseId;
use boostedgs::energy::Params;
use boostedgs::solver::{PetviashviliOpts, SolverOpts};
use boostedgs::spectral::Grid;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.dim, self.half_width, self.points_per_dim)?)
    }
}

/// One ladder. Mass ladders are given as fractions of `a*_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    MassToCritical { mass_fractions: Vec<f64> },
    MToZero { masses: Vec<f64> },
    MuToZeroSubcritical { mus: Vec<f64> },
    MuToZeroCritical { mus: Vec<f64> },
    BetaToZero { betas: Vec<f64> },
}

impl SweepSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SweepSpec::MassToCritical { .. } => "mass_to_critical",
            SweepSpec::MToZero { .. } => "m_to_zero",
            SweepSpec::MuToZeroSubcritical { .. } => "mu_to_zero_subcritical",
            SweepSpec::MuToZeroCritical { .. } => "mu_to_zero_critical",
            SweepSpec::BetaToZero { .. } => "beta_to_zero",
        }
    }

    fn ladder(&self) -> &[f64] {
        match self {
            SweepSpec::MassToCritical { mass_fractions: l }
            | SweepSpec::MToZero { masses: l }
            | SweepSpec::MuToZeroSubcritical { mus: l }
            | SweepSpec::MuToZeroCritical { mus: l }
            | SweepSpec::BetaToZero { betas: l } => l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub case: CaseId,
    /// Replaces `params.a` by this multiple of `a*_v`.
    #[serde(default)]
    pub a_over_a_star_v: Option<f64>,
    /// Measure `e(a)` with the constrained solver.
    #[serde(default)]
    pub solve: bool,
    /// Trial scales for the nonexistence cases.
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
}

fn default_pairs() -> usize {
    50
}
fn default_pohozaev_tol() -> f64 {
    1e-4
}
fn default_gn_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default)]
    pub fields: Vec<PathBuf>,
    #[serde(default = "default_pairs")]
    pub gradient_pairs: usize,
    #[serde(default = "default_pohozaev_tol")]
    pub pohozaev_tol: f64,
    #[serde(default = "default_gn_tol")]
    pub gn_tol: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            fields: Vec::new(),
            gradient_pairs: default_pairs(),
            pohozaev_tol: default_pohozaev_tol(),
            gn_tol: default_gn_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: Params,
    #[serde(default)]
    pub solver: SolverOpts,
    #[serde(default)]
    pub reference: PetviashviliOpts,
    /// Directory of a saved reference bundle to use instead of building one.
    #[serde(default)]
    pub bundle: Option<PathBuf>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.solver.seed = s;
            self.reference.seed = s;
        }
        self
    }

    /// Checks every invariant that can be checked before any compute.
    pub fn validate(&self) -> Result<Grid, CliError> {
        let grid = self.grid.build()?;
        self.params.validate()?;
        if self.params.dim != grid.dim() {
            return Err(CliError::Usage(format!(
                "params.dim = {} but grid.dim = {}",
                self.params.dim,
                grid.dim()
            )));
        }
        self.solver.validate()?;
        for s in &self.sweeps {
            let l = s.ladder();
            if l.len() < 4 || l.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Usage(format!(
                    "sweep {} needs at least four finite ladder values",
                    s.name()
                )));
            }
        }
        if let Some(b) = &self.bounds {
            if let Some(r) = b.a_over_a_star_v {
                if !(r.is_finite() && r > 0.0) {
                    return Err(CliError::Usage("bounds.a_over_a_star_v must be positive".into()));
                }
            }
        }
        Ok(grid)
    }
}
