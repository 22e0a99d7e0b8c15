use std::path::{Path, PathBuf};

use mfg_core::{PicardOptions, ProblemSpec, SpecConfig, TimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_damping() -> f64 {
    PicardOptions::default().damping
}

fn default_tol() -> f64 {
    PicardOptions::default().tol
}

fn default_max_iter() -> usize {
    PicardOptions::default().max_iter
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = PicardOptions::default();
        Self {
            damping: o.damping,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    /// No default: runs are never seeded from the clock.
    pub seed: u64,
}

fn default_paths() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NPlayerConfig {
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub deviation_n: Vec<usize>,
    pub scalings: Vec<f64>,
    pub offsets: Vec<f64>,
    pub n_mc: usize,
}

impl Default for NPlayerConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32, 64, 128],
            reps: 32,
            deviation_n: vec![16, 64],
            scalings: vec![-0.5, 0.0, 0.5],
            offsets: vec![-0.25, 0.0, 0.25],
            n_mc: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub n_candidates: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { n_candidates: 50 }
    }
}

/// One run: the model plus numerical and Monte Carlo settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub spec: SpecConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub mc: McConfig,
    #[serde(default)]
    pub nplayer: NPlayerConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

/// A parsed scenario together with the digest of the file it came from.
pub struct Loaded {
    pub config: ScenarioConfig,
    pub sha256: String,
    pub source: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| CliError::Validation(format!("{}: not UTF-8: {e}", path.display())))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let source = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Loaded {
        config,
        sha256,
        source,
    })
}

impl ScenarioConfig {
    pub fn build_spec(&self) -> Result<ProblemSpec, CliError> {
        self.spec
            .build()
            .map_err(|e| CliError::Validation(format!("spec: {e}")))
    }

    pub fn time_grid(&self, spec: &ProblemSpec) -> Result<TimeGrid, CliError> {
        let grid = match &self.grid {
            Some(g) => TimeGrid::new(spec.horizon(), g.n_steps),
            None => TimeGrid::with_default_steps(spec.horizon()),
        };
        grid.map_err(|e| CliError::Validation(format!("grid: {e}")))
    }

    pub fn picard(&self) -> Result<PicardOptions, CliError> {
        let s = &self.solver;
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(CliError::Validation(format!(
                "solver.damping: must lie in (0, 1], got {}",
                s.damping
            )));
        }
        if !(s.tol > 0.0) {
            return Err(CliError::Validation(format!("solver.tol: must be positive, got {}", s.tol)));
        }
        Ok(PicardOptions {
            damping: s.damping,
            tol: s.tol,
            max_iter: s.max_iter,
        })
    }
}
