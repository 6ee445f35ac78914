//! Versioned JSON run configurations. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use geohydro_core::fields::{Grid1D, ScalarField1D};
use geohydro_core::hydro::EvolutionConfig;
use geohydro_core::riemann::HydroSnapshot;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub verbosity: Option<Verbosity>,
    pub grid: GridSpec,
    pub a: FieldSpec,
    pub b: Vec<FieldSpec>,
    #[serde(default)]
    pub evolution: Option<EvolutionConfig<f64>>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    /// Indices `k` with `a_k ≡ 0` that the run is expected to honour.
    #[serde(default)]
    pub zero_mask: Vec<usize>,
    #[serde(default)]
    pub reconstruct: Option<ReconstructSpec>,
    #[serde(default)]
    pub geodesic: Option<GeodesicSpec>,
    /// Negative control: random smooth perturbation of the reconstructed metric.
    #[serde(default)]
    pub control: Option<ControlSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    Info,
    Debug,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub length: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "yes")]
    pub periodic: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(f64),
    Values(Vec<f64>),
    /// One value per line; `#` starts a comment. Relative to the config file.
    File(PathBuf),
    Sine {
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        modes: Vec<Mode>,
    },
}

/// `amp · sin(2π k (x − x0)/L + phase)`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: u32,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub mass_drift: f64,
    pub second_drift: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSpec {
    /// 1-based root index `k` of `h_k = b_k/√(1+b_k²)`.
    #[serde(default = "one")]
    pub root: usize,
    /// Nodes across the common `x¹` range of the resampled chart.
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default = "default_closedness_tol")]
    pub closedness_tol: f64,
}

impl Default for ReconstructSpec {
    fn default() -> Self {
        Self {
            root: 1,
            n1: None,
            closedness_tol: default_closedness_tol(),
        }
    }
}

fn one() -> usize {
    1
}

fn default_closedness_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    /// Initial states `[x1, x2, p1, p2]`.
    pub initial: Vec<[f64; 4]>,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

pub fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub amplitude: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

fn default_modes() -> usize {
    4
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.b.is_empty() {
            return Err(CliError::Input("`b` needs at least one root field".into()));
        }
        if let Some(ev) = &cfg.evolution {
            ev.validate().map_err(|e| CliError::Input(e.to_string()))?;
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn degree(&self) -> usize {
        self.b.len() + 1
    }

    pub fn grid(&self) -> Result<Grid1D<f64>, CliError> {
        let g = &self.grid;
        let grid = if g.periodic {
            Grid1D::periodic(g.nx, g.x0, g.length)
        } else {
            Grid1D::closed(g.nx, g.x0, g.x0 + g.length)
        };
        grid.map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn initial_state(&self, base: &Path) -> Result<HydroSnapshot<f64>, CliError> {
        let grid = self.grid()?;
        let a = self.a.build(grid, base)?;
        let b = self.b.iter().map(|s| s.build(grid, base)).collect::<Result<_, _>>()?;
        // non-positive `a` is an input problem, not a numerical one
        HydroSnapshot::new(a, b).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn evolution(&self) -> Result<EvolutionConfig<f64>, CliError> {
        self.evolution
            .ok_or_else(|| CliError::Input("config has no `evolution` section".into()))
    }
}

impl FieldSpec {
    pub fn build(&self, grid: Grid1D<f64>, base: &Path) -> Result<ScalarField1D<f64>, CliError> {
        let field = match self {
            FieldSpec::Constant(c) => ScalarField1D::constant(grid, *c),
            FieldSpec::Values(v) => ScalarField1D::new(grid, v.clone()),
            FieldSpec::File(p) => ScalarField1D::new(grid, read_column(&base.join(p))?),
            FieldSpec::Sine { offset, modes } => {
                let l = grid.length();
                ScalarField1D::from_fn(grid, |x| {
                    offset
                        + modes
                            .iter()
                            .map(|m| m.amp * (std::f64::consts::TAU * m.k as f64 * (x - grid.x0) / l + m.phase).sin())
                            .sum::<f64>()
                })
            }
        };
        field.map_err(|e| CliError::Input(e.to_string()))
    }
}

fn read_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| CliError::Input(format!("{}: cannot parse {l:?}", path.display())))
        })
        .collect()
}
