//! Experiment configuration: a structured TOML file plus builders that turn
//! the declarative sections into library objects.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use tdr::kernels::KernelSpec;
use tdr::linalg::unvech;
use tdr::poly::MomentProvider;
use tdr::sim::InputSpec;
use tdr::tasks::{diag_quadratic_task, TaskSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSection,
    pub kernel: KernelSection,
    pub reservoir: ReservoirSection,
    #[serde(default)]
    pub model: ModelSection,
    pub task: TaskSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub robust: RobustSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    /// Fixed, previously optimized configurations (input to `robust-task`).
    #[serde(default)]
    pub configurations: Vec<FixedConfiguration>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub dim: usize,
    /// Half-vectorized input covariance (column-major lower triangle).
    pub vech_sigma_z: Option<Vec<f64>>,
    /// Shorthand for isotropic covariance `variance * I`.
    pub variance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// "mackey-glass" or "ikeda".
    pub family: String,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(default = "default_mg_exponent")]
    pub p: f64,
    pub phi: Option<f64>,
}

fn default_mg_exponent() -> f64 {
    2.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    /// Total neurons, split evenly across the pool.
    pub neurons: usize,
    #[serde(default = "default_pools")]
    pub pools: usize,
    pub separation: Option<f64>,
    /// Row-major explicit mask (single reservoir only); random uniform
    /// masks in `mask_range` are drawn when absent.
    pub mask_values: Option<Vec<f64>>,
    #[serde(default = "default_mask_range")]
    pub mask_range: [f64; 2],
}

fn default_pools() -> usize {
    1
}

fn default_mask_range() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub taylor_order: usize,
    pub lambda: f64,
    pub equilibrium_bracket: [f64; 2],
    pub equilibrium_grid: usize,
    /// Which stable fixed point anchors the expansion when several exist:
    /// "largest" (default) or "smallest".
    pub equilibrium: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            taylor_order: 3,
            lambda: 1e-8,
            equilibrium_bracket: [-5.0, 5.0],
            equilibrium_grid: 1000,
            equilibrium: "largest".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    /// "diag-quadratic", "linear" or "quadratic".
    pub kind: String,
    pub lags: usize,
    /// Per-lag weights of the diag-quadratic shorthand.
    pub weights: Option<Vec<f64>>,
    /// Explicit row-major task matrix for "linear"/"quadratic".
    pub matrix: Option<Vec<f64>>,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
}

fn default_outputs() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub t_train: usize,
    pub t_test: usize,
    pub washout: usize,
    pub oversample: usize,
    pub continuous: bool,
    pub replicates: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            t_train: 10_000,
            t_test: 10_000,
            washout: 200,
            oversample: 32,
            continuous: false,
            replicates: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub d_min: f64,
    pub d_max: f64,
    pub d_points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            d_min: 0.05,
            d_max: 1.0,
            d_points: 20,
            eta_min: 0.5,
            eta_max: 3.0,
            eta_points: 20,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustSection {
    pub pools: Vec<usize>,
    pub neurons: Vec<usize>,
    pub draws: usize,
    pub eta_range: [f64; 2],
    pub gamma_range: [f64; 2],
    pub d_range: [f64; 2],
    pub mask_range: [f64; 2],
    pub task_lags: usize,
    pub task_weight_range: [f64; 2],
}

impl Default for RobustSection {
    fn default() -> Self {
        Self {
            pools: vec![1, 2, 5, 10, 20],
            neurons: vec![20, 40, 60, 80, 100],
            draws: 1000,
            eta_range: [1.0, 3.0],
            gamma_range: [-3.0, 3.0],
            d_range: [0.0, 1.0],
            mask_range: [-3.0, 3.0],
            task_lags: 9,
            task_weight_range: [-10.0, 10.0],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub d_min: f64,
    pub d_max: f64,
    pub d_points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_points: usize,
    pub mask_draws: usize,
    pub pools: Option<Vec<usize>>,
    pub neurons: Option<Vec<usize>>,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            d_min: 0.05,
            d_max: 1.0,
            d_points: 10,
            eta_min: 1.1,
            eta_max: 3.0,
            eta_points: 10,
            gamma_min: 0.2,
            gamma_max: 3.0,
            gamma_points: 5,
            mask_draws: 1,
            pools: None,
            neurons: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfiguration {
    pub pools: usize,
    pub neurons: usize,
    pub d: f64,
    pub eta: f64,
    pub gamma: f64,
    pub mask_seed: u64,
}

/// Covariances quoted with few significant digits can miss the PSD cone by
/// rounding noise; eigenvalues above a small negative floor are clamped to
/// zero, genuine indefiniteness is refused.
fn project_to_psd(sigma: DMatrix<f64>) -> Result<DMatrix<f64>, String> {
    let eig = sigma.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e));
    let floor = -1e-2 * max_eig.max(f64::MIN_POSITIVE);
    let mut clamped = eig.eigenvalues.clone();
    let mut touched = false;
    for value in clamped.iter_mut() {
        if *value < floor {
            return Err(format!(
                "input covariance has eigenvalue {value}, beyond rounding tolerance"
            ));
        }
        if *value < 0.0 {
            *value = 0.0;
            touched = true;
        }
    }
    if !touched {
        return Ok(sigma);
    }
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| format!("config parse error: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        if self.input.dim == 0 {
            return Err("input.dim must be positive".into());
        }
        if self.input.vech_sigma_z.is_none() && self.input.variance.is_none() {
            return Err("input needs vech_sigma_z or variance".into());
        }
        match self.kernel.family.as_str() {
            "mackey-glass" | "ikeda" => {}
            other => return Err(format!("unknown kernel family '{other}'")),
        }
        if self.reservoir.neurons == 0 || self.reservoir.pools == 0 {
            return Err("reservoir.neurons and reservoir.pools must be positive".into());
        }
        if self.sweep.d_points == 0 || self.sweep.eta_points == 0 {
            return Err("sweep grids must be non-empty".into());
        }
        if self.mc.t_train < 2 || self.mc.t_test < 2 {
            return Err("mc sample sizes must be at least 2".into());
        }
        if self.mc.washout <= self.task.lags {
            return Err("mc.washout must exceed task.lags".into());
        }
        if self.model.lambda < 0.0 {
            return Err("model.lambda must be non-negative".into());
        }
        if !matches!(self.model.equilibrium.as_str(), "largest" | "smallest") {
            return Err(format!(
                "model.equilibrium must be 'largest' or 'smallest', got '{}'",
                self.model.equilibrium
            ));
        }
        self.input_covariance()?;
        self.task_spec()?;
        Ok(())
    }

    pub fn input_covariance(&self) -> Result<DMatrix<f64>, String> {
        let n = self.input.dim;
        if let Some(vech) = &self.input.vech_sigma_z {
            if vech.len() != n * (n + 1) / 2 {
                return Err(format!(
                    "vech_sigma_z has {} entries, dimension {n} needs {}",
                    vech.len(),
                    n * (n + 1) / 2
                ));
            }
            let raw = unvech(&nalgebra::DVector::from_column_slice(vech), n)
                .map_err(|e| format!("invalid input covariance: {e}"))?;
            project_to_psd(raw)
        } else {
            let v = self.input.variance.expect("validated");
            if v < 0.0 {
                return Err("input.variance must be non-negative".into());
            }
            Ok(DMatrix::identity(n, n) * v)
        }
    }

    pub fn input_spec(&self) -> Result<InputSpec, String> {
        Ok(InputSpec {
            sigma_z: self.input_covariance()?,
        })
    }

    pub fn moment_provider(&self) -> Result<MomentProvider, String> {
        Ok(MomentProvider::gaussian(self.input_covariance()?))
    }

    /// Kernel with the section's fixed parameters; sweeps override `eta`
    /// (and `gamma` for optimization) per point.
    pub fn kernel_with(&self, eta: f64, gamma: f64) -> KernelSpec {
        match self.kernel.family.as_str() {
            "mackey-glass" => KernelSpec::MackeyGlass {
                eta,
                gamma,
                p: self.kernel.p,
            },
            "ikeda" => KernelSpec::Ikeda {
                eta,
                gamma,
                phi: self.kernel.phi.unwrap_or(0.0),
            },
            _ => unreachable!("validated"),
        }
    }

    pub fn fixed_eta(&self) -> Result<f64, String> {
        self.kernel
            .eta
            .ok_or_else(|| "kernel.eta required by this command".into())
    }

    pub fn fixed_gamma(&self) -> Result<f64, String> {
        self.kernel
            .gamma
            .ok_or_else(|| "kernel.gamma required by this command".into())
    }

    pub fn task_spec(&self) -> Result<TaskSpec, String> {
        let n = self.input.dim;
        let lags = self.task.lags;
        match self.task.kind.as_str() {
            "diag-quadratic" => {
                let default_weights = vec![1.0; lags + 1];
                let weights = self.task.weights.as_deref().unwrap_or(&default_weights);
                diag_quadratic_task(lags, n, weights).map_err(|e| format!("task: {e}"))
            }
            "linear" => {
                let rows = (lags + 1) * n;
                let values = self
                    .task
                    .matrix
                    .as_ref()
                    .ok_or_else(|| "linear task needs task.matrix".to_string())?;
                if values.len() != rows * self.task.outputs {
                    return Err(format!(
                        "linear task matrix needs {} x {} entries",
                        rows, self.task.outputs
                    ));
                }
                Ok(TaskSpec::Linear {
                    matrix: DMatrix::from_row_slice(rows, self.task.outputs, values),
                    lags,
                })
            }
            "quadratic" => {
                let m = (lags + 1) * n;
                let cols = m * (m + 1) / 2;
                let values = self
                    .task
                    .matrix
                    .as_ref()
                    .ok_or_else(|| "quadratic task needs task.matrix".to_string())?;
                if values.len() != self.task.outputs * cols {
                    return Err(format!(
                        "quadratic task matrix needs {} x {cols} entries",
                        self.task.outputs
                    ));
                }
                Ok(TaskSpec::Quadratic {
                    matrix: DMatrix::from_row_slice(self.task.outputs, cols, values),
                    lags,
                })
            }
            other => Err(format!("unknown task kind '{other}'")),
        }
    }
}
