//! Shared evaluation machinery: counter-based seeding, mask drawing, pool
//! assembly, and the analytic / Monte Carlo estimates of a configuration's
//! normalized error on a task.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use tdr::kernels::{Equilibrium, KernelSpec};
use tdr::model::{model_moments, ModelMoments};
use tdr::poly::MomentProvider;
use tdr::readout::{capacity_from_parts, ridge_fit_samples, sample_mse};
use tdr::sim::{
    gen_input, run_continuous, run_parallel, InputSpec, ParallelConfig, ReservoirConfig,
};
use tdr::tasks::{target_series, task_cross_covariance, task_output_covariance, TaskSpec};
use tdr::TdrError;

use crate::config::{McSection, ModelSection};

/// Stream `stream` of the ChaCha generator keyed by the master seed.
/// Adding points or draws never perturbs existing streams.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Stream namespace for mask draws addressed by an explicit mask seed
/// (used by `optimize` and `robust-task` so rows stay reproducible).
const MASK_STREAM_BASE: u64 = 1 << 40;

pub fn mask_rng(master: u64, mask_seed: u64, reservoir: usize) -> ChaCha12Rng {
    stream_rng(
        master,
        MASK_STREAM_BASE + mask_seed * 4096 + reservoir as u64,
    )
}

pub fn draw_mask(rng: &mut ChaCha12Rng, neurons: usize, n: usize, range: [f64; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(neurons, n, |_, _| rng.random_range(range[0]..range[1]))
}

/// Splits a neuron total across a pool, front-loading the remainder.
pub fn split_neurons(total: usize, pools: usize) -> Vec<usize> {
    let base = total / pools;
    let extra = total % pools;
    (0..pools).map(|j| base + usize::from(j < extra)).collect()
}

/// Per-point evaluation status; every CSV row carries one.
#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Ok,
    NoStableEquilibrium,
    Unstable(String),
    DegenerateTask,
    Failed(String),
}

impl PointStatus {
    pub fn flag(&self) -> String {
        match self {
            Self::Ok => "ok".into(),
            Self::NoStableEquilibrium => "no_stable_equilibrium".into(),
            Self::Unstable(_) => "unstable".into(),
            Self::DegenerateTask => "degenerate".into(),
            Self::Failed(msg) => format!("error:{}", msg.replace([',', '\n'], ";")),
        }
    }
}

pub struct AnalyticPoint {
    pub model: ModelMoments,
    pub equilibria: Vec<Equilibrium>,
    pub nmse: f64,
    pub capacity: f64,
}

/// Builds the pool model at its stable equilibria and evaluates the analytic
/// normalized error of the task. Soft failures (no stable equilibrium,
/// refused stability, degenerate task) come back as a status, hard numeric
/// failures as well — callers flag rows and keep sweeping.
pub fn analytic_point(
    pool: &ParallelConfig,
    provider: &MomentProvider,
    task: &TaskSpec,
    model_cfg: &ModelSection,
) -> Result<AnalyticPoint, PointStatus> {
    let bracket = (
        model_cfg.equilibrium_bracket[0],
        model_cfg.equilibrium_bracket[1],
    );
    let mut equilibria = Vec::with_capacity(pool.reservoirs.len());
    for cfg in &pool.reservoirs {
        let found = cfg
            .kernel
            .find_equilibria(bracket, model_cfg.equilibrium_grid)
            .map_err(|e| PointStatus::Failed(e.to_string()))?;
        let stable = found.into_iter().filter(|e| e.stable);
        let pick = match model_cfg.equilibrium.as_str() {
            "smallest" => stable.min_by(|a, b| a.x0.total_cmp(&b.x0)),
            _ => stable.max_by(|a, b| a.x0.total_cmp(&b.x0)),
        };
        match pick {
            Some(eq) => equilibria.push(eq),
            None => return Err(PointStatus::NoStableEquilibrium),
        }
    }
    let model = model_moments(pool, &equilibria, model_cfg.taylor_order, provider).map_err(
        |e| match e {
            TdrError::Instability(msg) => PointStatus::Unstable(msg),
            other => PointStatus::Failed(other.to_string()),
        },
    )?;

    let (trace_cov_yy, _) =
        task_output_covariance(task, provider).map_err(|e| PointStatus::Failed(e.to_string()))?;
    if !(trace_cov_yy > 0.0) {
        return Err(PointStatus::DegenerateTask);
    }
    let cov_xy = task_cross_covariance(task, &model, provider)
        .map_err(|e| PointStatus::Failed(e.to_string()))?;
    let report = capacity_from_parts(&model.gamma0, &cov_xy, trace_cov_yy, model_cfg.lambda)
        .map_err(|e| PointStatus::Failed(e.to_string()))?;

    Ok(AnalyticPoint {
        model,
        equilibria,
        nmse: report.nmse,
        capacity: report.capacity,
    })
}

pub struct McEstimate {
    pub nmse_discrete: f64,
    pub nmse_continuous: f64,
}

/// Monte Carlo estimate: simulate, ridge-fit on the training block, report
/// held-out NMSE (test-sample variance in the denominator). Replicates use
/// fresh input streams and are averaged.
pub fn mc_point(
    pool: &ParallelConfig,
    equilibria: &[Equilibrium],
    input: &InputSpec,
    task: &TaskSpec,
    lambda: f64,
    mc: &McSection,
    rng: &mut ChaCha12Rng,
) -> Result<McEstimate, PointStatus> {
    let inits: Vec<f64> = equilibria.iter().map(|e| e.x0).collect();
    let mut discrete_accum = 0.0;
    let mut continuous_accum = 0.0;
    for _ in 0..mc.replicates.max(1) {
        let train_seed: u64 = rng.random();
        let test_seed: u64 = rng.random();
        let z_train = gen_input(input, mc.washout + mc.t_train, train_seed)
            .map_err(|e| PointStatus::Failed(e.to_string()))?;
        let z_test = gen_input(input, mc.washout + mc.t_test, test_seed)
            .map_err(|e| PointStatus::Failed(e.to_string()))?;

        let run_stacked = |continuous: bool, z: &DMatrix<f64>| -> Result<DMatrix<f64>, TdrError> {
            if continuous {
                stacked_continuous(pool, z, mc.oversample, mc.washout, &inits)
            } else {
                run_parallel(pool, z, mc.washout, Some(&inits))
            }
        };

        let y_train = target_series(task, &z_train, mc.washout)
            .map_err(|e| PointStatus::Failed(e.to_string()))?;
        let y_test = target_series(task, &z_test, mc.washout)
            .map_err(|e| PointStatus::Failed(e.to_string()))?;

        let modes: &[bool] = if mc.continuous {
            &[false, true]
        } else {
            &[false]
        };
        for &continuous in modes {
            let x_train = run_stacked(continuous, &z_train)
                .map_err(|e| PointStatus::Failed(e.to_string()))?;
            let x_test =
                run_stacked(continuous, &z_test).map_err(|e| PointStatus::Failed(e.to_string()))?;
            let fit = ridge_fit_samples(&x_train, &y_train, lambda)
                .map_err(|e| PointStatus::Failed(e.to_string()))?;
            let mse = sample_mse(&fit, &x_test, &y_test);
            let var = sample_variance(&y_test);
            if !(var > 0.0) {
                return Err(PointStatus::DegenerateTask);
            }
            if continuous {
                continuous_accum += mse / var;
            } else {
                discrete_accum += mse / var;
            }
        }
    }
    let replicates = mc.replicates.max(1) as f64;
    Ok(McEstimate {
        nmse_discrete: discrete_accum / replicates,
        nmse_continuous: if mc.continuous {
            continuous_accum / replicates
        } else {
            f64::NAN
        },
    })
}

fn stacked_continuous(
    pool: &ParallelConfig,
    z: &DMatrix<f64>,
    oversample: usize,
    washout: usize,
    inits: &[f64],
) -> Result<DMatrix<f64>, TdrError> {
    let t_out = z.ncols() - washout;
    let mut stacked = DMatrix::zeros(pool.total_neurons(), t_out);
    let mut offset = 0;
    for (cfg, &x0) in pool.reservoirs.iter().zip(inits) {
        let states = run_continuous(cfg, z, oversample, washout, Some(x0))?;
        stacked
            .view_mut((offset, 0), (cfg.neurons, t_out))
            .copy_from(&states);
        offset += cfg.neurons;
    }
    Ok(stacked)
}

fn sample_variance(y: &DMatrix<f64>) -> f64 {
    let t = y.ncols() as f64;
    let mean = y.column_sum() / t;
    let mut total = 0.0;
    for col in y.column_iter() {
        total += (col - &mean).norm_squared();
    }
    total / t
}

/// Pool of reservoirs sharing one kernel parameterization with per-reservoir
/// masks.
pub fn uniform_pool(
    kernel: &KernelSpec,
    separation: f64,
    neuron_split: &[usize],
    masks: Vec<DMatrix<f64>>,
) -> ParallelConfig {
    let reservoirs = neuron_split
        .iter()
        .zip(masks)
        .map(|(&neurons, mask)| ReservoirConfig {
            neurons,
            separation,
            kernel: kernel.clone(),
            mask,
        })
        .collect();
    ParallelConfig { reservoirs }
}

/// CSV float formatting: shortest round-trip representation, `nan` spelled
/// lowercase.
pub fn fmt_f64(value: f64) -> String {
    if value.is_nan() {
        "nan".into()
    } else {
        format!("{value}")
    }
}
