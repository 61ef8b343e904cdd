//! `robust-params` and `robust-task`: analytic normalized-error
//! distributions of parallel pools under random parameter draws and under
//! random quadratic-task draws.

use rand::Rng;
use rayon::prelude::*;

use tdr::readout::capacity_from_parts;
use tdr::sim::{ParallelConfig, ReservoirConfig};
use tdr::tasks::{diag_quadratic_task, task_cross_covariance, task_output_covariance};

use crate::config::ExperimentConfig;
use crate::runner::{
    analytic_point, draw_mask, fmt_f64, mask_rng, split_neurons, stream_rng, uniform_pool,
    PointStatus,
};

use super::{enforce_failure_budget, thread_pool, write_csv, CliFailure, RunOptions};

const PARAMS_HEADER: &[&str] = &[
    "row",
    "pool_size",
    "neurons",
    "draw_index",
    "seed",
    "lambda",
    "taylor_order",
    "nmse_model",
    "flag",
];

/// Random-parameter robustness: for every pool size and neuron total, draw
/// masks and per-reservoir kernel parameters uniformly and evaluate the
/// analytic error of the configured memory task.
pub fn run_params(config: &ExperimentConfig, opts: &RunOptions) -> Result<(), CliFailure> {
    let provider = config.moment_provider().map_err(CliFailure::Config)?;
    let robust = &config.robust;
    let n = config.input.dim;
    let task = diag_quadratic_task(robust.task_lags, n, &vec![1.0; robust.task_lags + 1])
        .map_err(|e| CliFailure::Config(e.to_string()))?;

    let combos: Vec<(usize, usize)> = robust
        .pools
        .iter()
        .flat_map(|&p| robust.neurons.iter().map(move |&nt| (p, nt)))
        .collect();
    let total = combos.len() * robust.draws;

    let evaluate = |row: usize| -> Vec<String> {
        let (pool_size, neurons_total) = combos[row / robust.draws];
        let draw_index = row % robust.draws;
        let mut rng = stream_rng(opts.seed, row as u64);
        let neuron_split = split_neurons(neurons_total, pool_size);

        let reservoirs: Vec<ReservoirConfig> = neuron_split
            .iter()
            .map(|&neurons| {
                let eta = rng.random_range(robust.eta_range[0]..robust.eta_range[1]);
                let gamma = rng.random_range(robust.gamma_range[0]..robust.gamma_range[1]);
                let separation = loop {
                    let d = rng.random_range(robust.d_range[0]..robust.d_range[1]);
                    if d > 0.0 {
                        break d;
                    }
                };
                let mask = draw_mask(&mut rng, neurons, n, robust.mask_range);
                ReservoirConfig {
                    neurons,
                    separation,
                    kernel: config.kernel_with(eta, gamma),
                    mask,
                }
            })
            .collect();
        let pool = ParallelConfig { reservoirs };

        let (nmse, status) = match analytic_point(&pool, &provider, &task, &config.model) {
            Ok(point) => (point.nmse, PointStatus::Ok),
            Err(status) => (f64::NAN, status),
        };
        vec![
            row.to_string(),
            pool_size.to_string(),
            neurons_total.to_string(),
            draw_index.to_string(),
            opts.seed.to_string(),
            fmt_f64(config.model.lambda),
            config.model.taylor_order.to_string(),
            fmt_f64(nmse),
            status.flag(),
        ]
    };

    let pool = thread_pool(opts.workers)?;
    let rows: Vec<Vec<String>> =
        pool.install(|| (0..total).into_par_iter().map(evaluate).collect());
    let failures = rows
        .iter()
        .filter(|r| r.last().is_some_and(|f| f.starts_with("error")))
        .count();
    write_csv(&opts.out, PARAMS_HEADER, &rows)?;
    enforce_failure_budget(failures, total)
}

const TASK_HEADER: &[&str] = &[
    "row",
    "pool_size",
    "neurons",
    "task_index",
    "seed",
    "lambda",
    "taylor_order",
    "nmse_model",
    "flag",
];

/// Task-misspecification robustness: reservoir parameters stay frozen at
/// previously optimized values while random diagonal quadratic tasks are
/// presented; rows with zero task variance are flagged degenerate.
pub fn run_task(config: &ExperimentConfig, opts: &RunOptions) -> Result<(), CliFailure> {
    if config.configurations.is_empty() {
        return Err(CliFailure::Config(
            "robust-task needs [[configurations]] with optimized parameters".into(),
        ));
    }
    let provider = config.moment_provider().map_err(CliFailure::Config)?;
    let robust = &config.robust;
    let n = config.input.dim;

    // One model per fixed configuration, shared across task draws.
    let mut models = Vec::new();
    for (idx, fixed) in config.configurations.iter().enumerate() {
        let neuron_split = split_neurons(fixed.neurons, fixed.pools);
        let masks: Vec<_> = (0..fixed.pools)
            .map(|j| {
                let mut rng = mask_rng(opts.seed, fixed.mask_seed, j);
                draw_mask(&mut rng, neuron_split[j], n, config.reservoir.mask_range)
            })
            .collect();
        let kernel = config.kernel_with(fixed.eta, fixed.gamma);
        let pool = uniform_pool(&kernel, fixed.d, &neuron_split, masks);
        // The training task is irrelevant here; only the model is reused.
        let point = analytic_point(
            &pool,
            &provider,
            &config.task_spec().map_err(CliFailure::Config)?,
            &config.model,
        )
        .map_err(|status| {
            CliFailure::Config(format!(
                "configuration {idx} cannot be modeled: {}",
                status.flag()
            ))
        })?;
        models.push(point.model);
    }

    let total = config.configurations.len() * robust.draws;
    let evaluate = |row: usize| -> Vec<String> {
        let cfg_idx = row / robust.draws;
        let task_index = row % robust.draws;
        let fixed = &config.configurations[cfg_idx];
        let model = &models[cfg_idx];
        let mut rng = stream_rng(opts.seed, row as u64);
        let weights: Vec<f64> = (0..=robust.task_lags)
            .map(|_| rng.random_range(robust.task_weight_range[0]..robust.task_weight_range[1]))
            .collect();

        let (nmse, status) = match diag_quadratic_task(robust.task_lags, n, &weights) {
            Ok(task) => match task_output_covariance(&task, &provider) {
                Ok((trace, _)) if trace > 0.0 => {
                    match task_cross_covariance(&task, model, &provider).and_then(|cov_xy| {
                        capacity_from_parts(&model.gamma0, &cov_xy, trace, config.model.lambda)
                    }) {
                        Ok(report) => (report.nmse, PointStatus::Ok),
                        Err(e) => (f64::NAN, PointStatus::Failed(e.to_string())),
                    }
                }
                Ok(_) => (f64::NAN, PointStatus::DegenerateTask),
                Err(e) => (f64::NAN, PointStatus::Failed(e.to_string())),
            },
            Err(e) => (f64::NAN, PointStatus::Failed(e.to_string())),
        };

        vec![
            row.to_string(),
            fixed.pools.to_string(),
            fixed.neurons.to_string(),
            task_index.to_string(),
            opts.seed.to_string(),
            fmt_f64(config.model.lambda),
            config.model.taylor_order.to_string(),
            fmt_f64(nmse),
            status.flag(),
        ]
    };

    let pool = thread_pool(opts.workers)?;
    let rows: Vec<Vec<String>> =
        pool.install(|| (0..total).into_par_iter().map(evaluate).collect());
    let failures = rows
        .iter()
        .filter(|r| r.last().is_some_and(|f| f.starts_with("error")))
        .count();
    write_csv(&opts.out, TASK_HEADER, &rows)?;
    enforce_failure_budget(failures, total)
}
