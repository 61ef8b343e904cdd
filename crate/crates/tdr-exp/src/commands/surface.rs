//! `surface`: analytic and Monte Carlo normalized-error surfaces over a
//! `(d, eta)` grid at fixed input gain.

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::runner::{
    analytic_point, draw_mask, fmt_f64, mc_point, split_neurons, stream_rng, uniform_pool,
    PointStatus,
};

use super::{enforce_failure_budget, linspace, thread_pool, write_csv, CliFailure, RunOptions};

const HEADER: &[&str] = &[
    "point",
    "d",
    "eta",
    "gamma",
    "neurons",
    "pools",
    "lambda",
    "taylor_order",
    "seed",
    "x0",
    "capacity_model",
    "nmse_model",
    "nmse_discrete_mc",
    "nmse_continuous_mc",
    "flag",
];

pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<(), CliFailure> {
    let gamma = config.fixed_gamma().map_err(CliFailure::Config)?;
    let provider = config.moment_provider().map_err(CliFailure::Config)?;
    let input = config.input_spec().map_err(CliFailure::Config)?;
    let task = config.task_spec().map_err(CliFailure::Config)?;
    let mc_enabled = opts.mc.unwrap_or(true);

    let d_grid = linspace(
        config.sweep.d_min,
        config.sweep.d_max,
        config.sweep.d_points,
    );
    let eta_grid = linspace(
        config.sweep.eta_min,
        config.sweep.eta_max,
        config.sweep.eta_points,
    );
    let neuron_split = split_neurons(config.reservoir.neurons, config.reservoir.pools);
    let n = config.input.dim;

    let evaluate = |point: usize| -> Vec<String> {
        let d = d_grid[point / eta_grid.len()];
        let eta = eta_grid[point % eta_grid.len()];
        let mut rng = stream_rng(opts.seed, point as u64);
        let masks: Vec<_> = neuron_split
            .iter()
            .map(|&neurons| match &config.reservoir.mask_values {
                Some(values) => nalgebra::DMatrix::from_row_slice(neurons, n, values),
                None => draw_mask(&mut rng, neurons, n, config.reservoir.mask_range),
            })
            .collect();
        let kernel = config.kernel_with(eta, gamma);
        let pool = uniform_pool(&kernel, d, &neuron_split, masks);

        let mut x0 = f64::NAN;
        let mut capacity = f64::NAN;
        let mut nmse_model = f64::NAN;
        let mut nmse_discrete = f64::NAN;
        let mut nmse_continuous = f64::NAN;
        let status = match analytic_point(&pool, &provider, &task, &config.model) {
            Ok(point_result) => {
                x0 = point_result.equilibria[0].x0;
                capacity = point_result.capacity;
                nmse_model = point_result.nmse;
                if mc_enabled {
                    match mc_point(
                        &pool,
                        &point_result.equilibria,
                        &input,
                        &task,
                        config.model.lambda,
                        &config.mc,
                        &mut rng,
                    ) {
                        Ok(mc) => {
                            nmse_discrete = mc.nmse_discrete;
                            nmse_continuous = mc.nmse_continuous;
                            PointStatus::Ok
                        }
                        Err(status) => status,
                    }
                } else {
                    PointStatus::Ok
                }
            }
            Err(status) => status,
        };

        vec![
            point.to_string(),
            fmt_f64(d),
            fmt_f64(eta),
            fmt_f64(gamma),
            config.reservoir.neurons.to_string(),
            config.reservoir.pools.to_string(),
            fmt_f64(config.model.lambda),
            config.model.taylor_order.to_string(),
            opts.seed.to_string(),
            fmt_f64(x0),
            fmt_f64(capacity),
            fmt_f64(nmse_model),
            fmt_f64(nmse_discrete),
            fmt_f64(nmse_continuous),
            status.flag(),
        ]
    };

    let total = d_grid.len() * eta_grid.len();
    let pool = thread_pool(opts.workers)?;
    let rows: Vec<Vec<String>> =
        pool.install(|| (0..total).into_par_iter().map(evaluate).collect());

    let failures = rows
        .iter()
        .filter(|r| r.last().is_some_and(|f| f.starts_with("error")))
        .count();
    write_csv(&opts.out, HEADER, &rows)?;
    enforce_failure_budget(failures, total)
}
