//! `capacity`: one-shot evaluation of the configured reservoir on the
//! configured task, analytic by default and with Monte Carlo columns on
//! request.

use crate::config::ExperimentConfig;
use crate::runner::{
    analytic_point, draw_mask, fmt_f64, mask_rng, mc_point, split_neurons, stream_rng,
    uniform_pool, PointStatus,
};

use super::{write_csv, CliFailure, RunOptions};

const HEADER: &[&str] = &[
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
    let eta = config.fixed_eta().map_err(CliFailure::Config)?;
    let gamma = config.fixed_gamma().map_err(CliFailure::Config)?;
    let d = config
        .reservoir
        .separation
        .ok_or_else(|| CliFailure::Config("reservoir.separation required".into()))?;
    let provider = config.moment_provider().map_err(CliFailure::Config)?;
    let input = config.input_spec().map_err(CliFailure::Config)?;
    let task = config.task_spec().map_err(CliFailure::Config)?;
    let mc_enabled = opts.mc.unwrap_or(false);

    let neuron_split = split_neurons(config.reservoir.neurons, config.reservoir.pools);
    let n = config.input.dim;
    let mut rng = stream_rng(opts.seed, 0);
    // Random masks come from the mask-seed-0 namespace, so a capacity run
    // reproduces an `optimize` row with mask_seed = 0 exactly.
    let masks: Vec<_> = neuron_split
        .iter()
        .enumerate()
        .map(|(j, &neurons)| match &config.reservoir.mask_values {
            Some(values) => nalgebra::DMatrix::from_row_slice(neurons, n, values),
            None => draw_mask(
                &mut mask_rng(opts.seed, 0, j),
                neurons,
                n,
                config.reservoir.mask_range,
            ),
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
        Ok(point) => {
            x0 = point.equilibria[0].x0;
            capacity = point.capacity;
            nmse_model = point.nmse;
            if mc_enabled {
                match mc_point(
                    &pool,
                    &point.equilibria,
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

    let row = vec![
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
    ];
    write_csv(&opts.out, HEADER, &[row])
}
