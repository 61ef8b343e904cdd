//! `optimize`: exhaustive grid search over `(d, eta, gamma)` and a small set
//! of candidate masks, maximizing the analytic capacity of the configured
//! task; one best row per pool/neuron configuration.

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::runner::{analytic_point, draw_mask, fmt_f64, mask_rng, split_neurons, uniform_pool};

use super::{linspace, thread_pool, write_csv, CliFailure, RunOptions};

const HEADER: &[&str] = &[
    "pool_size",
    "neurons",
    "d",
    "eta",
    "gamma",
    "mask_seed",
    "capacity",
    "nmse",
    "seed",
    "lambda",
    "taylor_order",
    "points_total",
    "points_feasible",
];

pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<(), CliFailure> {
    let provider = config.moment_provider().map_err(CliFailure::Config)?;
    let task = config.task_spec().map_err(CliFailure::Config)?;
    let section = &config.optimize;
    let n = config.input.dim;

    let d_grid = linspace(section.d_min, section.d_max, section.d_points.max(1));
    let eta_grid = linspace(section.eta_min, section.eta_max, section.eta_points.max(1));
    let gamma_grid = linspace(
        section.gamma_min,
        section.gamma_max,
        section.gamma_points.max(1),
    );
    let mask_draws = section.mask_draws.max(1);

    let pools = section
        .pools
        .clone()
        .unwrap_or_else(|| vec![config.reservoir.pools]);
    let neurons = section
        .neurons
        .clone()
        .unwrap_or_else(|| vec![config.reservoir.neurons]);

    let worker_pool = thread_pool(opts.workers)?;
    let mut rows = Vec::new();
    for &pool_size in &pools {
        for &neurons_total in &neurons {
            let neuron_split = split_neurons(neurons_total, pool_size);
            // Candidate masks are independent of the swept parameters, so
            // the winning mask_seed reproduces them exactly.
            let mask_sets: Vec<Vec<nalgebra::DMatrix<f64>>> = (0..mask_draws)
                .map(|seed| {
                    (0..pool_size)
                        .map(|j| {
                            let mut rng = mask_rng(opts.seed, seed as u64, j);
                            draw_mask(&mut rng, neuron_split[j], n, config.reservoir.mask_range)
                        })
                        .collect()
                })
                .collect();

            let per_point = eta_grid.len() * gamma_grid.len() * mask_draws;
            let total = d_grid.len() * per_point;
            let evaluate = |idx: usize| -> Option<(usize, f64, f64)> {
                let d = d_grid[idx / per_point];
                let rest = idx % per_point;
                let eta = eta_grid[rest / (gamma_grid.len() * mask_draws)];
                let rest = rest % (gamma_grid.len() * mask_draws);
                let gamma = gamma_grid[rest / mask_draws];
                let mask_seed = rest % mask_draws;
                let kernel = config.kernel_with(eta, gamma);
                let pool = uniform_pool(&kernel, d, &neuron_split, mask_sets[mask_seed].clone());
                analytic_point(&pool, &provider, &task, &config.model)
                    .ok()
                    .map(|point| (idx, point.capacity, point.nmse))
            };

            let candidates: Vec<Option<(usize, f64, f64)>> =
                worker_pool.install(|| (0..total).into_par_iter().map(evaluate).collect());
            let feasible = candidates.iter().flatten().count();
            let best = pick_best(candidates.iter().flatten().copied());

            let Some((idx, capacity, nmse)) = best else {
                return Err(CliFailure::Infeasible(format!(
                    "no stable configuration for pool_size={pool_size}, neurons={neurons_total} \
                     over {total} grid points"
                )));
            };
            let d = d_grid[idx / per_point];
            let rest = idx % per_point;
            let eta = eta_grid[rest / (gamma_grid.len() * mask_draws)];
            let rest = rest % (gamma_grid.len() * mask_draws);
            let gamma = gamma_grid[rest / mask_draws];
            let mask_seed = rest % mask_draws;

            rows.push(vec![
                pool_size.to_string(),
                neurons_total.to_string(),
                fmt_f64(d),
                fmt_f64(eta),
                fmt_f64(gamma),
                mask_seed.to_string(),
                fmt_f64(capacity),
                fmt_f64(nmse),
                opts.seed.to_string(),
                fmt_f64(config.model.lambda),
                config.model.taylor_order.to_string(),
                total.to_string(),
                feasible.to_string(),
            ]);
        }
    }

    write_csv(&opts.out, HEADER, &rows)
}

/// Largest capacity wins; ties resolve toward the earliest grid index,
/// which iterates d, then eta, then gamma, then mask seed, all ascending.
fn pick_best(candidates: impl Iterator<Item = (usize, f64, f64)>) -> Option<(usize, f64, f64)> {
    candidates.fold(None, |acc, (idx, cap, nmse)| match acc {
        Some((best_idx, best_cap, _)) if cap < best_cap || (cap == best_cap && idx > best_idx) => {
            acc
        }
        _ => Some((idx, cap, nmse)),
    })
}
