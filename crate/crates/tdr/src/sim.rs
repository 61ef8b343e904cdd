//! Ground-truth reservoir simulation: Gaussian input generation, masking,
//! the discrete-time layer recursion, fixed-step integration of the
//! underlying delay-differential equation, and parallel arrays.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, TdrError};
use crate::kernels::KernelSpec;

/// Single time-delay reservoir: `neurons` virtual neurons separated by
/// `separation` in time (so the delay is `neurons * separation`), driven
/// through the input mask (`neurons x input-dimension`).
#[derive(Debug, Clone)]
pub struct ReservoirConfig {
    pub neurons: usize,
    pub separation: f64,
    pub kernel: KernelSpec,
    pub mask: DMatrix<f64>,
}

impl ReservoirConfig {
    /// Per-neuron damping exponent `xi = log(1 + d)`.
    pub fn xi(&self) -> f64 {
        (1.0 + self.separation).ln()
    }

    /// `e^{-xi} = 1 / (1 + d)`, the inter-neuron coupling weight.
    pub fn decay(&self) -> f64 {
        1.0 / (1.0 + self.separation)
    }

    pub fn delay(&self) -> f64 {
        self.neurons as f64 * self.separation
    }

    pub fn input_dim(&self) -> usize {
        self.mask.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(TdrError::InvalidArgument(
                "reservoir needs at least one neuron".into(),
            ));
        }
        if !(self.separation > 0.0) {
            return Err(TdrError::InvalidArgument(format!(
                "neuron separation must be positive, got {}",
                self.separation
            )));
        }
        if self.mask.nrows() != self.neurons {
            return Err(TdrError::InvalidArgument(format!(
                "mask has {} rows for {} neurons",
                self.mask.nrows(),
                self.neurons
            )));
        }
        if self.mask.ncols() == 0 {
            return Err(TdrError::InvalidArgument(
                "mask needs at least one column".into(),
            ));
        }
        Ok(())
    }
}

/// Ordered pool of reservoirs fed the same input signal; states are stacked
/// in declaration order.
#[derive(Debug, Clone)]
pub struct ParallelConfig {
    pub reservoirs: Vec<ReservoirConfig>,
}

impl ParallelConfig {
    pub fn single(cfg: ReservoirConfig) -> Self {
        Self {
            reservoirs: vec![cfg],
        }
    }

    pub fn total_neurons(&self) -> usize {
        self.reservoirs.iter().map(|r| r.neurons).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.reservoirs.first().map_or(0, |r| r.input_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reservoirs.is_empty() {
            return Err(TdrError::InvalidArgument("parallel pool is empty".into()));
        }
        let n = self.input_dim();
        for (idx, r) in self.reservoirs.iter().enumerate() {
            r.validate()?;
            if r.input_dim() != n {
                return Err(TdrError::InvalidArgument(format!(
                    "reservoir {idx} expects input dimension {}, pool uses {n}",
                    r.input_dim()
                )));
            }
        }
        Ok(())
    }
}

/// IID centered Gaussian input with covariance `sigma_z`.
#[derive(Debug, Clone)]
pub struct InputSpec {
    pub sigma_z: DMatrix<f64>,
}

impl InputSpec {
    pub fn dim(&self) -> usize {
        self.sigma_z.nrows()
    }
}

/// Draws `t_len` IID samples from `N(0, sigma_z)` as the columns of an
/// `n x t_len` matrix. Deterministic for a given seed.
pub fn gen_input(spec: &InputSpec, t_len: usize, seed: u64) -> Result<DMatrix<f64>> {
    if t_len == 0 {
        return Err(TdrError::InvalidArgument(
            "input length must be at least 1".into(),
        ));
    }
    let factor = covariance_factor(&spec.sigma_z)?;
    let n = spec.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut z = DMatrix::zeros(n, t_len);
    let mut white = DVector::zeros(n);
    for t in 0..t_len {
        for w in white.iter_mut() {
            *w = StandardNormal.sample(&mut rng);
        }
        z.column_mut(t).copy_from(&(&factor * &white));
    }
    Ok(z)
}

/// Square root factor `F` with `F F^T = sigma`. Cholesky when the matrix is
/// positive definite, eigenvalue square root for the semi-definite boundary
/// (a zero covariance is legal input).
fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !crate::linalg::is_symmetric(sigma, 1e-10 * (1.0 + sigma.norm())) {
        return Err(TdrError::InvalidArgument(
            "input covariance must be symmetric".into(),
        ));
    }
    if let Some(chol) = sigma.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = sigma.clone().symmetric_eigen();
    let floor = -1e-10 * (1.0 + sigma.norm());
    let mut scaled = eig.eigenvectors.clone();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < floor {
            return Err(TdrError::InvalidArgument(format!(
                "input covariance has negative eigenvalue {lambda}"
            )));
        }
        let root = lambda.max(0.0).sqrt();
        scaled.column_mut(i).scale_mut(root);
    }
    Ok(scaled)
}

/// Discrete-time layer recursion
/// `x_i(t) = e^{-xi} x_{i-1}(t) + (1 - e^{-xi}) f(x_i(t-1), I_i(t))`
/// with `x_0(t) = x_N(t-1)`, over precomputed forcing columns.
fn run_discrete_map(
    neurons: usize,
    decay: f64,
    kernel: &dyn Fn(f64, f64) -> Result<f64>,
    forcing: &DMatrix<f64>,
    washout: usize,
    init: f64,
) -> Result<DMatrix<f64>> {
    let t_len = forcing.ncols();
    if washout >= t_len {
        return Err(TdrError::InvalidArgument(format!(
            "washout {washout} consumes the whole sample of length {t_len}"
        )));
    }
    let gain = 1.0 - decay;
    let mut prev = DVector::from_element(neurons, init);
    let mut current = DVector::zeros(neurons);
    let mut states = DMatrix::zeros(neurons, t_len - washout);
    for t in 0..t_len {
        let mut carry = prev[neurons - 1];
        for i in 0..neurons {
            let fed = kernel(prev[i], forcing[(i, t)])?;
            let value = decay * carry + gain * fed;
            if !value.is_finite() {
                return Err(TdrError::Divergence { step: t });
            }
            current[i] = value;
            carry = value;
        }
        std::mem::swap(&mut prev, &mut current);
        if t >= washout {
            states.column_mut(t - washout).copy_from(&prev);
        }
    }
    Ok(states)
}

/// Runs the discrete-time reservoir on the input sample `z` (`n x T`),
/// dropping the first `washout` layers. The initial layer is the constant
/// `init` when given (start inside the equilibrium basin) and zero otherwise.
pub fn run_discrete(
    cfg: &ReservoirConfig,
    z: &DMatrix<f64>,
    washout: usize,
    init: Option<f64>,
) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    if z.nrows() != cfg.input_dim() {
        return Err(TdrError::InvalidArgument(format!(
            "input has dimension {}, mask expects {}",
            z.nrows(),
            cfg.input_dim()
        )));
    }
    let forcing = &cfg.mask * z;
    let kernel = cfg.kernel.clone();
    run_discrete_map(
        cfg.neurons,
        cfg.decay(),
        &|x, i| kernel.eval(x, i),
        &forcing,
        washout,
        init.unwrap_or(0.0),
    )
}

/// Fixed-step explicit Euler integration of
/// `x'(s) = -x(s) + f(x(s - tau), I(s))` at step `h = d / oversample`, with
/// the forcing held constant on each neuron interval and a constant history.
/// Neuron `i` of layer `t` is the sample at `s = t tau - (N - i) d`.
fn run_continuous_map(
    neurons: usize,
    separation: f64,
    oversample: usize,
    kernel: &dyn Fn(f64, f64) -> Result<f64>,
    forcing: &DMatrix<f64>,
    washout: usize,
    init: f64,
) -> Result<DMatrix<f64>> {
    let t_len = forcing.ncols();
    if washout >= t_len {
        return Err(TdrError::InvalidArgument(format!(
            "washout {washout} consumes the whole sample of length {t_len}"
        )));
    }
    let h = separation / oversample as f64;
    let delay_steps = neurons * oversample;
    let total_steps = t_len * delay_steps;

    // Trajectory on the step grid, with `delay_steps` history samples in
    // front: index m + delay_steps holds x(m h).
    let mut path = vec![init; delay_steps + total_steps + 1];
    for m in 1..=total_steps {
        // Step (m-1) -> m integrates over (s_{m-1}, s_m], which belongs to
        // the neuron interval ending at s_m.
        let layer = (m - 1) / delay_steps;
        let offset = m - layer * delay_steps;
        let neuron = offset.div_ceil(oversample) - 1;
        let input = forcing[(neuron, layer)];
        let previous = path[delay_steps + m - 1];
        let delayed = path[m - 1];
        let value = previous + h * (-previous + kernel(delayed, input)?);
        if !value.is_finite() {
            return Err(TdrError::Divergence { step: layer });
        }
        path[delay_steps + m] = value;
    }

    let mut states = DMatrix::zeros(neurons, t_len - washout);
    for t in washout..t_len {
        for i in 0..neurons {
            let sample = (t + 1) * delay_steps - (neurons - 1 - i) * oversample;
            states[(i, t - washout)] = path[delay_steps + sample];
        }
    }
    Ok(states)
}

/// Continuous-time counterpart of [`run_discrete`]; `oversample` integration
/// steps per neuron separation (at least 2).
pub fn run_continuous(
    cfg: &ReservoirConfig,
    z: &DMatrix<f64>,
    oversample: usize,
    washout: usize,
    init: Option<f64>,
) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    if oversample < 2 {
        return Err(TdrError::InvalidArgument(
            "oversampling factor must be at least 2".into(),
        ));
    }
    if z.nrows() != cfg.input_dim() {
        return Err(TdrError::InvalidArgument(format!(
            "input has dimension {}, mask expects {}",
            z.nrows(),
            cfg.input_dim()
        )));
    }
    let forcing = &cfg.mask * z;
    let kernel = cfg.kernel.clone();
    run_continuous_map(
        cfg.neurons,
        cfg.separation,
        oversample,
        &|x, i| kernel.eval(x, i),
        &forcing,
        washout,
        init.unwrap_or(0.0),
    )
}

/// Runs every reservoir of the pool on the same input and stacks the state
/// matrices vertically in declaration order. `inits` supplies one starting
/// value per reservoir when present.
pub fn run_parallel(
    pcfg: &ParallelConfig,
    z: &DMatrix<f64>,
    washout: usize,
    inits: Option<&[f64]>,
) -> Result<DMatrix<f64>> {
    pcfg.validate()?;
    if let Some(values) = inits {
        if values.len() != pcfg.reservoirs.len() {
            return Err(TdrError::InvalidArgument(format!(
                "{} initial values for {} reservoirs",
                values.len(),
                pcfg.reservoirs.len()
            )));
        }
    }
    let t_out = z
        .ncols()
        .checked_sub(washout)
        .filter(|&t| t > 0)
        .ok_or_else(|| TdrError::InvalidArgument("washout consumes the whole sample".into()))?;
    let mut stacked = DMatrix::zeros(pcfg.total_neurons(), t_out);
    let mut offset = 0;
    for (idx, cfg) in pcfg.reservoirs.iter().enumerate() {
        let init = inits.map(|v| v[idx]);
        let states = run_discrete(cfg, z, washout, init)?;
        stacked
            .view_mut((offset, 0), (cfg.neurons, t_out))
            .copy_from(&states);
        offset += cfg.neurons;
    }
    Ok(stacked)
}
