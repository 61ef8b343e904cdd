//! Memory tasks over the lagged input vector
//! `z^h(t) = vec(z(t), z(t-1), .., z(t-h))`: target-series generation for
//! simulation and the analytic covariances `Cov(y, y)` and `Cov(X, y)` the
//! capacity formula needs.
//!
//! Linear tasks read `y(t) = L^T z^h(t)`; quadratic tasks read
//! `y(t) = Q vech(z^h(t) z^h(t)^T)`. All expectations exploit that the input
//! is IID in time with mean zero: moments factorize across distinct lags and
//! stray odd factors vanish.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TdrError};
use crate::linalg::vech_inverse_index;
use crate::model::ModelMoments;
use crate::poly::{MomentCache, MomentProvider, MultiPoly};

/// A `q`-dimensional memory task with `lags + 1` active time slices.
#[derive(Debug, Clone)]
pub enum TaskSpec {
    /// `y(t) = matrix^T z^h(t)`, with `matrix` of size `(h+1) n x q`.
    Linear { matrix: DMatrix<f64>, lags: usize },
    /// `y(t) = matrix vech(z^h(t) z^h(t)^T)`, with `matrix` of size
    /// `q x (h+1)n ((h+1)n + 1)/2`.
    Quadratic { matrix: DMatrix<f64>, lags: usize },
}

impl TaskSpec {
    pub fn lags(&self) -> usize {
        match self {
            Self::Linear { lags, .. } | Self::Quadratic { lags, .. } => *lags,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Self::Linear { matrix, .. } => matrix.ncols(),
            Self::Quadratic { matrix, .. } => matrix.nrows(),
        }
    }

    /// Polynomial degree of the task in the input variables.
    pub fn degree(&self) -> usize {
        match self {
            Self::Linear { .. } => 1,
            Self::Quadratic { .. } => 2,
        }
    }

    /// Input dimension implied by the matrix shape and lag count.
    pub fn input_dim(&self) -> Result<usize> {
        let lags = self.lags();
        let slots = match self {
            Self::Linear { matrix, .. } => matrix.nrows(),
            Self::Quadratic { matrix, .. } => {
                // ncols = m (m + 1) / 2 for m = (h+1) n.
                let ncols = matrix.ncols();
                let m = ((((8 * ncols + 1) as f64).sqrt() as usize) - 1) / 2;
                if m * (m + 1) / 2 != ncols {
                    return Err(TdrError::InvalidArgument(format!(
                        "quadratic task with {ncols} columns is not a vech length"
                    )));
                }
                m
            }
        };
        if slots == 0 || slots % (lags + 1) != 0 {
            return Err(TdrError::InvalidArgument(format!(
                "task with {slots} slots cannot split into {} lag blocks",
                lags + 1
            )));
        }
        Ok(slots / (lags + 1))
    }
}

/// Quadratic task whose kernel matrix is block-diagonal over lags, block `l`
/// being `weights[l]` times the all-ones matrix: the weighted sum over lags
/// of `sum_{i,j} z_i(t-l) z_j(t-l)`.
pub fn diag_quadratic_task(lags: usize, n: usize, weights: &[f64]) -> Result<TaskSpec> {
    if weights.len() != lags + 1 {
        return Err(TdrError::InvalidArgument(format!(
            "{} weights for {} lag blocks",
            weights.len(),
            lags + 1
        )));
    }
    if n == 0 {
        return Err(TdrError::InvalidArgument(
            "input dimension must be positive".into(),
        ));
    }
    let m = (lags + 1) * n;
    let len = m * (m + 1) / 2;
    // Row vector of vec(Q*)^T D_m without materializing the duplication
    // matrix: the vech slot (a, b) collects Q*_ab + Q*_ba off the diagonal.
    let mut matrix = DMatrix::zeros(1, len);
    for k in 0..len {
        let (a, b) = vech_inverse_index(k, m)?;
        if a / n == b / n {
            let w = weights[a / n];
            matrix[(0, k)] = if a == b { w } else { 2.0 * w };
        }
    }
    Ok(TaskSpec::Quadratic { matrix, lags })
}

/// Teaching signal aligned with the simulated state columns: column `t` of
/// the output corresponds to input column `washout + t`, so it needs
/// `washout >= lags` to have a full history.
pub fn target_series(task: &TaskSpec, z: &DMatrix<f64>, washout: usize) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    if task.input_dim()? != n {
        return Err(TdrError::InvalidArgument(format!(
            "task expects input dimension {}, sample has {n}",
            task.input_dim()?
        )));
    }
    let lags = task.lags();
    let t_len = z.ncols();
    if washout < lags || washout >= t_len {
        return Err(TdrError::InvalidArgument(format!(
            "need lags <= washout < sample length, got lags={lags}, washout={washout}, T={t_len}"
        )));
    }
    let q = task.output_dim();
    let slots = (lags + 1) * n;
    let mut lagged = DVector::zeros(slots);
    let mut y = DMatrix::zeros(q, t_len - washout);
    for t in washout..t_len {
        for l in 0..=lags {
            for m in 0..n {
                lagged[l * n + m] = z[(m, t - l)];
            }
        }
        match task {
            TaskSpec::Linear { matrix, .. } => {
                y.column_mut(t - washout)
                    .copy_from(&(matrix.transpose() * &lagged));
            }
            TaskSpec::Quadratic { matrix, .. } => {
                let mut vech_outer = DVector::zeros(matrix.ncols());
                let mut k = 0;
                for b in 0..slots {
                    for a in b..slots {
                        vech_outer[k] = lagged[a] * lagged[b];
                        k += 1;
                    }
                }
                y.column_mut(t - washout).copy_from(&(matrix * vech_outer));
            }
        }
    }
    Ok(y)
}

/// Monomial in the doubly-indexed variables `z_m(t - l)`, stored as one
/// exponent vector per lag. Its expectation under an IID input factorizes
/// into a product of per-lag moments.
#[derive(Debug, Clone)]
pub struct LaggedMonomial {
    n_vars: usize,
    per_lag: BTreeMap<usize, Vec<usize>>,
}

impl LaggedMonomial {
    pub fn one(n_vars: usize) -> Self {
        Self {
            n_vars,
            per_lag: BTreeMap::new(),
        }
    }

    pub fn times_var(mut self, lag: usize, var: usize) -> Self {
        assert!(var < self.n_vars);
        self.per_lag
            .entry(lag)
            .or_insert_with(|| vec![0; self.n_vars])[var] += 1;
        self
    }

    fn moment(&self, cache: &mut MomentCache) -> Result<f64> {
        let mut product = 1.0;
        for exps in self.per_lag.values() {
            product *= cache.moment(exps)?;
            if product == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(product)
    }
}

/// `E[eps(t - eps_lag) * monomial]` for an innovation with polynomial
/// `eps_poly` in `z(t - eps_lag)`: factors sharing the innovation's lag are
/// multiplied into the polynomial, every other lag contributes a standalone
/// moment factor.
pub fn innovation_cross_moment(
    eps_poly: &MultiPoly,
    eps_lag: usize,
    monomial: &LaggedMonomial,
    provider: &MomentProvider,
) -> Result<f64> {
    let mut cache = MomentCache::new(provider);
    innovation_cross_moment_cached(eps_poly, eps_lag, monomial, &mut cache)
}

fn innovation_cross_moment_cached(
    eps_poly: &MultiPoly,
    eps_lag: usize,
    monomial: &LaggedMonomial,
    cache: &mut MomentCache,
) -> Result<f64> {
    let mut colocated = eps_poly.clone();
    let mut standalone = 1.0;
    for (&lag, exps) in &monomial.per_lag {
        if lag == eps_lag {
            colocated = colocated.mul_monomial(exps);
        } else {
            standalone *= cache.moment(exps)?;
        }
    }
    if standalone == 0.0 {
        return Ok(0.0);
    }
    Ok(standalone * cache.expectation(&colocated)?)
}

/// `E[y(t)]` under the provider's input law (zero for linear tasks).
pub fn task_mean(task: &TaskSpec, provider: &MomentProvider) -> Result<DVector<f64>> {
    check_task_provider(task, provider, task.degree())?;
    let n = task.input_dim()?;
    match task {
        TaskSpec::Linear { matrix, .. } => Ok(DVector::zeros(matrix.ncols())),
        TaskSpec::Quadratic { matrix, lags } => {
            let mut cache = MomentCache::new(provider);
            let slots = (lags + 1) * n;
            let mut slot_means = DVector::zeros(matrix.ncols());
            for k in 0..matrix.ncols() {
                let (a, b) = vech_inverse_index(k, slots)?;
                slot_means[k] = LaggedMonomial::one(n)
                    .times_var(a / n, a % n)
                    .times_var(b / n, b % n)
                    .moment(&mut cache)?;
            }
            Ok(matrix * slot_means)
        }
    }
}

/// Full `q x q` output covariance together with its trace (the capacity
/// normalizer).
pub fn task_output_covariance(
    task: &TaskSpec,
    provider: &MomentProvider,
) -> Result<(f64, DMatrix<f64>)> {
    check_task_provider(task, provider, 2 * task.degree())?;
    let n = task.input_dim()?;
    let mut cache = MomentCache::new(provider);
    let cov = match task {
        TaskSpec::Linear { matrix, lags } => {
            // Block-diagonal lagged covariance: sum over lags of
            // L_l^T Sigma_z L_l.
            let mut sigma_z = DMatrix::zeros(n, n);
            for u in 0..n {
                for v in 0..n {
                    sigma_z[(u, v)] = LaggedMonomial::one(n)
                        .times_var(0, u)
                        .times_var(0, v)
                        .moment(&mut cache)?;
                }
            }
            let q = matrix.ncols();
            let mut cov = DMatrix::zeros(q, q);
            for l in 0..=*lags {
                let block = matrix.rows(l * n, n);
                cov += block.transpose() * &sigma_z * block;
            }
            cov
        }
        TaskSpec::Quadratic { matrix, lags } => {
            let slots = (lags + 1) * n;
            let len = matrix.ncols();
            let decode = |k: usize| -> Result<(usize, usize, usize, usize)> {
                let (a, b) = vech_inverse_index(k, slots)?;
                Ok((a / n, a % n, b / n, b % n))
            };
            let mut second = DMatrix::zeros(len, len);
            let mut first = DVector::zeros(len);
            for i in 0..len {
                let (la, ma, lb, mb) = decode(i)?;
                first[i] = LaggedMonomial::one(n)
                    .times_var(la, ma)
                    .times_var(lb, mb)
                    .moment(&mut cache)?;
                for j in i..len {
                    let (lc, mc, ld, md) = decode(j)?;
                    let m4 = LaggedMonomial::one(n)
                        .times_var(la, ma)
                        .times_var(lb, mb)
                        .times_var(lc, mc)
                        .times_var(ld, md)
                        .moment(&mut cache)?;
                    second[(i, j)] = m4;
                    second[(j, i)] = m4;
                }
            }
            let mean = matrix * first;
            matrix * second * matrix.transpose() - &mean * mean.transpose()
        }
    };
    Ok((cov.trace(), cov))
}

/// `Cov(X(t), y(t))` between the VAR(1) state and the task output, through
/// the moving-average representation: lag `s` of the task couples to the
/// innovations through `Psi_s = A^s`, and only innovation/input factors at
/// the same time slice survive the IID factorization.
pub fn task_cross_covariance(
    task: &TaskSpec,
    model: &ModelMoments,
    provider: &MomentProvider,
) -> Result<DMatrix<f64>> {
    check_task_provider(task, provider, model.taylor_order + 2 * task.degree())?;
    let n = task.input_dim()?;
    if n != model.input_dim() {
        return Err(TdrError::InvalidArgument(format!(
            "task input dimension {n} does not match model input dimension {}",
            model.input_dim()
        )));
    }
    let state_dim = model.state_dim();
    let q = task.output_dim();
    let mut cache = MomentCache::new(provider);
    // The dropped MA tail is below the Psi truncation tolerance.
    let horizon = task.lags().min(model.psi_len.saturating_sub(1));

    let mut cov = DMatrix::zeros(state_dim, q);
    match task {
        TaskSpec::Linear { matrix, .. } => {
            // Lag-independent innovation/input couplings E[eps_u z_v].
            let mut eps_z = DMatrix::zeros(state_dim, n);
            for (u, poly) in model.eps_polys.iter().enumerate() {
                for v in 0..n {
                    let monomial = LaggedMonomial::one(n).times_var(0, v);
                    eps_z[(u, v)] = innovation_cross_moment_cached(poly, 0, &monomial, &mut cache)?;
                }
            }
            let mut psi = DMatrix::identity(state_dim, state_dim);
            for s in 0..=horizon {
                let block = matrix.rows(s * n, n);
                cov += &psi * &eps_z * block;
                if s < horizon {
                    psi = &model.a * psi;
                }
            }
        }
        TaskSpec::Quadratic { matrix, lags } => {
            let slots = (*lags + 1) * n;
            // E[eps_u z_a z_b] - mu_u E[z_a z_b], all at one time slice.
            let mut coupling = vec![DMatrix::zeros(n, n); state_dim];
            for (u, poly) in model.eps_polys.iter().enumerate() {
                for a in 0..n {
                    for b in 0..n {
                        let monomial = LaggedMonomial::one(n).times_var(0, a).times_var(0, b);
                        let raw = innovation_cross_moment_cached(poly, 0, &monomial, &mut cache)?;
                        let pair = LaggedMonomial::one(n)
                            .times_var(0, a)
                            .times_var(0, b)
                            .moment(&mut cache)?;
                        coupling[u][(a, b)] = raw - model.mu_eps[u] * pair;
                    }
                }
            }
            // Collect the task weights of co-located slot pairs per lag.
            let mut lag_terms = vec![DMatrix::zeros(state_dim, q); horizon + 1];
            for k in 0..matrix.ncols() {
                let (a, b) = vech_inverse_index(k, slots)?;
                let (la, lb) = (a / n, b / n);
                if la != lb || la > horizon {
                    continue;
                }
                let (ma, mb) = (a % n, b % n);
                for j in 0..q {
                    let w = matrix[(j, k)];
                    if w == 0.0 {
                        continue;
                    }
                    for u in 0..state_dim {
                        lag_terms[la][(u, j)] += w * coupling[u][(ma, mb)];
                    }
                }
            }
            let mut psi = DMatrix::identity(state_dim, state_dim);
            for (s, term) in lag_terms.iter().enumerate() {
                cov += &psi * term;
                if s < horizon {
                    psi = &model.a * psi;
                }
            }
        }
    }
    Ok(cov)
}

fn check_task_provider(task: &TaskSpec, provider: &MomentProvider, needed: usize) -> Result<()> {
    provider.require_order(needed)?;
    if provider.n_vars() != task.input_dim()? {
        return Err(TdrError::InvalidArgument(format!(
            "provider covers {} variables, task needs {}",
            provider.n_vars(),
            task.input_dim()?
        )));
    }
    if !provider.is_centered()? {
        return Err(TdrError::InvalidArgument(
            "task moments require a centered input law".into(),
        ));
    }
    Ok(())
}
