//! Ridge readouts: the population-optimal affine readout and its
//! characteristic error / memory capacity, empirical moment estimators and
//! sample fits, the sampling distribution of the ridge estimator at fixed
//! design, and the finite-sample total error.
//!
//! Conventions fixed once: empirical moments use the `1/T` normalization and
//! the centering projector `A = I - (1/T) 1 1^T`, so the sample ridge
//! estimator reads `(X A X^T + lambda T I)^{-1} X A Y^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TdrError};
use crate::model::ModelMoments;
use crate::poly::MomentProvider;
use crate::tasks::{task_cross_covariance, task_mean, task_output_covariance, TaskSpec};

/// Affine readout `y ~ weights^T x + intercept` with its ridge constant.
#[derive(Debug, Clone)]
pub struct Readout {
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub lambda: f64,
}

impl Readout {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = self.weights.transpose() * x;
        for mut col in y.column_iter_mut() {
            col += &self.intercept;
        }
        y
    }
}

/// Characteristic error of the optimal readout on a task, with the capacity
/// normalization.
#[derive(Debug, Clone, Copy)]
pub struct CapacityReport {
    pub mse_char: f64,
    pub capacity: f64,
    pub trace_cov_yy: f64,
    pub nmse: f64,
}

/// First and second sample moments in the `1/T` convention.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub mu_x: DVector<f64>,
    pub mu_y: DVector<f64>,
    pub gamma0: DMatrix<f64>,
    pub cov_yy: DMatrix<f64>,
    pub cov_xy: DMatrix<f64>,
}

/// Conditional sampling moments of the ridge estimator at fixed design.
#[derive(Debug, Clone)]
pub struct RidgeSamplingMoments {
    pub bias_w: DMatrix<f64>,
    pub sigma_w_row: DMatrix<f64>,
    pub sigma_w_col: DMatrix<f64>,
    pub bias_a: DVector<f64>,
    pub sigma_a: DMatrix<f64>,
    pub sigma_wa: DMatrix<f64>,
}

/// Solves `(M + lambda I) W = rhs` with a symmetric positive-definite
/// factorization; one shot of diagonal jitter (`1e-12 trace / dim`) is
/// allowed before the system is declared singular.
fn spd_solve(m: &DMatrix<f64>, lambda: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = m.nrows();
    let mut shifted = m.clone();
    for i in 0..dim {
        shifted[(i, i)] += lambda;
    }
    if let Some(chol) = shifted.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    let jitter = 1e-12 * shifted.trace() / dim as f64;
    for i in 0..dim {
        shifted[(i, i)] += jitter;
    }
    match shifted.cholesky() {
        Some(chol) => Ok(chol.solve(rhs)),
        None => Err(TdrError::Singular(
            "ridge system is not positive definite; use lambda > 0".into(),
        )),
    }
}

/// Population ridge readout `W = (Gamma(0) + lambda I)^{-1} Cov(x, y)`,
/// `a = mu_y - W^T mu_x`.
pub fn ridge_solve(
    gamma0: &DMatrix<f64>,
    cov_xy: &DMatrix<f64>,
    mu_x: &DVector<f64>,
    mu_y: &DVector<f64>,
    lambda: f64,
) -> Result<Readout> {
    let n = gamma0.nrows();
    if gamma0.ncols() != n || cov_xy.nrows() != n || mu_x.len() != n || mu_y.len() != cov_xy.ncols()
    {
        return Err(TdrError::InvalidArgument(
            "ridge solve dimension mismatch".into(),
        ));
    }
    if lambda < 0.0 {
        return Err(TdrError::InvalidArgument(format!(
            "negative ridge constant {lambda}"
        )));
    }
    let weights = spd_solve(gamma0, lambda, cov_xy)?;
    let intercept = mu_y - weights.transpose() * mu_x;
    Ok(Readout {
        weights,
        intercept,
        lambda,
    })
}

/// Characteristic error from precomputed covariance pieces. Both algebraic
/// routes are evaluated — the compact quadratic form in the solved weights
/// and the expanded double-resolvent form — and must agree to roundoff
/// scale; their disagreement flags a numerically broken system.
pub fn capacity_from_parts(
    gamma0: &DMatrix<f64>,
    cov_xy: &DMatrix<f64>,
    trace_cov_yy: f64,
    lambda: f64,
) -> Result<CapacityReport> {
    if !(trace_cov_yy > 0.0) {
        return Err(TdrError::InvalidArgument(format!(
            "task output variance must be positive, got {trace_cov_yy}"
        )));
    }
    let n = gamma0.nrows();
    let zero = DVector::zeros(n);
    let zero_y = DVector::zeros(cov_xy.ncols());
    let readout = ridge_solve(gamma0, cov_xy, &zero, &zero_y, lambda)?;
    let w = &readout.weights;

    let mut shifted2 = gamma0.clone();
    for i in 0..n {
        shifted2[(i, i)] += 2.0 * lambda;
    }
    let mse_compact = trace_cov_yy - (w.transpose() * &shifted2 * w).trace();
    // Expanded route: cov_xy^T (G + l)^{-1} (G + 2l) (G + l)^{-1} cov_xy.
    let inner = spd_solve(gamma0, lambda, &(&shifted2 * w))?;
    let mse_expanded = trace_cov_yy - (cov_xy.transpose() * inner).trace();

    let scale = trace_cov_yy
        .max(mse_compact.abs())
        .max(mse_expanded.abs())
        .max(1.0);
    if (mse_compact - mse_expanded).abs() > 1e-10 * scale {
        return Err(TdrError::Numeric(format!(
            "characteristic error routes disagree: {mse_compact} vs {mse_expanded}"
        )));
    }

    let nmse = mse_compact / trace_cov_yy;
    Ok(CapacityReport {
        mse_char: mse_compact,
        capacity: 1.0 - nmse,
        trace_cov_yy,
        nmse,
    })
}

/// Characteristic error and memory capacity of a model on a task.
pub fn characteristic_error(
    model: &ModelMoments,
    task: &TaskSpec,
    provider: &MomentProvider,
    lambda: f64,
) -> Result<CapacityReport> {
    let (trace_cov_yy, _) = task_output_covariance(task, provider)?;
    let cov_xy = task_cross_covariance(task, model, provider)?;
    capacity_from_parts(&model.gamma0, &cov_xy, trace_cov_yy, lambda)
}

/// Population readout of a model on a task (weights and intercept).
pub fn model_readout(
    model: &ModelMoments,
    task: &TaskSpec,
    provider: &MomentProvider,
    lambda: f64,
) -> Result<Readout> {
    let cov_xy = task_cross_covariance(task, model, provider)?;
    let mu_y = task_mean(task, provider)?;
    ridge_solve(&model.gamma0, &cov_xy, &model.mu_x, &mu_y, lambda)
}

/// Sample moments with the `1/T` normalization: `mu = (1/T) X 1`,
/// `Gamma = (1/T) X A X^T` and likewise for the task block.
pub fn empirical_moments(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<EmpiricalMoments> {
    let t_len = x.ncols();
    if y.ncols() != t_len {
        return Err(TdrError::InvalidArgument(format!(
            "sample pair with {} and {} columns",
            t_len,
            y.ncols()
        )));
    }
    if t_len < 2 {
        return Err(TdrError::InvalidArgument(
            "need at least two sample columns".into(),
        ));
    }
    let t = t_len as f64;
    let mu_x = x.column_sum() / t;
    let mu_y = y.column_sum() / t;
    let xc = center(x, &mu_x);
    let yc = center(y, &mu_y);
    Ok(EmpiricalMoments {
        gamma0: &xc * xc.transpose() / t,
        cov_yy: &yc * yc.transpose() / t,
        cov_xy: &xc * yc.transpose() / t,
        mu_x,
        mu_y,
    })
}

fn center(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col -= mean;
    }
    out
}

/// Finite-sample ridge fit `(X A X^T + lambda T I)^{-1} X A Y^T` with the
/// matching intercept.
pub fn ridge_fit_samples(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<Readout> {
    let moments = empirical_moments(x, y)?;
    ridge_solve(
        &moments.gamma0,
        &moments.cov_xy,
        &moments.mu_x,
        &moments.mu_y,
        lambda,
    )
}

/// Mean squared prediction error of a readout on a sample pair.
pub fn sample_mse(readout: &Readout, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let diff = readout.predict(x) - y;
    diff.norm_squared() / x.ncols() as f64
}

/// Conditional distribution of the sample ridge estimator around the
/// population readout `w_lambda`, for noise covariance `sigma_eps_q`: bias
/// and row/column covariance of the weights, bias and covariance of the
/// intercept, and their cross covariance.
pub fn ridge_sampling_moments(
    x: &DMatrix<f64>,
    lambda: f64,
    w_lambda: &DMatrix<f64>,
    sigma_eps_q: &DMatrix<f64>,
) -> Result<RidgeSamplingMoments> {
    let n = x.nrows();
    let t_len = x.ncols();
    let q = w_lambda.ncols();
    if w_lambda.nrows() != n || sigma_eps_q.nrows() != q || sigma_eps_q.ncols() != q {
        return Err(TdrError::InvalidArgument(
            "sampling moment dimension mismatch".into(),
        ));
    }
    let t = t_len as f64;
    let mu_x = x.column_sum() / t;
    let xc = center(x, &mu_x);
    let xaxt = &xc * xc.transpose();
    // R = (X A X^T + lambda T I)^{-1}, materialized because the moment
    // formulas need explicit products with it.
    let mut shifted = xaxt.clone();
    for i in 0..n {
        shifted[(i, i)] += lambda * t;
    }
    let resolvent = shifted
        .cholesky()
        .ok_or_else(|| {
            TdrError::Singular("centered design Gram matrix is singular; use lambda > 0".into())
        })?
        .inverse();

    let shrink = DMatrix::identity(n, n) - &resolvent * lambda * t;
    let bias_w = -(&resolvent * w_lambda) * (lambda * t);
    let sigma_w_row = &shrink * &resolvent;
    let sigma_w_col = sigma_eps_q.clone();

    let row_sums = x * DVector::from_element(t_len, 1.0);
    let bias_a = (w_lambda.transpose() * &resolvent * &row_sums) * lambda;
    let quad = (row_sums.transpose() * &sigma_w_row * &row_sums)[(0, 0)];
    let sigma_a = sigma_eps_q * ((1.0 + quad / t) / t);

    let shrunk_w = &shrink * w_lambda;
    let first = vec_col(&shrunk_w) * (row_sums.transpose() * &shrunk_w);
    let second = sigma_eps_q.kronecker(&(&shrink * &resolvent * &row_sums));
    let sigma_wa = (first - second) / t;

    Ok(RidgeSamplingMoments {
        bias_w,
        sigma_w_row,
        sigma_w_col,
        bias_a,
        sigma_a,
        sigma_wa,
    })
}

fn vec_col(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.len(), 1, m.as_slice())
}

/// Total (characteristic + estimation) error conditional on the design
/// sample, from explicit population moments:
///
/// `MSE_char + (1/T) tr(S) + tr(S) tr((I - lTR) R Q) + l^2 T^2 tr(W^T R Q R W)
///  + 2 l^2 T tr(W^T R W)`
///
/// with `R` the sample resolvent, `S` the regression noise covariance and
/// `Q = Gamma(0) + mu mu^T + (1/T^2)(X1)(X1)^T - (2/T) mu (X1)^T`.
pub fn total_error_with(
    gamma0: &DMatrix<f64>,
    mu_x: &DVector<f64>,
    cov_xy: &DMatrix<f64>,
    trace_cov_yy: f64,
    sigma_eps_q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    let n = gamma0.nrows();
    if x.nrows() != n {
        return Err(TdrError::InvalidArgument(format!(
            "design sample has {} rows, moments {n}",
            x.nrows()
        )));
    }
    let t = x.ncols() as f64;
    let report = capacity_from_parts(gamma0, cov_xy, trace_cov_yy, lambda)?;
    let zero = DVector::zeros(n);
    let zero_y = DVector::zeros(cov_xy.ncols());
    let w_lambda = ridge_solve(gamma0, cov_xy, &zero, &zero_y, lambda)?.weights;

    let sample_mu = x.column_sum() / t;
    let xc = center(x, &sample_mu);
    let mut shifted = &xc * xc.transpose();
    for i in 0..n {
        shifted[(i, i)] += lambda * t;
    }
    let resolvent = shifted
        .cholesky()
        .ok_or_else(|| {
            TdrError::Singular("centered design Gram matrix is singular; use lambda > 0".into())
        })?
        .inverse();

    let row_sums = x * DVector::from_element(x.ncols(), 1.0);
    let q_matrix = gamma0 + mu_x * mu_x.transpose() + (&row_sums * row_sums.transpose()) / (t * t)
        - (mu_x * row_sums.transpose()) * (2.0 / t);

    let shrink = DMatrix::identity(n, n) - &resolvent * lambda * t;
    let trace_noise = sigma_eps_q.trace();
    let term_sampling = trace_noise / t;
    let term_design = trace_noise * (&shrink * &resolvent * &q_matrix).trace();
    let term_bias = lambda
        * lambda
        * t
        * t
        * (w_lambda.transpose() * &resolvent * &q_matrix * &resolvent * &w_lambda).trace();
    let term_shrink =
        2.0 * lambda * lambda * t * (w_lambda.transpose() * &resolvent * &w_lambda).trace();

    Ok(report.mse_char + term_sampling + term_design + term_bias + term_shrink)
}

/// Total error of a model/task pair conditional on a state sample. The
/// regression noise covariance is the residual covariance of the
/// unregularized population readout, `Cov(y,y) - W_0^T Gamma(0) W_0`.
pub fn total_error(
    model: &ModelMoments,
    task: &TaskSpec,
    provider: &MomentProvider,
    x: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    let (trace_cov_yy, cov_yy) = task_output_covariance(task, provider)?;
    let cov_xy = task_cross_covariance(task, model, provider)?;
    let n = model.state_dim();
    let zero = DVector::zeros(n);
    let zero_y = DVector::zeros(cov_xy.ncols());
    let w0 = ridge_solve(&model.gamma0, &cov_xy, &zero, &zero_y, 0.0)?.weights;
    let sigma_eps_q = cov_yy - w0.transpose() * &model.gamma0 * &w0;
    total_error_with(
        &model.gamma0,
        &model.mu_x,
        &cov_xy,
        trace_cov_yy,
        &sigma_eps_q,
        x,
        lambda,
    )
}

/// Fully-empirical approximation of the characteristic and total errors from
/// one sample pair: every population moment is replaced by its `1/T`
/// estimator and the noise trace by the approximate characteristic error.
pub fn total_error_approx(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<(f64, f64)> {
    let t_len = x.ncols();
    if y.ncols() != t_len || t_len < 2 {
        return Err(TdrError::InvalidArgument(
            "sample pair shape mismatch".into(),
        ));
    }
    let n = x.nrows();
    let t = t_len as f64;
    let mu_x = x.column_sum() / t;
    let mu_y = y.column_sum() / t;
    let xc = center(x, &mu_x);
    let yc = center(y, &mu_y);
    let xaxt = &xc * xc.transpose();
    let xayt = &xc * yc.transpose();
    let yayt = &yc * yc.transpose();

    let mut shifted = xaxt.clone();
    for i in 0..n {
        shifted[(i, i)] += lambda * t;
    }
    let resolvent = shifted
        .cholesky()
        .ok_or_else(|| {
            TdrError::Singular("centered design Gram matrix is singular; use lambda > 0".into())
        })?
        .inverse();
    let identity = DMatrix::identity(n, n);

    let mse_char = (yayt.trace()
        - (xayt.transpose() * (&identity + &resolvent * (lambda * t)) * &resolvent * &xayt)
            .trace())
        / t;

    let shrink = &identity - &resolvent * (lambda * t);
    let design = (&shrink * &resolvent * &xaxt).trace();
    let curvature = (xayt.transpose()
        * &resolvent
        * &resolvent
        * (&identity * 3.0 - &resolvent * (lambda * t))
        * &resolvent
        * &xayt)
        .trace();
    let total = mse_char + (mse_char / t) * (1.0 + design) + lambda * lambda * t * curvature;
    Ok((mse_char, total))
}
