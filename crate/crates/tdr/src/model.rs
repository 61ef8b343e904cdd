//! The approximating VAR(1) model of a (parallel) time-delay reservoir.
//!
//! Around a stable equilibrium the layer recursion is partially linearized
//! in the delayed self-feedback while the input injection is kept nonlinear
//! through a Taylor expansion of fixed order. The result is
//! `x(t) = F0 + A (x(t-1) - x0) + eps(t)` with polynomially driven IID
//! innovations, whose first and second moments — and with them the whole
//! stationary law of the state — are computable in closed form from the
//! input moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TdrError};
use crate::kernels::Equilibrium;
use crate::linalg::{block_diag, spectral_radius, stein_solve};
use crate::poly::{MomentCache, MomentProvider, MultiPoly};
use crate::sim::{ParallelConfig, ReservoirConfig};

/// Cap on the number of moving-average coefficients kept when the spectrum
/// hugs the unit circle.
pub const PSI_TERM_CAP: usize = 10_000;

const PSI_RTOL: f64 = 1e-12;

/// Everything the capacity formulas need from the VAR(1) approximation of a
/// reservoir pool: connectivity, innovation moments, stationary mean and
/// covariance, the moving-average horizon, and the innovation polynomials
/// themselves (one per state row, prefactor included).
#[derive(Debug, Clone)]
pub struct ModelMoments {
    pub a: DMatrix<f64>,
    pub mu_eps: DVector<f64>,
    pub sigma_eps: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub gamma0: DMatrix<f64>,
    /// Number of moving-average coefficients `Psi_j = A^j` (starting at
    /// `Psi_0 = I`) before the tail norm drops below tolerance.
    pub psi_len: usize,
    pub taylor_order: usize,
    pub eps_polys: Vec<MultiPoly>,
    block_dims: Vec<usize>,
}

impl ModelMoments {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.eps_polys.first().map_or(0, |p| p.n_vars())
    }

    /// Per-reservoir block sizes of the pool, in declaration order.
    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// The first `count` moving-average coefficients `I, A, A^2, ..`.
    pub fn psi_matrices(&self, count: usize) -> Vec<DMatrix<f64>> {
        let n = self.state_dim();
        let mut out = Vec::with_capacity(count);
        let mut power = DMatrix::identity(n, n);
        for _ in 0..count {
            out.push(power.clone());
            power = &self.a * power;
        }
        out
    }

    /// Autocovariance at lag `k >= 0`: `Gamma(k) = A^k Gamma(0)`.
    pub fn autocovariance(&self, lag: usize) -> DMatrix<f64> {
        let mut gamma = self.gamma0.clone();
        for _ in 0..lag {
            gamma = &self.a * gamma;
        }
        gamma
    }
}

/// State Jacobian of the single-reservoir layer map at the fixed point
/// `x0 i_N`: lower-triangular geometric cascade of `Phi` plus the wrap-around
/// last column, with `Phi = (1 - e^{-xi}) df/dx(x0, 0)`.
pub fn connectivity_matrix(cfg: &ReservoirConfig, x0: f64) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let slope = cfg.kernel.state_derivative(x0)?;
    Ok(connectivity_from_parts(cfg.neurons, cfg.xi(), slope))
}

/// Connectivity structure from raw parts (`xi`, kernel slope at the fixed
/// point): `Phi e^{-(i-j) xi}` on the lower triangle and the layer
/// wrap-around `e^{-(i+1) xi}` added to the last column.
pub fn connectivity_from_parts(neurons: usize, xi: f64, slope: f64) -> DMatrix<f64> {
    let decay = (-xi).exp();
    let phi = (1.0 - decay) * slope;
    let mut a = DMatrix::zeros(neurons, neurons);
    for i in 0..neurons {
        for j in 0..=i {
            a[(i, j)] = phi * (-(i as f64 - j as f64) * xi).exp();
        }
        a[(i, neurons - 1)] += (-(i as f64 + 1.0) * xi).exp();
    }
    a
}

/// Input-expansion polynomial of neuron `neuron` (0-based): the order-`order`
/// Taylor polynomial in `z` of the accumulated input nonlinearity
/// `sum_{j <= neuron} e^{-(neuron - j) xi} [f(x0, (C z)_j) - f(x0, 0)]`
/// divided by the per-neuron gain `(1 - e^{-xi})`.
pub fn input_expansion_polynomial(
    cfg: &ReservoirConfig,
    x0: f64,
    neuron: usize,
    order: usize,
) -> Result<MultiPoly> {
    if neuron >= cfg.neurons {
        return Err(TdrError::InvalidArgument(format!(
            "neuron {neuron} out of range for {} neurons",
            cfg.neurons
        )));
    }
    let n_vars = cfg.input_dim();
    let mut poly = MultiPoly::zero(n_vars);
    if order == 0 {
        return Ok(poly);
    }
    let derivs = cfg.kernel.input_derivatives(x0, order)?;
    let xi = cfg.xi();
    let mut exps = vec![0usize; n_vars];
    for j in 0..=neuron {
        let weight = (-((neuron - j) as f64) * xi).exp();
        for (i, &deriv) in derivs.iter().enumerate() {
            if deriv == 0.0 {
                continue;
            }
            for_each_composition(i + 1, n_vars, &mut exps, &mut |k: &[usize]| {
                let mut coeff = weight * deriv;
                for &ks in k {
                    for f in 1..=ks {
                        coeff /= f as f64;
                    }
                }
                let mut mask_product = 1.0;
                for (s, &ks) in k.iter().enumerate() {
                    mask_product *= cfg.mask[(j, s)].powi(ks as i32);
                }
                poly.add_term(k, coeff * mask_product);
            });
        }
    }
    Ok(poly)
}

/// Innovation polynomial of neuron `neuron`: the input expansion scaled by
/// `(1 - e^{-xi})`, so that evaluating it at `z(t)` produces the innovation
/// component directly.
pub fn innovation_polynomial(
    cfg: &ReservoirConfig,
    x0: f64,
    neuron: usize,
    order: usize,
) -> Result<MultiPoly> {
    Ok(input_expansion_polynomial(cfg, x0, neuron, order)?.scale(1.0 - cfg.decay()))
}

/// Enumerates every exponent vector with the given total order.
fn for_each_composition(
    total: usize,
    n_vars: usize,
    scratch: &mut [usize],
    visit: &mut impl FnMut(&[usize]),
) {
    fn rec(slot: usize, remaining: usize, scratch: &mut [usize], visit: &mut impl FnMut(&[usize])) {
        if slot + 1 == scratch.len() {
            scratch[slot] = remaining;
            visit(scratch);
            return;
        }
        for take in 0..=remaining {
            scratch[slot] = take;
            rec(slot + 1, remaining - take, scratch, visit);
        }
    }
    debug_assert_eq!(scratch.len(), n_vars);
    rec(0, total, scratch, visit);
}

/// Innovation polynomials for the whole pool, one per state row.
pub fn pool_innovation_polynomials(
    pcfg: &ParallelConfig,
    equilibria: &[Equilibrium],
    order: usize,
) -> Result<Vec<MultiPoly>> {
    pcfg.validate()?;
    if equilibria.len() != pcfg.reservoirs.len() {
        return Err(TdrError::InvalidArgument(format!(
            "{} equilibria for {} reservoirs",
            equilibria.len(),
            pcfg.reservoirs.len()
        )));
    }
    let mut polys = Vec::with_capacity(pcfg.total_neurons());
    for (cfg, eq) in pcfg.reservoirs.iter().zip(equilibria) {
        for r in 0..cfg.neurons {
            polys.push(innovation_polynomial(cfg, eq.x0, r, order)?);
        }
    }
    Ok(polys)
}

/// Mean and covariance of the stacked innovation vector. The covariance
/// entry `(r, s)` is `E[eps_r eps_s] - mu_r mu_s`, evaluated by polynomial
/// multiplication followed by the moment-substitution rule.
pub fn eps_moments(
    pcfg: &ParallelConfig,
    equilibria: &[Equilibrium],
    order: usize,
    provider: &MomentProvider,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    provider.require_order(2 * order)?;
    if provider.n_vars() != pcfg.input_dim() {
        return Err(TdrError::InvalidArgument(format!(
            "provider covers {} variables, pool input dimension is {}",
            provider.n_vars(),
            pcfg.input_dim()
        )));
    }
    let polys = pool_innovation_polynomials(pcfg, equilibria, order)?;
    eps_moments_from_polys(&polys, provider)
}

pub(crate) fn eps_moments_from_polys(
    polys: &[MultiPoly],
    provider: &MomentProvider,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let total = polys.len();
    let mut cache = MomentCache::new(provider);
    let mut mu = DVector::zeros(total);
    for (r, poly) in polys.iter().enumerate() {
        mu[r] = cache.expectation(poly)?;
    }
    let mut sigma = DMatrix::zeros(total, total);
    for r in 0..total {
        for s in r..total {
            let cross = cache.expectation(&polys[r].mul(&polys[s]))?;
            let value = cross - mu[r] * mu[s];
            sigma[(r, s)] = value;
            sigma[(s, r)] = value;
        }
    }
    Ok((mu, sigma))
}

/// One application of the layer map at the equilibrium layer with zero
/// input. At a true equilibrium this returns `x0 i_N`; it is evaluated
/// rather than assumed so that configuration mistakes surface here.
fn reservoir_map_at_equilibrium(cfg: &ReservoirConfig, x0: f64) -> Result<DVector<f64>> {
    let decay = cfg.decay();
    let fed = cfg.kernel.eval(x0, 0.0)?;
    let mut out = DVector::zeros(cfg.neurons);
    let mut carry = x0;
    for i in 0..cfg.neurons {
        carry = decay * carry + (1.0 - decay) * fed;
        out[i] = carry;
    }
    Ok(out)
}

/// Builds the full VAR(1) moment model of a reservoir pool at the given
/// equilibria. Fails with the offending reservoir index when a kernel slope
/// or a connectivity block violates the stability requirements.
pub fn model_moments(
    pcfg: &ParallelConfig,
    equilibria: &[Equilibrium],
    order: usize,
    provider: &MomentProvider,
) -> Result<ModelMoments> {
    pcfg.validate()?;
    if equilibria.len() != pcfg.reservoirs.len() {
        return Err(TdrError::InvalidArgument(format!(
            "{} equilibria for {} reservoirs",
            equilibria.len(),
            pcfg.reservoirs.len()
        )));
    }
    provider.require_order(2 * order)?;

    let mut blocks = Vec::with_capacity(pcfg.reservoirs.len());
    for (idx, (cfg, eq)) in pcfg.reservoirs.iter().zip(equilibria).enumerate() {
        let slope = cfg.kernel.state_derivative(eq.x0)?;
        if !(slope.abs() < 1.0) {
            return Err(TdrError::Instability(format!(
                "reservoir {idx}: kernel slope {slope:.6} at x0 = {} is not below one in modulus",
                eq.x0
            )));
        }
        let block = connectivity_from_parts(cfg.neurons, cfg.xi(), slope);
        let rho = spectral_radius(&block);
        if rho >= 1.0 {
            return Err(TdrError::Instability(format!(
                "reservoir {idx}: connectivity spectral radius {rho:.6}"
            )));
        }
        blocks.push(block);
    }
    let a = block_diag(&blocks);

    let eps_polys = pool_innovation_polynomials(pcfg, equilibria, order)?;
    let (mu_eps, sigma_eps) = eps_moments_from_polys(&eps_polys, provider)?;

    let mut mu_x = DVector::zeros(pcfg.total_neurons());
    let mut offset = 0;
    for (idx, (cfg, eq)) in pcfg.reservoirs.iter().zip(equilibria).enumerate() {
        let n = cfg.neurons;
        let f0 = reservoir_map_at_equilibrium(cfg, eq.x0)?;
        let fixed = DVector::from_element(n, eq.x0);
        let rhs = f0 - &blocks[idx] * fixed + mu_eps.rows(offset, n);
        let system = DMatrix::identity(n, n) - &blocks[idx];
        let solved = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| TdrError::Singular(format!("(I - A) solve for reservoir {idx} mean")))?;
        mu_x.rows_mut(offset, n).copy_from(&solved);
        offset += n;
    }

    let gamma0 = stein_solve(&a, &sigma_eps)?;

    let psi_len = if gamma0.norm() == 0.0 {
        1
    } else {
        let threshold = PSI_RTOL * gamma0.norm();
        let mut power = a.clone();
        let mut len = 1;
        while power.norm() >= threshold && len < PSI_TERM_CAP {
            power = &power * &a;
            len += 1;
        }
        len
    };

    Ok(ModelMoments {
        a,
        mu_eps,
        sigma_eps,
        mu_x,
        gamma0,
        psi_len,
        taylor_order: order,
        eps_polys,
        block_dims: pcfg.reservoirs.iter().map(|r| r.neurons).collect(),
    })
}

/// Convenience wrapper for a single reservoir.
pub fn model_moments_single(
    cfg: &ReservoirConfig,
    equilibrium: &Equilibrium,
    order: usize,
    provider: &MomentProvider,
) -> Result<ModelMoments> {
    model_moments(
        &ParallelConfig::single(cfg.clone()),
        std::slice::from_ref(equilibrium),
        order,
        provider,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn mg_reservoir(neurons: usize, separation: f64, gamma: f64, n: usize) -> ReservoirConfig {
        let mask = DMatrix::from_fn(neurons, n, |i, j| {
            ((i * 13 + j * 5 + 3) % 17) as f64 / 8.5 - 1.0
        });
        ReservoirConfig {
            neurons,
            separation,
            kernel: KernelSpec::MackeyGlass {
                eta: 2.0,
                gamma,
                p: 2.0,
            },
            mask,
        }
    }

    fn stable_eq() -> Equilibrium {
        Equilibrium {
            x0: 1.0,
            slope: 0.0,
            stable: true,
        }
    }

    #[test]
    fn connectivity_rank_one_when_slope_vanishes() {
        // MG eta=2, p=2 at x0=1 has zero slope, so only the wrap column
        // survives and the spectrum reduces to e^{-N xi}.
        let cfg = mg_reservoir(6, 0.4, 0.5, 2);
        let a = connectivity_matrix(&cfg, 1.0).unwrap();
        let xi = cfg.xi();
        for i in 0..6 {
            for j in 0..5 {
                assert_relative_eq!(a[(i, j)], 0.0);
            }
            assert_relative_eq!(a[(i, 5)], (-(i as f64 + 1.0) * xi).exp(), epsilon = 1e-14);
        }
        assert_relative_eq!(spectral_radius(&a), (-6.0 * xi).exp(), epsilon = 1e-10);
    }

    #[test]
    fn connectivity_single_neuron() {
        let cfg = mg_reservoir(1, 0.5, 0.5, 1);
        // Slope at x0 = 0 is eta = 2.
        let a = connectivity_matrix(&cfg, 0.0).unwrap();
        let decay = cfg.decay();
        assert_relative_eq!(a[(0, 0)], (1.0 - decay) * 2.0 + decay, epsilon = 1e-14);
    }

    #[test]
    fn stable_slope_implies_contracting_connectivity() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let neurons = rng.random_range(1..=30);
            let d: f64 = rng.random_range(0.01..1.0);
            let slope: f64 = rng.random_range(-0.999..0.999);
            let a = connectivity_from_parts(neurons, (1.0 + d).ln(), slope);
            let rho = spectral_radius(&a);
            assert!(
                rho < 1.0,
                "rho = {rho} for N={neurons}, d={d}, slope={slope}"
            );
        }
    }

    #[test]
    fn expansion_polynomial_first_order_single_neuron() {
        let mut cfg = mg_reservoir(2, 1.0, 1.0, 1);
        cfg.mask = DMatrix::from_element(2, 1, 1.0);
        // At x0 = 0 the MG input derivative is gamma * eta = 2.
        let v = input_expansion_polynomial(&cfg, 0.0, 0, 1).unwrap();
        let terms: Vec<_> = v.terms().collect();
        assert_eq!(terms, vec![(&[1usize][..], 2.0)]);
    }

    #[test]
    fn zero_order_expansion_is_empty() {
        let cfg = mg_reservoir(3, 0.4, 0.7, 2);
        assert!(input_expansion_polynomial(&cfg, 1.0, 1, 0)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn expansion_polynomial_accumulates_geometrically() {
        let mut cfg = mg_reservoir(2, 1.0, 1.0, 1);
        cfg.mask = DMatrix::from_element(2, 1, 1.0);
        // d = 1 gives e^{-xi} = 0.5; the second neuron sees 2(0.5 + 1) z.
        let v = input_expansion_polynomial(&cfg, 0.0, 1, 1).unwrap();
        let terms: Vec<_> = v.terms().collect();
        assert_eq!(terms.len(), 1);
        assert_relative_eq!(terms[0].1, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn expansion_matches_layer_map_taylor() {
        // The innovation is the order-R Taylor (in the input) of
        // F(x0 layer, C z) - F(x0 layer, 0); at tiny input the truncation
        // remainder is negligible and the two must agree.
        let cfg = mg_reservoir(5, 0.35, 0.8, 2);
        let x0 = 1.0;
        let z = [7e-5, -4e-5];
        for neuron in 0..5 {
            let poly = innovation_polynomial(&cfg, x0, neuron, 2).unwrap();
            let value = poly.eval(&z);

            let decay = cfg.decay();
            let gain = 1.0 - decay;
            let xi = cfg.xi();
            let mut forced = 0.0;
            let mut free = 0.0;
            for j in 0..=neuron {
                let weight = (-((neuron - j) as f64) * xi).exp();
                let input = cfg.mask[(j, 0)] * z[0] + cfg.mask[(j, 1)] * z[1];
                forced += weight * gain * cfg.kernel.eval(x0, input).unwrap();
                free += weight * gain * cfg.kernel.eval(x0, 0.0).unwrap();
            }
            assert!(
                (value - (forced - free)).abs() < 1e-10,
                "neuron {neuron}: poly {value}, map difference {}",
                forced - free
            );
        }
    }

    #[test]
    fn expansion_term_count_two_vars() {
        let mut cfg = mg_reservoir(4, 0.35, 0.8, 2);
        // eta = 1.5 at its upper equilibrium has nonzero first and second
        // input derivatives, so every exponent vector of orders 1..=2 over
        // two variables appears: (1,0) (0,1) (2,0) (1,1) (0,2).
        cfg.kernel = KernelSpec::MackeyGlass {
            eta: 1.5,
            gamma: 0.8,
            p: 2.0,
        };
        let v = input_expansion_polynomial(&cfg, 0.5f64.sqrt(), 2, 2).unwrap();
        assert_eq!(v.terms().count(), 5);
    }

    #[test]
    fn innovation_mean_vanishes_at_first_order() {
        let cfg = mg_reservoir(4, 0.4, 0.7, 2);
        let pool = ParallelConfig::single(cfg);
        let provider = MomentProvider::gaussian(DMatrix::identity(2, 2) * 0.01);
        let (mu, _) = eps_moments(&pool, &[stable_eq()], 1, &provider).unwrap();
        assert_relative_eq!(mu.norm(), 0.0);
    }

    #[test]
    fn innovation_covariance_linear_case() {
        // d = 1, unit mask, first-order expansion with dI f = 2 at x0 = 0:
        // the innovations are exactly (z, 1.5 z).
        let mut cfg = mg_reservoir(2, 1.0, 1.0, 1);
        cfg.mask = DMatrix::from_element(2, 1, 1.0);
        let pool = ParallelConfig::single(cfg);
        let eq = Equilibrium {
            x0: 0.0,
            slope: 2.0,
            stable: false,
        };
        let provider = MomentProvider::gaussian(DMatrix::identity(1, 1));
        let polys = pool_innovation_polynomials(&pool, &[eq], 1).unwrap();
        let (mu, sigma) = eps_moments_from_polys(&polys, &provider).unwrap();
        assert_relative_eq!(mu.norm(), 0.0);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 2.25]);
        assert_relative_eq!(sigma, expected, epsilon = 1e-12);
    }

    #[test]
    fn identical_reservoirs_give_identical_blocks() {
        let cfg = mg_reservoir(3, 0.4, 0.7, 2);
        let pool = ParallelConfig {
            reservoirs: vec![cfg.clone(), cfg],
        };
        let provider = MomentProvider::gaussian(DMatrix::identity(2, 2) * 0.02);
        let eqs = [stable_eq(), stable_eq()];
        let (_, sigma) = eps_moments(&pool, &eqs, 3, &provider).unwrap();
        let b00 = sigma.view((0, 0), (3, 3)).clone_owned();
        for (r, c) in [(0, 3), (3, 0), (3, 3)] {
            assert_relative_eq!(
                sigma.view((r, c), (3, 3)).clone_owned(),
                b00,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn zero_input_gain_pins_reservoir() {
        let cfg = mg_reservoir(5, 0.4, 0.0, 2);
        let provider = MomentProvider::gaussian(DMatrix::identity(2, 2) * 0.01);
        let model = model_moments_single(&cfg, &stable_eq(), 3, &provider).unwrap();
        assert_relative_eq!(model.sigma_eps.norm(), 0.0);
        assert_relative_eq!(model.gamma0.norm(), 0.0);
        assert_relative_eq!(model.mu_x, DVector::from_element(5, 1.0), epsilon = 1e-12);
        assert_eq!(model.psi_len, 1);
        assert_eq!(model.psi_matrices(1)[0], DMatrix::identity(5, 5));
    }

    #[test]
    fn unstable_equilibrium_is_refused() {
        let cfg = mg_reservoir(4, 0.4, 0.7, 2);
        let eq = Equilibrium {
            x0: 0.0,
            slope: 2.0,
            stable: false,
        };
        let provider = MomentProvider::gaussian(DMatrix::identity(2, 2) * 0.01);
        match model_moments_single(&cfg, &eq, 3, &provider) {
            Err(TdrError::Instability(msg)) => assert!(msg.contains("reservoir 0")),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn parallel_connectivity_is_block_diagonal() {
        let first = mg_reservoir(4, 0.3, 0.6, 2);
        let mut second = mg_reservoir(3, 0.5, 0.4, 2);
        second.kernel = KernelSpec::MackeyGlass {
            eta: 1.5,
            gamma: 0.4,
            p: 2.0,
        };
        let x0b = (1.5f64 - 1.0).sqrt();
        let slope_b = second.kernel.state_derivative(x0b).unwrap();
        let pool = ParallelConfig {
            reservoirs: vec![first, second],
        };
        let eqs = [
            stable_eq(),
            Equilibrium {
                x0: x0b,
                slope: slope_b,
                stable: true,
            },
        ];
        let provider = MomentProvider::gaussian(DMatrix::identity(2, 2) * 0.01);
        let model = model_moments(&pool, &eqs, 3, &provider).unwrap();
        assert_eq!(model.block_dims(), &[4, 3]);
        // Off-diagonal blocks of A are exactly zero.
        assert_eq!(
            model
                .a
                .view((0, 4), (4, 3))
                .iter()
                .copied()
                .find(|&v| v != 0.0),
            None
        );
        assert_eq!(
            model
                .a
                .view((4, 0), (3, 4))
                .iter()
                .copied()
                .find(|&v| v != 0.0),
            None
        );
        // Innovations of distinct reservoirs fed the same signal correlate.
        assert!(model.sigma_eps.view((0, 4), (4, 3)).norm() > 1e-12);
    }

    #[test]
    fn single_and_singleton_pool_agree() {
        let cfg = mg_reservoir(4, 0.3, 0.6, 2);
        let provider = MomentProvider::gaussian(DMatrix::identity(2, 2) * 0.01);
        let lone = model_moments_single(&cfg, &stable_eq(), 3, &provider).unwrap();
        let pool =
            model_moments(&ParallelConfig::single(cfg), &[stable_eq()], 3, &provider).unwrap();
        assert_eq!(lone.a, pool.a);
        assert_eq!(lone.sigma_eps, pool.sigma_eps);
        assert_eq!(lone.gamma0, pool.gamma0);
        assert_eq!(lone.mu_x, pool.mu_x);
    }

    #[test]
    fn gamma0_solves_yule_walker() {
        let cfg = mg_reservoir(6, 0.35, 0.6163, 3);
        let provider = MomentProvider::gaussian(DMatrix::identity(3, 3) * 0.0015);
        let model = model_moments_single(&cfg, &stable_eq(), 3, &provider).unwrap();
        let residual =
            (&model.gamma0 - &model.a * &model.gamma0 * model.a.transpose() - &model.sigma_eps)
                .norm()
                / model.sigma_eps.norm();
        assert!(residual < 1e-10, "residual {residual}");

        // Gamma(0) equals the truncated moving-average sum.
        let mut ma_sum = model.sigma_eps.clone();
        let mut power = model.a.clone();
        for _ in 1..model.psi_len {
            ma_sum += &power * &model.sigma_eps * power.transpose();
            power = &power * &model.a;
        }
        let relative = (&ma_sum - &model.gamma0).norm() / model.gamma0.norm();
        assert!(relative < 1e-8, "ma sum differs by {relative}");

        // PSD within tolerance.
        let min_eig = model
            .gamma0
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e));
        assert!(min_eig > -1e-8 * model.gamma0.norm());
    }
}
