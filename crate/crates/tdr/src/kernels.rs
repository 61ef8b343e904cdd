//! Nonlinear reservoir kernels `f(x, I, theta)`, their exact state and input
//! derivatives, and equilibrium search with stability classification.
//!
//! Both implemented families are one-dimensional profiles composed with the
//! affine argument `u = x + gamma I (+ phi)`: Mackey-Glass is
//! `eta u / (1 + u^p)` and Ikeda is `eta sin^2(u)`. Derivatives are evaluated
//! in closed form (Leibniz recursion for the Mackey-Glass quotient, the
//! shifted-sine formula for Ikeda) rather than numerically.

use crate::error::{Result, TdrError};

/// Largest supported derivative order. The moment model needs at most the
/// Taylor order (3 in the experiments) plus task-degree margin.
pub const MAX_DERIVATIVE_ORDER: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `f(x, I) = eta (x + gamma I) / (1 + (x + gamma I)^p)`.
    MackeyGlass { eta: f64, gamma: f64, p: f64 },
    /// `f(x, I) = eta sin^2(x + gamma I + phi)`.
    Ikeda { eta: f64, gamma: f64, phi: f64 },
}

/// Fixed point of the autonomous kernel map together with its local
/// linearization. `|slope| < 1` is the sufficient stability condition the
/// whole moment model is built on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub x0: f64,
    pub slope: f64,
    pub stable: bool,
}

impl KernelSpec {
    pub fn input_gain(&self) -> f64 {
        match self {
            Self::MackeyGlass { gamma, .. } | Self::Ikeda { gamma, .. } => *gamma,
        }
    }

    /// Kernel value `f(x, input)`.
    pub fn eval(&self, x: f64, input: f64) -> Result<f64> {
        match self {
            Self::MackeyGlass { eta, gamma, p } => {
                let u = x + gamma * input;
                let up = real_pow(u, *p)?;
                let denom = 1.0 + up;
                if denom == 0.0 {
                    return Err(TdrError::NumericDomain(format!(
                        "Mackey-Glass pole at u = {u}"
                    )));
                }
                let value = eta * u / denom;
                if !value.is_finite() {
                    return Err(TdrError::NumericDomain(format!(
                        "Mackey-Glass value not finite at u = {u}"
                    )));
                }
                Ok(value)
            }
            Self::Ikeda { eta, gamma, phi } => {
                let u = x + gamma * input + phi;
                Ok(eta * u.sin() * u.sin())
            }
        }
    }

    /// `d f / d x` at `(x0, 0)`.
    pub fn state_derivative(&self, x0: f64) -> Result<f64> {
        match self {
            Self::MackeyGlass { eta, p, .. } => Ok(mg_profile_derivatives(*eta, *p, x0, 1)?[0]),
            Self::Ikeda { eta, phi, .. } => Ok(eta * (2.0 * (x0 + phi)).sin()),
        }
    }

    /// Input derivatives `d^i f / d I^i` at `(x0, 0)` for `i = 1 ..= order`.
    pub fn input_derivatives(&self, x0: f64, order: usize) -> Result<Vec<f64>> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(TdrError::UnsupportedOrder {
                needed: order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        match self {
            Self::MackeyGlass { eta, gamma, p } => {
                let profile = mg_profile_derivatives(*eta, *p, x0, order)?;
                Ok(profile
                    .into_iter()
                    .enumerate()
                    .map(|(idx, d)| gamma.powi(idx as i32 + 1) * d)
                    .collect())
            }
            Self::Ikeda { eta, gamma, phi } => {
                let u = x0 + phi;
                let mut out = Vec::with_capacity(order);
                for i in 1..=order {
                    // d^k/du^k sin^2(u) = 2^(k-1) sin(2u + (k-1) pi/2)
                    let angle = 2.0 * u + (i as f64 - 1.0) * std::f64::consts::FRAC_PI_2;
                    out.push(eta * gamma.powi(i as i32) * 2f64.powi(i as i32 - 1) * angle.sin());
                }
                Ok(out)
            }
        }
    }

    /// All fixed points of `x -> f(x, 0)` found by sign change on a uniform
    /// grid over `bracket`, each refined by bisection and classified by the
    /// local slope. Roots landing exactly on a grid node are attributed to
    /// the cell on their left.
    pub fn find_equilibria(&self, bracket: (f64, f64), grid: usize) -> Result<Vec<Equilibrium>> {
        let (lo, hi) = bracket;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(TdrError::InvalidArgument(format!(
                "equilibrium bracket [{lo}, {hi}] is not a finite interval"
            )));
        }
        if grid < 2 {
            return Err(TdrError::InvalidArgument(
                "equilibrium grid needs >= 2 cells".into(),
            ));
        }

        let residual = |x: f64| -> Option<f64> { self.eval(x, 0.0).ok().map(|f| f - x) };
        let step = (hi - lo) / grid as f64;
        let nodes: Vec<(f64, Option<f64>)> = (0..=grid)
            .map(|i| {
                let x = lo + step * i as f64;
                (x, residual(x))
            })
            .collect();

        let mut roots: Vec<f64> = Vec::new();
        let mut push_root = |x: f64| {
            if !roots.iter().any(|&r| (r - x).abs() < 1e-9) {
                roots.push(x);
            }
        };
        if let (x, Some(g)) = nodes[0] {
            if g == 0.0 {
                push_root(x);
            }
        }
        for cell in 0..grid {
            let (xa, ga) = nodes[cell];
            let (xb, gb) = nodes[cell + 1];
            let (Some(ga), Some(gb)) = (ga, gb) else {
                continue;
            };
            if gb == 0.0 {
                push_root(xb);
            } else if ga != 0.0 && ga.signum() != gb.signum() {
                if let Some(root) = bisect(&|x| residual(x), xa, xb, ga) {
                    push_root(root);
                }
            }
        }

        let mut out = Vec::with_capacity(roots.len());
        for x0 in roots {
            let value = self.eval(x0, 0.0)?;
            if (value - x0).abs() >= 1e-10 {
                continue;
            }
            let slope = self.state_derivative(x0)?;
            out.push(Equilibrium {
                x0,
                slope,
                stable: slope.abs() < 1.0,
            });
        }
        out.sort_by(|a, b| a.x0.total_cmp(&b.x0));
        Ok(out)
    }

    /// Default equilibrium choice when several are stable: the one with the
    /// largest fixed-point value.
    pub fn largest_stable_equilibrium(
        &self,
        bracket: (f64, f64),
        grid: usize,
    ) -> Result<Option<Equilibrium>> {
        Ok(self
            .find_equilibria(bracket, grid)?
            .into_iter()
            .filter(|e| e.stable)
            .max_by(|a, b| a.x0.total_cmp(&b.x0)))
    }
}

fn bisect(g: &dyn Fn(f64) -> Option<f64>, mut a: f64, mut b: f64, ga: f64) -> Option<f64> {
    let sign_a = ga.signum();
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        let mid = 0.5 * (a + b);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// `u^p` with domain checking (negative base with fractional exponent has no
/// real value).
fn real_pow(u: f64, p: f64) -> Result<f64> {
    let value = if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        u.powi(p as i32)
    } else {
        u.powf(p)
    };
    if value.is_nan() {
        return Err(TdrError::NumericDomain(format!(
            "{u}^{p} is not a real number"
        )));
    }
    Ok(value)
}

/// Derivatives `g^(1) .. g^(order)` of the Mackey-Glass profile
/// `g(u) = eta u / (1 + u^p)` at `u`.
///
/// Let `h = 1 / (1 + u^p)`. Differentiating `(1 + u^p) h = 1` k times gives
/// the Leibniz recursion
/// `h^(k) = -h sum_{j=1..k} C(k,j) ff(p,j) u^(p-j) h^(k-j)`,
/// with `ff` the falling factorial, and then
/// `g^(k) = eta (u h^(k) + k h^(k-1))`.
fn mg_profile_derivatives(eta: f64, p: f64, u: f64, order: usize) -> Result<Vec<f64>> {
    let up = real_pow(u, p)?;
    let denom = 1.0 + up;
    if denom == 0.0 {
        return Err(TdrError::NumericDomain(format!(
            "Mackey-Glass pole at u = {u}"
        )));
    }
    let h0 = 1.0 / denom;

    // power_term[j] = ff(p, j) * u^(p - j), with the 0 * infinity case of an
    // exhausted integer exponent resolved to 0 before u^(p-j) is touched.
    let mut power_terms = vec![0.0; order + 1];
    for (j, term) in power_terms.iter_mut().enumerate().skip(1) {
        let mut falling = 1.0;
        for step in 0..j {
            falling *= p - step as f64;
        }
        if falling == 0.0 {
            continue;
        }
        let reduced = real_pow(u, p - j as f64)?;
        if !reduced.is_finite() {
            return Err(TdrError::NumericDomain(format!(
                "derivative of u^{p} of order {j} is singular at u = {u}"
            )));
        }
        *term = falling * reduced;
    }

    let mut h = vec![h0];
    for k in 1..=order {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += binomial(k, j) * power_terms[j] * h[k - j];
        }
        h.push(-h0 * acc);
    }

    Ok((1..=order)
        .map(|k| eta * (u * h[k] + k as f64 * h[k - 1]))
        .collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut value = 1.0;
    for i in 0..k {
        value = value * (n - i) as f64 / (i + 1) as f64;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn mg(eta: f64, gamma: f64, p: f64) -> KernelSpec {
        KernelSpec::MackeyGlass { eta, gamma, p }
    }

    fn ikeda(eta: f64, gamma: f64, phi: f64) -> KernelSpec {
        KernelSpec::Ikeda { eta, gamma, phi }
    }

    #[test]
    fn mackey_glass_values() {
        let k = mg(2.0, 1.0, 2.0);
        assert_relative_eq!(k.eval(0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(k.eval(1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn ikeda_values() {
        let k = ikeda(1.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(k.eval(0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn mackey_glass_pole_is_a_domain_error() {
        // 1 + u^p vanishes at u = -1 for odd integer exponents.
        let k = mg(2.0, 1.0, 3.0);
        assert!(matches!(k.eval(-1.0, 0.0), Err(TdrError::NumericDomain(_))));
        // Fractional exponents of negative bases have no real value.
        let k = mg(2.0, 1.0, 1.5);
        assert!(matches!(k.eval(-0.5, 0.0), Err(TdrError::NumericDomain(_))));
    }

    #[test]
    fn state_derivative_closed_forms() {
        assert_relative_eq!(mg(2.0, 1.0, 2.0).state_derivative(0.0).unwrap(), 2.0);
        assert_relative_eq!(
            mg(2.0, 1.0, 2.0).state_derivative(1.0).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ikeda_input_derivatives_at_zero_phase() {
        let k = ikeda(1.0, 1.0, 0.0);
        let d = k.input_derivatives(0.0, 2).unwrap();
        assert_relative_eq!(d[0], 0.0);
        assert_relative_eq!(d[1], 2.0);
    }

    #[test]
    fn derivative_order_cap() {
        assert!(matches!(
            mg(2.0, 1.0, 2.0).input_derivatives(0.5, 7),
            Err(TdrError::UnsupportedOrder { needed: 7, max: 6 })
        ));
    }

    /// Central finite difference of order `k` with one Richardson step
    /// (leading error h^4).
    fn fd_input_derivative(kernel: &KernelSpec, x0: f64, k: usize, h: f64) -> f64 {
        let f = |i: f64| kernel.eval(x0, i).unwrap();
        let central = |h: f64| -> f64 {
            match k {
                1 => (f(h) - f(-h)) / (2.0 * h),
                2 => (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h),
                3 => (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h),
                _ => unreachable!(),
            }
        };
        // Leading error of every central stencil above is h^2, so one
        // Richardson step leaves h^4.
        (4.0 * central(0.5 * h) - central(h)) / 3.0
    }

    #[test]
    fn input_derivatives_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for draw in 0..50 {
            let eta = rng.random_range(0.5..3.0);
            let gamma = rng.random_range(-2.0..2.0);
            let kernel = if draw % 2 == 0 {
                // Positive u keeps fractional-exponent profiles real.
                mg(eta, gamma, rng.random_range(1.0..4.0))
            } else {
                ikeda(eta, gamma, rng.random_range(-1.5..1.5))
            };
            let x0 = rng.random_range(0.3..1.5);
            let exact = kernel.input_derivatives(x0, 3).unwrap();
            for (idx, &d) in exact.iter().enumerate() {
                let fd = fd_input_derivative(&kernel, x0, idx + 1, 1e-2);
                let scale = 1.0f64.max(d.abs());
                assert!(
                    (fd - d).abs() <= 1e-6 * scale,
                    "order {} kernel {kernel:?}: exact {d}, fd {fd}",
                    idx + 1
                );
            }
        }
    }

    #[test]
    fn mackey_glass_equilibria() {
        let k = mg(2.0, 0.7, 2.0);
        let eqs = k.find_equilibria((-3.0, 3.0), 1000).unwrap();
        let roots: Vec<f64> = eqs.iter().map(|e| e.x0).collect();
        assert_eq!(eqs.len(), 3);
        assert_relative_eq!(roots[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(roots[1], 0.0, epsilon = 1e-9);
        assert_relative_eq!(roots[2], 1.0, epsilon = 1e-9);
        assert!(eqs[0].stable && eqs[2].stable && !eqs[1].stable);
        assert_relative_eq!(eqs[1].slope, 2.0, epsilon = 1e-9);
        assert_relative_eq!(eqs[2].slope, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn weak_feedback_single_equilibrium() {
        let k = mg(0.5, 1.0, 2.0);
        let eqs = k.find_equilibria((-3.0, 3.0), 1000).unwrap();
        assert_eq!(eqs.len(), 1);
        assert_relative_eq!(eqs[0].x0, 0.0, epsilon = 1e-10);
        assert!(eqs[0].stable);
        assert_relative_eq!(eqs[0].slope, 0.5);
    }

    #[test]
    fn ikeda_equilibrium_residual() {
        let k = ikeda(1.0, 1.0, 0.7356);
        let eqs = k.find_equilibria((0.0, 2.0), 1000).unwrap();
        assert!(!eqs.is_empty());
        for e in &eqs {
            let residual = (k.eval(e.x0, 0.0).unwrap() - e.x0).abs();
            assert!(residual < 1e-10, "residual {residual}");
        }
        // Independent oracle: plain bisection of sin^2(x + phi) - x on the
        // bracket, refined to 1e-14.
        let g = |x: f64| (x + 0.7356).sin().powi(2) - x;
        let (mut a, mut b) = (0.0f64, 2.0f64);
        assert!(g(a) > 0.0 && g(b) < 0.0);
        while b - a > 1e-14 {
            let mid = 0.5 * (a + b);
            if g(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let oracle = 0.5 * (a + b);
        assert!(
            eqs.iter().any(|e| (e.x0 - oracle).abs() < 1e-9),
            "no equilibrium near bisection root {oracle}"
        );
    }

    #[test]
    fn equilibria_match_stability_flag() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let k = mg(rng.random_range(0.2..3.0), rng.random_range(-1.0..1.0), 2.0);
            for e in k.find_equilibria((-4.0, 4.0), 800).unwrap() {
                assert_eq!(e.stable, e.slope.abs() < 1.0);
                assert!((k.eval(e.x0, 0.0).unwrap() - e.x0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parameter_continuity() {
        let base = mg(1.7, 0.9, 2.0);
        let nudged = mg(1.7 + 1e-8, 0.9, 2.0);
        let delta = (base.eval(0.4, 0.2).unwrap() - nudged.eval(0.4, 0.2).unwrap()).abs();
        assert!(delta < 1e-7);
    }
}
