//! Sparse multivariate polynomials over the input variables `z_1 .. z_n`
//! and the moment providers used to take their expectations.
//!
//! A polynomial maps exponent vectors to coefficients; taking an expectation
//! replaces every monomial `c z_1^{k_1} ... z_n^{k_n}` by
//! `c mu_{k_1,..,k_n}(z)` and sums. Providers either evaluate centered
//! Gaussian moments exactly (hafnian route) or look the moments up in a
//! user-supplied table.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{Result, TdrError};
use crate::linalg::gaussian_moment;

/// Sparse polynomial in `n_vars` variables with real coefficients, keyed by
/// exponent vector. Terms with exactly zero coefficient are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    n_vars: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl MultiPoly {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, value: f64) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(&vec![0; n_vars], value);
        p
    }

    /// The single variable `z_index` as a polynomial.
    pub fn var(n_vars: usize, index: usize) -> Self {
        let mut exps = vec![0; n_vars];
        exps[index] = 1;
        let mut p = Self::zero(n_vars);
        p.add_term(&exps, 1.0);
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total order among the stored terms (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().map(|(k, &c)| (k.as_slice(), c))
    }

    /// Accumulates `coeff` on the monomial with exponents `exps`, dropping
    /// the term if the result is exactly zero.
    pub fn add_term(&mut self, exps: &[usize], coeff: f64) {
        assert_eq!(exps.len(), self.n_vars, "exponent vector length mismatch");
        let entry = self.terms.entry(exps.to_vec()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(exps);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n_vars, other.n_vars);
        let mut out = self.clone();
        for (k, c) in other.terms() {
            out.add_term(k, c);
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (k, c) in self.terms() {
            out.add_term(k, c * factor);
        }
        out
    }

    /// Exact product: convolution of exponent vectors.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n_vars, other.n_vars);
        let mut out = Self::zero(self.n_vars);
        let mut exps = vec![0usize; self.n_vars];
        for (ka, ca) in self.terms() {
            for (kb, cb) in other.terms() {
                for (slot, e) in exps.iter_mut().enumerate() {
                    *e = ka[slot] + kb[slot];
                }
                out.add_term(&exps, ca * cb);
            }
        }
        out
    }

    /// Multiplies by the monomial with exponent vector `exps`.
    pub fn mul_monomial(&self, exps: &[usize]) -> Self {
        assert_eq!(exps.len(), self.n_vars);
        let mut out = Self::zero(self.n_vars);
        let mut shifted = vec![0usize; self.n_vars];
        for (k, c) in self.terms() {
            for (slot, e) in shifted.iter_mut().enumerate() {
                *e = k[slot] + exps[slot];
            }
            out.add_term(&shifted, c);
        }
        out
    }

    /// Evaluates the polynomial at a point (used by simulation-side checks
    /// and the Monte Carlo oracles).
    pub fn eval(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.n_vars);
        let mut total = 0.0;
        for (k, c) in self.terms() {
            let mut monomial = c;
            for (slot, &e) in k.iter().enumerate() {
                for _ in 0..e {
                    monomial *= z[slot];
                }
            }
            total += monomial;
        }
        total
    }

    /// Expectation under `provider`: each monomial becomes its moment.
    pub fn expectation(&self, provider: &MomentProvider) -> Result<f64> {
        let mut total = 0.0;
        for (k, c) in self.terms() {
            total += c * provider.moment(k)?;
        }
        Ok(total)
    }
}

/// Source of the higher-order input moments `mu_{k_1,..,k_n}(z)`.
#[derive(Debug, Clone)]
pub enum MomentProvider {
    /// Centered Gaussian input with the given covariance; any order is
    /// available analytically and every odd total order vanishes.
    Gaussian { sigma_z: DMatrix<f64> },
    /// Explicit moment table for non-Gaussian inputs. Queries above
    /// `max_order` are refused; absent entries within range count as zero.
    Table {
        n_vars: usize,
        max_order: usize,
        table: BTreeMap<Vec<usize>, f64>,
    },
}

impl MomentProvider {
    pub fn gaussian(sigma_z: DMatrix<f64>) -> Self {
        Self::Gaussian { sigma_z }
    }

    pub fn n_vars(&self) -> usize {
        match self {
            Self::Gaussian { sigma_z } => sigma_z.nrows(),
            Self::Table { n_vars, .. } => *n_vars,
        }
    }

    /// Largest total order the provider can serve; `None` when unlimited.
    pub fn max_order(&self) -> Option<usize> {
        match self {
            Self::Gaussian { .. } => None,
            Self::Table { max_order, .. } => Some(*max_order),
        }
    }

    pub fn moment(&self, k: &[usize]) -> Result<f64> {
        if k.len() != self.n_vars() {
            return Err(TdrError::InvalidArgument(format!(
                "exponent vector of length {} for a {}-variable provider",
                k.len(),
                self.n_vars()
            )));
        }
        let order: usize = k.iter().sum();
        match self {
            Self::Gaussian { sigma_z } => gaussian_moment(sigma_z, k),
            Self::Table {
                max_order, table, ..
            } => {
                if order > *max_order {
                    return Err(TdrError::UnsupportedOrder {
                        needed: order,
                        max: *max_order,
                    });
                }
                if order == 0 {
                    return Ok(1.0);
                }
                Ok(table.get(k).copied().unwrap_or(0.0))
            }
        }
    }

    /// Fails unless moments up to `needed` total order are available.
    pub fn require_order(&self, needed: usize) -> Result<()> {
        match self.max_order() {
            Some(max) if needed > max => Err(TdrError::UnsupportedOrder { needed, max }),
            _ => Ok(()),
        }
    }

    /// All first moments vanish. The model-side covariance algebra relies on
    /// this; providers with drift must be centered by the caller.
    pub fn is_centered(&self) -> Result<bool> {
        match self {
            Self::Gaussian { .. } => Ok(true),
            Self::Table { .. } => {
                let n = self.n_vars();
                for i in 0..n {
                    let mut e = vec![0; n];
                    e[i] = 1;
                    if self.moment(&e)? != 0.0 {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// Memoizing view over a provider for the hot loops that evaluate the same
/// exponent vectors thousands of times. Local to a computation, so the
/// providers themselves stay shareable across threads.
pub struct MomentCache<'a> {
    provider: &'a MomentProvider,
    memo: HashMap<Vec<usize>, f64>,
}

impl<'a> MomentCache<'a> {
    pub fn new(provider: &'a MomentProvider) -> Self {
        Self {
            provider,
            memo: HashMap::new(),
        }
    }

    pub fn moment(&mut self, k: &[usize]) -> Result<f64> {
        if let Some(&v) = self.memo.get(k) {
            return Ok(v);
        }
        let v = self.provider.moment(k)?;
        self.memo.insert(k.to_vec(), v);
        Ok(v)
    }

    pub fn expectation(&mut self, p: &MultiPoly) -> Result<f64> {
        let mut total = 0.0;
        for (k, c) in p.terms() {
            total += c * self.moment(k)?;
        }
        Ok(total)
    }
}
