//! Multivariate Gaussian densities, products of Gaussians, mixtures and
//! log-space categorical sampling. Everything here works in log-space and
//! caches the Cholesky factorization at construction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Numerically stable log(sum(exp(v))). Returns -inf for all -inf input.
pub fn log_sum_exp(vals: &[f64]) -> f64 {
    debug_assert!(vals.iter().all(|v| !v.is_nan()), "NaN in log_sum_exp");
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// A uniform draw on [0, 1) from the raw 64-bit stream (53-bit mantissa).
fn uniform_f64(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws an index with probability proportional to `exp(log_weights[i])`,
/// subtracting the max before exponentiating.
pub fn categorical_sample(log_weights: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
    debug_assert!(
        log_weights.iter().all(|w| !w.is_nan()),
        "NaN log-weight in categorical_sample"
    );
    let m = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateWeights { t: None });
    }
    let probs: Vec<f64> = log_weights.iter().map(|w| (w - m).exp()).collect();
    let total: f64 = probs.iter().sum();
    let u: f64 = uniform_f64(rng) * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // Round-off at the right edge: fall back to the last positive mass.
    Ok(probs.iter().rposition(|p| *p > 0.0).expect("max is finite"))
}

/// A multivariate Gaussian with cached Cholesky factorization.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
    log_det: f64,
}

impl Gaussian {
    /// Builds a Gaussian; the covariance is symmetrized and must be positive
    /// definite.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
                context: "Gaussian covariance",
            });
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let chol = Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite {
            context: "Gaussian covariance",
        })?;
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Gaussian {
            mean,
            cov: sym,
            chol,
            lower,
            log_det,
        })
    }

    pub fn standard(dim: usize) -> Self {
        Gaussian::new(DVector::zeros(dim), DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det_cov(&self) -> f64 {
        self.log_det
    }

    /// Same covariance (factorization reused), different mean.
    pub fn with_mean(&self, mean: DVector<f64>) -> Self {
        debug_assert_eq!(mean.len(), self.dim());
        Gaussian {
            mean,
            cov: self.cov.clone(),
            chol: self.chol.clone(),
            lower: self.lower.clone(),
            log_det: self.log_det,
        }
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> f64 {
        self.logpdf_at_dev(&(x - &self.mean))
    }

    /// Log-density evaluated at `mean + dev`.
    pub fn logpdf_at_dev(&self, dev: &DVector<f64>) -> f64 {
        let quad = dev.dot(&self.chol.solve(dev));
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det + quad)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        &self.mean + self.sample_dev(rng)
    }

    /// A zero-mean draw, i.e. `L z` with `z` standard normal.
    pub fn sample_dev(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.lower * z
    }

    fn precision(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Pointwise product of two Gaussians of equal dimension:
    /// `N(x; m1, S1) N(x; m2, S2) = exp(log_scale) N(x; m*, S*)`.
    pub fn product(&self, other: &Gaussian) -> Result<(Gaussian, f64)> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
                context: "gaussian product",
            });
        }
        let p1 = self.precision();
        let p2 = other.precision();
        let prec = &p1 + &p2;
        let prec_chol = Cholesky::new((&prec + prec.transpose()) * 0.5).ok_or(
            Error::NotPositiveDefinite {
                context: "combined precision in gaussian product",
            },
        )?;
        let cov = prec_chol.inverse();
        let mean = &cov * (&p1 * &self.mean + &p2 * &other.mean);
        let log_scale =
            Gaussian::new(other.mean.clone(), &self.cov + &other.cov)?.logpdf(&self.mean);
        Ok((Gaussian::new(mean, cov)?, log_scale))
    }

    /// Pointwise product with a Gaussian factor acting on the leading `p`
    /// coordinates:
    /// `N_d(x; m, S) N_p(x_{1:p}; m_s, S_s) = exp(log_scale) N_d(x; m*, S*)`.
    pub fn partial_product(&self, sub: &Gaussian) -> Result<(Gaussian, f64)> {
        let d = self.dim();
        let p = sub.dim();
        if p > d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p,
                context: "partial product factor exceeds full dimension",
            });
        }
        if p == 0 {
            return Ok((self.clone(), 0.0));
        }
        if p == d {
            return self.product(sub);
        }
        let full_prec = self.precision();
        let sub_prec = sub.precision();
        let mut prec = full_prec.clone();
        {
            let mut block = prec.view_mut((0, 0), (p, p));
            block += &sub_prec;
        }
        let mut h = &full_prec * &self.mean;
        {
            let mut head = h.rows_mut(0, p);
            head += &sub_prec * sub.mean();
        }
        let prec_chol = Cholesky::new((&prec + prec.transpose()) * 0.5).ok_or(
            Error::NotPositiveDefinite {
                context: "combined precision in partial product",
            },
        )?;
        let cov = prec_chol.inverse();
        let mean = &cov * h;
        // Normalizer: the marginal of the full Gaussian on the leading p
        // coordinates integrated against the factor.
        let marg_cov = self.cov.view((0, 0), (p, p)).into_owned() + sub.cov();
        let marg_mean = self.mean.rows(0, p).into_owned();
        let log_scale = Gaussian::new(sub.mean().clone(), marg_cov)?.logpdf(&marg_mean);
        Ok((Gaussian::new(mean, cov)?, log_scale))
    }
}

/// A finite mixture of Gaussians with unnormalized component log-weights.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    log_weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn new(log_weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if components.is_empty() || log_weights.len() != components.len() {
            return Err(Error::invalid(
                "mixture needs matching, nonempty weights and components",
            ));
        }
        let m = log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::DegenerateWeights { t: None });
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: 0,
                context: "mixture component dimensions",
            });
        }
        Ok(GaussianMixture {
            log_weights,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let idx = categorical_sample(&self.log_weights, rng).expect("checked at construction");
        self.components[idx].sample(rng)
    }

    /// Normalized mixture log-density.
    pub fn logpdf(&self, x: &DVector<f64>) -> f64 {
        let joint: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.components)
            .map(|(lw, c)| lw + c.logpdf(x))
            .collect();
        log_sum_exp(&joint) - log_sum_exp(&self.log_weights)
    }
}
