//! Exact inference for linear-Gaussian state-space models: Kalman filter,
//! RTS smoother, forward-filtering backward-sampling and predictive
//! densities. Used as the exact backward-information-filter component and as
//! the ground-truth oracle in tests.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::Gaussian;
use crate::replica::PredictiveDensity;
use crate::ssm::{ObservationPath, State, StatePath};

/// Time-invariant linear-Gaussian model
/// `x_1 ~ N(0, Sigma1)`, `x_t | x_{t-1} ~ N(Phi x_{t-1}, Sigma)`,
/// `y_t | x_t ~ N(C x_t, R)`.
#[derive(Clone, Debug)]
pub struct LgssmParams {
    pub phi: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma1: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LgssmParams {
    pub fn state_dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    fn validate(&self) -> Result<()> {
        let d = self.state_dim();
        let m = self.obs_dim();
        let square = |mat: &DMatrix<f64>, n: usize| mat.nrows() == n && mat.ncols() == n;
        if !square(&self.phi, d) || !square(&self.sigma, d) || !square(&self.sigma1, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.sigma.nrows(),
                context: "LGSSM state matrices",
            });
        }
        if self.c.ncols() != d || !square(&self.r, m) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.c.ncols(),
                context: "LGSSM observation matrices",
            });
        }
        Ok(())
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Filtering output: per-step filtered and one-step predictive laws plus
/// cumulative log-likelihoods.
pub struct FilterResult {
    filtered: Vec<Gaussian>,
    /// `predicted[t]` is the law of `x_t | y_{0..t-1}`; `predicted[0]` is the prior.
    predicted: Vec<Gaussian>,
    /// `loglik_prefix[t] = log p(y_{0..=t})`.
    loglik_prefix: Vec<f64>,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    pub fn filtered(&self, t: usize) -> &Gaussian {
        &self.filtered[t]
    }

    pub fn predicted(&self, t: usize) -> &Gaussian {
        &self.predicted[t]
    }

    pub fn log_likelihood(&self) -> f64 {
        *self.loglik_prefix.last().expect("nonempty filter")
    }

    /// `log p(y_{0..=t})`.
    pub fn loglik_prefix(&self, t: usize) -> f64 {
        self.loglik_prefix[t]
    }
}

/// `log p(x_t | y_{0..t-1})` evaluated at `x`; `t = 0` gives the prior.
pub fn predictive_logpdf(f: &FilterResult, t: usize, x: &State) -> Result<f64> {
    if t >= f.len() {
        return Err(Error::invalid(format!(
            "predictive index {t} out of range (T = {})",
            f.len()
        )));
    }
    Ok(f.predicted(t).logpdf(x))
}

impl PredictiveDensity for FilterResult {
    fn log_predictive(&self, t: usize, x: &State) -> f64 {
        self.predicted(t).logpdf(x)
    }
}

pub fn kalman_filter(params: &LgssmParams, y: &ObservationPath) -> Result<FilterResult> {
    params.validate()?;
    let d = params.state_dim();
    let m = params.obs_dim();
    if y.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.dim(),
            context: "observation dimension",
        });
    }
    let t_len = y.len();
    let mut filtered = Vec::with_capacity(t_len);
    let mut predicted = Vec::with_capacity(t_len);
    let mut loglik_prefix = Vec::with_capacity(t_len);
    let mut loglik = 0.0;

    let mut mean_pred = DVector::zeros(d);
    let mut cov_pred = symmetrize(&params.sigma1);

    for t in 0..t_len {
        predicted.push(Gaussian::new(mean_pred.clone(), cov_pred.clone())?);

        // Update with y_t.
        let innov_mean = &params.c * &mean_pred;
        let s = symmetrize(&(&params.c * &cov_pred * params.c.transpose() + &params.r));
        let s_chol = Cholesky::new(s.clone()).ok_or(Error::NotPositiveDefinite {
            context: "innovation covariance",
        })?;
        loglik += Gaussian::new(innov_mean.clone(), s)?.logpdf(&y[t]);
        loglik_prefix.push(loglik);

        // Gain K = P C' S^-1, computed via K' = S^-1 C P.
        let gain = s_chol.solve(&(&params.c * &cov_pred)).transpose();
        let mean_filt = &mean_pred + &gain * (&y[t] - innov_mean);
        let cov_filt = symmetrize(&(&cov_pred - &gain * &params.c * &cov_pred));
        filtered.push(Gaussian::new(mean_filt.clone(), cov_filt.clone())?);

        // Predict x_{t+1}.
        mean_pred = &params.phi * mean_filt;
        cov_pred = symmetrize(&(&params.phi * cov_filt * params.phi.transpose() + &params.sigma));
    }

    Ok(FilterResult {
        filtered,
        predicted,
        loglik_prefix,
    })
}

pub struct SmootherResult {
    smoothed: Vec<Gaussian>,
}

impl SmootherResult {
    pub fn len(&self) -> usize {
        self.smoothed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smoothed.is_empty()
    }

    pub fn smoothed(&self, t: usize) -> &Gaussian {
        &self.smoothed[t]
    }
}

/// Smoothing gain `J_t = P_t^f Phi' (P_{t+1}^pred)^-1`.
fn smoothing_gain(f: &FilterResult, params: &LgssmParams, t: usize) -> Result<DMatrix<f64>> {
    let pred_cov = f.predicted(t + 1).cov().clone();
    let chol = Cholesky::new(pred_cov).ok_or(Error::NotPositiveDefinite {
        context: "predictive covariance in smoother",
    })?;
    Ok(chol.solve(&(&params.phi * f.filtered(t).cov())).transpose())
}

pub fn rts_smoother(f: &FilterResult, params: &LgssmParams) -> Result<SmootherResult> {
    let t_len = f.len();
    let mut smoothed = vec![f.filtered(t_len - 1).clone()];
    for t in (0..t_len - 1).rev() {
        let gain = smoothing_gain(f, params, t)?;
        let next = &smoothed[smoothed.len() - 1];
        let mean = f.filtered(t).mean()
            + &gain * (next.mean() - f.predicted(t + 1).mean());
        let cov = symmetrize(
            &(f.filtered(t).cov()
                + &gain * (next.cov() - f.predicted(t + 1).cov()) * gain.transpose()),
        );
        smoothed.push(Gaussian::new(mean, cov)?);
    }
    smoothed.reverse();
    Ok(SmootherResult { smoothed })
}

/// One exact draw from `p(x_{1:T} | y_{1:T})` by backward sampling through
/// the filter.
pub fn ffbs_sample<R: Rng>(
    f: &FilterResult,
    params: &LgssmParams,
    rng: &mut R,
) -> Result<StatePath> {
    let t_len = f.len();
    let mut states = vec![State::zeros(0); t_len];
    states[t_len - 1] = f.filtered(t_len - 1).sample(rng);
    for t in (0..t_len - 1).rev() {
        let gain = smoothing_gain(f, params, t)?;
        let mean = f.filtered(t).mean()
            + &gain * (&states[t + 1] - f.predicted(t + 1).mean());
        let cov = symmetrize(
            &(f.filtered(t).cov() - &gain * f.predicted(t + 1).cov() * gain.transpose()),
        );
        states[t] = Gaussian::new(mean, cov)?.sample(rng);
    }
    StatePath::new(states)
}

/// Exact backward information filter for tests and the Monte Carlo BIF
/// oracle:
/// `log p(y_{t+1:T} | x_t) = log p(y_{1:T}) + log p(x_t | y_{1:T})
///  - log p(y_{1:t}) - log p(x_t | y_{1:t})` (zero-based `t`).
pub fn exact_bif_logpdf(
    f: &FilterResult,
    s: &SmootherResult,
    t: usize,
    x: &State,
) -> f64 {
    f.log_likelihood() + s.smoothed(t).logpdf(x) - f.loglik_prefix(t) - f.filtered(t).logpdf(x)
}
