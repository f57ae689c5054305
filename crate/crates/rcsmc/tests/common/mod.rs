//! Shared test oracles: a dense joint-Gaussian construction of the
//! linear-Gaussian smoothing posterior (independent of the Kalman recursions)
//! and a one-sample Kolmogorov-Smirnov test.

#![allow(dead_code)]

use nalgebra::{Cholesky, DMatrix, DVector};
use rcsmc::kalman::LgssmParams;
use rcsmc::ssm::ObservationPath;

/// Smoothing posterior of the stacked path `x_{0:T-1}` (dimension `d * T`)
/// computed by assembling the full joint precision and inverting it.
/// Only intended for tiny problems (`d * T` up to a few dozen).
pub struct DenseLgOracle {
    pub d: usize,
    pub t_len: usize,
    pub post_mean: DVector<f64>,
    pub post_cov: DMatrix<f64>,
    pub loglik: f64,
}

impl DenseLgOracle {
    pub fn new(params: &LgssmParams, y: &ObservationPath) -> Self {
        let d = params.state_dim();
        let m = params.obs_dim();
        let t_len = y.len();
        let n = d * t_len;

        let inv = |mat: &DMatrix<f64>| -> DMatrix<f64> {
            Cholesky::new((mat + mat.transpose()) * 0.5)
                .expect("SPD matrix in dense oracle")
                .inverse()
        };
        let sigma_inv = inv(&params.sigma);
        let sigma1_inv = inv(&params.sigma1);
        let r_inv = inv(&params.r);

        // Prior precision of the stacked path (block tridiagonal).
        let mut lambda = DMatrix::zeros(n, n);
        lambda.view_mut((0, 0), (d, d)).copy_from(&sigma1_inv);
        for t in 1..t_len {
            let a = &params.phi.transpose() * &sigma_inv * &params.phi;
            let b = -(&params.phi.transpose() * &sigma_inv);
            let i0 = (t - 1) * d;
            let i1 = t * d;
            let mut block = lambda.view_mut((i0, i0), (d, d));
            block += a;
            lambda.view_mut((i0, i1), (d, d)).copy_from(&b);
            lambda
                .view_mut((i1, i0), (d, d))
                .copy_from(&b.transpose());
            let mut diag = lambda.view_mut((i1, i1), (d, d));
            diag += &sigma_inv;
        }

        // Observation contribution: precision C' R^-1 C per block, linear
        // term C' R^-1 y_t.
        let obs_prec = &params.c.transpose() * &r_inv * &params.c;
        let mut post_prec = lambda.clone();
        let mut h = DVector::zeros(n);
        for t in 0..t_len {
            let i = t * d;
            let mut block = post_prec.view_mut((i, i), (d, d));
            block += &obs_prec;
            h.rows_mut(i, d)
                .copy_from(&(&params.c.transpose() * &r_inv * &y[t]));
        }
        let post_cov = inv(&post_prec);
        let post_mean = &post_cov * h;

        // Marginal likelihood: y is jointly Gaussian with covariance
        // C_big Lambda^-1 C_big' + R_big around mean zero.
        let prior_cov = inv(&lambda);
        let mut c_big = DMatrix::zeros(m * t_len, n);
        let mut r_big = DMatrix::zeros(m * t_len, m * t_len);
        let mut y_stack = DVector::zeros(m * t_len);
        for t in 0..t_len {
            c_big
                .view_mut((t * m, t * d), (m, d))
                .copy_from(&params.c);
            r_big.view_mut((t * m, t * m), (m, m)).copy_from(&params.r);
            y_stack.rows_mut(t * m, m).copy_from(&y[t]);
        }
        let y_cov = &c_big * prior_cov * c_big.transpose() + r_big;
        let loglik = logpdf_mvn(&y_stack, &DVector::zeros(m * t_len), &y_cov);

        DenseLgOracle {
            d,
            t_len,
            post_mean,
            post_cov,
            loglik,
        }
    }

    /// Smoothing marginal `(mean, cov)` of `x_t`.
    pub fn marginal(&self, t: usize) -> (DVector<f64>, DMatrix<f64>) {
        let i = t * self.d;
        (
            self.post_mean.rows(i, self.d).into_owned(),
            self.post_cov.view((i, i), (self.d, self.d)).into_owned(),
        )
    }

    /// Cross-covariance `Cov(x_s, x_t)`.
    pub fn cross_cov(&self, s: usize, t: usize) -> DMatrix<f64> {
        self.post_cov
            .view((s * self.d, t * self.d), (self.d, self.d))
            .into_owned()
    }
}

pub fn logpdf_mvn(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let chol = Cholesky::new((cov + cov.transpose()) * 0.5).expect("SPD covariance");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let dev = x - mean;
    let quad = dev.dot(&chol.solve(&dev));
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

/// One-sample Kolmogorov-Smirnov p-value (asymptotic distribution) of
/// `samples` against the given CDF.
pub fn ks_pvalue(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let n = xs.len() as f64;
    let mut d_stat = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        let upper = (i as f64 + 1.0) / n - f;
        let lower = f - i as f64 / n;
        d_stat = d_stat.max(upper).max(lower);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d_stat;
    let mut p = 0.0;
    for k in 1..=100 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        p += sign * (-2.0 * (k as f64 * lambda).powi(2)).exp();
    }
    (2.0 * p).clamp(0.0, 1.0)
}

/// Standard scalar parameter set used across the oracle tests.
pub fn scalar_params(phi: f64, sigma: f64, sigma1: f64, r: f64) -> LgssmParams {
    use nalgebra::dmatrix;
    LgssmParams {
        phi: dmatrix![phi],
        sigma: dmatrix![sigma],
        sigma1: dmatrix![sigma1],
        c: dmatrix![1.0],
        r: dmatrix![r],
    }
}
