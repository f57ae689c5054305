//! The shared latent process of the linear-Gaussian and Poisson-Gaussian
//! benchmarks: `x_1 ~ N(0, Sigma1)`, `x_t | x_{t-1} ~ N(Phi x_{t-1}, Sigma)`
//! with diagonal `Phi` and equicorrelated `Sigma`.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gauss::Gaussian;
use crate::ssm::State;

#[derive(Clone, Debug)]
pub struct Ar1Latent {
    phis: Vec<f64>,
    rho: f64,
    phi_mat: DMatrix<f64>,
    /// N(0, Sigma), factorization reused by every transition evaluation.
    trans_noise: Gaussian,
    init: Gaussian,
}

/// `d x d` matrix with unit diagonal and constant off-diagonal `rho`.
pub fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

impl Ar1Latent {
    pub fn new(phis: Vec<f64>, rho: f64) -> Result<Self> {
        let d = phis.len();
        if d == 0 {
            return Err(Error::invalid("latent dimension must be >= 1"));
        }
        if phis.iter().any(|p| p.abs() >= 1.0) {
            return Err(Error::invalid("AR coefficients must satisfy |phi| < 1"));
        }
        let phi_mat = DMatrix::from_diagonal(&DVector::from_vec(phis.clone()));
        let sigma = equicorrelation(d, rho);
        // Stationary per-coordinate variance 1/(1 - phi_i^2) with the same
        // correlation structure.
        let sds: Vec<f64> = phis.iter().map(|p| (1.0 / (1.0 - p * p)).sqrt()).collect();
        let sigma1 = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                sds[i] * sds[i]
            } else {
                rho * sds[i] * sds[j]
            }
        });
        let trans_noise = Gaussian::new(DVector::zeros(d), sigma)?;
        let init = Gaussian::new(DVector::zeros(d), sigma1)?;
        Ok(Ar1Latent {
            phis,
            rho,
            phi_mat,
            trans_noise,
            init,
        })
    }

    /// All coordinates share one AR coefficient.
    pub fn uniform(d: usize, phi: f64, rho: f64) -> Result<Self> {
        Ar1Latent::new(vec![phi; d], rho)
    }

    pub fn dim(&self) -> usize {
        self.phis.len()
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phi_mat(&self) -> &DMatrix<f64> {
        &self.phi_mat
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.trans_noise.cov()
    }

    pub fn sigma1(&self) -> &DMatrix<f64> {
        self.init.cov()
    }

    pub fn initial(&self) -> &Gaussian {
        &self.init
    }

    pub fn transition_mean(&self, x_prev: &State) -> State {
        &self.phi_mat * x_prev
    }

    pub fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        self.init.sample(rng)
    }

    pub fn log_initial(&self, x: &State) -> f64 {
        self.init.logpdf(x)
    }

    pub fn sample_transition(&self, x_prev: &State, rng: &mut dyn RngCore) -> State {
        self.transition_mean(x_prev) + self.trans_noise.sample_dev(rng)
    }

    pub fn log_transition(&self, x_prev: &State, x: &State) -> f64 {
        self.trans_noise
            .logpdf_at_dev(&(x - self.transition_mean(x_prev)))
    }
}
