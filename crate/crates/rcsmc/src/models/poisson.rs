//! Poisson-Gaussian benchmarks: the AR(1) latent process observed through
//! per-coordinate Poisson counts with rate `exp(c + sigma x)` (Model 1) or
//! `sigma |x|` (Model 2).

use rand::RngCore;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ssm::{ObservationPath, State, StatePath, StateSpaceModel};

use super::latent::Ar1Latent;

/// `log P(y | Poisson(lambda))`; `lambda = 0` is legal (point mass at 0).
pub fn poisson_logpmf(y: f64, lambda: f64) -> f64 {
    debug_assert!(y >= 0.0 && y.fract() == 0.0, "Poisson count must be a nonnegative integer");
    if lambda == 0.0 {
        return if y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y * lambda.ln() - lambda - ln_gamma(y + 1.0)
}

/// Inversion sampler; rates in these models are small (a few counts).
fn sample_poisson(lambda: f64, rng: &mut dyn RngCore) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut k = 0.0f64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf && k < 1e6 {
        k += 1.0;
        p *= lambda / k;
        cdf += p;
    }
    k
}

#[derive(Clone, Debug)]
pub struct PoissonModel1 {
    latent: Ar1Latent,
    c: f64,
    sigma: f64,
    obs: ObservationPath,
}

impl PoissonModel1 {
    pub fn new(latent: Ar1Latent, c: f64, sigma: f64, obs: ObservationPath) -> Result<Self> {
        if obs.dim() != latent.dim() {
            return Err(Error::DimensionMismatch {
                expected: latent.dim(),
                got: obs.dim(),
                context: "Poisson model 1 observation dimension",
            });
        }
        Ok(PoissonModel1 {
            latent,
            c,
            sigma,
            obs,
        })
    }

    pub fn simulate(
        latent: Ar1Latent,
        c: f64,
        sigma: f64,
        t_len: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Self, StatePath)> {
        let d = latent.dim();
        let mut states = Vec::with_capacity(t_len);
        let mut obs = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x = if t == 0 {
                latent.sample_initial(rng)
            } else {
                latent.sample_transition(&states[t - 1], rng)
            };
            let y = State::from_fn(d, |i, _| sample_poisson((c + sigma * x[i]).exp(), rng));
            states.push(x);
            obs.push(y);
        }
        let path = StatePath::new(states)?;
        let model = PoissonModel1::new(latent, c, sigma, ObservationPath::new(obs)?)?;
        Ok((model, path))
    }

    pub fn latent(&self) -> &Ar1Latent {
        &self.latent
    }

    pub fn observations(&self) -> &ObservationPath {
        &self.obs
    }
}

impl StateSpaceModel for PoissonModel1 {
    fn state_dim(&self) -> usize {
        self.latent.dim()
    }

    fn obs_dim(&self) -> usize {
        self.latent.dim()
    }

    fn len(&self) -> usize {
        self.obs.len()
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        self.latent.sample_initial(rng)
    }

    fn log_initial(&self, x: &State) -> f64 {
        self.latent.log_initial(x)
    }

    fn sample_transition(&self, x_prev: &State, rng: &mut dyn RngCore) -> State {
        self.latent.sample_transition(x_prev, rng)
    }

    fn log_transition(&self, x_prev: &State, x: &State) -> f64 {
        self.latent.log_transition(x_prev, x)
    }

    fn log_observation(&self, t: usize, x: &State) -> f64 {
        let y = &self.obs[t];
        (0..x.len())
            .map(|i| poisson_logpmf(y[i], (self.c + self.sigma * x[i]).exp()))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct PoissonModel2 {
    latent: Ar1Latent,
    sigma: f64,
    obs: ObservationPath,
}

impl PoissonModel2 {
    pub fn new(latent: Ar1Latent, sigma: f64, obs: ObservationPath) -> Result<Self> {
        if obs.dim() != latent.dim() {
            return Err(Error::DimensionMismatch {
                expected: latent.dim(),
                got: obs.dim(),
                context: "Poisson model 2 observation dimension",
            });
        }
        Ok(PoissonModel2 { latent, sigma, obs })
    }

    pub fn simulate(
        latent: Ar1Latent,
        sigma: f64,
        t_len: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Self, StatePath)> {
        let d = latent.dim();
        let mut states = Vec::with_capacity(t_len);
        let mut obs = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x = if t == 0 {
                latent.sample_initial(rng)
            } else {
                latent.sample_transition(&states[t - 1], rng)
            };
            let y = State::from_fn(d, |i, _| sample_poisson(sigma * x[i].abs(), rng));
            states.push(x);
            obs.push(y);
        }
        let path = StatePath::new(states)?;
        let model = PoissonModel2::new(latent, sigma, ObservationPath::new(obs)?)?;
        Ok((model, path))
    }

    pub fn latent(&self) -> &Ar1Latent {
        &self.latent
    }

    pub fn observations(&self) -> &ObservationPath {
        &self.obs
    }
}

impl StateSpaceModel for PoissonModel2 {
    fn state_dim(&self) -> usize {
        self.latent.dim()
    }

    fn obs_dim(&self) -> usize {
        self.latent.dim()
    }

    fn len(&self) -> usize {
        self.obs.len()
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        self.latent.sample_initial(rng)
    }

    fn log_initial(&self, x: &State) -> f64 {
        self.latent.log_initial(x)
    }

    fn sample_transition(&self, x_prev: &State, rng: &mut dyn RngCore) -> State {
        self.latent.sample_transition(x_prev, rng)
    }

    fn log_transition(&self, x_prev: &State, x: &State) -> f64 {
        self.latent.log_transition(x_prev, x)
    }

    fn log_observation(&self, t: usize, x: &State) -> f64 {
        let y = &self.obs[t];
        (0..x.len())
            .map(|i| poisson_logpmf(y[i], self.sigma * x[i].abs()))
            .sum()
    }
}
