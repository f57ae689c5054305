//! Linear-Gaussian benchmark: AR(1) latent process observed with identity
//! map and unit noise.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::gauss::LN_2PI;
use crate::kalman::LgssmParams;
use crate::ssm::{ObservationPath, State, StatePath, StateSpaceModel};

use super::latent::Ar1Latent;

#[derive(Clone, Debug)]
pub struct LinearGaussianModel {
    latent: Ar1Latent,
    obs: ObservationPath,
}

impl LinearGaussianModel {
    pub fn new(latent: Ar1Latent, obs: ObservationPath) -> Result<Self> {
        if obs.dim() != latent.dim() {
            return Err(crate::error::Error::DimensionMismatch {
                expected: latent.dim(),
                got: obs.dim(),
                context: "linear-Gaussian observation dimension",
            });
        }
        Ok(LinearGaussianModel { latent, obs })
    }

    /// Forward-simulates a dataset and returns the conditioned model with
    /// the true path.
    pub fn simulate(
        latent: Ar1Latent,
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
            let y = &x + DVector::from_fn(d, |_, _| rand::Rng::sample(rng, StandardNormal));
            states.push(x);
            obs.push(y);
        }
        let path = StatePath::new(states)?;
        let model = LinearGaussianModel::new(latent, ObservationPath::new(obs)?)?;
        Ok((model, path))
    }

    pub fn latent(&self) -> &Ar1Latent {
        &self.latent
    }

    pub fn observations(&self) -> &ObservationPath {
        &self.obs
    }

    /// Matrices for the exact Kalman oracle (identity C, unit R).
    pub fn lgssm_params(&self) -> LgssmParams {
        let d = self.latent.dim();
        LgssmParams {
            phi: self.latent.phi_mat().clone(),
            sigma: self.latent.sigma().clone(),
            sigma1: self.latent.sigma1().clone(),
            c: DMatrix::identity(d, d),
            r: DMatrix::identity(d, d),
        }
    }
}

impl StateSpaceModel for LinearGaussianModel {
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
        let dev = &self.obs[t] - x;
        -0.5 * (self.latent.dim() as f64 * LN_2PI + dev.norm_squared())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_variance_of_x1() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let latent = Ar1Latent::uniform(1, 0.9, 0.0).unwrap();
        let n = 10_000usize;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let (_, path) = LinearGaussianModel::simulate(latent.clone(), 1, &mut rng).unwrap();
            xs.push(path[0][0]);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let expected = 1.0 / (1.0 - 0.81);
        // MC error on the variance of a Gaussian sample: sd ~ var * sqrt(2/n).
        let tol = 4.0 * expected * (2.0 / n as f64).sqrt();
        assert!((var - expected).abs() < tol, "var {var} vs {expected}");
    }

    #[test]
    fn near_frozen_dynamics_yields_near_constant_path() {
        // phi close to 1 and tiny process noise: the path barely moves.
        let latent = Ar1Latent::new(vec![0.999999], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = latent.sample_initial(&mut rng);
        let mut x = x0.clone();
        for _ in 0..20 {
            // Shrink noise by evaluating the mean map only.
            x = latent.transition_mean(&x);
        }
        assert!((x[0] - x0[0]).abs() < 1e-4 * x0[0].abs().max(1.0));
    }

    #[test]
    fn log_observation_matches_gaussian() {
        let latent = Ar1Latent::uniform(2, 0.9, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (model, _) = LinearGaussianModel::simulate(latent, 4, &mut rng).unwrap();
        let x = State::from_vec(vec![0.3, -0.8]);
        let g = crate::gauss::Gaussian::new(
            model.observations()[2].clone(),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!((model.log_observation(2, &x) - g.logpdf(&x)).abs() < 1e-12);
    }
}
