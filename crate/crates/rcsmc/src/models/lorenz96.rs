//! Lorenz-96 benchmark: the cyclic chaotic SDE discretized by integrating
//! the drift with classical RK4 over each observation interval and adding
//! Brownian increments; partially observed with small noise.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gauss::Gaussian;
use crate::ssm::{ObservationPath, State, StatePath, StateSpaceModel};

/// Lorenz-96 drift: component `i` is
/// `-x_{i-1} x_{i-2} + x_{i-1} x_{i+1} - x_i + alpha` with cyclic indices.
pub fn lorenz_drift(x: &State, alpha: f64) -> State {
    let d = x.len();
    State::from_fn(d, |i, _| {
        let im1 = x[(i + d - 1) % d];
        let im2 = x[(i + d - 2) % d];
        let ip1 = x[(i + 1) % d];
        -im1 * im2 + im1 * ip1 - x[i] + alpha
    })
}

/// Classical fixed-step RK4. A negative `total` integrates the
/// time-reversed flow; `|total| / step` must be integral.
pub fn rk4_integrate<F: Fn(&State) -> State>(
    drift: F,
    x: &State,
    total: f64,
    step: f64,
) -> Result<State> {
    if step <= 0.0 {
        return Err(Error::invalid("RK4 step size must be positive"));
    }
    let n_real = total.abs() / step;
    let n = n_real.round();
    if (n_real - n).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "duration {total} is not an integer multiple of step {step}"
        )));
    }
    let dt = step.copysign(total);
    let mut x = x.clone();
    for _ in 0..n as u64 {
        let k1 = drift(&x);
        let k2 = drift(&(&x + &k1 * (dt / 2.0)));
        let k3 = drift(&(&x + &k2 * (dt / 2.0)));
        let k4 = drift(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct Lorenz96Model {
    alpha: f64,
    sigma_f_sq: f64,
    obs_var: f64,
    h: f64,
    rk4_step: f64,
    /// Number of observed leading coordinates.
    p: usize,
    init: Gaussian,
    trans_noise: Gaussian,
    obs: ObservationPath,
}

impl Lorenz96Model {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        p: usize,
        alpha: f64,
        sigma_f_sq: f64,
        obs_var: f64,
        h: f64,
        rk4_step: f64,
        obs: ObservationPath,
    ) -> Result<Self> {
        if d < 4 {
            return Err(Error::invalid("Lorenz-96 requires d >= 4"));
        }
        if p > d {
            return Err(Error::invalid("observed coordinates p must satisfy p <= d"));
        }
        let steps = h / rk4_step;
        if rk4_step <= 0.0 || (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::invalid("h / rk4_step must be a positive integer"));
        }
        if obs.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: obs.dim(),
                context: "Lorenz-96 observation dimension",
            });
        }
        let init = Gaussian::new(State::zeros(d), DMatrix::identity(d, d) * sigma_f_sq)?;
        let trans_noise =
            Gaussian::new(State::zeros(d), DMatrix::identity(d, d) * (sigma_f_sq * h))?;
        Ok(Lorenz96Model {
            alpha,
            sigma_f_sq,
            obs_var,
            h,
            rk4_step,
            p,
            init,
            trans_noise,
            obs,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn simulate(
        d: usize,
        p: usize,
        alpha: f64,
        sigma_f_sq: f64,
        obs_var: f64,
        h: f64,
        rk4_step: f64,
        t_len: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Self, StatePath)> {
        let dummy = ObservationPath::new(vec![State::zeros(p)])?;
        let model = Lorenz96Model::new(d, p, alpha, sigma_f_sq, obs_var, h, rk4_step, dummy)?;
        let obs_noise = Gaussian::new(State::zeros(p), DMatrix::identity(p, p) * obs_var)?;
        let mut states = Vec::with_capacity(t_len);
        let mut obs = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x = if t == 0 {
                model.init.sample(rng)
            } else {
                model.forward_map(&states[t - 1])? + model.trans_noise.sample_dev(rng)
            };
            let y = x.rows(0, p).into_owned() + obs_noise.sample_dev(rng);
            states.push(x);
            obs.push(y);
        }
        let path = StatePath::new(states)?;
        let model =
            Lorenz96Model::new(d, p, alpha, sigma_f_sq, obs_var, h, rk4_step, ObservationPath::new(obs)?)?;
        Ok((model, path))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma_f_sq(&self) -> f64 {
        self.sigma_f_sq
    }

    pub fn obs_var(&self) -> f64 {
        self.obs_var
    }

    pub fn n_observed(&self) -> usize {
        self.p
    }

    pub fn initial(&self) -> &Gaussian {
        &self.init
    }

    pub fn transition_noise(&self) -> &Gaussian {
        &self.trans_noise
    }

    pub fn observations(&self) -> &ObservationPath {
        &self.obs
    }

    /// The deterministic transition mean `u(x)`: drift integrated over one
    /// observation interval `[0, h]`.
    pub fn forward_map(&self, x: &State) -> Result<State> {
        rk4_integrate(|x| lorenz_drift(x, self.alpha), x, self.h, self.rk4_step)
    }

    /// `u^{-1}(x)`: the RK4 scheme run backward in time.
    pub fn backward_map(&self, x: &State) -> Result<State> {
        rk4_integrate(|x| lorenz_drift(x, self.alpha), x, -self.h, self.rk4_step)
    }
}

impl StateSpaceModel for Lorenz96Model {
    fn state_dim(&self) -> usize {
        self.init.dim()
    }

    fn obs_dim(&self) -> usize {
        self.p
    }

    fn len(&self) -> usize {
        self.obs.len()
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        self.init.sample(rng)
    }

    fn log_initial(&self, x: &State) -> f64 {
        self.init.logpdf(x)
    }

    fn sample_transition(&self, x_prev: &State, rng: &mut dyn RngCore) -> State {
        self.forward_map(x_prev).expect("validated step ratio") + self.trans_noise.sample_dev(rng)
    }

    fn log_transition(&self, x_prev: &State, x: &State) -> f64 {
        let mean = self.forward_map(x_prev).expect("validated step ratio");
        self.trans_noise.logpdf_at_dev(&(x - mean))
    }

    fn log_observation(&self, t: usize, x: &State) -> f64 {
        let y = &self.obs[t];
        let mut ll = 0.0;
        for i in 0..self.p {
            let dev = y[i] - x[i];
            ll += -0.5 * (crate::gauss::LN_2PI + self.obs_var.ln() + dev * dev / self.obs_var);
        }
        ll
    }
}
