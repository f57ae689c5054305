//! State-space model and proposal contracts plus the path containers shared
//! by every kernel.

use nalgebra::DVector;
use rand::RngCore;

use crate::error::{Error, Result};

/// A single latent state.
pub type State = DVector<f64>;

/// One latent trajectory `x_{1:T}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePath {
    states: Vec<State>,
}

impl StatePath {
    pub fn new(states: Vec<State>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("state path must have length >= 1"));
        }
        let d = states[0].len();
        for s in &states {
            if s.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.len(),
                    context: "state path entries",
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "state path entry",
                });
            }
        }
        Ok(StatePath { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }
}

impl std::ops::Index<usize> for StatePath {
    type Output = State;
    fn index(&self, t: usize) -> &State {
        &self.states[t]
    }
}

/// One observation sequence `y_{1:T}` (integer-valued observations for the
/// Poisson models are stored as reals).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationPath {
    obs: Vec<DVector<f64>>,
}

impl ObservationPath {
    pub fn new(obs: Vec<DVector<f64>>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::invalid("observation path must have length >= 1"));
        }
        let m = obs[0].len();
        for o in &obs {
            if o.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: o.len(),
                    context: "observation path entries",
                });
            }
        }
        Ok(ObservationPath { obs })
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.obs[0].len()
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.obs
    }
}

impl std::ops::Index<usize> for ObservationPath {
    type Output = DVector<f64>;
    fn index(&self, t: usize) -> &DVector<f64> {
        &self.obs[t]
    }
}

/// A state-space model conditioned on a stored observation sequence.
///
/// Log-densities must be finite or `-inf`, never NaN. Time indices are
/// zero-based; `len()` is the number of time steps `T`.
pub trait StateSpaceModel: Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn len(&self) -> usize;

    fn sample_initial(&self, rng: &mut dyn RngCore) -> State;
    fn log_initial(&self, x: &State) -> f64;

    fn sample_transition(&self, x_prev: &State, rng: &mut dyn RngCore) -> State;
    fn log_transition(&self, x_prev: &State, x: &State) -> f64;

    /// Log observation density `log g(y_t | x)` against the stored `y_t`.
    fn log_observation(&self, t: usize, x: &State) -> f64;
}

/// A proposal `q_1(x_1)`, `q_t(x_t | x_{t-1})`; `x_prev` is `None` at `t = 0`.
pub trait Proposal: Sync {
    fn sample(&self, t: usize, x_prev: Option<&State>, rng: &mut dyn RngCore) -> State;
    fn logpdf(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64;
}

impl<P: Proposal + ?Sized> Proposal for &P {
    fn sample(&self, t: usize, x_prev: Option<&State>, rng: &mut dyn RngCore) -> State {
        (**self).sample(t, x_prev, rng)
    }
    fn logpdf(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        (**self).logpdf(t, x_prev, x)
    }
}

impl<P: Proposal + ?Sized> Proposal for Box<P> {
    fn sample(&self, t: usize, x_prev: Option<&State>, rng: &mut dyn RngCore) -> State {
        (**self).sample(t, x_prev, rng)
    }
    fn logpdf(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        (**self).logpdf(t, x_prev, x)
    }
}

/// Bootstrap proposal: the model's initial and transition densities.
pub struct BootstrapProposal<'a, M: StateSpaceModel>(pub &'a M);

impl<M: StateSpaceModel> Proposal for BootstrapProposal<'_, M> {
    fn sample(&self, t: usize, x_prev: Option<&State>, rng: &mut dyn RngCore) -> State {
        match (t, x_prev) {
            (0, _) => self.0.sample_initial(rng),
            (_, Some(xp)) => self.0.sample_transition(xp, rng),
            (_, None) => panic!("x_prev required for t > 0"),
        }
    }

    fn logpdf(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        match (t, x_prev) {
            (0, _) => self.0.log_initial(x),
            (_, Some(xp)) => self.0.log_transition(xp, x),
            (_, None) => panic!("x_prev required for t > 0"),
        }
    }
}
