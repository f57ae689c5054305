//! Generic SMC machinery: unconditional SMC (for initialization), the
//! conditional SMC forward pass, backward sampling, and their composition
//! into the iterated cSMC Markov kernel.
//!
//! Within a time step, the per-particle ancestor draws, proposal draws and
//! weight evaluations run through [`crate::par::map_indexed`]: each free
//! particle gets its own deterministically derived rng stream, so parallel
//! and sequential execution produce bitwise-identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gauss::{categorical_sample, log_sum_exp};
use crate::par;
use crate::ssm::{Proposal, State, StatePath, StateSpaceModel};

/// Sequence of auxiliary targets `{pi_t}` described through incremental
/// log-weights and backward-sampling increments, paired with the proposal
/// they are defined against. Time is zero-based; `x_prev` is `None` at
/// `t = 0`.
pub trait AuxiliaryTarget: Sync {
    fn len(&self) -> usize;

    fn proposal(&self) -> &dyn Proposal;

    /// Unnormalized `log beta_t(x_{t-1}, x_t)`, the increment
    /// `pi_t / pi_{t-1}` up to a per-t constant.
    fn log_beta(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64;

    /// Incremental importance log-weight `log w_t = log beta_t - log q_t`.
    fn log_w(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        self.log_beta(t, x_prev, x) - self.proposal().logpdf(t, x_prev, x)
    }
}

/// Default auxiliary targets for a state-space model:
/// `pi_t(x_{1:t}) = p(x_{1:t} | y_{1:t})`, so the increment is
/// `f(x_t | x_{t-1}) g(y_t | x_t)` (and `mu g` at `t = 0`).
pub struct DefaultTarget<'a, M: StateSpaceModel, P: Proposal> {
    pub model: &'a M,
    pub proposal: P,
}

impl<M: StateSpaceModel, P: Proposal> AuxiliaryTarget for DefaultTarget<'_, M, P> {
    fn len(&self) -> usize {
        self.model.len()
    }

    fn proposal(&self) -> &dyn Proposal {
        &self.proposal
    }

    fn log_beta(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        let prior = match (t, x_prev) {
            (0, _) => self.model.log_initial(x),
            (_, Some(xp)) => self.model.log_transition(xp, x),
            (_, None) => panic!("x_prev required for t > 0"),
        };
        prior + self.model.log_observation(t, x)
    }
}

/// cSMC kernel configuration.
#[derive(Clone, Copy, Debug)]
pub struct CsmcConfig {
    n_particles: usize,
}

impl CsmcConfig {
    pub fn new(n_particles: usize) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::invalid("cSMC requires N >= 2 particles"));
        }
        Ok(CsmcConfig { n_particles })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }
}

/// The particle cloud left behind by a cSMC forward pass.
pub struct ParticleSystem {
    /// `particles[t][i]`.
    particles: Vec<Vec<State>>,
    /// `ancestors[t-1][i]` is the time-`t-1` index of particle `i` at time `t`.
    ancestors: Vec<Vec<usize>>,
    /// `log_weights[t][i]`, incremental importance log-weights.
    log_weights: Vec<Vec<f64>>,
    /// Forward-pass slots `b_t` of the conditioned path.
    cond_slots: Vec<usize>,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn n_particles(&self) -> usize {
        self.particles[0].len()
    }

    pub fn particle(&self, t: usize, i: usize) -> &State {
        &self.particles[t][i]
    }

    pub fn ancestor(&self, t: usize, i: usize) -> usize {
        self.ancestors[t - 1][i]
    }

    pub fn log_weights(&self, t: usize) -> &[f64] {
        &self.log_weights[t]
    }

    pub fn cond_slot(&self, t: usize) -> usize {
        self.cond_slots[t]
    }
}

/// Independent per-particle stream for time step `t`, derived from one
/// freshly drawn seed per step.
fn particle_rng(step_seed: u64, i: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(step_seed);
    r.set_stream(i as u64);
    r
}

/// Unconditional bootstrap-style SMC with multinomial resampling at every
/// step. Returns one path traced back from a final-weight categorical draw
/// and the unbiased log normalizing-constant estimate.
pub fn smc_sample<T: AuxiliaryTarget + ?Sized, R: Rng>(
    target: &T,
    n: usize,
    rng: &mut R,
) -> Result<(StatePath, f64)> {
    if n == 0 {
        return Err(Error::invalid("SMC requires N >= 1 particles"));
    }
    let t_len = target.len();
    let mut particles: Vec<Vec<State>> = Vec::with_capacity(t_len);
    let mut ancestors: Vec<Vec<usize>> = Vec::with_capacity(t_len.saturating_sub(1));
    let mut log_weights: Vec<Vec<f64>> = Vec::with_capacity(t_len);
    let mut log_z = 0.0;

    for t in 0..t_len {
        let step_seed: u64 = rng.random();
        let prev = if t > 0 {
            Some((&particles[t - 1], &log_weights[t - 1]))
        } else {
            None
        };
        let drawn: Vec<Result<(usize, State)>> = par::map_indexed(n, |i| {
            let mut r = particle_rng(step_seed, i);
            let (anc, x_prev) = match prev {
                Some((ps, lw)) => {
                    let a = categorical_sample(lw, &mut r)
                        .map_err(|_| Error::DegenerateWeights { t: Some(t) })?;
                    (a, Some(&ps[a]))
                }
                None => (0, None),
            };
            let x = target.proposal().sample(t, x_prev, &mut r);
            Ok((anc, x))
        });
        let mut anc = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for d in drawn {
            let (a, x) = d?;
            anc.push(a);
            states.push(x);
        }
        let lw: Vec<f64> = par::map_indexed(n, |i| {
            let x_prev = if t > 0 {
                Some(&particles[t - 1][anc[i]])
            } else {
                None
            };
            let w = target.log_w(t, x_prev, &states[i]);
            debug_assert!(!w.is_nan(), "NaN incremental weight at t = {t}");
            w
        });
        let lse = log_sum_exp(&lw);
        if !lse.is_finite() {
            return Err(Error::DegenerateWeights { t: Some(t) });
        }
        log_z += lse - (n as f64).ln();
        if t > 0 {
            ancestors.push(anc);
        }
        particles.push(states);
        log_weights.push(lw);
    }

    // Ancestral tracing from a final-weight draw.
    let mut idx = categorical_sample(&log_weights[t_len - 1], rng)
        .map_err(|_| Error::DegenerateWeights { t: Some(t_len - 1) })?;
    let mut states = vec![particles[t_len - 1][idx].clone()];
    for t in (0..t_len - 1).rev() {
        idx = ancestors[t][idx];
        states.push(particles[t][idx].clone());
    }
    states.reverse();
    Ok((StatePath::new(states)?, log_z))
}

/// The cSMC forward pass: pins the reference path at uniformly drawn slots
/// `b_t`, resamples and propagates the remaining particles, and computes all
/// `N` incremental weights per step.
pub fn csmc_step<T: AuxiliaryTarget + ?Sized, R: Rng>(
    target: &T,
    x_ref: &StatePath,
    cfg: &CsmcConfig,
    rng: &mut R,
) -> Result<ParticleSystem> {
    let t_len = target.len();
    let n = cfg.n_particles();
    if x_ref.len() != t_len {
        return Err(Error::DimensionMismatch {
            expected: t_len,
            got: x_ref.len(),
            context: "reference path length",
        });
    }

    let mut particles: Vec<Vec<State>> = Vec::with_capacity(t_len);
    let mut ancestors: Vec<Vec<usize>> = Vec::with_capacity(t_len.saturating_sub(1));
    let mut log_weights: Vec<Vec<f64>> = Vec::with_capacity(t_len);
    let mut cond_slots: Vec<usize> = Vec::with_capacity(t_len);

    for t in 0..t_len {
        let b_t = rng.random_range(0..n);
        let step_seed: u64 = rng.random();
        let prev = if t > 0 {
            Some((&particles[t - 1], &log_weights[t - 1]))
        } else {
            None
        };
        let drawn: Vec<Result<(usize, State)>> = par::map_indexed(n, |i| {
            if i == b_t {
                // The conditioned particle's ancestry resolves to the
                // conditioned slot of the previous step.
                let a = cond_slots.last().copied().unwrap_or(0);
                return Ok((a, x_ref[t].clone()));
            }
            let mut r = particle_rng(step_seed, i);
            let (anc, x_prev) = match prev {
                Some((ps, lw)) => {
                    let a = categorical_sample(lw, &mut r)
                        .map_err(|_| Error::DegenerateWeights { t: Some(t) })?;
                    (a, Some(&ps[a]))
                }
                None => (0, None),
            };
            let x = target.proposal().sample(t, x_prev, &mut r);
            Ok((anc, x))
        });
        let mut anc = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for d in drawn {
            let (a, x) = d?;
            anc.push(a);
            states.push(x);
        }
        let lw: Vec<f64> = par::map_indexed(n, |i| {
            let x_prev = if t > 0 {
                Some(&particles[t - 1][anc[i]])
            } else {
                None
            };
            let w = target.log_w(t, x_prev, &states[i]);
            debug_assert!(!w.is_nan(), "NaN incremental weight at t = {t}");
            w
        });
        // Degenerate only when every slot, including the conditioned one,
        // carries -inf; the conditioned path otherwise keeps the system alive.
        if !log_sum_exp(&lw).is_finite() {
            return Err(Error::DegenerateWeights { t: Some(t) });
        }
        if t > 0 {
            ancestors.push(anc);
        }
        particles.push(states);
        log_weights.push(lw);
        cond_slots.push(b_t);
    }

    Ok(ParticleSystem {
        particles,
        ancestors,
        log_weights,
        cond_slots,
    })
}

/// Backward sampling: `b_T ~ Cat{w_T}`, then for `t = T-1, ..., 1`
/// `b_t ~ Cat{beta_{t+1}(x_t^j, x_{t+1}^{b_{t+1}}) w_t(..., x_t^j)}`.
pub fn backward_sample<T: AuxiliaryTarget + ?Sized, R: Rng>(
    sys: &ParticleSystem,
    target: &T,
    rng: &mut R,
) -> Result<StatePath> {
    let t_len = sys.len();
    let n = sys.n_particles();
    let last = t_len - 1;
    let mut idx = vec![0usize; t_len];
    idx[last] = categorical_sample(&sys.log_weights[last], rng)
        .map_err(|_| Error::DegenerateWeights { t: Some(last) })?;
    for t in (0..last).rev() {
        let x_next = &sys.particles[t + 1][idx[t + 1]];
        let scores: Vec<f64> = par::map_indexed(n, |j| {
            sys.log_weights[t][j] + target.log_beta(t + 1, Some(&sys.particles[t][j]), x_next)
        });
        idx[t] = categorical_sample(&scores, rng)
            .map_err(|_| Error::DegenerateWeights { t: Some(t) })?;
    }
    StatePath::new(
        (0..t_len)
            .map(|t| sys.particles[t][idx[t]].clone())
            .collect(),
    )
}

/// Path extraction by ancestral tracing: `b_T ~ Cat{w_T}`, then
/// `b_t = a_t^{b_{t+1}}` follows the stored ancestry. This is the original
/// particle-Gibbs path update; it is cheaper than backward sampling but the
/// resampling genealogy coalesces going backward, so early-time states are
/// refreshed rarely on long series.
pub fn ancestor_trace<R: Rng>(sys: &ParticleSystem, rng: &mut R) -> Result<StatePath> {
    let t_len = sys.len();
    let last = t_len - 1;
    let mut idx = categorical_sample(&sys.log_weights[last], rng)
        .map_err(|_| Error::DegenerateWeights { t: Some(last) })?;
    let mut states = vec![sys.particles[last][idx].clone()];
    for t in (0..last).rev() {
        idx = sys.ancestors[t][idx];
        states.push(sys.particles[t][idx].clone());
    }
    states.reverse();
    StatePath::new(states)
}

/// How the iterated cSMC kernel extracts the returned path from the forward
/// pass. Both choices leave the target invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathUpdate {
    /// Resample every `b_t` against the backward kernel (better mixing).
    BackwardSampling,
    /// Trace the ancestry of a single terminal draw (the original
    /// particle-Gibbs update).
    AncestorTracing,
}

/// One step of the pi-invariant iterated cSMC Markov kernel: a cSMC forward
/// pass followed by backward sampling.
pub fn iterated_csmc_kernel<T: AuxiliaryTarget + ?Sized, R: Rng>(
    target: &T,
    x: &StatePath,
    cfg: &CsmcConfig,
    rng: &mut R,
) -> Result<StatePath> {
    let sys = csmc_step(target, x, cfg, rng)?;
    backward_sample(&sys, target, rng)
}

/// Iterated cSMC kernel with an explicit choice of path update.
pub fn iterated_csmc_kernel_with<T: AuxiliaryTarget + ?Sized, R: Rng>(
    target: &T,
    x: &StatePath,
    cfg: &CsmcConfig,
    path_update: PathUpdate,
    rng: &mut R,
) -> Result<StatePath> {
    let sys = csmc_step(target, x, cfg, rng)?;
    match path_update {
        PathUpdate::BackwardSampling => backward_sample(&sys, target, rng),
        PathUpdate::AncestorTracing => ancestor_trace(&sys, rng),
    }
}
