//! Informed mixture proposals for replica updates: each component conditions
//! the one-step dynamics on one of the other replicas' next states, weighted
//! by the marginal evidence of that next state over the mixture denominator.

use nalgebra::{Cholesky, DMatrix};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gauss::{Gaussian, GaussianMixture};
use crate::replica::{BifEstimator, EnsembleView, ReplicaProposalBuilder};
use crate::ssm::{Proposal, State};

use super::latent::Ar1Latent;
use super::lorenz96::Lorenz96Model;

fn inverse_spd(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    Ok(Cholesky::new(sym)
        .ok_or(Error::NotPositiveDefinite { context })?
        .inverse())
}

/// Exact conditional mixture proposal for AR(1)-Gaussian dynamics:
/// `q_t(x | x_prev) ∝ Σ_j w_j f(x | x_prev) f(x'_j | x)` with
/// `w_j = 1 / p_hat(x'_j | y_{1:t})`, evaluated in closed form. Components
/// share the posterior covariance `V = (Σ⁻¹ + ΦᵀΣ⁻¹Φ)⁻¹` (or `V0` with the
/// stationary prior at `t = 0`), and component weights absorb the marginal
/// `N(x'_j; Φ² x_prev, ΦΣΦᵀ + Σ)`. Valid for singular `Φ`.
pub struct LgReplicaProposal {
    t_len: usize,
    phi2: DMatrix<f64>,
    sigma_inv_phi: DMatrix<f64>,
    phit_sigma_inv: DMatrix<f64>,
    /// Zero-mean component template with covariance V (t >= 1).
    v: Gaussian,
    /// Zero-mean component template with covariance V0 (t = 0).
    v0: Gaussian,
    /// N(0, Φ Σ Φᵀ + Σ) for the t >= 1 component weights.
    marg: Gaussian,
    /// N(0, Φ Σ1 Φᵀ + Σ) for the t = 0 component weights.
    marg0: Gaussian,
    trans_noise: Gaussian,
    init: Gaussian,
    /// `next[t][j]` is the time `t+1` state of the j-th other replica.
    next: Vec<Vec<State>>,
    /// `pred[t][j] = log p_hat(next[t][j] | y_{1:t})`, the mixture denominator.
    pred: Vec<Vec<f64>>,
}

impl LgReplicaProposal {
    pub fn new(latent: &Ar1Latent, view: &EnsembleView, est: &BifEstimator) -> Result<Self> {
        let t_len = view.len();
        let phi = latent.phi_mat();
        let sigma_inv = inverse_spd(latent.sigma(), "transition covariance")?;
        let sigma1_inv = inverse_spd(latent.sigma1(), "initial covariance")?;
        let phit_sigma_inv = phi.transpose() * &sigma_inv;
        let info = &phit_sigma_inv * phi;
        let v_cov = inverse_spd(&(&sigma_inv + &info), "proposal posterior precision")?;
        let v0_cov = inverse_spd(&(&sigma1_inv + &info), "proposal posterior precision")?;
        let d = latent.dim();
        let zero = State::zeros(d);
        let marg_cov = phi * latent.sigma() * phi.transpose() + latent.sigma();
        let marg0_cov = phi * latent.sigma1() * phi.transpose() + latent.sigma();
        let mut next = Vec::with_capacity(t_len.saturating_sub(1));
        let mut pred = Vec::with_capacity(t_len.saturating_sub(1));
        for t in 0..t_len.saturating_sub(1) {
            let states: Vec<State> = view.states_at(t + 1).to_vec();
            let terms = states
                .iter()
                .map(|x| est.predictive_term(t + 1, x))
                .collect();
            next.push(states);
            pred.push(terms);
        }
        Ok(LgReplicaProposal {
            t_len,
            phi2: phi * phi,
            sigma_inv_phi: &sigma_inv * phi,
            phit_sigma_inv,
            v: Gaussian::new(zero.clone(), v_cov)?,
            v0: Gaussian::new(zero.clone(), v0_cov)?,
            marg: Gaussian::new(zero.clone(), marg_cov)?,
            marg0: Gaussian::new(zero.clone(), marg0_cov)?,
            trans_noise: Gaussian::new(zero, latent.sigma().clone())?,
            init: latent.initial().clone(),
            next,
            pred,
        })
    }

    /// The mixture at time `t`; `None` at the terminal step where the
    /// proposal falls back to the bare dynamics.
    pub fn mixture_at(&self, t: usize, x_prev: Option<&State>) -> Option<GaussianMixture> {
        if t + 1 >= self.t_len {
            return None;
        }
        let n = self.next[t].len();
        let mut weights = Vec::with_capacity(n);
        let mut comps = Vec::with_capacity(n);
        for (j, xn) in self.next[t].iter().enumerate() {
            let (mean, lw) = match (t, x_prev) {
                (0, _) => (
                    self.v0.cov() * (&self.phit_sigma_inv * xn),
                    self.marg0.logpdf(xn),
                ),
                (_, Some(xp)) => (
                    self.v.cov() * (&self.sigma_inv_phi * xp + &self.phit_sigma_inv * xn),
                    self.marg.logpdf_at_dev(&(xn - &self.phi2 * xp)),
                ),
                (_, None) => panic!("x_prev required for t > 0"),
            };
            let template = if t == 0 { &self.v0 } else { &self.v };
            weights.push(lw - self.pred[t][j]);
            comps.push(template.with_mean(mean));
        }
        Some(GaussianMixture::new(weights, comps).expect("finite weights, shared dimension"))
    }
}

impl Proposal for LgReplicaProposal {
    fn sample(&self, t: usize, x_prev: Option<&State>, rng: &mut dyn RngCore) -> State {
        match self.mixture_at(t, x_prev) {
            Some(mix) => mix.sample(rng),
            None => match (t, x_prev) {
                (0, _) => self.init.sample(rng),
                (_, Some(xp)) => self.trans_mean(xp) + self.trans_noise.sample_dev(rng),
                (_, None) => panic!("x_prev required for t > 0"),
            },
        }
    }

    fn logpdf(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        match self.mixture_at(t, x_prev) {
            Some(mix) => mix.logpdf(x),
            None => match (t, x_prev) {
                (0, _) => self.init.logpdf(x),
                (_, Some(xp)) => self.trans_noise.logpdf_at_dev(&(x - self.trans_mean(xp))),
                (_, None) => panic!("x_prev required for t > 0"),
            },
        }
    }
}

impl LgReplicaProposal {
    fn trans_mean(&self, x_prev: &State) -> State {
        // Σ (Σ⁻¹ Φ x_prev) = Φ x_prev without storing Φ separately.
        self.trans_noise.cov() * (&self.sigma_inv_phi * x_prev)
    }
}

/// Builds [`LgReplicaProposal`] for each replica update of an AR(1)-latent
/// model (linear-Gaussian or Poisson observations).
pub struct Ar1ProposalBuilder {
    latent: Ar1Latent,
}

impl Ar1ProposalBuilder {
    pub fn new(latent: Ar1Latent) -> Self {
        Ar1ProposalBuilder { latent }
    }
}

impl ReplicaProposalBuilder for Ar1ProposalBuilder {
    fn build(
        &self,
        _k: usize,
        view: &EnsembleView,
        est: &BifEstimator,
    ) -> Box<dyn Proposal + Send + Sync + '_> {
        Box::new(
            LgReplicaProposal::new(&self.latent, view, est)
                .expect("latent covariances validated at construction"),
        )
    }
}

/// Mixture proposal for the Lorenz-96 model: component `j` multiplies the
/// one-step transition `N(u(x_prev), σ_f² h I)` by a Gaussian factor on the
/// observed coordinates centered at the back-integrated next state
/// `u⁻¹(x'_j)`. The back-integrations are cached at construction.
pub struct LorenzReplicaProposal<'a> {
    model: &'a Lorenz96Model,
    t_len: usize,
    /// Zero-mean factor template `N_p(0, σ_f² h I_p)`.
    sub: Gaussian,
    /// `back_heads[t][j]`: first p coordinates of `u⁻¹(next-state of j)`.
    back_heads: Vec<Vec<State>>,
    pred: Vec<Vec<f64>>,
}

impl<'a> LorenzReplicaProposal<'a> {
    pub fn new(
        model: &'a Lorenz96Model,
        view: &EnsembleView,
        est: &BifEstimator,
    ) -> Result<Self> {
        let t_len = view.len();
        let p = model.n_observed();
        let sub = Gaussian::new(
            State::zeros(p),
            DMatrix::identity(p, p) * model.transition_noise().cov()[(0, 0)],
        )?;
        let mut back_heads = Vec::with_capacity(t_len.saturating_sub(1));
        let mut pred = Vec::with_capacity(t_len.saturating_sub(1));
        for t in 0..t_len.saturating_sub(1) {
            let mut heads = Vec::new();
            let mut terms = Vec::new();
            for x in view.states_at(t + 1) {
                heads.push(model.backward_map(x)?.rows(0, p).into_owned());
                terms.push(est.predictive_term(t + 1, x));
            }
            back_heads.push(heads);
            pred.push(terms);
        }
        Ok(LorenzReplicaProposal {
            model,
            t_len,
            sub,
            back_heads,
            pred,
        })
    }

    fn base_at(&self, t: usize, x_prev: Option<&State>) -> Gaussian {
        match (t, x_prev) {
            (0, _) => self.model.initial().clone(),
            (_, Some(xp)) => {
                let mean = self.model.forward_map(xp).expect("validated step ratio");
                self.model.transition_noise().with_mean(mean)
            }
            (_, None) => panic!("x_prev required for t > 0"),
        }
    }

    pub fn mixture_at(&self, t: usize, x_prev: Option<&State>) -> Option<GaussianMixture> {
        if t + 1 >= self.t_len {
            return None;
        }
        let base = self.base_at(t, x_prev);
        let n = self.back_heads[t].len();
        let mut weights = Vec::with_capacity(n);
        let mut comps = Vec::with_capacity(n);
        for (j, head) in self.back_heads[t].iter().enumerate() {
            let factor = self.sub.with_mean(head.clone());
            let (comp, log_scale) = base
                .partial_product(&factor)
                .expect("diagonal covariances are SPD");
            weights.push(log_scale - self.pred[t][j]);
            comps.push(comp);
        }
        Some(GaussianMixture::new(weights, comps).expect("finite weights, shared dimension"))
    }
}

impl Proposal for LorenzReplicaProposal<'_> {
    fn sample(&self, t: usize, x_prev: Option<&State>, rng: &mut dyn RngCore) -> State {
        match self.mixture_at(t, x_prev) {
            Some(mix) => mix.sample(rng),
            None => self.base_at(t, x_prev).sample(rng),
        }
    }

    fn logpdf(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        match self.mixture_at(t, x_prev) {
            Some(mix) => mix.logpdf(x),
            None => self.base_at(t, x_prev).logpdf(x),
        }
    }
}

pub struct LorenzProposalBuilder<'a> {
    model: &'a Lorenz96Model,
}

impl<'a> LorenzProposalBuilder<'a> {
    pub fn new(model: &'a Lorenz96Model) -> Self {
        LorenzProposalBuilder { model }
    }
}

impl ReplicaProposalBuilder for LorenzProposalBuilder<'_> {
    fn build(
        &self,
        _k: usize,
        view: &EnsembleView,
        est: &BifEstimator,
    ) -> Box<dyn Proposal + Send + Sync + '_> {
        Box::new(
            LorenzReplicaProposal::new(self.model, view, est)
                .expect("model parameters validated at construction"),
        )
    }
}
