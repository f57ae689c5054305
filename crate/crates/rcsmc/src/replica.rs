//! Replica cSMC: the product target over K replicas, backward information
//! filter (BIF) estimators built from the other replicas, the per-replica
//! auxiliary targets with their incremental weights, and the full sweep with
//! mixed update scheduling.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::csmc::{iterated_csmc_kernel, smc_sample, AuxiliaryTarget, CsmcConfig, DefaultTarget};
use crate::error::{Error, Result};
use crate::gauss::log_sum_exp;
use crate::par;
use crate::ssm::{Proposal, State, StatePath, StateSpaceModel};

/// K state paths jointly targeting the product of K smoothing posteriors.
#[derive(Clone, Debug)]
pub struct ReplicaEnsemble {
    paths: Vec<StatePath>,
}

impl ReplicaEnsemble {
    pub fn new(paths: Vec<StatePath>) -> Result<Self> {
        if paths.len() < 2 {
            return Err(Error::invalid("replica ensemble requires K >= 2"));
        }
        let (t_len, d) = (paths[0].len(), paths[0].dim());
        if paths.iter().any(|p| p.len() != t_len || p.dim() != d) {
            return Err(Error::invalid("replica paths must share T and d"));
        }
        Ok(ReplicaEnsemble { paths })
    }

    pub fn n_replicas(&self) -> usize {
        self.paths.len()
    }

    pub fn path(&self, k: usize) -> &StatePath {
        &self.paths[k]
    }

    pub fn paths(&self) -> &[StatePath] {
        &self.paths
    }
}

/// Evaluator of the predictive density `log p(x_t | y_{1:t-1})` at a
/// zero-based time index (the Kalman filter provides this exactly for
/// linear-Gaussian models).
pub trait PredictiveDensity: Send + Sync {
    fn log_predictive(&self, t: usize, x: &State) -> f64;
}

/// Backward-information-filter estimator built from the other replicas'
/// states. The Monte Carlo variant divides each transition term by the
/// predictive density; the constant variant sets the predictive to 1.
#[derive(Clone)]
pub enum BifEstimator {
    ConstantPredictive,
    MonteCarloPredictive(Arc<dyn PredictiveDensity>),
}

impl BifEstimator {
    /// `log p_hat(x_t | y_{1:t-1})` used in the mixture denominator; zero for
    /// the constant approximation.
    pub fn predictive_term(&self, t: usize, x: &State) -> f64 {
        match self {
            BifEstimator::ConstantPredictive => 0.0,
            BifEstimator::MonteCarloPredictive(p) => p.log_predictive(t, x),
        }
    }
}

/// Monte Carlo BIF estimate `log p_hat(y_{t+1:T} | x)` (up to a constant)
/// from the states `next_states` of the other replicas at time `t + 1`.
/// At the terminal step (`t = T-1`) the convention `p_hat := 1` applies.
pub fn bif_log<M: StateSpaceModel>(
    est: &BifEstimator,
    model: &M,
    t: usize,
    x: &State,
    next_states: &[State],
) -> Result<f64> {
    if t + 1 >= model.len() {
        return Ok(0.0);
    }
    if next_states.is_empty() {
        return Err(Error::EmptyReplicaSet { t });
    }
    let terms: Vec<f64> = next_states
        .iter()
        .map(|xn| model.log_transition(x, xn) - est.predictive_term(t + 1, xn))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Per-time snapshot of the other replicas' states: `states_at(t)[j]` is the
/// time-`t` state of the j-th replica other than the one being updated.
#[derive(Clone, Debug)]
pub struct EnsembleView {
    states_at: Vec<Vec<State>>,
}

impl EnsembleView {
    /// Snapshot of all replicas except `k`, in replica order.
    pub fn excluding(ensemble: &ReplicaEnsemble, k: usize) -> Self {
        let t_len = ensemble.path(0).len();
        let states_at = (0..t_len)
            .map(|t| {
                ensemble
                    .paths()
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, p)| p[t].clone())
                    .collect()
            })
            .collect();
        EnsembleView { states_at }
    }

    pub fn len(&self) -> usize {
        self.states_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states_at.is_empty()
    }

    pub fn states_at(&self, t: usize) -> &[State] {
        &self.states_at[t]
    }
}

/// Auxiliary targets for one replica update:
/// `pi_t ∝ p(x_{1:t} | y_{1:t}) p_hat(y_{t+1:T} | x_t)` for `t < T-1` and the
/// plain smoothing posterior at the terminal step.
pub struct ReplicaTarget<'a, M: StateSpaceModel, P: Proposal> {
    model: &'a M,
    view: EnsembleView,
    /// `pred_terms[t][j] = log p_hat(view.states_at(t)[j] | y_{1:t-1})`.
    pred_terms: Vec<Vec<f64>>,
    proposal: P,
}

impl<'a, M: StateSpaceModel, P: Proposal> ReplicaTarget<'a, M, P> {
    pub fn new(model: &'a M, view: EnsembleView, est: &BifEstimator, proposal: P) -> Self {
        let pred_terms = (0..view.len())
            .map(|t| {
                view.states_at(t)
                    .iter()
                    .map(|x| est.predictive_term(t, x))
                    .collect()
            })
            .collect();
        ReplicaTarget {
            model,
            view,
            pred_terms,
            proposal,
        }
    }

    /// BIF estimate at time `t` with the precomputed predictive terms.
    pub fn bif(&self, t: usize, x: &State) -> f64 {
        if t + 1 >= self.model.len() {
            return 0.0;
        }
        let next = self.view.states_at(t + 1);
        let terms: Vec<f64> = next
            .iter()
            .zip(&self.pred_terms[t + 1])
            .map(|(xn, pred)| self.model.log_transition(x, xn) - pred)
            .collect();
        log_sum_exp(&terms)
    }
}

/// Builds the replica auxiliary target (incremental weights of the replica
/// update) for replica `k` from the other replicas' snapshot.
pub fn build_replica_target<'a, M: StateSpaceModel, P: Proposal>(
    model: &'a M,
    view: EnsembleView,
    est: &BifEstimator,
    proposal: P,
) -> ReplicaTarget<'a, M, P> {
    ReplicaTarget::new(model, view, est, proposal)
}

impl<M: StateSpaceModel, P: Proposal> AuxiliaryTarget for ReplicaTarget<'_, M, P> {
    fn len(&self) -> usize {
        self.model.len()
    }

    fn proposal(&self) -> &dyn Proposal {
        &self.proposal
    }

    fn log_beta(&self, t: usize, x_prev: Option<&State>, x: &State) -> f64 {
        let (prior, tail) = match (t, x_prev) {
            (0, _) => (self.model.log_initial(x), 0.0),
            (_, Some(xp)) => (self.model.log_transition(xp, x), self.bif(t - 1, xp)),
            (_, None) => panic!("x_prev required for t > 0"),
        };
        prior + self.model.log_observation(t, x) + self.bif(t, x) - tail
    }
}

/// How a replica is updated during a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateKind {
    ReplicaCsmc,
    IteratedCsmc,
    Frozen,
}

#[derive(Clone, Copy, Debug)]
pub struct ScheduleEntry {
    pub kind: UpdateKind,
    /// Update every `period`-th sweep (1 = every sweep).
    pub period: usize,
}

/// Per-replica update schedule; at least one replica must use replica cSMC.
#[derive(Clone, Debug)]
pub struct ReplicaSchedule {
    entries: Vec<ScheduleEntry>,
}

impl ReplicaSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidConfig("schedule requires K >= 2".into()));
        }
        if entries.iter().any(|e| e.period == 0) {
            return Err(Error::InvalidConfig("schedule periods must be >= 1".into()));
        }
        if !entries.iter().any(|e| e.kind == UpdateKind::ReplicaCsmc) {
            return Err(Error::InvalidConfig(
                "schedule needs at least one replica_csmc entry".into(),
            ));
        }
        Ok(ReplicaSchedule { entries })
    }

    /// All replicas updated with replica cSMC every sweep.
    pub fn all_replica(k: usize) -> Result<Self> {
        ReplicaSchedule::new(vec![
            ScheduleEntry {
                kind: UpdateKind::ReplicaCsmc,
                period: 1,
            };
            k
        ])
    }

    pub fn n_replicas(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, k: usize) -> ScheduleEntry {
        self.entries[k]
    }

    pub fn due(&self, k: usize, sweep_index: usize) -> bool {
        sweep_index % self.entries[k].period == 0
    }

    /// Index of the first replica updated by replica cSMC (the chain the
    /// harness traces).
    pub fn primary_replica(&self) -> usize {
        self.entries
            .iter()
            .position(|e| e.kind == UpdateKind::ReplicaCsmc)
            .expect("checked at construction")
    }
}

/// Constructs the per-replica proposal from the other replicas' snapshot.
pub trait ReplicaProposalBuilder: Sync {
    fn build(
        &self,
        k: usize,
        view: &EnsembleView,
        est: &BifEstimator,
    ) -> Box<dyn Proposal + Send + Sync + '_>;
}

/// Draws K independent initialization paths from unconditional SMC passes
/// under the default auxiliary targets.
pub fn initialize_ensemble<T, R>(
    target: &T,
    n_init: usize,
    n_replicas: usize,
    rng: &mut R,
) -> Result<ReplicaEnsemble>
where
    T: AuxiliaryTarget + ?Sized,
    R: rand::Rng,
{
    let paths = (0..n_replicas)
        .map(|_| smc_sample(target, n_init, rng).map(|(p, _)| p))
        .collect::<Result<Vec<_>>>()?;
    ReplicaEnsemble::new(paths)
}

/// One full replica cSMC sweep (zero-based `sweep_index` drives the
/// schedule periods). Replicas are visited in order; the snapshot for
/// replica `k` therefore contains already-updated states for indices `< k`.
/// Consecutive due iterated-cSMC updates have no data dependence on each
/// other and run through the parallel map; per-replica rng streams are
/// derived from `sweep_seed`, so the result is independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn replica_csmc_sweep<M: StateSpaceModel>(
    ensemble: &mut ReplicaEnsemble,
    schedule: &ReplicaSchedule,
    sweep_index: usize,
    est: &BifEstimator,
    model: &M,
    builder: &dyn ReplicaProposalBuilder,
    default_proposal: &(dyn Proposal + Send + Sync),
    cfg: &CsmcConfig,
    sweep_seed: u64,
) -> Result<()> {
    let k_total = ensemble.n_replicas();
    if schedule.n_replicas() != k_total {
        return Err(Error::InvalidConfig(
            "schedule length must equal number of replicas".into(),
        ));
    }

    let replica_rng = |k: usize| {
        let mut r = ChaCha8Rng::seed_from_u64(sweep_seed);
        r.set_stream(k as u64);
        r
    };

    let mut pending_iterated: Vec<usize> = Vec::new();
    let flush = |ensemble: &mut ReplicaEnsemble, pending: &mut Vec<usize>| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let updated: Vec<Result<(usize, StatePath)>> = par::map_indexed(pending.len(), |j| {
            let k = pending[j];
            let target = DefaultTarget {
                model,
                proposal: default_proposal,
            };
            let mut rng = replica_rng(k);
            let path = iterated_csmc_kernel(&target, ensemble.path(k), cfg, &mut rng)?;
            Ok((k, path))
        });
        for u in updated {
            let (k, path) = u?;
            ensemble.paths[k] = path;
        }
        pending.clear();
        Ok(())
    };

    for k in 0..k_total {
        if !schedule.due(k, sweep_index) {
            continue;
        }
        match schedule.entry(k).kind {
            UpdateKind::Frozen => {}
            UpdateKind::IteratedCsmc => pending_iterated.push(k),
            UpdateKind::ReplicaCsmc => {
                flush(ensemble, &mut pending_iterated)?;
                let view = EnsembleView::excluding(ensemble, k);
                let proposal = builder.build(k, &view, est);
                let target = ReplicaTarget::new(model, view, est, proposal);
                let mut rng = replica_rng(k);
                let path = iterated_csmc_kernel(&target, ensemble.path(k), cfg, &mut rng)?;
                ensemble.paths[k] = path;
            }
        }
    }
    flush(ensemble, &mut pending_iterated)?;
    Ok(())
}
