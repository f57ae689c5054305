//! Experiment runner: builds models from configuration, derives per-run and
//! per-sweep seeds from the master seed, executes replica cSMC sweeps (or an
//! iterated cSMC baseline) and collects tracked coordinates into chains.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::csmc::{iterated_csmc_kernel_with, smc_sample, CsmcConfig, DefaultTarget, PathUpdate};
use crate::error::{Error, Result};
use crate::kalman::kalman_filter;
use crate::models::{
    Ar1Latent, Ar1ProposalBuilder, LinearGaussianModel, Lorenz96Model, LorenzProposalBuilder,
    PoissonModel1, PoissonModel2,
};
use crate::par;
use crate::replica::{
    initialize_ensemble, replica_csmc_sweep, BifEstimator, EnsembleView, ReplicaProposalBuilder,
    ReplicaSchedule, ScheduleEntry, UpdateKind,
};
use crate::ssm::{BootstrapProposal, Proposal, StateSpaceModel};

use super::config::{ModelConfig, ModelKind, Predictive, ProposalKind, RunConfig};
use super::dataset::Dataset;
use super::seed::derive_seed;
use super::traces::TraceRow;

/// A benchmark model conditioned on a dataset.
pub enum ModelInstance {
    LinearGaussian(LinearGaussianModel),
    Poisson1(PoissonModel1),
    Poisson2(PoissonModel2),
    Lorenz96(Lorenz96Model),
}

impl ModelInstance {
    pub fn from_dataset(mc: &ModelConfig, ds: &Dataset) -> Result<Self> {
        if ds.model_id != mc.model_id() {
            return Err(Error::InvalidConfig(format!(
                "dataset is for model {}, config wants {}",
                ds.model_id,
                mc.model_id()
            )));
        }
        if ds.t_len != mc.t_len || ds.m != mc.obs_dim() {
            return Err(Error::InvalidConfig(
                "dataset dimensions do not match the model section".into(),
            ));
        }
        let obs = ds.observations.clone();
        match mc.kind {
            ModelKind::LinearGaussian => Ok(ModelInstance::LinearGaussian(
                LinearGaussianModel::new(Ar1Latent::uniform(mc.d, mc.phi(), mc.rho())?, obs)?,
            )),
            ModelKind::Poisson1 | ModelKind::Poisson2 => {
                if obs
                    .rows()
                    .iter()
                    .flatten()
                    .any(|v| *v < 0.0 || v.fract() != 0.0)
                {
                    return Err(Error::invalid(
                        "Poisson observations must be nonnegative integers",
                    ));
                }
                let latent = Ar1Latent::uniform(mc.d, mc.phi(), mc.rho())?;
                if mc.kind == ModelKind::Poisson1 {
                    Ok(ModelInstance::Poisson1(PoissonModel1::new(
                        latent,
                        mc.c(),
                        mc.sigma(),
                        obs,
                    )?))
                } else {
                    Ok(ModelInstance::Poisson2(PoissonModel2::new(
                        latent,
                        mc.sigma(),
                        obs,
                    )?))
                }
            }
            ModelKind::Lorenz96 => Ok(ModelInstance::Lorenz96(Lorenz96Model::new(
                mc.d,
                mc.n_observed(),
                mc.alpha(),
                mc.sigma_f_sq(),
                mc.obs_var(),
                mc.h(),
                mc.rk4_step(),
                obs,
            )?)),
        }
    }
}

/// Forward-simulates a dataset (observations plus true states) from the
/// model section.
pub fn simulate_dataset(mc: &ModelConfig, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (obs, states) = match mc.kind {
        ModelKind::LinearGaussian => {
            let latent = Ar1Latent::uniform(mc.d, mc.phi(), mc.rho())?;
            let (model, path) = LinearGaussianModel::simulate(latent, mc.t_len, &mut rng)?;
            (model.observations().clone(), path)
        }
        ModelKind::Poisson1 => {
            let latent = Ar1Latent::uniform(mc.d, mc.phi(), mc.rho())?;
            let (model, path) =
                PoissonModel1::simulate(latent, mc.c(), mc.sigma(), mc.t_len, &mut rng)?;
            (model.observations().clone(), path)
        }
        ModelKind::Poisson2 => {
            let latent = Ar1Latent::uniform(mc.d, mc.phi(), mc.rho())?;
            let (model, path) = PoissonModel2::simulate(latent, mc.sigma(), mc.t_len, &mut rng)?;
            (model.observations().clone(), path)
        }
        ModelKind::Lorenz96 => {
            let (model, path) = Lorenz96Model::simulate(
                mc.d,
                mc.n_observed(),
                mc.alpha(),
                mc.sigma_f_sq(),
                mc.obs_var(),
                mc.h(),
                mc.rk4_step(),
                mc.t_len,
                &mut rng,
            )?;
            (model.observations().clone(), path)
        }
    };
    Dataset::new(mc.model_id(), seed, obs, Some(states))
}

/// Chains collected by an experiment: `series[run][var][iteration]`.
pub struct ExperimentOutput {
    pub variables: Vec<String>,
    pub series: Vec<Vec<Vec<f64>>>,
}

impl ExperimentOutput {
    /// Per-run chains of one tracked variable.
    pub fn chains(&self, var: usize) -> Vec<Vec<f64>> {
        self.series.iter().map(|run| run[var].clone()).collect()
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::new();
        for (run, per_var) in self.series.iter().enumerate() {
            for (v, chain) in per_var.iter().enumerate() {
                for (i, value) in chain.iter().enumerate() {
                    rows.push(TraceRow {
                        run,
                        iteration: i,
                        variable: self.variables[v].clone(),
                        value: *value,
                    });
                }
            }
        }
        rows
    }
}

fn track_list(cfg: &RunConfig) -> Vec<(usize, usize)> {
    match &cfg.output.track {
        Some(track) => track.iter().map(|t| (t.time, t.coord)).collect(),
        None => vec![(0, 0)],
    }
}

fn variable_names(track: &[(usize, usize)]) -> Vec<String> {
    track
        .iter()
        .map(|(t, c)| format!("x_t{t}_c{c}"))
        .collect()
}

fn schedule_from(cfg: &RunConfig) -> Result<ReplicaSchedule> {
    match &cfg.sampler.schedule {
        None => ReplicaSchedule::all_replica(cfg.sampler.n_replicas),
        Some(entries) => ReplicaSchedule::new(
            entries
                .iter()
                .map(|e| {
                    let kind = match e.kind.as_str() {
                        "replica" => UpdateKind::ReplicaCsmc,
                        "iterated" => UpdateKind::IteratedCsmc,
                        _ => UpdateKind::Frozen,
                    };
                    ScheduleEntry {
                        kind,
                        period: e.period,
                    }
                })
                .collect(),
        ),
    }
}

/// Proposal builder that ignores the other replicas and proposes from the
/// model dynamics.
pub struct BootstrapBuilder<'a, M: StateSpaceModel>(pub &'a M);

impl<M: StateSpaceModel> ReplicaProposalBuilder for BootstrapBuilder<'_, M> {
    fn build(
        &self,
        _k: usize,
        _view: &EnsembleView,
        _est: &BifEstimator,
    ) -> Box<dyn Proposal + Send + Sync + '_> {
        Box::new(BootstrapProposal(self.0))
    }
}

fn run_all<M: StateSpaceModel>(
    model: &M,
    builder: &dyn ReplicaProposalBuilder,
    cfg: &RunConfig,
    est: &BifEstimator,
    master_seed: u64,
) -> Result<ExperimentOutput> {
    let track = track_list(cfg);
    let schedule = schedule_from(cfg)?;
    let csmc_cfg = CsmcConfig::new(cfg.sampler.n_particles)?;
    let n_init = cfg
        .sampler
        .n_init_particles
        .unwrap_or(cfg.sampler.n_particles);
    let primary = schedule.primary_replica();

    let runs: Vec<Result<Vec<Vec<f64>>>> = par::map_indexed(cfg.output.n_runs, |r| {
        let run_seed = derive_seed(master_seed, r as u64);
        let default_proposal = BootstrapProposal(model);
        let init_target = DefaultTarget {
            model,
            proposal: &default_proposal,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, 0));
        let mut ensemble =
            initialize_ensemble(&init_target, n_init, cfg.sampler.n_replicas, &mut rng)?;
        let kept = cfg.sampler.n_iterations - cfg.output.burn_in;
        let mut series = vec![Vec::with_capacity(kept); track.len()];
        for s in 0..cfg.sampler.n_iterations {
            let sweep_seed = derive_seed(run_seed, 1 + s as u64);
            replica_csmc_sweep(
                &mut ensemble,
                &schedule,
                s,
                est,
                model,
                builder,
                &default_proposal,
                &csmc_cfg,
                sweep_seed,
            )?;
            if s >= cfg.output.burn_in {
                let path = ensemble.path(primary);
                for (v, (t, c)) in track.iter().enumerate() {
                    series[v].push(path[*t][*c]);
                }
            }
        }
        Ok(series)
    });

    Ok(ExperimentOutput {
        variables: variable_names(&track),
        series: runs.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Runs the replica cSMC experiment described by `cfg` against `ds`.
pub fn run_experiment(cfg: &RunConfig, ds: &Dataset, master_seed: u64) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let instance = ModelInstance::from_dataset(&cfg.model, ds)?;
    match &instance {
        ModelInstance::LinearGaussian(m) => {
            let est = match cfg.sampler.predictive {
                Predictive::Constant => BifEstimator::ConstantPredictive,
                Predictive::Exact => {
                    let filter = kalman_filter(&m.lgssm_params(), m.observations())?;
                    BifEstimator::MonteCarloPredictive(Arc::new(filter))
                }
            };
            match cfg.sampler.proposal {
                ProposalKind::Mixture => run_all(
                    m,
                    &Ar1ProposalBuilder::new(m.latent().clone()),
                    cfg,
                    &est,
                    master_seed,
                ),
                ProposalKind::Bootstrap => {
                    run_all(m, &BootstrapBuilder(m), cfg, &est, master_seed)
                }
            }
        }
        ModelInstance::Poisson1(m) => {
            let est = BifEstimator::ConstantPredictive;
            match cfg.sampler.proposal {
                ProposalKind::Mixture => run_all(
                    m,
                    &Ar1ProposalBuilder::new(m.latent().clone()),
                    cfg,
                    &est,
                    master_seed,
                ),
                ProposalKind::Bootstrap => {
                    run_all(m, &BootstrapBuilder(m), cfg, &est, master_seed)
                }
            }
        }
        ModelInstance::Poisson2(m) => {
            let est = BifEstimator::ConstantPredictive;
            match cfg.sampler.proposal {
                ProposalKind::Mixture => run_all(
                    m,
                    &Ar1ProposalBuilder::new(m.latent().clone()),
                    cfg,
                    &est,
                    master_seed,
                ),
                ProposalKind::Bootstrap => {
                    run_all(m, &BootstrapBuilder(m), cfg, &est, master_seed)
                }
            }
        }
        ModelInstance::Lorenz96(m) => {
            let est = BifEstimator::ConstantPredictive;
            match cfg.sampler.proposal {
                ProposalKind::Mixture => {
                    run_all(m, &LorenzProposalBuilder::new(m), cfg, &est, master_seed)
                }
                ProposalKind::Bootstrap => {
                    run_all(m, &BootstrapBuilder(m), cfg, &est, master_seed)
                }
            }
        }
    }
}

fn baseline_all<M: StateSpaceModel>(
    model: &M,
    cfg: &RunConfig,
    master_seed: u64,
    n_particles: usize,
    path_update: PathUpdate,
) -> Result<ExperimentOutput> {
    let track = track_list(cfg);
    let csmc_cfg = CsmcConfig::new(n_particles)?;
    let runs: Vec<Result<Vec<Vec<f64>>>> = par::map_indexed(cfg.output.n_runs, |r| {
        let run_seed = derive_seed(master_seed, r as u64);
        let proposal = BootstrapProposal(model);
        let target = DefaultTarget {
            model,
            proposal: &proposal,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, 0));
        let (mut path, _) = smc_sample(&target, n_particles, &mut rng)?;
        let kept = cfg.sampler.n_iterations - cfg.output.burn_in;
        let mut series = vec![Vec::with_capacity(kept); track.len()];
        for s in 0..cfg.sampler.n_iterations {
            let mut srng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, 1 + s as u64));
            path = iterated_csmc_kernel_with(&target, &path, &csmc_cfg, path_update, &mut srng)?;
            if s >= cfg.output.burn_in {
                for (v, (t, c)) in track.iter().enumerate() {
                    series[v].push(path[*t][*c]);
                }
            }
        }
        Ok(series)
    });
    Ok(ExperimentOutput {
        variables: variable_names(&track),
        series: runs.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Single-chain iterated cSMC with the bootstrap proposal, as the baseline
/// the replica sampler is compared against (usually with a larger particle
/// count to match total cost). `path_update` selects how the kernel extracts
/// its path; both variants leave the smoothing posterior invariant.
pub fn run_iterated_baseline(
    cfg: &RunConfig,
    ds: &Dataset,
    master_seed: u64,
    n_particles: usize,
    path_update: PathUpdate,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let instance = ModelInstance::from_dataset(&cfg.model, ds)?;
    match &instance {
        ModelInstance::LinearGaussian(m) => {
            baseline_all(m, cfg, master_seed, n_particles, path_update)
        }
        ModelInstance::Poisson1(m) => baseline_all(m, cfg, master_seed, n_particles, path_update),
        ModelInstance::Poisson2(m) => baseline_all(m, cfg, master_seed, n_particles, path_update),
        ModelInstance::Lorenz96(m) => baseline_all(m, cfg, master_seed, n_particles, path_update),
    }
}
