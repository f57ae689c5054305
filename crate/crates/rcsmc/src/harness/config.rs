//! Experiment configuration parsed from TOML. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional dataset file; when absent, `run` simulates one from the
    /// model section with a seed derived from the master seed.
    pub dataset: Option<String>,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearGaussian,
    Poisson1,
    Poisson2,
    Lorenz96,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub d: usize,
    pub t_len: usize,
    pub phi: Option<f64>,
    pub rho: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    pub n_observed: Option<usize>,
    pub alpha: Option<f64>,
    pub sigma_f_sq: Option<f64>,
    pub obs_var: Option<f64>,
    pub h: Option<f64>,
    pub rk4_step: Option<f64>,
}

impl ModelConfig {
    pub fn phi(&self) -> f64 {
        self.phi.unwrap_or(0.9)
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(0.7)
    }

    pub fn c(&self) -> f64 {
        self.c.unwrap_or(-0.4)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(0.6)
    }

    pub fn n_observed(&self) -> usize {
        self.n_observed.unwrap_or(self.d.saturating_sub(2))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(4.8801)
    }

    pub fn sigma_f_sq(&self) -> f64 {
        self.sigma_f_sq.unwrap_or(1e-2)
    }

    pub fn obs_var(&self) -> f64 {
        self.obs_var.unwrap_or(1e-3)
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(0.1)
    }

    pub fn rk4_step(&self) -> f64 {
        self.rk4_step.unwrap_or(0.01)
    }

    pub fn model_id(&self) -> &'static str {
        match self.kind {
            ModelKind::LinearGaussian => "linear_gaussian",
            ModelKind::Poisson1 => "poisson1",
            ModelKind::Poisson2 => "poisson2",
            ModelKind::Lorenz96 => "lorenz96",
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self.kind {
            ModelKind::Lorenz96 => self.n_observed(),
            _ => self.d,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Predictive {
    #[default]
    Constant,
    /// Exact Kalman predictive; linear-Gaussian models only.
    Exact,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    #[default]
    Mixture,
    Bootstrap,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntryConfig {
    pub kind: String,
    #[serde(default = "one")]
    pub period: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_particles: usize,
    pub n_replicas: usize,
    pub n_iterations: usize,
    #[serde(default)]
    pub predictive: Predictive,
    #[serde(default)]
    pub proposal: ProposalKind,
    /// Per-replica update schedule; defaults to replica cSMC everywhere.
    pub schedule: Option<Vec<ScheduleEntryConfig>>,
    /// Particle count for the SMC initialization passes.
    pub n_init_particles: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    pub time: usize,
    pub coord: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "one")]
    pub n_runs: usize,
    #[serde(default)]
    pub burn_in: usize,
    /// State coordinates recorded each sweep; defaults to `(0, 0)`.
    pub track: Option<Vec<TrackConfig>>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            n_runs: 1,
            burn_in: 0,
            track: None,
        }
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.model.d == 0 || self.model.t_len == 0 {
            return err("model.d and model.t_len must be >= 1");
        }
        if self.sampler.n_particles < 2 {
            return err("sampler.n_particles must be >= 2");
        }
        if self.sampler.n_replicas < 2 {
            return err("sampler.n_replicas must be >= 2");
        }
        if self.sampler.n_iterations == 0 {
            return err("sampler.n_iterations must be >= 1");
        }
        if self.output.n_runs == 0 {
            return err("output.n_runs must be >= 1");
        }
        if self.output.burn_in >= self.sampler.n_iterations {
            return err("output.burn_in must be < sampler.n_iterations");
        }
        if let Some(schedule) = &self.sampler.schedule {
            if schedule.len() != self.sampler.n_replicas {
                return err("sampler.schedule length must equal n_replicas");
            }
            for e in schedule {
                if !matches!(e.kind.as_str(), "replica" | "iterated" | "frozen") {
                    return err("schedule kinds are replica, iterated, frozen");
                }
                if e.period == 0 {
                    return err("schedule periods must be >= 1");
                }
            }
        }
        if self.sampler.predictive == Predictive::Exact
            && self.model.kind != ModelKind::LinearGaussian
        {
            return err("predictive = \"exact\" requires the linear_gaussian model");
        }
        if let Some(track) = &self.output.track {
            for t in track {
                if t.time >= self.model.t_len || t.coord >= self.model.d {
                    return err("tracked coordinate out of range");
                }
            }
        }
        match self.model.kind {
            ModelKind::LinearGaussian | ModelKind::Poisson1 | ModelKind::Poisson2 => {
                if self.model.phi().abs() >= 1.0 {
                    return err("model.phi must satisfy |phi| < 1");
                }
            }
            ModelKind::Lorenz96 => {
                if self.model.n_observed() > self.model.d {
                    return err("model.n_observed must be <= model.d");
                }
            }
        }
        Ok(())
    }
}
