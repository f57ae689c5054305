//! Benchmark state-space models and their replica proposals.

pub mod latent;
pub mod linear_gaussian;
pub mod lorenz96;
pub mod poisson;
pub mod proposals;

pub use latent::{equicorrelation, Ar1Latent};
pub use linear_gaussian::LinearGaussianModel;
pub use lorenz96::{lorenz_drift, rk4_integrate, Lorenz96Model};
pub use poisson::{poisson_logpmf, PoissonModel1, PoissonModel2};
pub use proposals::{
    Ar1ProposalBuilder, LgReplicaProposal, LorenzProposalBuilder, LorenzReplicaProposal,
};
