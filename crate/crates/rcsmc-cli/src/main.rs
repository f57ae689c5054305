//! CLI driver: simulate datasets, run replica cSMC experiments, diagnose
//! trace files, compare against the iterated cSMC baseline, and evaluate the
//! mixture-weight variance formula.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 I/O or file-format failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use rcsmc::csmc::PathUpdate;
use rcsmc::diag::{iact, mean_and_se, mixture_weight_variance};
use rcsmc::harness::traces::{series_by_variable, Manifest};
use rcsmc::harness::{
    derive_seed, read_traces, run_experiment, run_iterated_baseline, simulate_dataset,
    write_manifest, write_traces, Dataset, RunConfig,
};
use rcsmc::{Error, Result};

#[derive(Parser)]
#[command(name = "rcsmc", version, about = "Replica conditional SMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for the data-parallel core (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Master seed; everything downstream is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from the [model] section and write it to
    /// OUT/dataset.txt.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the replica cSMC experiment; writes OUT/traces.csv and
    /// OUT/manifest.toml.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Report mean, standard error and integrated autocorrelation time for
    /// each variable in OUT/traces.csv.
    Diagnose {
        /// Directory holding traces.csv (as written by `run`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both the replica sampler and the single-chain iterated cSMC
    /// baseline on the same dataset and compare autocorrelation times.
    Compare {
        #[command(flatten)]
        common: Common,

        /// Baseline particle count; defaults to n_particles * n_replicas.
        #[arg(long)]
        baseline_particles: Option<usize>,

        /// How the baseline kernel extracts its path: "backward" (backward
        /// sampling) or "ancestor" (ancestral tracing, the original
        /// particle-Gibbs update).
        #[arg(long, default_value = "backward")]
        baseline_path_update: String,
    },
    /// Evaluate the variance of the inverse-Gaussian-density weight
    /// 1 / N(x; 0, sigma0_sq) under x ~ N(mu, sigma1_sq).
    Variance {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        sigma0_sq: f64,
        #[arg(long)]
        sigma1_sq: f64,
    },
}

fn load_dataset(cfg: &RunConfig, common: &Common) -> Result<Dataset> {
    match &cfg.dataset {
        Some(path) => Dataset::read(Path::new(path)),
        None => simulate_dataset(&cfg.model, derive_seed(common.seed, u64::MAX)),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_simulate(common: &Common) -> Result<()> {
    let cfg = RunConfig::from_path(&common.config)?;
    ensure_out(&common.out)?;
    let ds = simulate_dataset(&cfg.model, common.seed)?;
    let path = common.out.join("dataset.txt");
    ds.write(&path)?;
    println!(
        "wrote {} ({} steps, obs dim {})",
        path.display(),
        ds.t_len,
        ds.m
    );
    Ok(())
}

fn cmd_run(common: &Common) -> Result<()> {
    let cfg = RunConfig::from_path(&common.config)?;
    ensure_out(&common.out)?;
    let ds = load_dataset(&cfg, common)?;
    let out = run_experiment(&cfg, &ds, common.seed)?;
    let traces = common.out.join("traces.csv");
    write_traces(&traces, &out.rows())?;
    write_manifest(
        &common.out.join("manifest.toml"),
        &Manifest {
            seed: common.seed,
            n_runs: cfg.output.n_runs,
            n_iterations: cfg.sampler.n_iterations,
            burn_in: cfg.output.burn_in,
            model: cfg.model.model_id().to_string(),
            dataset: cfg.dataset.clone().unwrap_or_else(|| "simulated".into()),
        },
    )?;
    for (v, name) in out.variables.iter().enumerate() {
        let chains = out.chains(v);
        let (mean, se) = mean_and_se(&chains)?;
        let tau = iact(&chains)?;
        println!("{name}: mean {mean:.6} se {se:.6} iact {tau:.2}");
    }
    println!("wrote {}", traces.display());
    Ok(())
}

fn cmd_diagnose(out_dir: &Path) -> Result<()> {
    let rows = read_traces(&out_dir.join("traces.csv"))?;
    if rows.is_empty() {
        return Err(Error::MalformedFile {
            path: out_dir.join("traces.csv").display().to_string(),
            reason: "no trace rows".into(),
        });
    }
    let (variables, series) = series_by_variable(&rows);
    for (v, name) in variables.iter().enumerate() {
        let (mean, se) = mean_and_se(&series[v])?;
        let tau = iact(&series[v])?;
        println!("{name}: mean {mean:.6} se {se:.6} iact {tau:.2}");
    }
    Ok(())
}

fn median(mut vals: Vec<f64>) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

fn cmd_compare(
    common: &Common,
    baseline_particles: Option<usize>,
    baseline_path_update: &str,
) -> Result<()> {
    let path_update = match baseline_path_update {
        "backward" => PathUpdate::BackwardSampling,
        "ancestor" => PathUpdate::AncestorTracing,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown --baseline-path-update {other:?} (expected \"backward\" or \"ancestor\")"
            )))
        }
    };
    let cfg = RunConfig::from_path(&common.config)?;
    ensure_out(&common.out)?;
    let ds = load_dataset(&cfg, common)?;
    let replica = run_experiment(&cfg, &ds, common.seed)?;
    let n_base =
        baseline_particles.unwrap_or(cfg.sampler.n_particles * cfg.sampler.n_replicas);
    let baseline =
        run_iterated_baseline(&cfg, &ds, derive_seed(common.seed, 1), n_base, path_update)?;

    let taus = |out: &rcsmc::harness::ExperimentOutput| -> Result<Vec<f64>> {
        (0..out.variables.len())
            .map(|v| iact(&out.chains(v)))
            .collect()
    };
    let replica_taus = taus(&replica)?;
    let baseline_taus = taus(&baseline)?;
    for (v, name) in replica.variables.iter().enumerate() {
        println!(
            "{name}: replica iact {:.2} baseline iact {:.2}",
            replica_taus[v], baseline_taus[v]
        );
    }
    let tau_replica = median(replica_taus);
    let tau_baseline = median(baseline_taus);
    println!(
        "replica cSMC (K={}, N={}): median iact {tau_replica:.2}",
        cfg.sampler.n_replicas, cfg.sampler.n_particles
    );
    println!("iterated cSMC (N={n_base}): median iact {tau_baseline:.2}");
    println!("ratio {:.3}", tau_replica / tau_baseline);
    Ok(())
}

fn cmd_variance(mu: f64, sigma0_sq: f64, sigma1_sq: f64) -> Result<()> {
    let v = mixture_weight_variance(mu, sigma0_sq, sigma1_sq)?;
    println!("{v:.12e}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::Run { common } => cmd_run(common),
        Command::Diagnose { out } => cmd_diagnose(out),
        Command::Compare {
            common,
            baseline_particles,
            baseline_path_update,
        } => cmd_compare(common, *baseline_particles, baseline_path_update),
        Command::Variance {
            mu,
            sigma0_sq,
            sigma1_sq,
        } => cmd_variance(*mu, *sigma0_sq, *sigma1_sq),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with status 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
