//! MCMC output diagnostics: integrated autocorrelation time from multiple
//! runs, interval coverage, and the closed-form variance of the inverse
//! Gaussian density weight that controls when constant-predictive mixture
//! weights stay well behaved.

use crate::error::{Error, Result};

/// Integrated autocorrelation time estimated from `R` runs of equal length
/// `L`. Autocovariances are computed per run around the pooled mean and
/// averaged; the sum over lags stops at the first lag whose autocorrelation
/// drops below `2 / sqrt(L R)` (that lag included), capped at `L / 10`.
pub fn iact(chains: &[Vec<f64>]) -> Result<f64> {
    let (rho, _) = autocorr(chains)?;
    let l = chains[0].len();
    let r = chains.len();
    let threshold = 2.0 / ((l * r) as f64).sqrt();
    let cap = (l / 10).max(1);
    let mut tau = 1.0;
    for rho_m in rho.iter().take(cap + 1).skip(1) {
        tau += 2.0 * rho_m;
        if *rho_m < threshold {
            break;
        }
    }
    Ok(tau)
}

/// Pooled mean and its autocorrelation-adjusted standard error
/// `sqrt(tau * gamma_0 / (L R))`. Valid with a single run.
pub fn mean_and_se(chains: &[Vec<f64>]) -> Result<(f64, f64)> {
    let (_, (mean, gamma0)) = autocorr(chains)?;
    let tau = iact(chains)?;
    let n = (chains.len() * chains[0].len()) as f64;
    Ok((mean, (tau * gamma0 / n).sqrt()))
}

/// Overall mean across runs and its standard error: the mean of per-run
/// means, and the sample standard deviation of per-run means over
/// `sqrt(n_runs)`. Requires at least two runs.
pub fn overall_mean_se(chains: &[Vec<f64>]) -> Result<(f64, f64)> {
    if chains.len() < 2 {
        return Err(Error::invalid("overall_mean_se requires >= 2 runs"));
    }
    if chains.iter().any(|c| c.is_empty()) {
        return Err(Error::invalid("runs must be nonempty"));
    }
    let per_run: Vec<f64> = chains
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let n = per_run.len() as f64;
    let mean = per_run.iter().sum::<f64>() / n;
    let var = per_run.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Fraction of coordinates whose reference value lies within two standard
/// errors of the estimated mean. `estimates[i]` is `(mean, se)` for the
/// coordinate with reference value `reference[i]`.
pub fn coverage_check(estimates: &[(f64, f64)], reference: &[f64]) -> Result<f64> {
    if estimates.len() != reference.len() || estimates.is_empty() {
        return Err(Error::invalid(
            "coverage_check needs matching, nonempty estimate and reference lists",
        ));
    }
    let hits = estimates
        .iter()
        .zip(reference)
        .filter(|((m, se), truth)| (*truth - m).abs() <= 2.0 * se)
        .count();
    Ok(hits as f64 / estimates.len() as f64)
}

/// Shared autocovariance machinery: returns normalized autocorrelations up
/// to lag `L / 10` (index 0 holds 1.0) plus the pooled mean and `gamma_0`.
fn autocorr(chains: &[Vec<f64>]) -> Result<(Vec<f64>, (f64, f64))> {
    if chains.is_empty() {
        return Err(Error::invalid("need at least one run"));
    }
    let l = chains[0].len();
    if l < 10 {
        return Err(Error::invalid("runs must have length >= 10"));
    }
    if chains.iter().any(|c| c.len() != l) {
        return Err(Error::invalid("runs must have equal length"));
    }
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "chain sample",
        });
    }
    let n = (chains.len() * l) as f64;
    let mean = chains.iter().flatten().sum::<f64>() / n;
    let max_lag = (l / 10).max(1).min(l - 1);
    let mut gamma = vec![0.0; max_lag + 1];
    for chain in chains {
        let dev: Vec<f64> = chain.iter().map(|v| v - mean).collect();
        for (m, g) in gamma.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..l - m {
                acc += dev[i] * dev[i + m];
            }
            *g += acc / l as f64;
        }
    }
    for g in &mut gamma {
        *g /= chains.len() as f64;
    }
    let gamma0 = gamma[0];
    if gamma0 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let rho: Vec<f64> = gamma.iter().map(|g| g / gamma0).collect();
    Ok((rho, (mean, gamma0)))
}

/// Variance of `1 / N(x; 0, sigma0_sq)` with `x ~ N(mu, sigma1_sq)`.
///
/// Finite only when `sigma0_sq > 2 sigma1_sq`; otherwise the second moment
/// diverges and `Error::InfiniteVariance` is returned. In closed form, with
/// `nu1 = 1/(2 s1) - 1/s0` and `nu2 = 1/s1 - 1/s0`:
/// `2 pi s0 / sqrt(2 s1 nu1) * exp(mu^2 (1/s0 + 1/(s0^2 nu1)))
///  - 2 pi s0 / (s1 nu2) * exp(mu^2 (1/s0 + 1/(s0^2 nu2)))`.
pub fn mixture_weight_variance(mu: f64, sigma0_sq: f64, sigma1_sq: f64) -> Result<f64> {
    if sigma0_sq <= 0.0 || sigma1_sq <= 0.0 {
        return Err(Error::invalid("variances must be positive"));
    }
    if sigma0_sq <= 2.0 * sigma1_sq {
        return Err(Error::InfiniteVariance);
    }
    let (s0, s1) = (sigma0_sq, sigma1_sq);
    let two_pi = 2.0 * std::f64::consts::PI;
    let nu1 = 1.0 / (2.0 * s1) - 1.0 / s0;
    let nu2 = 1.0 / s1 - 1.0 / s0;
    let second = two_pi * s0 / (2.0 * s1 * nu1).sqrt()
        * (mu * mu * (1.0 / s0 + 1.0 / (s0 * s0 * nu1))).exp();
    let first_sq =
        two_pi * s0 / (s1 * nu2) * (mu * mu * (1.0 / s0 + 1.0 / (s0 * s0 * nu2))).exp();
    Ok(second - first_sq)
}
