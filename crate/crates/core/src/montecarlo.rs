//! Reproducible Monte Carlo over channel realizations.
//!
//! Trial `t` draws from its own generator, seeded by mixing `(seed, t)`, so
//! results do not depend on how trials are scheduled across threads. All
//! reductions run over the trial-ordered result vector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    sample_covariances, solve_power, NetworkConfig, PowerAllocation, SamplingMethod,
};
use crate::error::{Error, Result};
use crate::linalg::{trace_norm_distance, whiten_eigenvalues};
use crate::spectrum::{capacity_from_eigs, EmpiricalDistribution};

/// Default trial count for capacity estimates.
pub const DEFAULT_CAPACITY_TRIALS: usize = 200;

/// Default trial count for pooled spectra and whiteness statistics.
pub const DEFAULT_SPECTRUM_TRIALS: usize = 20;

/// SplitMix64 finalizer applied to `seed` advanced by `trial + 1` golden-ratio
/// steps.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed.wrapping_add(
        (trial as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator owned by trial `trial`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, trial))
}

/// Runs `f(t)` for `t = 0..trials` in parallel and returns the results in
/// trial order. The first failing trial (by index) is reported.
pub fn run_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let results: Vec<Result<T>> = (0..trials).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(trial, r)| {
            r.map_err(|e| Error::Trial {
                trial,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean and standard error of a trial-ordered sample.
///
/// `stderr` is NaN for a single trial.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ergodic capacity estimate in nats per channel use.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub config: NetworkConfig,
    pub power: PowerAllocation,
}

impl CapacityEstimate {
    /// Antennas the normalized capacity is divided by: `min(n_s, n_d)`.
    pub fn antennas(&self) -> usize {
        self.config.n_s.min(self.config.n_d)
    }

    /// Normalized capacity `C₀ = (L+1)·C/n`.
    pub fn c0(&self) -> f64 {
        (self.config.l as f64 + 1.0) * self.mean / self.antennas() as f64
    }

    /// Standard error of [`CapacityEstimate::c0`].
    pub fn c0_stderr(&self) -> f64 {
        (self.config.l as f64 + 1.0) * self.stderr / self.antennas() as f64
    }
}

/// Summary of `(1/n_d)·‖((1−α^{L+1})/(1−α))·I − R_n‖_Tr` over trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WhitenessStats {
    pub mean: f64,
    pub max: f64,
    pub trials: usize,
}

/// Everything one batch of trials yields, computed from shared realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub capacity: CapacityEstimate,
    pub spectrum: EmpiricalDistribution,
    pub whiteness: WhitenessStats,
}

struct TrialOutput {
    eigs: Vec<f64>,
    capacity: f64,
    whiteness: f64,
}

fn run_trial(
    cfg: &NetworkConfig,
    pw: &PowerAllocation,
    method: SamplingMethod,
    trial: usize,
    whiteness: bool,
) -> Result<TrialOutput> {
    let mut rng = trial_rng(cfg.seed, trial);
    let cov = sample_covariances(cfg, method, &mut rng)?;
    let r_n = cov.noise(pw);
    let eigs = whiten_eigenvalues(&cov.signal(pw), &r_n)?;
    let capacity = capacity_from_eigs(&eigs, cfg.l)?;
    let whiteness = if whiteness {
        trace_norm_distance(&r_n, pw.noise_level())?
    } else {
        f64::NAN
    };
    Ok(TrialOutput {
        eigs,
        capacity,
        whiteness,
    })
}

fn run_batch(
    cfg: &NetworkConfig,
    trials: usize,
    method: SamplingMethod,
    whiteness: bool,
) -> Result<(PowerAllocation, Vec<TrialOutput>)> {
    cfg.validate()?;
    let pw = solve_power(cfg.snr, cfg.l)?;
    let outputs = run_trials(trials, |t| run_trial(cfg, &pw, method, t, whiteness))?;
    Ok((pw, outputs))
}

fn estimate(cfg: &NetworkConfig, pw: PowerAllocation, outputs: &[TrialOutput]) -> CapacityEstimate {
    let caps: Vec<f64> = outputs.iter().map(|o| o.capacity).collect();
    let (mean, stderr) = mean_stderr(&caps);
    CapacityEstimate {
        mean,
        stderr,
        trials: caps.len(),
        config: cfg.clone(),
        power: pw,
    }
}

fn pool(outputs: Vec<TrialOutput>) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(outputs.into_iter().flat_map(|o| o.eigs).collect())
}

fn whiteness_stats(outputs: &[TrialOutput]) -> WhitenessStats {
    let vals: Vec<f64> = outputs.iter().map(|o| o.whiteness).collect();
    WhitenessStats {
        mean: vals.iter().sum::<f64>() / vals.len() as f64,
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        trials: vals.len(),
    }
}

/// `E[(1/(L+1))·log det(I + R_s·R_n⁻¹)]` with the default sampling method.
pub fn ergodic_capacity(cfg: &NetworkConfig, trials: usize) -> Result<CapacityEstimate> {
    ergodic_capacity_with(cfg, trials, SamplingMethod::Auto)
}

pub fn ergodic_capacity_with(
    cfg: &NetworkConfig,
    trials: usize,
    method: SamplingMethod,
) -> Result<CapacityEstimate> {
    let (pw, outputs) = run_batch(cfg, trials, method, false)?;
    Ok(estimate(cfg, pw, &outputs))
}

/// Eigenvalues of `R_s·R_n⁻¹` pooled over all trials (`trials·n_d` values).
pub fn pooled_spectrum(cfg: &NetworkConfig, trials: usize) -> Result<EmpiricalDistribution> {
    pooled_spectrum_with(cfg, trials, SamplingMethod::Auto)
}

pub fn pooled_spectrum_with(
    cfg: &NetworkConfig,
    trials: usize,
    method: SamplingMethod,
) -> Result<EmpiricalDistribution> {
    let (_, outputs) = run_batch(cfg, trials, method, false)?;
    pool(outputs)
}

/// Trace-norm distance of `R_n` to its limiting multiple of the identity.
pub fn noise_whiteness(cfg: &NetworkConfig, trials: usize) -> Result<WhitenessStats> {
    let (_, outputs) = run_batch(cfg, trials, SamplingMethod::Auto, true)?;
    Ok(whiteness_stats(&outputs))
}

/// Capacity, pooled spectrum and whiteness from one shared set of trials.
pub fn diagnostics(cfg: &NetworkConfig, trials: usize) -> Result<Diagnostics> {
    let (pw, outputs) = run_batch(cfg, trials, SamplingMethod::Auto, true)?;
    let capacity = estimate(cfg, pw, &outputs);
    let whiteness = whiteness_stats(&outputs);
    Ok(Diagnostics {
        capacity,
        spectrum: pool(outputs)?,
        whiteness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|t| trial_seed(7, t)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn mean_stderr_examples() {
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert!(mean_stderr(&[4.0]).1.is_nan());
    }

    #[test]
    fn vanishing_snr_gives_vanishing_capacity() {
        let cfg = NetworkConfig::new(4, 4, 4, 1, 1e-9).unwrap().with_seed(1);
        let est = ergodic_capacity(&cfg, 10).unwrap();
        assert!(est.mean >= 0.0 && est.mean <= 1e-8, "{}", est.mean);
    }

    #[test]
    fn single_trial_spectrum_is_one_realization() {
        let cfg = NetworkConfig::new(6, 6, 6, 2, 10.0).unwrap().with_seed(3);
        let pooled = pooled_spectrum(&cfg, 1).unwrap();
        assert_eq!(pooled.len(), 6);
        let pw = solve_power(cfg.snr, cfg.l).unwrap();
        let cov = sample_covariances(&cfg, SamplingMethod::Auto, &mut trial_rng(3, 0)).unwrap();
        let mut direct = whiten_eigenvalues(&cov.signal(&pw), &cov.noise(&pw)).unwrap();
        direct.sort_by(f64::total_cmp);
        assert_eq!(pooled.values(), direct.as_slice());
        assert!(pooled.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = NetworkConfig::new(2, 2, 2, 1, 1.0).unwrap();
        assert!(ergodic_capacity(&cfg, 0).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = NetworkConfig::new(5, 5, 10, 2, 10.0).unwrap().with_seed(11);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| diagnostics(&cfg, 24)).unwrap();
        let b = three.install(|| diagnostics(&cfg, 24)).unwrap();
        assert_eq!(a.capacity.mean.to_bits(), b.capacity.mean.to_bits());
        assert_eq!(a.spectrum, b.spectrum);
        assert_eq!(a.whiteness, b.whiteness);
    }
}
