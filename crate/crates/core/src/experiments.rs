//! Capacity sweeps over the relay scaling exponent, regime diagnostics and
//! small numeric probes of the limit arguments used in the analysis.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal, NetworkConfig};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, hermitian_eigen, hermitian_eigenvalues, matmul, scaled_gram, ComplexMatrix,
};
use crate::montecarlo::{
    diagnostics, ergodic_capacity, trial_rng, CapacityEstimate, WhitenessStats,
};
use crate::rmt::mp_cdf;
use crate::spectrum::{ks_distance, EmpiricalDistribution, ShannonTransform};

/// How the relay cluster size grows with the number of clusters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KRule {
    /// `k = n·L^γ`.
    #[default]
    #[serde(rename = "n*L^g")]
    NTimesLPow,
    /// `k = L^γ`.
    #[serde(rename = "L^g")]
    LPow,
}

impl KRule {
    /// Cluster size rounded to the nearest integer, at least 1.
    pub fn k(self, n: usize, l: usize, gamma: f64) -> usize {
        let base = (l as f64).powf(gamma);
        let k = match self {
            KRule::NTimesLPow => n as f64 * base,
            KRule::LPow => base,
        };
        (k.round() as usize).max(1)
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KRule::NTimesLPow => "n*L^g",
            KRule::LPow => "L^g",
        })
    }
}

impl FromStr for KRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n*L^g" => Ok(KRule::NTimesLPow),
            "L^g" => Ok(KRule::LPow),
            other => Err(Error::Domain(format!(
                "unknown k rule {other:?} (expected \"n*L^g\" or \"L^g\")"
            ))),
        }
    }
}

/// Grid of `(γ, L)` cells evaluated by [`capacity_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// `n_s = n_d = n`.
    pub n: usize,
    /// Linear destination SNR.
    pub snr: f64,
    pub gammas: Vec<f64>,
    pub l_values: Vec<usize>,
    pub k_rule: KRule,
    pub trials: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be >= 1".into()));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(Error::Domain(format!(
                "snr must be finite and > 0, got {}",
                self.snr
            )));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::Domain(format!(
                "gammas must be a non-empty list of reals >= 0, got {:?}",
                self.gammas
            )));
        }
        if self.l_values.is_empty()
            || self.l_values[0] == 0
            || self.l_values.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Domain(format!(
                "l_values must be a non-empty strictly ascending list of values >= 1, got {:?}",
                self.l_values
            )));
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// One `(γ, L)` cell. A failed cell keeps its coordinates, carries the error
/// message and reports NaN statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub l: usize,
    pub k: usize,
    pub c0_mean: f64,
    pub c0_stderr: f64,
    pub trials: usize,
    pub error: Option<String>,
}

/// Normalized capacity `C₀` for every `(γ, L)` in lexicographic order.
///
/// Every cell uses `spec.seed`, so a cell's value does not depend on which
/// other cells are in the grid.
pub fn capacity_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.gammas.len() * spec.l_values.len());
    for &gamma in &spec.gammas {
        for &l in &spec.l_values {
            let k = spec.k_rule.k(spec.n, l, gamma);
            let est = NetworkConfig::new(spec.n, spec.n, k, l, spec.snr)
                .map(|cfg| cfg.with_seed(spec.seed))
                .and_then(|cfg| ergodic_capacity(&cfg, spec.trials));
            rows.push(match est {
                Ok(est) => SweepRow {
                    gamma,
                    l,
                    k,
                    c0_mean: est.c0(),
                    c0_stderr: est.c0_stderr(),
                    trials: est.trials,
                    error: None,
                },
                Err(e) => SweepRow {
                    gamma,
                    l,
                    k,
                    c0_mean: f64::NAN,
                    c0_stderr: f64::NAN,
                    trials: spec.trials,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(rows)
}

/// `(1/n)·E[log det(I + (snr/n)·H·Hᴴ)]` for an `n × n` iid channel; this is
/// the model with no relays (`L = 0`), so `c0()` of the estimate is the
/// normalized reference.
pub fn point_to_point_reference(
    n: usize,
    snr: f64,
    trials: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    let cfg = NetworkConfig::new(n, n, n, 0, snr)?.with_seed(seed);
    ergodic_capacity(&cfg, trials)
}

/// Diagnostics of one `(L, β_r)` schedule entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRow {
    pub l: usize,
    pub beta_r: f64,
    pub k: usize,
    /// KS distance of the pooled spectrum to the MP CDF scaled by `snr`.
    pub ks: f64,
    pub whiteness: WhitenessStats,
    pub c0_mean: f64,
    pub c0_stderr: f64,
    /// Fraction of pooled eigenvalues below `0.05·snr`.
    pub mass_below: f64,
}

/// Relative threshold used for [`RegimeRow::mass_below`].
pub const COLLAPSE_THRESHOLD: f64 = 0.05;

/// KS distance between `spectrum` and the law of `snr·X`, X ~ MP(β_s).
pub fn ks_to_scaled_mp(spectrum: &EmpiricalDistribution, beta_s: f64, snr: f64) -> f64 {
    ks_distance(spectrum, |x| mp_cdf(beta_s, x / snr))
}

/// Runs `n_s = n_d` networks for each `(L, β_r)` with `k = round(β_r·n_d)`.
pub fn regime_report(
    n_d: usize,
    snr: f64,
    schedule: &[(usize, f64)],
    trials: usize,
    seed: u64,
) -> Result<Vec<RegimeRow>> {
    schedule
        .iter()
        .map(|&(l, beta_r)| {
            if !(beta_r > 0.0) || !beta_r.is_finite() {
                return Err(Error::Domain(format!(
                    "beta_r must be finite and > 0, got {beta_r}"
                )));
            }
            let k = ((beta_r * n_d as f64).round() as usize).max(1);
            let cfg = NetworkConfig::new(n_d, n_d, k, l, snr)?.with_seed(seed);
            let d = diagnostics(&cfg, trials)?;
            Ok(RegimeRow {
                l,
                beta_r,
                k,
                ks: ks_to_scaled_mp(&d.spectrum, cfg.beta_s(), snr),
                whiteness: d.whiteness,
                c0_mean: d.capacity.c0(),
                c0_stderr: d.capacity.c0_stderr(),
                mass_below: d.spectrum.mass_below(COLLAPSE_THRESHOLD * snr),
            })
        })
        .collect()
}

/// `(c/κ + 1)^{m·κ^γ}` for each κ, evaluated as `exp(m·κ^γ·ln(1 + c/κ))`.
pub fn lemma1_probe(c: f64, m: f64, gamma_exp: f64, kappas: &[f64]) -> Result<Vec<f64>> {
    if !(c > 0.0) || !(m > 0.0) || !(gamma_exp > 0.0) {
        return Err(Error::Domain(format!(
            "c, m, gamma must be > 0 (got {c}, {m}, {gamma_exp})"
        )));
    }
    if kappas.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Domain("kappas must be > 0".into()));
    }
    Ok(kappas
        .iter()
        .map(|&k| (m * k.powf(gamma_exp) * (c / k).ln_1p()).exp())
        .collect())
}

/// `(1/m)·G·Gᴴ` for an `n × m` iid CN(0,1) matrix `G`.
pub fn sample_wishart<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let g = ComplexMatrix::from_fn(n, m, |_, _| complex_normal(rng));
    scaled_gram(&g, 1.0 / m as f64)
}

/// Eigenvectors of a random Hermitian matrix, used as a random unitary.
fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let g = ComplexMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    hermitian_eigen(&g.symmetrized()).map(|(_, u)| u)
}

/// `|Υ_{AB}(ρ) − Υ_B(ρ)|` for `A = I + E`, `E = U·diag(e)·Uᴴ` with `e` iid
/// uniform on `[−δ, δ]` and `U` a random unitary.
///
/// The spectrum of `A·B` is taken from the Hermitian `Cᴴ·B·C` with
/// `A = C·Cᴴ`. Since `(1−δ)·I ≼ A ≼ (1+δ)·I` the gap never exceeds
/// `−ln(1 − δ)`.
pub fn lemma3_probe<R: Rng + ?Sized>(
    delta: f64,
    b: &ComplexMatrix,
    rho: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Domain(format!(
            "delta must lie in [0, 0.5), got {delta}"
        )));
    }
    let n = b.rows();
    let u = random_unitary(n, rng)?;
    let e: Vec<f64> = (0..n)
        .map(|_| delta * rng.random_range(-1.0..=1.0))
        .collect();
    let ue = ComplexMatrix::from_fn(n, n, |i, j| u[(i, j)] * e[j]);
    let mut a = matmul(&ue, &u.adjoint())?.symmetrized();
    for i in 0..n {
        a[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let c = cholesky(&a)?;
    let cbc = matmul(&matmul(&c.adjoint(), b)?, &c)?.symmetrized();
    let ab = EmpiricalDistribution::new(clamp_round_off(hermitian_eigenvalues(&cbc)?))?;
    let bb = EmpiricalDistribution::new(clamp_round_off(hermitian_eigenvalues(b)?))?;
    Ok((ab.shannon_transform(rho) - bb.shannon_transform(rho)).abs())
}

fn clamp_round_off(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// Mean of [`lemma3_probe`] over `draws` independent `B = (1/2n)·G·Gᴴ`
/// (`G` of size `n × 2n`) and perturbations.
pub fn lemma3_probe_mean(n: usize, delta: f64, rho: f64, draws: usize, seed: u64) -> Result<f64> {
    let gaps = crate::montecarlo::run_trials(draws, |t| {
        let mut rng = trial_rng(seed, t);
        let b = sample_wishart(n, 2 * n, &mut rng)?;
        lemma3_probe(delta, &b, rho, &mut rng)
    })?;
    Ok(gaps.iter().sum::<f64>() / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn k_rule_rounding() {
        assert_eq!(KRule::NTimesLPow.k(10, 10, 3.0), 10_000);
        assert_eq!(KRule::LPow.k(10, 3, 3.0), 27);
        assert_eq!(KRule::NTimesLPow.k(10, 16, 0.5), 40);
        assert_eq!(KRule::LPow.k(10, 5, 0.0), 1);
        assert_eq!(KRule::LPow.k(10, 2, 0.4), 1);
        assert_eq!("L^g".parse::<KRule>().unwrap(), KRule::LPow);
        assert!("n*L".parse::<KRule>().is_err());
    }

    #[test]
    fn sweep_spec_validation() {
        let spec = SweepSpec {
            n: 2,
            snr: 10.0,
            gammas: vec![0.0, 1.0],
            l_values: vec![1, 2],
            k_rule: KRule::NTimesLPow,
            trials: 4,
            seed: 1,
        };
        assert!(spec.validate().is_ok());
        assert!(SweepSpec {
            l_values: vec![2, 1],
            ..spec.clone()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            l_values: vec![0, 1],
            ..spec.clone()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            gammas: vec![-1.0],
            ..spec.clone()
        }
        .validate()
        .is_err());
        let rows = capacity_sweep(&spec).unwrap();
        let coords: Vec<(f64, usize, usize)> = rows.iter().map(|r| (r.gamma, r.l, r.k)).collect();
        assert_eq!(
            coords,
            vec![(0.0, 1, 2), (0.0, 2, 2), (1.0, 1, 2), (1.0, 2, 4)]
        );
        assert!(rows.iter().all(|r| r.error.is_none() && r.c0_mean >= 0.0));
    }

    #[test]
    fn reference_vanishes_with_snr() {
        let est = point_to_point_reference(3, 1e-10, 5, 2).unwrap();
        assert!(est.c0() < 1e-9);
    }

    #[test]
    fn lemma1_limits() {
        let e = lemma1_probe(1.0, 1.0, 1.0, &[1e6]).unwrap()[0];
        assert!((e - std::f64::consts::E).abs() < 1e-5);
        let one = lemma1_probe(1.0, 1.0, 0.5, &[1e8]).unwrap()[0];
        assert!((one - 1.0).abs() < 1e-3);
        let big = lemma1_probe(1.0, 1.0, 1.5, &[1e4, 1e5]).unwrap();
        assert!(big[1] > big[0] && big[0] > 1e3);
        assert!(lemma1_probe(1.0, 1.0, 1.0, &[0.0]).is_err());
    }

    #[test]
    fn lemma3_zero_delta_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = sample_wishart(16, 32, &mut rng).unwrap();
        assert!(lemma3_probe(0.0, &b, 1.0, &mut rng).unwrap() <= 1e-10);
        for delta in [0.05, 0.2, 0.45] {
            let gap = lemma3_probe(delta, &b, 3.0, &mut rng).unwrap();
            assert!(gap <= -(1.0 - delta).ln() + 1e-12, "{delta}: {gap}");
        }
        assert!(lemma3_probe(0.5, &b, 1.0, &mut rng).is_err());
    }
}
