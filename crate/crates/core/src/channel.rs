//! Network configuration, power coupling, channel sampling and the
//! destination covariances of the amplify-and-forward chain.
//!
//! Cluster indexing follows the transmission order in reverse: cluster 1
//! sits next to the destination, so `H₁` is `n_d × k` and `H_{L+1}` is
//! `k × n_s`. A configuration with `l = 0` is the direct point-to-point
//! link with a single `n_d × n_s` matrix.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, scaled_gram, ComplexMatrix};

/// Distribution of the iid channel entries. Both are zero-mean with unit
/// complex variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryDistribution {
    /// Circularly symmetric complex Gaussian, variance 1/2 per component.
    #[default]
    #[serde(rename = "gaussian")]
    ComplexGaussian,
    /// Uniform on `{±1 ± i}/√2`.
    Qpsk,
}

impl EntryDistribution {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            EntryDistribution::ComplexGaussian => complex_normal(rng),
            EntryDistribution::Qpsk => {
                let bits: u8 = rng.random();
                let re = if bits & 1 == 0 {
                    FRAC_1_SQRT_2
                } else {
                    -FRAC_1_SQRT_2
                };
                let im = if bits & 2 == 0 {
                    FRAC_1_SQRT_2
                } else {
                    -FRAC_1_SQRT_2
                };
                Complex64::new(re, im)
            }
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryDistribution::ComplexGaussian => "gaussian",
            EntryDistribution::Qpsk => "qpsk",
        })
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "complex-gaussian" => Ok(EntryDistribution::ComplexGaussian),
            "qpsk" => Ok(EntryDistribution::Qpsk),
            other => Err(Error::Domain(format!(
                "unknown entry distribution '{other}'"
            ))),
        }
    }
}

/// Unit-variance circular complex normal draw.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Dimensions and operating point of one multi-hop network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_s: usize,
    pub n_d: usize,
    /// Relay antennas per cluster.
    pub k: usize,
    /// Number of relay clusters; 0 is the direct link.
    pub l: usize,
    /// Linear destination SNR.
    pub snr: f64,
    pub entry_dist: EntryDistribution,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(n_s: usize, n_d: usize, k: usize, l: usize, snr: f64) -> Result<Self> {
        let cfg = Self {
            n_s,
            n_d,
            k,
            l,
            snr,
            entry_dist: EntryDistribution::ComplexGaussian,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dist(mut self, dist: EntryDistribution) -> Self {
        self.entry_dist = dist;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 || self.n_d == 0 || self.k == 0 {
            return Err(Error::Domain(format!(
                "antenna counts must be >= 1 (n_s={}, n_d={}, k={})",
                self.n_s, self.n_d, self.k
            )));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(Error::Domain(format!(
                "snr must be finite and > 0, got {}",
                self.snr
            )));
        }
        Ok(())
    }

    pub fn beta_s(&self) -> f64 {
        self.n_s as f64 / self.n_d as f64
    }

    pub fn beta_r(&self) -> f64 {
        self.k as f64 / self.n_d as f64
    }

    /// Expected shapes `(rows, cols)` of `H₁ … H_{L+1}`.
    pub fn channel_shapes(&self) -> Vec<(usize, usize)> {
        if self.l == 0 {
            return vec![(self.n_d, self.n_s)];
        }
        let mut shapes = Vec::with_capacity(self.l + 1);
        shapes.push((self.n_d, self.k));
        shapes.extend(std::iter::repeat_n((self.k, self.k), self.l - 1));
        shapes.push((self.k, self.n_s));
        shapes
    }
}

/// Transmit power and relay gain resolved for a target destination SNR.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: f64,
    pub alpha: f64,
    pub snr: f64,
    pub l: usize,
}

impl PowerAllocation {
    /// Relative residuals of `α = P/(1+P)` and
    /// `P = (1−α^{L+1})/((1−α)α^L)·snr`, by direct substitution.
    pub fn coupling_residuals(&self) -> (f64, f64) {
        let alpha_eq = self.p / (1.0 + self.p);
        let r_alpha = (self.alpha - alpha_eq).abs() / self.alpha;
        let a = self.alpha;
        let l = self.l as i32;
        let p_eq = (1.0 - a.powi(l + 1)) / ((1.0 - a) * a.powi(l)) * self.snr;
        let r_p = (self.p - p_eq).abs() / self.p;
        (r_alpha, r_p)
    }

    /// `(1 − α^{L+1})/(1 − α)`, the limiting per-eigenvalue noise level.
    pub fn noise_level(&self) -> f64 {
        (0..=self.l).map(|i| self.alpha.powi(i as i32)).sum()
    }
}

/// Closed-form solution of the coupled power definitions:
/// `α^{L+1} = snr/(1+snr)` and `P = α/(1−α)`.
pub fn solve_power(snr: f64, l: usize) -> Result<PowerAllocation> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::Domain(format!(
            "snr must be finite and > 0, got {snr}"
        )));
    }
    // ln α = −ln(1 + 1/snr)/(L+1); keep 1 − α accurate when α → 1.
    let log_alpha = -(1.0 / snr).ln_1p() / (l as f64 + 1.0);
    let alpha = log_alpha.exp();
    let one_minus = -log_alpha.exp_m1();
    Ok(PowerAllocation {
        p: alpha / one_minus,
        alpha,
        snr,
        l,
    })
}

/// The sampled channel matrices `H₁ … H_{L+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    matrices: Vec<ComplexMatrix>,
    config: NetworkConfig,
}

impl ChannelRealization {
    /// Wraps caller-supplied matrices (e.g. deterministic test doubles).
    pub fn from_matrices(config: NetworkConfig, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        config.validate()?;
        let shapes = config.channel_shapes();
        if shapes.len() != matrices.len() {
            return Err(Error::Contract(format!(
                "expected {} channel matrices, got {}",
                shapes.len(),
                matrices.len()
            )));
        }
        for (idx, (m, &(r, c))) in matrices.iter().zip(&shapes).enumerate() {
            if m.rows() != r || m.cols() != c {
                return Err(Error::Contract(format!(
                    "H_{} is {}x{}, expected {r}x{c}",
                    idx + 1,
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Self { matrices, config })
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Partial products `H₁⋯H_l/√(k^l)` are accumulated once and turned into
    /// all covariance terms.
    pub fn covariances(&self) -> Result<Covariances> {
        let cfg = &self.config;
        let mut noise_terms = Vec::with_capacity(cfg.l + 1);
        noise_terms.push(ComplexMatrix::identity(cfg.n_d));
        let inv_sqrt_k = 1.0 / (cfg.k as f64).sqrt();
        let mut prefix: Option<ComplexMatrix> = None;
        for h in &self.matrices[..cfg.l] {
            let next = match &prefix {
                None => h.scaled(inv_sqrt_k),
                Some(p) => matmul(p, &h.scaled(inv_sqrt_k))?,
            };
            noise_terms.push(scaled_gram(&next, 1.0)?);
            prefix = Some(next);
        }
        let last = &self.matrices[cfg.l];
        let full = match &prefix {
            None => last.clone(),
            Some(p) => matmul(p, last)?,
        };
        let signal_tilde = scaled_gram(&full, 1.0 / cfg.n_s as f64)?;
        Ok(Covariances {
            signal_tilde,
            noise_terms,
        })
    }
}

/// Power-independent covariance building blocks of one realization:
/// `R̃_s` and the partial noise terms `R_{n,0} = I, R_{n,1}, …, R_{n,L}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariances {
    pub signal_tilde: ComplexMatrix,
    pub noise_terms: Vec<ComplexMatrix>,
}

impl Covariances {
    pub fn hops(&self) -> usize {
        self.noise_terms.len() - 1
    }

    /// `R_s = P·α^L·R̃_s`.
    pub fn signal(&self, pw: &PowerAllocation) -> ComplexMatrix {
        self.signal_tilde
            .scaled(pw.p * pw.alpha.powi(self.hops() as i32))
    }

    /// `R_n = Σ_{l=0}^{L} α^l·R_{n,l}`.
    pub fn noise(&self, pw: &PowerAllocation) -> ComplexMatrix {
        let mut r_n = self.noise_terms[0].clone();
        for (l, term) in self.noise_terms.iter().enumerate().skip(1) {
            r_n.add_scaled(term, pw.alpha.powi(l as i32))
                .expect("noise terms share a shape");
        }
        r_n
    }
}

fn check_power(real: &ChannelRealization, pw: &PowerAllocation) -> Result<()> {
    if pw.l != real.config.l {
        return Err(Error::Contract(format!(
            "power allocation for L={} applied to a realization with L={}",
            pw.l, real.config.l
        )));
    }
    Ok(())
}

/// `R_s = (P·α^L/(n_s·k^L))·H₁⋯H_{L+1}·H_{L+1}ᴴ⋯H₁ᴴ`.
pub fn signal_covariance(real: &ChannelRealization, pw: &PowerAllocation) -> Result<ComplexMatrix> {
    check_power(real, pw)?;
    Ok(real.covariances()?.signal(pw))
}

/// `R̃_s = (1/(n_s·k^L))·H₁⋯H_{L+1}·H_{L+1}ᴴ⋯H₁ᴴ`.
pub fn normalized_signal_covariance(real: &ChannelRealization) -> Result<ComplexMatrix> {
    Ok(real.covariances()?.signal_tilde)
}

/// `R_n = I + Σ_l (α/k)^l·H₁⋯H_l·H_lᴴ⋯H₁ᴴ`.
pub fn noise_covariance(real: &ChannelRealization, pw: &PowerAllocation) -> Result<ComplexMatrix> {
    check_power(real, pw)?;
    Ok(real.covariances()?.noise(pw))
}

/// `R_{n,l}` for `l = 0..=L`.
pub fn noise_partial_terms(real: &ChannelRealization) -> Result<Vec<ComplexMatrix>> {
    Ok(real.covariances()?.noise_terms)
}

pub fn sample_channels<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let dist = cfg.entry_dist;
    let matrices = cfg
        .channel_shapes()
        .into_iter()
        .map(|(r, c)| ComplexMatrix::from_fn(r, c, |_, _| dist.sample(rng)))
        .collect();
    ChannelRealization::from_matrices(cfg.clone(), matrices)
}

/// How a trial turns randomness into covariances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    /// Gram recursion for Gaussian entries, explicit matrices otherwise.
    #[default]
    Auto,
    /// Draw every `H_l` and multiply.
    Explicit,
    /// Propagate an `n_d × n_d` factor of the partial Gram matrices.
    GramRecursion,
}

/// Lower-trapezoidal factor `T` (`rows × min(rows, dof)`) with `T·Tᴴ`
/// distributed as `G·Gᴴ` for an iid CN(0,1) `rows × dof` matrix `G`
/// (complex Bartlett decomposition).
fn bartlett_factor<R: Rng + ?Sized>(rows: usize, dof: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let cols = rows.min(dof);
    let mut t = ComplexMatrix::zeros(rows, cols);
    for j in 0..cols {
        let shape = (dof - j) as f64;
        let gamma = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        let g: f64 = gamma.sample(rng);
        t[(j, j)] = Complex64::new(g.sqrt(), 0.0);
        for i in (j + 1)..rows {
            t[(i, j)] = complex_normal(rng);
        }
    }
    Ok(t)
}

/// Samples the covariance blocks without materialising the `k × k` channels.
///
/// For Gaussian entries, `H₁⋯H_l·H_{l+1}` conditioned on the prefix equals
/// in distribution `W^{1/2}·G` where `W` is the prefix Gram matrix and `G` is
/// a fresh iid matrix, so each hop only needs an `n_d × n_d` Bartlett factor.
/// The joint law of `(R_{n,1}, …, R_{n,L}, R̃_s)` is unchanged.
pub fn sample_covariances_gram<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<Covariances> {
    cfg.validate()?;
    if cfg.entry_dist != EntryDistribution::ComplexGaussian {
        return Err(Error::Contract(
            "the Gram recursion is exact only for complex Gaussian entries".into(),
        ));
    }
    let mut noise_terms = Vec::with_capacity(cfg.l + 1);
    noise_terms.push(ComplexMatrix::identity(cfg.n_d));
    let mut factor = ComplexMatrix::identity(cfg.n_d);
    let inv_sqrt_k = 1.0 / (cfg.k as f64).sqrt();
    for _ in 0..cfg.l {
        let t = bartlett_factor(factor.cols(), cfg.k, rng)?;
        factor = matmul(&factor, &t)?.scaled(inv_sqrt_k);
        noise_terms.push(scaled_gram(&factor, 1.0)?);
    }
    let t = bartlett_factor(factor.cols(), cfg.n_s, rng)?;
    let signal = matmul(&factor, &t)?;
    let signal_tilde = scaled_gram(&signal, 1.0 / cfg.n_s as f64)?;
    Ok(Covariances {
        signal_tilde,
        noise_terms,
    })
}

pub fn sample_covariances<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    method: SamplingMethod,
    rng: &mut R,
) -> Result<Covariances> {
    let use_gram = match method {
        SamplingMethod::Auto => cfg.entry_dist == EntryDistribution::ComplexGaussian,
        SamplingMethod::Explicit => false,
        SamplingMethod::GramRecursion => true,
    };
    if use_gram {
        sample_covariances_gram(cfg, rng)
    } else {
        sample_channels(cfg, rng)?.covariances()
    }
}

/// Destination output plus the average per-antenna transmit power of each
/// relay cluster (`relay_power[l-1]` belongs to cluster `l`).
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission {
    pub output: Vec<Complex64>,
    pub relay_power: Vec<f64>,
}

/// Runs one channel use through the chain hop by hop. Passing `None` for the
/// noise stream silences every receiver front-end.
pub fn simulate_transmission<R: Rng + ?Sized>(
    real: &ChannelRealization,
    pw: &PowerAllocation,
    s: &[Complex64],
    noise: Option<&mut R>,
) -> Result<Vec<Complex64>> {
    simulate_transmission_traced(real, pw, s, noise).map(|t| t.output)
}

pub fn simulate_transmission_traced<R: Rng + ?Sized>(
    real: &ChannelRealization,
    pw: &PowerAllocation,
    s: &[Complex64],
    mut noise: Option<&mut R>,
) -> Result<Transmission> {
    check_power(real, pw)?;
    let cfg = &real.config;
    if s.len() != cfg.n_s {
        return Err(Error::Contract(format!(
            "transmit vector has {} entries, expected n_s = {}",
            s.len(),
            cfg.n_s
        )));
    }
    let mut add_noise = |v: &mut Vec<Complex64>| {
        if let Some(rng) = noise.as_deref_mut() {
            for x in v.iter_mut() {
                *x += complex_normal(rng);
            }
        }
    };

    let gain = (pw.alpha / cfg.k as f64).sqrt();
    let mut relay_power = vec![0.0; cfg.l];
    // Slot 1: sources to cluster L (or straight to the destination when L = 0).
    let mut received = real.matrices[cfg.l].mul_vec(s)?;
    add_noise(&mut received);
    for l in (1..=cfg.l).rev() {
        let transmit: Vec<Complex64> = received.iter().map(|y| y * gain).collect();
        relay_power[l - 1] =
            transmit.iter().map(|x| x.norm_sqr()).sum::<f64>() / transmit.len() as f64;
        received = real.matrices[l - 1].mul_vec(&transmit)?;
        add_noise(&mut received);
    }
    Ok(Transmission {
        output: received,
        relay_power,
    })
}
