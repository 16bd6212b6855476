//! The release gate: numbered end-to-end checks at desk-scale parameters.
//!
//! Each check returns a [`CheckOutcome`] instead of panicking so the CLI can
//! print a full table even when some checks fail.

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    complex_normal, sample_channels, simulate_transmission_traced, solve_power, NetworkConfig,
};
use crate::error::{Error, Result};
use crate::experiments::{
    capacity_sweep, lemma1_probe, lemma3_probe_mean, point_to_point_reference, regime_report,
    KRule, SweepSpec,
};
use crate::linalg::{matmul, resolvent_trace, scaled_gram, ComplexMatrix};
use crate::montecarlo::{run_trials, trial_rng};
use crate::rmt::{mp_stieltjes, product_stieltjes, theta_residual, AspectRatios, MarchenkoPastur};

/// Seed used by `verify` when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Result of one numbered check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantities and the thresholds they were held to.
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} {:>7.1}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

type Check = fn(u64) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 11] = [
    ("power coupling", power_coupling),
    ("covariance validity", covariance_validity),
    ("mp cross-check", mp_cross_check),
    ("product solver", product_solver),
    ("point-to-point recovery", point_to_point_recovery),
    ("degrees-of-freedom collapse", dof_collapse),
    ("hop saturation (gamma=1,3)", hop_saturation),
    ("relay scaling gain", relay_scaling_gain),
    ("noise whitening", noise_whitening),
    ("limit probes", limit_probes),
    ("reproducibility", reproducibility),
];

/// Number of checks run by [`run_all`].
pub const CHECK_COUNT: usize = CHECKS.len();

/// Runs check `id` (1-based).
pub fn run_check(id: usize, seed: u64) -> CheckOutcome {
    let (name, check) = CHECKS
        .get(id.wrapping_sub(1))
        .copied()
        .unwrap_or_else(|| panic!("check id {id} out of range 1..={CHECK_COUNT}"));
    let start = Instant::now();
    let (passed, detail) = match check(seed) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    (1..=CHECK_COUNT).map(|id| run_check(id, seed)).collect()
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Both coupling identities hold to 1e-10 for random `(snr, L)`.
pub fn power_coupling(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let snr = 10f64.powf(rng.random_range(-2.0..=2.0));
        let l = rng.random_range(1..=50);
        let (ra, rp) = solve_power(snr, l)?.coupling_residuals();
        worst = worst.max(ra).max(rp);
    }
    Ok((
        worst <= 1e-10,
        format!("max relative residual {worst:.2e} (<= 1e-10)"),
    ))
}

/// Sample covariance of simulated outputs against `R_s + R_n`, and relay
/// transmit power against `P/k`.
pub fn covariance_validity(seed: u64) -> Result<(bool, String)> {
    const TRANSMISSIONS: usize = 50_000;
    let cfg = NetworkConfig::new(16, 16, 64, 3, 10.0)?.with_seed(seed);
    let pw = solve_power(cfg.snr, cfg.l)?;
    let mut rng = trial_rng(seed, 0);
    let real = sample_channels(&cfg, &mut rng)?;
    let cov = real.covariances()?;
    let mut expected = cov.signal(&pw);
    expected.add_scaled(&cov.noise(&pw), 1.0)?;

    // Chunks run in parallel; each chunk owns a generator and the partial
    // sums are merged in chunk order. The output covariance is conditional
    // on `real`; relay power is P/k only on average over channels, so each
    // chunk also drives a freshly drawn chain for the power statistic.
    const CHUNKS: usize = 50;
    let per_chunk = TRANSMISSIONS / CHUNKS;
    let source_scale = (pw.p / cfg.n_s as f64).sqrt();
    let partials = run_trials(CHUNKS, |c| {
        let mut rng = trial_rng(seed ^ 0x5EED_C0DE, c);
        let fresh = sample_channels(&cfg, &mut rng)?;
        let mut acc = ComplexMatrix::zeros(cfg.n_d, cfg.n_d);
        let mut power = vec![0.0; cfg.l];
        for _ in 0..per_chunk {
            let s: Vec<Complex64> = (0..cfg.n_s)
                .map(|_| complex_normal(&mut rng) * source_scale)
                .collect();
            let t = simulate_transmission_traced(&real, &pw, &s, Some(&mut rng))?;
            for i in 0..cfg.n_d {
                for j in 0..cfg.n_d {
                    acc[(i, j)] += t.output[i] * t.output[j].conj();
                }
            }
            let t = simulate_transmission_traced(&fresh, &pw, &s, Some(&mut rng))?;
            for (p, q) in power.iter_mut().zip(&t.relay_power) {
                *p += q;
            }
        }
        Ok((acc, power))
    })?;
    let mut sample = ComplexMatrix::zeros(cfg.n_d, cfg.n_d);
    let mut power = vec![0.0; cfg.l];
    for (acc, p) in &partials {
        sample.add_scaled(acc, 1.0 / TRANSMISSIONS as f64)?;
        for (a, b) in power.iter_mut().zip(p) {
            *a += b / TRANSMISSIONS as f64;
        }
    }
    let mut diff = sample.clone();
    diff.add_scaled(&expected, -1.0)?;
    let cov_err = diff.frobenius_norm() / expected.frobenius_norm();
    let target = pw.p / cfg.k as f64;
    let power_err = power.iter().map(|p| rel(*p, target)).fold(0.0, f64::max);
    Ok((
        cov_err <= 0.05 && power_err <= 0.05,
        format!("covariance rel. Frobenius error {cov_err:.4} (<= 0.05); max relay power error over {CHUNKS} chains {power_err:.4} (<= 0.05)"),
    ))
}

/// Passes when `g` has the `1/s` asymptote and the physical sign off-axis.
pub fn stieltjes_branch_ok<F: Fn(Complex64) -> Result<Complex64>>(g: F) -> Result<bool> {
    let s = 1e6;
    let far = g(re(s))?;
    if (far.re * s - 1.0).abs() > 1e-5 {
        return Ok(false);
    }
    for s in [
        Complex64::new(1.0, 0.5),
        Complex64::new(-1.0, 0.1),
        Complex64::new(2.0, -1.0),
    ] {
        if g(s)?.im * s.im > 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// MP closed form against a sampled Gram matrix, plus quadrature moments.
pub fn mp_cross_check(seed: u64) -> Result<(bool, String)> {
    let mut rng = trial_rng(seed, 0);
    let x = ComplexMatrix::from_fn(256, 1024, |_, _| complex_normal(&mut rng));
    let w = scaled_gram(&x, 1.0 / 1024.0)?;
    let empirical = resolvent_trace(&w, re(1.0))?.re;
    let closed = mp_stieltjes(4.0, re(1.0))?.re;
    let err = rel(empirical, closed);
    let mp = MarchenkoPastur::new(4.0)?;
    let mass = mp.expect(|_| 1.0);
    let mean = mp.expect(|x| x);
    let branch = stieltjes_branch_ok(|s| mp_stieltjes(4.0, s))?;
    let ok = err <= 0.03 && (mass - 1.0).abs() <= 1e-8 && (mean - 1.0).abs() <= 1e-8 && branch;
    Ok((
        ok,
        format!(
            "G(1) closed {closed:.6} vs sampled {empirical:.6} (rel {err:.4} <= 0.03); mass-1 {:.1e}, mean-1 {:.1e} (<= 1e-8); branch {}",
            mass - 1.0,
            mean - 1.0,
            if branch { "ok" } else { "wrong" }
        ),
    ))
}

/// `(1/(k₁⋯k_N))·X₁⋯X_N·X_Nᴴ⋯X₁ᴴ` with `X_i` of size `k_{i−1} × k_i`.
pub fn sample_product_gram<R: Rng + ?Sized>(
    k0: usize,
    ratios: &AspectRatios,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let mut rows = k0;
    let mut prod = ComplexMatrix::identity(k0);
    let mut scale = 1.0;
    for &b in ratios.betas() {
        let cols = ((b * k0 as f64).round() as usize).max(1);
        let x = ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng));
        prod = matmul(&prod, &x)?;
        scale /= cols as f64;
        rows = cols;
    }
    scaled_gram(&prod, scale)
}

/// Product-equation solver against empirical resolvents, and its reduction
/// to the MP closed form.
pub fn product_solver(seed: u64) -> Result<(bool, String)> {
    let ratios = AspectRatios::new(vec![4.0, 4.0, 0.5])?;
    let grams = run_trials(10, |t| {
        sample_product_gram(128, &ratios, &mut trial_rng(seed, t))
    })?;
    let mut worst = 0.0f64;
    for s in [0.5, 1.0, 2.0, 5.0] {
        let mut avg = 0.0;
        for g in &grams {
            avg += resolvent_trace(g, re(s))?.re / grams.len() as f64;
        }
        let theory = product_stieltjes(&ratios, re(s))?.g.re;
        worst = worst.max(rel(avg, theory));
    }
    let mut reduction = 0.0f64;
    for beta in [0.25, 1.0, 4.0] {
        let single = AspectRatios::new(vec![beta])?;
        for s in [re(0.1), re(1.0), re(10.0), Complex64::new(1.0, 1.0)] {
            let d = (product_stieltjes(&single, s)?.g - mp_stieltjes(beta, s)?).norm();
            reduction = reduction.max(d);
        }
    }
    Ok((
        worst <= 0.05 && reduction <= 1e-10,
        format!("max rel. gap to empirical {worst:.4} (<= 0.05); single-factor reduction {reduction:.1e} (<= 1e-10)"),
    ))
}

/// Many relays per hop: the spectrum approaches the snr-scaled MP law.
pub fn point_to_point_recovery(seed: u64) -> Result<(bool, String)> {
    let rows = regime_report(32, 10.0, &[(1, 16.0), (2, 32.0)], 20, seed)?;
    let (a, b) = (rows[0].ks, rows[1].ks);
    Ok((
        a <= 0.08 && b <= 0.10,
        format!("KS at L=1, beta_r=16: {a:.4} (<= 0.08); L=2, beta_r=32: {b:.4} (<= 0.10)"),
    ))
}

/// Fixed relay ratio: the spectrum collapses towards zero as hops grow.
pub fn dof_collapse(seed: u64) -> Result<(bool, String)> {
    let rows = regime_report(32, 10.0, &[(1, 1.0), (4, 1.0), (16, 1.0)], 20, seed)?;
    let m: Vec<f64> = rows.iter().map(|r| r.mass_below).collect();
    let increasing = m.windows(2).all(|w| w[1] > w[0]);
    Ok((
        increasing && m[2] > 0.9,
        format!(
            "mass below 0.05*snr at L=1,4,16: {:.3}, {:.3}, {:.3} (increasing: {increasing}; last > 0.9)",
            m[0], m[1], m[2]
        ),
    ))
}

fn sweep(
    gammas: Vec<f64>,
    l_values: Vec<usize>,
    seed: u64,
) -> Result<Vec<crate::experiments::SweepRow>> {
    let spec = SweepSpec {
        n: 10,
        snr: 10.0,
        gammas,
        l_values,
        k_rule: KRule::NTimesLPow,
        trials: 500,
        seed,
    };
    let rows = capacity_sweep(&spec)?;
    if let Some(bad) = rows.iter().find(|r| r.error.is_some()) {
        return Err(Error::Contract(format!(
            "sweep cell gamma={} L={} failed: {}",
            bad.gamma,
            bad.l,
            bad.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(rows)
}

fn c0_at(rows: &[crate::experiments::SweepRow], gamma: f64, l: usize) -> f64 {
    rows.iter()
        .find(|r| r.gamma == gamma && r.l == l)
        .map(|r| r.c0_mean)
        .expect("cell present in sweep")
}

/// Fast relay growth reaches the point-to-point capacity; linear growth
/// flattens out.
pub fn hop_saturation(seed: u64) -> Result<(bool, String)> {
    let rows = sweep(vec![1.0, 3.0], vec![10, 16, 32], seed)?;
    let reference = point_to_point_reference(10, 10.0, 500, seed)?.c0();
    let g3 = c0_at(&rows, 3.0, 10);
    let near = rel(g3, reference);
    let (c16, c32) = (c0_at(&rows, 1.0, 16), c0_at(&rows, 1.0, 32));
    let flat = (c32 - c16).abs() / c16;
    Ok((
        near <= 0.10 && flat <= 0.05,
        format!(
            "C0(gamma=3,L=10) {g3:.4} vs reference {reference:.4} (rel {near:.4} <= 0.10); \
             |C0(32)-C0(16)|/C0(16) at gamma=1: {flat:.4} (<= 0.05)"
        ),
    ))
}

/// Square-root relay growth against fixed cluster size at 16 hops.
pub fn relay_scaling_gain(seed: u64) -> Result<(bool, String)> {
    let rows = sweep(vec![0.0, 0.5], vec![16], seed)?;
    let (c0, c05) = (c0_at(&rows, 0.0, 16), c0_at(&rows, 0.5, 16));
    let ratio = c05 / c0;
    Ok((
        ratio >= 2.5,
        format!("C0(gamma=0.5)/C0(gamma=0) at L=16: {c05:.4}/{c0:.4} = {ratio:.3} (>= 2.5)"),
    ))
}

/// `R_n` approaches a multiple of the identity as clusters grow.
pub fn noise_whitening(seed: u64) -> Result<(bool, String)> {
    let rows = regime_report(32, 10.0, &[(2, 1.0), (2, 4.0), (2, 16.0)], 20, seed)?;
    let d: Vec<f64> = rows.iter().map(|r| r.whiteness.mean).collect();
    let ok = d.windows(2).all(|w| w[1] < w[0]);
    Ok((
        ok,
        format!(
            "mean trace-norm distance at beta_r=1,4,16: {:.4}, {:.4}, {:.4} (strictly decreasing)",
            d[0], d[1], d[2]
        ),
    ))
}

/// Exponential-limit regimes, the perturbed Shannon transform and the
/// trial root of the implicit equation.
pub fn limit_probes(seed: u64) -> Result<(bool, String)> {
    let e = lemma1_probe(1.0, 1.0, 1.0, &[1e6])?[0];
    let one = lemma1_probe(1.0, 1.0, 0.5, &[1e8])?[0];
    let big = lemma1_probe(1.0, 1.0, 1.5, &[1e4, 1e5])?;
    let exp_limits = (e - std::f64::consts::E).abs() <= 1e-5
        && (one - 1.0).abs() <= 1e-3
        && big[1] > big[0]
        && big[0] > 1e3;

    let g0 = lemma3_probe_mean(64, 0.0, 1.0, 20, seed)?;
    let g_small = lemma3_probe_mean(64, 0.01, 1.0, 20, seed)?;
    let g_large = lemma3_probe_mean(64, 0.3, 1.0, 20, seed)?;
    let bound = -(1.0f64 - 0.3).ln();
    let shannon_gap = g0 <= 1e-10 && g_small < g_large && g_large <= bound;

    let mut theta = true;
    for (beta_s, d, s) in [(1.0, 1.0, 1.0), (0.5, 2.0, 0.3), (2.0, 0.1, 5.0)] {
        let r = theta_residual(beta_s, d, s, 1.0 / s);
        theta &= (r - 1.0 / s).abs() <= 1e-12 * (1.0 / s) && r != 0.0;
    }
    Ok((
        exp_limits && shannon_gap && theta,
        format!(
            "exp limit {e:.7}, unit-limit {one:.6}, growth {:.3e} -> {:.3e}; \
             gap delta=0: {g0:.1e}, 0.01: {g_small:.2e}, 0.3: {g_large:.2e} (bound {bound:.3}); \
             residual at G=1/s equals 1/s: {theta}",
            big[0], big[1]
        ),
    ))
}

static SCRATCH_COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir() -> Result<PathBuf> {
    let n = SCRATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("relaycap-verify-{}-{n}", std::process::id()));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Contract(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn read(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Contract(format!("cannot read {}: {e}", path.display())))
}

/// Every output file is byte-identical across repeated runs and thread caps.
pub fn reproducibility(seed: u64) -> Result<(bool, String)> {
    let dir = scratch_dir()?;
    let config = dir.join("sweep.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"model": {{"dist": "gaussian"}},
  "sweep": {{"n": 4, "snr_db": 10, "gammas": [0, 1], "l_values": [1, 2, 4], "k_rule": "n*L^g", "trials": 40, "seed": {seed}}},
  "output": {{"format": "csv"}}}}"#
        ),
    )
    .map_err(|e| Error::Contract(format!("cannot write {}: {e}", config.display())))?;
    let seed_s = seed.to_string();
    let config_s = config.to_string_lossy().into_owned();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            "capacity.csv",
            vec![
                "capacity", "--ns", "6", "--nd", "6", "--k", "12", "--l", "2", "--snr-db", "10",
                "--trials", "64", "--seed", &seed_s,
            ],
        ),
        (
            "spectrum.csv",
            vec![
                "spectrum", "--ns", "8", "--nd", "8", "--k", "32", "--l", "1", "--snr-db", "10",
                "--trials", "8", "--seed", &seed_s,
            ],
        ),
        ("sweep.csv", vec!["sweep", "--config", &config_s]),
        (
            "stieltjes.csv",
            vec!["stieltjes", "--betas", "4,4,1", "--s-grid", "0.1:10:20"],
        ),
        (
            "reference.json",
            vec![
                "reference",
                "--n",
                "4",
                "--snr-db",
                "10",
                "--trials",
                "64",
                "--seed",
                &seed_s,
                "--format",
                "json",
            ],
        ),
    ];
    let mut mismatches = Vec::new();
    for (file, args) in &commands {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "4", "1"].iter().enumerate() {
            let out = dir.join(format!("{run}-{file}"));
            let out_s = out.to_string_lossy().into_owned();
            let mut argv = vec!["relaycap", "--threads", threads, "--out", &out_s];
            argv.extend(args.iter().copied());
            let code = crate::cli::run(argv);
            if code != 0 {
                return Err(Error::Contract(format!(
                    "`{}` exited with {code}",
                    args.join(" ")
                )));
            }
            let mut bytes = read(&out)?;
            if *file == "spectrum.csv" {
                bytes.extend(read(&crate::cli::companion_path(&out))?);
            }
            outputs.push(bytes);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(*file);
        }
    }

    // One numbered check re-run under different pools.
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Contract(e.to_string()))
    };
    let a = pool(1)?.install(|| regime_report(16, 10.0, &[(1, 4.0), (3, 1.0)], 6, seed))?;
    let b = pool(3)?.install(|| regime_report(16, 10.0, &[(1, 4.0), (3, 1.0)], 6, seed))?;
    if format!("{a:?}") != format!("{b:?}") {
        mismatches.push("regime_report");
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!(
                "{} CLI outputs and one report identical across 3 runs with 1/4 threads",
                commands.len()
            )
        } else {
            format!("outputs differ: {}", mismatches.join(", "))
        },
    ))
}
