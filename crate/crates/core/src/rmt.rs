//! Large-system spectral predictions.
//!
//! Stieltjes transforms use the convention `G(s) = ∫ f(x)/(s + x) dx`, so a
//! point mass at `x₀` maps to `1/(s + x₀)`, real `s > 0` gives `0 < G < 1/s`,
//! and the density is recovered from `Im G(−x − iε)/π`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::spectrum::ShannonTransform;

/// Starting point of the continuation path, where `G ≈ 1/s`.
pub const CONTINUATION_START: f64 = 1e6;

/// Acceptance threshold on `|f(G)|` for solved Stieltjes equations.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Default imaginary offset for Stieltjes inversion.
pub const DEFAULT_INVERSION_EPS: f64 = 1e-3;

/// `β₁ … β_N` of a product of rectangular random matrices, each relative to
/// the row dimension `k₀` of the first factor (`β₀ = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct AspectRatios {
    betas: Vec<f64>,
}

impl AspectRatios {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Domain(
                "at least one aspect ratio is required".into(),
            ));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(Error::Domain(format!(
                "aspect ratios must be finite and > 0, got {b}"
            )));
        }
        Ok(Self { betas })
    }

    /// Ratios for `R̃_s` of an `L`-cluster chain: `(β_r, …, β_r, β_s)` with
    /// `L` copies of `β_r`.
    pub fn relay_chain(beta_r: f64, beta_s: f64, l: usize) -> Result<Self> {
        let mut betas = vec![beta_r; l];
        betas.push(beta_s);
        Self::new(betas)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn order(&self) -> usize {
        self.betas.len()
    }

    /// Mass of the limiting spectrum at zero: `1 − min(1, β₁, …, β_N)`.
    pub fn atom_mass(&self) -> f64 {
        let min = self.betas.iter().copied().fold(1.0, f64::min);
        1.0 - min
    }
}

/// A solved Stieltjes equation at one argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StieltjesSolution {
    pub s: Complex64,
    pub g: Complex64,
    pub residual: f64,
    /// Which root was returned. Zero is the physical branch reached by
    /// continuation from the `1/s` asymptote; for the Θ-regime equation it
    /// is the index of the root among all roots in `(0, 1/s)`, ascending.
    pub branch_id: usize,
}

/// `1/(s + x₀)`, the transform of a point mass at `x₀`.
pub fn delta_stieltjes(x0: f64, s: Complex64) -> Result<Complex64> {
    let d = s + x0;
    if d.norm() == 0.0 {
        return Err(Error::Domain(format!(
            "pole of the point-mass transform at s = {s}"
        )));
    }
    Ok(d.inv())
}

/// Marčenko–Pastur transform for `(1/k₁)·X·Xᴴ`, `X` of size `k₀ × k₁`,
/// `β = k₁/k₀`. Solves `β⁻¹·s·G² + (s + 1 − β⁻¹)·G = 1` on the branch with
/// `s·G → 1` for large real `s` and `Im G·Im s < 0` off the real axis.
pub fn mp_stieltjes(beta: f64, s: Complex64) -> Result<Complex64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "beta must be finite and > 0, got {beta}"
        )));
    }
    if s.norm() == 0.0 {
        return Err(Error::Domain("mp_stieltjes is singular at s = 0".into()));
    }
    let c = 1.0 / beta;
    // On the negative real axis take the limit from below (Im s → 0⁻).
    let s = if s.im == 0.0 && s.re < 0.0 {
        Complex64::new(s.re, -1e-14 * s.re.abs().max(1.0))
    } else {
        s
    };
    let b = s + 1.0 - c;
    let disc = (s * s + s * (2.0 * (c + 1.0)) + (c - 1.0) * (c - 1.0)).sqrt();
    // Roots 2/(b ± disc); this form avoids cancellation at large |s|.
    let plus = b + disc;
    let minus = b - disc;

    if s.im == 0.0 {
        // Real positive s: the root in (0, 1/s].
        let g = Complex64::new(2.0 / (b.re + disc.re.abs()), 0.0);
        return Ok(g);
    }

    let candidates: Vec<Complex64> = [plus, minus]
        .iter()
        .filter(|d| d.norm() > 0.0)
        .map(|d| 2.0 / d)
        .collect();
    let wanted = -s.im.signum();
    candidates
        .iter()
        .copied()
        .filter(|g| g.im * wanted >= 0.0)
        .max_by(|a, b| (a.im * wanted).total_cmp(&(b.im * wanted)))
        .or_else(|| candidates.first().copied())
        .ok_or_else(|| Error::Domain(format!("no finite root at s = {s}")))
}

/// Support edges `((1 − √c)², (1 + √c)²)` with `c = 1/β`.
pub fn mp_edges(beta: f64) -> (f64, f64) {
    let rc = (1.0 / beta).sqrt();
    ((1.0 - rc).powi(2), (1.0 + rc).powi(2))
}

/// Point mass at zero, `max(0, 1 − β)`.
pub fn mp_atom(beta: f64) -> f64 {
    (1.0 - beta).max(0.0)
}

/// Continuous density and atom mass of the Marčenko–Pastur law.
pub fn mp_density(beta: f64, x: f64) -> (f64, f64) {
    let c = 1.0 / beta;
    let (a, b) = mp_edges(beta);
    let atom = mp_atom(beta);
    if x <= a || x >= b || x <= 0.0 {
        return (0.0, atom);
    }
    (((b - x) * (x - a)).sqrt() / (2.0 * PI * c * x), atom)
}

/// `∫_a^{x} g(t)·f_MP(t) dt` over the continuous part, with the change of
/// variables `t = m + h·cos θ` that removes the square-root edges.
fn mp_integrate<G: Fn(f64) -> f64>(beta: f64, upper: f64, g: G, tol: f64) -> f64 {
    let c = 1.0 / beta;
    let (a, b) = mp_edges(beta);
    if upper <= a {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let theta_lo = if upper >= b {
        0.0
    } else {
        ((upper - mid) / half).clamp(-1.0, 1.0).acos()
    };
    let weight = half * half / (2.0 * PI * c);
    quad::integrate(
        |theta| {
            // Half-angle forms keep x accurate near the lower edge when a = 0.
            let (sh, ch) = (0.5 * theta).sin_cos();
            let x = a + (b - a) * ch * ch;
            if x <= 0.0 {
                return 0.0;
            }
            let sin = 2.0 * sh * ch;
            g(x) * weight * sin * sin / x
        },
        theta_lo,
        PI,
        tol,
    )
}

/// `P(λ < x)` under the Marčenko–Pastur law, atom included for `x > 0`.
pub fn mp_cdf(beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (_, b) = mp_edges(beta);
    if x >= b {
        return 1.0;
    }
    (mp_atom(beta) + mp_integrate(beta, x, |_| 1.0, 1e-12)).clamp(0.0, 1.0)
}

/// Marčenko–Pastur law with ratio `β`, as a measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchenkoPastur {
    pub beta: f64,
}

impl MarchenkoPastur {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "beta must be finite and > 0, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    /// `∫ g dF` over the continuous part plus `g(0)` times the atom.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        mp_atom(self.beta) * g(0.0) + mp_integrate(self.beta, f64::INFINITY, g, 1e-12)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        mp_cdf(self.beta, x)
    }
}

impl ShannonTransform for MarchenkoPastur {
    fn shannon_transform(&self, rho: f64) -> f64 {
        // The atom at zero contributes log(1) = 0.
        mp_integrate(self.beta, f64::INFINITY, |x| (rho * x).ln_1p(), 1e-12)
    }
}

/// Value and derivative of `f(G) = (G/β_N)·Π_n (sG − 1 + β_{n+1})/β_n + sG − 1`.
fn product_poly(betas: &[f64], s: Complex64, g: Complex64) -> (Complex64, Complex64) {
    let n = betas.len();
    let mut prod = g / betas[n - 1];
    let mut dprod = Complex64::new(1.0 / betas[n - 1], 0.0);
    let mut prev = 1.0;
    for &next in betas {
        let factor = (s * g - 1.0 + next) / prev;
        let dfactor = s / prev;
        dprod = dprod * factor + prod * dfactor;
        prod *= factor;
        prev = next;
    }
    (prod + s * g - 1.0, dprod + s)
}

/// `|f(G)|` for the product-matrix equation.
pub fn product_residual(ratios: &AspectRatios, s: Complex64, g: Complex64) -> f64 {
    product_poly(ratios.betas(), s, g).0.norm()
}

fn newton<F: Fn(Complex64) -> (Complex64, Complex64)>(
    f: F,
    start: Complex64,
    max_iter: usize,
) -> Option<(Complex64, usize)> {
    let mut g = start;
    for it in 0..max_iter {
        let (v, dv) = f(g);
        if dv.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
            return None;
        }
        let step = v / dv;
        g -= step;
        if !g.re.is_finite() || !g.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * g.norm().max(1e-300) {
            return Some((g, it + 1));
        }
    }
    None
}

/// Solves the product-matrix Stieltjes equation by Newton continuation from
/// `s₀ = 10⁶` (where `G ≈ 1/s₀`) along `s(t) = exp((1−t)·ln s₀ + t·ln s)`.
pub fn product_stieltjes(ratios: &AspectRatios, s: Complex64) -> Result<StieltjesSolution> {
    if s.im == 0.0 && !(s.re > 0.0) {
        return Err(Error::Domain(format!(
            "product_stieltjes needs real s > 0 or Im s != 0, got {s}"
        )));
    }
    let betas = ratios.betas();
    let start = Complex64::new(CONTINUATION_START.max(10.0 * s.norm()), 0.0);
    let log_start = start.ln();
    let log_target = s.ln();
    let at = |t: f64| (log_start * (1.0 - t) + log_target * t).exp();

    let (mut g, _) =
        newton(|g| product_poly(betas, start, g), start.inv(), 50).ok_or_else(|| {
            Error::NoConvergence {
                op: "product_stieltjes",
                detail: "Newton failed at the continuation start".into(),
            }
        })?;
    let mut prev_g = g;
    let mut prev_dt = 0.0;
    let mut t = 0.0;
    let mut dt: f64 = 1.0 / 32.0;
    let mut steps = 0usize;
    while t < 1.0 {
        let step = dt.min(1.0 - t);
        let t_next = if t + step >= 1.0 - 1e-15 {
            1.0
        } else {
            t + step
        };
        let s_next = at(t_next);
        let predicted = if prev_dt > 0.0 {
            g + (g - prev_g) * (step / prev_dt)
        } else {
            g * (at(t) / s_next)
        };
        let accepted =
            newton(|x| product_poly(betas, s_next, x), predicted, 12).filter(|(cand, iters)| {
                let jump = (cand - predicted).norm();
                *iters <= 10 && jump <= 0.1 * g.norm().max(cand.norm())
            });
        match accepted {
            Some((cand, iters)) => {
                prev_g = g;
                g = cand;
                prev_dt = step;
                t = t_next;
                steps += 1;
                if iters <= 4 {
                    dt = (dt * 1.5).min(0.25);
                }
            }
            None => {
                dt *= 0.5;
                prev_dt = 0.0;
                prev_g = g;
                if dt < 1e-9 {
                    return Err(Error::NoConvergence {
                        op: "product_stieltjes",
                        detail: format!("continuation stalled at t = {t:.6} towards s = {s} after {steps} steps"),
                    });
                }
            }
        }
    }

    if s.im == 0.0 {
        g.im = 0.0;
        // polish on the real line
        if let Some((polished, _)) = newton(|x| product_poly(betas, s, x), g, 5) {
            g = Complex64::new(polished.re, 0.0);
        }
    }
    let residual = product_residual(ratios, s, g);
    if residual > RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            op: "product_stieltjes",
            detail: format!("residual {residual:e} at s = {s}"),
        });
    }
    let physical = if s.im == 0.0 {
        g.re > 0.0 && g.re <= 1.0 / s.re * (1.0 + 1e-12)
    } else {
        g.im * s.im <= 1e-12 * g.norm()
    };
    if !physical {
        return Err(Error::NoConvergence {
            op: "product_stieltjes",
            detail: format!("continuation ended on a non-physical root G = {g} at s = {s}"),
        });
    }
    Ok(StieltjesSolution {
        s,
        g,
        residual,
        branch_id: 0,
    })
}

/// `(1/π)·Im G(−x − iε)`. A negative imaginary part signals a wrong branch;
/// the evaluation is retried further from the real axis before giving up.
pub fn density_from_stieltjes<F>(solver: F, x: f64, eps: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "density evaluation point must be > 0, got {x}"
        )));
    }
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Domain(format!(
            "inversion offset must lie in (0, 1e-2], got {eps}"
        )));
    }
    let mut offset = eps;
    for _ in 0..4 {
        let g = solver(Complex64::new(-x, -offset))?;
        if g.im >= -1e-12 * g.norm().max(1.0) {
            return Ok(g.im.max(0.0) / PI);
        }
        offset *= 4.0;
    }
    Err(Error::NoConvergence {
        op: "density_from_stieltjes",
        detail: format!("solver stays on a branch with Im G < 0 at x = {x}"),
    })
}

/// Richardson-extrapolated inversion over `ε ∈ {1e-3, 5e-4, 2.5e-4}`,
/// assuming an `O(ε)` bias.
pub fn density_from_stieltjes_extrapolated<F>(solver: F, x: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let d1 = density_from_stieltjes(&solver, x, 1e-3)?;
    let d2 = density_from_stieltjes(&solver, x, 5e-4)?;
    let d3 = density_from_stieltjes(&solver, x, 2.5e-4)?;
    let r12 = 2.0 * d2 - d1;
    let r23 = 2.0 * d3 - d2;
    Ok(((4.0 * r23 - r12) / 3.0).max(0.0))
}

/// `G_C(s) = (1/snr)·G_MP^{(β_s)}(s/snr)`, the limit of `C` when relays
/// grow faster than the number of hops.
pub fn limiting_capacity_stieltjes(beta_s: f64, snr: f64, s: Complex64) -> Result<Complex64> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::Domain(format!(
            "snr must be finite and > 0, got {snr}"
        )));
    }
    Ok(mp_stieltjes(beta_s, s / snr)? / snr)
}

/// `1/s`: all eigenvalues at zero, the limit when hops outgrow relays.
pub fn vanishing_regime_stieltjes(s: Complex64) -> Result<Complex64> {
    delta_stieltjes(0.0, s)
}

/// `G·(e^{d(sG−1)}·(β_s⁻¹·s·G + 1 − β_s⁻¹) + s) − 1`.
pub fn theta_residual(beta_s: f64, d: f64, s: f64, g: f64) -> f64 {
    let c = 1.0 / beta_s;
    g * ((d * (s * g - 1.0)).exp() * (c * s * g + 1.0 - c) + s) - 1.0
}

fn theta_derivative(beta_s: f64, d: f64, s: f64, g: f64) -> f64 {
    let c = 1.0 / beta_s;
    let e = (d * (s * g - 1.0)).exp();
    let inner = e * (c * s * g + 1.0 - c) + s;
    let dinner = e * d * s * (c * s * g + 1.0 - c) + e * c * s;
    inner + g * dinner
}

const THETA_SCAN: usize = 4000;

/// All roots of the Θ-regime equation in `(0, 1/s)`, ascending.
fn theta_roots(beta_s: f64, d: f64, s: f64) -> Vec<f64> {
    let upper = 1.0 / s;
    let h = |g: f64| theta_residual(beta_s, d, s, g);
    let mut roots = Vec::new();
    let mut lo = 0.0;
    let mut f_lo = h(lo);
    for i in 1..=THETA_SCAN {
        let hi = upper * i as f64 / THETA_SCAN as f64;
        let f_hi = h(hi);
        if f_lo == 0.0 && lo > 0.0 {
            roots.push(lo);
        } else if f_lo * f_hi < 0.0 {
            roots.push(safeguarded_newton(beta_s, d, s, lo, hi));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots
}

/// Newton on a sign-changing bracket, falling back to bisection whenever a
/// step leaves the bracket or fails to shrink the residual.
fn safeguarded_newton(beta_s: f64, d: f64, s: f64, mut lo: f64, mut hi: f64) -> f64 {
    let h = |g: f64| theta_residual(beta_s, d, s, g);
    let f_lo_sign = h(lo).signum();
    let mut g = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = h(g);
        if v == 0.0 {
            return g;
        }
        if v.signum() == f_lo_sign {
            lo = g;
        } else {
            hi = g;
        }
        let dv = theta_derivative(beta_s, d, s, g);
        let newton = g - v / dv;
        let next = if dv != 0.0 && newton > lo && newton < hi && (h(newton).abs() < v.abs()) {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - g).abs() <= 1e-16 * g.abs().max(1e-300) || hi - lo <= 1e-17 {
            return next;
        }
        g = next;
    }
    g
}

/// Solves the Θ-regime equation for real `s > 0` on `(0, 1/s)`. When several
/// roots exist, the one continued from `d → 0⁺` (where the equation becomes
/// the Marčenko–Pastur quadratic) is returned.
pub fn theta_regime_stieltjes(beta_s: f64, d: f64, s: f64) -> Result<StieltjesSolution> {
    if !(beta_s > 0.0) || !(d > 0.0) || !(s > 0.0) {
        return Err(Error::Domain(format!(
            "theta regime needs beta_s, d, s > 0 (got {beta_s}, {d}, {s})"
        )));
    }
    let roots = theta_roots(beta_s, d, s);
    let (g, branch_id) = match roots.len() {
        0 => {
            return Err(Error::NoConvergence {
                op: "theta_regime_stieltjes",
                detail: format!("no sign change on (0, 1/s) for d = {d}, s = {s}"),
            })
        }
        1 => (roots[0], 0),
        _ => {
            let mut tracked = mp_stieltjes(beta_s, Complex64::new(s, 0.0))?.re;
            let steps = 80;
            let d0 = (d * 1e-6).min(1e-6);
            for i in 0..=steps {
                let di = d0 * (d / d0).powf(i as f64 / steps as f64);
                let here = theta_roots(beta_s, di, s);
                if let Some(&closest) = here
                    .iter()
                    .min_by(|a, b| (*a - tracked).abs().total_cmp(&(*b - tracked).abs()))
                {
                    tracked = closest;
                }
            }
            let idx = roots
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - tracked).abs().total_cmp(&(b.1 - tracked).abs()))
                .map(|(i, _)| i)
                .expect("non-empty");
            (roots[idx], idx)
        }
    };
    let residual = theta_residual(beta_s, d, s, g).abs();
    if residual > RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            op: "theta_regime_stieltjes",
            detail: format!("residual {residual:e}"),
        });
    }
    Ok(StieltjesSolution {
        s: Complex64::new(s, 0.0),
        g: Complex64::new(g, 0.0),
        residual,
        branch_id,
    })
}

/// `C∞ = Υ_MP^{(β_s)}(snr)/(l + 1)` in nats per receive antenna; `l = 0`
/// is the point-to-point reference.
pub fn asymptotic_capacity(beta_s: f64, snr: f64, l: usize) -> Result<f64> {
    if !(snr >= 0.0) || !snr.is_finite() {
        return Err(Error::Domain(format!(
            "snr must be finite and >= 0, got {snr}"
        )));
    }
    if snr == 0.0 {
        return Ok(0.0);
    }
    Ok(MarchenkoPastur::new(beta_s)?.shannon_transform(snr) / (l as f64 + 1.0))
}
