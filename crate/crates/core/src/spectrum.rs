//! Empirical eigenvalue distributions and the statistics computed on them.

use crate::error::{Error, Result};
use crate::quad;

/// Number of uniform grid points added to the KS evaluation set.
pub const KS_GRID_POINTS: usize = 512;

/// Sorted sample of nonnegative eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("eigenvalue sample contains {bad}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `#{λ < x}/n`.
    pub fn ecdf_eval(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.partition_point(|&v| v < x) as f64 / self.values.len() as f64
    }

    /// `#{λ ≤ x}/n`, the right limit of the ECDF at `x`.
    fn ecdf_right(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Fraction of the sample strictly below `x`; alias kept for readability
    /// at call sites that talk about mass rather than CDFs.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.ecdf_eval(x)
    }
}

/// `(1/n)·#{λ < x}`.
pub fn ecdf_eval(ed: &EmpiricalDistribution, x: f64) -> f64 {
    ed.ecdf_eval(x)
}

/// Kolmogorov–Smirnov distance between an EED and a reference CDF.
///
/// The supremum is taken over every sample point (comparing left and right
/// limits on both sides) and a uniform grid on `[0, 1.1·max]`.
pub fn ks_distance<F: Fn(f64) -> f64>(ed: &EmpiricalDistribution, ref_cdf: F) -> f64 {
    let mut sup = 0.0f64;
    let mut probe = |x: f64| {
        let step = 1e-12 * x.abs().max(1.0);
        let left = (ed.ecdf_eval(x) - ref_cdf(x - step)).abs();
        let right = (ed.ecdf_right(x) - ref_cdf(x + step)).abs();
        sup = sup.max(left).max(right);
    };
    let mut last = f64::NAN;
    for &v in ed.values() {
        if v != last {
            probe(v);
            last = v;
        }
    }
    let top = ed.max() * 1.1;
    for i in 0..KS_GRID_POINTS {
        probe(top * i as f64 / (KS_GRID_POINTS - 1) as f64);
    }
    sup.min(1.0)
}

/// Exact two-sample KS distance (supremum over the pooled jump points).
pub fn ks_distance_empirical(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut sup = 0.0f64;
    for &x in a.values().iter().chain(b.values()) {
        sup = sup
            .max((a.ecdf_eval(x) - b.ecdf_eval(x)).abs())
            .max((a.ecdf_right(x) - b.ecdf_right(x)).abs());
    }
    sup
}

/// `(1/(L+1))·Σ log(1 + λ_i)` in nats; `l = 0` is the direct link.
pub fn capacity_from_eigs(eigs: &[f64], l: usize) -> Result<f64> {
    if let Some(bad) = eigs.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Contract(format!(
            "capacity of a spectrum containing {bad}"
        )));
    }
    Ok(eigs.iter().map(|x| x.ln_1p()).sum::<f64>() / (l as f64 + 1.0))
}

/// `Υ(ρ) = ∫ log(1 + ρx) dF(x)`.
pub trait ShannonTransform {
    fn shannon_transform(&self, rho: f64) -> f64;
}

impl ShannonTransform for EmpiricalDistribution {
    fn shannon_transform(&self, rho: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|x| (rho * x).ln_1p()).sum::<f64>() / self.values.len() as f64
    }
}

/// A measure given by point masses plus a density on a finite interval.
pub struct AnalyticMeasure<F: Fn(f64) -> f64> {
    /// `(location, mass)` pairs.
    pub atoms: Vec<(f64, f64)>,
    pub density: F,
    pub support: (f64, f64),
}

impl<F: Fn(f64) -> f64> AnalyticMeasure<F> {
    pub fn new(atoms: Vec<(f64, f64)>, density: F, support: (f64, f64)) -> Self {
        Self {
            atoms,
            density,
            support,
        }
    }
}

impl AnalyticMeasure<fn(f64) -> f64> {
    pub fn point_mass(x0: f64) -> Self {
        fn zero(_: f64) -> f64 {
            0.0
        }
        Self {
            atoms: vec![(x0, 1.0)],
            density: zero,
            support: (x0, x0),
        }
    }
}

impl<F: Fn(f64) -> f64> ShannonTransform for AnalyticMeasure<F> {
    fn shannon_transform(&self, rho: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|&(x, m)| m * (rho * x).ln_1p()).sum();
        let (a, b) = self.support;
        let cont = if b > a {
            quad::integrate(|x| (rho * x).ln_1p() * (self.density)(x), a, b, 1e-10)
        } else {
            0.0
        };
        atoms + cont
    }
}

pub fn shannon_transform<T: ShannonTransform + ?Sized>(measure: &T, rho: f64) -> f64 {
    measure.shannon_transform(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ed(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    fn step_at_one(x: f64) -> f64 {
        if x >= 1.0 {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn ecdf_examples() {
        let e = ed(&[3.0, 1.0, 2.0]);
        assert!((ecdf_eval(&e, 2.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ecdf_eval(&e, 1.0), 0.0);
        assert_eq!(ecdf_eval(&e, 0.5), 0.0);
        assert_eq!(ecdf_eval(&e, 3.0001), 1.0);
        assert!(EmpiricalDistribution::new(vec![-1.0]).is_err());
        assert!(EmpiricalDistribution::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&ed(&[1.0]), step_at_one), 0.0);
        assert_eq!(ks_distance(&ed(&[1.0, 1.0, 1.0]), step_at_one), 0.0);
        assert_eq!(ks_distance(&ed(&[0.0; 4]), step_at_one), 1.0);
        // uniform CDF on [0, 1]
        let u = |x: f64| x.clamp(0.0, 1.0);
        let e = ed(&[0.25, 0.75]);
        assert!((ks_distance(&e, u) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_from_eigs(&[0.0, 0.0], 3).unwrap(), 0.0);
        let v = capacity_from_eigs(&[std::f64::consts::E - 1.0], 1).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!(capacity_from_eigs(&[1.0, -0.1], 1).is_err());
    }

    #[test]
    fn shannon_examples() {
        let e = ed(&[0.5, 2.0]);
        assert_eq!(e.shannon_transform(0.0), 0.0);
        let delta = AnalyticMeasure::point_mass(1.0);
        assert!((shannon_transform(&delta, std::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
        // uniform density on [0, 1]: ∫ log(1 + x) dx = 2 ln 2 − 1
        let uni = AnalyticMeasure::new(vec![(0.0, 0.0)], |_| 1.0, (0.0, 1.0));
        assert!((uni.shannon_transform(1.0) - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-10);
    }

    fn sample() -> impl Strategy<Value = EmpiricalDistribution> {
        prop::collection::vec(0.0f64..10.0, 1..40)
            .prop_map(|v| EmpiricalDistribution::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn ks_two_sample_symmetric_and_triangle(a in sample(), b in sample(), c in sample()) {
            let ab = ks_distance_empirical(&a, &b);
            let ba = ks_distance_empirical(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-15);
            let ac = ks_distance_empirical(&a, &c);
            let cb = ks_distance_empirical(&c, &b);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn ks_against_ecdf_matches_two_sample(a in sample(), b in sample()) {
            let via_ref = ks_distance(&a, |x| b.ecdf_eval(x));
            let exact = ks_distance_empirical(&a, &b);
            // The one-sided evaluation set only contains a's jumps and a grid,
            // so it can only under-estimate the exact supremum.
            prop_assert!(via_ref <= exact + 1e-12);
        }

        #[test]
        fn capacity_monotone(eigs in prop::collection::vec(0.0f64..50.0, 1..10), idx in 0usize..10, bump in 0.0f64..5.0, l in 0usize..6) {
            let base = capacity_from_eigs(&eigs, l).unwrap();
            let mut up = eigs.clone();
            let i = idx % up.len();
            up[i] += bump;
            prop_assert!(capacity_from_eigs(&up, l).unwrap() >= base);
            prop_assert!(capacity_from_eigs(&eigs, l + 1).unwrap() <= base);
        }

        #[test]
        fn shannon_concave_increasing(e in sample()) {
            let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
            let vals: Vec<f64> = grid.iter().map(|&r| e.shannon_transform(r)).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
            for w in vals.windows(3) {
                prop_assert!(w[0] + w[2] <= 2.0 * w[1] + 1e-12);
            }
        }
    }
}
