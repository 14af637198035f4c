//! Output-symbol degree distributions.
//!
//! A distribution is stored densely as `p_1..p_D` with degree `d` at index
//! `d - 1`; its generating polynomial is `P(x) = sum_d p_d x^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass tolerance used when validating and renormalizing distributions.
pub const MASS_TOLERANCE: f64 = 1e-9;

const RESCALE_THRESHOLD: f64 = 1e-12;

/// Probability mass function over output-symbol degrees `1..=max_degree`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeDistribution {
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// Validates `probs` (degree `d` at index `d - 1`) and rescales it to unit
    /// mass. Values within [`MASS_TOLERANCE`] below zero are clamped to zero.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < -MASS_TOLERANCE {
                return Err(Error::NegativeMass { degree: i + 1, mass: p });
            }
        }
        let mut probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        // Summation noise is left alone so decimal inputs round-trip unchanged.
        if (sum - 1.0).abs() > RESCALE_THRESHOLD {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { probs })
    }

    /// The distribution that emits only degree-1 symbols, `P(x) = x`.
    pub fn degree_one() -> Self {
        Self { probs: vec![1.0] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_degree(&self) -> usize {
        self.probs.len()
    }

    /// `p_d`, zero for degrees outside `1..=max_degree`.
    pub fn prob(&self, degree: usize) -> f64 {
        if degree == 0 {
            return 0.0;
        }
        self.probs.get(degree - 1).copied().unwrap_or(0.0)
    }

    /// Fraction of degree-1 symbols, `p_1 = P'(0)`.
    pub fn p1(&self) -> f64 {
        self.probs[0]
    }

    /// Mean degree, `P'(1)`.
    pub fn mean_degree(&self) -> f64 {
        self.derivative(1.0)
    }

    /// `P'(x)` without domain checks (Horner form).
    pub(crate) fn derivative(&self, x: f64) -> f64 {
        let d = self.probs.len();
        let mut acc = 0.0;
        for k in (0..d).rev() {
            acc = acc * x + (k + 1) as f64 * self.probs[k];
        }
        acc
    }

    /// `P'(x) = sum_d d p_d x^(d-1)` for `x` in `[0, 1]`.
    pub fn derivative_at(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("P'(x) requires x in [0, 1], got {x}")));
        }
        Ok(self.derivative(x))
    }

    /// Returns a copy padded with zero mass up to `max_degree`.
    pub fn padded(&self, max_degree: usize) -> Self {
        let mut probs = self.probs.clone();
        if probs.len() < max_degree {
            probs.resize(max_degree, 0.0);
        }
        Self { probs }
    }
}

impl<'de> Deserialize<'de> for DegreeDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            probs: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        DegreeDistribution::new(raw.probs).map_err(serde::de::Error::custom)
    }
}

/// Validating constructor; see [`DegreeDistribution::new`].
pub fn make_distribution(probs: &[f64]) -> Result<DegreeDistribution> {
    DegreeDistribution::new(probs.to_vec())
}

/// Ideal soliton: `rho(1) = 1/k`, `rho(d) = 1/(d(d-1))` for `2 <= d <= k`.
pub fn ideal_soliton(k: usize) -> Result<DegreeDistribution> {
    if k == 0 {
        return Err(Error::Parameter("ideal soliton requires k >= 1".into()));
    }
    DegreeDistribution::new(ideal_soliton_mass(k))
}

fn ideal_soliton_mass(k: usize) -> Vec<f64> {
    (1..=k).map(|d| if d == 1 { 1.0 / k as f64 } else { 1.0 / (d as f64 * (d as f64 - 1.0)) }).collect()
}

/// Robust soliton together with its normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustSoliton {
    pub distribution: DegreeDistribution,
    /// `beta = sum_d (rho(d) + tau(d))`.
    pub beta: f64,
    /// `R = c ln(k/delta) sqrt(k)`.
    pub ripple_target: f64,
    /// Position of the `tau` spike, `ceil(k/R)` clamped to `k`.
    pub spike: usize,
    /// Total `tau` mass before normalization.
    pub tau_mass: f64,
}

/// Luby's robust soliton distribution with parameters `c` and `delta`.
pub fn robust_soliton(k: usize, c: f64, delta: f64) -> Result<RobustSoliton> {
    if k < 2 {
        return Err(Error::Parameter("robust soliton requires k >= 2".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("robust soliton requires c > 0, got {c}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("robust soliton requires delta in (0, 1), got {delta}")));
    }
    let kf = k as f64;
    let r = c * (kf / delta).ln() * kf.sqrt();
    let spike_real = (kf / r).ceil();
    if spike_real.is_nan() || spike_real < 1.0 {
        return Err(Error::Parameter(format!("spike position ceil(k/R) = {spike_real} < 1")));
    }
    let spike = (spike_real as usize).min(k);

    let mut mass = ideal_soliton_mass(k);
    let mut tau_mass = 0.0;
    for d in 1..spike {
        let tau = r / (d as f64 * kf);
        mass[d - 1] += tau;
        tau_mass += tau;
    }
    // ln(R/delta) is negative only for tiny R; such a spike carries no mass.
    let spike_tau = (r * (r / delta).ln() / kf).max(0.0);
    mass[spike - 1] += spike_tau;
    tau_mass += spike_tau;

    let beta: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|p| *p /= beta);
    Ok(RobustSoliton { distribution: DegreeDistribution::new(mass)?, beta, ripple_target: r, spike, tau_mass })
}

/// How the maximum useful degree is derived from the largest demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeCapPolicy {
    /// `ceil(1 / (1 - z_max))`.
    #[default]
    Ceil,
    /// `ceil(1 / (1 - z_max)) - 1`, floored at 1.
    CeilMinusOne,
}

/// Default degree cap, `ceil(1 / (1 - z_max))`.
pub fn degree_cap(z_max: f64) -> Result<usize> {
    degree_cap_with(z_max, DegreeCapPolicy::Ceil)
}

pub fn degree_cap_with(z_max: f64, policy: DegreeCapPolicy) -> Result<usize> {
    if !(0.0..1.0).contains(&z_max) {
        return Err(Error::Domain(format!("degree cap requires z_max in [0, 1), got {z_max}")));
    }
    // 1/(1 - 0.98) evaluates to 50.00000000000004; absorb that rounding.
    let ratio = 1.0 / (1.0 - z_max);
    let ceil = (ratio - 1e-9).ceil().max(1.0) as usize;
    Ok(match policy {
        DegreeCapPolicy::Ceil => ceil,
        DegreeCapPolicy::CeilMinusOne => (ceil - 1).max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mixed_reference() -> DegreeDistribution {
        make_distribution(&[0.4878, 0.0, 0.0, 0.4878, 0.0244]).unwrap()
    }

    #[test]
    fn make_distribution_examples() {
        let d = make_distribution(&[1.0]).unwrap();
        assert_eq!(d.probs(), &[1.0]);
        let f = mixed_reference();
        assert_eq!(f.max_degree(), 5);
        assert!(matches!(make_distribution(&[0.5, 0.4]), Err(Error::NotNormalized { .. })));
        assert!(matches!(make_distribution(&[1.1, -0.1]), Err(Error::NegativeMass { degree: 2, .. })));
        assert!(matches!(make_distribution(&[]), Err(Error::EmptyDistribution)));
    }

    #[test]
    fn near_normalized_input_is_rescaled() {
        let d = make_distribution(&[0.5, 0.5 + 5e-10, -5e-10]).unwrap();
        assert_eq!(d.probs()[2], 0.0);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let one = DegreeDistribution::degree_one();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(one.derivative_at(x).unwrap(), 1.0);
        }
        let f = mixed_reference();
        assert_eq!(f.derivative_at(0.0).unwrap(), f.probs()[0]);
        let expected = 0.4878 + 4.0 * 0.4878 + 5.0 * 0.0244;
        assert!((f.derivative_at(1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.5610).abs() < 1e-12);
        assert!(f.derivative_at(1.5).is_err());
        assert!(f.derivative_at(-0.1).is_err());
    }

    #[test]
    fn ideal_soliton_examples() {
        assert_eq!(ideal_soliton(1).unwrap().probs(), &[1.0]);
        let s3 = ideal_soliton(3).unwrap();
        for (got, want) in s3.probs().iter().zip([1.0 / 3.0, 0.5, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((ideal_soliton(100).unwrap().prob(2) - 0.5).abs() < 1e-15);
        assert!(ideal_soliton(0).is_err());
    }

    #[test]
    fn ideal_soliton_sums_to_one() {
        for k in (1..=10_000).step_by(37).chain([10_000]) {
            let raw: f64 = ideal_soliton_mass(k).iter().sum();
            assert!((raw - 1.0).abs() < 1e-12, "k={k} raw sum {raw}");
            let s: f64 = ideal_soliton(k).unwrap().probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn robust_soliton_examples() {
        let rs = robust_soliton(800, 0.1, 0.5).unwrap();
        let sum: f64 = rs.distribution.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(rs.distribution.p1() > ideal_soliton(800).unwrap().p1());
        assert!(rs.beta > 1.0);

        // R >= k puts the whole spike at degree 1.
        let big = robust_soliton(10, 5.0, 0.01).unwrap();
        assert!(big.ripple_target >= 10.0);
        assert_eq!(big.spike, 1);
        let rho1 = 1.0 / 10.0;
        let tau1 = big.ripple_target * (big.ripple_target / 0.01).ln() / 10.0;
        assert!((big.distribution.p1() - (rho1 + tau1) / big.beta).abs() < 1e-12);

        assert!(robust_soliton(1, 0.1, 0.5).is_err());
        assert!(robust_soliton(100, 0.0, 0.5).is_err());
        assert!(robust_soliton(100, 0.1, 1.0).is_err());
    }

    #[test]
    fn robust_soliton_tau_mass_shrinks_toward_ideal() {
        let k = 500;
        let mut last = f64::INFINITY;
        for (c, delta) in [(0.3, 0.05), (0.2, 0.1), (0.1, 0.3), (0.05, 0.6), (0.02, 0.9), (0.005, 0.99)] {
            let rs = robust_soliton(k, c, delta).unwrap();
            assert!(rs.tau_mass < last, "tau mass {} not below {}", rs.tau_mass, last);
            last = rs.tau_mass;
        }
        let ideal = ideal_soliton(k).unwrap();
        let rs = robust_soliton(k, 0.005, 0.99).unwrap();
        let dist: f64 = ideal.probs().iter().zip(rs.distribution.probs()).map(|(a, b)| (a - b).abs()).sum();
        assert!(dist < 0.1, "L1 distance {dist}");
    }

    #[test]
    fn degree_cap_examples() {
        assert_eq!(degree_cap(0.5).unwrap(), 2);
        assert_eq!(degree_cap_with(0.5, DegreeCapPolicy::CeilMinusOne).unwrap(), 1);
        assert_eq!(degree_cap(0.98).unwrap(), 50);
        assert_eq!(degree_cap(0.8).unwrap(), 5);
        assert_eq!(degree_cap_with(0.8, DegreeCapPolicy::CeilMinusOne).unwrap(), 4);
        assert_eq!(degree_cap(0.0).unwrap(), 1);
        assert_eq!(degree_cap(0.99).unwrap(), 100);
        assert!(degree_cap(1.0).is_err());
        assert!(degree_cap(-0.1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = mixed_reference();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"probs":[0.4878,0.0,0.0,0.4878,0.0244]}"#);
        let back: DegreeDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<DegreeDistribution>(r#"{"probs":[0.5,0.4]}"#).is_err());
        assert!(serde_json::from_str::<DegreeDistribution>(r#"{"probs":[1.0],"x":1}"#).is_err());
    }

    fn arb_distribution() -> impl Strategy<Value = DegreeDistribution> {
        prop::collection::vec(0.0f64..1.0, 1..30).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| DegreeDistribution::new(w.iter().map(|v| v / s).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn derivative_is_nondecreasing(d in arb_distribution(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(d.derivative_at(lo).unwrap() <= d.derivative_at(hi).unwrap() + 1e-12);
            prop_assert_eq!(d.derivative_at(0.0).unwrap(), d.probs()[0]);
        }

        #[test]
        fn twelve_digit_decimals_round_trip(digits in prop::collection::vec(0u64..1_000_000_000_000, 1..8)) {
            let total: u64 = digits.iter().sum();
            prop_assume!(total > 0);
            // Scale to exact 12-significant-digit decimals that sum to one within tolerance.
            let probs: Vec<f64> = digits.iter().map(|&v| format!("{:.12e}", v as f64 / total as f64).parse().unwrap()).collect();
            if let Ok(d) = DegreeDistribution::new(probs) {
                let text = serde_json::to_string(&d).unwrap();
                let back: DegreeDistribution = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(back, d);
            }
        }
    }
}
