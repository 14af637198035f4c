//! Asymptotic recovery analysis: expected ripple, recovery feasibility and
//! the latencies they imply for decoding and degree-1-only sinks.

use crate::distributions::DegreeDistribution;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 1001;

/// Relative slack allowed when checking a recovery constraint, so that a
/// latency computed from the constraint itself passes it.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// `-ln(1 - x)`, accurate near zero.
pub fn neg_log_complement(x: f64) -> f64 {
    -(-x).ln_1p()
}

/// `n` uniformly spaced points covering `[0, z]` inclusive.
pub fn uniform_grid(z: f64, n: usize) -> impl Iterator<Item = f64> {
    let last = n.saturating_sub(1).max(1) as f64;
    (0..n).map(move |j| if j + 1 == n { z } else { z * (j as f64 / last) })
}

/// Recovery target for one sink under a given stream.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryQuery<'a> {
    pub dist: &'a DegreeDistribution,
    pub epsilon: f64,
    pub z: f64,
    pub grid_points: usize,
}

impl<'a> RecoveryQuery<'a> {
    pub fn new(dist: &'a DegreeDistribution, epsilon: f64, z: f64, grid_points: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("erasure rate must lie in [0, 1), got {epsilon}")));
        }
        if !(0.0..1.0).contains(&z) {
            return Err(Error::Domain(format!("target fraction must lie in [0, 1), got {z}")));
        }
        if grid_points < 2 {
            return Err(Error::Domain(format!("need at least 2 grid points, got {grid_points}")));
        }
        Ok(Self { dist, epsilon, z, grid_points })
    }

    fn grid(&self) -> impl Iterator<Item = f64> {
        uniform_grid(self.z, self.grid_points)
    }
}

/// Normalized expected ripple `r(u) = u (w P'(1-u) + ln u)` after `w k`
/// symbols, with `u k` inputs still unrecovered.
pub fn expected_ripple(dist: &DegreeDistribution, w: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("unrecovered fraction must lie in (0, 1], got {u}")));
    }
    if w.is_nan() || w < 0.0 {
        return Err(Error::Domain(format!("collected ratio must be nonnegative, got {w}")));
    }
    Ok(u * (w * dist.derivative(1.0 - u) + u.ln()))
}

/// Whether a decoding sink reaches `q.z` after `w k` transmissions:
/// `(1 - eps) w P'(x) + ln(1 - x) >= 0` at every grid point of `[0, z]`.
pub fn recovery_feasible(q: &RecoveryQuery<'_>, w: f64) -> bool {
    let scale = (1.0 - q.epsilon) * w;
    q.grid().all(|x| {
        let need = neg_log_complement(x);
        scale * q.dist.derivative(x) - need >= -FEASIBILITY_SLACK * need
    })
}

/// Smallest normalized transmission count letting a decoding sink recover
/// `q.z`: the grid maximum of `-ln(1 - x) / ((1 - eps) P'(x))`.
///
/// Returns `+inf` when `P'` vanishes at a positive grid point. The `x = 0`
/// row is `0 >= 0` and never binds.
pub fn latency_decoding(q: &RecoveryQuery<'_>) -> f64 {
    let scale = 1.0 - q.epsilon;
    let mut worst = 0.0f64;
    for x in q.grid().skip(1) {
        let slope = scale * q.dist.derivative(x);
        if slope <= 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(neg_log_complement(x) / slope);
    }
    worst
}

/// Transmission count for a sink keeping only degree-1 symbols:
/// `-ln(1 - z) / ((1 - eps) p_1)`.
pub fn latency_nondecoding(q: &RecoveryQuery<'_>) -> f64 {
    if q.z == 0.0 {
        return 0.0;
    }
    let p1 = q.dist.p1();
    if p1 <= 0.0 {
        return f64::INFINITY;
    }
    neg_log_complement(q.z) / ((1.0 - q.epsilon) * p1)
}

/// Dispatches to [`latency_decoding`] or [`latency_nondecoding`].
pub fn latency(q: &RecoveryQuery<'_>, decoding: bool) -> f64 {
    if decoding {
        latency_decoding(q)
    } else {
        latency_nondecoding(q)
    }
}

/// Largest target `z` on the grid `j / grid_points` whose latency does not
/// exceed `t`. Nondecreasing in `t`.
pub fn achievable_fraction(
    dist: &DegreeDistribution,
    epsilon: f64,
    t: f64,
    decoding: bool,
    grid_points: usize,
) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("transmission count must be nonnegative, got {t}")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("erasure rate must lie in [0, 1), got {epsilon}")));
    }
    if grid_points < 2 {
        return Err(Error::Domain(format!("need at least 2 grid points, got {grid_points}")));
    }
    let step = 1.0 / grid_points as f64;
    let scale = 1.0 - epsilon;
    let mut best = 0.0;
    let mut worst = 0.0f64;
    for j in 1..grid_points {
        let z = j as f64 * step;
        let need = if decoding {
            let slope = scale * dist.derivative(z);
            if slope <= 0.0 {
                break;
            }
            worst = worst.max(neg_log_complement(z) / slope);
            worst
        } else {
            let slope = scale * dist.p1();
            if slope <= 0.0 {
                break;
            }
            neg_log_complement(z) / slope
        };
        if need > t {
            break;
        }
        best = z;
    }
    Ok(best)
}

/// Expected number of uniform draws from `k` urns until `s` distinct urns
/// are hit: `k (1/k + 1/(k-1) + ... + 1/(k-s+1))`.
pub fn coupon_expected_draws(k: usize, s: usize) -> Result<f64> {
    if k == 0 || s == 0 || s > k {
        return Err(Error::Domain(format!("coupon collection needs 1 <= s <= k, got s={s}, k={k}")));
    }
    let kf = k as f64;
    Ok((0..s).rev().map(|i| kf / (k - i) as f64).sum())
}
