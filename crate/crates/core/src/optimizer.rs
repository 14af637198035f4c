//! Degree-distribution design problems.
//!
//! Each problem bounds per-cluster latencies `t_i` through the recovery
//! constraints and minimizes a fairness or average objective. With the
//! substitution `a_d = s * d * p_d`, where `s` is the objective scalar, the
//! bilinear constraints `s * k_i * P'(x) >= -ln(1 - x)` become linear in
//! `a`, and `s = sum_d a_d / d` is the linear objective.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{latency, neg_log_complement, uniform_grid, RecoveryQuery};
use crate::distributions::DegreeDistribution;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::scenario::{ClusterSpec, Scenario};

/// Solved `a_d` below this are treated as zero.
const MASS_FLOOR: f64 = 1e-9;

pub const DEFAULT_P1_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MinmaxLatency,
    MaxminUtilization,
    MaxminThroughput,
    MinAvgLatency,
}

impl Objective {
    pub const ALL: [Objective; 4] =
        [Objective::MinmaxLatency, Objective::MaxminUtilization, Objective::MaxminThroughput, Objective::MinAvgLatency];

    pub fn name(self) -> &'static str {
        match self {
            Objective::MinmaxLatency => "minmax-latency",
            Objective::MaxminUtilization => "maxmin-utilization",
            Objective::MaxminThroughput => "maxmin-throughput",
            Objective::MinAvgLatency => "min-avg-latency",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown objective {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub objective: Objective,
    /// `t_0`, `v_0`, `w_0` or the average latency, depending on `objective`.
    pub objective_value: f64,
    pub distribution: DegreeDistribution,
    /// Latency of each cluster under `distribution`, re-evaluated on the
    /// scenario grid.
    #[serde(with = "crate::ext_real::vec")]
    pub per_cluster_latency: Vec<f64>,
    pub auxiliary: BTreeMap<String, f64>,
}

impl OptimizationResult {
    /// The figure a user reads off: latency for the latency objectives,
    /// utilization `1/v_0` or throughput `1/w_0` for the max-min ones.
    pub fn headline(&self) -> f64 {
        match self.objective {
            Objective::MinmaxLatency | Objective::MinAvgLatency => self.objective_value,
            Objective::MaxminUtilization | Objective::MaxminThroughput => 1.0 / self.objective_value,
        }
    }
}

/// Latency of cluster `c` under a stream with distribution `dist`.
pub fn evaluate_cross(dist: &DegreeDistribution, c: &ClusterSpec, grid_points: usize) -> Result<f64> {
    let q = RecoveryQuery::new(dist, c.epsilon, c.z, grid_points)?;
    Ok(latency(&q, c.decoding))
}

fn cluster_latencies(s: &Scenario, dist: &DegreeDistribution) -> Vec<f64> {
    s.clusters()
        .iter()
        .map(|c| evaluate_cross(dist, c, s.grid_points).expect("scenario clusters are validated"))
        .collect()
}

/// Builds `min sum_d a_d/d` subject to `k_i * sum_d a_d x^(d-1) >= -ln(1-x)`
/// on each decoding cluster's grid and `k_i * a_1 >= -ln(1-z_i)` for
/// degree-1-only clusters, where `k_i = scale(cluster)`.
fn scaled_program(s: &Scenario, active: &[ClusterSpec], scale: impl Fn(&ClusterSpec) -> f64) -> LinearProgram {
    let cap = s.degree_cap();
    let objective: Vec<f64> = (1..=cap).map(|d| 1.0 / d as f64).collect();
    let mut program = LinearProgram::new(objective).expect("cap >= 1");
    for c in active {
        let k = scale(c);
        if c.decoding {
            // x = 0 gives 0 >= 0.
            for x in uniform_grid(c.z, s.grid_points).skip(1) {
                let mut row = Vec::with_capacity(cap);
                let mut power = k;
                for _ in 0..cap {
                    row.push(power);
                    power *= x;
                }
                program.add_constraint(row, Relation::Ge, neg_log_complement(x)).expect("finite row");
            }
        } else {
            let mut row = vec![0.0; cap];
            row[0] = k;
            program.add_constraint(row, Relation::Ge, neg_log_complement(c.z)).expect("finite row");
        }
    }
    program
}

/// Solves `program` and maps `a_d` back to `(sum_d a_d/d, p_d)`.
fn recover_distribution(program: &LinearProgram) -> Result<(f64, DegreeDistribution)> {
    let sol = lp::solve(program)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::InfeasibleScenario(format!("design program returned {:?}", sol.status)));
    }
    let a: Vec<f64> = sol.values.iter().map(|&v| if v < MASS_FLOOR { 0.0 } else { v }).collect();
    let scalar: f64 = a.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).sum();
    if scalar.is_nan() || scalar <= 0.0 {
        return Err(Error::InfeasibleScenario("design program returned zero mass".into()));
    }
    let probs: Vec<f64> = a.iter().enumerate().map(|(i, v)| v / ((i + 1) as f64 * scalar)).collect();
    Ok((scalar, DegreeDistribution::new(probs)?))
}

fn active_clusters(s: &Scenario) -> Vec<ClusterSpec> {
    s.clusters().iter().copied().filter(|c| c.z > 0.0).collect()
}

fn solve_fair(
    s: &Scenario,
    objective: Objective,
    scale: impl Fn(&ClusterSpec) -> f64,
    empty_value: f64,
) -> Result<OptimizationResult> {
    s.validate()?;
    let active = active_clusters(s);
    let (value, distribution) = if active.is_empty() {
        (empty_value, DegreeDistribution::degree_one())
    } else {
        recover_distribution(&scaled_program(s, &active, scale))?
    };
    let per_cluster_latency = cluster_latencies(s, &distribution);
    let mut auxiliary = BTreeMap::new();
    auxiliary.insert("p1".to_string(), distribution.p1());
    auxiliary.insert("degree_cap".to_string(), s.degree_cap() as f64);
    match objective {
        Objective::MaxminUtilization => {
            auxiliary.insert("utilization".to_string(), 1.0 / value);
        }
        Objective::MaxminThroughput => {
            auxiliary.insert("throughput".to_string(), 1.0 / value);
        }
        _ => {}
    }
    Ok(OptimizationResult { objective, objective_value: value, distribution, per_cluster_latency, auxiliary })
}

/// Minimizes the largest cluster latency `t_0`.
pub fn minmax_latency(s: &Scenario) -> Result<OptimizationResult> {
    solve_fair(s, Objective::MinmaxLatency, |c| 1.0 - c.epsilon, 0.0)
}

/// Maximizes the smallest channel utilization `z_i / ((1 - eps_i) t_i)`.
/// The objective value is `v_0`, the inverse utilization; erasure rates do
/// not enter the program.
pub fn maxmin_utilization(s: &Scenario) -> Result<OptimizationResult> {
    solve_fair(s, Objective::MaxminUtilization, |c| c.z, 1.0)
}

/// Maximizes the smallest throughput `z_i / t_i`; the objective value is
/// `w_0`, the inverse throughput.
pub fn maxmin_throughput(s: &Scenario) -> Result<OptimizationResult> {
    let worst_channel = s.clusters().iter().map(|c| 1.0 - c.epsilon).fold(1.0, f64::min);
    solve_fair(s, Objective::MaxminThroughput, |c| c.z * (1.0 - c.epsilon), 1.0 / worst_channel)
}

/// Lowest latency of a decoding cluster when the degree-1 fraction is pinned
/// to `p1`, together with the distribution achieving it.
///
/// Adds the row `a_1 = p1 * sum_d a_d/d` to the minmax program of `cluster`.
pub fn min_latency_with_fixed_p1(
    cluster: &ClusterSpec,
    p1: f64,
    grid_points: usize,
    degree_cap: usize,
) -> Result<(f64, DegreeDistribution)> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(Error::Parameter(format!("pinned p1 must lie in (0, 1], got {p1}")));
    }
    if !cluster.decoding {
        return Err(Error::UnsupportedScenario("pinned-p1 program applies to decoding clusters".into()));
    }
    let s = Scenario::new(vec![*cluster])?.with_grid(grid_points)?.with_degree_cap(Some(degree_cap))?;
    if cluster.z == 0.0 {
        let mut probs = vec![0.0; degree_cap.max(2)];
        probs[0] = p1;
        probs[1] += 1.0 - p1;
        return Ok((0.0, DegreeDistribution::new(probs)?));
    }
    let mut program = scaled_program(&s, &[*cluster], |c| 1.0 - c.epsilon);
    let coupling: Vec<f64> = (1..=degree_cap).map(|d| if d == 1 { 1.0 - p1 } else { -p1 / d as f64 }).collect();
    program.add_constraint(coupling, Relation::Eq, 0.0)?;
    recover_distribution(&program)
}

/// Minimizes `sum_i n_i t_i / n` for one decoding and one degree-1-only
/// cluster by sweeping the degree-1 fraction over `p1_grid` points of
/// `(0, 1]`.
pub fn min_avg_latency(s: &Scenario, p1_grid: usize) -> Result<OptimizationResult> {
    s.validate()?;
    if p1_grid == 0 {
        return Err(Error::Parameter("p1 grid needs at least one point".into()));
    }
    let (dec_idx, non_idx) = match s.clusters() {
        [a, b] if a.decoding && !b.decoding => (0, 1),
        [a, b] if !a.decoding && b.decoding => (1, 0),
        _ => {
            return Err(Error::UnsupportedScenario(
                "average-latency design needs exactly one decoding and one degree-1-only cluster".into(),
            ))
        }
    };
    let dec = s.clusters()[dec_idx];
    let non = s.clusters()[non_idx];
    let n = s.total_sinks();
    if n == 0 {
        return Err(Error::InvalidScenario("average latency needs at least one sink".into()));
    }
    let weight = |t_dec: f64, t_non: f64| {
        let mut total = 0.0;
        if dec.n > 0 {
            total += dec.n as f64 * t_dec;
        }
        if non.n > 0 {
            total += non.n as f64 * t_non;
        }
        total / n as f64
    };
    let non_latency = |p1: f64| {
        if non.z == 0.0 {
            0.0
        } else {
            neg_log_complement(non.z) / ((1.0 - non.epsilon) * p1)
        }
    };

    let (distribution, p1) = if non.n == 0 || non.z == 0.0 {
        // Only the decoding cluster matters.
        let alone = s.with_clusters(vec![dec])?.with_degree_cap(Some(s.degree_cap()))?;
        let d = minmax_latency(&alone)?.distribution;
        let p1 = d.p1();
        (d, p1)
    } else if dec.n == 0 || dec.z == 0.0 {
        (DegreeDistribution::degree_one(), 1.0)
    } else {
        let cap = s.degree_cap();
        let candidates: Vec<Result<(f64, f64, DegreeDistribution)>> = (1..=p1_grid)
            .into_par_iter()
            .map(|j| {
                let p1 = j as f64 / p1_grid as f64;
                let (t_dec, d) = min_latency_with_fixed_p1(&dec, p1, s.grid_points, cap)?;
                Ok((weight(t_dec, non_latency(p1)), p1, d))
            })
            .collect();
        let mut best: Option<(f64, f64, DegreeDistribution)> = None;
        for c in candidates {
            let c = c?;
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
        let (_, p1, d) = best.expect("p1 grid is nonempty");
        (d, p1)
    };

    let per_cluster_latency = cluster_latencies(s, &distribution);
    let objective_value = weight(per_cluster_latency[dec_idx], per_cluster_latency[non_idx]);
    let mut auxiliary = BTreeMap::new();
    auxiliary.insert("p1".to_string(), p1);
    auxiliary.insert("degree_cap".to_string(), s.degree_cap() as f64);
    Ok(OptimizationResult {
        objective: Objective::MinAvgLatency,
        objective_value,
        distribution,
        per_cluster_latency,
        auxiliary,
    })
}

/// Runs the optimizer for `objective` (average latency uses `p1_grid`).
pub fn optimize(objective: Objective, s: &Scenario, p1_grid: usize) -> Result<OptimizationResult> {
    match objective {
        Objective::MinmaxLatency => minmax_latency(s),
        Objective::MaxminUtilization => maxmin_utilization(s),
        Objective::MaxminThroughput => maxmin_throughput(s),
        Objective::MinAvgLatency => min_avg_latency(s, p1_grid),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// One stream minimizing the larger latency.
    A0,
    /// One stream optimized for cluster 1 only.
    A1,
    /// One stream optimized for cluster 2 only.
    A2,
    /// Two independent streams, each optimized for its cluster.
    A12,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// Symbols (per input symbol) after which each cluster meets its demand.
    #[serde(with = "crate::ext_real::vec")]
    pub latencies: Vec<f64>,
    /// Total symbols the source transmits.
    #[serde(with = "crate::ext_real")]
    pub total: f64,
}

/// Compares the four streaming schemes on a two-cluster scenario.
pub fn compare_schemes(s: &Scenario) -> Result<Vec<SchemeResult>> {
    s.validate()?;
    let [c1, c2] = s.clusters() else {
        return Err(Error::UnsupportedScenario(format!(
            "scheme comparison needs exactly two clusters, got {}",
            s.clusters().len()
        )));
    };
    let joint = minmax_latency(s)?;
    let only1 = minmax_latency(&s.with_clusters(vec![*c1])?)?;
    let only2 = minmax_latency(&s.with_clusters(vec![*c2])?)?;

    let single_stream = |scheme, dist: &DegreeDistribution| -> Result<SchemeResult> {
        let latencies = vec![evaluate_cross(dist, c1, s.grid_points)?, evaluate_cross(dist, c2, s.grid_points)?];
        let total = latencies.iter().copied().fold(0.0, f64::max);
        Ok(SchemeResult { scheme, latencies, total })
    };
    let mut a0 = single_stream(Scheme::A0, &joint.distribution)?;
    a0.total = joint.objective_value;
    Ok(vec![
        a0,
        single_stream(Scheme::A1, &only1.distribution)?,
        single_stream(Scheme::A2, &only2.distribution)?,
        SchemeResult {
            scheme: Scheme::A12,
            latencies: vec![only1.objective_value, only2.objective_value],
            total: only1.objective_value + only2.objective_value,
        },
    ])
}

/// Objective values over a `(z_1, z_2)` grid; `values[i][j]` belongs to
/// `(z1[i], z2[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMatrix {
    pub objective: Objective,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Inclusive uniform range `start:end:steps`.
pub fn linspace(start: f64, end: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..steps)
            .map(|i| if i + 1 == steps { end } else { start + (end - start) * (i as f64 / (steps - 1) as f64) })
            .collect(),
    }
}

/// Evaluates `objective` at every `(z_1, z_2)` cell of a two-cluster
/// template. Cells that fail yield NaN instead of aborting the sweep.
pub fn sweep_region(
    objective: Objective,
    template: &Scenario,
    z1: &[f64],
    z2: &[f64],
    p1_grid: usize,
) -> Result<SweepMatrix> {
    if template.clusters().len() != 2 {
        return Err(Error::UnsupportedScenario("region sweeps need a two-cluster template".into()));
    }
    for &z in z1.iter().chain(z2) {
        if !(0.0..1.0).contains(&z) {
            return Err(Error::Domain(format!("sweep demands must lie in [0, 1), got {z}")));
        }
    }
    let cells: Vec<(usize, usize)> = (0..z1.len()).flat_map(|i| (0..z2.len()).map(move |j| (i, j))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut clusters = template.clusters().to_vec();
            clusters[0].z = z1[i];
            clusters[1].z = z2[j];
            template
                .with_clusters(clusters)
                .and_then(|s| optimize(objective, &s, p1_grid))
                .map(|r| r.headline())
                .unwrap_or(f64::NAN)
        })
        .collect();
    let values = flat.chunks(z2.len().max(1)).map(|row| row.to_vec()).take(z1.len()).collect();
    Ok(SweepMatrix { objective, z1: z1.to_vec(), z2: z2.to_vec(), values })
}
