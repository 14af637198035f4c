//! Finite-length LT streaming over erasure channels, with Monte Carlo
//! latency measurement for peeling and degree-1-only sinks.
//!
//! Symbol payloads are never materialized; recovery depends only on the
//! neighbor graph.
//!
//! Randomness comes from ChaCha8. Trial `i` of a run with base seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`, so each trial is
//! reproducible on its own and independent of execution order.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::DegreeDistribution;
use crate::error::{Error, Result};
use crate::scenario::{ClusterSpec, Scenario};

/// Default emission cap, in multiples of `k`.
pub const DEFAULT_EMISSION_FACTOR: usize = 20;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

/// RNG for trial `trial` of a run seeded with `base_seed`.
pub fn trial_rng(base_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial);
    rng
}

/// An output symbol, identified by the distinct input indices it combines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSymbol {
    neighbors: Vec<u32>,
}

impl EncodedSymbol {
    pub fn new(mut neighbors: Vec<u32>) -> Result<Self> {
        if neighbors.is_empty() {
            return Err(Error::Parameter("encoded symbol needs at least one neighbor".into()));
        }
        neighbors.sort_unstable();
        if neighbors.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("encoded symbol neighbors must be distinct".into()));
        }
        Ok(Self { neighbors })
    }

    pub fn neighbors(&self) -> &[u32] {
        &self.neighbors
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// LT encoder over `k` input symbols.
#[derive(Debug, Clone)]
pub struct LtEncoder {
    k: usize,
    degrees: WeightedIndex<f64>,
}

impl LtEncoder {
    pub fn new(dist: &DegreeDistribution, k: usize) -> Result<Self> {
        if k == 0 || k > u32::MAX as usize {
            return Err(Error::Parameter(format!("input count must lie in 1..=2^32-1, got {k}")));
        }
        let degrees = WeightedIndex::new(dist.probs()).map_err(|e| Error::Parameter(e.to_string()))?;
        Ok(Self { k, degrees })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Draws a degree, clamped to `k`, then that many distinct neighbors
    /// uniformly at random.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> EncodedSymbol {
        let degree = (self.degrees.sample(rng) + 1).min(self.k);
        let mut neighbors: Vec<u32> = index::sample(rng, self.k, degree).into_iter().map(|i| i as u32).collect();
        neighbors.sort_unstable();
        EncodedSymbol { neighbors }
    }
}

pub fn generate_symbol<R: Rng + ?Sized>(dist: &DegreeDistribution, k: usize, rng: &mut R) -> Result<EncodedSymbol> {
    Ok(LtEncoder::new(dist, k)?.generate(rng))
}

/// Something that accumulates received symbols and recovers inputs.
pub trait Sink {
    fn receive(&mut self, symbol: &EncodedSymbol);
    fn recovered_count(&self) -> usize;
    fn input_count(&self) -> usize;
    fn is_recovered(&self, input: usize) -> bool;

    fn recovered_fraction(&self) -> f64 {
        self.recovered_count() as f64 / self.input_count() as f64
    }
}

/// Online belief-propagation (peeling) decoder.
///
/// Each unresolved symbol keeps the count and XOR of its unrecovered
/// neighbors, so a symbol whose count drops to one names its last neighbor
/// directly.
#[derive(Debug, Clone)]
pub struct PeelingDecoder {
    recovered: Vec<bool>,
    recovered_count: usize,
    received_count: usize,
    /// `(remaining degree, xor of remaining neighbors)` per stored symbol.
    pending: Vec<(u32, u32)>,
    /// Stored symbols referencing each unrecovered input.
    watchers: Vec<Vec<u32>>,
    ripple: VecDeque<u32>,
}

impl PeelingDecoder {
    pub fn new(k: usize) -> Self {
        Self {
            recovered: vec![false; k],
            recovered_count: 0,
            received_count: 0,
            pending: Vec::new(),
            watchers: vec![Vec::new(); k],
            ripple: VecDeque::new(),
        }
    }

    pub fn received_count(&self) -> usize {
        self.received_count
    }

    /// Stored symbols still of remaining degree two or more.
    pub fn unresolved_count(&self) -> usize {
        self.pending.iter().filter(|(deg, _)| *deg >= 2).count()
    }

    fn drain_ripple(&mut self) {
        while let Some(input) = self.ripple.pop_front() {
            let v = input as usize;
            if self.recovered[v] {
                continue;
            }
            self.recovered[v] = true;
            self.recovered_count += 1;
            for sid in std::mem::take(&mut self.watchers[v]) {
                let entry = &mut self.pending[sid as usize];
                if entry.0 == 0 {
                    continue;
                }
                entry.0 -= 1;
                entry.1 ^= input;
                if entry.0 == 1 {
                    entry.0 = 0;
                    self.ripple.push_back(entry.1);
                }
            }
        }
    }
}

impl Sink for PeelingDecoder {
    fn receive(&mut self, symbol: &EncodedSymbol) {
        self.received_count += 1;
        let mut remaining = 0u32;
        let mut xor = 0u32;
        for &n in &symbol.neighbors {
            if !self.recovered[n as usize] {
                remaining += 1;
                xor ^= n;
            }
        }
        match remaining {
            0 => {}
            1 => {
                self.ripple.push_back(xor);
                self.drain_ripple();
            }
            _ => {
                let sid = self.pending.len() as u32;
                self.pending.push((remaining, xor));
                for &n in &symbol.neighbors {
                    if !self.recovered[n as usize] {
                        self.watchers[n as usize].push(sid);
                    }
                }
            }
        }
    }

    fn recovered_count(&self) -> usize {
        self.recovered_count
    }

    fn input_count(&self) -> usize {
        self.recovered.len()
    }

    fn is_recovered(&self, input: usize) -> bool {
        self.recovered[input]
    }
}

/// Sink that keeps only degree-1 symbols and runs no decoder.
#[derive(Debug, Clone)]
pub struct DegreeOneCollector {
    recovered: Vec<bool>,
    recovered_count: usize,
}

impl DegreeOneCollector {
    pub fn new(k: usize) -> Self {
        Self { recovered: vec![false; k], recovered_count: 0 }
    }
}

impl Sink for DegreeOneCollector {
    fn receive(&mut self, symbol: &EncodedSymbol) {
        if let [n] = symbol.neighbors[..] {
            let slot = &mut self.recovered[n as usize];
            if !*slot {
                *slot = true;
                self.recovered_count += 1;
            }
        }
    }

    fn recovered_count(&self) -> usize {
        self.recovered_count
    }

    fn input_count(&self) -> usize {
        self.recovered.len()
    }

    fn is_recovered(&self, input: usize) -> bool {
        self.recovered[input]
    }
}

fn make_sink(cluster: &ClusterSpec, k: usize) -> Box<dyn Sink + Send> {
    if cluster.decoding {
        Box::new(PeelingDecoder::new(k))
    } else {
        Box::new(DegreeOneCollector::new(k))
    }
}

/// Number of recovered inputs at which demand `z` is met.
pub fn target_count(z: f64, k: usize) -> usize {
    ((z * k as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Stop after this many emitted symbols; unmet targets report `inf`.
    pub emission_cap: Option<usize>,
    pub histogram_bins: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { emission_cap: None, histogram_bins: DEFAULT_HISTOGRAM_BINS }
    }
}

impl SimulationOptions {
    fn cap(&self, k: usize) -> usize {
        self.emission_cap.unwrap_or(DEFAULT_EMISSION_FACTOR * k)
    }
}

/// Streams one LT-coded block to one representative sink per cluster and
/// returns each cluster's latency `t_i = emitted / k` at the moment its
/// recovered fraction first reaches `z_i`.
pub fn run_trial(
    s: &Scenario,
    dist: &DegreeDistribution,
    k: usize,
    seed: u64,
    emission_cap: Option<usize>,
) -> Result<Vec<f64>> {
    let mut rng = trial_rng(seed, 0);
    run_trial_with(s, dist, k, &mut rng, emission_cap.unwrap_or(DEFAULT_EMISSION_FACTOR * k))
}

fn run_trial_with<R: Rng>(
    s: &Scenario,
    dist: &DegreeDistribution,
    k: usize,
    rng: &mut R,
    cap: usize,
) -> Result<Vec<f64>> {
    let encoder = LtEncoder::new(dist, k)?;
    let clusters = s.clusters();
    let targets: Vec<usize> = clusters.iter().map(|c| target_count(c.z, k)).collect();
    let mut sinks: Vec<_> = clusters.iter().map(|c| make_sink(c, k)).collect();
    let mut latency: Vec<f64> = targets.iter().map(|&t| if t == 0 { 0.0 } else { f64::INFINITY }).collect();
    let mut open = latency.iter().filter(|t| t.is_infinite()).count();
    let kf = k as f64;

    let mut emitted = 0usize;
    while open > 0 && emitted < cap {
        let symbol = encoder.generate(rng);
        emitted += 1;
        for (i, c) in clusters.iter().enumerate() {
            let delivered = rng.random::<f64>() >= c.epsilon;
            if !delivered || latency[i].is_finite() {
                continue;
            }
            sinks[i].receive(&symbol);
            if sinks[i].recovered_count() >= targets[i] {
                latency[i] = emitted as f64 / kf;
                open -= 1;
            }
        }
    }
    Ok(latency)
}

/// Summary statistics of one latency column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    /// `inf` if any trial missed its target.
    #[serde(with = "crate::ext_real")]
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial, NaN if any trial
    /// missed its target.
    #[serde(with = "crate::ext_real")]
    pub std: f64,
    #[serde(with = "crate::ext_real")]
    pub min: f64,
    #[serde(with = "crate::ext_real")]
    pub max: f64,
    /// Trials that hit the emission cap first.
    pub unmet: usize,
    pub histogram: Histogram,
}

/// Equal-width histogram over the finite samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(samples: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() || bins == 0 {
            return Self { lower: 0.0, upper: 0.0, counts: vec![0; bins] };
        }
        let lower = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0u64; bins];
        let width = (upper - lower) / bins as f64;
        for v in finite {
            let b = if width > 0.0 { (((v - lower) / width) as usize).min(bins - 1) } else { 0 };
            counts[b] += 1;
        }
        Self { lower, upper, counts }
    }
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        let unmet = samples.iter().filter(|v| !v.is_finite()).count();
        let n = samples.len() as f64;
        let (mean, std) = if unmet > 0 {
            (f64::INFINITY, f64::NAN)
        } else {
            let mean = samples.iter().sum::<f64>() / n;
            let std = if samples.len() > 1 {
                (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (mean, std)
        };
        Self {
            mean,
            std,
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            unmet,
            histogram: Histogram::build(samples, bins),
        }
    }
}

/// Aggregate of independent finite-length trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub k: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// `per_trial[trial][cluster]`.
    #[serde(skip)]
    pub per_trial: Vec<Vec<f64>>,
    pub clusters: Vec<LatencyStats>,
    /// Statistics of `t_0 = max_i t_i`.
    pub t0: LatencyStats,
}

impl SimulationReport {
    pub fn t0_samples(&self) -> Vec<f64> {
        self.per_trial.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect()
    }
}

/// Runs `trials` independent trials (trial `i` on stream `i` of `base_seed`).
pub fn monte_carlo(
    s: &Scenario,
    dist: &DegreeDistribution,
    k: usize,
    trials: usize,
    base_seed: u64,
    options: SimulationOptions,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    LtEncoder::new(dist, k)?;
    let cap = options.cap(k);
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial_with(s, dist, k, &mut trial_rng(base_seed, i), cap))
        .collect::<Result<Vec<_>>>()?;

    let bins = options.histogram_bins;
    let clusters = (0..s.clusters().len())
        .map(|c| LatencyStats::from_samples(&per_trial.iter().map(|row| row[c]).collect::<Vec<_>>(), bins))
        .collect();
    let mut report =
        SimulationReport { k, trials, base_seed, per_trial, clusters, t0: LatencyStats::from_samples(&[0.0], bins) };
    report.t0 = LatencyStats::from_samples(&report.t0_samples(), bins);
    Ok(report)
}

/// Batch peeling of `w k` freshly drawn symbols in which each step recovers
/// the input of a uniformly chosen reduced-degree-1 symbol. Returns the
/// number of such symbols (the ripple) observed before each step, indexed by
/// the number of inputs still unrecovered at that point; entries after the
/// decoder stalls are zero.
pub fn ripple_trace<R: Rng>(dist: &DegreeDistribution, k: usize, w: f64, rng: &mut R) -> Result<Vec<usize>> {
    let encoder = LtEncoder::new(dist, k)?;
    let count = (w * k as f64).round() as usize;
    let mut remaining: Vec<u32> = Vec::with_capacity(count);
    let mut xor: Vec<u32> = Vec::with_capacity(count);
    let mut watchers: Vec<Vec<u32>> = vec![Vec::new(); k];
    let mut ripple: Vec<u32> = Vec::new();
    let mut ripple_pos: Vec<usize> = vec![usize::MAX; count];
    for (sid, pos) in ripple_pos.iter_mut().enumerate() {
        let sym = encoder.generate(rng);
        remaining.push(sym.degree() as u32);
        xor.push(sym.neighbors().iter().fold(0, |a, &n| a ^ n));
        for &n in sym.neighbors() {
            watchers[n as usize].push(sid as u32);
        }
        if sym.degree() == 1 {
            *pos = ripple.len();
            ripple.push(sid as u32);
        }
    }

    let mut trace = vec![0usize; k + 1];
    let mut recovered = vec![false; k];
    let mut unrecovered = k;
    while !ripple.is_empty() {
        trace[unrecovered] = ripple.len();
        let pick = ripple[rng.random_range(0..ripple.len())];
        let input = xor[pick as usize];
        recovered[input as usize] = true;
        unrecovered -= 1;
        for sid in std::mem::take(&mut watchers[input as usize]) {
            let s = sid as usize;
            if remaining[s] == 0 {
                continue;
            }
            remaining[s] -= 1;
            xor[s] ^= input;
            match remaining[s] {
                1 => {
                    ripple_pos[s] = ripple.len();
                    ripple.push(sid);
                }
                0 => {
                    let pos = ripple_pos[s];
                    let last = *ripple.last().expect("symbol is in the ripple");
                    ripple.swap_remove(pos);
                    if last != sid {
                        ripple_pos[last as usize] = pos;
                    }
                }
                _ => {}
            }
        }
    }
    Ok(trace)
}
