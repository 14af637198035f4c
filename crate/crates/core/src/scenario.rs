//! Sink clusters and multicast scenarios.

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_GRID_POINTS;
use crate::distributions::{degree_cap_with, DegreeCapPolicy};
use crate::error::{Error, Result};

/// A cluster of sinks sharing a recovery target `z`, a decoding capability
/// and a channel erasure rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub z: f64,
    pub decoding: bool,
    pub epsilon: f64,
    /// Number of sinks; only weights the average-latency objective.
    #[serde(default = "one")]
    pub n: u64,
}

fn one() -> u64 {
    1
}

impl ClusterSpec {
    pub fn new(z: f64, decoding: bool, epsilon: f64) -> Self {
        Self { z, decoding, epsilon, n: 1 }
    }

    pub fn decoding(z: f64, epsilon: f64) -> Self {
        Self::new(z, true, epsilon)
    }

    pub fn nondecoding(z: f64, epsilon: f64) -> Self {
        Self::new(z, false, epsilon)
    }

    pub fn with_count(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.z) {
            return Err(Error::InvalidScenario(format!("cluster demand z must lie in [0, 1), got {}", self.z)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidScenario(format!(
                "cluster erasure rate must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// JSON form of a scenario; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub clusters: Vec<ClusterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_cap: Option<usize>,
}

/// Validated multicast scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    clusters: Vec<ClusterSpec>,
    pub grid_points: usize,
    pub degree_cap_override: Option<usize>,
    pub cap_policy: DegreeCapPolicy,
}

impl Scenario {
    pub fn new(clusters: Vec<ClusterSpec>) -> Result<Self> {
        let s = Self {
            clusters,
            grid_points: DEFAULT_GRID_POINTS,
            degree_cap_override: None,
            cap_policy: DegreeCapPolicy::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_grid(mut self, grid_points: usize) -> Result<Self> {
        self.grid_points = grid_points;
        self.validate()?;
        Ok(self)
    }

    pub fn with_degree_cap(mut self, cap: Option<usize>) -> Result<Self> {
        self.degree_cap_override = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cap_policy(mut self, policy: DegreeCapPolicy) -> Self {
        self.cap_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidScenario("scenario needs at least one cluster".into()));
        }
        self.clusters.iter().try_for_each(ClusterSpec::validate)?;
        if self.grid_points < 2 {
            return Err(Error::InvalidScenario(format!("grid_points must be >= 2, got {}", self.grid_points)));
        }
        if self.degree_cap_override == Some(0) {
            return Err(Error::InvalidScenario("degree_cap must be >= 1".into()));
        }
        Ok(())
    }

    pub fn clusters(&self) -> &[ClusterSpec] {
        &self.clusters
    }

    /// Same settings, different clusters.
    pub fn with_clusters(&self, clusters: Vec<ClusterSpec>) -> Result<Self> {
        let s = Self { clusters, ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    pub fn max_demand(&self) -> f64 {
        self.clusters.iter().map(|c| c.z).fold(0.0, f64::max)
    }

    /// Highest degree the optimizers may use.
    pub fn degree_cap(&self) -> usize {
        match self.degree_cap_override {
            Some(cap) => cap,
            None => degree_cap_with(self.max_demand(), self.cap_policy).expect("validated demands lie in [0, 1)"),
        }
    }

    pub fn total_sinks(&self) -> u64 {
        self.clusters.iter().map(|c| c.n).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(file: ScenarioFile) -> Result<Self> {
        Scenario::new(file.clusters)?
            .with_grid(file.grid_points.unwrap_or(DEFAULT_GRID_POINTS))?
            .with_degree_cap(file.degree_cap)
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        ScenarioFile { clusters: s.clusters, grid_points: Some(s.grid_points), degree_cap: s.degree_cap_override }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates_json() {
        let s = Scenario::from_json(
            r#"{"clusters":[{"z":0.98,"decoding":true,"epsilon":0.0,"n":3},{"z":0.63,"decoding":true,"epsilon":0.5,"n":1}]}"#,
        )
        .unwrap();
        assert_eq!(s.clusters().len(), 2);
        assert_eq!(s.grid_points, DEFAULT_GRID_POINTS);
        assert_eq!(s.degree_cap(), 50);
        assert_eq!(s.total_sinks(), 4);

        let capped = Scenario::from_json(
            r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0}],"grid_points":11,"degree_cap":7}"#,
        )
        .unwrap();
        assert_eq!(capped.degree_cap(), 7);
        assert_eq!(capped.grid_points, 11);
        assert_eq!(capped.clusters()[0].n, 1);
    }

    #[test]
    fn rejects_bad_scenarios() {
        for bad in [
            r#"{"clusters":[]}"#,
            r#"{"clusters":[{"z":1.0,"decoding":true,"epsilon":0}]}"#,
            r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":1.0}]}"#,
            r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0,"eps":0}]}"#,
            r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0}],"grid":5}"#,
            r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0}],"grid_points":1}"#,
            r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0}],"degree_cap":0}"#,
            r#"not json"#,
        ] {
            assert!(Scenario::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cap_policy() {
        let s = Scenario::new(vec![ClusterSpec::decoding(0.8, 0.0)]).unwrap();
        assert_eq!(s.degree_cap(), 5);
        assert_eq!(s.clone().with_cap_policy(DegreeCapPolicy::CeilMinusOne).degree_cap(), 4);
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::new(vec![ClusterSpec::decoding(0.8, 0.0), ClusterSpec::nondecoding(0.4, 0.1).with_count(5)])
            .unwrap()
            .with_grid(301)
            .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
    }
}
