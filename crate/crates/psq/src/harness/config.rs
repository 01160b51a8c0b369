//! Experiment configuration: a serializable description of the queue
//! family, the r-sequence, and the sampling plan.

use serde::{Deserialize, Serialize};

use crate::dist::{HeavyTrafficFamily, LawSpec};
use crate::sim::InitialCondition;

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub interarrival: LawSpec,
    pub service: LawSpec,
    pub lambda: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialConfig {
    Empty,
    Atoms { values: Vec<f64> },
    Manifold { workload: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Manifold { workload: 1.0 }
    }
}

impl InitialConfig {
    pub fn to_condition(&self) -> InitialCondition {
        match self {
            InitialConfig::Empty => InitialCondition::Empty,
            InitialConfig::Atoms { values } => InitialCondition::Atoms(values.clone()),
            InitialConfig::Manifold { workload } => InitialCondition::Manifold {
                workload: *workload,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Simulate,
    Fluid,
    Collapse,
    Steady,
    Validate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    /// Indices of the queue sequence, each exceeding `lambda`.
    pub r_values: Vec<f64>,
    pub seed: u64,
    /// Diffusion-time horizon `T > 1` for collapse and fluid suites.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Fraction of the horizon excluded from collapse metrics, standing in
    /// for the vanishing initial window of the limit statement.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Diffusion time at which steady-state marginals are sampled.
    #[serde(default = "default_steady_horizon")]
    pub steady_horizon: f64,
    /// Fluid window length `L > 1` for the overlap comparison.
    #[serde(default = "default_fluid_window")]
    pub fluid_window: f64,
    #[serde(default = "default_fluid_shifts")]
    pub fluid_shifts: usize,
    /// Fluid solver step; `None` picks `1e-3 * L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid_step: Option<f64>,
    /// Worker threads for replications; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
    /// Archive each replication's raw path in binary form next to the
    /// reports (replay support; sized for small runs).
    #[serde(default)]
    pub keep_paths: bool,
}

fn default_horizon() -> f64 {
    2.0
}

fn default_grid_points() -> usize {
    200
}

fn default_replications() -> usize {
    50
}

fn default_burn_in() -> f64 {
    0.05
}

fn default_steady_horizon() -> f64 {
    20.0
}

fn default_fluid_window() -> f64 {
    5.0
}

fn default_fluid_shifts() -> usize {
    10
}

fn default_suites() -> Vec<Suite> {
    vec![Suite::Validate, Suite::Collapse, Suite::Steady]
}

fn default_event_cap() -> u64 {
    200_000_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validate and build the heavy-traffic family.
    pub fn build_family(&self) -> Result<HeavyTrafficFamily, HarnessError> {
        if !(self.horizon > 1.0) {
            return Err(HarnessError::Config(format!(
                "horizon T must exceed 1, got {}",
                self.horizon
            )));
        }
        if self.r_values.is_empty() {
            return Err(HarnessError::Config("r_values must be nonempty".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.grid_points < 2 {
            return Err(HarnessError::Config("grid_points must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(HarnessError::Config(format!(
                "burn_in must lie in [0, 1), got {}",
                self.burn_in
            )));
        }
        if !(self.fluid_window > 1.0) {
            return Err(HarnessError::Config(format!(
                "fluid window L must exceed 1, got {}",
                self.fluid_window
            )));
        }
        if !(self.steady_horizon > 0.0) {
            return Err(HarnessError::Config(
                "steady_horizon must be positive".into(),
            ));
        }
        let fam = HeavyTrafficFamily::new(
            self.family.interarrival.clone(),
            self.family.service.clone(),
            self.family.lambda,
            self.family.theta,
        )?;
        for &r in &self.r_values {
            if !(r > 0.0 && r > fam.lambda()) {
                return Err(HarnessError::Config(format!(
                    "every r must be positive and exceed lambda = {}, got {r}",
                    fam.lambda()
                )));
            }
        }
        Ok(fam)
    }

    /// Sorted copy of the r-sequence.
    pub fn sorted_r(&self) -> Vec<f64> {
        let mut r = self.r_values.clone();
        r.sort_by(f64::total_cmp);
        r
    }
}
