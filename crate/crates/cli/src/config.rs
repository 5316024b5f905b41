use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vnfscale::experiment::{ChainConfig, ExperimentConfig, ScenarioConfig, ScenarioKind, SweepAxis, WeightsMode};
use vnfscale::forecast::ForecastConfig;
use vnfscale::model::SyncVolume;
use vnfscale::solvers::SolverKind;
use vnfscale::topology::{PathPolicy, TopologySpec};
use vnfscale::traffic::TrafficProfile;

/// Everything a command needs, read from `--config` and then patched by
/// command-line flags. Every field has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in topology name (`n7`, `n45`) or path to a topology JSON file.
    pub topology: String,
    /// Demand dataset; defaults to `<out>/demands.json`.
    pub demands: Option<PathBuf>,
    /// Model store directory; defaults to `<out>/models`.
    pub models: Option<PathBuf>,
    /// Output directory; defaults to `$VNFSIM_OUT` or `out`.
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Periods generated by `generate`; defaults to the largest training
    /// period count plus one evaluation period.
    pub periods: Option<usize>,
    pub traffic: TrafficProfile,
    pub chains: ChainConfig,
    pub scenario_params: ScenarioConfig,
    pub forecast: ForecastConfig,
    pub server_capacity: Option<f64>,
    pub sync_volume: SyncVolume,
    /// Keep topologies with fewer than three cloud-free paths per pair.
    pub lenient_paths: bool,
    pub solver: SolverKind,
    pub scenario: ScenarioKind,
    pub weights: WeightsMode,
    /// Training period counts compared by `train`.
    pub rmse_periods: Vec<usize>,
    pub sweep: SweepSection,
    /// Worker threads for `sweep` (0 = all cores).
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub scenarios: Vec<ScenarioKind>,
    pub replicates: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::ServerCapacity(vec![250.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0]),
            scenarios: ScenarioKind::ALL.to_vec(),
            replicates: 20,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            topology: "n7".into(),
            demands: None,
            models: None,
            out: None,
            seed: 1,
            periods: None,
            traffic: TrafficProfile::default(),
            chains: ChainConfig::default(),
            scenario_params: ScenarioConfig::default(),
            forecast: ForecastConfig::default(),
            server_capacity: None,
            sync_volume: SyncVolume::default(),
            lenient_paths: false,
            solver: SolverKind::Greedy,
            scenario: ScenarioKind::Obsv,
            weights: WeightsMode::Joint,
            rmse_periods: vec![1, 50],
            sweep: SweepSection::default(),
            jobs: 0,
        }
    }
}

pub const OUT_ENV: &str = "VNFSIM_OUT";

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn demands_path(&self) -> PathBuf {
        self.demands.clone().unwrap_or_else(|| self.out_dir().join("demands.json"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.models.clone().unwrap_or_else(|| self.out_dir().join("models"))
    }

    pub fn periods(&self) -> usize {
        let longest = self.rmse_periods.iter().copied().chain([self.forecast.train_periods]).max().unwrap_or(1);
        self.periods.unwrap_or(longest + 1)
    }

    pub fn topology_spec(&self) -> Result<TopologySpec> {
        if let Some(spec) = TopologySpec::builtin(&self.topology) {
            return Ok(spec);
        }
        let path = Path::new(&self.topology);
        if !path.exists() {
            bail!("topology `{}` is neither built-in (n7, n45) nor an existing file", self.topology);
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read topology {}", path.display()))?;
        TopologySpec::from_json(&text).with_context(|| format!("invalid topology {}", path.display()))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(self.topology_spec()?);
        cfg.traffic = self.traffic.clone();
        cfg.chains = self.chains;
        cfg.scenario = self.scenario_params;
        cfg.forecast = self.forecast;
        cfg.server_capacity = self.server_capacity;
        cfg.sync_volume = self.sync_volume;
        cfg.path_policy = if self.lenient_paths { PathPolicy::lenient() } else { PathPolicy::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}
