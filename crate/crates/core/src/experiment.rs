//! The two-phase provisioning protocol and parameter sweeps.
//!
//! A replicate fixes everything random about one run: the demand series,
//! the VNF parameters and chain lengths of every SFC, the phase-1 time `t0`
//! and (for `pred`) the per-flow forecasts. Phase 1 places the chains on a
//! scenario's view of the demands at `t0`; phase 2 re-places them on the
//! values observed at `t0 + delta_t`, with phase 1 as the prior placement.
//!
//! All scenarios and axis points of a replicate share its data, so their
//! differences are paired. Rows are reproducible from the replicate seed
//! they record.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forecast::{self, ForecastConfig, ForecastError, LstmModel};
use crate::model::{
    to_prior, DelayParams, Demand, Instance, ModelError, ObjectiveWeights, ServiceChain, SyncVolume, Term, VnfSpec, DEFAULT_MAX_DELAY_S,
};
use crate::seed;
use crate::solvers::{self, SolveError, SolveRequest, SolveResult, SolveStatus, SolverKind};
use crate::topology::{build_topology, PathCatalog, PathError, PathPolicy, Topology, TopologyError, TopologySpec};
use crate::traffic::{generate_demand_set, DemandSet, TrafficError, TrafficProfile};

/// Demand values below this are raised to it (a forecast can reach zero,
/// the model needs positive demands).
pub const MIN_DEMAND: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("the pred scenario needs trained forecasts")]
    MissingForecasts,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Paths(#[from] PathError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Obsv,
    Over,
    Pred,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Obsv, ScenarioKind::Over, ScenarioKind::Pred];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Obsv => "obsv",
            ScenarioKind::Over => "over",
            ScenarioKind::Pred => "pred",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown scenario `{s}` (expected obsv, over or pred)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Share of each flow's historical maximum provisioned by `over`.
    pub over_fraction: f64,
    /// `t0` is drawn uniformly from the first `t0_window` samples of the
    /// evaluation period.
    pub t0_window: usize,
    /// Samples between the two placements.
    pub delta_t: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { over_fraction: 0.8, t0_window: 18, delta_t: 6 }
    }
}

/// Ranges the per-SFC VNF parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Fixed chain length; `None` draws one per SFC in `1..=max_length`.
    pub length: Option<usize>,
    pub max_length: usize,
    /// Processing units per traffic unit.
    pub load_ratio: (f64, f64),
    /// VM overhead as a share of the VNF's nominal processing load.
    pub overhead_fraction: (f64, f64),
    /// Sync traffic as a share of the load ratio.
    pub sync_fraction: f64,
    pub replicable: bool,
    pub max_delay_ms: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            length: None,
            max_length: 10,
            load_ratio: (0.01, 1.0),
            overhead_fraction: (0.01, 0.1),
            sync_fraction: 0.1,
            replicable: true,
            max_delay_ms: DEFAULT_MAX_DELAY_S * 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    #[serde(default)]
    pub traffic: TrafficProfile,
    #[serde(default)]
    pub chains: ChainConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    /// Overrides every edge server's capacity.
    #[serde(default)]
    pub server_capacity: Option<f64>,
    #[serde(default)]
    pub sync_volume: SyncVolume,
    #[serde(default)]
    pub path_policy: PathPolicy,
}

impl ExperimentConfig {
    pub fn new(topology: TopologySpec) -> Self {
        Self {
            topology,
            traffic: TrafficProfile::default(),
            chains: ChainConfig::default(),
            scenario: ScenarioConfig::default(),
            forecast: ForecastConfig::default(),
            server_capacity: None,
            sync_volume: SyncVolume::default(),
            path_policy: PathPolicy::default(),
        }
    }

    /// Periods generated per replicate: the training history plus one
    /// evaluation period.
    pub fn periods(&self) -> usize {
        self.forecast.train_periods + 1
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        let sc = &self.scenario;
        let spp = self.traffic.samples_per_period;
        if !(sc.over_fraction > 0.0 && sc.over_fraction <= 1.0) {
            return bad(format!("over fraction {} outside (0, 1]", sc.over_fraction));
        }
        if sc.delta_t == 0 || sc.t0_window == 0 || sc.t0_window + sc.delta_t > spp {
            return bad(format!("t0 window {} plus delta_t {} must fit in one period of {spp}", sc.t0_window, sc.delta_t));
        }
        if self.forecast.samples_per_period != spp {
            return bad("forecast and traffic disagree on samples per period".into());
        }
        let c = &self.chains;
        if c.max_length == 0 || c.max_length > 10 || c.length.is_some_and(|l| l == 0 || l > c.max_length) {
            return bad("chain lengths must lie in 1..=max_length <= 10".into());
        }
        let range_ok = |(lo, hi): (f64, f64)| lo >= 0.0 && hi >= lo && hi.is_finite();
        if !range_ok(c.load_ratio) || c.load_ratio.0 <= 0.0 || c.load_ratio.1 > 1.0 || !range_ok(c.overhead_fraction) {
            return bad("load ratio must lie in (0, 1] and ranges must be ordered".into());
        }
        if !(c.sync_fraction >= 0.0) || !(c.max_delay_ms > 0.0) {
            return bad("sync fraction must be >= 0 and the delay bound positive".into());
        }
        if self.server_capacity.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
            return bad("server capacity must be positive".into());
        }
        self.forecast.validate()?;
        Ok(())
    }
}

/// Topology and path catalog shared by every run of a configuration.
#[derive(Debug, Clone)]
pub struct Context {
    pub topology: Arc<Topology>,
    pub catalog: Arc<PathCatalog>,
}

impl Context {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let topology = build_topology(&cfg.topology)?;
        let edge: Vec<_> = topology.edge_nodes().collect();
        let pairs: Vec<_> = edge.iter().flat_map(|&a| edge.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect();
        let catalog = PathCatalog::build(&topology, pairs, cfg.path_policy)?;
        Ok(Self { topology: Arc::new(topology), catalog: Arc::new(catalog) })
    }
}

/// Randomly drawn part of one VNF; the overhead is absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VnfDraw {
    pub load_ratio: f64,
    pub overhead: f64,
}

/// Everything random about one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub seed: u64,
    pub demands: DemandSet,
    /// `[s]` drawn parameters for `max_length` VNFs; a chain of length `l`
    /// uses the first `l`.
    pub vnfs: Vec<Vec<VnfDraw>>,
    /// `[s]` length used when the configuration does not fix one.
    pub lengths: Vec<usize>,
    pub t0: usize,
    /// `[s][flow]` forecast of the value at `t0 + delta_t`.
    pub forecasts: Option<Vec<Vec<f64>>>,
}

/// Draws a replicate with freshly generated traffic. Forecasts are trained
/// only when `with_forecasts`.
pub fn prepare_replicate(cfg: &ExperimentConfig, ctx: &Context, rep_seed: u64, with_forecasts: bool) -> Result<Replicate, ExperimentError> {
    cfg.validate()?;
    let demands = generate_demand_set(seed::derive(rep_seed, &[seed::label("traffic")]), &ctx.topology, &cfg.traffic, cfg.periods())?;
    let mut rep = draw_replicate(cfg, rep_seed, demands)?;
    if with_forecasts {
        rep.forecasts = Some(forecast_flows(cfg, &rep.demands, rep.t0, rep_seed)?);
    }
    Ok(rep)
}

/// Draws chains and `t0` for a given demand set; its last period is the
/// evaluation period.
pub fn draw_replicate(cfg: &ExperimentConfig, rep_seed: u64, demands: DemandSet) -> Result<Replicate, ExperimentError> {
    let spp = demands.samples_per_period();
    if demands.periods == 0 || cfg.scenario.t0_window + cfg.scenario.delta_t > spp {
        return Err(ExperimentError::InvalidConfig(format!(
            "demand set of {} periods x {spp} samples cannot hold t0 window {} plus delta_t {}",
            demands.periods, cfg.scenario.t0_window, cfg.scenario.delta_t
        )));
    }
    let c = &cfg.chains;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(rep_seed, &[seed::label("chains")]));
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let mut vnfs = Vec::with_capacity(demands.sfcs.len());
    let mut lengths = Vec::with_capacity(demands.sfcs.len());
    for sfc in &demands.sfcs {
        let nominal: f64 = sfc.flows.iter().map(|f| f.base).sum();
        let chain = (0..c.max_length)
            .map(|_| {
                let load_ratio = draw(&mut rng, c.load_ratio);
                let overhead = draw(&mut rng, c.overhead_fraction) * load_ratio * nominal;
                VnfDraw { load_ratio, overhead }
            })
            .collect();
        vnfs.push(chain);
        lengths.push(rng.gen_range(1..=c.max_length));
    }
    let eval_start = (demands.periods - 1) * spp;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(rep_seed, &[seed::label("t0")]));
    let t0 = eval_start + rng.gen_range(0..cfg.scenario.t0_window);
    Ok(Replicate { seed: rep_seed, demands, vnfs, lengths, t0, forecasts: None })
}

/// Trains one model per flow on the `train_periods` periods before the
/// evaluation period and forecasts `delta_t` samples past `t0`.
pub fn forecast_flows(cfg: &ExperimentConfig, demands: &DemandSet, t0: usize, rep_seed: u64) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let models = train_flow_models(cfg, demands, rep_seed)?;
    Ok(predict_flows(&models, demands, t0, cfg.scenario.delta_t))
}

/// `[s][flow]` models trained on the periods before the last one.
pub fn train_flow_models(cfg: &ExperimentConfig, demands: &DemandSet, rep_seed: u64) -> Result<Vec<Vec<LstmModel>>, ExperimentError> {
    let spp = demands.samples_per_period();
    let fc = cfg.forecast;
    let needed = (fc.train_periods + 1) * spp;
    if demands.len() < needed {
        return Err(ForecastError::TooShort { needed, got: demands.len() }.into());
    }
    let start = demands.len() - needed;
    demands
        .sfcs
        .iter()
        .enumerate()
        .map(|(s, sfc)| {
            sfc.flows
                .iter()
                .enumerate()
                .map(|(f, flow)| {
                    let seed = seed::derive(rep_seed, &[seed::label("forecast"), s as u64, f as u64]);
                    Ok(forecast::train(&flow.values[start..], &fc, seed)?.0)
                })
                .collect()
        })
        .collect()
}

/// `[s][flow]` forecast `delta_t` samples past `t0` from the history up to
/// and including `t0`.
pub fn predict_flows(models: &[Vec<LstmModel>], demands: &DemandSet, t0: usize, delta_t: usize) -> Vec<Vec<f64>> {
    models
        .iter()
        .zip(&demands.sfcs)
        .map(|(ms, sfc)| ms.iter().zip(&sfc.flows).map(|(m, flow)| m.predict_horizon(&flow.values[..=t0], delta_t)).collect())
        .collect()
}

/// Per-demand values phase 1 plans for.
pub fn scenario_demand_view(
    demands: &DemandSet,
    kind: ScenarioKind,
    sc: &ScenarioConfig,
    t0: usize,
    forecasts: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>, ExperimentError> {
    if t0 >= demands.len() {
        return Err(ExperimentError::InvalidConfig(format!("t0 = {t0} beyond the series ({})", demands.len())));
    }
    let view = match kind {
        ScenarioKind::Obsv => demands.sfcs.iter().map(|s| s.flows.iter().map(|f| f.values[t0]).collect()).collect(),
        ScenarioKind::Over => demands
            .sfcs
            .iter()
            .map(|s| s.flows.iter().map(|f| sc.over_fraction * f.values.iter().copied().fold(0.0, f64::max)).collect())
            .collect(),
        ScenarioKind::Pred => forecasts.ok_or(ExperimentError::MissingForecasts)?.to_vec(),
    };
    Ok(floor_demands(view))
}

/// Observed per-demand values at `t`.
pub fn observed_at(demands: &DemandSet, t: usize) -> Vec<Vec<f64>> {
    floor_demands(demands.sfcs.iter().map(|s| s.flows.iter().map(|f| f.values[t]).collect()).collect())
}

fn floor_demands(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.iter_mut().flatten().for_each(|x| *x = x.max(MIN_DEMAND));
    v
}

/// Builds the placement instance of a replicate for the given chain
/// length (or the replicate's own lengths) and server capacity, with the
/// demand values of `values`.
pub fn build_instance(
    cfg: &ExperimentConfig,
    ctx: &Context,
    rep: &Replicate,
    length: Option<usize>,
    capacity: Option<f64>,
    values: &[Vec<f64>],
) -> Result<Instance, ExperimentError> {
    let capacity = capacity.or(cfg.server_capacity);
    let topology = match capacity {
        Some(c) => Arc::new(ctx.topology.with_server_capacity(c)),
        None => ctx.topology.clone(),
    };
    let edge_capacity = topology.servers().iter().find(|x| !x.is_cloud).map_or(1.0, |x| x.capacity);
    let c = &cfg.chains;
    let mut sfcs = Vec::with_capacity(rep.demands.sfcs.len());
    for (s, (traffic, vals)) in rep.demands.sfcs.iter().zip(values).enumerate() {
        let len = length.or(c.length).unwrap_or(rep.lengths[s]).min(rep.vnfs[s].len());
        let vnfs = rep.vnfs[s][..len]
            .iter()
            .enumerate()
            .map(|(v, d)| VnfSpec {
                vnf_type: s * c.max_length + v,
                load_ratio: d.load_ratio,
                sync_ratio: c.sync_fraction * d.load_ratio,
                overhead: d.overhead,
                replicable: c.replicable,
                delays: DelayParams::default(),
                proc_capacity: edge_capacity,
            })
            .collect();
        let demands = vals.iter().map(|&value| Demand { value }).collect();
        sfcs.push(ServiceChain { src: traffic.src, dst: traffic.dst, vnfs, demands, max_delay_s: c.max_delay_ms * 1e-3, paths: vec![] });
    }
    let mut inst = Instance::new(topology, ctx.catalog.clone(), sfcs)?;
    inst.sync_volume = cfg.sync_volume;
    Ok(inst)
}

/// Joint objective or one main term with negligible secondary weights.
/// Serialized as `joint`, `migrations`, `replications` or `cloud`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightsMode {
    #[default]
    Joint,
    Single(Term),
}

impl WeightsMode {
    pub fn weights(self, inst: &Instance) -> ObjectiveWeights {
        match self {
            WeightsMode::Joint => ObjectiveWeights::joint(),
            WeightsMode::Single(t) => ObjectiveWeights::single_term(t, inst),
        }
    }
}

impl FromStr for WeightsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(WeightsMode::Joint),
            "migrations" => Ok(WeightsMode::Single(Term::Migrations)),
            "replications" => Ok(WeightsMode::Single(Term::Replications)),
            "cloud" => Ok(WeightsMode::Single(Term::Cloud)),
            _ => Err(format!("unknown weights `{s}` (expected joint, migrations, replications or cloud)")),
        }
    }
}

impl fmt::Display for WeightsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightsMode::Joint => "joint",
            WeightsMode::Single(Term::Migrations) => "migrations",
            WeightsMode::Single(Term::Replications) => "replications",
            WeightsMode::Single(Term::Cloud) => "cloud",
        })
    }
}

impl TryFrom<String> for WeightsMode {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<WeightsMode> for String {
    fn from(w: WeightsMode) -> Self {
        w.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseOutcome {
    pub phase1: SolveResult,
    /// Missing when phase 1 found no feasible placement.
    pub phase2: Option<SolveResult>,
}

/// Phase 1 on `planned` without a prior, then phase 2 on `observed` with
/// the phase-1 placement as prior. Phase-1 infeasibility stops the run.
pub fn run_two_phase(
    base: &Instance,
    planned: &[Vec<f64>],
    observed: &[Vec<f64>],
    solver: SolverKind,
    weights: WeightsMode,
    rng_seed: u64,
) -> Result<TwoPhaseOutcome, ExperimentError> {
    let inst1 = base.with_demand_values(planned)?;
    let req1 = SolveRequest::first_phase(&inst1, weights.weights(&inst1)).with_seed(seed::derive(rng_seed, &[1]));
    let phase1 = solvers::solve(solver, &req1)?;
    if phase1.status == SolveStatus::Infeasible {
        return Ok(TwoPhaseOutcome { phase1, phase2: None });
    }
    let inst2 = base.with_demand_values(observed)?;
    let prior = to_prior(&phase1.solution);
    let req2 =
        SolveRequest::second_phase(&inst2, &prior, Some(&phase1.solution), weights.weights(&inst2)).with_seed(seed::derive(rng_seed, &[2]));
    let phase2 = solvers::solve(solver, &req2)?;
    Ok(TwoPhaseOutcome { phase1, phase2: Some(phase2) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Fixed chain length for every SFC.
    SfcLength(Vec<usize>),
    /// Edge server capacity, chains of the replicate's random lengths.
    ServerCapacity(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SfcLength(_) => "sfc_length",
            SweepAxis::ServerCapacity(_) => "server_capacity",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::SfcLength(v) => v.iter().map(|&l| l as f64).collect(),
            SweepAxis::ServerCapacity(v) => v.clone(),
        }
    }

    fn point(&self, value: f64) -> (Option<usize>, Option<f64>) {
        match self {
            SweepAxis::SfcLength(_) => (Some(value as usize), None),
            SweepAxis::ServerCapacity(_) => (None, Some(value)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub experiment: ExperimentConfig,
    pub axis: SweepAxis,
    pub scenarios: Vec<ScenarioKind>,
    pub replicates: usize,
    pub master_seed: u64,
    pub solver: SolverKind,
    #[serde(default)]
    pub weights: WeightsMode,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.into()));
        if self.axis.values().is_empty() || self.scenarios.is_empty() || self.replicates == 0 {
            return bad("sweep needs axis values, scenarios and replicates");
        }
        match &self.axis {
            SweepAxis::SfcLength(v) if v.iter().any(|&l| l == 0 || l > self.experiment.chains.max_length) => {
                return bad("sfc lengths must lie in 1..=max_length");
            }
            SweepAxis::ServerCapacity(v) if v.iter().any(|&c| !(c > 0.0 && c.is_finite())) => {
                return bad("server capacities must be positive");
            }
            _ => {}
        }
        self.experiment.validate()
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        seed::derive(self.master_seed, &[r as u64])
    }

    fn needs_forecasts(&self) -> bool {
        self.scenarios.contains(&ScenarioKind::Pred)
    }
}

/// Outcome of a row beyond the solver status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Optimal,
    Heuristic,
    Infeasible,
    /// Phase 1 found no feasible placement; phase 2 was not run.
    Phase1Infeasible,
    /// The solver rejected the instance (e.g. too large for `exact`).
    Error,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Optimal => "optimal",
            RowStatus::Heuristic => "heuristic",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Phase1Infeasible => "phase1_infeasible",
            RowStatus::Error => "error",
        }
    }

    pub fn has_metrics(self) -> bool {
        matches!(self, RowStatus::Optimal | RowStatus::Heuristic)
    }
}

impl From<SolveStatus> for RowStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RowStatus::Optimal,
            SolveStatus::Heuristic => RowStatus::Heuristic,
            SolveStatus::Infeasible => RowStatus::Infeasible,
        }
    }
}

/// Phase-2 metrics of one (axis value, scenario, replicate) run. Metric
/// fields are empty unless phase 2 produced a feasible placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: f64,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub solver: SolverKind,
    pub migrations: Option<usize>,
    pub replications: Option<usize>,
    pub cloud_vnfs: Option<usize>,
    pub objective: Option<f64>,
    pub mean_link_util: Option<f64>,
    pub mean_server_util: Option<f64>,
    pub mean_delay_ms: Option<f64>,
    pub status: RowStatus,
}

impl SweepRow {
    fn empty(axis: f64, scenario: ScenarioKind, seed: u64, solver: SolverKind, status: RowStatus) -> Self {
        Self {
            axis,
            scenario,
            seed,
            solver,
            migrations: None,
            replications: None,
            cloud_vnfs: None,
            objective: None,
            mean_link_util: None,
            mean_server_util: None,
            mean_delay_ms: None,
            status,
        }
    }
}

/// One row from an already drawn replicate.
pub fn run_row_with(
    sweep: &SweepConfig,
    ctx: &Context,
    rep: &Replicate,
    axis_value: f64,
    scenario: ScenarioKind,
) -> Result<SweepRow, ExperimentError> {
    let cfg = &sweep.experiment;
    let (length, capacity) = sweep.axis.point(axis_value);
    let planned = scenario_demand_view(&rep.demands, scenario, &cfg.scenario, rep.t0, rep.forecasts.as_deref())?;
    let observed = observed_at(&rep.demands, rep.t0 + cfg.scenario.delta_t);
    let base = build_instance(cfg, ctx, rep, length, capacity, &observed)?;
    let rng_seed = seed::derive(rep.seed, &[axis_value.to_bits(), seed::label(scenario.name())]);
    let empty = |status| SweepRow::empty(axis_value, scenario, rep.seed, sweep.solver, status);
    let outcome = match run_two_phase(&base, &planned, &observed, sweep.solver, sweep.weights, rng_seed) {
        Ok(o) => o,
        Err(ExperimentError::Solve(e)) => {
            log::warn!("{} at {axis_value} ({scenario}, seed {}): {e}", sweep.solver, rep.seed);
            return Ok(empty(RowStatus::Error));
        }
        Err(e) => return Err(e),
    };
    let Some(p2) = outcome.phase2 else { return Ok(empty(RowStatus::Phase1Infeasible)) };
    let status = RowStatus::from(p2.status);
    if !status.has_metrics() {
        return Ok(empty(status));
    }
    let m = &p2.metrics;
    Ok(SweepRow {
        migrations: Some(m.objective.migrations),
        replications: Some(m.objective.replications),
        cloud_vnfs: Some(m.objective.cloud_vnfs),
        objective: Some(m.objective.value),
        mean_link_util: Some(m.mean_link_util),
        mean_server_util: Some(m.mean_server_util),
        mean_delay_ms: Some(m.mean_delay_ms),
        ..empty(status)
    })
}

/// Re-executes a single row from its recorded replicate seed.
pub fn run_row(sweep: &SweepConfig, axis_value: f64, scenario: ScenarioKind, rep_seed: u64) -> Result<SweepRow, ExperimentError> {
    sweep.validate()?;
    let ctx = Context::build(&sweep.experiment)?;
    let rep = prepare_replicate(&sweep.experiment, &ctx, rep_seed, scenario == ScenarioKind::Pred)?;
    run_row_with(sweep, &ctx, &rep, axis_value, scenario)
}

/// Mean and standard deviation of one column over the rows with metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: f64,
    pub scenario: ScenarioKind,
    /// Rows with metrics out of all rows of the cell.
    pub ok: usize,
    pub total: usize,
    pub migrations: Option<Stat>,
    pub replications: Option<Stat>,
    pub cloud_vnfs: Option<Stat>,
    pub objective: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// Ordered by axis value, then scenario (config order), then replicate.
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
    /// Wall-clock data, excluded from determinism guarantees.
    pub meta: SweepMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub elapsed_s: f64,
    pub jobs: usize,
}

pub const CSV_HEADER: [&str; 12] = [
    "axis",
    "scenario",
    "seed",
    "solver",
    "migrations",
    "replications",
    "cloud_vnfs",
    "objective",
    "mean_link_util",
    "mean_server_util",
    "mean_delay_ms",
    "status",
];

/// Runs the full cross-product with replicates spread over `jobs` workers
/// (0 = rayon's default).
pub fn run_sweep(sweep: &SweepConfig, jobs: usize) -> Result<SweepReport, ExperimentError> {
    sweep.validate()?;
    let started = Instant::now();
    let ctx = Context::build(&sweep.experiment)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::InvalidConfig(format!("worker pool: {e}")))?;
    let axis = sweep.axis.values();
    let per_rep: Vec<Vec<SweepRow>> = pool.install(|| {
        (0..sweep.replicates)
            .into_par_iter()
            .map(|r| {
                let rep = prepare_replicate(&sweep.experiment, &ctx, sweep.replicate_seed(r), sweep.needs_forecasts())?;
                let mut rows = Vec::with_capacity(axis.len() * sweep.scenarios.len());
                for &a in &axis {
                    for &sc in &sweep.scenarios {
                        rows.push(run_row_with(sweep, &ctx, &rep, a, sc)?);
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_, ExperimentError>>()
    })?;
    let cells = axis.len() * sweep.scenarios.len();
    let mut rows = Vec::with_capacity(cells * sweep.replicates);
    for cell in 0..cells {
        rows.extend(per_rep.iter().map(|r| r[cell].clone()));
    }
    let summary = summarize(&rows);
    let meta = SweepMeta { elapsed_s: started.elapsed().as_secs_f64(), jobs: pool.current_num_threads() };
    Ok(SweepReport { config: sweep.clone(), rows, summary, meta })
}

/// Per (axis value, scenario) means over the rows with metrics.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut cells: Vec<(f64, ScenarioKind)> = Vec::new();
    for r in rows {
        if !cells.iter().any(|&(a, s)| a.to_bits() == r.axis.to_bits() && s == r.scenario) {
            cells.push((r.axis, r.scenario));
        }
    }
    cells
        .into_iter()
        .map(|(axis, scenario)| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.axis.to_bits() == axis.to_bits() && r.scenario == scenario).collect();
            let col = |f: fn(&SweepRow) -> Option<f64>| Stat::of(&cell.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            SweepSummary {
                axis,
                scenario,
                ok: cell.iter().filter(|r| r.status.has_metrics()).count(),
                total: cell.len(),
                migrations: col(|r| r.migrations.map(|x| x as f64)),
                replications: col(|r| r.replications.map(|x| x as f64)),
                cloud_vnfs: col(|r| r.cloud_vnfs.map(|x| x as f64)),
                objective: col(|r| r.objective),
            }
        })
        .collect()
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER).map_err(csv_err)?;
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let opt_n = |x: Option<usize>| x.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            out.write_record([
                r.axis.to_string(),
                r.scenario.to_string(),
                r.seed.to_string(),
                r.solver.to_string(),
                opt_n(r.migrations),
                opt_n(r.replications),
                opt_n(r.cloud_vnfs),
                opt(r.objective),
                opt(r.mean_link_util),
                opt(r.mean_server_util),
                opt(r.mean_delay_ms),
                r.status.name().to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Sidecar with the configuration, the summary and the `meta` block.
    pub fn write_json<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            config: &'a SweepConfig,
            summary: &'a [SweepSummary],
            meta: &'a SweepMeta,
        }
        serde_json::to_writer_pretty(w, &Sidecar { config: &self.config, summary: &self.summary, meta: &self.meta })?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> ExperimentError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => ExperimentError::Io(e),
        other => ExperimentError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
