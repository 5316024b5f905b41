//! Placement solvers: exact branch-and-bound, greedy, First-Fit,
//! Random-Fit, and an LP-format export of the full MILP.

mod exact;
mod fit;
mod greedy;
mod lp;
mod state;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{evaluate, Instance, MetricsReport, ModelError, ObjectiveWeights, PlacementSolution, PriorPlacement};

pub use exact::solve_exact;
pub use fit::{solve_first_fit, solve_random_fit};
pub use greedy::{choose_path, choose_server, solve_greedy};
pub use lp::{export_lp, lp_census, validate_lp, LpCensus, LpError};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("instance too large for the exact solver: {what} = {value} exceeds {limit}")]
    LimitsExceeded { what: &'static str, value: usize, limit: usize },
    #[error("a first-phase request cannot carry a prior placement")]
    PriorInFirstPhase,
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Greedy,
    #[serde(rename = "ff")]
    FirstFit,
    #[serde(rename = "rf")]
    RandomFit,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Exact, SolverKind::Greedy, SolverKind::FirstFit, SolverKind::RandomFit];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Greedy => "greedy",
            SolverKind::FirstFit => "ff",
            SolverKind::RandomFit => "rf",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown solver `{s}` (expected exact, greedy, ff or rf)"))
    }
}

/// Size guard and search budget of the exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactLimits {
    pub max_demands: usize,
    /// Admissible paths per SFC.
    pub max_paths: usize,
    pub max_servers: usize,
    pub node_budget: u64,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self { max_demands: 8, max_paths: 8, max_servers: 16, node_budget: 20_000_000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveRequest<'a> {
    pub instance: &'a Instance,
    /// Hosting servers of the previous phase; drives the migration term.
    pub prior: Option<&'a PriorPlacement>,
    /// Full previous solution, used by the greedy reuse rules (previous
    /// demand paths and per-demand servers).
    pub prior_hint: Option<&'a PlacementSolution>,
    pub weights: ObjectiveWeights,
    pub phase: Phase,
    pub rng_seed: u64,
    pub limits: ExactLimits,
}

impl<'a> SolveRequest<'a> {
    pub fn first_phase(instance: &'a Instance, weights: ObjectiveWeights) -> Self {
        Self { instance, prior: None, prior_hint: None, weights, phase: Phase::First, rng_seed: 0, limits: ExactLimits::default() }
    }

    pub fn second_phase(
        instance: &'a Instance,
        prior: &'a PriorPlacement,
        prior_hint: Option<&'a PlacementSolution>,
        weights: ObjectiveWeights,
    ) -> Self {
        Self { instance, prior: Some(prior), prior_hint, weights, phase: Phase::Second, rng_seed: 0, limits: ExactLimits::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.phase == Phase::First && (self.prior.is_some() || self.prior_hint.is_some()) {
            return Err(SolveError::PriorInFirstPhase);
        }
        let l = &self.limits;
        if l.max_demands == 0 || l.max_paths == 0 || l.max_servers == 0 || l.node_budget == 0 {
            return Err(SolveError::InvalidLimits("all limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Heuristic,
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Heuristic => "heuristic",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Search nodes (exact) or placement attempts (heuristics).
    pub nodes_explored: u64,
    pub wall_ms: f64,
    /// `(s, demand)` pairs a heuristic could not place.
    pub failed_demands: Vec<(usize, usize)>,
    /// SFCs a heuristic moved entirely to the cloud after a demand failed.
    pub cloud_fallbacks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solver: SolverKind,
    pub solution: PlacementSolution,
    pub metrics: MetricsReport,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

/// Evaluates `solution` and downgrades `status` to infeasible on any
/// violation, so no solver can report a broken solution as usable.
fn finish(
    req: &SolveRequest,
    solver: SolverKind,
    solution: PlacementSolution,
    status: SolveStatus,
    mut stats: SolveStats,
    started: Instant,
) -> Result<SolveResult, SolveError> {
    let metrics = evaluate(&solution, req.instance, req.prior, &req.weights)?;
    let status = if metrics.violations.is_empty() { status } else { SolveStatus::Infeasible };
    stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(SolveResult { solver, solution, metrics, status, stats })
}

pub fn solve(kind: SolverKind, req: &SolveRequest) -> Result<SolveResult, SolveError> {
    match kind {
        SolverKind::Exact => solve_exact(req),
        SolverKind::Greedy => solve_greedy(req),
        SolverKind::FirstFit => solve_first_fit(req),
        SolverKind::RandomFit => solve_random_fit(req),
    }
}

/// Random instance small enough for exhaustive checking: 2-4 edge nodes
/// with one server each plus a cloud, 1-2 SFCs with chains of 1-2 VNFs,
/// at most 3 demands in total. Capacities are tight enough that
/// replication and cloud use occur.
pub fn random_small_instance(seed: u64) -> Instance {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::model::{DelayParams, Demand, ServiceChain, VnfSpec, DEFAULT_MAX_DELAY_S};
    use crate::topology::{build_topology, CloudSpec, LinkSpec, NodeId, NodeSpec, PathCatalog, PathPolicy, TopologySpec};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4usize);
    let nodes: Vec<NodeSpec> = (0..n)
        .map(|i| NodeSpec {
            id: format!("n{i}"),
            lat: 52.0 + rng.gen_range(0.0..0.5),
            lon: 10.0 + rng.gen_range(0.0..0.5),
            servers: 1,
            server_capacity: rng.gen_range(10.0..60.0f64).round(),
        })
        .collect();
    let mut links = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if b == a + 1 || rng.gen_bool(0.6) {
                let cap = rng.gen_range(20.0..120.0f64).round();
                for (s, d) in [(a, b), (b, a)] {
                    links.push(LinkSpec { src: nodes[s].id.clone(), dst: nodes[d].id.clone(), capacity: cap });
                }
            }
        }
    }
    let spec = TopologySpec { name: None, nodes, links, cloud: CloudSpec { id: "cloud".into(), lat: 50.1, lon: 8.7, servers: 1 } };
    let topo = Arc::new(build_topology(&spec).unwrap());
    let n_sfc = rng.gen_range(1..=2usize);
    let mut budget = 3usize;
    let mut sfcs = Vec::new();
    for k in 0..n_sfc {
        let src = NodeId(rng.gen_range(0..n));
        let mut dst = NodeId(rng.gen_range(0..n));
        while dst == src {
            dst = NodeId(rng.gen_range(0..n));
        }
        let left_for_others = n_sfc - k - 1;
        let nd = rng.gen_range(1..=(budget - left_for_others).min(2));
        budget -= nd;
        let nv = rng.gen_range(1..=2usize);
        let vnfs = (0..nv)
            .map(|t| VnfSpec {
                vnf_type: t,
                load_ratio: rng.gen_range(0.1..1.0f64),
                sync_ratio: 0.1,
                overhead: rng.gen_range(0.0..5.0f64).round(),
                replicable: rng.gen_bool(0.8),
                delays: DelayParams::default(),
                proc_capacity: 100.0,
            })
            .collect();
        let demands = (0..nd).map(|_| Demand { value: rng.gen_range(10.0..60.0f64).round() }).collect();
        sfcs.push(ServiceChain { src, dst, vnfs, demands, max_delay_s: DEFAULT_MAX_DELAY_S, paths: vec![] });
    }
    let cat = Arc::new(PathCatalog::build(&topo, sfcs.iter().map(|s| (s.src, s.dst)), PathPolicy::lenient()).unwrap());
    Instance::new(topo, cat, sfcs).unwrap()
}
