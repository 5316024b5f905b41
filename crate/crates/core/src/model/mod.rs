//! Placement data model, feasibility checking, delay model and objective.
//!
//! Solvers build [`PlacementSolution`]s; everything here only judges them.
//! Violations are values, not errors: a solution can be evaluated in any
//! state, and [`ModelError`] is reserved for malformed references.

mod check;
mod metrics;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, PathCatalog, PathId, ServerId, Topology};

pub use check::{check_feasibility, Violation, FEAS_TOL};
pub(crate) use metrics::processing_delay_bound_ok;
pub use metrics::{
    demand_delay, downtime, evaluate, link_utilization, objective, processing_delay, server_load, DelayBreakdown, MetricsReport,
    ObjectiveValue, ServerLoad,
};

/// Seconds per millisecond, for readability of the constants below.
const MS: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("SFC {0} does not exist")]
    UnknownSfc(usize),
    #[error("SFC {s} has no demand {demand}")]
    UnknownDemand { s: usize, demand: usize },
    #[error("SFC {s} has no VNF {v}")]
    UnknownVnf { s: usize, v: usize },
    #[error("server {0} does not exist")]
    UnknownServer(ServerId),
    #[error("path {0} does not exist")]
    UnknownPath(PathId),
    #[error("solution shape does not match the instance: {0}")]
    Shape(String),
    #[error("VNF {v} of SFC {s} is not hosted on server {server}")]
    NotHosted { s: usize, v: usize, server: ServerId },
    #[error("demand {demand} of SFC {s} is not routed")]
    Unrouted { s: usize, demand: usize },
    #[error("invalid service chain {s}: {reason}")]
    InvalidChain { s: usize, reason: String },
}

/// Per-VNF delay constants (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    /// Added at a load equal to the VNF's processing capacity.
    pub proq: f64,
    /// Added at full server utilization.
    pub prox: f64,
    /// Load-independent minimum.
    pub pro_x_min: f64,
    /// Upper bound on a single VNF's processing delay.
    pub pro_max: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self { proq: 3.0 * MS, prox: 5.0 * MS, pro_x_min: 2.0 * MS, pro_max: 10.0 * MS }
    }
}

/// Default per-migration service interruption (seconds).
pub const DEFAULT_DOWNTIME_S: f64 = 27.5 * MS;
/// Default end-to-end service delay limit (seconds).
pub const DEFAULT_MAX_DELAY_S: f64 = 400.0 * MS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfSpec {
    pub vnf_type: usize,
    /// Processing units per traffic unit.
    pub load_ratio: f64,
    /// Sync traffic per unit of SFC volume, see [`SyncVolume`].
    pub sync_ratio: f64,
    /// VM overhead per instance (processing units).
    pub overhead: f64,
    pub replicable: bool,
    pub delays: DelayParams,
    /// Processing load at which the queueing term reaches `delays.proq`.
    pub proc_capacity: f64,
}

impl VnfSpec {
    fn validate(&self) -> Result<(), String> {
        if !(self.load_ratio > 0.0 && self.load_ratio <= 1.0) {
            return Err(format!("load ratio {} outside (0, 1]", self.load_ratio));
        }
        if !(self.sync_ratio >= 0.0) || !(self.overhead >= 0.0) {
            return Err("sync ratio and overhead must be >= 0".into());
        }
        let d = &self.delays;
        if ![d.proq, d.prox, d.pro_x_min, d.pro_max].iter().all(|&x| x >= 0.0 && x.is_finite()) {
            return Err("delay constants must be finite and >= 0".into());
        }
        if d.pro_max < d.pro_x_min {
            return Err("pro_max must be >= pro_x_min".into());
        }
        if !(self.proc_capacity > 0.0) {
            return Err(format!("processing capacity {} must be > 0", self.proc_capacity));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceChain {
    pub src: NodeId,
    pub dst: NodeId,
    pub vnfs: Vec<VnfSpec>,
    pub demands: Vec<Demand>,
    pub max_delay_s: f64,
    /// Admissible paths, filled from the catalog when the instance is built.
    #[serde(default)]
    pub paths: Vec<PathId>,
}

impl ServiceChain {
    pub fn total_traffic(&self) -> f64 {
        self.demands.iter().map(|d| d.value).sum()
    }
}

/// Reading of the SFC volume multiplying the sync ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncVolume {
    /// Total offered traffic of the SFC (sum of demand values).
    #[default]
    TotalTraffic,
    /// Number of demands of the SFC.
    DemandCount,
}

/// A placement problem: topology, path catalog and service chains.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topology: Arc<Topology>,
    pub catalog: Arc<PathCatalog>,
    pub sfcs: Vec<ServiceChain>,
    pub sync_volume: SyncVolume,
    pub downtime_s: f64,
}

impl Instance {
    /// Validates the chains and attaches each one's admissible paths.
    pub fn new(topology: Arc<Topology>, catalog: Arc<PathCatalog>, mut sfcs: Vec<ServiceChain>) -> Result<Self, ModelError> {
        for (s, sfc) in sfcs.iter_mut().enumerate() {
            let bad = |reason: String| ModelError::InvalidChain { s, reason };
            if sfc.vnfs.is_empty() || sfc.vnfs.len() > 10 {
                return Err(bad(format!("chain length {} outside 1..=10", sfc.vnfs.len())));
            }
            if sfc.demands.is_empty() || sfc.demands.iter().any(|d| !(d.value > 0.0) || !d.value.is_finite()) {
                return Err(bad("demands must be non-empty and positive".into()));
            }
            if !(sfc.max_delay_s > 0.0) {
                return Err(bad("max delay must be positive".into()));
            }
            for v in &sfc.vnfs {
                v.validate().map_err(bad)?;
            }
            sfc.paths = catalog.admissible(sfc.src, sfc.dst).to_vec();
            if sfc.paths.is_empty() {
                return Err(bad(format!("no admissible paths between nodes {} and {}", sfc.src, sfc.dst)));
            }
        }
        Ok(Self { topology, catalog, sfcs, sync_volume: SyncVolume::default(), downtime_s: DEFAULT_DOWNTIME_S })
    }

    /// Same instance with demand values replaced (`values[s][demand]`).
    pub fn with_demand_values(&self, values: &[Vec<f64>]) -> Result<Self, ModelError> {
        if values.len() != self.sfcs.len() {
            return Err(ModelError::Shape(format!("{} SFC value lists for {} SFCs", values.len(), self.sfcs.len())));
        }
        let mut out = self.clone();
        for (s, (sfc, vals)) in out.sfcs.iter_mut().zip(values).enumerate() {
            if vals.len() != sfc.demands.len() {
                return Err(ModelError::Shape(format!("SFC {s}: {} values for {} demands", vals.len(), sfc.demands.len())));
            }
            for (d, &v) in sfc.demands.iter_mut().zip(vals) {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(ModelError::InvalidChain { s, reason: format!("demand value {v} must be positive") });
                }
                d.value = v;
            }
        }
        Ok(out)
    }

    /// Sync traffic carried per selected sync path of VNF `v` of SFC `s`.
    pub fn sync_traffic(&self, s: usize, v: usize) -> f64 {
        let sfc = &self.sfcs[s];
        let volume = match self.sync_volume {
            SyncVolume::TotalTraffic => sfc.total_traffic(),
            SyncVolume::DemandCount => sfc.demands.len() as f64,
        };
        sfc.vnfs[v].sync_ratio * volume
    }

    pub fn demand_count(&self) -> usize {
        self.sfcs.iter().map(|s| s.demands.len()).sum()
    }

    pub fn vnf_count(&self) -> usize {
        self.sfcs.iter().map(|s| s.vnfs.len()).sum()
    }

    /// Node position of server `x` on path `p`, if `x` lies on it.
    pub fn server_position(&self, p: PathId, x: ServerId) -> Option<usize> {
        self.catalog.path(p).node_position(self.topology.server(x).node)
    }
}

/// All decision variables of one placement phase. Entries are `None` while
/// a solver is still building the solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementSolution {
    /// `[s][demand]` path of each demand.
    pub demand_path: Vec<Vec<Option<PathId>>>,
    /// `[s][v]` servers hosting an instance of VNF `v`.
    pub vnf_servers: Vec<Vec<BTreeSet<ServerId>>>,
    /// `[s][v][demand]` instance serving each demand.
    pub demand_vnf_server: Vec<Vec<Vec<Option<ServerId>>>>,
    /// `[s][v]` paths carrying replica synchronization traffic.
    pub sync_paths: Vec<Vec<BTreeSet<PathId>>>,
}

impl PlacementSolution {
    pub fn empty(inst: &Instance) -> Self {
        Self {
            demand_path: inst.sfcs.iter().map(|s| vec![None; s.demands.len()]).collect(),
            vnf_servers: inst.sfcs.iter().map(|s| vec![BTreeSet::new(); s.vnfs.len()]).collect(),
            demand_vnf_server: inst.sfcs.iter().map(|s| vec![vec![None; s.demands.len()]; s.vnfs.len()]).collect(),
            sync_paths: inst.sfcs.iter().map(|s| vec![BTreeSet::new(); s.vnfs.len()]).collect(),
        }
    }

    /// Checks that every index vector matches the instance and every id
    /// refers to an existing server or path.
    pub fn validate_shape(&self, inst: &Instance) -> Result<(), ModelError> {
        let n = inst.sfcs.len();
        if self.demand_path.len() != n || self.vnf_servers.len() != n || self.demand_vnf_server.len() != n || self.sync_paths.len() != n {
            return Err(ModelError::Shape(format!("expected {n} SFCs")));
        }
        let servers = inst.topology.servers().len();
        let paths = inst.catalog.paths().len();
        for (s, sfc) in inst.sfcs.iter().enumerate() {
            let (nv, nd) = (sfc.vnfs.len(), sfc.demands.len());
            if self.demand_path[s].len() != nd || self.vnf_servers[s].len() != nv || self.sync_paths[s].len() != nv {
                return Err(ModelError::Shape(format!("SFC {s}")));
            }
            if self.demand_vnf_server[s].len() != nv || self.demand_vnf_server[s].iter().any(|d| d.len() != nd) {
                return Err(ModelError::Shape(format!("SFC {s} demand/VNF map")));
            }
            for p in self.demand_path[s].iter().flatten().chain(self.sync_paths[s].iter().flatten()) {
                if p.0 >= paths {
                    return Err(ModelError::UnknownPath(*p));
                }
            }
            let hosted = self.vnf_servers[s].iter().flatten();
            for x in hosted.chain(self.demand_vnf_server[s].iter().flatten().flatten()) {
                if x.0 >= servers {
                    return Err(ModelError::UnknownServer(*x));
                }
            }
        }
        Ok(())
    }

    /// Instance counts per `(s, v)`.
    pub fn instance_count(&self, s: usize, v: usize) -> usize {
        self.vnf_servers[s][v].len()
    }
}

/// Servers hosting each VNF in the previous phase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorPlacement {
    /// `[s][v]` servers.
    pub vnf_servers: Vec<Vec<BTreeSet<ServerId>>>,
}

impl PriorPlacement {
    pub fn servers(&self, s: usize, v: usize) -> Option<&BTreeSet<ServerId>> {
        self.vnf_servers.get(s).and_then(|x| x.get(v))
    }
}

/// Copies the hosting servers of a solution into a prior placement.
pub fn to_prior(sol: &PlacementSolution) -> PriorPlacement {
    PriorPlacement { vnf_servers: sol.vnf_servers.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Migrations,
    Replications,
    Cloud,
}

/// Weights of migrations, replications and cloud VNFs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub migrations: f64,
    pub replications: f64,
    pub cloud: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self::joint()
    }
}

impl ObjectiveWeights {
    pub fn joint() -> Self {
        Self { migrations: 1.0, replications: 1.0, cloud: 1.0 }
    }

    /// `main` gets weight 1; every other term gets `1 / (2 (1 + U))` where
    /// `U` bounds that term's count, so all secondary terms together stay
    /// below 1 and never outweigh one unit of the main term.
    pub fn single_term(main: Term, inst: &Instance) -> Self {
        let vnfs = inst.vnf_count() as f64;
        let servers = inst.topology.servers().len() as f64;
        let bound = |t: Term| match t {
            // every VNF can abandon every prior server at most once
            Term::Migrations => vnfs * servers,
            Term::Replications => vnfs * (servers - 1.0).max(0.0),
            Term::Cloud => vnfs * inst.topology.cloud_servers().len() as f64,
        };
        let w = |t: Term| if t == main { 1.0 } else { 1.0 / (2.0 * (1.0 + bound(t))) };
        Self { migrations: w(Term::Migrations), replications: w(Term::Replications), cloud: w(Term::Cloud) }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self { migrations: self.migrations * k, replications: self.replications * k, cloud: self.cloud * k }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::topology::{build_topology, CloudSpec, LinkSpec, NodeSpec, PathPolicy, TopologySpec};

    /// Two edge nodes 100 km apart plus a cloud, single servers.
    pub fn line_topology(link_cap: f64, server_cap: f64) -> Arc<Topology> {
        let spec = TopologySpec {
            name: None,
            nodes: vec![
                NodeSpec { id: "a".into(), lat: 52.0, lon: 10.0, servers: 1, server_capacity: server_cap },
                NodeSpec { id: "b".into(), lat: 52.0, lon: 11.0, servers: 1, server_capacity: server_cap },
            ],
            links: vec![
                LinkSpec { src: "a".into(), dst: "b".into(), capacity: link_cap },
                LinkSpec { src: "b".into(), dst: "a".into(), capacity: link_cap },
            ],
            cloud: CloudSpec { id: "cloud".into(), lat: 50.0, lon: 8.0, servers: 1 },
        };
        Arc::new(build_topology(&spec).unwrap())
    }

    pub fn vnf(load_ratio: f64, overhead: f64) -> VnfSpec {
        VnfSpec {
            vnf_type: 0,
            load_ratio,
            sync_ratio: 0.1,
            overhead,
            replicable: true,
            delays: DelayParams::default(),
            proc_capacity: 1000.0,
        }
    }

    /// One SFC a -> b on the two-node line with the given chain and demands.
    pub fn line_instance(vnfs: Vec<VnfSpec>, demands: &[f64], link_cap: f64, server_cap: f64) -> Instance {
        let topo = line_topology(link_cap, server_cap);
        let cat = Arc::new(PathCatalog::build(&topo, [(NodeId(0), NodeId(1))], PathPolicy::lenient()).unwrap());
        let sfc = ServiceChain {
            src: NodeId(0),
            dst: NodeId(1),
            vnfs,
            demands: demands.iter().map(|&value| Demand { value }).collect(),
            max_delay_s: DEFAULT_MAX_DELAY_S,
            paths: vec![],
        };
        Instance::new(topo, cat, vec![sfc]).unwrap()
    }

    /// Routes every demand of SFC 0 over path `p`, every VNF on `x`.
    pub fn all_on(inst: &Instance, p: PathId, x: ServerId) -> PlacementSolution {
        let mut sol = PlacementSolution::empty(inst);
        for (s, sfc) in inst.sfcs.iter().enumerate() {
            for d in 0..sfc.demands.len() {
                sol.demand_path[s][d] = Some(p);
                for v in 0..sfc.vnfs.len() {
                    sol.demand_vnf_server[s][v][d] = Some(x);
                    sol.vnf_servers[s][v].insert(x);
                }
            }
        }
        sol
    }
}
