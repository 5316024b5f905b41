//! Utilization, delay and objective evaluation.

use serde::{Deserialize, Serialize};

use super::{check_feasibility, Instance, ModelError, ObjectiveWeights, PlacementSolution, PriorPlacement, Violation};
use crate::topology::ServerId;

/// Offered load per link and server plus, per `(s, v)`, the traffic each
/// hosting server processes.
#[derive(Debug, Clone)]
pub(crate) struct Loads {
    pub link: Vec<f64>,
    pub server: Vec<f64>,
    /// `[s][v]` list of `(server, assigned traffic)`.
    pub assigned: Vec<Vec<Vec<(ServerId, f64)>>>,
}

impl Loads {
    pub fn compute(sol: &PlacementSolution, inst: &Instance) -> Self {
        let topo = &inst.topology;
        let mut link = vec![0.0; topo.links().len()];
        let mut server = vec![0.0; topo.servers().len()];
        let mut assigned = Vec::with_capacity(inst.sfcs.len());
        for (s, sfc) in inst.sfcs.iter().enumerate() {
            for (d, dem) in sfc.demands.iter().enumerate() {
                if let Some(p) = sol.demand_path[s][d] {
                    for &l in &inst.catalog.path(p).links {
                        link[l.0] += dem.value;
                    }
                }
            }
            let mut per_v = Vec::with_capacity(sfc.vnfs.len());
            for (v, vnf) in sfc.vnfs.iter().enumerate() {
                let sync = inst.sync_traffic(s, v);
                for &p in &sol.sync_paths[s][v] {
                    for &l in &inst.catalog.path(p).links {
                        link[l.0] += sync;
                    }
                }
                let mut hosts: Vec<(ServerId, f64)> = sol.vnf_servers[s][v].iter().map(|&x| (x, 0.0)).collect();
                for (d, dem) in sfc.demands.iter().enumerate() {
                    if let Some(x) = sol.demand_vnf_server[s][v][d] {
                        match hosts.iter_mut().find(|h| h.0 == x) {
                            Some(h) => h.1 += dem.value,
                            None => hosts.push((x, dem.value)),
                        }
                    }
                }
                for &(x, traffic) in &hosts {
                    server[x.0] += vnf.load_ratio * traffic;
                    if sol.vnf_servers[s][v].contains(&x) {
                        server[x.0] += vnf.overhead;
                    }
                }
                per_v.push(hosts);
            }
            assigned.push(per_v);
        }
        Self { link, server, assigned }
    }

    pub fn link_utilization(&self, inst: &Instance) -> Vec<f64> {
        self.link.iter().zip(inst.topology.links()).map(|(&load, l)| load / l.capacity).collect()
    }

    pub fn server_utilization(&self, inst: &Instance) -> Vec<f64> {
        self.server.iter().zip(inst.topology.servers()).map(|(&load, x)| load / x.capacity).collect()
    }

    pub fn assigned_traffic(&self, s: usize, v: usize, x: ServerId) -> Option<f64> {
        self.assigned[s][v].iter().find(|h| h.0 == x).map(|h| h.1)
    }

    /// Processing delay of `(s, v)` on `x` given its assigned traffic.
    pub fn processing_delay(&self, inst: &Instance, s: usize, v: usize, x: ServerId) -> Option<f64> {
        let traffic = self.assigned_traffic(s, v, x)?;
        let vnf = &inst.sfcs[s].vnfs[v];
        let u = self.server[x.0] / inst.topology.server(x).capacity;
        Some(processing_delay_formula(vnf, traffic, u))
    }
}

pub(crate) fn processing_delay_formula(vnf: &super::VnfSpec, traffic: f64, u: f64) -> f64 {
    let d = &vnf.delays;
    d.proq * (vnf.load_ratio * traffic / vnf.proc_capacity) + d.pro_x_min + d.prox * u
}

/// Whether a VNF processing `traffic` on a server at utilization `u` stays
/// within `pro_max * (1 + slack)`.
pub(crate) fn processing_delay_bound_ok(vnf: &super::VnfSpec, traffic: f64, u: f64, slack: f64) -> bool {
    processing_delay_formula(vnf, traffic, u) <= vnf.delays.pro_max * (1.0 + slack)
}

/// Per-link utilization `u_l`, cloud links included (their capacity is
/// unbounded, so they always report 0).
pub fn link_utilization(sol: &PlacementSolution, inst: &Instance) -> Vec<f64> {
    Loads::compute(sol, inst).link_utilization(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerLoad {
    /// Processing load `gamma_x`.
    pub load: Vec<f64>,
    /// `gamma_x / C_x`.
    pub utilization: Vec<f64>,
}

pub fn server_load(sol: &PlacementSolution, inst: &Instance) -> ServerLoad {
    let loads = Loads::compute(sol, inst);
    let utilization = loads.server_utilization(inst);
    ServerLoad { load: loads.server, utilization }
}

/// Processing delay (seconds) of VNF `v` of SFC `s` on server `x`.
pub fn processing_delay(sol: &PlacementSolution, inst: &Instance, s: usize, v: usize, x: ServerId) -> Result<f64, ModelError> {
    check_vnf(inst, s, v)?;
    if !sol.vnf_servers[s][v].contains(&x) {
        return Err(ModelError::NotHosted { s, v, server: x });
    }
    let loads = Loads::compute(sol, inst);
    Ok(loads.processing_delay(inst, s, v, x).expect("hosted servers are listed"))
}

fn check_vnf(inst: &Instance, s: usize, v: usize) -> Result<(), ModelError> {
    let sfc = inst.sfcs.get(s).ok_or(ModelError::UnknownSfc(s))?;
    if v >= sfc.vnfs.len() {
        return Err(ModelError::UnknownVnf { s, v });
    }
    Ok(())
}

fn migrations_of(sol: &PlacementSolution, prior: Option<&PriorPlacement>, s: usize) -> usize {
    let Some(prior) = prior else { return 0 };
    (0..sol.vnf_servers[s].len()).map(|v| prior.servers(s, v).map_or(0, |old| old.difference(&sol.vnf_servers[s][v]).count())).sum()
}

/// Service downtime of SFC `s`: one interruption per abandoned prior
/// instance. Zero without a prior placement.
pub fn downtime(sol: &PlacementSolution, inst: &Instance, prior: Option<&PriorPlacement>, s: usize) -> f64 {
    inst.downtime_s * migrations_of(sol, prior, s) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub propagation_s: f64,
    pub processing_s: f64,
    pub downtime_s: f64,
    pub total_s: f64,
}

fn demand_delay_with(
    loads: &Loads,
    sol: &PlacementSolution,
    inst: &Instance,
    prior: Option<&PriorPlacement>,
    s: usize,
    d: usize,
) -> Result<DelayBreakdown, ModelError> {
    let p = sol.demand_path[s][d].ok_or(ModelError::Unrouted { s, demand: d })?;
    let propagation_s = inst.catalog.path(p).delay_s;
    let mut processing_s = 0.0;
    for v in 0..inst.sfcs[s].vnfs.len() {
        let x = sol.demand_vnf_server[s][v][d].ok_or(ModelError::Unrouted { s, demand: d })?;
        processing_s += loads.processing_delay(inst, s, v, x).ok_or(ModelError::NotHosted { s, v, server: x })?;
    }
    let downtime_s = downtime(sol, inst, prior, s);
    Ok(DelayBreakdown { propagation_s, processing_s, downtime_s, total_s: propagation_s + processing_s + downtime_s })
}

/// End-to-end delay of demand `d` of SFC `s`: propagation along its path,
/// processing at each of its VNF instances, and the SFC's downtime.
pub fn demand_delay(
    sol: &PlacementSolution,
    inst: &Instance,
    prior: Option<&PriorPlacement>,
    s: usize,
    d: usize,
) -> Result<DelayBreakdown, ModelError> {
    let sfc = inst.sfcs.get(s).ok_or(ModelError::UnknownSfc(s))?;
    if d >= sfc.demands.len() {
        return Err(ModelError::UnknownDemand { s, demand: d });
    }
    sol.validate_shape(inst)?;
    demand_delay_with(&Loads::compute(sol, inst), sol, inst, prior, s, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub migrations: usize,
    pub replications: usize,
    pub cloud_vnfs: usize,
}

/// Weighted count of migrations (abandoned prior instances), replications
/// (instances beyond the first) and instances on cloud servers.
pub fn objective(sol: &PlacementSolution, inst: &Instance, prior: Option<&PriorPlacement>, weights: &ObjectiveWeights) -> ObjectiveValue {
    let mut migrations = 0;
    let mut replications = 0;
    let mut cloud_vnfs = 0;
    for s in 0..sol.vnf_servers.len() {
        migrations += migrations_of(sol, prior, s);
        for servers in &sol.vnf_servers[s] {
            replications += servers.len().saturating_sub(1);
            cloud_vnfs += servers.iter().filter(|&&x| inst.topology.server(x).is_cloud).count();
        }
    }
    let value = weights.migrations * migrations as f64 + weights.replications * replications as f64 + weights.cloud * cloud_vnfs as f64;
    ObjectiveValue { value, migrations, replications, cloud_vnfs }
}

/// Everything measurable about one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub objective: ObjectiveValue,
    pub link_utilization: Vec<f64>,
    pub server_load: Vec<f64>,
    pub server_utilization: Vec<f64>,
    /// `[s][demand]`, `None` for demands that are not fully placed.
    pub demand_delays: Vec<Vec<Option<DelayBreakdown>>>,
    pub violations: Vec<Violation>,
    /// Mean over non-cloud links.
    pub mean_link_util: f64,
    /// Mean over non-cloud servers.
    pub mean_server_util: f64,
    /// Mean end-to-end delay over fully placed demands (milliseconds).
    pub mean_delay_ms: f64,
}

impl MetricsReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate(
    sol: &PlacementSolution,
    inst: &Instance,
    prior: Option<&PriorPlacement>,
    weights: &ObjectiveWeights,
) -> Result<MetricsReport, ModelError> {
    let violations = check_feasibility(sol, inst, prior)?;
    let loads = Loads::compute(sol, inst);
    let link_utilization = loads.link_utilization(inst);
    let server_utilization = loads.server_utilization(inst);
    let topo = &inst.topology;
    let demand_delays: Vec<Vec<Option<DelayBreakdown>>> = inst
        .sfcs
        .iter()
        .enumerate()
        .map(|(s, sfc)| (0..sfc.demands.len()).map(|d| demand_delay_with(&loads, sol, inst, prior, s, d).ok()).collect())
        .collect();
    let mean_link_util = mean(topo.links().iter().zip(&link_utilization).filter(|(l, _)| !l.touches_cloud).map(|(_, &u)| u));
    let mean_server_util = mean(topo.servers().iter().zip(&server_utilization).filter(|(x, _)| !x.is_cloud).map(|(_, &u)| u));
    let mean_delay_ms = mean(demand_delays.iter().flatten().flatten().map(|d| d.total_s * 1e3));
    Ok(MetricsReport {
        objective: objective(sol, inst, prior, weights),
        link_utilization,
        server_load: loads.server,
        server_utilization,
        demand_delays,
        violations,
        mean_link_util,
        mean_server_util,
        mean_delay_ms,
    })
}
