//! Feasibility checking.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::metrics::Loads;
use super::{Instance, ModelError, PlacementSolution, PriorPlacement};
use crate::topology::{LinkId, NodeId, PathId, ServerId};

/// Absolute slack allowed on capacity and delay limits.
pub const FEAS_TOL: f64 = 1e-9;

/// One broken constraint. Indices are `(s, demand, v)` positions in the
/// instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A demand has no path.
    UnroutedDemand {
        s: usize,
        demand: usize,
    },
    /// A demand uses a path outside the SFC's admissible set.
    PathNotAdmissible {
        s: usize,
        demand: usize,
        path: PathId,
    },
    /// A demand is not mapped to any instance of a VNF.
    UnassignedVnf {
        s: usize,
        v: usize,
        demand: usize,
    },
    /// A demand's VNF instance is not on the demand's path.
    ServerOffPath {
        s: usize,
        v: usize,
        demand: usize,
        server: ServerId,
    },
    /// The instance set differs from the servers actually used by demands.
    InstanceSetMismatch {
        s: usize,
        v: usize,
    },
    /// A non-replicable VNF has more than one instance.
    NotReplicable {
        s: usize,
        v: usize,
        instances: usize,
    },
    /// More instances than paths used by the SFC.
    TooManyReplicas {
        s: usize,
        v: usize,
        instances: usize,
        active_paths: usize,
    },
    /// VNF `v` sits at an earlier node than VNF `v - 1` on the demand's path.
    OrderViolated {
        s: usize,
        demand: usize,
        v: usize,
    },
    /// A replica on another node has no synchronization path.
    MissingSyncPath {
        s: usize,
        v: usize,
        from: NodeId,
        to: NodeId,
    },
    /// More than one synchronization path between the same node pair.
    DuplicateSyncPath {
        s: usize,
        v: usize,
        from: NodeId,
        to: NodeId,
    },
    /// A synchronization path that no replica pair needs, or that is not a
    /// synchronization path of the catalog.
    UnusedSyncPath {
        s: usize,
        v: usize,
        path: PathId,
    },
    LinkOverloaded {
        link: LinkId,
        utilization: f64,
    },
    ServerOverloaded {
        server: ServerId,
        utilization: f64,
    },
    ProcessingDelayExceeded {
        s: usize,
        v: usize,
        server: ServerId,
        delay_s: f64,
        max_s: f64,
    },
    ServiceDelayExceeded {
        s: usize,
        demand: usize,
        delay_s: f64,
        max_s: f64,
    },
}

/// Lists every constraint `sol` breaks; an empty list means feasible.
///
/// Replica synchronization follows the original-to-replica reading: the
/// lowest-id instance is the original, and every other node hosting an
/// instance needs exactly one catalog sync path from the original's node.
pub fn check_feasibility(sol: &PlacementSolution, inst: &Instance, prior: Option<&PriorPlacement>) -> Result<Vec<Violation>, ModelError> {
    sol.validate_shape(inst)?;
    let topo = &inst.topology;
    let mut out = Vec::new();

    for (s, sfc) in inst.sfcs.iter().enumerate() {
        let mut active = BTreeSet::new();
        for d in 0..sfc.demands.len() {
            match sol.demand_path[s][d] {
                None => out.push(Violation::UnroutedDemand { s, demand: d }),
                Some(p) => {
                    active.insert(p);
                    if !sfc.paths.contains(&p) {
                        out.push(Violation::PathNotAdmissible { s, demand: d, path: p });
                    }
                }
            }
        }

        for v in 0..sfc.vnfs.len() {
            let mut used = BTreeSet::new();
            for d in 0..sfc.demands.len() {
                let Some(x) = sol.demand_vnf_server[s][v][d] else {
                    out.push(Violation::UnassignedVnf { s, v, demand: d });
                    continue;
                };
                used.insert(x);
                if let Some(p) = sol.demand_path[s][d] {
                    if !inst.catalog.path(p).contains_server(x) {
                        out.push(Violation::ServerOffPath { s, v, demand: d, server: x });
                    }
                }
            }
            if used != sol.vnf_servers[s][v] {
                out.push(Violation::InstanceSetMismatch { s, v });
            }
            let instances = sol.vnf_servers[s][v].len();
            if !sfc.vnfs[v].replicable && instances > 1 {
                out.push(Violation::NotReplicable { s, v, instances });
            } else if sfc.vnfs[v].replicable && instances > active.len().max(1) {
                out.push(Violation::TooManyReplicas { s, v, instances, active_paths: active.len() });
            }
        }

        for d in 0..sfc.demands.len() {
            let Some(p) = sol.demand_path[s][d] else { continue };
            let pos = |v: usize| sol.demand_vnf_server[s][v][d].and_then(|x| inst.server_position(p, x));
            for v in 1..sfc.vnfs.len() {
                if let (Some(a), Some(b)) = (pos(v - 1), pos(v)) {
                    if b < a {
                        out.push(Violation::OrderViolated { s, demand: d, v });
                    }
                }
            }
        }

        for v in 0..sfc.vnfs.len() {
            check_sync(sol, inst, s, v, &mut out);
        }
    }

    let loads = Loads::compute(sol, inst);
    for (l, u) in loads.link_utilization(inst).into_iter().enumerate() {
        if !topo.links()[l].touches_cloud && u > 1.0 + FEAS_TOL {
            out.push(Violation::LinkOverloaded { link: LinkId(l), utilization: u });
        }
    }
    for (x, u) in loads.server_utilization(inst).into_iter().enumerate() {
        if u > 1.0 + FEAS_TOL {
            out.push(Violation::ServerOverloaded { server: ServerId(x), utilization: u });
        }
    }

    for (s, sfc) in inst.sfcs.iter().enumerate() {
        for (v, vnf) in sfc.vnfs.iter().enumerate() {
            for &x in &sol.vnf_servers[s][v] {
                let delay_s = loads.processing_delay(inst, s, v, x).unwrap_or(0.0);
                if delay_s > vnf.delays.pro_max + FEAS_TOL {
                    out.push(Violation::ProcessingDelayExceeded { s, v, server: x, delay_s, max_s: vnf.delays.pro_max });
                }
            }
        }
        let downtime = super::downtime(sol, inst, prior, s);
        for d in 0..sfc.demands.len() {
            let Some(p) = sol.demand_path[s][d] else { continue };
            let mut delay_s = inst.catalog.path(p).delay_s;
            let mut complete = true;
            for v in 0..sfc.vnfs.len() {
                match sol.demand_vnf_server[s][v][d].and_then(|x| loads.processing_delay(inst, s, v, x)) {
                    Some(t) => delay_s += t,
                    None => complete = false,
                }
            }
            delay_s += downtime;
            if complete && delay_s > sfc.max_delay_s + FEAS_TOL {
                out.push(Violation::ServiceDelayExceeded { s, demand: d, delay_s, max_s: sfc.max_delay_s });
            }
        }
    }
    Ok(out)
}

fn check_sync(sol: &PlacementSolution, inst: &Instance, s: usize, v: usize, out: &mut Vec<Violation>) {
    let topo = &inst.topology;
    let servers = &sol.vnf_servers[s][v];
    let chosen = &sol.sync_paths[s][v];
    let Some(&original) = servers.iter().next() else {
        out.extend(chosen.iter().map(|&path| Violation::UnusedSyncPath { s, v, path }));
        return;
    };
    let from = topo.server(original).node;
    let targets: BTreeSet<NodeId> = servers.iter().map(|&x| topo.server(x).node).filter(|&m| m != from).collect();
    for &to in &targets {
        let n = chosen.iter().filter(|&&p| inst.catalog.path(p).src == from && inst.catalog.path(p).dst == to).count();
        match n {
            0 => out.push(Violation::MissingSyncPath { s, v, from, to }),
            1 => {}
            _ => out.push(Violation::DuplicateSyncPath { s, v, from, to }),
        }
    }
    for &path in chosen {
        let p = inst.catalog.path(path);
        let listed = inst.catalog.sync_paths(p.src, p.dst).contains(&path);
        if p.src != from || !targets.contains(&p.dst) || !listed {
            out.push(Violation::UnusedSyncPath { s, v, path });
        }
    }
}
