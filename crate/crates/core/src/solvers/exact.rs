//! Exact depth-first branch-and-bound for small instances.
//!
//! Demands are branched SFC by SFC: first the path, then one server per VNF
//! at or after the previous VNF's node. Prunes only use monotone facts
//! (loads and instance sets only grow along a branch), and every leaf is
//! accepted by the full feasibility checker, so the result is a true
//! optimum of the checker's model. Ties keep the first solution found.

use std::time::Instant;

use super::state::PlacementState;
use super::{finish, ExactLimits, SolveError, SolveRequest, SolveResult, SolveStats, SolveStatus, SolverKind};
use crate::model::{check_feasibility, Instance, PlacementSolution};
use crate::topology::{NodeId, PathId, ServerId};

/// Relative slack of the capacity prunes; the leaf check decides.
const PRUNE_SLACK: f64 = 1e-6;
const BOUND_EPS: f64 = 1e-9;

fn check_limits(inst: &Instance, limits: &ExactLimits) -> Result<(), SolveError> {
    let guard = |what, value: usize, limit: usize| {
        if value > limit {
            Err(SolveError::LimitsExceeded { what, value, limit })
        } else {
            Ok(())
        }
    };
    guard("demands", inst.demand_count(), limits.max_demands)?;
    guard("paths per SFC", inst.sfcs.iter().map(|s| s.paths.len()).max().unwrap_or(0), limits.max_paths)?;
    guard("servers", inst.topology.servers().len(), limits.max_servers)
}

struct Search<'a> {
    st: PlacementState<'a>,
    req: &'a SolveRequest<'a>,
    order: Vec<(usize, usize)>,
    best: Option<(f64, PlacementSolution)>,
    nodes: u64,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.req.limits.node_budget {
            self.exhausted = true;
        }
        !self.exhausted
    }

    /// Objective lower bound: replication and cloud counts never shrink
    /// along a branch, and migrations are final once an SFC is complete.
    fn bound(&self, complete_sfcs: usize) -> f64 {
        let w = &self.req.weights;
        let topo = &self.st.inst.topology;
        let mut value = 0.0;
        for (s, vnfs) in self.st.sol.vnf_servers.iter().enumerate() {
            for (v, servers) in vnfs.iter().enumerate() {
                value += w.replications * servers.len().saturating_sub(1) as f64;
                value += w.cloud * servers.iter().filter(|&&x| topo.server(x).is_cloud).count() as f64;
                if s < complete_sfcs {
                    if let Some(old) = self.req.prior.and_then(|f| f.servers(s, v)) {
                        value += w.migrations * old.difference(servers).count() as f64;
                    }
                }
            }
        }
        value
    }

    fn beaten(&self, bound: f64) -> bool {
        self.best.as_ref().is_some_and(|(b, _)| bound >= b - BOUND_EPS)
    }

    /// Instance-count prune: a new instance needs the VNF to be replicable
    /// and enough paths to be still possible for the SFC.
    fn may_open(&self, s: usize, v: usize, d: usize, x: ServerId, p: PathId) -> bool {
        let st = &self.st;
        if st.hosts(s, v, x) {
            return true;
        }
        let count = st.sol.vnf_servers[s][v].len();
        if count == 0 {
            return true;
        }
        if !st.inst.sfcs[s].vnfs[v].replicable {
            return false;
        }
        let later = st.inst.sfcs[s].demands.len() - d - 1;
        count < st.active_paths(s, Some(p)) + later
    }

    fn sfc_counts_ok(&self, s: usize) -> bool {
        let active = self.st.active_paths(s, None).max(1);
        self.st.sol.vnf_servers[s].iter().all(|x| x.len() <= active)
    }

    fn demand(&mut self, k: usize) {
        if !self.tick() {
            return;
        }
        if k == self.order.len() {
            self.leaf();
            return;
        }
        let (s, d) = self.order[k];
        let value = self.st.inst.sfcs[s].demands[d].value;
        let paths = self.st.inst.sfcs[s].paths.clone();
        for p in paths {
            if self.exhausted {
                return;
            }
            if !self.st.path_fits(p, value, PRUNE_SLACK) {
                continue;
            }
            let mark = self.st.mark();
            self.st.route(s, d, p);
            self.vnf(k, s, d, p, 0, 0);
            self.st.rollback(mark);
        }
    }

    fn vnf(&mut self, k: usize, s: usize, d: usize, p: PathId, v: usize, min_pos: usize) {
        let inst = self.st.inst;
        if v == inst.sfcs[s].vnfs.len() {
            let complete = d + 1 == inst.sfcs[s].demands.len();
            if complete && !self.sfc_counts_ok(s) {
                return;
            }
            let done = if complete { s + 1 } else { s };
            if !self.beaten(self.bound(done)) {
                self.demand(k + 1);
            }
            return;
        }
        let path = inst.catalog.path(p);
        for &x in &path.servers {
            if self.exhausted {
                return;
            }
            let pos = inst.server_position(p, x).unwrap();
            if pos < min_pos || !self.may_open(s, v, d, x, p) || !self.st.server_fits(s, v, d, x, PRUNE_SLACK) {
                continue;
            }
            let mark = self.st.mark();
            self.st.assign(s, v, d, x);
            if !self.beaten(self.bound(s)) {
                self.vnf(k, s, d, p, v + 1, pos);
            }
            self.st.rollback(mark);
        }
    }

    /// All demands are placed; search sync paths until the checker accepts.
    fn leaf(&mut self) {
        let inst = self.st.inst;
        let value = self.bound(inst.sfcs.len());
        if self.beaten(value) {
            return;
        }
        let mut needs: Vec<(usize, usize, NodeId, NodeId)> = Vec::new();
        for (s, sfc) in inst.sfcs.iter().enumerate() {
            for v in 0..sfc.vnfs.len() {
                needs.extend(self.st.sync_pairs(s, v).into_iter().map(|(a, b)| (s, v, a, b)));
            }
        }
        if self.sync(&needs, 0) {
            self.best = Some((value, self.st.sol.clone()));
        }
    }

    fn sync(&mut self, needs: &[(usize, usize, NodeId, NodeId)], i: usize) -> bool {
        if i == needs.len() {
            if !self.tick() {
                return false;
            }
            return check_feasibility(&self.st.sol, self.st.inst, self.req.prior).map(|v| v.is_empty()).unwrap_or(false);
        }
        let (s, v, from, to) = needs[i];
        let amount = self.st.inst.sync_traffic(s, v);
        let options = self.st.inst.catalog.sync_paths(from, to).to_vec();
        for p in options {
            if self.exhausted {
                return false;
            }
            if !self.st.path_fits(p, amount, PRUNE_SLACK) {
                continue;
            }
            let mark = self.st.mark();
            self.st.add_sync(s, v, p);
            if self.sync(needs, i + 1) {
                // keep the accepted sync paths in the state for the caller
                return true;
            }
            self.st.rollback(mark);
        }
        false
    }
}

/// Optimal placement by exhaustive search with bounding.
///
/// Refuses instances beyond `req.limits`. When the node budget runs out the
/// best solution so far is returned with status heuristic.
pub fn solve_exact(req: &SolveRequest) -> Result<SolveResult, SolveError> {
    req.validate()?;
    let inst = req.instance;
    check_limits(inst, &req.limits)?;
    let started = Instant::now();
    let order = inst.sfcs.iter().enumerate().flat_map(|(s, sfc)| (0..sfc.demands.len()).map(move |d| (s, d))).collect();
    let mut search = Search { st: PlacementState::new(inst), req, order, best: None, nodes: 0, exhausted: false };
    search.demand(0);
    let stats = SolveStats { nodes_explored: search.nodes, ..SolveStats::default() };
    let (solution, status) = match search.best.take() {
        Some((_, sol)) if search.exhausted => (sol, SolveStatus::Heuristic),
        Some((_, sol)) => (sol, SolveStatus::Optimal),
        None => (PlacementSolution::empty(inst), SolveStatus::Infeasible),
    };
    finish(req, SolverKind::Exact, solution, status, stats, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::model::{to_prior, ObjectiveWeights};
    use crate::solvers::random_small_instance as small_instance;
    use crate::solvers::{solve_greedy, SolveRequest};

    #[test]
    fn toy_optimum_is_zero() {
        let inst = line_instance(vec![vnf(0.5, 1.0), vnf(0.5, 1.0)], &[100.0, 50.0], 500.0, 1000.0);
        let r = solve_exact(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.metrics.objective.value, 0.0);
        assert_eq!(r.metrics.objective.replications, 0);
        assert_eq!(r.metrics.objective.cloud_vnfs, 0);
    }

    #[test]
    fn overloaded_edge_forces_one_replica() {
        // 60 + 60 units do not fit one 100-unit server; the second demand
        // goes to the other edge server, so one replication is optimal
        let inst = line_instance(vec![vnf(1.0, 0.0)], &[60.0, 60.0], 500.0, 100.0);
        let r = solve_exact(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{:?}", r.metrics.violations);
        assert_eq!(r.metrics.objective.replications, 1);
        assert_eq!(r.metrics.objective.cloud_vnfs, 0);
        assert_eq!(r.solution.sync_paths[0][0].len(), 1);
    }

    #[test]
    fn non_replicable_overflow_goes_to_cloud() {
        let mut f = vnf(1.0, 0.0);
        f.replicable = false;
        let inst = line_instance(vec![f], &[60.0, 60.0], 500.0, 100.0);
        let r = solve_exact(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.metrics.objective.cloud_vnfs, 1);
        assert_eq!(r.metrics.objective.replications, 0);
    }

    #[test]
    fn migration_is_avoided_when_possible() {
        let inst = line_instance(vec![vnf(0.5, 1.0)], &[50.0], 500.0, 1000.0);
        let prev = all_on(&inst, inst.sfcs[0].paths[0], ServerId(1));
        let prior = to_prior(&prev);
        let r = solve_exact(&SolveRequest::second_phase(&inst, &prior, Some(&prev), ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.metrics.objective.value, 0.0);
        assert_eq!(r.solution.vnf_servers[0][0].iter().next(), Some(&ServerId(1)));
    }

    #[test]
    fn limits_are_enforced() {
        let inst = line_instance(vec![vnf(0.5, 1.0)], &[1.0, 2.0, 3.0], 500.0, 1000.0);
        let mut req = SolveRequest::first_phase(&inst, ObjectiveWeights::joint());
        req.limits.max_demands = 2;
        assert!(matches!(solve_exact(&req), Err(SolveError::LimitsExceeded { what: "demands", .. })));
    }

    #[test]
    fn budget_exhaustion_downgrades_status() {
        let inst = line_instance(vec![vnf(0.5, 1.0), vnf(0.5, 1.0)], &[10.0, 20.0, 30.0], 500.0, 1000.0);
        let mut req = SolveRequest::first_phase(&inst, ObjectiveWeights::joint());
        req.limits.node_budget = 3;
        let r = solve_exact(&req).unwrap();
        assert_ne!(r.status, SolveStatus::Optimal);
    }

    #[test]
    fn exact_never_worse_than_greedy() {
        for seed in 0..40 {
            let inst = small_instance(seed);
            let req = SolveRequest::first_phase(&inst, ObjectiveWeights::joint());
            let e = solve_exact(&req).unwrap();
            let g = solve_greedy(&req).unwrap();
            if g.status != SolveStatus::Infeasible {
                assert_eq!(e.status, SolveStatus::Optimal, "seed {seed}");
                assert!(e.metrics.objective.value <= g.metrics.objective.value + 1e-9, "seed {seed}");
            }
        }
    }
}
