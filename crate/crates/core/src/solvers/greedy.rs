//! Reuse-first greedy heuristic.
//!
//! SFCs are handled in ascending order of total traffic. For every demand
//! the heuristic prefers the path and servers it (or its SFC) used before,
//! then paths the SFC already uses in this phase, then the shortest path.
//! Servers are only opened when nothing reusable exists, and on the last
//! candidate path any fallback goes to the cloud rather than to a server
//! behind it.

use std::time::Instant;

use super::state::PlacementState;
use super::{finish, SolveError, SolveRequest, SolveResult, SolveStats, SolveStatus, SolverKind};
use crate::model::PlacementSolution;
use crate::topology::{PathId, ServerId};

/// Picks the next path to try for demand `d` of SFC `s` among `remaining`
/// (non-empty, in catalog order).
pub fn choose_path(
    sol: &PlacementSolution,
    prior_hint: Option<&PlacementSolution>,
    delay_of: impl Fn(PathId) -> f64,
    s: usize,
    d: usize,
    remaining: &[PathId],
) -> PathId {
    if let Some(hint) = prior_hint {
        if let Some(p) = hint.demand_path[s][d].filter(|p| remaining.contains(p)) {
            return p;
        }
        if let Some(&p) = remaining.iter().find(|p| hint.demand_path[s].contains(&Some(**p))) {
            return p;
        }
    }
    if let Some(&p) = remaining.iter().find(|p| sol.demand_path[s].contains(&Some(**p))) {
        return p;
    }
    // first minimum keeps catalog order on ties
    remaining
        .iter()
        .copied()
        .fold(None, |best: Option<PathId>, p| match best {
            Some(b) if delay_of(b) <= delay_of(p) => Some(b),
            _ => Some(p),
        })
        .expect("remaining paths must not be empty")
}

/// Picks a server for VNF `v` of demand `d` among `available` (servers of
/// the path in path order that can take it), reusing a hinted, previous or
/// current instance first.
///
/// `last_attempt` marks the last remaining path: there a reused server
/// that lies beyond the first cloud server is replaced by the cloud one,
/// and with nothing to reuse the first available server is opened. On
/// earlier paths a demand with nothing to reuse fails over to the next
/// path instead.
pub fn choose_server(
    available: &[ServerId],
    is_cloud: impl Fn(ServerId) -> bool,
    hinted: Option<ServerId>,
    previous: &[ServerId],
    current: &[ServerId],
    last_attempt: bool,
) -> Option<ServerId> {
    let cloud = available.iter().copied().find(|&x| is_cloud(x));
    let idx = |x: ServerId| available.iter().position(|&y| y == x).unwrap();
    let pick = hinted
        .filter(|x| available.contains(x))
        .or_else(|| available.iter().copied().find(|x| previous.contains(x)))
        .or_else(|| available.iter().copied().find(|x| current.contains(x)));
    match (pick, cloud) {
        (Some(x), Some(c)) if last_attempt && idx(x) > idx(c) => Some(c),
        (Some(x), _) => Some(x),
        (None, _) if last_attempt => available.first().copied(),
        (None, _) => None,
    }
}

/// Servers on `p` that can take VNF `v` of demand `d`, at or after the
/// node of the previous VNF.
fn available_servers(st: &PlacementState, s: usize, v: usize, d: usize, p: PathId, min_pos: usize) -> Vec<ServerId> {
    let path = st.inst.catalog.path(p);
    path.servers
        .iter()
        .copied()
        .filter(|&x| st.inst.server_position(p, x).is_some_and(|pos| pos >= min_pos))
        .filter(|&x| st.may_open(s, v, x, p) && st.server_fits(s, v, d, x, 0.0))
        .collect()
}

fn place_on_path(st: &mut PlacementState, req: &SolveRequest, s: usize, d: usize, p: PathId, last: bool) -> bool {
    let mut min_pos = 0;
    for v in 0..st.inst.sfcs[s].vnfs.len() {
        let available = available_servers(st, s, v, d, p, min_pos);
        let hinted = req.prior_hint.and_then(|h| h.demand_vnf_server[s][v][d]);
        let previous: Vec<ServerId> = req.prior.and_then(|f| f.servers(s, v)).map_or_else(Vec::new, |x| x.iter().copied().collect());
        let current: Vec<ServerId> = st.sol.vnf_servers[s][v].iter().copied().collect();
        let topo = &st.inst.topology;
        let Some(x) = choose_server(&available, |x| topo.server(x).is_cloud, hinted, &previous, &current, last) else {
            return false;
        };
        min_pos = st.inst.server_position(p, x).unwrap();
        st.assign(s, v, d, x);
    }
    st.route(s, d, p);
    true
}

/// Replaces the partial placement of `s` (everything after `start`) by
/// the cloud-traversing path with one instance per VNF, kept on its prior
/// server where possible and otherwise in the cloud. When even that fails
/// the SFC is left unplaced and all its demands are reported.
pub(super) fn cloud_fallback(st: &mut PlacementState, req: &SolveRequest, stats: &mut SolveStats, s: usize, start: usize) {
    st.rollback(start);
    let prior = req.prior;
    let kept = |v: usize, x: ServerId| prior.and_then(|f| f.servers(s, v)).is_some_and(|hosts| hosts.contains(&x));
    // a kept server behind the cloud can strand the rest of the chain
    if st.place_sfc_via_cloud(s, kept) || st.place_sfc_via_cloud(s, |_, _| false) {
        stats.cloud_fallbacks.push(s);
    } else {
        stats.failed_demands.extend((0..st.inst.sfcs[s].demands.len()).map(|d| (s, d)));
    }
}

pub fn solve_greedy(req: &SolveRequest) -> Result<SolveResult, SolveError> {
    req.validate()?;
    let started = Instant::now();
    let inst = req.instance;
    let mut st = PlacementState::new(inst);
    let mut stats = SolveStats::default();

    let mut order: Vec<usize> = (0..inst.sfcs.len()).collect();
    order.sort_by(|&a, &b| inst.sfcs[a].total_traffic().total_cmp(&inst.sfcs[b].total_traffic()));

    for s in order {
        let sfc = &inst.sfcs[s];
        let start = st.mark();
        let mut failed = false;
        for d in 0..sfc.demands.len() {
            let value = sfc.demands[d].value;
            let mut remaining: Vec<PathId> = sfc.paths.iter().copied().filter(|&p| st.path_fits(p, value, 0.0)).collect();
            let mut placed = false;
            while !remaining.is_empty() {
                let delay_of = |p: PathId| inst.catalog.path(p).delay_s;
                let p = choose_path(&st.sol, req.prior_hint, delay_of, s, d, &remaining);
                let last = remaining.len() == 1;
                stats.nodes_explored += 1;
                let mark = st.mark();
                if place_on_path(&mut st, req, s, d, p, last) {
                    placed = true;
                    break;
                }
                st.rollback(mark);
                remaining.retain(|&q| q != p);
            }
            if !placed {
                failed = true;
                break;
            }
        }
        if failed || !st.refresh_sync(s, 0.0) {
            cloud_fallback(&mut st, req, &mut stats, s, start);
        }
    }
    finish(req, SolverKind::Greedy, st.into_solution(), SolveStatus::Heuristic, stats, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::model::{check_feasibility, to_prior, ObjectiveWeights};

    const CLOUD: ServerId = ServerId(99);

    fn is_cloud(x: ServerId) -> bool {
        x == CLOUD
    }

    #[test]
    fn reuse_order_is_hint_previous_current() {
        let avail = [ServerId(0), ServerId(1), ServerId(2)];
        let prev = [ServerId(2)];
        let cur = [ServerId(0)];
        assert_eq!(choose_server(&avail, is_cloud, Some(ServerId(1)), &prev, &cur, false), Some(ServerId(1)));
        assert_eq!(choose_server(&avail, is_cloud, Some(ServerId(7)), &prev, &cur, false), Some(ServerId(2)));
        assert_eq!(choose_server(&avail, is_cloud, None, &[], &cur, false), Some(ServerId(0)));
        assert_eq!(choose_server(&avail, is_cloud, None, &[], &[], false), None);
        assert_eq!(choose_server(&avail, is_cloud, None, &[], &[], true), Some(ServerId(0)));
    }

    #[test]
    fn last_attempt_prefers_cloud_over_servers_behind_it() {
        let avail = [ServerId(0), CLOUD, ServerId(3)];
        assert_eq!(choose_server(&avail, is_cloud, Some(ServerId(3)), &[], &[], true), Some(CLOUD));
        assert_eq!(choose_server(&avail, is_cloud, Some(ServerId(3)), &[], &[], false), Some(ServerId(3)));
        assert_eq!(choose_server(&avail, is_cloud, Some(ServerId(0)), &[], &[], true), Some(ServerId(0)));
    }

    #[test]
    fn path_choice_prefers_hint_then_sfc_then_shortest() {
        let inst = line_instance(vec![vnf(0.5, 1.0)], &[10.0, 10.0], 500.0, 1000.0);
        let (direct, via) = (inst.sfcs[0].paths[0], inst.sfcs[0].paths[1]);
        let delay = |p: PathId| inst.catalog.path(p).delay_s;
        let empty = PlacementSolution::empty(&inst);
        assert_eq!(choose_path(&empty, None, delay, 0, 0, &[via, direct]), direct);

        let mut hint = PlacementSolution::empty(&inst);
        hint.demand_path[0][1] = Some(via);
        assert_eq!(choose_path(&empty, Some(&hint), delay, 0, 1, &[direct, via]), via);
        // demand 0 has no hint of its own but the SFC used `via`
        assert_eq!(choose_path(&empty, Some(&hint), delay, 0, 0, &[direct, via]), via);

        let mut cur = PlacementSolution::empty(&inst);
        cur.demand_path[0][0] = Some(via);
        assert_eq!(choose_path(&cur, None, delay, 0, 1, &[direct, via]), via);
    }

    #[test]
    fn toy_instance_places_everything_on_the_source() {
        let inst = line_instance(vec![vnf(0.5, 1.0), vnf(0.5, 1.0)], &[100.0, 50.0], 500.0, 1000.0);
        let r = solve_greedy(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Heuristic);
        assert_eq!(r.metrics.objective.value, 0.0);
        for v in 0..2 {
            assert_eq!(r.solution.vnf_servers[0][v].iter().copied().collect::<Vec<_>>(), vec![ServerId(0)]);
        }
    }

    #[test]
    fn second_phase_keeps_prior_servers() {
        let inst = line_instance(vec![vnf(0.5, 1.0)], &[100.0], 500.0, 1000.0);
        let direct = inst.sfcs[0].paths[0];
        let prev = all_on(&inst, direct, ServerId(1));
        let prior = to_prior(&prev);
        let grown = inst.with_demand_values(&[vec![150.0]]).unwrap();
        let req = SolveRequest::second_phase(&grown, &prior, Some(&prev), ObjectiveWeights::joint());
        let r = solve_greedy(&req).unwrap();
        assert_eq!(r.metrics.objective.migrations, 0);
        assert_eq!(r.solution.demand_vnf_server[0][0][0], Some(ServerId(1)));
    }

    #[test]
    fn overflow_goes_to_cloud_on_the_last_path() {
        // 120 units on a 100-unit edge server: the direct path has only edge
        // servers, the cloud path falls back to the cloud instance
        let inst = line_instance(vec![vnf(1.0, 0.0)], &[120.0], 500.0, 100.0);
        let r = solve_greedy(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Heuristic, "{:?}", r.metrics.violations);
        assert_eq!(r.metrics.objective.cloud_vnfs, 1);
        assert!(check_feasibility(&r.solution, &inst, None).unwrap().is_empty());
    }

    #[test]
    fn unplaceable_demand_is_reported() {
        let inst = line_instance(vec![vnf(1.0, 0.0)], &[120.0], 100.0, 100.0);
        // the direct link is too small and the cloud path's first hop is
        // unbounded, so only the cloud path remains
        let r = solve_greedy(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.metrics.objective.cloud_vnfs, 1);
        let tiny = line_instance(
            vec![{
                let mut v = vnf(1.0, 0.0);
                v.proc_capacity = 1.0;
                v
            }],
            &[120.0],
            100.0,
            100.0,
        );
        let r = solve_greedy(&SolveRequest::first_phase(&tiny, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.stats.failed_demands, vec![(0, 0)]);
    }
}
