//! First-Fit and Random-Fit baselines.
//!
//! Demands are placed one by one in input order. First-Fit takes the first
//! admissible path on which the whole chain fits, each VNF on the first
//! server with room. Random-Fit draws paths without replacement and each
//! VNF's server uniformly among the servers that leave the rest of the
//! chain placeable.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::greedy::cloud_fallback;
use super::state::PlacementState;
use super::{finish, SolveError, SolveRequest, SolveResult, SolveStats, SolveStatus, SolverKind};
use crate::topology::{PathId, ServerId};

fn candidates(st: &PlacementState, s: usize, v: usize, d: usize, p: PathId, min_pos: usize) -> Vec<(ServerId, usize)> {
    st.inst
        .catalog
        .path(p)
        .servers
        .iter()
        .filter_map(|&x| st.inst.server_position(p, x).map(|pos| (x, pos)))
        .filter(|&(x, pos)| pos >= min_pos && st.may_open(s, v, x, p) && st.server_fits(s, v, d, x, 0.0))
        .collect()
}

/// First-fit placement of VNFs `from..` of demand `d` on `p`.
fn first_fit_suffix(st: &mut PlacementState, s: usize, d: usize, p: PathId, from: usize, mut min_pos: usize) -> bool {
    for v in from..st.inst.sfcs[s].vnfs.len() {
        let Some(&(x, pos)) = candidates(st, s, v, d, p, min_pos).first() else { return false };
        st.assign(s, v, d, x);
        min_pos = pos;
    }
    true
}

fn random_fit_chain(st: &mut PlacementState, rng: &mut ChaCha8Rng, s: usize, d: usize, p: PathId) -> bool {
    let mut min_pos = 0;
    for v in 0..st.inst.sfcs[s].vnfs.len() {
        let mut cands = candidates(st, s, v, d, p, min_pos);
        cands.shuffle(rng);
        let mut chosen = None;
        for (x, pos) in cands {
            let mark = st.mark();
            st.assign(s, v, d, x);
            let probe = st.mark();
            let rest_ok = first_fit_suffix(st, s, d, p, v + 1, pos);
            st.rollback(probe);
            if rest_ok {
                chosen = Some(pos);
                break;
            }
            st.rollback(mark);
        }
        match chosen {
            Some(pos) => min_pos = pos,
            None => return false,
        }
    }
    true
}

fn solve_fit(req: &SolveRequest, random: bool) -> Result<SolveResult, SolveError> {
    req.validate()?;
    let started = Instant::now();
    let inst = req.instance;
    let mut st = PlacementState::new(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(req.rng_seed);
    let mut stats = SolveStats::default();

    for (s, sfc) in inst.sfcs.iter().enumerate() {
        let start = st.mark();
        let mut failed = false;
        for d in 0..sfc.demands.len() {
            let value = sfc.demands[d].value;
            let mut paths: Vec<PathId> = sfc.paths.iter().copied().filter(|&p| st.path_fits(p, value, 0.0)).collect();
            if random {
                paths.shuffle(&mut rng);
            }
            let mut placed = false;
            for p in paths {
                stats.nodes_explored += 1;
                let mark = st.mark();
                let ok = if random { random_fit_chain(&mut st, &mut rng, s, d, p) } else { first_fit_suffix(&mut st, s, d, p, 0, 0) };
                if ok {
                    st.route(s, d, p);
                    placed = true;
                    break;
                }
                st.rollback(mark);
            }
            if !placed || !st.refresh_sync(s, 0.0) {
                failed = true;
                break;
            }
        }
        if failed {
            cloud_fallback(&mut st, req, &mut stats, s, start);
        }
    }
    let kind = if random { SolverKind::RandomFit } else { SolverKind::FirstFit };
    finish(req, kind, st.into_solution(), SolveStatus::Heuristic, stats, started)
}

pub fn solve_first_fit(req: &SolveRequest) -> Result<SolveResult, SolveError> {
    solve_fit(req, false)
}

pub fn solve_random_fit(req: &SolveRequest) -> Result<SolveResult, SolveError> {
    solve_fit(req, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::model::ObjectiveWeights;

    #[test]
    fn first_fit_uses_first_path_and_server() {
        let inst = line_instance(vec![vnf(0.5, 1.0), vnf(0.5, 1.0)], &[100.0, 50.0], 500.0, 1000.0);
        let r = solve_first_fit(&SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_eq!(r.status, SolveStatus::Heuristic);
        assert_eq!(r.solution.demand_path[0], vec![Some(inst.sfcs[0].paths[0]); 2]);
        assert_eq!(r.solution.demand_vnf_server[0][1], vec![Some(ServerId(0)); 2]);
    }

    #[test]
    fn random_fit_is_seed_deterministic() {
        let inst = line_instance(vec![vnf(0.5, 1.0), vnf(0.2, 1.0)], &[100.0, 50.0, 20.0], 500.0, 1000.0);
        let req = SolveRequest::first_phase(&inst, ObjectiveWeights::joint()).with_seed(42);
        let a = solve_random_fit(&req).unwrap();
        let b = solve_random_fit(&req).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_ne!(a.status, SolveStatus::Infeasible, "{:?}", a.metrics.violations);
    }
}
