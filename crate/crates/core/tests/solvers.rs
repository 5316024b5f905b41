use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use vnfscale::experiment::{build_instance, observed_at, prepare_replicate, Context, ExperimentConfig};
use vnfscale::model::{check_feasibility, objective, to_prior, DelayParams, Demand, ObjectiveWeights, ServiceChain, Term, VnfSpec};
use vnfscale::solvers::{random_small_instance, solve, SolveRequest, SolveStatus, SolverKind};
use vnfscale::topology::{build_topology, CloudSpec, LinkSpec, NodeId, NodeSpec, PathCatalog, PathPolicy, TopologySpec};
use vnfscale::Instance;

fn n7_instance(seed: u64, capacity: f64) -> Instance {
    let cfg = ExperimentConfig::new(TopologySpec::builtin("n7").unwrap());
    let ctx = Context::build(&cfg).unwrap();
    let rep = prepare_replicate(&cfg, &ctx, seed, false).unwrap();
    let values = observed_at(&rep.demands, rep.t0);
    build_instance(&cfg, &ctx, &rep, None, Some(capacity), &values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn usable_results_pass_the_checker(seed in any::<u64>(), single in any::<bool>()) {
        let inst = random_small_instance(seed);
        let w = if single { ObjectiveWeights::single_term(Term::Cloud, &inst) } else { ObjectiveWeights::joint() };
        let mut best = None;
        for kind in SolverKind::ALL {
            let r = solve(kind, &SolveRequest::first_phase(&inst, w).with_seed(seed)).unwrap();
            let violations = check_feasibility(&r.solution, &inst, None).unwrap();
            prop_assert_eq!(r.status == SolveStatus::Infeasible, !violations.is_empty(), "{} {:?}", kind, violations);
            let o = objective(&r.solution, &inst, None, &w);
            prop_assert_eq!(o, r.metrics.objective);
            let weighted = w.migrations * o.migrations as f64 + w.replications * o.replications as f64 + w.cloud * o.cloud_vnfs as f64;
            prop_assert!((weighted - o.value).abs() < 1e-12);
            if kind == SolverKind::Exact {
                best = (r.status == SolveStatus::Optimal).then_some(o.value);
            } else if r.status != SolveStatus::Infeasible {
                let exact = best.expect("exact is optimal whenever a heuristic is feasible");
                prop_assert!(exact <= o.value + 1e-9, "{} beat exact: {} < {}", kind, o.value, exact);
            }
        }
    }

    #[test]
    fn second_phase_is_sound_and_counts_migrations(seed in any::<u64>(), scale in 0.3f64..2.0) {
        let inst = random_small_instance(seed);
        let first = solve(SolverKind::Exact, &SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        prop_assume!(first.status == SolveStatus::Optimal);
        let values: Vec<Vec<f64>> = inst.sfcs.iter().map(|s| s.demands.iter().map(|d| (d.value * scale).max(1.0)).collect()).collect();
        let inst2 = inst.with_demand_values(&values).unwrap();
        let prior = to_prior(&first.solution);
        for kind in SolverKind::ALL {
            let req = SolveRequest::second_phase(&inst2, &prior, Some(&first.solution), ObjectiveWeights::joint()).with_seed(seed);
            let r = solve(kind, &req).unwrap();
            let violations = check_feasibility(&r.solution, &inst2, Some(&prior)).unwrap();
            prop_assert_eq!(r.status == SolveStatus::Infeasible, !violations.is_empty());
            let abandoned: usize = prior
                .vnf_servers
                .iter()
                .zip(&r.solution.vnf_servers)
                .flat_map(|(p, n)| p.iter().zip(n))
                .map(|(p, n)| p.difference(n).count())
                .sum();
            prop_assert_eq!(r.metrics.objective.migrations, abandoned);
        }
    }

    #[test]
    fn unchanged_demands_keep_the_exact_placement(seed in any::<u64>()) {
        let inst = random_small_instance(seed);
        let first = solve(SolverKind::Exact, &SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        prop_assume!(first.status == SolveStatus::Optimal);
        let prior = to_prior(&first.solution);
        let req = SolveRequest::second_phase(&inst, &prior, Some(&first.solution), ObjectiveWeights::joint());
        let again = solve(SolverKind::Exact, &req).unwrap();
        prop_assert_eq!(again.metrics.objective.migrations, 0);
        prop_assert!(again.metrics.objective.value <= first.metrics.objective.value + 1e-9);
    }
}

#[test]
fn random_fit_varies_with_the_seed_only() {
    let inst = n7_instance(5, 1000.0);
    let w = ObjectiveWeights::joint();
    let run = |seed| solve(SolverKind::RandomFit, &SolveRequest::first_phase(&inst, w).with_seed(seed)).unwrap().solution;
    assert_eq!(run(1), run(1));
    let distinct: BTreeSet<String> = (0..8).map(|s| serde_json::to_string(&run(s)).unwrap()).collect();
    assert!(distinct.len() > 1, "random fit ignored its seed");
}

#[test]
fn deterministic_solvers_ignore_the_seed() {
    let inst = n7_instance(6, 1000.0);
    for kind in [SolverKind::Greedy, SolverKind::FirstFit] {
        let run = |seed| solve(kind, &SolveRequest::first_phase(&inst, ObjectiveWeights::joint()).with_seed(seed)).unwrap().solution;
        assert_eq!(run(1), run(99), "{kind}");
    }
}

#[test]
fn cloud_fallback_moves_whole_chains_to_the_cloud_path() {
    let mut seen = 0;
    for seed in 0..12 {
        let inst = n7_instance(seed, 250.0);
        for kind in [SolverKind::Greedy, SolverKind::FirstFit] {
            let r = solve(kind, &SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
            for &s in &r.stats.cloud_fallbacks {
                seen += 1;
                let paths: BTreeSet<_> = r.solution.demand_path[s].iter().flatten().collect();
                assert_eq!(paths.len(), 1, "seed {seed} {kind} SFC {s} uses several paths");
                let p = inst.catalog.path(**paths.iter().next().unwrap());
                assert!(p.nodes.iter().any(|&n| inst.topology.node(n).is_cloud));
                for servers in &r.solution.vnf_servers[s] {
                    assert_eq!(servers.len(), 1, "a fallback chain has one instance per VNF");
                }
            }
        }
    }
    assert!(seen > 0, "capacity 250 never triggered the fallback");
}

/// Two edge nodes; `a` can host one of the chains, `b` almost nothing.
fn contested(traffic: [f64; 2]) -> Instance {
    let spec = TopologySpec {
        name: None,
        nodes: vec![
            NodeSpec { id: "a".into(), lat: 52.0, lon: 10.0, servers: 1, server_capacity: 100.0 },
            NodeSpec { id: "b".into(), lat: 52.3, lon: 10.4, servers: 1, server_capacity: 5.0 },
        ],
        links: vec![
            LinkSpec { src: "a".into(), dst: "b".into(), capacity: 1000.0 },
            LinkSpec { src: "b".into(), dst: "a".into(), capacity: 1000.0 },
        ],
        cloud: CloudSpec { id: "cloud".into(), lat: 50.1, lon: 8.7, servers: 1 },
    };
    let topo = Arc::new(build_topology(&spec).unwrap());
    let cat = Arc::new(PathCatalog::build(&topo, [(NodeId(0), NodeId(1))], PathPolicy::lenient()).unwrap());
    let vnf = VnfSpec {
        vnf_type: 0,
        load_ratio: 1.0,
        sync_ratio: 0.0,
        overhead: 0.0,
        replicable: false,
        delays: DelayParams { pro_max: 1.0, ..DelayParams::default() },
        proc_capacity: 100.0,
    };
    let sfcs = traffic
        .iter()
        .map(|&t| ServiceChain {
            src: NodeId(0),
            dst: NodeId(1),
            vnfs: vec![vnf.clone()],
            demands: vec![Demand { value: t }],
            max_delay_s: 0.4,
            paths: vec![],
        })
        .collect();
    Instance::new(topo, cat, sfcs).unwrap()
}

#[test]
fn greedy_serves_light_chains_first() {
    for traffic in [[80.0, 30.0], [30.0, 80.0]] {
        let inst = contested(traffic);
        let r = solve(SolverKind::Greedy, &SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        assert_ne!(r.status, SolveStatus::Infeasible);
        let heavy = if traffic[0] > traffic[1] { 0 } else { 1 };
        let on_cloud = |s: usize| r.solution.vnf_servers[s][0].iter().all(|&x| inst.topology.server(x).is_cloud);
        assert!(on_cloud(heavy), "{traffic:?}: the heavier chain should overflow");
        assert!(!on_cloud(1 - heavy), "{traffic:?}: the lighter chain should stay on the edge");
    }
}

#[test]
fn first_fit_follows_input_order() {
    for traffic in [[80.0, 30.0], [30.0, 80.0]] {
        let inst = contested(traffic);
        let r = solve(SolverKind::FirstFit, &SolveRequest::first_phase(&inst, ObjectiveWeights::joint())).unwrap();
        let on_cloud = |s: usize| r.solution.vnf_servers[s][0].iter().all(|&x| inst.topology.server(x).is_cloud);
        assert!(!on_cloud(0), "{traffic:?}: the first chain takes the edge");
        assert!(on_cloud(1), "{traffic:?}: the second chain overflows");
    }
}
