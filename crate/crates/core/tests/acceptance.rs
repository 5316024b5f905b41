//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the criteria execute one
//! after another and the timing criteria are not skewed by parallel tests.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnfscale::experiment::{
    build_instance, observed_at, prepare_replicate, run_row, run_sweep, run_two_phase, scenario_demand_view, summarize, Context,
    ExperimentConfig, ScenarioKind, SweepAxis, SweepConfig, SweepReport, SweepRow, WeightsMode,
};
use vnfscale::forecast::{evaluate_rmse, gradient_check, windows, ForecastConfig, LstmModel};
use vnfscale::model::{
    check_feasibility, downtime, objective, processing_delay, to_prior, DelayParams, Demand, ObjectiveWeights, ServiceChain, Term,
    Violation, VnfSpec,
};
use vnfscale::solvers::{
    export_lp, random_small_instance, solve, solve_exact, solve_greedy, SolveRequest, SolveResult, SolveStatus, SolverKind,
};
use vnfscale::topology::{build_topology, CloudSpec, LinkSpec, NodeId, NodeSpec, PathCatalog, PathId, PathPolicy, ServerId, TopologySpec};
use vnfscale::traffic::{generate_series, Component, TrafficParams};
use vnfscale::{Instance, PlacementSolution, PriorPlacement};

const ORACLE_SEEDS: u64 = 60;
const SOUNDNESS_SEEDS: u64 = 100;
const SWEEP_REPLICATES: usize = 20;
const CAPACITIES: [f64; 8] = [250.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0];
/// Capacities where edge servers are neither hopeless nor idle.
const MID_CAPACITY: std::ops::RangeInclusive<f64> = 500.0..=2000.0;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

// ---------------------------------------------------------------- oracle

/// Violations that depend on one SFC alone (not on shared capacities).
fn structural(v: &Violation, s: usize) -> bool {
    use Violation::*;
    match *v {
        UnroutedDemand { s: t, .. }
        | PathNotAdmissible { s: t, .. }
        | UnassignedVnf { s: t, .. }
        | ServerOffPath { s: t, .. }
        | InstanceSetMismatch { s: t, .. }
        | NotReplicable { s: t, .. }
        | TooManyReplicas { s: t, .. }
        | OrderViolated { s: t, .. }
        | MissingSyncPath { s: t, .. }
        | DuplicateSyncPath { s: t, .. }
        | UnusedSyncPath { s: t, .. } => t == s,
        _ => false,
    }
}

/// Calls `f` with every vector in the mixed-radix product of `sizes`.
fn product(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut idx = vec![0; sizes.len()];
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == sizes.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

type SfcPart = (Vec<Option<PathId>>, Vec<BTreeSet<ServerId>>, Vec<Vec<Option<ServerId>>>, Vec<BTreeSet<PathId>>);

/// Every structurally valid assignment of SFC `s`: each demand takes any
/// admissible path, each (VNF, demand) any server of the topology, each
/// replica node any catalog sync path from the original.
fn sfc_candidates(inst: &Instance, s: usize) -> Vec<SfcPart> {
    let sfc = &inst.sfcs[s];
    let topo = &inst.topology;
    let (nd, nv) = (sfc.demands.len(), sfc.vnfs.len());
    let nx = topo.servers().len();
    let mut sizes = vec![sfc.paths.len(); nd];
    sizes.extend(std::iter::repeat_n(nx, nd * nv));
    let mut out = Vec::new();
    let mut scratch = PlacementSolution::empty(inst);
    product(&sizes, |idx| {
        let paths: Vec<Option<PathId>> = idx[..nd].iter().map(|&i| Some(sfc.paths[i])).collect();
        let assign: Vec<Vec<Option<ServerId>>> = (0..nv).map(|v| (0..nd).map(|d| Some(ServerId(idx[nd + v * nd + d]))).collect()).collect();
        let servers: Vec<BTreeSet<ServerId>> = assign.iter().map(|a| a.iter().flatten().copied().collect()).collect();
        // sync options per (v, replica node)
        let mut slots: Vec<(usize, Vec<PathId>)> = Vec::new();
        for (v, set) in servers.iter().enumerate() {
            let from = topo.server(*set.iter().next().unwrap()).node;
            let targets: BTreeSet<NodeId> = set.iter().map(|&x| topo.server(x).node).filter(|&n| n != from).collect();
            for to in targets {
                slots.push((v, inst.catalog.sync_paths(from, to).to_vec()));
            }
        }
        let sync_sizes: Vec<usize> = slots.iter().map(|(_, o)| o.len()).collect();
        product(&sync_sizes, |pick| {
            let mut sync = vec![BTreeSet::new(); nv];
            for ((v, opts), &i) in slots.iter().zip(pick) {
                sync[*v].insert(opts[i]);
            }
            scratch.demand_path[s] = paths.clone();
            scratch.vnf_servers[s] = servers.clone();
            scratch.demand_vnf_server[s] = assign.clone();
            scratch.sync_paths[s] = sync.clone();
            let violations = check_feasibility(&scratch, inst, None).unwrap();
            if !violations.iter().any(|v| structural(v, s)) {
                out.push((paths.clone(), servers.clone(), assign.clone(), sync));
            }
        });
    });
    out
}

/// Optimum over the full assignment space, judged only by the checker.
fn brute_force(inst: &Instance, prior: Option<&PriorPlacement>, weights: &ObjectiveWeights) -> Option<f64> {
    let cands: Vec<Vec<SfcPart>> = (0..inst.sfcs.len()).map(|s| sfc_candidates(inst, s)).collect();
    let sizes: Vec<usize> = cands.iter().map(Vec::len).collect();
    let mut best: Option<f64> = None;
    let mut sol = PlacementSolution::empty(inst);
    product(&sizes, |idx| {
        for (s, &i) in idx.iter().enumerate() {
            let (p, x, a, y) = &cands[s][i];
            sol.demand_path[s] = p.clone();
            sol.vnf_servers[s] = x.clone();
            sol.demand_vnf_server[s] = a.clone();
            sol.sync_paths[s] = y.clone();
        }
        if check_feasibility(&sol, inst, prior).unwrap().is_empty() {
            let v = objective(&sol, inst, prior, weights).value;
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    });
    best
}

/// Phase-2 twin of an oracle instance: demand values rescaled.
fn perturbed(inst: &Instance, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let values: Vec<Vec<f64>> =
        inst.sfcs.iter().map(|s| s.demands.iter().map(|d| (d.value * rng.gen_range(0.5..1.6)).round().max(1.0)).collect()).collect();
    inst.with_demand_values(&values).unwrap()
}

struct OracleCase {
    seed: u64,
    phase: u8,
    exact: SolveResult,
    greedy: SolveResult,
    brute: Option<f64>,
    exact_s: f64,
}

fn oracle_cases() -> Vec<OracleCase> {
    let mut cases = Vec::new();
    for seed in 0..ORACLE_SEEDS {
        let inst = random_small_instance(seed);
        let w = ObjectiveWeights::joint();
        let req = SolveRequest::first_phase(&inst, w);
        let t = Instant::now();
        let exact = solve_exact(&req).unwrap();
        let exact_s = t.elapsed().as_secs_f64();
        let greedy = solve_greedy(&req).unwrap();
        let brute = brute_force(&inst, None, &w);
        let first = exact.solution.clone();
        let feasible = exact.status != SolveStatus::Infeasible;
        cases.push(OracleCase { seed, phase: 1, exact, greedy, brute, exact_s });
        if !feasible {
            continue;
        }
        let inst2 = perturbed(&inst, seed);
        let prior = to_prior(&first);
        let w2 = if seed % 2 == 0 { ObjectiveWeights::joint() } else { ObjectiveWeights::single_term(Term::Migrations, &inst2) };
        let req2 = SolveRequest::second_phase(&inst2, &prior, Some(&first), w2);
        let t = Instant::now();
        let exact = solve_exact(&req2).unwrap();
        let exact_s = t.elapsed().as_secs_f64();
        let greedy = solve_greedy(&req2).unwrap();
        let brute = brute_force(&inst2, Some(&prior), &w2);
        cases.push(OracleCase { seed, phase: 2, exact, greedy, brute, exact_s });
    }
    cases
}

fn criterion_exact_vs_brute_force(cases: &[OracleCase]) -> Verdict {
    let mut bad = Vec::new();
    let mut slowest: f64 = 0.0;
    for c in cases {
        slowest = slowest.max(c.exact_s);
        let agree = match (c.brute, c.exact.status) {
            (None, SolveStatus::Infeasible) => true,
            (Some(b), SolveStatus::Optimal) => (c.exact.metrics.objective.value - b).abs() <= 1e-9,
            _ => false,
        };
        if !agree || c.exact_s >= 10.0 {
            bad.push(format!(
                "seed {} phase {}: exact {:?} {} vs brute {:?}",
                c.seed, c.phase, c.exact.status, c.exact.metrics.objective.value, c.brute
            ));
        }
    }
    let instances = cases.iter().filter(|c| c.phase == 1).count();
    Verdict::new(
        bad.is_empty() && instances >= 50,
        format!("{instances} instances, {} solves, slowest exact {slowest:.3}s, mismatches {bad:?}", cases.len()),
    )
}

fn criterion_exact_dominates_greedy_on_oracle(cases: &[OracleCase]) -> (bool, String) {
    let mut compared = 0;
    let mut bad = Vec::new();
    for c in cases.iter().filter(|c| c.greedy.status != SolveStatus::Infeasible) {
        compared += 1;
        if c.exact.status != SolveStatus::Optimal || c.exact.metrics.objective.value > c.greedy.metrics.objective.value + 1e-9 {
            bad.push((c.seed, c.phase));
        }
    }
    (bad.is_empty() && compared > 0, format!("exact <= greedy on {compared} oracle solves (failures {bad:?})"))
}

// --------------------------------------------------------------- N7 runs

fn n7_config() -> ExperimentConfig {
    ExperimentConfig::new(TopologySpec::builtin("n7").unwrap())
}

struct N7Run {
    seed: u64,
    solver: SolverKind,
    /// Phase-2 objective when phase 2 is not infeasible.
    objective: Option<f64>,
}

/// Independent re-check of one phase: a usable status must come with a
/// placement the checker accepts, and downtime must be 27.5 ms per
/// abandoned prior instance.
fn audit(r: &SolveResult, inst: &Instance, prior: Option<&PriorPlacement>, problems: &mut Vec<String>, tag: &str) {
    let violations = check_feasibility(&r.solution, inst, prior).unwrap();
    if r.status != SolveStatus::Infeasible && !violations.is_empty() {
        problems.push(format!("{tag}: status {} with {} violations", r.status, violations.len()));
    }
    for s in 0..inst.sfcs.len() {
        let abandoned: usize = match prior {
            None => 0,
            Some(p) => (0..inst.sfcs[s].vnfs.len())
                .map(|v| p.vnf_servers[s][v].iter().filter(|x| !r.solution.vnf_servers[s][v].contains(x)).count())
                .sum(),
        };
        let got = downtime(&r.solution, inst, prior, s);
        if got != 27.5e-3 * abandoned as f64 {
            problems.push(format!("{tag}: SFC {s} downtime {got} for {abandoned} migrations"));
        }
    }
}

/// Exact-sized slice of an N7 instance: two SFCs, short chains, two
/// demands each.
fn n7_slice(inst: &Instance) -> Instance {
    let sfcs: Vec<ServiceChain> = inst
        .sfcs
        .iter()
        .take(2)
        .map(|s| {
            let mut s = s.clone();
            s.vnfs.truncate(3);
            s.demands.truncate(2);
            s
        })
        .collect();
    Instance::new(inst.topology.clone(), inst.catalog.clone(), sfcs).unwrap()
}

fn n7_runs(problems: &mut Vec<String>, downtime_checks: &mut usize) -> Vec<N7Run> {
    let cfg = n7_config();
    let ctx = Context::build(&cfg).unwrap();
    let mut runs = Vec::new();
    for seed in 0..SOUNDNESS_SEEDS {
        let rep = prepare_replicate(&cfg, &ctx, seed, false).unwrap();
        let capacity = CAPACITIES[seed as usize % CAPACITIES.len()];
        let kind = if (seed / 8) % 2 == 0 { ScenarioKind::Obsv } else { ScenarioKind::Over };
        let planned = scenario_demand_view(&rep.demands, kind, &cfg.scenario, rep.t0, None).unwrap();
        let observed = observed_at(&rep.demands, rep.t0 + cfg.scenario.delta_t);
        let base = build_instance(&cfg, &ctx, &rep, None, Some(capacity), &observed).unwrap();
        let inst1 = base.with_demand_values(&planned).unwrap();
        for solver in [SolverKind::Greedy, SolverKind::FirstFit, SolverKind::RandomFit] {
            let out = run_two_phase(&base, &planned, &observed, solver, WeightsMode::Joint, seed).unwrap();
            let tag = format!("seed {seed} {solver}");
            audit(&out.phase1, &inst1, None, problems, &format!("{tag} phase 1"));
            let mut objective = None;
            if let Some(p2) = &out.phase2 {
                let prior = to_prior(&out.phase1.solution);
                audit(p2, &base, Some(&prior), problems, &format!("{tag} phase 2"));
                *downtime_checks += base.sfcs.len();
                if p2.status != SolveStatus::Infeasible {
                    objective = Some(p2.metrics.objective.value);
                }
            }
            runs.push(N7Run { seed, solver, objective });
        }

        // exact on a slice of the same instance, both phases
        let slice1 = n7_slice(&inst1);
        let mut req = SolveRequest::first_phase(&slice1, ObjectiveWeights::joint());
        req.limits.node_budget = 200_000;
        let r1 = solve(SolverKind::Exact, &req).unwrap();
        audit(&r1, &slice1, None, problems, &format!("seed {seed} exact phase 1"));
        if r1.status != SolveStatus::Infeasible {
            let slice2 = n7_slice(&base);
            let prior = to_prior(&r1.solution);
            let mut req = SolveRequest::second_phase(&slice2, &prior, Some(&r1.solution), ObjectiveWeights::joint());
            req.limits.node_budget = 200_000;
            let r2 = solve(SolverKind::Exact, &req).unwrap();
            audit(&r2, &slice2, Some(&prior), problems, &format!("seed {seed} exact phase 2"));
        }
    }
    runs
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criterion_heuristic_dominance(runs: &[N7Run]) -> (bool, String) {
    let mut by_solver = [Vec::new(), Vec::new(), Vec::new()];
    let seeds: BTreeSet<u64> = runs.iter().map(|r| r.seed).collect();
    let mut paired = 0;
    for seed in seeds {
        let get = |k: SolverKind| runs.iter().find(|r| r.seed == seed && r.solver == k).and_then(|r| r.objective);
        if let (Some(g), Some(f), Some(r)) = (get(SolverKind::Greedy), get(SolverKind::FirstFit), get(SolverKind::RandomFit)) {
            paired += 1;
            by_solver[0].push(g);
            by_solver[1].push(f);
            by_solver[2].push(r);
        }
    }
    if paired == 0 {
        return (false, "no seed where all heuristics are feasible".into());
    }
    let (g, f, r) = (mean(&by_solver[0]), mean(&by_solver[1]), mean(&by_solver[2]));
    (paired >= 20 && g <= f && g <= r, format!("N7 mean objective over {paired} seeds: greedy {g:.2}, ff {f:.2}, rf {r:.2}"))
}

// ----------------------------------------------------------------- sweep

fn sweep_config() -> SweepConfig {
    SweepConfig {
        experiment: n7_config(),
        axis: SweepAxis::ServerCapacity(CAPACITIES.to_vec()),
        scenarios: ScenarioKind::ALL.to_vec(),
        replicates: SWEEP_REPLICATES,
        master_seed: 2024,
        solver: SolverKind::Greedy,
        weights: WeightsMode::Joint,
    }
}

fn cell_mean(report: &SweepReport, axis: f64, kind: ScenarioKind, field: fn(&SweepRow) -> Option<f64>) -> Option<f64> {
    let xs: Vec<f64> = report.rows.iter().filter(|r| r.axis == axis && r.scenario == kind).filter_map(field).collect();
    (!xs.is_empty()).then(|| mean(&xs))
}

fn migrations(r: &SweepRow) -> Option<f64> {
    r.migrations.map(|m| m as f64)
}

fn cloud(r: &SweepRow) -> Option<f64> {
    r.cloud_vnfs.map(|m| m as f64)
}

fn criterion_prediction_trend(report: &SweepReport, elapsed_s: f64) -> Verdict {
    let mut table = String::new();
    let mut mid_fewer = true;
    let mut best_reduction: f64 = 0.0;
    let mut matching = 0;
    let mut points = 0;
    for &c in &CAPACITIES {
        let (Some(p), Some(o)) =
            (cell_mean(report, c, ScenarioKind::Pred, migrations), cell_mean(report, c, ScenarioKind::Obsv, migrations))
        else {
            mid_fewer &= !MID_CAPACITY.contains(&c);
            continue;
        };
        points += 1;
        if p <= o {
            matching += 1;
        }
        if MID_CAPACITY.contains(&c) {
            mid_fewer &= p < o;
            if o > 0.0 {
                best_reduction = best_reduction.max((o - p) / o);
            }
        }
        let _ = write!(table, " {c}:{p:.2}/{o:.2}");
    }
    let share = matching as f64 / CAPACITIES.len() as f64;
    let pass = mid_fewer && best_reduction >= 0.2 && share >= 0.8 && elapsed_s < 600.0;
    Verdict::new(
        pass,
        format!(
            "pred/obsv migrations{table}; best mid reduction {:.0}%, sign matches {matching}/{} points, sweep {elapsed_s:.0}s",
            best_reduction * 100.0,
            points
        ),
    )
}

fn criterion_overprovisioning_cloud(report: &SweepReport) -> Verdict {
    let mut table = String::new();
    let mut pass = true;
    for &c in CAPACITIES.iter().filter(|c| MID_CAPACITY.contains(c)) {
        match (cell_mean(report, c, ScenarioKind::Over, cloud), cell_mean(report, c, ScenarioKind::Pred, cloud)) {
            (Some(o), Some(p)) => {
                pass &= o >= p;
                let _ = write!(table, " {c}:{o:.2}/{p:.2}");
            }
            _ => pass = false,
        }
    }
    Verdict::new(pass, format!("over/pred cloud VNFs{table}"))
}

fn criterion_rows_reproduce(sweep: &SweepConfig, report: &SweepReport) -> Verdict {
    let picks = [(1000.0, ScenarioKind::Obsv, 3), (1500.0, ScenarioKind::Over, 7), (2000.0, ScenarioKind::Pred, 11)];
    let mut bad = Vec::new();
    for (axis, kind, r) in picks {
        let rows: Vec<&SweepRow> = report.rows.iter().filter(|x| x.axis == axis && x.scenario == kind).collect();
        let row = rows[r];
        let again = run_row(sweep, axis, kind, row.seed).unwrap();
        let same = serde_json::to_string(&again).unwrap() == serde_json::to_string(row).unwrap() && &again == row;
        if !same {
            bad.push(format!("{axis} {kind} seed {}", row.seed));
        }
    }
    Verdict::new(bad.is_empty(), format!("{} rows re-run from their seed, mismatches {bad:?}", picks.len()))
}

// -------------------------------------------------------------- forecast

fn criterion_forecast() -> Verdict {
    let cfg = n7_config();
    let ctx = Context::build(&cfg).unwrap();
    let rep = prepare_replicate(&cfg, &ctx, 17, false).unwrap();
    let flows: Vec<&Vec<f64>> = rep.demands.sfcs.iter().flat_map(|s| s.flows.iter().map(|f| &f.values)).take(12).collect();
    let (mut short, mut long) = (Vec::new(), Vec::new());
    for (i, series) in flows.iter().enumerate() {
        let rows = evaluate_rmse(series, &cfg.forecast, &[1, 50], 900 + i as u64).unwrap();
        short.push(rows[0].rmse);
        long.push(rows[1].rmse);
    }
    let (r1, r50) = (mean(&short), mean(&long));

    let fc = ForecastConfig::default();
    let mut worst: f64 = 0.0;
    for draw in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let params = TrafficParams {
            alpha: 1.0,
            components: vec![Component {
                beta: rng.gen_range(0.1..0.5),
                omega: std::f64::consts::TAU / 24.0,
                phi: rng.gen_range(0.0..6.0),
            }],
            samples_per_period: 24,
            cv: 0.1,
            base_value: rng.gen_range(1.0..100.0),
        };
        let series = generate_series(draw, &params, 2).unwrap();
        let (lo, hi) = series.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        let norm: Vec<f64> = series.iter().map(|x| (x - lo) / (hi - lo)).collect();
        let all = windows(&norm, fc.lookback);
        let start = rng.gen_range(0..all.len() - fc.batch_size);
        let model = LstmModel::init(fc, 100 + draw);
        worst = worst.max(gradient_check(&model, &all[start..start + fc.batch_size], 1e-5));
    }
    Verdict::new(
        r50 < r1 && flows.len() >= 10 && worst <= 1e-3,
        format!(
            "mean normalized RMSE over {} flows: 50 periods {r50:.4} < 1 period {r1:.4}; worst gradient error {worst:.2e} over 20 draws",
            flows.len()
        ),
    )
}

// ----------------------------------------------------------------- delay

fn criterion_delay_constants(downtime_problems: &[String], downtime_checks: usize) -> Verdict {
    // one VNF whose traffic equals its processing capacity on a server at
    // exactly full utilization
    let spec = TopologySpec {
        name: None,
        nodes: vec![
            NodeSpec { id: "a".into(), lat: 52.0, lon: 10.0, servers: 1, server_capacity: 100.0 },
            NodeSpec { id: "b".into(), lat: 52.5, lon: 10.5, servers: 1, server_capacity: 100.0 },
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
        replicable: true,
        delays: DelayParams::default(),
        proc_capacity: 100.0,
    };
    let chain = ServiceChain {
        src: NodeId(0),
        dst: NodeId(1),
        vnfs: vec![vnf],
        demands: vec![Demand { value: 100.0 }],
        max_delay_s: 0.4,
        paths: vec![],
    };
    let inst = Instance::new(topo, cat, vec![chain]).unwrap();
    let direct = *inst.sfcs[0].paths.iter().find(|&&p| inst.catalog.path(p).nodes.len() == 2).unwrap();
    let mut sol = PlacementSolution::empty(&inst);
    sol.demand_path[0][0] = Some(direct);
    sol.vnf_servers[0][0].insert(ServerId(0));
    sol.demand_vnf_server[0][0][0] = Some(ServerId(0));
    let delay = processing_delay(&sol, &inst, 0, 0, ServerId(0)).unwrap();
    let full_load_ok = delay == 10e-3;

    // downtime of the lone instance moved to the other server
    let prior = PriorPlacement { vnf_servers: vec![vec![[ServerId(1)].into()]] };
    let one = downtime(&sol, &inst, Some(&prior), 0) == 27.5e-3;

    Verdict::new(
        full_load_ok && one && downtime_problems.is_empty() && downtime_checks > 0,
        format!(
            "full-load processing delay {:.17} ms; downtime = 27.5 ms x migrations on {downtime_checks} N7 SFC checks ({} mismatches)",
            delay * 1e3,
            downtime_problems.len()
        ),
    )
}

// -------------------------------------------------------------------- LP

const HIGHS_SCRIPT: &str = r#"
import sys, highspy
for path in sys.argv[1:]:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.readModel(path)
    h.run()
    status = h.modelStatusToString(h.getModelStatus())
    print(status, repr(h.getInfo().objective_function_value))
"#;

fn criterion_lp_cross_check(cases: &[OracleCase]) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    let mut expected = Vec::new();
    let mut deterministic = true;
    for c in cases.iter().filter(|c| c.phase == 1).take(10) {
        let inst = random_small_instance(c.seed);
        let w = ObjectiveWeights::joint();
        let text = export_lp(&inst, None, &w);
        deterministic &= text == export_lp(&random_small_instance(c.seed), None, &w);
        let path = dir.path().join(format!("p1-{}.lp", c.seed));
        std::fs::write(&path, &text).unwrap();
        files.push(path);
        expected.push((c.seed, 1, c.exact.status, c.exact.metrics.objective.value));

        if c.exact.status == SolveStatus::Optimal {
            let inst2 = perturbed(&inst, c.seed);
            let prior = to_prior(&c.exact.solution);
            let req = SolveRequest::second_phase(&inst2, &prior, None, w);
            let e2 = solve_exact(&req).unwrap();
            let text = export_lp(&inst2, Some(&prior), &w);
            deterministic &= text == export_lp(&inst2, Some(&prior), &w);
            let path = dir.path().join(format!("p2-{}.lp", c.seed));
            std::fs::write(&path, &text).unwrap();
            files.push(path);
            expected.push((c.seed, 2, e2.status, e2.metrics.objective.value));
        }
    }
    let out = match Command::new("python3").arg("-c").arg(HIGHS_SCRIPT).args(&files).output() {
        Ok(o) if o.status.success() => String::from_utf8_lossy(&o.stdout).into_owned(),
        Ok(o) => return Verdict::new(false, format!("external solver failed: {}", String::from_utf8_lossy(&o.stderr).trim())),
        Err(e) => return Verdict::new(false, format!("cannot run python3: {e}")),
    };
    let mut matched = 0;
    let mut bad = Vec::new();
    for (line, (seed, phase, status, value)) in out.lines().zip(&expected) {
        let (hs, hv) = line.split_once(' ').unwrap();
        let hv: f64 = hv.parse().unwrap_or(f64::NAN);
        let ok = match status {
            SolveStatus::Optimal => hs == "Optimal" && (hv - value).abs() <= 1e-6,
            SolveStatus::Infeasible => hs == "Infeasible",
            SolveStatus::Heuristic => false,
        };
        if ok {
            matched += 1;
        } else {
            bad.push(format!("seed {seed} phase {phase}: exact {status} {value} vs HiGHS {hs} {hv}"));
        }
    }
    let optimal = expected.iter().filter(|e| e.2 == SolveStatus::Optimal).count();
    Verdict::new(
        bad.is_empty() && out.lines().count() == expected.len() && optimal >= 5 && deterministic,
        format!(
            "{matched}/{} LP files agree with the exact optimum ({optimal} optimal), byte-identical re-exports: {deterministic}; {bad:?}",
            expected.len()
        ),
    )
}

// ------------------------------------------------------------------ main

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and filters: nothing to list here
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut report = |n: usize, name: &'static str, v: Verdict| {
        println!("{} [{n}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((n, name, v));
    };

    let cases = oracle_cases();
    report(1, "exact matches brute force", criterion_exact_vs_brute_force(&cases));

    let mut problems = Vec::new();
    let mut downtime_checks = 0;
    let runs = n7_runs(&mut problems, &mut downtime_checks);
    let (violation_problems, downtime_problems): (Vec<String>, Vec<String>) = problems.into_iter().partition(|p| !p.contains("downtime"));
    report(
        2,
        "no violations unless infeasible",
        Verdict::new(
            violation_problems.is_empty(),
            format!("{SOUNDNESS_SEEDS} N7 seeds x (greedy, ff, rf, exact slice) x 2 phases; problems {violation_problems:?}"),
        ),
    );

    let (oracle_ok, oracle_detail) = criterion_exact_dominates_greedy_on_oracle(&cases);
    let (n7_ok, n7_detail) = criterion_heuristic_dominance(&runs);
    report(3, "solver dominance", Verdict::new(oracle_ok && n7_ok, format!("{oracle_detail}; {n7_detail}")));

    let sweep = sweep_config();
    let started = Instant::now();
    let sweep_report = run_sweep(&sweep, 1).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    for s in summarize(&sweep_report.rows) {
        let m = |x: Option<vnfscale::experiment::Stat>| x.map_or(f64::NAN, |x| x.mean);
        println!(
            "      capacity {:>6} {:<4} ok {:>2}/{} migrations {:>6.2} replications {:>6.2} cloud {:>7.2}",
            s.axis,
            s.scenario,
            s.ok,
            s.total,
            m(s.migrations),
            m(s.replications),
            m(s.cloud_vnfs)
        );
    }
    report(4, "prediction reduces migrations", criterion_prediction_trend(&sweep_report, elapsed));
    report(5, "over-provisioning uses more cloud", criterion_overprovisioning_cloud(&sweep_report));
    report(6, "forecast quality and gradients", criterion_forecast());
    report(7, "delay constants", criterion_delay_constants(&downtime_problems, downtime_checks));
    report(8, "LP agrees with external solver", criterion_lp_cross_check(&cases));
    report(9, "rows reproduce from seed", criterion_rows_reproduce(&sweep, &sweep_report));

    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.2.pass).map(|v| v.0).collect();
    println!("{}/{} criteria passed", verdicts.len() - failed.len(), verdicts.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
