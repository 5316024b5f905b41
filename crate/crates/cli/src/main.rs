//! `vnfsim`: generate demand datasets, train forecasters, run two-phase
//! placements and sweeps, and export the MILP in LP format.
//!
//! Exit codes: 0 success, 1 error, 2 infeasible placement.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vnfscale::experiment::{
    self, build_instance, draw_replicate, observed_at, run_two_phase, scenario_demand_view, Context, ScenarioKind, SweepConfig,
};
use vnfscale::forecast::{evaluate_rmse, LstmModel};
use vnfscale::model::to_prior;
use vnfscale::seed;
use vnfscale::solvers::{self, export_lp, validate_lp, SolveRequest, SolveResult, SolveStatus, SolverKind};
use vnfscale::topology::build_topology;
use vnfscale::traffic::{generate_demand_set, DemandSet};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "vnfsim", version, about = "Two-phase VNF placement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a demand dataset for the topology.
    Generate(Common),
    /// Train one forecaster per flow and report RMSE per training length.
    Train(Common),
    /// Run the two-phase placement for one scenario.
    Solve(Common),
    /// Run a parameter sweep and write CSV + JSON reports.
    Sweep(Common),
    /// Write the placement problem in LP format.
    ExportLp {
        #[command(flatten)]
        common: Common,
        /// 1: phase-1 problem on the scenario view; 2: phase-2 problem
        /// with the solver's phase-1 placement as prior.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        phase: u8,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// exact, greedy, ff or rf.
    #[arg(long)]
    solver: Option<SolverKind>,
    /// obsv, over or pred.
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: $VNFSIM_OUT, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Topology name or file.
    #[arg(long)]
    topology: Option<String>,
    /// Demand dataset file.
    #[arg(long)]
    demands: Option<PathBuf>,
    /// Model store directory.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.solver {
            cfg.solver = s;
        }
        if let Some(s) = self.scenario {
            cfg.scenario = s;
            cfg.sweep.scenarios = vec![s];
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(t) = &self.topology {
            cfg.topology = t.clone();
        }
        if let Some(d) = &self.demands {
            cfg.demands = Some(d.clone());
        }
        if let Some(m) = &self.models {
            cfg.models = Some(m.clone());
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = match &cli.command {
        Command::Generate(c) | Command::Train(c) | Command::Solve(c) | Command::Sweep(c) => c.verbose,
        Command::ExportLp { common, .. } => common.verbose,
    };
    let level = ["warn", "info", "debug"][usize::from(verbose.min(2))];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Generate(c) => c.resolve().and_then(|cfg| cmd_generate(&cfg)),
        Command::Train(c) => c.resolve().and_then(|cfg| cmd_train(&cfg)),
        Command::Solve(c) => c.resolve().and_then(|cfg| cmd_solve(&cfg)),
        Command::Sweep(c) => c.resolve().and_then(|cfg| cmd_sweep(&cfg)),
        Command::ExportLp { common, phase } => common.resolve().and_then(|cfg| cmd_export_lp(&cfg, *phase)),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

enum Outcome {
    Done,
    Infeasible,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load_demands(cfg: &RunConfig) -> Result<DemandSet> {
    let path = cfg.demands_path();
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read demand dataset {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid demand dataset {}", path.display()))
}

fn model_path(dir: &Path, s: usize, f: usize) -> PathBuf {
    dir.join(format!("flow-{s}-{f}.json"))
}

fn cmd_generate(cfg: &RunConfig) -> Result<Outcome> {
    let topo = build_topology(&cfg.topology_spec()?)?;
    let set = generate_demand_set(seed::derive(cfg.seed, &[seed::label("traffic")]), &topo, &cfg.traffic, cfg.periods())?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let path = cfg.demands_path();
    write_file(&path, serde_json::to_string(&set)?)?;
    let mut csv = Vec::new();
    set.write_csv(&mut csv)?;
    write_file(&path.with_extension("csv"), csv)?;
    println!("{} SFCs, {} flows, {} samples -> {}", set.sfcs.len(), set.flow_count(), set.len(), path.display());
    Ok(Outcome::Done)
}

fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let exp = cfg.experiment()?;
    let set = load_demands(cfg)?;
    let dir = cfg.models_dir();
    create_dir(&dir)?;
    let models = experiment::train_flow_models(&exp, &set, cfg.seed)?;
    for (s, ms) in models.iter().enumerate() {
        for (f, m) in ms.iter().enumerate() {
            m.save_json(&model_path(&dir, s, f))?;
        }
    }
    log::info!("saved {} models to {}", set.flow_count(), dir.display());

    let mut csv = String::from("sfc,flow,train_periods,rmse,baseline_rmse,seconds\n");
    let mut sums = vec![0.0; cfg.rmse_periods.len()];
    for (s, sfc) in set.sfcs.iter().enumerate() {
        for (f, flow) in sfc.flows.iter().enumerate() {
            let rows = evaluate_rmse(
                &flow.values,
                &exp.forecast,
                &cfg.rmse_periods,
                seed::derive(cfg.seed, &[seed::label("rmse"), s as u64, f as u64]),
            )?;
            for (i, r) in rows.iter().enumerate() {
                sums[i] += r.rmse;
                csv.push_str(&format!("{s},{f},{},{},{},{:.3}\n", r.train_periods, r.rmse, r.baseline_rmse, r.train_seconds));
            }
        }
    }
    let out = cfg.out_dir();
    create_dir(&out)?;
    write_file(&out.join("rmse.csv"), csv)?;
    for (n, sum) in cfg.rmse_periods.iter().zip(&sums) {
        println!("train_periods {n:>4}: mean normalized RMSE {:.4}", sum / set.flow_count() as f64);
    }
    Ok(Outcome::Done)
}

/// Phase results without wall-clock data; timings go to `meta`.
#[derive(Serialize)]
struct SolveReport {
    topology: String,
    scenario: ScenarioKind,
    solver: SolverKind,
    seed: u64,
    t0: usize,
    delta_t: usize,
    phase1: SolveResult,
    phase2: Option<SolveResult>,
    meta: Meta,
}

#[derive(Serialize)]
struct Meta {
    phase1_wall_ms: f64,
    phase2_wall_ms: Option<f64>,
}

fn strip_timing(mut r: SolveResult) -> (SolveResult, f64) {
    let ms = std::mem::take(&mut r.stats.wall_ms);
    (r, ms)
}

fn cmd_solve(cfg: &RunConfig) -> Result<Outcome> {
    let exp = cfg.experiment()?;
    let ctx = Context::build(&exp)?;
    let set = load_demands(cfg)?;
    let mut rep = draw_replicate(&exp, cfg.seed, set)?;
    if cfg.scenario == ScenarioKind::Pred {
        rep.forecasts = Some(load_forecasts(cfg, &rep)?);
    }
    let planned = scenario_demand_view(&rep.demands, cfg.scenario, &exp.scenario, rep.t0, rep.forecasts.as_deref())?;
    let observed = observed_at(&rep.demands, rep.t0 + exp.scenario.delta_t);
    let base = build_instance(&exp, &ctx, &rep, None, None, &observed)?;
    let outcome = run_two_phase(&base, &planned, &observed, cfg.solver, cfg.weights, seed::derive(cfg.seed, &[seed::label("solve")]))?;

    let (phase1, p1_ms) = strip_timing(outcome.phase1);
    let (phase2, p2_ms) = match outcome.phase2.map(strip_timing) {
        Some((r, ms)) => (Some(r), Some(ms)),
        None => (None, None),
    };
    let feasible = phase2.as_ref().is_some_and(|r| r.status != SolveStatus::Infeasible);
    match &phase2 {
        Some(r) => println!(
            "{} {} phase 2: {} objective {} (migrations {}, replications {}, cloud {})",
            cfg.scenario,
            cfg.solver,
            r.status,
            r.metrics.objective.value,
            r.metrics.objective.migrations,
            r.metrics.objective.replications,
            r.metrics.objective.cloud_vnfs
        ),
        None => println!("{} {} phase 1: {}", cfg.scenario, cfg.solver, phase1.status),
    }
    let report = SolveReport {
        topology: cfg.topology.clone(),
        scenario: cfg.scenario,
        solver: cfg.solver,
        seed: cfg.seed,
        t0: rep.t0,
        delta_t: exp.scenario.delta_t,
        phase1,
        phase2,
        meta: Meta { phase1_wall_ms: p1_ms, phase2_wall_ms: p2_ms },
    };
    let out = cfg.out_dir();
    create_dir(&out)?;
    write_file(&out.join("solve.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(if feasible { Outcome::Done } else { Outcome::Infeasible })
}

fn load_forecasts(cfg: &RunConfig, rep: &experiment::Replicate) -> Result<Vec<Vec<f64>>> {
    let dir = cfg.models_dir();
    let mut models = Vec::with_capacity(rep.demands.sfcs.len());
    for (s, sfc) in rep.demands.sfcs.iter().enumerate() {
        let ms = (0..sfc.flows.len())
            .map(|f| {
                let p = model_path(&dir, s, f);
                LstmModel::load_json(&p).with_context(|| format!("cannot load model {} (run `vnfsim train` first)", p.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        models.push(ms);
    }
    Ok(experiment::predict_flows(&models, &rep.demands, rep.t0, cfg.scenario_params.delta_t))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let sweep = SweepConfig {
        experiment: cfg.experiment()?,
        axis: cfg.sweep.axis.clone(),
        scenarios: cfg.sweep.scenarios.clone(),
        replicates: cfg.sweep.replicates,
        master_seed: cfg.seed,
        solver: cfg.solver,
        weights: cfg.weights,
    };
    let report = experiment::run_sweep(&sweep, cfg.jobs)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&out.join("sweep.csv"), csv)?;
    let mut json = Vec::new();
    report.write_json(&mut json)?;
    write_file(&out.join("sweep.json"), json)?;
    for s in &report.summary {
        let mean = |x: Option<experiment::Stat>| x.map_or_else(|| "-".to_string(), |x| format!("{:.2}", x.mean));
        println!(
            "{} {:>8} {:<4} ok {:>3}/{:<3} migrations {:>7} replications {:>7} cloud {:>7} objective {:>8}",
            sweep.axis.name(),
            s.axis,
            s.scenario,
            s.ok,
            s.total,
            mean(s.migrations),
            mean(s.replications),
            mean(s.cloud_vnfs),
            mean(s.objective)
        );
    }
    Ok(Outcome::Done)
}

fn cmd_export_lp(cfg: &RunConfig, phase: u8) -> Result<Outcome> {
    let exp = cfg.experiment()?;
    let ctx = Context::build(&exp)?;
    let set = load_demands(cfg)?;
    let mut rep = draw_replicate(&exp, cfg.seed, set)?;
    if cfg.scenario == ScenarioKind::Pred {
        rep.forecasts = Some(load_forecasts(cfg, &rep)?);
    }
    let planned = scenario_demand_view(&rep.demands, cfg.scenario, &exp.scenario, rep.t0, rep.forecasts.as_deref())?;
    let inst1 = build_instance(&exp, &ctx, &rep, None, None, &planned)?;
    let weights1 = cfg.weights.weights(&inst1);
    let text = if phase == 1 {
        export_lp(&inst1, None, &weights1)
    } else {
        let first = solvers::solve(cfg.solver, &SolveRequest::first_phase(&inst1, weights1))?;
        if first.status == SolveStatus::Infeasible {
            eprintln!("phase 1 ({}) found no feasible placement", cfg.solver);
            return Ok(Outcome::Infeasible);
        }
        let observed = observed_at(&rep.demands, rep.t0 + exp.scenario.delta_t);
        let inst2 = build_instance(&exp, &ctx, &rep, None, None, &observed)?;
        export_lp(&inst2, Some(&to_prior(&first.solution)), &cfg.weights.weights(&inst2))
    };
    let summary = match validate_lp(&text) {
        Ok(s) => s,
        Err(e) => bail!("exported LP failed validation: {e}"),
    };
    let out = cfg.out_dir();
    create_dir(&out)?;
    let path = out.join(format!("phase{phase}.lp"));
    write_file(&path, &text)?;
    println!("{} variables ({} binary), {} rows -> {}", summary.variables.len(), summary.binaries.len(), summary.rows, path.display());
    Ok(Outcome::Done)
}
