//! CPLEX-LP export of the full placement MILP, for cross-checking with an
//! external solver, plus a small grammar validator for the files it writes.
//!
//! The model mirrors [`check_feasibility`](crate::model::check_feasibility)
//! constraint by constraint, so an external optimum equals the exact
//! solver's. Delays are written in milliseconds for numerical scaling; the
//! objective constant rides on a variable `one` fixed to 1.
//!
//! Variables (`s` SFC, `l` demand, `p` path, `v` VNF, `x` server, `n`/`m`
//! nodes):
//!
//! | name | meaning |
//! |---|---|
//! | `z_s_p_l` | demand routed on path |
//! | `a_s_p` | path used by some demand of the SFC |
//! | `f_s_v_x` | VNF instance on server |
//! | `fl_s_v_x_l` | demand served by that instance |
//! | `o_s_v_x` | the instance is the original (lowest server id) |
//! | `r_s_v_m` | some instance sits on node `m` |
//! | `g_s_v_n_m` | original on `n` and a replica on `m` (product of the two) |
//! | `h_s_v_p` | sync path selected |
//! | `dp_s_v_x` | processing delay of the instance |
//! | `dd_s_v_l` | processing delay seen by the demand |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::model::{Instance, ObjectiveWeights, PriorPlacement};
use crate::topology::{LinkId, NodeId, ServerId};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LpError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing or misplaced section `{0}`")]
    Section(&'static str),
    #[error("row name `{0}` is used twice")]
    DuplicateRow(String),
    #[error("variable `{0}` is declared but never used in the objective or a constraint")]
    Dangling(String),
}

const MS: f64 = 1e3;
const TERMS_PER_LINE: usize = 8;

/// Per-SFC index sets.
struct SfcSets {
    /// Servers on at least one admissible path, ascending.
    servers: Vec<ServerId>,
    /// Their nodes, ascending.
    nodes: Vec<NodeId>,
}

fn sfc_sets(inst: &Instance) -> Vec<SfcSets> {
    inst.sfcs
        .iter()
        .map(|sfc| {
            let servers: BTreeSet<ServerId> = sfc.paths.iter().flat_map(|&p| inst.catalog.path(p).servers.iter().copied()).collect();
            let nodes: BTreeSet<NodeId> = servers.iter().map(|&x| inst.topology.server(x).node).collect();
            SfcSets { servers: servers.into_iter().collect(), nodes: nodes.into_iter().collect() }
        })
        .collect()
}

#[derive(Default)]
struct Row {
    terms: Vec<(String, f64)>,
}

impl Row {
    fn add(&mut self, var: impl Into<String>, coef: f64) -> &mut Self {
        let var = var.into();
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some(t) => t.1 += coef,
            None => self.terms.push((var, coef)),
        }
        self
    }

    fn write(&self, out: &mut String) {
        for (i, (var, coef)) in self.terms.iter().enumerate() {
            if i > 0 && i % TERMS_PER_LINE == 0 {
                out.push_str("\n   ");
            }
            let sign = if *coef < 0.0 { "-" } else { "+" };
            if i == 0 && sign == "+" {
                write!(out, " {} {var}", coef).unwrap();
            } else {
                write!(out, " {sign} {} {var}", coef.abs()).unwrap();
            }
        }
    }
}

struct Writer {
    out: String,
    rows: usize,
}

impl Writer {
    fn row(&mut self, name: String, row: &Row, sense: &str, rhs: f64) {
        debug_assert!(!row.terms.is_empty());
        write!(self.out, " {name}:").unwrap();
        row.write(&mut self.out);
        writeln!(self.out, " {sense} {rhs}").unwrap();
        self.rows += 1;
    }
}

fn prior_set(prior: Option<&PriorPlacement>, s: usize, v: usize) -> BTreeSet<ServerId> {
    prior.and_then(|f| f.servers(s, v)).cloned().unwrap_or_default()
}

/// Writes the placement MILP of `inst` in CPLEX-LP format. The output only
/// depends on the arguments, so repeated exports are byte-identical.
pub fn export_lp(inst: &Instance, prior: Option<&PriorPlacement>, weights: &ObjectiveWeights) -> String {
    let topo = &inst.topology;
    let sets = sfc_sets(inst);
    let mut w = Writer { out: String::new(), rows: 0 };
    let is_cloud = |x: ServerId| topo.server(x).is_cloud;
    let node_of = |x: ServerId| topo.server(x).node;

    // objective
    let mut obj = Row::default();
    let mut constant = 0.0;
    for (s, sfc) in inst.sfcs.iter().enumerate() {
        for v in 0..sfc.vnfs.len() {
            let old = prior_set(prior, s, v);
            constant += weights.migrations * old.len() as f64 - weights.replications;
            for &x in &sets[s].servers {
                let mut c = weights.replications;
                if is_cloud(x) {
                    c += weights.cloud;
                }
                if old.contains(&x) {
                    c -= weights.migrations;
                }
                obj.add(format!("f_{s}_{v}_{x}"), c);
            }
        }
    }
    obj.add("one", constant);
    w.out.push_str("\\ VNF placement model\nMinimize\n obj:");
    obj.write(&mut w.out);
    w.out.push_str("\nSubject To\n");

    let mut binaries: Vec<String> = Vec::new();
    let mut bounded: Vec<(String, f64)> = Vec::new();
    let mut link_rows: BTreeMap<LinkId, Row> = BTreeMap::new();
    let mut server_rows: BTreeMap<ServerId, Row> = BTreeMap::new();

    for (s, sfc) in inst.sfcs.iter().enumerate() {
        let xs = &sets[s].servers;
        let ns = &sets[s].nodes;
        let (nd, nv) = (sfc.demands.len(), sfc.vnfs.len());

        for &p in &sfc.paths {
            binaries.push(format!("a_{s}_{p}"));
            for l in 0..nd {
                binaries.push(format!("z_{s}_{p}_{l}"));
            }
        }
        for v in 0..nv {
            for &x in xs {
                binaries.push(format!("f_{s}_{v}_{x}"));
                for l in 0..nd {
                    binaries.push(format!("fl_{s}_{v}_{x}_{l}"));
                }
                binaries.push(format!("o_{s}_{v}_{x}"));
            }
            for &m in ns {
                binaries.push(format!("r_{s}_{v}_{m}"));
            }
            for &n in ns {
                for &m in ns {
                    if n != m {
                        binaries.push(format!("g_{s}_{v}_{n}_{m}"));
                        for &p in inst.catalog.sync_paths(n, m) {
                            binaries.push(format!("h_{s}_{v}_{p}"));
                        }
                    }
                }
            }
        }

        // routing: one path per demand, active-path indicators
        for l in 0..nd {
            let mut r = Row::default();
            for &p in &sfc.paths {
                r.add(format!("z_{s}_{p}_{l}"), 1.0);
            }
            w.row(format!("route_{s}_{l}"), &r, "=", 1.0);
        }
        for &p in &sfc.paths {
            for l in 0..nd {
                let mut r = Row::default();
                r.add(format!("z_{s}_{p}_{l}"), 1.0).add(format!("a_{s}_{p}"), -1.0);
                w.row(format!("act_{s}_{p}_{l}"), &r, "<=", 0.0);
            }
            let mut r = Row::default();
            r.add(format!("a_{s}_{p}"), 1.0);
            for l in 0..nd {
                r.add(format!("z_{s}_{p}_{l}"), -1.0);
            }
            w.row(format!("actub_{s}_{p}"), &r, "<=", 0.0);
        }

        for (v, vnf) in sfc.vnfs.iter().enumerate() {
            // assignment, server on the chosen path, instance set
            for l in 0..nd {
                let mut r = Row::default();
                for &x in xs {
                    r.add(format!("fl_{s}_{v}_{x}_{l}"), 1.0);
                }
                w.row(format!("assign_{s}_{v}_{l}"), &r, "=", 1.0);
                for &x in xs {
                    let mut r = Row::default();
                    r.add(format!("fl_{s}_{v}_{x}_{l}"), 1.0);
                    for &p in sfc.paths.iter().filter(|&&p| inst.catalog.path(p).contains_server(x)) {
                        r.add(format!("z_{s}_{p}_{l}"), -1.0);
                    }
                    w.row(format!("onpath_{s}_{v}_{x}_{l}"), &r, "<=", 0.0);
                    let mut r = Row::default();
                    r.add(format!("fl_{s}_{v}_{x}_{l}"), 1.0).add(format!("f_{s}_{v}_{x}"), -1.0);
                    w.row(format!("host_{s}_{v}_{x}_{l}"), &r, "<=", 0.0);
                }
            }
            for &x in xs {
                let mut r = Row::default();
                r.add(format!("f_{s}_{v}_{x}"), 1.0);
                for l in 0..nd {
                    r.add(format!("fl_{s}_{v}_{x}_{l}"), -1.0);
                }
                w.row(format!("used_{s}_{v}_{x}"), &r, "<=", 0.0);
            }

            // instance count: replicas only where paths diverge
            let mut r = Row::default();
            for &x in xs {
                r.add(format!("f_{s}_{v}_{x}"), 1.0);
            }
            if vnf.replicable {
                for &p in &sfc.paths {
                    r.add(format!("a_{s}_{p}"), -1.0);
                }
                w.row(format!("count_{s}_{v}"), &r, "<=", 0.0);
            } else {
                w.row(format!("count_{s}_{v}"), &r, "<=", 1.0);
            }

            // chain order along the chosen path
            if v > 0 {
                for &p in &sfc.paths {
                    let path = inst.catalog.path(p);
                    let big = path.nodes.len().saturating_sub(1) as f64;
                    for l in 0..nd {
                        let mut r = Row::default();
                        for &x in xs {
                            let pos = path.node_position(node_of(x)).unwrap_or(0) as f64;
                            if pos > 0.0 {
                                r.add(format!("fl_{s}_{v}_{x}_{l}"), pos);
                                r.add(format!("fl_{s}_{}_{x}_{l}", v - 1), -pos);
                            }
                        }
                        r.add(format!("z_{s}_{p}_{l}"), -big);
                        w.row(format!("order_{s}_{v}_{p}_{l}"), &r, ">=", -big);
                    }
                }
            }

            // original = lowest-id instance
            let mut r = Row::default();
            for &x in xs {
                r.add(format!("o_{s}_{v}_{x}"), 1.0);
            }
            w.row(format!("orig_{s}_{v}"), &r, "=", 1.0);
            for (i, &x) in xs.iter().enumerate() {
                let mut r = Row::default();
                r.add(format!("o_{s}_{v}_{x}"), 1.0).add(format!("f_{s}_{v}_{x}"), -1.0);
                w.row(format!("origf_{s}_{v}_{x}"), &r, "<=", 0.0);
                for &y in &xs[..i] {
                    let mut r = Row::default();
                    r.add(format!("o_{s}_{v}_{x}"), 1.0).add(format!("f_{s}_{v}_{y}"), 1.0);
                    w.row(format!("origlow_{s}_{v}_{x}_{y}"), &r, "<=", 1.0);
                }
                let mut r = Row::default();
                r.add(format!("o_{s}_{v}_{x}"), 1.0).add(format!("f_{s}_{v}_{x}"), -1.0);
                for &y in &xs[..i] {
                    r.add(format!("f_{s}_{v}_{y}"), 1.0);
                }
                w.row(format!("origlb_{s}_{v}_{x}"), &r, ">=", 0.0);
            }

            // node occupancy
            for &m in ns {
                let at: Vec<ServerId> = xs.iter().copied().filter(|&x| node_of(x) == m).collect();
                for &y in &at {
                    let mut r = Row::default();
                    r.add(format!("r_{s}_{v}_{m}"), 1.0).add(format!("f_{s}_{v}_{y}"), -1.0);
                    w.row(format!("occ_{s}_{v}_{m}_{y}"), &r, ">=", 0.0);
                }
                let mut r = Row::default();
                r.add(format!("r_{s}_{v}_{m}"), 1.0);
                for &y in &at {
                    r.add(format!("f_{s}_{v}_{y}"), -1.0);
                }
                w.row(format!("occub_{s}_{v}_{m}"), &r, "<=", 0.0);
            }

            // sync: g = (original on n) * (instance on m), one path per g
            for &n in ns {
                for &m in ns {
                    if n == m {
                        continue;
                    }
                    let g = format!("g_{s}_{v}_{n}_{m}");
                    let mut r = Row::default();
                    r.add(g.clone(), 1.0);
                    for &x in xs.iter().filter(|&&x| node_of(x) == n) {
                        r.add(format!("o_{s}_{v}_{x}"), -1.0);
                    }
                    w.row(format!("gorig_{s}_{v}_{n}_{m}"), &r, "<=", 0.0);
                    let mut r = Row::default();
                    r.add(g.clone(), 1.0).add(format!("r_{s}_{v}_{m}"), -1.0);
                    w.row(format!("gocc_{s}_{v}_{n}_{m}"), &r, "<=", 0.0);
                    let mut r = Row::default();
                    r.add(g.clone(), 1.0).add(format!("r_{s}_{v}_{m}"), -1.0);
                    for &x in xs.iter().filter(|&&x| node_of(x) == n) {
                        r.add(format!("o_{s}_{v}_{x}"), -1.0);
                    }
                    w.row(format!("glb_{s}_{v}_{n}_{m}"), &r, ">=", -1.0);
                    let mut r = Row::default();
                    r.add(g, -1.0);
                    for &p in inst.catalog.sync_paths(n, m) {
                        r.add(format!("h_{s}_{v}_{p}"), 1.0);
                    }
                    w.row(format!("sync_{s}_{v}_{n}_{m}"), &r, "=", 0.0);
                }
            }
        }

        // link and server load contributions
        for l in 0..nd {
            let value = sfc.demands[l].value;
            for &p in &sfc.paths {
                for &e in &inst.catalog.path(p).links {
                    if !topo.link(e).touches_cloud {
                        link_rows.entry(e).or_default().add(format!("z_{s}_{p}_{l}"), value);
                    }
                }
            }
        }
        for v in 0..nv {
            let amount = inst.sync_traffic(s, v);
            for &n in ns {
                for &m in ns {
                    if n == m {
                        continue;
                    }
                    for &p in inst.catalog.sync_paths(n, m) {
                        for &e in &inst.catalog.path(p).links {
                            if !topo.link(e).touches_cloud {
                                link_rows.entry(e).or_default().add(format!("h_{s}_{v}_{p}"), amount);
                            }
                        }
                    }
                }
            }
        }
        for (v, vnf) in sfc.vnfs.iter().enumerate() {
            for &x in xs.iter().filter(|&&x| !is_cloud(x)) {
                let row = server_rows.entry(x).or_default();
                for l in 0..nd {
                    row.add(format!("fl_{s}_{v}_{x}_{l}"), vnf.load_ratio * sfc.demands[l].value);
                }
                row.add(format!("f_{s}_{v}_{x}"), vnf.overhead);
            }
        }
    }

    for (e, row) in &link_rows {
        w.row(format!("link_{e}"), row, "<=", topo.link(*e).capacity);
    }
    for (x, row) in &server_rows {
        w.row(format!("server_{x}"), row, "<=", topo.server(*x).capacity);
    }

    // processing delay of every instance (ms), bounded by its maximum
    for (s, sfc) in inst.sfcs.iter().enumerate() {
        let xs = &sets[s].servers;
        for (v, vnf) in sfc.vnfs.iter().enumerate() {
            let dl = &vnf.delays;
            let max_ms = dl.pro_max * MS;
            for &x in xs {
                let dp = format!("dp_{s}_{v}_{x}");
                let mut r = Row::default();
                r.add(dp.clone(), 1.0);
                for l in 0..sfc.demands.len() {
                    let coef = dl.proq * MS * vnf.load_ratio * sfc.demands[l].value / vnf.proc_capacity;
                    r.add(format!("fl_{s}_{v}_{x}_{l}"), -coef);
                }
                if !is_cloud(x) {
                    // prox * utilization, over everything hosted on x
                    let per_unit = dl.prox * MS / topo.server(x).capacity;
                    for (var, coef) in server_rows.get(&x).map_or(&[][..], |row| &row.terms[..]) {
                        r.add(var.clone(), -per_unit * coef);
                    }
                }
                r.add(format!("f_{s}_{v}_{x}"), -max_ms);
                w.row(format!("proc_{s}_{v}_{x}"), &r, ">=", dl.pro_x_min * MS - max_ms);
                bounded.push((dp, max_ms));
            }
        }
    }

    // per-demand processing delay and end-to-end delay
    for (s, sfc) in inst.sfcs.iter().enumerate() {
        let xs = &sets[s].servers;
        for l in 0..sfc.demands.len() {
            for (v, vnf) in sfc.vnfs.iter().enumerate() {
                let max_ms = vnf.delays.pro_max * MS;
                for &x in xs {
                    let mut r = Row::default();
                    r.add(format!("dd_{s}_{v}_{l}"), 1.0).add(format!("dp_{s}_{v}_{x}"), -1.0).add(format!("fl_{s}_{v}_{x}_{l}"), -max_ms);
                    w.row(format!("seen_{s}_{v}_{x}_{l}"), &r, ">=", -max_ms);
                }
            }
            let dt = inst.downtime_s * MS;
            let mut rhs = sfc.max_delay_s * MS;
            let mut r = Row::default();
            for &p in &sfc.paths {
                r.add(format!("z_{s}_{p}_{l}"), inst.catalog.path(p).delay_s * MS);
            }
            for v in 0..sfc.vnfs.len() {
                r.add(format!("dd_{s}_{v}_{l}"), 1.0);
                for x in prior_set(prior, s, v) {
                    rhs -= dt;
                    if xs.contains(&x) {
                        r.add(format!("f_{s}_{v}_{x}"), -dt);
                    }
                }
            }
            w.row(format!("delay_{s}_{l}"), &r, "<=", rhs);
        }
    }

    w.out.push_str("Bounds\n");
    for (var, ub) in &bounded {
        writeln!(w.out, " 0 <= {var} <= {ub}").unwrap();
    }
    w.out.push_str(" one = 1\nBinaries\n");
    for chunk in binaries.chunks(TERMS_PER_LINE) {
        writeln!(w.out, " {}", chunk.join(" ")).unwrap();
    }
    w.out.push_str("End\n");
    w.out
}

/// Variable and row counts of [`export_lp`], from set sizes alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LpCensus {
    pub binaries: usize,
    pub continuous: usize,
    pub rows: usize,
}

pub fn lp_census(inst: &Instance) -> LpCensus {
    let topo = &inst.topology;
    let sets = sfc_sets(inst);
    let mut c = LpCensus { continuous: 1, ..LpCensus::default() };
    let mut links = BTreeSet::new();
    let mut servers = BTreeSet::new();
    for (sfc, set) in inst.sfcs.iter().zip(&sets) {
        let (d, p, v) = (sfc.demands.len(), sfc.paths.len(), sfc.vnfs.len());
        let (x, n) = (set.servers.len(), set.nodes.len());
        let pairs = n * (n - 1);
        let sync: usize = set
            .nodes
            .iter()
            .flat_map(|&a| set.nodes.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| inst.catalog.sync_paths(a, b).len())
            .sum();
        c.binaries += p * (d + 1) + v * (x * (d + 2) + n + pairs + sync);
        c.continuous += v * (x + d);
        c.rows += d + p * (d + 1);
        c.rows += v * (d + 2 * d * x + x + 1);
        c.rows += (v - 1) * p * d;
        c.rows += v * (1 + 2 * x + x * (x - 1) / 2);
        c.rows += v * (x + n);
        c.rows += v * 4 * pairs;
        c.rows += v * x + v * d * x + d;

        let sync_paths = set.nodes.iter().flat_map(|&a| set.nodes.iter().map(move |&b| (a, b))).filter(|(a, b)| a != b);
        let used = sfc.paths.iter().copied().chain(sync_paths.flat_map(|(a, b)| inst.catalog.sync_paths(a, b).iter().copied()));
        for q in used {
            links.extend(inst.catalog.path(q).links.iter().copied().filter(|&e| !topo.link(e).touches_cloud));
        }
        servers.extend(set.servers.iter().copied().filter(|&x| !topo.server(x).is_cloud));
    }
    c.rows += links.len() + servers.len();
    c
}

/// What [`validate_lp`] found in a file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LpSummary {
    pub variables: BTreeSet<String>,
    pub binaries: BTreeSet<String>,
    pub rows: usize,
}

fn is_name(tok: &str) -> bool {
    let mut chars = tok.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok_and(f64::is_finite)
}

/// Parses a linear expression `[+|-] [coef] var ...`, returning variables.
fn parse_expr(tokens: &[&str], line: usize) -> Result<Vec<String>, LpError> {
    let err = |msg: String| LpError::Syntax { line, msg };
    let mut vars = Vec::new();
    let mut i = 0;
    let mut first = true;
    while i < tokens.len() {
        if matches!(tokens[i], "+" | "-") {
            i += 1;
        } else if !first {
            return Err(err(format!("expected + or - before `{}`", tokens[i])));
        }
        first = false;
        if i < tokens.len() && is_number(tokens[i]) {
            i += 1;
        }
        match tokens.get(i) {
            Some(t) if is_name(t) => vars.push(t.to_string()),
            Some(t) => return Err(err(format!("expected a variable, found `{t}`"))),
            None => return Err(err("expression ends without a variable".into())),
        }
        i += 1;
    }
    if vars.is_empty() {
        return Err(err("empty expression".into()));
    }
    Ok(vars)
}

/// Checks the subset of CPLEX-LP that [`export_lp`] writes: the section
/// order, the shape of every row and bound, unique row names, and that
/// every bounded or binary variable occurs in the model.
pub fn validate_lp(text: &str) -> Result<LpSummary, LpError> {
    #[derive(PartialEq, PartialOrd, Clone, Copy)]
    enum Sec {
        Start,
        Objective,
        Rows,
        Bounds,
        Binaries,
        End,
    }
    // join continuation lines (leading whitespace, no row label) onto rows
    let mut statements: Vec<(usize, Sec, String)> = Vec::new();
    let mut sec = Sec::Start;
    let mut summary = LpSummary::default();
    let mut declared = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('\\') {
            continue;
        }
        let next = match trimmed.to_ascii_lowercase().as_str() {
            "minimize" => Some((Sec::Start, Sec::Objective, "Minimize")),
            "subject to" => Some((Sec::Objective, Sec::Rows, "Subject To")),
            "bounds" => Some((Sec::Rows, Sec::Bounds, "Bounds")),
            "binaries" => Some((Sec::Bounds, Sec::Binaries, "Binaries")),
            "end" => Some((Sec::Binaries, Sec::End, "End")),
            _ => None,
        };
        if let Some((before, after, name)) = next {
            if sec != before {
                return Err(LpError::Section(name));
            }
            sec = after;
            continue;
        }
        match sec {
            Sec::Start | Sec::End => return Err(LpError::Syntax { line, msg: "text outside a section".into() }),
            Sec::Objective | Sec::Rows => {
                let continues = raw.starts_with(char::is_whitespace) && !trimmed.contains(':');
                match statements.last_mut() {
                    Some((_, s, text)) if continues && *s == sec => {
                        text.push(' ');
                        text.push_str(trimmed);
                    }
                    _ => statements.push((line, sec, trimmed.to_string())),
                }
            }
            Sec::Bounds => {
                let t: Vec<&str> = trimmed.split_whitespace().collect();
                let ok = match t.as_slice() {
                    [lo, "<=", v, "<=", hi] => is_number(lo) && is_name(v) && is_number(hi),
                    [v, "=", val] | [v, "<=", val] | [v, ">=", val] => is_name(v) && is_number(val),
                    _ => false,
                };
                if !ok {
                    return Err(LpError::Syntax { line, msg: format!("malformed bound `{trimmed}`") });
                }
                declared.insert(t.iter().find(|x| is_name(x)).unwrap().to_string());
            }
            Sec::Binaries => {
                for tok in trimmed.split_whitespace() {
                    if !is_name(tok) {
                        return Err(LpError::Syntax { line, msg: format!("bad binary name `{tok}`") });
                    }
                    summary.binaries.insert(tok.to_string());
                }
            }
        }
    }
    if sec != Sec::End {
        return Err(LpError::Section("End"));
    }
    let mut names = BTreeSet::new();
    let mut objectives = 0;
    for (line, sec, stmt) in statements {
        let (name, body) = stmt.split_once(':').ok_or(LpError::Syntax { line, msg: "row without a name".into() })?;
        let name = name.trim();
        if !is_name(name) {
            return Err(LpError::Syntax { line, msg: format!("bad row name `{name}`") });
        }
        if !names.insert(name.to_string()) {
            return Err(LpError::DuplicateRow(name.to_string()));
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let vars = if sec == Sec::Objective {
            objectives += 1;
            parse_expr(&tokens, line)?
        } else {
            let k = tokens.len();
            if k < 3 || !matches!(tokens[k - 2], "<=" | ">=" | "=") || !is_number(tokens[k - 1]) {
                return Err(LpError::Syntax { line, msg: "row must end with a sense and a number".into() });
            }
            summary.rows += 1;
            parse_expr(&tokens[..k - 2], line)?
        };
        summary.variables.extend(vars);
    }
    if objectives != 1 {
        return Err(LpError::Section("Minimize"));
    }
    for v in declared.iter().chain(&summary.binaries) {
        if !summary.variables.contains(v) {
            return Err(LpError::Dangling(v.clone()));
        }
    }
    Ok(summary)
}
