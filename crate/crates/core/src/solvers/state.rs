//! Incremental placement state with undo, shared by all solvers.

use crate::model::{Instance, PlacementSolution};
use crate::topology::{PathId, ServerId};

#[derive(Debug)]
enum Op {
    Route { s: usize, d: usize, links: Vec<(usize, f64)> },
    Assign { s: usize, v: usize, d: usize, server: (usize, f64), opened: bool },
    Sync { s: usize, v: usize, p: PathId, links: Vec<(usize, f64)> },
    Unsync { s: usize, v: usize, p: PathId, links: Vec<(usize, f64)> },
}

/// A partial [`PlacementSolution`] plus running link/server loads.
///
/// Every mutation is journaled; [`PlacementState::rollback`] restores the
/// exact previous load values, so undo never accumulates rounding error.
pub(crate) struct PlacementState<'a> {
    pub inst: &'a Instance,
    pub sol: PlacementSolution,
    link_load: Vec<f64>,
    server_load: Vec<f64>,
    /// `[s][v]` traffic per hosting server.
    assigned: Vec<Vec<Vec<(ServerId, f64)>>>,
    /// Per server, the `(s, v)` pairs it hosts.
    hosted: Vec<Vec<(usize, usize)>>,
    journal: Vec<Op>,
}

impl<'a> PlacementState<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        Self {
            inst,
            sol: PlacementSolution::empty(inst),
            link_load: vec![0.0; inst.topology.links().len()],
            server_load: vec![0.0; inst.topology.servers().len()],
            assigned: inst.sfcs.iter().map(|s| vec![Vec::new(); s.vnfs.len()]).collect(),
            hosted: vec![Vec::new(); inst.topology.servers().len()],
            journal: Vec::new(),
        }
    }

    pub fn mark(&self) -> usize {
        self.journal.len()
    }

    pub fn rollback(&mut self, mark: usize) {
        while self.journal.len() > mark {
            match self.journal.pop().unwrap() {
                Op::Route { s, d, links } => {
                    self.sol.demand_path[s][d] = None;
                    for (l, old) in links {
                        self.link_load[l] = old;
                    }
                }
                Op::Assign { s, v, d, server: (x, old), opened } => {
                    let x_id = ServerId(x);
                    self.sol.demand_vnf_server[s][v][d] = None;
                    self.server_load[x] = old;
                    let value = self.inst.sfcs[s].demands[d].value;
                    let hosts = &mut self.assigned[s][v];
                    let i = hosts.iter().position(|h| h.0 == x_id).unwrap();
                    if opened {
                        hosts.remove(i);
                        self.sol.vnf_servers[s][v].remove(&x_id);
                        let h = &mut self.hosted[x];
                        h.remove(h.iter().position(|&e| e == (s, v)).unwrap());
                    } else {
                        hosts[i].1 -= value;
                    }
                }
                Op::Sync { s, v, p, links } => {
                    self.sol.sync_paths[s][v].remove(&p);
                    for (l, old) in links {
                        self.link_load[l] = old;
                    }
                }
                Op::Unsync { s, v, p, links } => {
                    self.sol.sync_paths[s][v].insert(p);
                    for (l, old) in links {
                        self.link_load[l] = old;
                    }
                }
            }
        }
    }

    fn demand(&self, s: usize, d: usize) -> f64 {
        self.inst.sfcs[s].demands[d].value
    }

    /// Whether `amount` more traffic fits on every bounded link of `p`,
    /// allowing utilization up to `1 + slack`.
    pub fn path_fits(&self, p: PathId, amount: f64, slack: f64) -> bool {
        let topo = &self.inst.topology;
        self.inst.catalog.path(p).links.iter().all(|&l| {
            let link = topo.link(l);
            link.touches_cloud || (self.link_load[l.0] + amount) / link.capacity <= 1.0 + slack
        })
    }

    pub fn route(&mut self, s: usize, d: usize, p: PathId) {
        let value = self.demand(s, d);
        let links = self.add_on_path(p, value);
        self.sol.demand_path[s][d] = Some(p);
        self.journal.push(Op::Route { s, d, links });
    }

    fn add_on_path(&mut self, p: PathId, amount: f64) -> Vec<(usize, f64)> {
        let path = self.inst.catalog.path(p);
        let mut saved = Vec::with_capacity(path.links.len());
        for &l in &path.links {
            saved.push((l.0, self.link_load[l.0]));
            self.link_load[l.0] += amount;
        }
        saved
    }

    pub fn hosts(&self, s: usize, v: usize, x: ServerId) -> bool {
        self.sol.vnf_servers[s][v].contains(&x)
    }

    /// Server load after mapping demand `d` of `(s, v)` to `x`.
    fn load_after(&self, s: usize, v: usize, d: usize, x: ServerId) -> f64 {
        let vnf = &self.inst.sfcs[s].vnfs[v];
        let mut load = self.server_load[x.0] + vnf.load_ratio * self.demand(s, d);
        if !self.hosts(s, v, x) {
            load += vnf.overhead;
        }
        load
    }

    fn traffic(&self, s: usize, v: usize, x: ServerId) -> f64 {
        self.assigned[s][v].iter().find(|h| h.0 == x).map_or(0.0, |h| h.1)
    }

    /// Capacity and processing-delay check for mapping demand `d` of
    /// `(s, v)` to `x`: the server stays within `1 + slack` utilization and
    /// no VNF hosted there (including this one) exceeds its delay bound.
    pub fn server_fits(&self, s: usize, v: usize, d: usize, x: ServerId, slack: f64) -> bool {
        let server = self.inst.topology.server(x);
        let load = self.load_after(s, v, d, x);
        let u = load / server.capacity;
        if u > 1.0 + slack {
            return false;
        }
        let value = self.demand(s, d);
        let delay_ok = |s2: usize, v2: usize, extra: f64| {
            let vnf = &self.inst.sfcs[s2].vnfs[v2];
            let q = self.traffic(s2, v2, x) + extra;
            crate::model::processing_delay_bound_ok(vnf, q, u, slack)
        };
        if !delay_ok(s, v, value) {
            return false;
        }
        self.hosted[x.0].iter().filter(|&&e| e != (s, v)).all(|&(s2, v2)| delay_ok(s2, v2, 0.0))
    }

    /// Whether `(s, v)` may run on `x` in terms of instance count: an
    /// already hosting server is always fine; a new instance needs the VNF
    /// to be replicable and the instance count to stay within the number of
    /// distinct paths the SFC uses once `p` is counted.
    pub fn may_open(&self, s: usize, v: usize, x: ServerId, p: PathId) -> bool {
        if self.hosts(s, v, x) {
            return true;
        }
        let count = self.sol.vnf_servers[s][v].len();
        if count == 0 {
            return true;
        }
        if !self.inst.sfcs[s].vnfs[v].replicable {
            return false;
        }
        count < self.active_paths(s, Some(p))
    }

    pub fn active_paths(&self, s: usize, extra: Option<PathId>) -> usize {
        let mut paths: Vec<PathId> = self.sol.demand_path[s].iter().flatten().copied().chain(extra).collect();
        paths.sort();
        paths.dedup();
        paths.len()
    }

    pub fn assign(&mut self, s: usize, v: usize, d: usize, x: ServerId) {
        let old = self.server_load[x.0];
        let opened = !self.hosts(s, v, x);
        self.server_load[x.0] = self.load_after(s, v, d, x);
        let value = self.demand(s, d);
        if opened {
            self.sol.vnf_servers[s][v].insert(x);
            self.assigned[s][v].push((x, value));
            self.hosted[x.0].push((s, v));
        } else {
            self.assigned[s][v].iter_mut().find(|h| h.0 == x).unwrap().1 += value;
        }
        self.sol.demand_vnf_server[s][v][d] = Some(x);
        self.journal.push(Op::Assign { s, v, d, server: (x.0, old), opened });
    }

    pub fn add_sync(&mut self, s: usize, v: usize, p: PathId) {
        let amount = self.inst.sync_traffic(s, v);
        let links = self.add_on_path(p, amount);
        self.sol.sync_paths[s][v].insert(p);
        self.journal.push(Op::Sync { s, v, p, links });
    }

    /// Node pairs `(original node, replica node)` that need a sync path.
    pub fn sync_pairs(&self, s: usize, v: usize) -> Vec<(crate::topology::NodeId, crate::topology::NodeId)> {
        let topo = &self.inst.topology;
        let mut it = self.sol.vnf_servers[s][v].iter();
        let Some(&orig) = it.next() else { return Vec::new() };
        let from = topo.server(orig).node;
        let mut to: Vec<_> = it.map(|&x| topo.server(x).node).filter(|&n| n != from).collect();
        to.sort();
        to.dedup();
        to.into_iter().map(|m| (from, m)).collect()
    }

    /// Brings the sync paths of SFC `s` in line with its instances: drops
    /// paths whose replica pair no longer exists (the original can change
    /// when a lower-id instance appears) and adds, for each uncovered pair,
    /// the first catalog sync path with room. Returns `false` if some pair
    /// found no path with room.
    pub fn refresh_sync(&mut self, s: usize, slack: f64) -> bool {
        let mut ok = true;
        for v in 0..self.inst.sfcs[s].vnfs.len() {
            let amount = self.inst.sync_traffic(s, v);
            let pairs = self.sync_pairs(s, v);
            let stale: Vec<PathId> = self.sol.sync_paths[s][v]
                .iter()
                .copied()
                .filter(|&p| {
                    let path = self.inst.catalog.path(p);
                    !pairs.contains(&(path.src, path.dst))
                })
                .collect();
            for p in stale {
                let path = self.inst.catalog.path(p);
                let mut links = Vec::with_capacity(path.links.len());
                for &l in &path.links {
                    links.push((l.0, self.link_load[l.0]));
                    self.link_load[l.0] -= amount;
                }
                self.sol.sync_paths[s][v].remove(&p);
                self.journal.push(Op::Unsync { s, v, p, links });
            }
            for (from, to) in pairs {
                let have = self.sol.sync_paths[s][v].iter().any(|&p| {
                    let path = self.inst.catalog.path(p);
                    path.src == from && path.dst == to
                });
                if have {
                    continue;
                }
                let choice = self.inst.catalog.sync_paths(from, to).iter().copied().find(|&p| self.path_fits(p, amount, slack));
                match choice {
                    Some(p) => self.add_sync(s, v, p),
                    None => ok = false,
                }
            }
        }
        ok
    }

    /// Places every demand of `s` on its cloud-traversing path with one
    /// instance per VNF: on one of `keep` (previous hosts) where that fits,
    /// otherwise on the path's cloud server. No sync traffic is needed.
    /// Rolls back and returns false when the chain cannot be placed.
    pub fn place_sfc_via_cloud(&mut self, s: usize, keep: impl Fn(usize, ServerId) -> bool) -> bool {
        let sfc = &self.inst.sfcs[s];
        let topo = &self.inst.topology;
        let catalog = &self.inst.catalog;
        let Some((p, cloud)) = sfc.paths.iter().find_map(|&p| {
            let path = catalog.path(p);
            path.servers.iter().find(|&&x| topo.server(x).is_cloud).map(|&x| (p, x))
        }) else {
            return false;
        };
        let mark = self.mark();
        for d in 0..sfc.demands.len() {
            if !self.path_fits(p, sfc.demands[d].value, 0.0) {
                self.rollback(mark);
                return false;
            }
            self.route(s, d, p);
        }
        let mut min_pos = 0;
        for v in 0..sfc.vnfs.len() {
            let path = catalog.path(p);
            let mut options: Vec<ServerId> = path.servers.iter().copied().filter(|&x| x != cloud && keep(v, x)).collect();
            options.push(cloud);
            let placed = options.into_iter().find(|&x| {
                let Some(pos) = self.inst.server_position(p, x).filter(|&pos| pos >= min_pos) else { return false };
                let vm = self.mark();
                for d in 0..sfc.demands.len() {
                    if !(self.may_open(s, v, x, p) && self.server_fits(s, v, d, x, 0.0)) {
                        self.rollback(vm);
                        return false;
                    }
                    self.assign(s, v, d, x);
                }
                min_pos = pos;
                true
            });
            if placed.is_none() {
                self.rollback(mark);
                return false;
            }
        }
        true
    }

    pub fn into_solution(self) -> PlacementSolution {
        self.sol
    }
}
