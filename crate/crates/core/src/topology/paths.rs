//! Loopless k-shortest paths (Yen) and the admissible/sync path catalog.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use super::{LinkId, NodeId, PathId, ServerId, Topology};

/// A simple path through the topology with its servers in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub id: PathId,
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    /// Servers of every node on the path, node order first, then server id.
    pub servers: Vec<ServerId>,
    /// Sum of link delays in link order (seconds).
    pub delay_s: f64,
    pub src: NodeId,
    pub dst: NodeId,
    pub traverses_cloud: bool,
}

impl Path {
    /// Index of `node` within [`Path::nodes`].
    pub fn node_position(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    pub fn uses_link(&self, link: LinkId) -> bool {
        self.links.contains(&link)
    }

    pub fn contains_server(&self, x: ServerId) -> bool {
        self.servers.contains(&x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("source and destination are both `{0}`")]
    SameEndpoints(String),
    #[error("endpoint `{0}` is the cloud node")]
    CloudEndpoint(String),
    #[error("only {found} cloud-avoiding paths from `{src}` to `{dst}`, {needed} required")]
    TooFewPaths { src: String, dst: String, found: usize, needed: usize },
    #[error("no path from `{src}` to `{dst}`")]
    Unreachable { src: String, dst: String },
}

/// How many paths to precompute per endpoint pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PathPolicy {
    pub cloud_free: usize,
    pub via_cloud: usize,
    /// Node-to-cloud synchronization paths per node.
    pub cloud_sync: usize,
    /// Fail when a pair has fewer than `cloud_free` cloud-avoiding paths;
    /// otherwise keep whatever exists (toy instances).
    pub strict: bool,
}

impl Default for PathPolicy {
    fn default() -> Self {
        Self { cloud_free: 3, via_cloud: 1, cloud_sync: 2, strict: true }
    }
}

impl PathPolicy {
    pub fn lenient() -> Self {
        Self { strict: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn path_delay(topo: &Topology, links: &[LinkId]) -> f64 {
    links.iter().map(|&l| topo.link(l).delay_s).sum()
}

fn links_of(topo: &Topology, nodes: &[NodeId]) -> Vec<LinkId> {
    nodes.windows(2).map(|w| topo.link_between(w[0], w[1]).expect("consecutive path nodes are linked")).collect()
}

/// Dijkstra by link delay avoiding `banned_nodes` and `banned_links`.
/// Ties resolve towards lower node ids.
fn dijkstra(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    banned_nodes: &HashSet<NodeId>,
    banned_links: &HashSet<LinkId>,
) -> Option<Vec<NodeId>> {
    let n = topo.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<NodeId>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[src.0] = 0.0;
    heap.push(Reverse((Dist(0.0), src)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u.0] {
            continue;
        }
        if u == dst {
            break;
        }
        for &l in topo.out_links(u) {
            let link = topo.link(l);
            if banned_links.contains(&l) || banned_nodes.contains(&link.dst) {
                continue;
            }
            let nd = d + link.delay_s;
            if nd < dist[link.dst.0] {
                dist[link.dst.0] = nd;
                prev[link.dst.0] = Some(u);
                heap.push(Reverse((Dist(nd), link.dst)));
            }
        }
    }
    if !dist[dst.0].is_finite() {
        return None;
    }
    let mut nodes = vec![dst];
    let mut cur = dst;
    while let Some(p) = prev[cur.0] {
        nodes.push(p);
        cur = p;
    }
    nodes.reverse();
    Some(nodes)
}

/// Up to `k` loopless paths from `src` to `dst` in non-decreasing delay
/// order (Yen's algorithm). With `avoid_cloud` the cloud node is removed
/// from the graph. Equal delays are ordered by hop count, then node ids.
pub fn k_shortest_paths(topo: &Topology, src: NodeId, dst: NodeId, k: usize, avoid_cloud: bool) -> Vec<Vec<NodeId>> {
    let mut base_banned = HashSet::new();
    if avoid_cloud {
        if src == topo.cloud_node() || dst == topo.cloud_node() {
            return Vec::new();
        }
        base_banned.insert(topo.cloud_node());
    }
    if k == 0 || src == dst {
        return Vec::new();
    }
    let Some(first) = dijkstra(topo, src, dst, &base_banned, &HashSet::new()) else {
        return Vec::new();
    };
    let mut found: Vec<Vec<NodeId>> = vec![first];
    let mut candidates: Vec<(f64, Vec<NodeId>)> = Vec::new();
    let mut seen: HashSet<Vec<NodeId>> = found.iter().cloned().collect();

    while found.len() < k {
        let last = found.last().unwrap().clone();
        for i in 0..last.len() - 1 {
            let spur = last[i];
            let root = &last[..=i];
            let mut banned_links = HashSet::new();
            for p in &found {
                if p.len() > i + 1 && &p[..=i] == root {
                    banned_links.insert(topo.link_between(p[i], p[i + 1]).unwrap());
                }
            }
            let mut banned_nodes = base_banned.clone();
            banned_nodes.extend(root[..i].iter().copied());
            if let Some(spur_path) = dijkstra(topo, spur, dst, &banned_nodes, &banned_links) {
                let mut total = root[..i].to_vec();
                total.extend(spur_path);
                if seen.insert(total.clone()) {
                    let delay = path_delay(topo, &links_of(topo, &total));
                    candidates.push((delay, total));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.0.total_cmp(&b.0).then(a.1.len().cmp(&b.1.len())).then_with(|| a.1.cmp(&b.1)))
            .map(|(i, _)| i)
            .unwrap();
        found.push(candidates.swap_remove(best).1);
    }
    found
}

/// Interned set of paths with per-pair admissible and synchronization lists.
#[derive(Debug, Clone)]
pub struct PathCatalog {
    paths: Vec<Path>,
    by_nodes: HashMap<Vec<NodeId>, PathId>,
    admissible: BTreeMap<(NodeId, NodeId), Vec<PathId>>,
    sync: BTreeMap<(NodeId, NodeId), Vec<PathId>>,
}

impl PathCatalog {
    /// Precomputes admissible paths for every endpoint pair in `pairs` and
    /// the synchronization paths of the whole topology:
    ///
    /// - per pair: the `cloud_free` shortest cloud-avoiding paths and the
    ///   `via_cloud` shortest cloud-traversing ones;
    /// - per ordered non-cloud pair: one designated shortest path;
    /// - per node: the `cloud_sync` shortest node-to-cloud paths.
    ///
    /// Replicas sharing a node need no synchronization path.
    pub fn build(topo: &Topology, pairs: impl IntoIterator<Item = (NodeId, NodeId)>, policy: PathPolicy) -> Result<Self, PathError> {
        let mut cat = Self { paths: Vec::new(), by_nodes: HashMap::new(), admissible: BTreeMap::new(), sync: BTreeMap::new() };
        let name = |n: NodeId| topo.node(n).name.clone();
        let cloud = topo.cloud_node();

        for (src, dst) in pairs {
            if cat.admissible.contains_key(&(src, dst)) {
                continue;
            }
            if src == dst {
                return Err(PathError::SameEndpoints(name(src)));
            }
            for n in [src, dst] {
                if n == cloud {
                    return Err(PathError::CloudEndpoint(name(n)));
                }
            }
            let free = k_shortest_paths(topo, src, dst, policy.cloud_free, true);
            if free.is_empty() || (policy.strict && free.len() < policy.cloud_free) {
                return Err(PathError::TooFewPaths { src: name(src), dst: name(dst), found: free.len(), needed: policy.cloud_free });
            }
            let mut ids: Vec<PathId> = free.into_iter().map(|p| cat.intern(topo, p)).collect();
            for p in cloud_paths(topo, src, dst, policy.via_cloud) {
                ids.push(cat.intern(topo, p));
            }
            cat.admissible.insert((src, dst), ids);
        }

        let edge: Vec<NodeId> = topo.edge_nodes().collect();
        for &n in &edge {
            for &m in &edge {
                if n == m {
                    continue;
                }
                let p = k_shortest_paths(topo, n, m, 1, true);
                let p = p.into_iter().next().ok_or_else(|| PathError::Unreachable { src: name(n), dst: name(m) })?;
                let id = cat.intern(topo, p);
                cat.sync.insert((n, m), vec![id]);
            }
            let to_cloud = k_shortest_paths(topo, n, cloud, policy.cloud_sync.max(1), false);
            if to_cloud.is_empty() {
                return Err(PathError::Unreachable { src: name(n), dst: name(cloud) });
            }
            let ids = to_cloud.into_iter().map(|p| cat.intern(topo, p)).collect();
            cat.sync.insert((n, cloud), ids);
        }
        Ok(cat)
    }

    fn intern(&mut self, topo: &Topology, nodes: Vec<NodeId>) -> PathId {
        if let Some(&id) = self.by_nodes.get(&nodes) {
            return id;
        }
        let id = PathId(self.paths.len());
        let links = links_of(topo, &nodes);
        let servers = nodes.iter().flat_map(|&n| topo.servers_at(n).iter().copied()).collect();
        let path = Path {
            id,
            delay_s: path_delay(topo, &links),
            src: nodes[0],
            dst: *nodes.last().unwrap(),
            traverses_cloud: nodes.contains(&topo.cloud_node()),
            links,
            servers,
            nodes: nodes.clone(),
        };
        self.paths.push(path);
        self.by_nodes.insert(nodes, id);
        id
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn path(&self, id: PathId) -> &Path {
        &self.paths[id.0]
    }

    /// Admissible paths for an endpoint pair: cloud-avoiding ones first (by
    /// delay), then the cloud-traversing ones.
    pub fn admissible(&self, src: NodeId, dst: NodeId) -> &[PathId] {
        self.admissible.get(&(src, dst)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.admissible.keys().copied()
    }

    /// Candidate synchronization paths from `from` to `to`.
    pub fn sync_paths(&self, from: NodeId, to: NodeId) -> &[PathId] {
        self.sync.get(&(from, to)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All synchronization path lists keyed by ordered node pair.
    pub fn sync_table(&self) -> &BTreeMap<(NodeId, NodeId), Vec<PathId>> {
        &self.sync
    }
}

/// Shortest cloud-traversing paths: the shortest src->cloud segment joined
/// with the shortest cloud->dst segment, falling back to the direct cloud
/// links if the segments would overlap.
fn cloud_paths(topo: &Topology, src: NodeId, dst: NodeId, k: usize) -> Vec<Vec<NodeId>> {
    if k == 0 {
        return Vec::new();
    }
    let cloud = topo.cloud_node();
    let (no_nodes, no_links) = (HashSet::new(), HashSet::new());
    let direct = vec![src, cloud, dst];
    let joined = (|| {
        let mut a = dijkstra(topo, src, cloud, &no_nodes, &no_links)?;
        let b = dijkstra(topo, cloud, dst, &no_nodes, &no_links)?;
        a.extend_from_slice(&b[1..]);
        let unique: HashSet<_> = a.iter().collect();
        (unique.len() == a.len()).then_some(a)
    })();
    let mut out = vec![joined.unwrap_or_else(|| direct.clone())];
    if k > 1 && out[0] != direct {
        out.push(direct);
    }
    out.truncate(k);
    out
}
