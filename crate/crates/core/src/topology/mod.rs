//! Network model: nodes, directed links, servers and the third-party cloud.
//!
//! Servers are numbered edge-first in node order; the cloud servers always
//! carry the highest ids. Cloud links and cloud servers are unbounded
//! (`f64::INFINITY` capacity) and excluded from utilization aggregates.

mod geo;
mod paths;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use geo::{haversine_m, propagation_delay_s, GeoCoord, EARTH_RADIUS_KM, FIBRE_SPEED_M_S, SPEED_OF_LIGHT_M_S};
pub use paths::{k_shortest_paths, Path, PathCatalog, PathError, PathPolicy};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(NodeId);
id_type!(LinkId);
id_type!(ServerId);
id_type!(
    /// Index into [`PathCatalog::paths`].
    PathId
);

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub coord: GeoCoord,
    pub is_cloud: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Traffic units; `INFINITY` for links touching the cloud.
    pub capacity: f64,
    /// Propagation delay in seconds.
    pub delay_s: f64,
    pub touches_cloud: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Server {
    pub id: ServerId,
    pub node: NodeId,
    /// Processing units; `INFINITY` for cloud servers.
    pub capacity: f64,
    pub is_cloud: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("link {src} -> {dst} references unknown node `{node}`")]
    UnknownNode { src: String, dst: String, node: String },
    #[error("duplicate link {0} -> {1}")]
    DuplicateLink(String, String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("node `{0}` has invalid coordinates")]
    InvalidCoordinates(String),
    #[error("{what} must be a positive finite number, got {value}")]
    NonPositive { what: String, value: f64 },
    #[error("node `{0}` has no servers")]
    NoServers(String),
    #[error("the non-cloud network is disconnected: `{from}` cannot reach `{to}`")]
    Disconnected { from: String, to: String },
    #[error("node `{node}` lacks a direct link {direction} the cloud")]
    MissingCloudLink { node: String, direction: &'static str },
    #[error("expected exactly one cloud node, found {0}")]
    CloudCount(usize),
    #[error("at least one non-cloud node is required")]
    Empty,
    #[error("invalid reference: {0}")]
    InvalidReference(String),
}

/// Serialized topology description.
///
/// Links are directed and carry only endpoints and capacity; delays are
/// always derived from node coordinates. Links to and from the cloud are
/// added automatically for every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(default)]
    pub name: Option<String>,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub cloud: CloudSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub servers: usize,
    pub server_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub src: String,
    pub dst: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    #[serde(default = "default_cloud_id")]
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub servers: usize,
}

fn default_cloud_id() -> String {
    "cloud".to_string()
}

impl TopologySpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Built-in topologies: `n7` (Braunschweig area, cloud in Frankfurt) and
    /// `n45` (South Carolina, cloud in Northern Virginia).
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "n7" => include_str!("../../data/n7.json"),
            "n45" => include_str!("../../data/n45.json"),
            _ => return None,
        };
        Some(Self::from_json(text).expect("built-in topology is valid JSON"))
    }
}

/// Immutable network model.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    servers: Vec<Server>,
    cloud_node: NodeId,
    node_servers: Vec<Vec<ServerId>>,
    out_links: Vec<Vec<LinkId>>,
    link_by_ends: HashMap<(NodeId, NodeId), LinkId>,
}

fn check_positive(what: impl Into<String>, value: f64) -> Result<(), TopologyError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(TopologyError::NonPositive { what: what.into(), value })
    }
}

/// Materializes a [`TopologySpec`]: adds the cloud node, its servers and
/// unbounded links to/from every node, and derives all link delays.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology, TopologyError> {
    if spec.nodes.is_empty() {
        return Err(TopologyError::Empty);
    }
    let mut index: HashMap<&str, NodeId> = HashMap::new();
    let mut nodes = Vec::with_capacity(spec.nodes.len() + 1);
    for (i, n) in spec.nodes.iter().enumerate() {
        if n.id == spec.cloud.id || index.insert(n.id.as_str(), NodeId(i)).is_some() {
            return Err(TopologyError::DuplicateNode(n.id.clone()));
        }
        let coord = GeoCoord::new(n.lat, n.lon);
        if !coord.is_valid() {
            return Err(TopologyError::InvalidCoordinates(n.id.clone()));
        }
        if n.servers == 0 {
            return Err(TopologyError::NoServers(n.id.clone()));
        }
        check_positive(format!("server capacity of `{}`", n.id), n.server_capacity)?;
        nodes.push(Node { id: NodeId(i), name: n.id.clone(), coord, is_cloud: false });
    }
    let cloud_node = NodeId(nodes.len());
    let cloud_coord = GeoCoord::new(spec.cloud.lat, spec.cloud.lon);
    if !cloud_coord.is_valid() {
        return Err(TopologyError::InvalidCoordinates(spec.cloud.id.clone()));
    }
    if spec.cloud.servers == 0 {
        return Err(TopologyError::NoServers(spec.cloud.id.clone()));
    }
    nodes.push(Node { id: cloud_node, name: spec.cloud.id.clone(), coord: cloud_coord, is_cloud: true });

    let mut links = Vec::new();
    let mut seen = HashSet::new();
    for l in &spec.links {
        let lookup = |name: &str| {
            index.get(name).copied().ok_or_else(|| TopologyError::UnknownNode {
                src: l.src.clone(),
                dst: l.dst.clone(),
                node: name.to_string(),
            })
        };
        let (src, dst) = (lookup(&l.src)?, lookup(&l.dst)?);
        if src == dst {
            return Err(TopologyError::SelfLoop(l.src.clone()));
        }
        if !seen.insert((src, dst)) {
            return Err(TopologyError::DuplicateLink(l.src.clone(), l.dst.clone()));
        }
        check_positive(format!("capacity of link {} -> {}", l.src, l.dst), l.capacity)?;
        links.push(Link {
            id: LinkId(links.len()),
            src,
            dst,
            capacity: l.capacity,
            delay_s: propagation_delay_s(nodes[src.0].coord, nodes[dst.0].coord),
            touches_cloud: false,
        });
    }
    for n in 0..cloud_node.0 {
        for (src, dst) in [(NodeId(n), cloud_node), (cloud_node, NodeId(n))] {
            links.push(Link {
                id: LinkId(links.len()),
                src,
                dst,
                capacity: f64::INFINITY,
                delay_s: propagation_delay_s(nodes[src.0].coord, nodes[dst.0].coord),
                touches_cloud: true,
            });
        }
    }

    let mut servers = Vec::new();
    for (i, n) in spec.nodes.iter().enumerate() {
        for _ in 0..n.servers {
            servers.push(Server { id: ServerId(servers.len()), node: NodeId(i), capacity: n.server_capacity, is_cloud: false });
        }
    }
    for _ in 0..spec.cloud.servers {
        servers.push(Server { id: ServerId(servers.len()), node: cloud_node, capacity: f64::INFINITY, is_cloud: true });
    }

    Topology::from_parts(nodes, links, servers)
}

impl Topology {
    /// Assembles a topology from explicit parts and checks every invariant.
    pub fn from_parts(nodes: Vec<Node>, links: Vec<Link>, servers: Vec<Server>) -> Result<Self, TopologyError> {
        let clouds: Vec<_> = nodes.iter().filter(|n| n.is_cloud).map(|n| n.id).collect();
        if clouds.len() != 1 {
            return Err(TopologyError::CloudCount(clouds.len()));
        }
        let cloud_node = clouds[0];
        if nodes.len() < 2 {
            return Err(TopologyError::Empty);
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id != NodeId(i) {
                return Err(TopologyError::InvalidReference(format!("node `{}` has id {} at index {i}", n.name, n.id)));
            }
        }
        let node_ok = |id: NodeId| id.0 < nodes.len();
        let mut link_by_ends = HashMap::new();
        let mut out_links = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            if l.id != LinkId(i) || !node_ok(l.src) || !node_ok(l.dst) {
                return Err(TopologyError::InvalidReference(format!("link {}", l.id)));
            }
            let touches = l.src == cloud_node || l.dst == cloud_node;
            if touches != l.touches_cloud {
                return Err(TopologyError::InvalidReference(format!("link {} cloud flag", l.id)));
            }
            if !(l.capacity > 0.0) {
                return Err(TopologyError::NonPositive { what: format!("capacity of link {}", l.id), value: l.capacity });
            }
            if !(l.delay_s >= 0.0) {
                return Err(TopologyError::NonPositive { what: format!("delay of link {}", l.id), value: l.delay_s });
            }
            if link_by_ends.insert((l.src, l.dst), l.id).is_some() {
                return Err(TopologyError::DuplicateLink(nodes[l.src.0].name.clone(), nodes[l.dst.0].name.clone()));
            }
            out_links[l.src.0].push(l.id);
        }
        let mut node_servers = vec![Vec::new(); nodes.len()];
        for (i, s) in servers.iter().enumerate() {
            if s.id != ServerId(i) || !node_ok(s.node) {
                return Err(TopologyError::InvalidReference(format!("server {}", s.id)));
            }
            if s.is_cloud != (s.node == cloud_node) {
                return Err(TopologyError::InvalidReference(format!("server {} cloud flag", s.id)));
            }
            if !(s.capacity > 0.0) {
                return Err(TopologyError::NonPositive { what: format!("capacity of server {}", s.id), value: s.capacity });
            }
            node_servers[s.node.0].push(s.id);
        }
        let topo = Self { nodes, links, servers, cloud_node, node_servers, out_links, link_by_ends };
        for n in topo.edge_nodes() {
            let name = &topo.nodes[n.0].name;
            if topo.node_servers[n.0].is_empty() {
                return Err(TopologyError::NoServers(name.clone()));
            }
            if topo.link_between(n, cloud_node).is_none() {
                return Err(TopologyError::MissingCloudLink { node: name.clone(), direction: "to" });
            }
            if topo.link_between(cloud_node, n).is_none() {
                return Err(TopologyError::MissingCloudLink { node: name.clone(), direction: "from" });
            }
        }
        if topo.node_servers[cloud_node.0].is_empty() {
            return Err(TopologyError::NoServers(topo.nodes[cloud_node.0].name.clone()));
        }
        topo.check_edge_connectivity()?;
        Ok(topo)
    }

    fn check_edge_connectivity(&self) -> Result<(), TopologyError> {
        let edge: Vec<NodeId> = self.edge_nodes().collect();
        let root = edge[0];
        for reverse in [false, true] {
            let mut seen = vec![false; self.nodes.len()];
            seen[root.0] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(n) = queue.pop_front() {
                for l in &self.links {
                    if l.touches_cloud {
                        continue;
                    }
                    let (from, to) = if reverse { (l.dst, l.src) } else { (l.src, l.dst) };
                    if from == n && !seen[to.0] {
                        seen[to.0] = true;
                        queue.push_back(to);
                    }
                }
            }
            if let Some(&miss) = edge.iter().find(|n| !seen[n.0]) {
                let (a, b) = if reverse { (miss, root) } else { (root, miss) };
                return Err(TopologyError::Disconnected { from: self.nodes[a.0].name.clone(), to: self.nodes[b.0].name.clone() });
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn servers(&self) -> &[Server] {
        &self.servers
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn server(&self, id: ServerId) -> &Server {
        &self.servers[id.0]
    }

    pub fn cloud_node(&self) -> NodeId {
        self.cloud_node
    }

    /// Non-cloud nodes in id order.
    pub fn edge_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| !n.is_cloud).map(|n| n.id)
    }

    pub fn servers_at(&self, node: NodeId) -> &[ServerId] {
        &self.node_servers[node.0]
    }

    pub fn cloud_servers(&self) -> &[ServerId] {
        &self.node_servers[self.cloud_node.0]
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node.0]
    }

    pub fn link_between(&self, src: NodeId, dst: NodeId) -> Option<LinkId> {
        self.link_by_ends.get(&(src, dst)).copied()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    /// Returns a copy with every edge server set to `capacity`.
    pub fn with_server_capacity(&self, capacity: f64) -> Self {
        let mut t = self.clone();
        for s in t.servers.iter_mut().filter(|s| !s.is_cloud) {
            s.capacity = capacity;
        }
        t
    }

    /// Returns a copy with every non-cloud link set to `capacity`.
    pub fn with_link_capacity(&self, capacity: f64) -> Self {
        let mut t = self.clone();
        for l in t.links.iter_mut().filter(|l| !l.touches_cloud) {
            l.capacity = capacity;
        }
        t
    }
}
