//! Undirected data-center graph: switches, servers, links, hop-count paths
//! and the shared-link matrix used by the migration concurrency model.
//!
//! Node ids are dense indices. Servers are leaves of the graph (degree one),
//! so a loop-free path can only touch a server at one of its endpoints.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Directed link as an ordered switch (or node) pair.
pub type DirLink = (NodeId, NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Switch,
    Server,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_gbps: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyDoc {
    switches: Vec<NodeId>,
    servers: Vec<NodeId>,
    links: Vec<Link>,
}

/// Validated, immutable network graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct Topology {
    kinds: Vec<NodeKind>,
    links: Vec<Link>,
    switches: Vec<NodeId>,
    servers: Vec<NodeId>,
    // neighbor lists sorted by neighbor id: (neighbor, link index)
    adjacency: Vec<Vec<(NodeId, usize)>>,
    link_index: BTreeMap<(NodeId, NodeId), usize>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.kinds == other.kinds && self.links == other.links
    }
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;

    fn try_from(doc: TopologyDoc) -> Result<Self> {
        let n = doc.switches.len() + doc.servers.len();
        let mut kinds = vec![None; n];
        for (&id, kind) in doc
            .switches
            .iter()
            .map(|id| (id, NodeKind::Switch))
            .chain(doc.servers.iter().map(|id| (id, NodeKind::Server)))
        {
            let slot = kinds
                .get_mut(id)
                .ok_or_else(|| Error::InvalidTopology(format!("node id {id} out of range 0..{n}")))?;
            if slot.is_some() {
                return Err(Error::InvalidTopology(format!("node id {id} listed twice")));
            }
            *slot = Some(kind);
        }
        let kinds = kinds.into_iter().map(|k| k.expect("ids are a permutation")).collect();
        Topology::new(kinds, doc.links)
    }
}

impl From<Topology> for TopologyDoc {
    fn from(t: Topology) -> Self {
        TopologyDoc {
            switches: t.switches,
            servers: t.servers,
            links: t.links,
        }
    }
}

impl Topology {
    pub fn new(kinds: Vec<NodeKind>, links: Vec<Link>) -> Result<Self> {
        let n = kinds.len();
        if n == 0 {
            return Err(Error::InvalidTopology("graph has no nodes".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut link_index = BTreeMap::new();
        for (idx, link) in links.iter().enumerate() {
            if link.a >= n || link.b >= n {
                return Err(Error::InvalidTopology(format!(
                    "link {idx} references a node outside 0..{n}"
                )));
            }
            if link.a == link.b {
                return Err(Error::InvalidTopology(format!("link {idx} is a self loop")));
            }
            if !(link.bandwidth_gbps > 0.0) {
                return Err(Error::InvalidTopology(format!("link {idx} has non-positive bandwidth")));
            }
            if !(link.latency_ms >= 0.0) {
                return Err(Error::InvalidTopology(format!("link {idx} has negative latency")));
            }
            let key = (link.a.min(link.b), link.a.max(link.b));
            if link_index.insert(key, idx).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "duplicate link between {} and {}",
                    key.0, key.1
                )));
            }
            adjacency[link.a].push((link.b, idx));
            adjacency[link.b].push((link.a, idx));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let switches: Vec<_> = (0..n).filter(|&i| kinds[i] == NodeKind::Switch).collect();
        let servers: Vec<_> = (0..n).filter(|&i| kinds[i] == NodeKind::Server).collect();
        for &s in &servers {
            let deg = adjacency[s].len();
            if deg != 1 {
                return Err(Error::InvalidTopology(format!("server node {s} has degree {deg}, expected 1")));
            }
            if kinds[adjacency[s][0].0] != NodeKind::Switch {
                return Err(Error::InvalidTopology(format!("server node {s} is not attached to a switch")));
            }
        }
        let topo = Topology {
            kinds,
            links,
            switches,
            servers,
            adjacency,
            link_index,
        };
        let reach = topo.bfs_distances(0);
        if let Some(lost) = reach.iter().position(|d| d.is_none()) {
            return Err(Error::InvalidTopology(format!("graph is disconnected (node {lost} unreachable)")));
        }
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.kinds[node]
    }

    pub fn switches(&self) -> &[NodeId] {
        &self.switches
    }

    /// Server node ids in ascending order; position in this slice is the server index.
    pub fn servers(&self) -> &[NodeId] {
        &self.servers
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[node].iter().map(|&(n, _)| n)
    }

    /// Index of the undirected link joining `a` and `b`.
    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.link_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn link(&self, a: NodeId, b: NodeId) -> Option<&Link> {
        self.link_between(a, b).map(|i| &self.links[i])
    }

    /// Switch a server node hangs off.
    pub fn attachment(&self, server_node: NodeId) -> NodeId {
        self.adjacency[server_node][0].0
    }

    /// Links with both endpoints on switches.
    pub fn switch_link_count(&self) -> usize {
        self.links
            .iter()
            .filter(|l| self.kinds[l.a] == NodeKind::Switch && self.kinds[l.b] == NodeKind::Switch)
            .count()
    }

    pub(crate) fn bfs_distances(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Builds a path object from a node sequence, checking adjacency and loop-freedom.
    pub fn path_from_nodes(&self, nodes: Vec<NodeId>) -> Result<Path> {
        if nodes.len() == 1 {
            return Err(Error::invalid("a single-node path is not allowed; use the empty path"));
        }
        let mut latency = 0.0;
        for w in nodes.windows(2) {
            let link = self
                .link(w[0], w[1])
                .ok_or_else(|| Error::invalid(format!("nodes {} and {} are not adjacent", w[0], w[1])))?;
            latency += link.latency_ms;
        }
        let mut seen = nodes.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("path revisits a node"));
        }
        Ok(Path {
            nodes,
            latency_ms: latency,
        })
    }
}

/// Loop-free node sequence. The empty path stands for `src == dst`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub latency_ms: f64,
}

impl Path {
    pub fn empty() -> Self {
        Path {
            nodes: Vec::new(),
            latency_ms: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Directed links in traversal order.
    pub fn links(&self) -> impl Iterator<Item = DirLink> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn src(&self) -> Option<NodeId> {
        self.nodes.first().copied()
    }

    pub fn dst(&self) -> Option<NodeId> {
        self.nodes.last().copied()
    }
}

pub fn build_leaf_spine(
    n_spine: usize,
    n_leaf: usize,
    n_servers: usize,
    link_bw_gbps: f64,
    link_latency_ms: f64,
) -> Result<Topology> {
    if n_spine == 0 || n_leaf == 0 || n_servers == 0 {
        return Err(Error::invalid("leaf-spine counts must all be at least 1"));
    }
    // spines first, then leaves, then servers
    let leaf0 = n_spine;
    let server0 = n_spine + n_leaf;
    let mut kinds = vec![NodeKind::Switch; n_spine + n_leaf];
    kinds.extend(std::iter::repeat(NodeKind::Server).take(n_servers));
    let mk = |a, b| Link {
        a,
        b,
        bandwidth_gbps: link_bw_gbps,
        latency_ms: link_latency_ms,
    };
    let mut links = Vec::with_capacity(n_spine * n_leaf + n_servers);
    for spine in 0..n_spine {
        for leaf in 0..n_leaf {
            links.push(mk(spine, leaf0 + leaf));
        }
    }
    for s in 0..n_servers {
        links.push(mk(leaf0 + s % n_leaf, server0 + s));
    }
    Topology::new(kinds, links)
}

/// Minimum-hop path; ties go to the lexicographically smallest node sequence.
pub fn shortest_path(topology: &Topology, src: NodeId, dst: NodeId) -> Result<Path> {
    check_node(topology, src)?;
    check_node(topology, dst)?;
    if src == dst {
        return Ok(Path::empty());
    }
    let dist = topology.bfs_distances(dst);
    let Some(mut remaining) = dist[src] else {
        return Err(Error::NoPath { src, dst });
    };
    let mut nodes = vec![src];
    let mut cur = src;
    while remaining > 0 {
        // neighbors are sorted, so the first closer neighbor is the smallest id
        cur = topology
            .neighbors(cur)
            .find(|&n| dist[n] == Some(remaining - 1))
            .expect("BFS layers are connected");
        nodes.push(cur);
        remaining -= 1;
    }
    topology.path_from_nodes(nodes)
}

/// Up to `k` loop-free paths ordered by (hop count, node sequence).
///
/// Best-first search keyed on `(hops so far + BFS distance to dst, prefix)`.
/// The BFS distance is a consistent lower bound, so complete paths pop in
/// exactly the required order.
pub fn candidate_paths(topology: &Topology, src: NodeId, dst: NodeId, k: usize) -> Result<Vec<Path>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_node(topology, src)?;
    check_node(topology, dst)?;
    if src == dst {
        return Ok(vec![Path::empty()]);
    }
    let dist = topology.bfs_distances(dst);
    let Some(d0) = dist[src] else {
        return Err(Error::NoPath { src, dst });
    };
    const EXPANSION_LIMIT: usize = 1_000_000;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((d0, vec![src])));
    let mut out = Vec::new();
    let mut expansions = 0;
    while let Some(Reverse((_, prefix))) = heap.pop() {
        let last = *prefix.last().unwrap();
        if last == dst {
            out.push(topology.path_from_nodes(prefix)?);
            if out.len() == k {
                break;
            }
            continue;
        }
        expansions += 1;
        if expansions > EXPANSION_LIMIT {
            break;
        }
        for next in topology.neighbors(last) {
            if prefix.contains(&next) {
                continue;
            }
            let Some(h) = dist[next] else { continue };
            let mut ext = prefix.clone();
            ext.push(next);
            heap.push(Reverse((ext.len() - 1 + h, ext)));
        }
    }
    Ok(out)
}

fn check_node(topology: &Topology, node: NodeId) -> Result<()> {
    if node >= topology.node_count() {
        return Err(Error::invalid(format!("node {node} does not exist")));
    }
    Ok(())
}

/// Deterministic migration path between two servers (by server index).
///
/// The path is computed from the lower to the higher server index and reused
/// in both directions, so a pair has one link set regardless of orientation.
pub fn server_pair_path(topology: &Topology, x: usize, y: usize) -> Result<Path> {
    let servers = topology.servers();
    if x >= servers.len() || y >= servers.len() {
        return Err(Error::invalid("server index out of range"));
    }
    let (lo, hi) = (x.min(y), x.max(y));
    let mut p = shortest_path(topology, servers[lo], servers[hi])?;
    if x > y {
        p.nodes.reverse();
    }
    Ok(p)
}

/// Binary K over ordered server pairs: `get(x, y, z, w)` is 1 when the
/// migration paths of {x, y} and {z, w} share an undirected link and the
/// two pairs differ as unordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedLinkMatrix {
    n: usize,
    data: Vec<u8>,
    // undirected link indices per unordered pair, indexed [x * n + y]
    pair_links: Vec<Vec<usize>>,
}

impl SharedLinkMatrix {
    pub fn servers(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize, z: usize, w: usize) -> u8 {
        let n = self.n;
        self.data[((x * n + y) * n + z) * n + w]
    }

    /// Undirected link indices on the migration path of pair (x, y).
    pub fn pair_links(&self, x: usize, y: usize) -> &[usize] {
        &self.pair_links[x * self.n + y]
    }
}

pub fn compute_k_matrix(topology: &Topology) -> SharedLinkMatrix {
    let n = topology.servers().len();
    let words = topology.links().len().div_ceil(64);
    let mut pair_links = vec![Vec::new(); n * n];
    let mut bits = vec![vec![0u64; words]; n * n];
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let path = server_pair_path(topology, x, y).expect("valid topology is connected");
            let mut idx: Vec<usize> = path
                .links()
                .map(|(a, b)| topology.link_between(a, b).unwrap())
                .collect();
            idx.sort_unstable();
            for &l in &idx {
                bits[x * n + y][l / 64] |= 1 << (l % 64);
            }
            pair_links[x * n + y] = idx;
        }
    }
    let mut data = vec![0u8; n * n * n * n];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let same = (x == z && y == w) || (x == w && y == z);
                    if same {
                        continue;
                    }
                    let a = &bits[x * n + y];
                    let b = &bits[z * n + w];
                    if a.iter().zip(b).any(|(p, q)| p & q != 0) {
                        data[((x * n + y) * n + z) * n + w] = 1;
                    }
                }
            }
        }
    }
    SharedLinkMatrix { n, data, pair_links }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line3() -> Topology {
        let l = |a, b| Link {
            a,
            b,
            bandwidth_gbps: 10.0,
            latency_ms: 1.0,
        };
        Topology::new(vec![NodeKind::Switch; 3], vec![l(0, 1), l(1, 2)]).unwrap()
    }

    #[test]
    fn leaf_spine_paper_size() {
        let t = build_leaf_spine(5, 10, 10, 10.0, 1.0).unwrap();
        assert_eq!(t.node_count(), 25);
        assert_eq!(t.links().len(), 60);
        assert_eq!(t.switch_link_count(), 50);
        let mut per_leaf = vec![0; 10];
        for &s in t.servers() {
            per_leaf[t.attachment(s) - 5] += 1;
        }
        assert!(per_leaf.iter().all(|&c| c == 1));
    }

    #[test]
    fn leaf_spine_minimal_and_round_robin() {
        let t = build_leaf_spine(1, 1, 1, 10.0, 1.0).unwrap();
        assert_eq!((t.node_count(), t.links().len()), (3, 2));
        let t = build_leaf_spine(2, 3, 6, 10.0, 1.0).unwrap();
        let mut per_leaf = [0; 3];
        for &s in t.servers() {
            per_leaf[t.attachment(s) - 2] += 1;
        }
        assert_eq!(per_leaf, [2, 2, 2]);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(matches!(build_leaf_spine(0, 1, 1, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_leaf_spine(1, 0, 1, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_leaf_spine(1, 1, 0, 1.0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn topology_invariants_enforced() {
        let l = |a, b, bw| Link {
            a,
            b,
            bandwidth_gbps: bw,
            latency_ms: 1.0,
        };
        let disconnected = Topology::new(vec![NodeKind::Switch; 3], vec![l(0, 1, 1.0)]);
        assert!(matches!(disconnected, Err(Error::InvalidTopology(_))));
        let bad_bw = Topology::new(vec![NodeKind::Switch; 2], vec![l(0, 1, 0.0)]);
        assert!(bad_bw.is_err());
        let server_deg2 = Topology::new(
            vec![NodeKind::Switch, NodeKind::Switch, NodeKind::Server],
            vec![l(0, 1, 1.0), l(0, 2, 1.0), l(1, 2, 1.0)],
        );
        assert!(server_deg2.is_err());
    }

    #[test]
    fn shortest_path_basics() {
        let t = line3();
        let p = shortest_path(&t, 1, 1).unwrap();
        assert!(p.is_empty());
        assert_eq!((p.hops(), p.latency_ms), (0, 0.0));
        let p = shortest_path(&t, 0, 2).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!((p.hops(), p.latency_ms), (2, 2.0));
    }

    #[test]
    fn leaf_spine_inter_leaf_uses_lowest_spine() {
        let t = build_leaf_spine(5, 10, 10, 10.0, 1.0).unwrap();
        let (a, b) = (t.servers()[0], t.servers()[3]);
        let p = shortest_path(&t, a, b).unwrap();
        assert_eq!(p.hops(), 4);
        assert_eq!(p.nodes, vec![a, 5, 0, 8, b]);
    }

    #[test]
    fn candidates_one_per_spine() {
        let t = build_leaf_spine(5, 10, 10, 10.0, 1.0).unwrap();
        let (a, b) = (t.servers()[1], t.servers()[7]);
        let c = candidate_paths(&t, a, b, 5).unwrap();
        assert_eq!(c.len(), 5);
        let spines: Vec<_> = c.iter().map(|p| p.nodes[2]).collect();
        assert_eq!(spines, vec![0, 1, 2, 3, 4]);
        assert!(c.iter().all(|p| p.hops() == 4));
        assert_eq!(c[0], shortest_path(&t, a, b).unwrap());
    }

    #[test]
    fn candidates_line_has_single_route() {
        let t = line3();
        assert_eq!(candidate_paths(&t, 0, 2, 4).unwrap().len(), 1);
        assert_eq!(candidate_paths(&t, 2, 0, 1).unwrap().len(), 1);
        assert!(candidate_paths(&t, 0, 2, 0).is_err());
    }

    #[test]
    fn k_matrix_line_fixture() {
        // A@sw0, C@sw1, B@sw2
        let l = |a, b| Link {
            a,
            b,
            bandwidth_gbps: 10.0,
            latency_ms: 1.0,
        };
        let mut kinds = vec![NodeKind::Switch; 3];
        kinds.extend([NodeKind::Server; 3]);
        let t = Topology::new(kinds, vec![l(0, 1), l(1, 2), l(0, 3), l(2, 4), l(1, 5)]).unwrap();
        // server indices: A = 0 (node 3), B = 1 (node 4), C = 2 (node 5)
        let k = compute_k_matrix(&t);
        assert_eq!(k.get(0, 1, 0, 2), 1);
        assert_eq!(k.get(0, 1, 0, 1), 0);
        assert_eq!(k.get(0, 1, 1, 0), 0);
    }
}
