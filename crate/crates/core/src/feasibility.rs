//! Constraint set of a valid configuration and a validator that reports
//! every violation it finds.
//!
//! The checks, in order:
//! (a) every chain slot placed exactly once,
//! (b) flow assignment consistent with the placement,
//! (c) per-server cores, memory and CPU,
//! (d) per directed switch link, flow load against bandwidth minus the
//!     migration reservation,
//! (e) routing decomposes into ingress → hosts → egress segments,
//! (f) per-flow latency against the delay threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{segment_endpoints, Configuration, Flow, Instance, NetworkState};
use crate::topology::{compute_k_matrix, DirLink, NodeId, Path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    PlacementCardinality,
    AssignmentConsistency,
    CpuCapacity,
    CoreCapacity,
    MemoryCapacity,
    LinkCapacity,
    ChainConnectivity,
    DelayBound,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::PlacementCardinality => "placement-cardinality",
            ViolationKind::AssignmentConsistency => "assignment-consistency",
            ViolationKind::CpuCapacity => "cpu-capacity",
            ViolationKind::CoreCapacity => "core-capacity",
            ViolationKind::MemoryCapacity => "memory-capacity",
            ViolationKind::LinkCapacity => "link-capacity",
            ViolationKind::ChainConnectivity => "chain-connectivity",
            ViolationKind::DelayBound => "delay-bound",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Subject {
    Slot { sfc: usize, vnf: usize },
    FlowSlot { flow: usize, sfc: usize, vnf: usize },
    Server { server: usize },
    Link { from: NodeId, to: NodeId },
    Flow { flow: usize },
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Slot { sfc, vnf } => write!(f, "sfc {sfc} vnf {vnf}"),
            Subject::FlowSlot { flow, sfc, vnf } => write!(f, "flow {flow} at sfc {sfc} vnf {vnf}"),
            Subject::Server { server } => write!(f, "server {server}"),
            Subject::Link { from, to } => write!(f, "link {from}->{to}"),
            Subject::Flow { flow } => write!(f, "flow {flow}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: Subject,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {:<28} measured {} limit {}",
            self.kind.to_string(),
            self.subject.to_string(),
            self.measured,
            self.limit
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, subject: Subject, measured: f64, limit: f64, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            subject,
            measured,
            limit,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "feasible: no violations");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

// absolute slack on capacity comparisons
const CAP_EPS: f64 = 1e-9;

/// Validates `config`. When `reference` is given, VNFs whose host differs
/// from the reference are migrations, and the migration bandwidth is
/// reserved on the links of their server-pair paths.
pub fn validate(instance: &Instance, config: &Configuration, reference: Option<&NetworkState>) -> ViolationReport {
    let mut report = ViolationReport::default();
    let slots = instance.slots();

    // (a)
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for e in &config.placement {
        *counts.entry((e.sfc, e.vnf)).or_default() += 1;
    }
    let in_chain = |sfc: usize, vnf: usize| instance.sfcs.get(sfc).is_some_and(|s| s.chain.contains(&vnf));
    for s in &slots {
        let c = counts.get(&(s.sfc, s.vnf)).copied().unwrap_or(0);
        if c != 1 {
            report.push(
                ViolationKind::PlacementCardinality,
                Subject::Slot { sfc: s.sfc, vnf: s.vnf },
                c as f64,
                1.0,
                "",
            );
        }
    }
    for e in &config.placement {
        if !in_chain(e.sfc, e.vnf) {
            report.push(
                ViolationKind::PlacementCardinality,
                Subject::Slot { sfc: e.sfc, vnf: e.vnf },
                1.0,
                0.0,
                "not part of any chain",
            );
        } else if e.server >= instance.servers.len() {
            report.push(
                ViolationKind::PlacementCardinality,
                Subject::Slot { sfc: e.sfc, vnf: e.vnf },
                1.0,
                0.0,
                format!("unknown server {}", e.server),
            );
        }
    }

    // (b)
    let mut assigned: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for a in &config.flow_assignment {
        let ok = instance.flows.get(a.flow).is_some_and(|f| f.sfc == a.sfc) && in_chain(a.sfc, a.vnf);
        if !ok {
            report.push(
                ViolationKind::AssignmentConsistency,
                Subject::FlowSlot {
                    flow: a.flow,
                    sfc: a.sfc,
                    vnf: a.vnf,
                },
                1.0,
                0.0,
                "flow does not belong to this SFC",
            );
            continue;
        }
        assigned.entry((a.flow, a.sfc, a.vnf)).or_default().push(a.server);
    }
    for f in &instance.flows {
        for &vnf in &instance.sfcs[f.sfc].chain {
            let subject = Subject::FlowSlot {
                flow: f.id,
                sfc: f.sfc,
                vnf,
            };
            let servers = assigned.get(&(f.id, f.sfc, vnf)).map(Vec::as_slice).unwrap_or(&[]);
            if servers.len() != 1 {
                report.push(
                    ViolationKind::AssignmentConsistency,
                    subject,
                    servers.len() as f64,
                    1.0,
                    "flow must use exactly one instance",
                );
            } else if !config.placement.contains(&crate::model::PlacementEntry {
                sfc: f.sfc,
                vnf,
                server: servers[0],
            }) {
                report.push(
                    ViolationKind::AssignmentConsistency,
                    subject,
                    servers[0] as f64,
                    0.0,
                    format!("no instance placed at server {}", servers[0]),
                );
            }
        }
    }

    // (c)
    let n_srv = instance.servers.len();
    let mut cores = vec![0u64; n_srv];
    let mut memory = vec![0.0; n_srv];
    let mut cpu = vec![0.0; n_srv];
    for e in config.placement.iter().filter(|e| e.server < n_srv && in_chain(e.sfc, e.vnf)) {
        let v = &instance.vnf_types[e.vnf];
        cores[e.server] += v.cores_required as u64;
        memory[e.server] += v.size_gb;
    }
    for a in &config.flow_assignment {
        if a.server < n_srv && a.flow < instance.flows.len() && a.vnf < instance.vnf_types.len() {
            cpu[a.server] += instance.flows[a.flow].rate * instance.vnf_types[a.vnf].cpu_per_flow_unit_hz;
        }
    }
    for (x, srv) in instance.servers.iter().enumerate() {
        let subject = Subject::Server { server: x };
        if cores[x] > srv.cores as u64 {
            report.push(ViolationKind::CoreCapacity, subject.clone(), cores[x] as f64, srv.cores as f64, "");
        }
        if memory[x] > srv.memory_gb + CAP_EPS {
            report.push(ViolationKind::MemoryCapacity, subject.clone(), memory[x], srv.memory_gb, "");
        }
        if cpu[x] > srv.cpu_hz * (1.0 + CAP_EPS) {
            report.push(ViolationKind::CpuCapacity, subject, cpu[x], srv.cpu_hz, "");
        }
    }

    // (d)
    let topo = &instance.topology;
    let reserved = reserved_links(instance, config, reference);
    let mut load: BTreeMap<DirLink, f64> = BTreeMap::new();
    for (fid, links) in config.routing.iter().enumerate() {
        let Some(flow) = instance.flows.get(fid) else {
            report.push(
                ViolationKind::ChainConnectivity,
                Subject::Flow { flow: fid },
                links.len() as f64,
                0.0,
                "routing row for an unknown flow",
            );
            continue;
        };
        for &(i, j) in links {
            if topo.link_between(i, j).is_none() {
                report.push(
                    ViolationKind::ChainConnectivity,
                    Subject::Link { from: i, to: j },
                    1.0,
                    0.0,
                    format!("flow {fid} routes over a non-existent link"),
                );
                continue;
            }
            *load.entry((i, j)).or_default() += flow.rate_gbps();
        }
    }
    for (&(i, j), &gbps) in &load {
        let idx = topo.link_between(i, j).unwrap();
        let mut cap = topo.links()[idx].bandwidth_gbps;
        if reserved.contains(&idx) {
            cap -= instance.migration_bw;
        }
        if gbps > cap + CAP_EPS {
            report.push(ViolationKind::LinkCapacity, Subject::Link { from: i, to: j }, gbps, cap, "");
        }
    }

    // (e), (f)
    for f in &instance.flows {
        let Some(chain_hosts) = chain_hosts(instance, config, f) else {
            continue;
        };
        let segs = match config.segments.get(f.id).filter(|s| !s.is_empty()) {
            Some(segs) => match check_segments(instance, config, f, &chain_hosts, segs) {
                Ok(()) => segs.clone(),
                Err(detail) => {
                    report.push(
                        ViolationKind::ChainConnectivity,
                        Subject::Flow { flow: f.id },
                        0.0,
                        0.0,
                        detail,
                    );
                    continue;
                }
            },
            None => match segment_decompose(instance, config, f) {
                Ok(segs) => segs,
                Err(v) => {
                    report.violations.push(v);
                    continue;
                }
            },
        };
        let latency: f64 = segs.iter().map(|p| path_latency(instance, p)).sum();
        if latency > f.delay_threshold_ms + CAP_EPS {
            report.push(
                ViolationKind::DelayBound,
                Subject::Flow { flow: f.id },
                latency,
                f.delay_threshold_ms,
                "",
            );
        }
    }
    report
}

fn chain_hosts(instance: &Instance, config: &Configuration, f: &Flow) -> Option<Vec<usize>> {
    instance.sfcs[f.sfc]
        .chain
        .iter()
        .map(|&v| config.host(f.sfc, v).filter(|&h| h < instance.servers.len()))
        .collect()
}

fn path_latency(instance: &Instance, p: &Path) -> f64 {
    p.links()
        .map(|(a, b)| instance.topology.link(a, b).map_or(0.0, |l| l.latency_ms))
        .sum()
}

/// Undirected link indices carrying migration reservations.
pub(crate) fn reserved_links(
    instance: &Instance,
    config: &Configuration,
    reference: Option<&NetworkState>,
) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let Some(reference) = reference else {
        return out;
    };
    let mut pairs = BTreeSet::new();
    for s in instance.slots() {
        if let (Some(src), Some(dst)) = (reference.host(s.sfc, s.vnf), config.host(s.sfc, s.vnf)) {
            let n = instance.servers.len();
            if src != dst && src < n && dst < n {
                pairs.insert((src.min(dst), src.max(dst)));
            }
        }
    }
    if pairs.is_empty() {
        return out;
    }
    let k = compute_k_matrix(&instance.topology);
    for (a, b) in pairs {
        out.extend(k.pair_links(a, b).iter().copied());
    }
    out
}

fn check_segments(
    instance: &Instance,
    config: &Configuration,
    f: &Flow,
    chain_hosts: &[usize],
    segs: &[Path],
) -> Result<(), String> {
    let ends = segment_endpoints(instance, f, chain_hosts);
    if segs.len() != ends.len() - 1 {
        return Err(format!("expected {} segments, found {}", ends.len() - 1, segs.len()));
    }
    let mut union = BTreeSet::new();
    for (g, p) in segs.iter().enumerate() {
        let (a, b) = (ends[g], ends[g + 1]);
        if p.is_empty() {
            if a != b {
                return Err(format!("segment {g} is empty but {a} != {b}"));
            }
            continue;
        }
        if p.src() != Some(a) || p.dst() != Some(b) {
            return Err(format!("segment {g} does not run from {a} to {b}"));
        }
        if let Err(e) = instance.topology.path_from_nodes(p.nodes.clone()) {
            return Err(format!("segment {g}: {e}"));
        }
        union.extend(p.links());
    }
    if &union != config.routing_of(f.id) {
        return Err("routing row differs from the union of segment links".into());
    }
    Ok(())
}

/// Splits the routing row of `flow` into one loop-free path per segment.
pub fn segment_decompose(instance: &Instance, config: &Configuration, flow: &Flow) -> Result<Vec<Path>, Violation> {
    let fail = |measured: f64, detail: String| Violation {
        kind: ViolationKind::ChainConnectivity,
        subject: Subject::Flow { flow: flow.id },
        measured,
        limit: 0.0,
        detail,
    };
    let hosts = chain_hosts(instance, config, flow)
        .ok_or_else(|| fail(0.0, "chain is not fully placed".into()))?;
    let ends = segment_endpoints(instance, flow, &hosts);
    let row = config.routing_of(flow.id);
    let mut out_adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(i, j) in row {
        out_adj.entry(i).or_default().push(j);
    }
    const PER_SEGMENT: usize = 64;
    let options: Vec<Vec<Path>> = ends
        .windows(2)
        .map(|w| paths_within(instance, &out_adj, w[0], w[1], PER_SEGMENT))
        .collect();
    let mut chosen = Vec::with_capacity(options.len());
    if cover(&options, 0, row, &mut BTreeSet::new(), &mut chosen) {
        Ok(chosen)
    } else {
        Err(fail(
            row.len() as f64,
            "routing does not decompose into ingress -> VNF hosts -> egress segments".into(),
        ))
    }
}

fn cover(
    options: &[Vec<Path>],
    g: usize,
    row: &BTreeSet<DirLink>,
    used: &mut BTreeSet<DirLink>,
    chosen: &mut Vec<Path>,
) -> bool {
    if g == options.len() {
        return used == row;
    }
    for p in &options[g] {
        let added: Vec<DirLink> = p.links().filter(|l| !used.contains(l)).collect();
        used.extend(added.iter().copied());
        chosen.push(p.clone());
        if cover(options, g + 1, row, used, chosen) {
            return true;
        }
        chosen.pop();
        for l in &added {
            used.remove(l);
        }
    }
    false
}

/// Loop-free paths from `a` to `b` over the given directed edges, shortest first.
fn paths_within(
    instance: &Instance,
    out_adj: &BTreeMap<NodeId, Vec<NodeId>>,
    a: NodeId,
    b: NodeId,
    cap: usize,
) -> Vec<Path> {
    if a == b {
        return vec![Path::empty()];
    }
    let mut found = Vec::new();
    let mut stack = vec![a];
    fn dfs(
        out_adj: &BTreeMap<NodeId, Vec<NodeId>>,
        b: NodeId,
        stack: &mut Vec<NodeId>,
        found: &mut Vec<Vec<NodeId>>,
        cap: usize,
    ) {
        if found.len() >= cap {
            return;
        }
        let cur = *stack.last().unwrap();
        if cur == b {
            found.push(stack.clone());
            return;
        }
        for &n in out_adj.get(&cur).map(Vec::as_slice).unwrap_or(&[]) {
            if !stack.contains(&n) {
                stack.push(n);
                dfs(out_adj, b, stack, found, cap);
                stack.pop();
            }
        }
    }
    dfs(out_adj, b, &mut stack, &mut found, cap);
    found.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    found
        .into_iter()
        .filter_map(|nodes| instance.topology.path_from_nodes(nodes).ok())
        .collect()
}
