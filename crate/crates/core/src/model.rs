//! Problem instance and network configuration types.
//!
//! A [`Configuration`] is the sparse form of the binary matrices describing a
//! placement (`(sfc, vnf, server)` triples), the per-flow service assignment
//! and the per-flow directed routing matrix. Both the current state and a
//! candidate reconfiguration share this shape.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{DirLink, NodeId, NodeKind, Path, Topology};

/// Flow rates are stored in flow units; one unit is one Mbps.
pub const FLOW_UNITS_PER_GBPS: f64 = 1000.0;
/// GB to Gbit.
pub const BITS_PER_BYTE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfType {
    pub id: usize,
    /// Memory plus state moved by a migration, in GB.
    pub size_gb: f64,
    /// CPU demand in Hz per flow unit.
    pub cpu_per_flow_unit_hz: f64,
    pub cores_required: u32,
    pub migration_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sfc {
    pub id: usize,
    pub chain: Vec<usize>,
    /// Dollars per Gbit per second of lost traffic.
    pub revenue_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: usize,
    /// Graph node of the server.
    pub node: NodeId,
    /// Switch the server is attached to.
    pub switch: NodeId,
    pub cpu_hz: f64,
    pub memory_gb: f64,
    pub cores: u32,
    pub power_w: f64,
    pub overhead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: usize,
    pub sfc: usize,
    /// Rate in flow units (Mbps).
    pub rate: f64,
    pub delay_threshold_ms: f64,
    pub ingress: NodeId,
    pub egress: NodeId,
}

impl Flow {
    pub fn rate_gbps(&self) -> f64 {
        self.rate / FLOW_UNITS_PER_GBPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub topology: Topology,
    pub servers: Vec<Server>,
    pub vnf_types: Vec<VnfType>,
    pub sfcs: Vec<Sfc>,
    pub flows: Vec<Flow>,
    /// Bandwidth reserved for migration traffic, Gbps.
    pub migration_bw: f64,
    /// Stop-and-copy time of the minimal execution state, seconds.
    pub downtime_constant: f64,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
}

pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).rev().map(|i| i as f64 / 10.0).collect()
}

/// One VNF instance: position `position` of the chain of `sfc`, of type `vnf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub sfc: usize,
    pub vnf: usize,
    pub position: usize,
}

impl Instance {
    pub fn switch_count(&self) -> usize {
        self.topology.switches().len()
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    /// VNF instances in SFC-major, chain order.
    pub fn slots(&self) -> Vec<Slot> {
        self.sfcs
            .iter()
            .enumerate()
            .flat_map(|(s, sfc)| {
                sfc.chain.iter().enumerate().map(move |(position, &vnf)| Slot { sfc: s, vnf, position })
            })
            .collect()
    }

    /// Index of the first slot of each SFC in [`Instance::slots`].
    pub fn slot_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.sfcs
            .iter()
            .map(|s| {
                let o = acc;
                acc += s.chain.len();
                o
            })
            .collect()
    }

    pub fn flows_of(&self, sfc: usize) -> impl Iterator<Item = &Flow> + '_ {
        self.flows.iter().filter(move |f| f.sfc == sfc)
    }

    /// Aggregate rate of the flows of an SFC, in Gbps.
    pub fn sfc_rate_gbps(&self, sfc: usize) -> f64 {
        self.flows_of(sfc).map(Flow::rate_gbps).sum()
    }

    /// CPU demand of one slot: every flow of its SFC is served by it.
    pub fn slot_cpu_hz(&self, slot: &Slot) -> f64 {
        let per_unit = self.vnf_types[slot.vnf].cpu_per_flow_unit_hz;
        self.flows_of(slot.sfc).map(|f| f.rate * per_unit).sum()
    }

    /// Checks ids, references and value ranges; errors carry a JSON pointer.
    pub fn validate(&self) -> Result<()> {
        let refer = |pointer: String, message: String| Error::Reference { pointer, message };
        let range = |pointer: String, message: &str| Error::Reference {
            pointer,
            message: message.to_string(),
        };
        if !(self.migration_bw > 0.0) {
            return Err(range("/migration_bw".into(), "must be positive"));
        }
        if !(self.downtime_constant > 0.0) {
            return Err(range("/downtime_constant".into(), "must be positive"));
        }
        let topo = &self.topology;
        if self.servers.len() != topo.servers().len() {
            return Err(refer(
                "/servers".into(),
                format!(
                    "{} servers listed but topology has {}",
                    self.servers.len(),
                    topo.servers().len()
                ),
            ));
        }
        if let Some(min_bw) = topo.links().iter().map(|l| l.bandwidth_gbps).reduce(f64::min) {
            if self.migration_bw > min_bw {
                return Err(range("/migration_bw".into(), "exceeds the bandwidth of some link"));
            }
        }
        for (i, s) in self.servers.iter().enumerate() {
            let p = format!("/servers/{i}");
            if s.id != i {
                return Err(refer(format!("{p}/id"), format!("expected id {i}")));
            }
            if s.node != topo.servers()[i] {
                return Err(refer(format!("{p}/node"), format!("expected server node {}", topo.servers()[i])));
            }
            if s.switch != topo.attachment(s.node) {
                return Err(refer(format!("{p}/switch"), "does not match the attachment link".into()));
            }
            if !(s.cpu_hz > 0.0 && s.memory_gb > 0.0 && s.cores > 0 && s.power_w > 0.0) {
                return Err(range(p, "capacities and power must be positive"));
            }
            if !(s.overhead >= 0.0) {
                return Err(range(format!("{p}/overhead"), "must be non-negative"));
            }
        }
        for (i, v) in self.vnf_types.iter().enumerate() {
            let p = format!("/vnf_types/{i}");
            if v.id != i {
                return Err(refer(format!("{p}/id"), format!("expected id {i}")));
            }
            if !(v.size_gb > 0.0) || !(v.cpu_per_flow_unit_hz >= 0.0) || !(v.migration_penalty >= 0.0) {
                return Err(range(p, "size must be positive; cpu load and penalty non-negative"));
            }
        }
        for (i, s) in self.sfcs.iter().enumerate() {
            let p = format!("/sfcs/{i}");
            if s.id != i {
                return Err(refer(format!("{p}/id"), format!("expected id {i}")));
            }
            if s.chain.is_empty() {
                return Err(range(format!("{p}/chain"), "chain must not be empty"));
            }
            if !(s.revenue_rate >= 0.0) {
                return Err(range(format!("{p}/revenue_rate"), "must be non-negative"));
            }
            let mut seen = BTreeSet::new();
            for (j, &v) in s.chain.iter().enumerate() {
                if v >= self.vnf_types.len() {
                    return Err(refer(format!("{p}/chain/{j}"), format!("unknown VNF type {v}")));
                }
                if !seen.insert(v) {
                    return Err(refer(format!("{p}/chain/{j}"), format!("VNF type {v} repeats in the chain")));
                }
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            let p = format!("/flows/{i}");
            if f.id != i {
                return Err(refer(format!("{p}/id"), format!("expected id {i}")));
            }
            if f.sfc >= self.sfcs.len() {
                return Err(refer(format!("{p}/sfc"), format!("unknown SFC {}", f.sfc)));
            }
            if !(f.rate > 0.0) || !(f.delay_threshold_ms > 0.0) {
                return Err(range(p, "rate and delay threshold must be positive"));
            }
            for (field, node) in [("ingress", f.ingress), ("egress", f.egress)] {
                if node >= topo.node_count() || topo.kind(node) != NodeKind::Switch {
                    return Err(refer(format!("{p}/{field}"), format!("node {node} is not a switch")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub sfc: usize,
    pub vnf: usize,
    pub server: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowAssignment {
    pub server: usize,
    pub flow: usize,
    pub vnf: usize,
    pub sfc: usize,
}

/// Placement, flow assignment and routing of one network configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Configuration {
    pub placement: BTreeSet<PlacementEntry>,
    pub flow_assignment: BTreeSet<FlowAssignment>,
    /// Directed switch links used by each flow, indexed by flow id.
    pub routing: Vec<BTreeSet<DirLink>>,
    /// Optional per-flow segment paths (ingress → VNF hosts → egress).
    /// An empty list means "not recorded"; it is then recovered from routing.
    #[serde(default)]
    pub segments: Vec<Vec<Path>>,
}

/// The configuration currently deployed.
pub type NetworkState = Configuration;

impl Configuration {
    /// Builds a configuration from one host per slot and explicit segments.
    pub fn from_hosts(instance: &Instance, hosts: &[usize], segments: Vec<Vec<Path>>) -> Self {
        let slots = instance.slots();
        debug_assert_eq!(slots.len(), hosts.len());
        let placement = slots
            .iter()
            .zip(hosts)
            .map(|(s, &server)| PlacementEntry {
                sfc: s.sfc,
                vnf: s.vnf,
                server,
            })
            .collect();
        let offsets = instance.slot_offsets();
        let mut flow_assignment = BTreeSet::new();
        for f in &instance.flows {
            let chain = &instance.sfcs[f.sfc].chain;
            for (pos, &vnf) in chain.iter().enumerate() {
                flow_assignment.insert(FlowAssignment {
                    server: hosts[offsets[f.sfc] + pos],
                    flow: f.id,
                    vnf,
                    sfc: f.sfc,
                });
            }
        }
        let routing = segments
            .iter()
            .map(|segs| segs.iter().flat_map(|p| p.links()).collect())
            .collect();
        Configuration {
            placement,
            flow_assignment,
            routing,
            segments,
        }
    }

    /// Unique host of `(sfc, vnf)`, if placed exactly once.
    pub fn host(&self, sfc: usize, vnf: usize) -> Option<usize> {
        let mut it = self
            .placement
            .range(
                PlacementEntry { sfc, vnf, server: 0 }..=PlacementEntry {
                    sfc,
                    vnf,
                    server: usize::MAX,
                },
            )
            .map(|e| e.server);
        match (it.next(), it.next()) {
            (Some(x), None) => Some(x),
            _ => None,
        }
    }

    /// Host of every slot, failing if any slot is not placed exactly once.
    pub fn hosts(&self, instance: &Instance) -> Result<Vec<usize>> {
        let slots = instance.slots();
        let mut out = Vec::with_capacity(slots.len());
        for s in &slots {
            let h = self.host(s.sfc, s.vnf).ok_or_else(|| {
                Error::InvalidState(format!("VNF {} of SFC {} is not placed exactly once", s.vnf, s.sfc))
            })?;
            if h >= instance.servers.len() {
                return Err(Error::InvalidState(format!("server {h} does not exist")));
            }
            out.push(h);
        }
        if out.len() != self.placement.len() {
            return Err(Error::InvalidState("placement has entries outside the SFC chains".into()));
        }
        Ok(out)
    }

    pub fn routing_of(&self, flow: usize) -> &BTreeSet<DirLink> {
        static EMPTY: BTreeSet<DirLink> = BTreeSet::new();
        self.routing.get(flow).unwrap_or(&EMPTY)
    }

    /// Total directed routing entries over all flows.
    pub fn rule_count(&self) -> usize {
        self.routing.iter().map(BTreeSet::len).sum()
    }
}

/// A reconfiguration target with its evaluated cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconfigSolution {
    #[serde(flatten)]
    pub config: Configuration,
    pub breakdown: crate::cost::CostBreakdown,
}

/// Segment endpoints of a flow given the hosts of its chain:
/// ingress, attachment switch of each VNF host, egress.
pub fn segment_endpoints(instance: &Instance, flow: &Flow, chain_hosts: &[usize]) -> Vec<NodeId> {
    let mut ends = Vec::with_capacity(chain_hosts.len() + 2);
    ends.push(flow.ingress);
    ends.extend(chain_hosts.iter().map(|&h| instance.servers[h].switch));
    ends.push(flow.egress);
    ends
}
