//! Seeded scenario generator and the initial spread-out state.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::validate;
use crate::model::{segment_endpoints, Configuration, Flow, Instance, NetworkState, Server, Sfc, VnfType};
use crate::topology::{build_leaf_spine, shortest_path, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSize {
    Small,
    Medium,
    Large,
}

impl ScenarioSize {
    pub const ALL: [ScenarioSize; 3] = [ScenarioSize::Small, ScenarioSize::Medium, ScenarioSize::Large];

    /// (SFCs, VNFs per SFC, flows).
    pub fn dimensions(self) -> (usize, usize, usize) {
        match self {
            ScenarioSize::Small => (5, 3, 10),
            ScenarioSize::Medium => (10, 3, 15),
            ScenarioSize::Large => (15, 4, 20),
        }
    }
}

impl fmt::Display for ScenarioSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioSize::Small => "small",
            ScenarioSize::Medium => "medium",
            ScenarioSize::Large => "large",
        })
    }
}

impl FromStr for ScenarioSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(ScenarioSize::Small),
            "medium" => Ok(ScenarioSize::Medium),
            "large" => Ok(ScenarioSize::Large),
            _ => Err(Error::invalid(format!("unknown scenario size `{s}`"))),
        }
    }
}

/// Optional replacements for the default generator parameters.
/// Ranges are inclusive `[lo, hi]` pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioOverrides {
    pub n_sfcs: Option<usize>,
    pub vnfs_per_sfc: Option<usize>,
    pub n_flows: Option<usize>,
    pub n_vnf_types: Option<usize>,
    pub n_spine: Option<usize>,
    pub n_leaf: Option<usize>,
    pub n_servers: Option<usize>,
    pub link_bw_gbps: Option<f64>,
    pub link_latency_ms: Option<f64>,
    pub vnf_size_gb: Option<[f64; 2]>,
    pub cpu_per_flow_unit_hz: Option<f64>,
    pub migration_penalty: Option<f64>,
    pub revenue_rate: Option<f64>,
    pub server_cpu_hz: Option<f64>,
    pub server_memory_gb: Option<f64>,
    pub server_cores: Option<u32>,
    pub server_power_w: Option<[f64; 2]>,
    pub server_overhead: Option<[f64; 2]>,
    pub flow_rate: Option<[f64; 2]>,
    pub flow_delay_ms: Option<[f64; 2]>,
    pub migration_bw: Option<f64>,
    pub downtime_constant: Option<f64>,
}

/// Fully resolved generator parameters.
#[derive(Debug, Clone, PartialEq)]
struct Params {
    n_sfcs: usize,
    vnfs_per_sfc: usize,
    n_flows: usize,
    n_vnf_types: usize,
    n_spine: usize,
    n_leaf: usize,
    n_servers: usize,
    link_bw: f64,
    link_latency: f64,
    vnf_size: [f64; 2],
    cpu_per_unit: f64,
    penalty: f64,
    revenue: f64,
    cpu_hz: f64,
    memory_gb: f64,
    cores: u32,
    power: [f64; 2],
    overhead: [f64; 2],
    rate: [f64; 2],
    delay: [f64; 2],
    migration_bw: f64,
    downtime: f64,
}

impl Params {
    fn resolve(size: ScenarioSize, o: &ScenarioOverrides) -> Result<Self> {
        let (s, v, f) = size.dimensions();
        let vnfs_per_sfc = o.vnfs_per_sfc.unwrap_or(v);
        let p = Params {
            n_sfcs: o.n_sfcs.unwrap_or(s),
            vnfs_per_sfc,
            n_flows: o.n_flows.unwrap_or(f),
            n_vnf_types: o.n_vnf_types.unwrap_or(2 * vnfs_per_sfc),
            n_spine: o.n_spine.unwrap_or(5),
            n_leaf: o.n_leaf.unwrap_or(10),
            n_servers: o.n_servers.unwrap_or(10),
            link_bw: o.link_bw_gbps.unwrap_or(10.0),
            link_latency: o.link_latency_ms.unwrap_or(1.0),
            vnf_size: o.vnf_size_gb.unwrap_or([1.0, 2.0]),
            cpu_per_unit: o.cpu_per_flow_unit_hz.unwrap_or(100.0),
            penalty: o.migration_penalty.unwrap_or(1.0),
            revenue: o.revenue_rate.unwrap_or(500.0),
            cpu_hz: o.server_cpu_hz.unwrap_or(2e9),
            memory_gb: o.server_memory_gb.unwrap_or(50.0),
            cores: o.server_cores.unwrap_or(16),
            power: o.server_power_w.unwrap_or([20.0, 90.0]),
            overhead: o.server_overhead.unwrap_or([20.0, 50.0]),
            rate: o.flow_rate.unwrap_or([50.0, 100.0]),
            delay: o.flow_delay_ms.unwrap_or([50.0, 100.0]),
            migration_bw: o.migration_bw.unwrap_or(1.0),
            downtime: o.downtime_constant.unwrap_or(0.05),
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let counts = [
            ("n_sfcs", self.n_sfcs),
            ("vnfs_per_sfc", self.vnfs_per_sfc),
            ("n_flows", self.n_flows),
            ("n_spine", self.n_spine),
            ("n_leaf", self.n_leaf),
            ("n_servers", self.n_servers),
        ];
        for (name, c) in counts {
            if c == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.n_vnf_types < self.vnfs_per_sfc {
            return Err(Error::invalid("n_vnf_types must be at least vnfs_per_sfc"));
        }
        if self.cores == 0 {
            return Err(Error::invalid("server_cores must be at least 1"));
        }
        let positive = [
            ("link_bw_gbps", self.link_bw),
            ("server_cpu_hz", self.cpu_hz),
            ("server_memory_gb", self.memory_gb),
            ("migration_bw", self.migration_bw),
            ("downtime_constant", self.downtime),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("link_latency_ms", self.link_latency),
            ("cpu_per_flow_unit_hz", self.cpu_per_unit),
            ("migration_penalty", self.penalty),
            ("revenue_rate", self.revenue),
        ];
        for (name, x) in non_negative {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        let ranges = [
            ("vnf_size_gb", self.vnf_size, true),
            ("server_power_w", self.power, true),
            ("server_overhead", self.overhead, false),
            ("flow_rate", self.rate, true),
            ("flow_delay_ms", self.delay, true),
        ];
        for (name, [lo, hi], strict) in ranges {
            let lo_ok = if strict { lo > 0.0 } else { lo >= 0.0 };
            if !(lo_ok && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(format!("{name} range [{lo}, {hi}] is invalid")));
            }
        }
        if self.migration_bw > self.link_bw {
            return Err(Error::invalid("migration_bw exceeds the link bandwidth"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Deterministic scenario for `(size, seed, overrides)`.
pub fn generate_scenario(size: ScenarioSize, seed: u64, overrides: Option<&ScenarioOverrides>) -> Result<Instance> {
    let p = Params::resolve(size, overrides.unwrap_or(&ScenarioOverrides::default()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = build_leaf_spine(p.n_spine, p.n_leaf, p.n_servers, p.link_bw, p.link_latency)?;

    let vnf_types = (0..p.n_vnf_types)
        .map(|id| VnfType {
            id,
            size_gb: uniform(&mut rng, p.vnf_size),
            cpu_per_flow_unit_hz: p.cpu_per_unit,
            cores_required: 1,
            migration_penalty: p.penalty,
        })
        .collect();
    let sfcs = (0..p.n_sfcs)
        .map(|id| Sfc {
            id,
            chain: sample(&mut rng, p.n_vnf_types, p.vnfs_per_sfc).into_vec(),
            revenue_rate: p.revenue,
        })
        .collect();
    let servers = topology
        .servers()
        .iter()
        .enumerate()
        .map(|(id, &node)| Server {
            id,
            node,
            switch: topology.attachment(node),
            cpu_hz: p.cpu_hz,
            memory_gb: p.memory_gb,
            cores: p.cores,
            power_w: uniform(&mut rng, p.power),
            overhead: uniform(&mut rng, p.overhead),
        })
        .collect();
    let leaves: Vec<usize> = (p.n_spine..p.n_spine + p.n_leaf).collect();
    debug_assert!(leaves.iter().all(|&l| topology.kind(l) == NodeKind::Switch));
    let flows = (0..p.n_flows)
        .map(|id| Flow {
            id,
            sfc: id % p.n_sfcs,
            rate: uniform(&mut rng, p.rate),
            delay_threshold_ms: uniform(&mut rng, p.delay),
            ingress: leaves[rng.random_range(0..leaves.len())],
            egress: leaves[rng.random_range(0..leaves.len())],
        })
        .collect();

    let instance = Instance {
        topology,
        servers,
        vnf_types,
        sfcs,
        flows,
        migration_bw: p.migration_bw,
        downtime_constant: p.downtime,
        alpha_grid: crate::model::default_alpha_grid(),
    };
    instance.validate()?;
    Ok(instance)
}

/// Spreads VNF instances round-robin over all servers (slot i starts at
/// server i mod X, moving on while the server is full) and routes every
/// segment on its shortest path.
pub fn initial_state(instance: &Instance) -> Result<NetworkState> {
    let slots = instance.slots();
    let n = instance.servers.len();
    if n == 0 {
        return Err(Error::infeasible("instance has no servers"));
    }
    let mut cores = vec![0u64; n];
    let mut memory = vec![0.0; n];
    let mut cpu = vec![0.0; n];
    let mut hosts = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        let vnf = &instance.vnf_types[slot.vnf];
        let demand = instance.slot_cpu_hz(slot);
        let mut blocked = "cores";
        let chosen = (0..n).map(|d| (i + d) % n).find(|&x| {
            let s = &instance.servers[x];
            if cores[x] + vnf.cores_required as u64 > s.cores as u64 {
                blocked = "cores";
                false
            } else if memory[x] + vnf.size_gb > s.memory_gb + 1e-9 {
                blocked = "memory";
                false
            } else if cpu[x] + demand > s.cpu_hz + 1e-9 {
                blocked = "CPU";
                false
            } else {
                true
            }
        });
        let Some(x) = chosen else {
            return Err(Error::infeasible(format!(
                "no server has enough {blocked} for VNF {} of SFC {}",
                slot.vnf, slot.sfc
            )));
        };
        cores[x] += vnf.cores_required as u64;
        memory[x] += vnf.size_gb;
        cpu[x] += demand;
        hosts.push(x);
    }

    let offsets = instance.slot_offsets();
    let mut segments = Vec::with_capacity(instance.flows.len());
    for f in &instance.flows {
        let k = instance.sfcs[f.sfc].chain.len();
        let ends = segment_endpoints(instance, f, &hosts[offsets[f.sfc]..offsets[f.sfc] + k]);
        let segs = ends
            .windows(2)
            .map(|w| shortest_path(&instance.topology, w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        segments.push(segs);
    }
    let state = Configuration::from_hosts(instance, &hosts, segments);
    let report = validate(instance, &state, None);
    if !report.is_feasible() {
        let first = report.violations[0].kind;
        return Err(Error::Infeasible {
            message: format!("initial state violates {first}"),
            report: Some(report),
        });
    }
    Ok(state)
}
