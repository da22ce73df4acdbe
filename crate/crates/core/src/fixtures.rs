//! Small hand-checkable instances shared by tests, the CLI and the bindings.
//!
//! The two-server micro fixture: switches 0 and 1 joined by a link, server 0
//! (node 2) on switch 0 drawing 90 W, server 1 (node 3) on switch 1 drawing
//! 20 W. One SFC with a single 2 GB VNF serves one 4-unit flow entering and
//! leaving at switch 0. The state hosts the VNF on server 0.

use crate::model::{Configuration, Flow, Instance, NetworkState, Server, Sfc, VnfType};
use crate::topology::{Link, NodeKind, Path, Topology};

fn link(a: usize, b: usize) -> Link {
    Link {
        a,
        b,
        bandwidth_gbps: 10.0,
        latency_ms: 1.0,
    }
}

pub fn micro_topology() -> Topology {
    let kinds = vec![NodeKind::Switch, NodeKind::Switch, NodeKind::Server, NodeKind::Server];
    Topology::new(kinds, vec![link(0, 1), link(0, 2), link(1, 3)]).expect("fixture topology is valid")
}

pub fn micro_instance() -> Instance {
    let server = |id: usize, node: usize, switch: usize, power_w: f64, overhead: f64| Server {
        id,
        node,
        switch,
        cpu_hz: 2000.0,
        memory_gb: 50.0,
        cores: 16,
        power_w,
        overhead,
    };
    Instance {
        topology: micro_topology(),
        servers: vec![server(0, 2, 0, 90.0, 50.0), server(1, 3, 1, 20.0, 20.0)],
        vnf_types: vec![VnfType {
            id: 0,
            size_gb: 2.0,
            cpu_per_flow_unit_hz: 100.0,
            cores_required: 1,
            migration_penalty: 1.0,
        }],
        sfcs: vec![Sfc {
            id: 0,
            chain: vec![0],
            revenue_rate: 500.0,
        }],
        flows: vec![Flow {
            id: 0,
            sfc: 0,
            rate: 4.0,
            delay_threshold_ms: 50.0,
            ingress: 0,
            egress: 0,
        }],
        migration_bw: 1.0,
        downtime_constant: 0.05,
        alpha_grid: crate::model::default_alpha_grid(),
    }
}

/// VNF on server 0; every segment is empty.
pub fn micro_state() -> NetworkState {
    let inst = micro_instance();
    Configuration::from_hosts(&inst, &[0], vec![vec![Path::empty(), Path::empty()]])
}

/// VNF moved to server 1, routed 0 → 1 → 0.
pub fn micro_migrated() -> Configuration {
    let inst = micro_instance();
    let topo = &inst.topology;
    let out = topo.path_from_nodes(vec![0, 1]).unwrap();
    let back = topo.path_from_nodes(vec![1, 0]).unwrap();
    Configuration::from_hosts(&inst, &[1], vec![vec![out, back]])
}
