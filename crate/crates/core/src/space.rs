//! The restricted decision space: one host per VNF slot and one candidate
//! path per flow segment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::segment_decompose;
use crate::model::{segment_endpoints, Configuration, Instance, NetworkState};
use crate::topology::{candidate_paths, NodeId, Path};

pub const DEFAULT_K_PATHS: usize = 4;

/// Candidate paths for every ordered pair of segment endpoints.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    k: usize,
    paths: BTreeMap<(NodeId, NodeId), Vec<Path>>,
}

impl CandidateSet {
    /// `k` loop-free paths per endpoint pair, plus the paths the current state
    /// already uses so the identity reconfiguration is always representable.
    pub fn build(instance: &Instance, state: &NetworkState, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let mut endpoints: BTreeSet<NodeId> = instance.servers.iter().map(|s| s.switch).collect();
        for f in &instance.flows {
            endpoints.insert(f.ingress);
            endpoints.insert(f.egress);
        }
        let mut paths = BTreeMap::new();
        for &a in &endpoints {
            for &b in &endpoints {
                paths.insert((a, b), candidate_paths(&instance.topology, a, b, k)?);
            }
        }
        let mut set = CandidateSet { k, paths };
        if let Ok(hosts) = state.hosts(instance) {
            let offsets = instance.slot_offsets();
            for f in &instance.flows {
                let Ok(segs) = current_segments(instance, state, f.id) else {
                    continue;
                };
                let n = instance.sfcs[f.sfc].chain.len();
                let chain_hosts = &hosts[offsets[f.sfc]..offsets[f.sfc] + n];
                let ends = segment_endpoints(instance, f, chain_hosts);
                for (g, p) in segs.into_iter().enumerate() {
                    let list = set.paths.entry((ends[g], ends[g + 1])).or_default();
                    if !list.contains(&p) {
                        list.push(p);
                    }
                }
            }
        }
        Ok(set)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> &[Path] {
        self.paths.get(&(a, b)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &Vec<Path>)> {
        self.paths.iter()
    }

    /// Longest candidate over pairs matching the filter, in hops.
    pub(crate) fn max_hops(&self, mut keep: impl FnMut(NodeId, NodeId) -> bool) -> usize {
        self.paths
            .iter()
            .filter(|((a, b), _)| keep(*a, *b))
            .flat_map(|(_, v)| v.iter().map(Path::hops))
            .max()
            .unwrap_or(0)
    }
}

fn current_segments(instance: &Instance, state: &NetworkState, flow: usize) -> Result<Vec<Path>> {
    match state.segments.get(flow) {
        Some(segs) if !segs.is_empty() => Ok(segs.clone()),
        _ => segment_decompose(instance, state, &instance.flows[flow])
            .map_err(|v| Error::InvalidState(format!("flow {flow}: {}", v.detail))),
    }
}

/// A point of the decision space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Decision {
    /// Host server per slot (SFC-major, chain order).
    pub hosts: Vec<usize>,
    /// Candidate index per flow, per segment.
    pub paths: Vec<Vec<usize>>,
}

impl Decision {
    /// Expands into a full configuration.
    pub fn to_configuration(&self, instance: &Instance, cands: &CandidateSet) -> Result<Configuration> {
        let offsets = instance.slot_offsets();
        let mut segments = Vec::with_capacity(instance.flows.len());
        for f in &instance.flows {
            let n = instance.sfcs[f.sfc].chain.len();
            let ends = segment_endpoints(instance, f, &self.hosts[offsets[f.sfc]..offsets[f.sfc] + n]);
            let choice = &self.paths[f.id];
            let mut segs = Vec::with_capacity(n + 1);
            for g in 0..=n {
                let list = cands.get(ends[g], ends[g + 1]);
                let p = list.get(choice[g]).ok_or_else(|| {
                    Error::invalid(format!("flow {} segment {g}: candidate {} out of range", f.id, choice[g]))
                })?;
                segs.push(p.clone());
            }
            segments.push(segs);
        }
        Ok(Configuration::from_hosts(instance, &self.hosts, segments))
    }

    /// Recovers a decision from a configuration whose paths are candidates.
    pub fn from_configuration(instance: &Instance, cands: &CandidateSet, config: &Configuration) -> Result<Self> {
        let hosts = config.hosts(instance)?;
        let offsets = instance.slot_offsets();
        let mut paths = Vec::with_capacity(instance.flows.len());
        for f in &instance.flows {
            let n = instance.sfcs[f.sfc].chain.len();
            let ends = segment_endpoints(instance, f, &hosts[offsets[f.sfc]..offsets[f.sfc] + n]);
            let segs = current_segments(instance, config, f.id)?;
            if segs.len() != n + 1 {
                return Err(Error::InvalidState(format!("flow {} has {} segments", f.id, segs.len())));
            }
            let mut choice = Vec::with_capacity(n + 1);
            for (g, seg) in segs.iter().enumerate() {
                let idx = cands
                    .get(ends[g], ends[g + 1])
                    .iter()
                    .position(|p| p.nodes == seg.nodes)
                    .ok_or_else(|| {
                        Error::InvalidState(format!("flow {} segment {g} is not a candidate path", f.id))
                    })?;
                choice.push(idx);
            }
            paths.push(choice);
        }
        Ok(Decision { hosts, paths })
    }
}
