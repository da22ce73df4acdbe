//! Helpers shared by the integration tests: random micro instances and a
//! plain enumerator of every placement and routing choice.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfc_reconfig::model::segment_endpoints;
use sfc_reconfig::{generate_scenario, initial_state, CandidateSet, Decision, Instance, NetworkState, ScenarioOverrides, ScenarioSize};

/// At most 3 SFCs of at most 2 VNFs on at most 4 servers, one or two spines.
/// Core counts are tight enough that capacity constraints bite. Seeds whose
/// initial state cannot be built are skipped.
pub fn micro(seed: u64) -> (Instance, NetworkState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    loop {
        let n_sfcs = rng.random_range(1..=3);
        let o = ScenarioOverrides {
            n_sfcs: Some(n_sfcs),
            vnfs_per_sfc: Some(rng.random_range(1..=2)),
            n_flows: Some(n_sfcs),
            n_spine: Some(rng.random_range(1..=2)),
            n_leaf: Some(2),
            n_servers: Some(rng.random_range(2..=4)),
            server_cores: Some(rng.random_range(2..=4)),
            server_memory_gb: Some(rng.random_range(3.0..=8.0)),
            ..Default::default()
        };
        let inst = generate_scenario(ScenarioSize::Small, rng.random(), Some(&o)).unwrap();
        if let Ok(st) = initial_state(&inst) {
            return (inst, st);
        }
    }
}

fn advance(digits: &mut [usize], radix: &[usize]) -> bool {
    for g in (0..digits.len()).rev() {
        digits[g] += 1;
        if digits[g] < radix[g] {
            return true;
        }
        digits[g] = 0;
    }
    false
}

/// Calls `f` on every decision in the candidate space.
pub fn for_each_decision(inst: &Instance, cands: &CandidateSet, mut f: impl FnMut(&Decision)) {
    let n = inst.slots().len();
    let m = inst.servers.len();
    let offsets = inst.slot_offsets();
    let mut hosts = vec![0; n];
    loop {
        let mut shape = Vec::new();
        let mut radix = Vec::new();
        for fl in &inst.flows {
            let k = inst.sfcs[fl.sfc].chain.len();
            let ends = segment_endpoints(inst, fl, &hosts[offsets[fl.sfc]..offsets[fl.sfc] + k]);
            shape.push(ends.len() - 1);
            radix.extend(ends.windows(2).map(|w| cands.get(w[0], w[1]).len()));
        }
        if radix.iter().all(|&r| r > 0) {
            let mut digits = vec![0; radix.len()];
            loop {
                let mut it = digits.iter().copied();
                let paths = shape.iter().map(|&s| it.by_ref().take(s).collect()).collect();
                f(&Decision {
                    hosts: hosts.clone(),
                    paths,
                });
                if !advance(&mut digits, &radix) {
                    break;
                }
            }
        }
        if !advance(&mut hosts, &vec![m; n]) {
            break;
        }
    }
}
