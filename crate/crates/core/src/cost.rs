//! Reconfiguration and placement costs.
//!
//! Six raw reconfiguration terms are computed between the current state and
//! a target configuration:
//!
//! | term | meaning                                   | unit    |
//! |------|-------------------------------------------|---------|
//! | `u`  | directed routing entries that change      | count   |
//! | `v`  | bytes moved by migrations                 | GB      |
//! | `w`  | duration of the longest migration         | seconds |
//! | `x`  | revenue lost during downtime              | dollars |
//! | `y`  | utilization-weighted QoS penalty          | -       |
//! | `z`  | migration overhead on source/destination  | -       |
//!
//! Each is divided by an instance-level upper bound, and `cost_rec` is the
//! mean of the six normalized terms. `cost_np` is the powered-on server
//! energy over the total power of all servers. The joint objective is
//! `(1 - alpha) * cost_np + alpha * cost_rec`.
//!
//! Migrations run in parallel and share the reserved bandwidth of their
//! bottleneck equally; reclaimed bandwidth is not redistributed, so the
//! concurrency of a migration is a static count.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Configuration, Instance, NetworkState, BITS_PER_BYTE};
use crate::space::{CandidateSet, DEFAULT_K_PATHS};
use crate::topology::{compute_k_matrix, SharedLinkMatrix};

/// The six reconfiguration terms, raw or normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CostTerms {
    pub fn as_array(&self) -> [f64; 6] {
        [self.u, self.v, self.w, self.x, self.y, self.z]
    }

    pub fn mean(&self) -> f64 {
        self.as_array().iter().sum::<f64>() / 6.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub alpha: f64,
    pub raw: CostTerms,
    pub normalized: CostTerms,
    /// Power of the servers left on, W.
    pub energy_w: f64,
    pub cost_np: f64,
    pub cost_rec: f64,
    pub joint: f64,
    pub migrations: usize,
}

impl CostBreakdown {
    pub const CSV_HEADER: [&'static str; 15] = [
        "alpha", "cost_np", "cost_rec", "u_raw", "v_raw", "w_raw", "x_raw", "y_raw", "z_raw", "u_norm", "v_norm",
        "w_norm", "x_norm", "y_norm", "z_norm",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        let mut out = vec![fmt_num(self.alpha), fmt_num(self.cost_np), fmt_num(self.cost_rec)];
        out.extend(self.raw.as_array().iter().map(|&v| fmt_num(v)));
        out.extend(self.normalized.as_array().iter().map(|&v| fmt_num(v)));
        out
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    // fixed precision keeps CSV output stable across platforms
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub sfc: usize,
    pub vnf: usize,
    pub source: usize,
    pub destination: usize,
}

/// Migrations between two placements with their bottleneck counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationSet {
    pub migrations: Vec<Migration>,
    /// Migrations into or out of each server.
    pub server_degree: Vec<usize>,
    /// Load on the path of each (destination, source) pair that migrates:
    /// its own migrations plus those of every pair sharing a link with it.
    pub pair_load: BTreeMap<(usize, usize), usize>,
}

impl MigrationSet {
    pub fn is_empty(&self) -> bool {
        self.migrations.is_empty()
    }

    /// `max(eta_dst, eta_{dst,src}, eta_src)`.
    pub fn concurrency(&self, m: &Migration) -> usize {
        let pair = self.pair_load.get(&(m.destination, m.source)).copied().unwrap_or(0);
        self.server_degree[m.destination].max(self.server_degree[m.source]).max(pair)
    }

    fn from_moves(moves: Vec<Migration>, n_servers: usize, k: &SharedLinkMatrix) -> Self {
        let mut server_degree = vec![0; n_servers];
        let mut pair_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for m in &moves {
            server_degree[m.source] += 1;
            server_degree[m.destination] += 1;
            *pair_count.entry((m.destination, m.source)).or_default() += 1;
        }
        let pair_load = pair_count
            .iter()
            .map(|(&(x, y), &own)| {
                let shared: usize = pair_count
                    .iter()
                    .filter(|(&(z, w), _)| k.get(x, y, z, w) == 1)
                    .map(|(_, &c)| c)
                    .sum();
                ((x, y), own + shared)
            })
            .collect();
        MigrationSet {
            migrations: moves,
            server_degree,
            pair_load,
        }
    }
}

/// Directed routing entries that differ between the two configurations.
pub fn rule_change_count(state: &NetworkState, solution: &Configuration) -> usize {
    let n = state.routing.len().max(solution.routing.len());
    (0..n)
        .map(|f| state.routing_of(f).symmetric_difference(solution.routing_of(f)).count())
        .sum()
}

pub fn migration_set(
    instance: &Instance,
    state: &NetworkState,
    solution: &Configuration,
    k: &SharedLinkMatrix,
) -> Result<MigrationSet> {
    let current = state.hosts(instance)?;
    let target = solution.hosts(instance)?;
    Ok(migrations_between(instance, &current, &target, k))
}

fn migrations_between(instance: &Instance, current: &[usize], target: &[usize], k: &SharedLinkMatrix) -> MigrationSet {
    let moves = instance
        .slots()
        .iter()
        .zip(current.iter().zip(target))
        .filter(|(_, (c, t))| c != t)
        .map(|(s, (&source, &destination))| Migration {
            sfc: s.sfc,
            vnf: s.vnf,
            source,
            destination,
        })
        .collect();
    MigrationSet::from_moves(moves, instance.servers.len(), k)
}

/// Total GB moved: sum of `A_v` over target entries absent from the state.
pub fn migration_size(instance: &Instance, state: &NetworkState, solution: &Configuration) -> f64 {
    solution
        .placement
        .difference(&state.placement)
        .map(|e| instance.vnf_types[e.vnf].size_gb)
        .sum()
}

/// Longest migration time and the time of each migration, in seconds.
pub fn migration_time(
    mset: &MigrationSet,
    vnf_types: &[crate::model::VnfType],
    migration_bw_gbps: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(migration_bw_gbps > 0.0) {
        return Err(Error::invalid("migration bandwidth must be positive"));
    }
    let times: Vec<f64> = mset
        .migrations
        .iter()
        .map(|m| BITS_PER_BYTE * vnf_types[m.vnf].size_gb * mset.concurrency(m) as f64 / migration_bw_gbps)
        .collect();
    let longest = times.iter().copied().fold(0.0, f64::max);
    Ok((longest, times))
}

fn migrated_slots(state: &NetworkState, solution: &Configuration) -> BTreeSet<(usize, usize)> {
    solution
        .placement
        .difference(&state.placement)
        .map(|e| (e.sfc, e.vnf))
        .collect()
}

/// Revenue lost while SFCs with at least one migrated VNF are down.
pub fn downtime_loss(instance: &Instance, state: &NetworkState, solution: &Configuration) -> f64 {
    let sfcs: BTreeSet<usize> = migrated_slots(state, solution).into_iter().map(|(s, _)| s).collect();
    sfcs.into_iter()
        .map(|s| instance.sfcs[s].revenue_rate * instance.sfc_rate_gbps(s) * instance.downtime_constant)
        .sum()
}

/// Utilization of each (sfc, vnf) at its current host, from the state's flow assignment.
pub fn current_utilization(instance: &Instance, state: &NetworkState) -> BTreeMap<(usize, usize), f64> {
    let mut util = BTreeMap::new();
    for a in &state.flow_assignment {
        let (Some(flow), Some(vnf), Some(srv)) = (
            instance.flows.get(a.flow),
            instance.vnf_types.get(a.vnf),
            instance.servers.get(a.server),
        ) else {
            continue;
        };
        *util.entry((a.sfc, a.vnf)).or_insert(0.0) += flow.rate * vnf.cpu_per_flow_unit_hz / srv.cpu_hz;
    }
    util
}

pub fn qos_cost(instance: &Instance, state: &NetworkState, solution: &Configuration) -> f64 {
    let util = current_utilization(instance, state);
    migrated_slots(state, solution)
        .into_iter()
        .map(|(s, v)| util.get(&(s, v)).copied().unwrap_or(0.0) * instance.vnf_types[v].migration_penalty)
        .sum()
}

pub fn server_overhead(instance: &Instance, state: &NetworkState, solution: &Configuration) -> f64 {
    solution
        .placement
        .symmetric_difference(&state.placement)
        .map(|e| instance.servers[e.server].overhead)
        .sum()
}

/// Power of servers hosting at least one VNF, raw (W) and over total power.
pub fn energy_cost(instance: &Instance, solution: &Configuration) -> (f64, f64) {
    let on: BTreeSet<usize> = solution.placement.iter().map(|e| e.server).collect();
    let raw: f64 = on.iter().filter_map(|&x| instance.servers.get(x)).map(|s| s.power_w).sum();
    let total: f64 = instance.servers.iter().map(|s| s.power_w).sum();
    (raw, if total > 0.0 { raw / total } else { 0.0 })
}

/// Evaluates the joint objective with the default candidate space.
pub fn total_cost(
    instance: &Instance,
    state: &NetworkState,
    solution: &Configuration,
    alpha: f64,
) -> Result<CostBreakdown> {
    let cands = CandidateSet::build(instance, state, DEFAULT_K_PATHS)?;
    CostEngine::new(instance, state, &cands)?.evaluate(solution, alpha)
}

/// Upper bounds used to normalize the raw terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub terms: CostTerms,
    pub total_power_w: f64,
}

impl NormBounds {
    pub fn compute(instance: &Instance, state: &NetworkState, cands: &CandidateSet) -> Self {
        let slots = instance.slots();
        let topo = &instance.topology;
        let attach: BTreeSet<usize> = instance.servers.iter().map(|s| s.switch).collect();
        let max_mid = cands.max_hops(|a, b| attach.contains(&a) && attach.contains(&b));
        let rule_cap = 2 * topo.switch_link_count();
        let u: usize = instance
            .flows
            .iter()
            .map(|f| {
                let n = instance.sfcs[f.sfc].chain.len();
                let first = cands.max_hops(|a, b| a == f.ingress && attach.contains(&b));
                let last = cands.max_hops(|a, b| attach.contains(&a) && b == f.egress);
                let longest = first + (n - 1) * max_mid + last;
                state.routing_of(f.id).len() + longest.min(rule_cap)
            })
            .sum();
        let max_a = instance.vnf_types.iter().map(|v| v.size_gb).fold(0.0, f64::max);
        let max_psi = instance.servers.iter().map(|s| s.overhead).fold(0.0, f64::max);
        let util = current_utilization(instance, state);
        NormBounds {
            terms: CostTerms {
                u: u as f64,
                v: slots.iter().map(|s| instance.vnf_types[s.vnf].size_gb).sum(),
                w: BITS_PER_BYTE * max_a * slots.len() as f64 / instance.migration_bw,
                x: instance.downtime_constant
                    * (0..instance.sfcs.len())
                        .map(|s| instance.sfcs[s].revenue_rate * instance.sfc_rate_gbps(s))
                        .sum::<f64>(),
                y: slots
                    .iter()
                    .map(|s| {
                        util.get(&(s.sfc, s.vnf)).copied().unwrap_or(0.0)
                            * instance.vnf_types[s.vnf].migration_penalty
                    })
                    .sum(),
                z: 2.0 * slots.len() as f64 * max_psi,
            },
            total_power_w: instance.servers.iter().map(|s| s.power_w).sum(),
        }
    }

    pub fn normalize(&self, raw: &CostTerms) -> CostTerms {
        let n = |v: f64, b: f64| if b > 0.0 { v / b } else { 0.0 };
        CostTerms {
            u: n(raw.u, self.terms.u),
            v: n(raw.v, self.terms.v),
            w: n(raw.w, self.terms.w),
            x: n(raw.x, self.terms.x),
            y: n(raw.y, self.terms.y),
            z: n(raw.z, self.terms.z),
        }
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} is outside [0, 1]")));
    }
    Ok(())
}

/// Cost evaluator bound to one (instance, current state) pair.
#[derive(Debug, Clone)]
pub struct CostEngine<'a> {
    instance: &'a Instance,
    state: &'a NetworkState,
    current: Vec<usize>,
    kmat: SharedLinkMatrix,
    bounds: NormBounds,
    // per slot: A_v, u * kappa, sfc
    slot_size: Vec<f64>,
    slot_qos: Vec<f64>,
    slot_sfc: Vec<usize>,
    sfc_loss: Vec<f64>,
}

impl<'a> CostEngine<'a> {
    pub fn new(instance: &'a Instance, state: &'a NetworkState, cands: &CandidateSet) -> Result<Self> {
        let current = state.hosts(instance)?;
        let slots = instance.slots();
        let util = current_utilization(instance, state);
        Ok(CostEngine {
            instance,
            state,
            current,
            kmat: compute_k_matrix(&instance.topology),
            bounds: NormBounds::compute(instance, state, cands),
            slot_size: slots.iter().map(|s| instance.vnf_types[s.vnf].size_gb).collect(),
            slot_qos: slots
                .iter()
                .map(|s| {
                    util.get(&(s.sfc, s.vnf)).copied().unwrap_or(0.0) * instance.vnf_types[s.vnf].migration_penalty
                })
                .collect(),
            slot_sfc: slots.iter().map(|s| s.sfc).collect(),
            sfc_loss: (0..instance.sfcs.len())
                .map(|s| instance.sfcs[s].revenue_rate * instance.sfc_rate_gbps(s) * instance.downtime_constant)
                .collect(),
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn state(&self) -> &'a NetworkState {
        self.state
    }

    pub fn current_hosts(&self) -> &[usize] {
        &self.current
    }

    pub fn bounds(&self) -> &NormBounds {
        &self.bounds
    }

    pub fn k_matrix(&self) -> &SharedLinkMatrix {
        &self.kmat
    }

    pub fn evaluate(&self, solution: &Configuration, alpha: f64) -> Result<CostBreakdown> {
        check_alpha(alpha)?;
        let target = solution.hosts(self.instance)?;
        let rules = rule_change_count(self.state, solution);
        Ok(self.evaluate_hosts(&target, rules, alpha))
    }

    /// Same result as [`CostEngine::evaluate`], computed with the set-based
    /// term functions instead of the per-slot fast path.
    pub fn evaluate_reference(&self, solution: &Configuration, alpha: f64) -> Result<CostBreakdown> {
        check_alpha(alpha)?;
        let (inst, st) = (self.instance, self.state);
        let mset = migration_set(inst, st, solution, &self.kmat)?;
        let (w, _) = migration_time(&mset, &inst.vnf_types, inst.migration_bw)?;
        let raw = CostTerms {
            u: rule_change_count(st, solution) as f64,
            v: migration_size(inst, st, solution),
            w,
            x: downtime_loss(inst, st, solution),
            y: qos_cost(inst, st, solution),
            z: server_overhead(inst, st, solution),
        };
        let normalized = self.bounds.normalize(&raw);
        let (energy_w, cost_np) = energy_cost(inst, solution);
        let cost_rec = normalized.mean();
        Ok(CostBreakdown {
            alpha,
            raw,
            normalized,
            energy_w,
            cost_np,
            cost_rec,
            joint: (1.0 - alpha) * cost_np + alpha * cost_rec,
            migrations: mset.migrations.len(),
        })
    }

    /// Fast path for search: one host per slot plus a precomputed rule-change count.
    pub fn evaluate_hosts(&self, target: &[usize], rule_changes: usize, alpha: f64) -> CostBreakdown {
        let raw = self.raw_terms(target, rule_changes);
        let normalized = self.bounds.normalize(&raw.0);
        let energy = self.energy_w(target);
        let cost_np = if self.bounds.total_power_w > 0.0 {
            energy / self.bounds.total_power_w
        } else {
            0.0
        };
        let cost_rec = normalized.mean();
        CostBreakdown {
            alpha,
            raw: raw.0,
            normalized,
            energy_w: energy,
            cost_np,
            cost_rec,
            joint: (1.0 - alpha) * cost_np + alpha * cost_rec,
            migrations: raw.1,
        }
    }

    fn energy_w(&self, target: &[usize]) -> f64 {
        let mut on = vec![false; self.instance.servers.len()];
        for &h in target {
            on[h] = true;
        }
        on.iter()
            .zip(&self.instance.servers)
            .filter(|(o, _)| **o)
            .map(|(_, s)| s.power_w)
            .sum()
    }

    fn raw_terms(&self, target: &[usize], rule_changes: usize) -> (CostTerms, usize) {
        let mset = migrations_between(self.instance, &self.current, target, &self.kmat);
        let mut v = 0.0;
        let mut y = 0.0;
        let mut z = 0.0;
        let mut w: f64 = 0.0;
        let mut sfc_hit = vec![false; self.instance.sfcs.len()];
        let servers = &self.instance.servers;
        let mut mi = 0;
        for (i, (&c, &t)) in self.current.iter().zip(target).enumerate() {
            if c == t {
                continue;
            }
            let m = &mset.migrations[mi];
            mi += 1;
            v += self.slot_size[i];
            y += self.slot_qos[i];
            z += servers[c].overhead + servers[t].overhead;
            sfc_hit[self.slot_sfc[i]] = true;
            let time = BITS_PER_BYTE * self.slot_size[i] * mset.concurrency(m) as f64 / self.instance.migration_bw;
            w = w.max(time);
        }
        let x = sfc_hit
            .iter()
            .zip(&self.sfc_loss)
            .filter(|(h, _)| **h)
            .map(|(_, l)| l)
            .sum();
        (
            CostTerms {
                u: rule_changes as f64,
                v,
                w,
                x,
                y,
                z,
            },
            mset.migrations.len(),
        )
    }
}

/// Migration time evaluated with the formulas taken literally: the
/// concurrency of pair (x, y) counts `W_x (1 - U_y)` over all VNFs, and a
/// time is charged for every `W_x U_y = 1`, including x = y.
/// Kept for audits; the engine uses the migration-pair reading.
pub fn literal_migration_time(
    instance: &Instance,
    state: &NetworkState,
    solution: &Configuration,
    k: &SharedLinkMatrix,
) -> f64 {
    let n = instance.servers.len();
    let slots = instance.slots();
    let at = |cfg: &Configuration, x: usize, s: usize, v: usize| {
        cfg.placement.contains(&crate::model::PlacementEntry { sfc: s, vnf: v, server: x }) as usize
    };
    let eta: Vec<usize> = (0..n)
        .map(|x| {
            slots
                .iter()
                .map(|s| at(solution, x, s.sfc, s.vnf).abs_diff(at(state, x, s.sfc, s.vnf)))
                .sum()
        })
        .collect();
    let direct = |x: usize, y: usize| -> usize {
        slots
            .iter()
            .map(|s| at(solution, x, s.sfc, s.vnf) * (1 - at(state, y, s.sfc, s.vnf)))
            .sum()
    };
    let mut longest: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let mut pair = direct(x, y);
            for z in 0..n {
                for w in 0..n {
                    if k.get(x, y, z, w) == 1 {
                        pair += direct(z, w);
                    }
                }
            }
            let c = eta[x].max(eta[y]).max(pair) as f64;
            for s in &slots {
                if at(solution, x, s.sfc, s.vnf) * at(state, y, s.sfc, s.vnf) == 1 {
                    let t = BITS_PER_BYTE * c / instance.migration_bw * instance.vnf_types[s.vnf].size_gb;
                    longest = longest.max(t);
                }
            }
        }
    }
    longest
}
