//! Per-placement flow routing over the candidate paths.
//!
//! For a flow and the hosts of its chain, every combination of segment
//! candidates is a route option. Options meeting the delay bound are kept,
//! sorted by (rule changes, candidate indices). Rule changes are separable
//! per flow, so without capacity pressure each flow simply takes its first
//! option; otherwise a small branch and bound picks the cheapest routing
//! that fits the residual link capacity.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::model::{segment_endpoints, Instance, NetworkState};
use crate::topology::Topology;

use super::Problem;

// give up on capacity-constrained routing after this many search steps
const ROUTE_STEP_LIMIT: u64 = 200_000;

#[derive(Debug, Clone)]
pub(crate) struct RouteOption {
    pub choice: Vec<usize>,
    pub du: usize,
    /// Directed link ids (`2 * link + direction`), sorted and deduplicated.
    pub links: Vec<usize>,
}

/// Selected option per flow for one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    pub option: Vec<usize>,
    pub rule_changes: usize,
    /// False when the capacity search hit its step limit.
    pub exact: bool,
}

type OptionList = Rc<Vec<RouteOption>>;

pub(crate) struct Router {
    cache: RefCell<HashMap<(usize, Vec<usize>), OptionList>>,
    current: Vec<Vec<usize>>,
    capacity: Vec<f64>,
    flow_gbps: Vec<f64>,
    capacity_free: bool,
}

fn directed_id(topo: &Topology, a: usize, b: usize) -> usize {
    2 * topo.link_between(a, b).expect("candidate paths follow links") + usize::from(a > b)
}

impl Router {
    pub fn new(inst: &Instance, state: &NetworkState) -> Self {
        let topo = &inst.topology;
        let current = (0..inst.flows.len())
            .map(|f| {
                let mut v: Vec<usize> = state.routing_of(f).iter().map(|&(a, b)| directed_id(topo, a, b)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let capacity: Vec<f64> = topo
            .links()
            .iter()
            .flat_map(|l| [l.bandwidth_gbps, l.bandwidth_gbps])
            .collect();
        let flow_gbps: Vec<f64> = inst.flows.iter().map(|f| f.rate_gbps()).collect();
        let total: f64 = flow_gbps.iter().sum();
        let capacity_free = capacity.iter().all(|&c| total <= c - inst.migration_bw - 1e-9);
        Router {
            cache: RefCell::new(HashMap::new()),
            current,
            capacity,
            flow_gbps,
            capacity_free,
        }
    }

    /// Delay-feasible route options of a flow, best first.
    pub fn options(&self, p: &Problem<'_>, flow: usize, chain_hosts: &[usize]) -> OptionList {
        let key = (flow, chain_hosts.to_vec());
        if let Some(v) = self.cache.borrow().get(&key) {
            return Rc::clone(v);
        }
        let list = Rc::new(self.build_options(p, flow, chain_hosts));
        self.cache.borrow_mut().insert(key, Rc::clone(&list));
        list
    }

    fn build_options(&self, p: &Problem<'_>, flow: usize, chain_hosts: &[usize]) -> Vec<RouteOption> {
        let inst = p.inst;
        let f = &inst.flows[flow];
        let ends = segment_endpoints(inst, f, chain_hosts);
        let lists: Vec<_> = ends.windows(2).map(|w| p.cands.get(w[0], w[1])).collect();
        if lists.iter().any(|l| l.is_empty()) {
            return Vec::new();
        }
        let current = &self.current[flow];
        let mut out = Vec::new();
        let mut choice = vec![0usize; lists.len()];
        loop {
            let latency: f64 = choice.iter().zip(&lists).map(|(&c, l)| l[c].latency_ms).sum();
            if latency <= f.delay_threshold_ms + 1e-9 {
                let mut links: Vec<usize> = choice
                    .iter()
                    .zip(&lists)
                    .flat_map(|(&c, l)| l[c].links())
                    .map(|(a, b)| directed_id(&inst.topology, a, b))
                    .collect();
                links.sort_unstable();
                links.dedup();
                let common = count_common(&links, current);
                out.push(RouteOption {
                    choice: choice.clone(),
                    du: links.len() + current.len() - 2 * common,
                    links,
                });
            }
            // odometer, last segment fastest so options come out in lex order
            let mut g = lists.len();
            loop {
                if g == 0 {
                    out.sort_by(|a, b| a.du.cmp(&b.du).then_with(|| a.choice.cmp(&b.choice)));
                    return out;
                }
                g -= 1;
                choice[g] += 1;
                if choice[g] < lists[g].len() {
                    break;
                }
                choice[g] = 0;
            }
        }
    }

    pub fn route(&self, p: &Problem<'_>, hosts: &[usize]) -> Option<Routing> {
        let inst = p.inst;
        let mut all = Vec::with_capacity(inst.flows.len());
        for f in &inst.flows {
            let o = self.options(p, f.id, p.chain_hosts(hosts, f.sfc));
            if o.is_empty() {
                return None;
            }
            all.push(o);
        }
        if self.capacity_free {
            return Some(Routing {
                option: vec![0; all.len()],
                rule_changes: all.iter().map(|o| o[0].du).sum(),
                exact: true,
            });
        }
        let mut residual = self.capacity.clone();
        let current = p.engine.current_hosts();
        let k = p.engine.k_matrix();
        let mut reserved = vec![false; residual.len() / 2];
        for (&a, &b) in current.iter().zip(hosts) {
            if a != b {
                for &l in k.pair_links(a.min(b), a.max(b)) {
                    reserved[l] = true;
                }
            }
        }
        for (l, r) in reserved.iter().enumerate() {
            if *r {
                residual[2 * l] -= inst.migration_bw;
                residual[2 * l + 1] -= inst.migration_bw;
            }
        }
        let mut suffix_min = vec![0usize; all.len() + 1];
        for i in (0..all.len()).rev() {
            suffix_min[i] = suffix_min[i + 1] + all[i][0].du;
        }
        let mut search = CapSearch {
            all: &all,
            gbps: &self.flow_gbps,
            suffix_min,
            residual,
            pick: vec![0; all.len()],
            best: None,
            steps: 0,
        };
        search.dfs(0, 0);
        let exact = search.steps <= ROUTE_STEP_LIMIT;
        search.best.map(|(rule_changes, option)| Routing {
            option,
            rule_changes,
            exact,
        })
    }

    /// Candidate indices per flow for a routing of `hosts`.
    pub fn choices(&self, p: &Problem<'_>, hosts: &[usize], routing: &Routing) -> Vec<Vec<usize>> {
        p.inst
            .flows
            .iter()
            .map(|f| self.options(p, f.id, p.chain_hosts(hosts, f.sfc))[routing.option[f.id]].choice.clone())
            .collect()
    }
}

struct CapSearch<'r> {
    all: &'r [OptionList],
    gbps: &'r [f64],
    suffix_min: Vec<usize>,
    residual: Vec<f64>,
    pick: Vec<usize>,
    best: Option<(usize, Vec<usize>)>,
    steps: u64,
}

impl CapSearch<'_> {
    fn dfs(&mut self, f: usize, cost: usize) {
        if f == self.all.len() {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.pick.clone()));
            }
            return;
        }
        let all = self.all;
        for (i, opt) in all[f].iter().enumerate() {
            self.steps += 1;
            if self.steps > ROUTE_STEP_LIMIT {
                return;
            }
            if let Some((b, _)) = &self.best {
                if cost + opt.du + self.suffix_min[f + 1] >= *b {
                    // options are sorted by du, later ones are no better
                    return;
                }
            }
            let rate = self.gbps[f];
            if opt.links.iter().any(|&l| self.residual[l] < rate - 1e-9) {
                continue;
            }
            for &l in &opt.links {
                self.residual[l] -= rate;
            }
            self.pick[f] = i;
            self.dfs(f + 1, cost + opt.du);
            for &l in &opt.links {
                self.residual[l] += rate;
            }
        }
    }
}

fn count_common(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
