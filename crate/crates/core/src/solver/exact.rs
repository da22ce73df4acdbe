//! Depth-first branch and bound over placements.
//!
//! Slots are assigned in SFC-major order, servers tried by ascending power.
//! A partial placement is pruned when its lower bound exceeds the incumbent:
//!
//! * energy of the servers already on,
//! * normalized migration terms already committed (size, overhead, QoS,
//!   downtime, the longest migration so far, and the cheapest routing of
//!   every fully placed SFC),
//! * for each server still hosting unassigned slots in the current state,
//!   the cheaper of keeping it on or moving all of those slots away.

use super::anneal;
use super::{AnnealSchedule, Deadline, Incumbent, Problem, Run, SolverOptions};

const PRUNE_SLACK: f64 = 1e-9;

fn inv(b: f64) -> f64 {
    if b > 0.0 {
        1.0 / b
    } else {
        0.0
    }
}

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    pruning: bool,
    deadline: Deadline,
    order: Vec<usize>,
    cur: Vec<usize>,
    slot_sfc: Vec<usize>,
    sfc_end: Vec<usize>,
    // normalized per-slot move costs, before the alpha / 6 factor
    move_v: Vec<f64>,
    move_y: Vec<f64>,
    sfc_x: Vec<f64>,
    slot_bits: Vec<f64>,
    psi_norm: Vec<f64>,
    psi_min_norm: f64,
    inv_u: f64,
    inv_w: f64,
    total_power: f64,

    hosts: Vec<usize>,
    cores: Vec<u64>,
    mem: Vec<f64>,
    cpu: Vec<f64>,
    load: Vec<usize>,
    energy: f64,
    rec: f64,
    u_lb: f64,
    sfc_moved: Vec<usize>,
    degree: Vec<usize>,
    pairs: Vec<usize>,
    moved: Vec<usize>,

    best: Option<Incumbent>,
    nodes: u64,
    evaluated: u64,
    calls: u64,
    aborted: bool,
    routing_exact: bool,
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(p: &'p Problem<'a>, pruning: bool, deadline: Deadline) -> Self {
        let inst = p.inst;
        let n = p.n_servers();
        let bounds = p.engine.bounds().terms;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            inst.servers[a]
                .power_w
                .total_cmp(&inst.servers[b].power_w)
                .then(a.cmp(&b))
        });
        let util = crate::cost::current_utilization(inst, p.state);
        let (iv, iy, ix, iz) = (inv(bounds.v), inv(bounds.y), inv(bounds.x), inv(bounds.z));
        let sfc_end = (0..inst.sfcs.len())
            .map(|s| p.offsets[s] + inst.sfcs[s].chain.len())
            .collect();
        let psi_norm: Vec<f64> = inst.servers.iter().map(|s| s.overhead * iz).collect();
        Search {
            p,
            pruning,
            deadline,
            cur: p.engine.current_hosts().to_vec(),
            slot_sfc: p.slots.iter().map(|s| s.sfc).collect(),
            sfc_end,
            move_v: p.slots.iter().map(|s| inst.vnf_types[s.vnf].size_gb * iv).collect(),
            move_y: p
                .slots
                .iter()
                .map(|s| {
                    util.get(&(s.sfc, s.vnf)).copied().unwrap_or(0.0) * inst.vnf_types[s.vnf].migration_penalty * iy
                })
                .collect(),
            sfc_x: (0..inst.sfcs.len())
                .map(|s| inst.sfcs[s].revenue_rate * inst.sfc_rate_gbps(s) * inst.downtime_constant * ix)
                .collect(),
            slot_bits: p
                .slots
                .iter()
                .map(|s| crate::model::BITS_PER_BYTE * inst.vnf_types[s.vnf].size_gb / inst.migration_bw)
                .collect(),
            psi_min_norm: psi_norm.iter().copied().fold(f64::INFINITY, f64::min),
            psi_norm,
            inv_u: inv(bounds.u),
            inv_w: inv(bounds.w),
            total_power: p.engine.bounds().total_power_w,
            order,
            hosts: vec![usize::MAX; p.n_slots()],
            cores: vec![0; n],
            mem: vec![0.0; n],
            cpu: vec![0.0; n],
            load: vec![0; n],
            energy: 0.0,
            rec: 0.0,
            u_lb: 0.0,
            sfc_moved: vec![0; inst.sfcs.len()],
            degree: vec![0; n],
            pairs: vec![0; n * n],
            moved: Vec::new(),
            best: None,
            nodes: 0,
            evaluated: 0,
            calls: 0,
            aborted: false,
            routing_exact: true,
        }
    }

    fn fits(&self, i: usize, x: usize) -> bool {
        let s = &self.p.inst.servers[x];
        self.cores[x] + self.p.slot_cores[i] <= s.cores as u64
            && self.mem[x] + self.p.slot_mem[i] <= s.memory_gb + 1e-9
            && self.cpu[x] + self.p.slot_cpu[i] <= s.cpu_hz * (1.0 + 1e-9)
    }

    fn apply(&mut self, i: usize, x: usize) {
        let p = self.p;
        self.hosts[i] = x;
        self.cores[x] += p.slot_cores[i];
        self.mem[x] += p.slot_mem[i];
        self.cpu[x] += p.slot_cpu[i];
        self.load[x] += 1;
        if self.load[x] == 1 {
            self.energy += p.inst.servers[x].power_w;
        }
        let c = self.cur[i];
        if x != c {
            let s = self.slot_sfc[i];
            self.rec += self.move_v[i] + self.move_y[i] + self.psi_norm[c] + self.psi_norm[x];
            self.sfc_moved[s] += 1;
            if self.sfc_moved[s] == 1 {
                self.rec += self.sfc_x[s];
            }
            self.degree[x] += 1;
            self.degree[c] += 1;
            self.pairs[x * p.n_servers() + c] += 1;
            self.moved.push(i);
        }
    }

    fn undo(&mut self, i: usize) {
        let p = self.p;
        let x = self.hosts[i];
        self.cores[x] -= p.slot_cores[i];
        self.mem[x] -= p.slot_mem[i];
        self.cpu[x] -= p.slot_cpu[i];
        self.load[x] -= 1;
        if self.load[x] == 0 {
            self.energy -= p.inst.servers[x].power_w;
        }
        let c = self.cur[i];
        if x != c {
            let s = self.slot_sfc[i];
            self.rec -= self.move_v[i] + self.move_y[i] + self.psi_norm[c] + self.psi_norm[x];
            if self.sfc_moved[s] == 1 {
                self.rec -= self.sfc_x[s];
            }
            self.sfc_moved[s] -= 1;
            self.degree[x] -= 1;
            self.degree[c] -= 1;
            self.pairs[x * p.n_servers() + c] -= 1;
            self.moved.pop();
        }
        self.hosts[i] = usize::MAX;
    }

    /// Longest migration time among committed migrations, normalized.
    /// Concurrency only grows as migrations are added, so this is a bound.
    fn committed_w(&self) -> f64 {
        let n = self.p.n_servers();
        let k = self.p.engine.k_matrix();
        let mut worst: f64 = 0.0;
        for &i in &self.moved {
            let (x, y) = (self.hosts[i], self.cur[i]);
            let mut pair = self.pairs[x * n + y];
            for &j in &self.moved {
                let (z, w) = (self.hosts[j], self.cur[j]);
                if (z, w) != (x, y) && k.get(x, y, z, w) == 1 {
                    pair += 1;
                }
            }
            let c = self.degree[x].max(self.degree[y]).max(pair);
            worst = worst.max(self.slot_bits[i] * c as f64);
        }
        worst * self.inv_w
    }

    fn future_bound(&self, next: usize) -> f64 {
        let p = self.p;
        let a6 = p.alpha / 6.0;
        let n = p.n_servers();
        let mut stay = vec![0.0; n];
        let mut leave = vec![0.0; n];
        let mut touched = vec![false; n];
        for i in next..p.n_slots() {
            let h = self.cur[i];
            if !touched[h] {
                touched[h] = true;
                stay[h] = if self.load[h] > 0 {
                    0.0
                } else {
                    (1.0 - p.alpha) * p.inst.servers[h].power_w / self.total_power
                };
            }
            let s = self.slot_sfc[i];
            let mut c = self.move_v[i] + self.move_y[i] + self.psi_norm[h] + self.psi_min_norm;
            if self.sfc_moved[s] == 0 {
                let remaining = self.sfc_end[s] - next.max(p.offsets[s]);
                c += self.sfc_x[s] / remaining as f64;
            }
            leave[h] += a6 * c;
        }
        (0..n).filter(|&h| touched[h]).map(|h| stay[h].min(leave[h])).sum()
    }

    fn partial_bound(&self, next: usize) -> f64 {
        let p = self.p;
        (1.0 - p.alpha) * self.energy / self.total_power
            + p.alpha / 6.0 * (self.rec + self.u_lb * self.inv_u)
            + self.future_bound(next)
    }

    fn threshold(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.objective + PRUNE_SLACK)
    }

    /// Cheapest rule changes of the flows of a fully placed SFC, or `None`
    /// when some flow has no delay-feasible route.
    fn sfc_routing_bound(&self, sfc: usize) -> Option<usize> {
        let p = self.p;
        let chain = p.chain_hosts(&self.hosts, sfc);
        let mut sum = 0;
        for f in p.inst.flows_of(sfc) {
            let opts = p.router.options(p, f.id, chain);
            sum += opts.first()?.du;
        }
        Some(sum)
    }

    fn dfs(&mut self, i: usize) {
        let p = self.p;
        let last = i + 1 == p.n_slots();
        let s = self.slot_sfc[i];
        let closes_sfc = i + 1 == self.sfc_end[s];
        for oi in 0..self.order.len() {
            if self.aborted {
                return;
            }
            self.calls += 1;
            if self.calls % 1024 == 0 && self.deadline.passed() {
                self.aborted = true;
                return;
            }
            let x = self.order[oi];
            if self.pruning && !self.fits(i, x) {
                continue;
            }
            self.apply(i, x);
            let mut u_add = 0;
            let mut viable = true;
            if self.pruning {
                if closes_sfc {
                    match self.sfc_routing_bound(s) {
                        Some(u) => u_add = u,
                        None => viable = false,
                    }
                }
                if viable {
                    self.u_lb += u_add as f64;
                    let t = self.threshold();
                    let mut lb = self.partial_bound(i + 1);
                    if lb <= t {
                        lb += p.alpha / 6.0 * self.committed_w();
                    }
                    if lb > t {
                        viable = false;
                    }
                    self.u_lb -= u_add as f64;
                }
            }
            if viable {
                self.u_lb += u_add as f64;
                if last {
                    self.leaf();
                } else {
                    self.dfs(i + 1);
                }
                self.u_lb -= u_add as f64;
            }
            self.undo(i);
        }
    }

    fn leaf(&mut self) {
        let p = self.p;
        self.nodes += 1;
        if !self.pruning && !p.fits(&self.hosts) {
            return;
        }
        self.evaluated += 1;
        if let Some((inc, exact)) = p.evaluate(&self.hosts) {
            self.routing_exact &= exact;
            if inc.beats(&self.best) {
                self.best = Some(inc);
            }
        }
    }
}

pub(super) fn search(p: &Problem<'_>, opts: &SolverOptions, seed: Option<Incumbent>) -> Run {
    let mut search = Search::new(p, opts.pruning, Deadline::new(opts.budget_s));
    let mut evaluated = 0;
    if opts.pruning {
        search.best = seed.clone();
        let warm = AnnealSchedule {
            iterations: opts.anneal.iterations.min(5_000),
            ..opts.anneal
        };
        // the warm start may use a quarter of the budget
        let warm_opts = SolverOptions {
            budget_s: opts.budget_s.map(|b| b / 4.0),
            ..opts.clone()
        };
        let run = anneal::search(p, &warm_opts, &warm, seed);
        evaluated += run.evaluated;
        if let Some(inc) = run.best {
            if inc.beats(&search.best) {
                search.best = Some(inc);
            }
        }
    }
    if p.n_slots() == 0 {
        search.best = p.evaluate(&[]).map(|(inc, _)| inc);
        search.nodes = 1;
    } else {
        search.dfs(0);
    }
    Run {
        best: search.best,
        exhaustive: !search.aborted && search.routing_exact,
        nodes: search.nodes,
        evaluated: evaluated + search.evaluated,
    }
}
