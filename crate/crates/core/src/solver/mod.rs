//! Solvers over the restricted decision space (one host per slot, one
//! candidate path per flow segment).
//!
//! * [`SolverMode::Exact`]: depth-first branch and bound over placements,
//!   exact within the candidate space.
//! * [`SolverMode::Anneal`]: simulated annealing over placements.
//! * [`SolverMode::BruteForce`]: enumerates every placement and path
//!   combination and evaluates it with the set-based cost functions.
//!
//! All three route a placement the same way and break objective ties by
//! (fewer migrations, smaller host vector, smaller path choices).

mod anneal;
mod brute;
mod exact;
mod routing;

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cost::{check_alpha, CostEngine};
use crate::error::{Error, Result};
use crate::feasibility::validate;
use crate::model::{Instance, NetworkState, ReconfigSolution, Slot};
use crate::space::{CandidateSet, Decision, DEFAULT_K_PATHS};

pub use routing::Routing;
pub(crate) use routing::Router;

/// Two objectives closer than this are considered equal for tie-breaking.
pub const OBJECTIVE_TIE_EPS: f64 = 1e-12;
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Exact,
    Anneal,
    BruteForce,
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverMode::Exact),
            "anneal" => Ok(SolverMode::Anneal),
            "brute" | "brute-force" => Ok(SolverMode::BruteForce),
            _ => Err(Error::invalid(format!("unknown solver `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    pub cooling: f64,
    pub iterations: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            initial_temperature: 1.0,
            cooling: 0.995,
            iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mode: SolverMode,
    pub k_paths: usize,
    /// Wall-clock budget in seconds; `None` means unlimited.
    pub budget_s: Option<f64>,
    pub seed: u64,
    pub anneal: AnnealSchedule,
    /// Bound pruning in exact mode. Turning it off also turns off capacity
    /// pruning, so every placement is reached.
    pub pruning: bool,
    pub enumeration_cap: u128,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolverMode::Exact,
            k_paths: DEFAULT_K_PATHS,
            budget_s: None,
            seed: 0,
            anneal: AnnealSchedule::default(),
            pruning: true,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SolverOptions {
    pub fn exact() -> Self {
        SolverOptions::default()
    }

    pub fn anneal(seed: u64) -> Self {
        SolverOptions {
            mode: SolverMode::Anneal,
            seed,
            ..Default::default()
        }
    }

    pub fn brute_force() -> Self {
        SolverOptions {
            mode: SolverMode::BruteForce,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.k_paths == 0 {
            return Err(Error::invalid("k_paths must be at least 1"));
        }
        if let Some(b) = self.budget_s {
            if !(b > 0.0) {
                return Err(Error::invalid("budget must be positive"));
            }
        }
        let a = &self.anneal;
        if !(a.cooling > 0.0 && a.cooling < 1.0) {
            return Err(Error::invalid("cooling factor must lie in (0, 1)"));
        }
        if !(a.initial_temperature > 0.0) {
            return Err(Error::invalid("initial temperature must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimality {
    /// Proved optimal within the candidate space.
    Optimal,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solution: ReconfigSolution,
    pub objective: f64,
    pub optimality: Optimality,
    pub decision: Decision,
    /// Complete placements reached (exact, brute force) or moves evaluated (anneal).
    pub nodes_explored: u64,
    /// Placement and routing combinations costed.
    pub assignments_evaluated: u64,
    pub wall_time_s: f64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.optimality == Optimality::Optimal
    }
}

pub fn solve(instance: &Instance, state: &NetworkState, alpha: f64, opts: &SolverOptions) -> Result<SolveResult> {
    match opts.mode {
        SolverMode::Exact => solve_exact(instance, state, alpha, opts),
        SolverMode::Anneal => solve_anneal(instance, state, alpha, opts),
        SolverMode::BruteForce => brute_force(instance, state, alpha, opts),
    }
}

pub fn solve_exact(instance: &Instance, state: &NetworkState, alpha: f64, opts: &SolverOptions) -> Result<SolveResult> {
    let p = Problem::new(instance, state, alpha, opts)?;
    let start = p.evaluate(&p.identity.hosts).map(|(inc, _)| inc);
    let run = exact::search(&p, opts, start);
    p.finish(run)
}

pub fn solve_anneal(instance: &Instance, state: &NetworkState, alpha: f64, opts: &SolverOptions) -> Result<SolveResult> {
    let p = Problem::new(instance, state, alpha, opts)?;
    let start = p.evaluate(&p.identity.hosts).map(|(inc, _)| inc);
    let run = anneal::search(&p, opts, &opts.anneal, start);
    p.finish(run)
}

pub fn brute_force(instance: &Instance, state: &NetworkState, alpha: f64, opts: &SolverOptions) -> Result<SolveResult> {
    let p = Problem::new(instance, state, alpha, opts)?;
    let run = brute::search(&p, opts)?;
    p.finish(run)
}

/// A costed point of the decision space.
#[derive(Debug, Clone)]
pub(crate) struct Incumbent {
    pub objective: f64,
    pub migrations: usize,
    pub decision: Decision,
}

impl Incumbent {
    pub fn cmp_key(&self, other: &Incumbent) -> Ordering {
        if (self.objective - other.objective).abs() > OBJECTIVE_TIE_EPS {
            return self.objective.total_cmp(&other.objective);
        }
        (self.migrations, &self.decision.hosts, &self.decision.paths).cmp(&(
            other.migrations,
            &other.decision.hosts,
            &other.decision.paths,
        ))
    }

    pub fn beats(&self, other: &Option<Incumbent>) -> bool {
        other.as_ref().is_none_or(|o| self.cmp_key(o) == Ordering::Less)
    }
}

/// Outcome of one search before it is turned into a [`SolveResult`].
pub(crate) struct Run {
    pub best: Option<Incumbent>,
    pub exhaustive: bool,
    pub nodes: u64,
    pub evaluated: u64,
}

pub(crate) struct Deadline {
    end: Option<Instant>,
}

impl Deadline {
    pub fn new(budget_s: Option<f64>) -> Self {
        Deadline {
            end: budget_s.map(|b| Instant::now() + Duration::from_secs_f64(b)),
        }
    }

    pub fn passed(&self) -> bool {
        self.end.is_some_and(|e| Instant::now() >= e)
    }
}

/// Everything a search needs about one (instance, state, alpha).
pub(crate) struct Problem<'a> {
    pub inst: &'a Instance,
    pub state: &'a NetworkState,
    pub alpha: f64,
    pub cands: CandidateSet,
    pub engine: CostEngine<'a>,
    pub slots: Vec<Slot>,
    pub offsets: Vec<usize>,
    pub identity: Decision,
    pub slot_cores: Vec<u64>,
    pub slot_mem: Vec<f64>,
    pub slot_cpu: Vec<f64>,
    pub router: Router,
    started: Instant,
}

impl<'a> Problem<'a> {
    pub fn new(inst: &'a Instance, state: &'a NetworkState, alpha: f64, opts: &SolverOptions) -> Result<Self> {
        check_alpha(alpha)?;
        opts.check()?;
        let started = Instant::now();
        let report = validate(inst, state, None);
        if !report.is_feasible() {
            return Err(Error::Infeasible {
                message: "current state is not feasible".into(),
                report: Some(report),
            });
        }
        let cands = CandidateSet::build(inst, state, opts.k_paths)?;
        let engine = CostEngine::new(inst, state, &cands)?;
        let identity = Decision::from_configuration(inst, &cands, state)?;
        let slots = inst.slots();
        let router = Router::new(inst, state);
        Ok(Problem {
            inst,
            state,
            alpha,
            offsets: inst.slot_offsets(),
            identity,
            slot_cores: slots.iter().map(|s| inst.vnf_types[s.vnf].cores_required as u64).collect(),
            slot_mem: slots.iter().map(|s| inst.vnf_types[s.vnf].size_gb).collect(),
            slot_cpu: slots.iter().map(|s| inst.slot_cpu_hz(s)).collect(),
            slots,
            cands,
            engine,
            router,
            started,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn n_servers(&self) -> usize {
        self.inst.servers.len()
    }

    /// Hosts of one SFC's chain within a full host vector.
    pub fn chain_hosts<'h>(&self, hosts: &'h [usize], sfc: usize) -> &'h [usize] {
        &hosts[self.offsets[sfc]..self.offsets[sfc] + self.inst.sfcs[sfc].chain.len()]
    }

    /// Server resources used by a full placement fit every server.
    pub fn fits(&self, hosts: &[usize]) -> bool {
        let n = self.n_servers();
        let mut cores = vec![0u64; n];
        let mut mem = vec![0.0; n];
        let mut cpu = vec![0.0; n];
        for (i, &h) in hosts.iter().enumerate() {
            cores[h] += self.slot_cores[i];
            mem[h] += self.slot_mem[i];
            cpu[h] += self.slot_cpu[i];
        }
        self.inst.servers.iter().enumerate().all(|(x, s)| {
            cores[x] <= s.cores as u64 && mem[x] <= s.memory_gb + 1e-9 && cpu[x] <= s.cpu_hz * (1.0 + 1e-9)
        })
    }

    /// Routes and costs a placement; `None` when no feasible routing exists.
    pub fn evaluate(&self, hosts: &[usize]) -> Option<(Incumbent, bool)> {
        let routing = self.router.route(self, hosts)?;
        let b = self.engine.evaluate_hosts(hosts, routing.rule_changes, self.alpha);
        let paths = self.router.choices(self, hosts, &routing);
        Some((
            Incumbent {
                objective: b.joint,
                migrations: b.migrations,
                decision: Decision {
                    hosts: hosts.to_vec(),
                    paths,
                },
            },
            routing.exact,
        ))
    }

    fn finish(&self, run: Run) -> Result<SolveResult> {
        let best = run
            .best
            .ok_or_else(|| Error::infeasible("no feasible reconfiguration in the candidate space"))?;
        let config = best.decision.to_configuration(self.inst, &self.cands)?;
        let report = validate(self.inst, &config, Some(self.state));
        if !report.is_feasible() {
            return Err(Error::Infeasible {
                message: "internal error: solver produced an infeasible configuration".into(),
                report: Some(report),
            });
        }
        let breakdown = self.engine.evaluate(&config, self.alpha)?;
        Ok(SolveResult {
            objective: breakdown.joint,
            solution: ReconfigSolution { config, breakdown },
            optimality: if run.exhaustive {
                Optimality::Optimal
            } else {
                Optimality::Heuristic
            },
            decision: best.decision,
            nodes_explored: run.nodes,
            assignments_evaluated: run.evaluated,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{micro_instance, micro_state};

    #[test]
    fn options_are_checked() {
        let mut o = SolverOptions::exact();
        o.k_paths = 0;
        assert!(o.check().is_err());
        let mut o = SolverOptions::exact();
        o.anneal.cooling = 1.0;
        assert!(o.check().is_err());
        let mut o = SolverOptions::exact();
        o.budget_s = Some(0.0);
        assert!(o.check().is_err());
    }

    #[test]
    fn micro_fixture_all_modes() {
        let inst = micro_instance();
        let st = micro_state();
        for opts in [SolverOptions::exact(), SolverOptions::anneal(3), SolverOptions::brute_force()] {
            let r1 = solve(&inst, &st, 1.0, &opts).unwrap();
            assert_eq!(r1.decision.hosts, vec![0]);
            assert_eq!(r1.solution.breakdown.cost_rec, 0.0);
            let r0 = solve(&inst, &st, 0.0, &opts).unwrap();
            assert_eq!(r0.decision.hosts, vec![1], "{:?}", opts.mode);
            assert!((r0.objective - 20.0 / 110.0).abs() < 1e-12);
        }
        let b = brute_force(&inst, &st, 0.0, &SolverOptions::brute_force()).unwrap();
        assert_eq!(b.nodes_explored, 2);
    }

    #[test]
    fn tie_break_prefers_fewer_migrations() {
        let a = Incumbent {
            objective: 0.5,
            migrations: 1,
            decision: Decision {
                hosts: vec![3],
                paths: vec![],
            },
        };
        let b = Incumbent {
            objective: 0.5 + 1e-14,
            migrations: 2,
            decision: Decision {
                hosts: vec![0],
                paths: vec![],
            },
        };
        assert_eq!(a.cmp_key(&b), Ordering::Less);
        assert!(a.beats(&None));
        assert!(!b.beats(&Some(a.clone())));
    }
}
