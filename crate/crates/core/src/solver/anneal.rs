//! Simulated annealing over placements, followed by a greedy polish.
//!
//! Starts from the best seed (the current placement by default). A move
//! relocates one slot, swaps the hosts of two slots, or evacuates a server by
//! moving all of its slots onto other powered-on servers; the last one is
//! what lets the search cross the plateau between "fewer VNFs on a server"
//! and "server off". Routing is re-derived for every candidate placement.
//! Acceptance is Metropolis on the joint objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnealSchedule, Deadline, Incumbent, Problem, Run, SolverOptions};

pub(super) fn search(p: &Problem<'_>, opts: &SolverOptions, sched: &AnnealSchedule, seed: Option<Incumbent>) -> Run {
    let deadline = Deadline::new(opts.budget_s);
    let mut run = Run {
        best: None,
        exhaustive: false,
        nodes: 0,
        evaluated: 0,
    };
    let mut cur = match seed {
        Some(s) => s,
        None => match p.evaluate(&p.identity.hosts) {
            Some((inc, _)) => inc,
            None => return run,
        },
    };
    run.evaluated += 1;
    let mut hosts = cur.decision.hosts.clone();
    let mut best = cur.clone();
    let n = p.n_slots();
    let m = p.n_servers();
    if n == 0 || m < 2 {
        run.best = Some(best);
        return run;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut temp = sched.initial_temperature;
    let mut cand = hosts.clone();
    for it in 0..sched.iterations {
        if it % 256 == 0 && deadline.passed() {
            break;
        }
        cand.copy_from_slice(&hosts);
        let kind: f64 = rng.random();
        if kind < 0.2 {
            let x = cand[rng.random_range(0..n)];
            evacuate(p, &mut cand, x, &mut rng);
        } else if n < 2 || kind < 0.6 {
            let i = rng.random_range(0..n);
            let mut x = rng.random_range(0..m - 1);
            if x >= hosts[i] {
                x += 1;
            }
            cand[i] = x;
        } else {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            cand.swap(i, j);
        }
        let draw: f64 = rng.random();
        temp *= sched.cooling;
        if cand == hosts || !p.fits(&cand) {
            continue;
        }
        run.nodes += 1;
        run.evaluated += 1;
        let Some((inc, _)) = p.evaluate(&cand) else {
            continue;
        };
        let delta = inc.objective - cur.objective;
        if delta <= 0.0 || draw < (-delta / temp.max(f64::MIN_POSITIVE)).exp() {
            hosts.copy_from_slice(&cand);
            cur = inc;
            if cur.cmp_key(&best).is_lt() {
                best = cur.clone();
            }
        }
    }

    polish(p, &mut best, &deadline, &mut run);
    if let Some(start) = p.evaluate(&p.identity.hosts).map(|(inc, _)| inc) {
        let mut greedy = consolidate(p, start, &deadline, &mut run);
        polish(p, &mut greedy, &deadline, &mut run);
        if greedy.cmp_key(&best).is_lt() {
            best = greedy;
        }
    }
    run.best = Some(best);
    run
}

/// Best-improvement descent over server evacuations, packing each
/// evacuated slot onto the most loaded powered-on server with room.
pub(super) fn consolidate(p: &Problem<'_>, mut best: Incumbent, deadline: &Deadline, run: &mut Run) -> Incumbent {
    let m = p.n_servers();
    loop {
        if deadline.passed() {
            return best;
        }
        let base = best.decision.hosts.clone();
        let mut load = vec![0usize; m];
        for &h in &base {
            load[h] += 1;
        }
        let mut round_best: Option<Incumbent> = None;
        for x in (0..m).filter(|&x| load[x] > 0) {
            let mut cand = base.clone();
            if !evacuate_packed(p, &mut cand, x, &load) {
                continue;
            }
            run.evaluated += 1;
            if let Some((inc, _)) = p.evaluate(&cand) {
                if inc.cmp_key(&best).is_lt() && inc.beats(&round_best) {
                    round_best = Some(inc);
                }
            }
        }
        match round_best {
            Some(inc) => best = inc,
            None => return best,
        }
    }
}

fn evacuate_packed(p: &Problem<'_>, hosts: &mut [usize], x: usize, load: &[usize]) -> bool {
    let mut targets: Vec<usize> = (0..load.len()).filter(|&y| y != x && load[y] > 0).collect();
    targets.sort_by(|&a, &b| load[b].cmp(&load[a]).then(a.cmp(&b)));
    for i in 0..hosts.len() {
        if hosts[i] != x {
            continue;
        }
        let Some(&y) = targets.iter().find(|&&y| {
            hosts[i] = y;
            p.fits(hosts)
        }) else {
            return false;
        };
        hosts[i] = y;
    }
    true
}

/// Moves every slot on `x` to a random other powered-on server with room,
/// leaving `hosts` untouched if some slot finds none.
fn evacuate(p: &Problem<'_>, hosts: &mut [usize], x: usize, rng: &mut ChaCha8Rng) {
    let mut targets: Vec<usize> = hosts.iter().copied().filter(|&h| h != x).collect();
    targets.sort_unstable();
    targets.dedup();
    let before = hosts.to_vec();
    let mut moved = false;
    for i in 0..hosts.len() {
        if hosts[i] != x {
            continue;
        }
        let start = if targets.is_empty() { 0 } else { rng.random_range(0..targets.len()) };
        let mut placed = false;
        for k in 0..targets.len() {
            hosts[i] = targets[(start + k) % targets.len()];
            if p.fits(hosts) {
                placed = true;
                break;
            }
        }
        if !placed {
            hosts.copy_from_slice(&before);
            return;
        }
        moved = true;
    }
    if !moved {
        hosts.copy_from_slice(&before);
    }
}

/// First-improvement descent over relocations, swaps and evacuations.
fn polish(p: &Problem<'_>, best: &mut Incumbent, deadline: &Deadline, run: &mut Run) {
    let n = p.n_slots();
    let m = p.n_servers();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    'outer: loop {
        if deadline.passed() {
            return;
        }
        let base = best.decision.hosts.clone();
        let mut cand = base.clone();
        let mut on: Vec<usize> = base.clone();
        on.sort_unstable();
        on.dedup();
        for x in on {
            evacuate(p, &mut cand, x, &mut rng);
            if cand != base && try_improve(p, &cand, best, run) {
                continue 'outer;
            }
            cand.copy_from_slice(&base);
        }
        for i in 0..n {
            for x in 0..m {
                if x == base[i] {
                    continue;
                }
                cand[i] = x;
                if try_improve(p, &cand, best, run) {
                    continue 'outer;
                }
                cand[i] = base[i];
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if base[i] == base[j] {
                    continue;
                }
                cand.swap(i, j);
                if try_improve(p, &cand, best, run) {
                    continue 'outer;
                }
                cand.swap(i, j);
            }
        }
        return;
    }
}

fn try_improve(p: &Problem<'_>, cand: &[usize], best: &mut Incumbent, run: &mut Run) -> bool {
    if !p.fits(cand) {
        return false;
    }
    run.evaluated += 1;
    match p.evaluate(cand) {
        Some((inc, _)) if inc.cmp_key(best).is_lt() => {
            *best = inc;
            true
        }
        _ => false,
    }
}
