//! The reconfiguration MILP.
//!
//! Decisions: `w` (slot on server) and `p` (candidate path per flow segment
//! and endpoint pair). Auxiliaries, all tight under minimization or exactly
//! determined: `z` (consecutive chain hosts), `r` (flow uses a directed
//! switch link), `on`, `d` (SFC touched by a migration), `res` (migration
//! bandwidth reserved on a link), `c` (bottleneck concurrency per
//! destination/source pair) and `t_mig` (longest migration).
//!
//! Migration indicators need no products: the current placement `U` is a
//! constant, so `|w - U|` and `w·(1 - U)` are linear in `w`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::cost::{current_utilization, CostEngine};
use crate::error::{Error, Result};
use crate::model::{segment_endpoints, Instance, NetworkState, BITS_PER_BYTE};
use crate::space::{CandidateSet, Decision};
use crate::topology::{DirLink, NodeId};

use super::{
    lin_abs_diff, lin_max, lin_product, Assignment, LinExpr, MaxTerm, MilpBuilder, MilpModel, Sense, VarId,
    VarKind, VarRole,
};

fn w_name(sfc: usize, vnf: usize, x: usize) -> String {
    format!("w_s{sfc}_v{vnf}_x{x}")
}

fn p_name(flow: usize, g: usize, a: NodeId, b: NodeId, c: usize) -> String {
    format!("p_f{flow}_g{g}_n{a}_n{b}_c{c}")
}

/// Builds the model over `cands`. Normalization bounds are those of
/// [`CostEngine`] for the same candidates, so the objective at any lifted
/// decision equals the engine's joint cost.
pub fn build_milp(instance: &Instance, state: &NetworkState, alpha: f64, cands: &CandidateSet) -> Result<MilpModel> {
    crate::cost::check_alpha(alpha)?;
    let engine = CostEngine::new(instance, state, cands)?;
    let cur = engine.current_hosts().to_vec();
    let bounds = engine.bounds();
    let kmat = engine.k_matrix();
    let topo = &instance.topology;
    let slots = instance.slots();
    let offsets = instance.slot_offsets();
    let n = slots.len();
    let m = instance.servers.len();
    let mut b = MilpBuilder::new(format!("sfc_reconfig_alpha_{alpha}"));

    // placement
    let mut w = vec![Vec::with_capacity(m); n];
    for (i, s) in slots.iter().enumerate() {
        for x in 0..m {
            let role = VarRole::Placement {
                sfc: s.sfc,
                vnf: s.vnf,
                server: x,
            };
            w[i].push(b.binary(w_name(s.sfc, s.vnf, x), role)?);
        }
        let mut e = LinExpr::new();
        for &v in &w[i] {
            e.add(v, 1.0);
        }
        b.add_constraint(format!("place_s{}_v{}", s.sfc, s.vnf), e, Sense::Eq, 1.0)?;
    }

    // server resources
    for (x, srv) in instance.servers.iter().enumerate() {
        let mut cores = LinExpr::new();
        let mut mem = LinExpr::new();
        let mut cpu = LinExpr::new();
        for (i, s) in slots.iter().enumerate() {
            let t = &instance.vnf_types[s.vnf];
            cores.add(w[i][x], t.cores_required as f64);
            mem.add(w[i][x], t.size_gb);
            // relative, matching the feasibility check's tolerance
            cpu.add(w[i][x], instance.slot_cpu_hz(s) / srv.cpu_hz);
        }
        b.add_constraint(format!("cores_x{x}"), cores, Sense::Le, srv.cores as f64)?;
        b.add_constraint(format!("mem_x{x}"), mem, Sense::Le, srv.memory_gb)?;
        b.add_constraint(format!("cpu_x{x}"), cpu, Sense::Le, 1.0)?;
    }

    // servers attached to each switch
    let mut at_switch: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (x, srv) in instance.servers.iter().enumerate() {
        at_switch.entry(srv.switch).or_default().push(x);
    }

    // chain pair products, shared by the flows of an SFC
    let mut zvars: HashMap<(usize, usize, usize, usize), VarId> = HashMap::new();
    for (s, sfc) in instance.sfcs.iter().enumerate() {
        for g in 1..sfc.chain.len() {
            let (i, j) = (offsets[s] + g - 1, offsets[s] + g);
            for x in 0..m {
                for y in 0..m {
                    let role = VarRole::ChainPair {
                        sfc: s,
                        segment: g,
                        from_server: x,
                        to_server: y,
                    };
                    let z = lin_product(&mut b, &format!("z_s{s}_g{g}_x{x}_y{y}"), w[i][x], w[j][y], role)?;
                    zvars.insert((s, g, x, y), z);
                }
            }
        }
    }

    // path choice, routing, delay
    let mut link_flows: BTreeMap<DirLink, Vec<(VarId, f64)>> = BTreeMap::new();
    let mut u_expr = LinExpr::new();
    for f in &instance.flows {
        let k = instance.sfcs[f.sfc].chain.len();
        let first = offsets[f.sfc];
        let mut delay = LinExpr::new();
        let mut uses: BTreeMap<DirLink, Vec<VarId>> = BTreeMap::new();
        for g in 0..=k {
            // endpoint pairs of this segment with the expression selecting them
            let mut pairs: Vec<(NodeId, NodeId, LinExpr)> = Vec::new();
            if k == 0 {
                pairs.push((f.ingress, f.egress, LinExpr::constant(1.0)));
            } else if g == 0 {
                for (&sw, xs) in &at_switch {
                    let mut e = LinExpr::new();
                    xs.iter().for_each(|&x| {
                        e.add(w[first][x], 1.0);
                    });
                    pairs.push((f.ingress, sw, e));
                }
            } else if g == k {
                for (&sw, xs) in &at_switch {
                    let mut e = LinExpr::new();
                    xs.iter().for_each(|&x| {
                        e.add(w[first + k - 1][x], 1.0);
                    });
                    pairs.push((sw, f.egress, e));
                }
            } else {
                for (&sa, xs) in &at_switch {
                    for (&sb, ys) in &at_switch {
                        let mut e = LinExpr::new();
                        for &x in xs {
                            for &y in ys {
                                e.add(zvars[&(f.sfc, g, x, y)], 1.0);
                            }
                        }
                        pairs.push((sa, sb, e));
                    }
                }
            }
            for (a, bn, sel) in pairs {
                let list = cands.get(a, bn);
                if list.is_empty() {
                    return Err(Error::Build(format!(
                        "flow {} segment {g}: no candidate path from node {a} to node {bn}",
                        f.id
                    )));
                }
                let mut e = LinExpr::new();
                for (c, path) in list.iter().enumerate() {
                    let role = VarRole::PathChoice {
                        flow: f.id,
                        segment: g,
                        from: a,
                        to: bn,
                        candidate: c,
                    };
                    let pv = b.binary(p_name(f.id, g, a, bn, c), role)?;
                    e.add(pv, 1.0);
                    delay.add(pv, path.latency_ms);
                    for l in path.links() {
                        uses.entry(l).or_default().push(pv);
                    }
                }
                e.add_expr(&sel, -1.0);
                b.add_constraint(format!("seg_f{}_g{g}_n{a}_n{bn}", f.id), e, Sense::Eq, 0.0)?;
            }
        }
        b.add_constraint(format!("delay_f{}", f.id), delay, Sense::Le, f.delay_threshold_ms)?;

        let current = state.routing_of(f.id);
        for (&(i, j), ps) in &uses {
            let name = format!("r_f{}_n{i}_n{j}", f.id);
            let role = VarRole::Route {
                flow: f.id,
                from: i,
                to: j,
            };
            let terms = ps.iter().map(|&p| MaxTerm::always(LinExpr::var(p))).collect();
            let r = lin_max(&mut b, &name, terms, VarKind::Binary, role)?;
            let mut ub = LinExpr::var(r);
            ps.iter().for_each(|&p| {
                ub.add(p, -1.0);
            });
            b.add_constraint(format!("{name}_ub"), ub, Sense::Le, 0.0)?;
            u_expr.add_expr(&lin_abs_diff(r, current.contains(&(i, j))), 1.0);
            link_flows.entry((i, j)).or_default().push((r, f.rate_gbps()));
        }
        // current links no candidate can use always count as removed
        u_expr.constant += current.iter().filter(|l| !uses.contains_key(l)).count() as f64;
    }

    // migration indicators: moved_i = 1 - w[i][cur_i]
    let moved = |i: usize| {
        let mut e = LinExpr::constant(1.0);
        e.add(w[i][cur[i]], -1.0);
        e
    };

    let mut on = Vec::with_capacity(m);
    for x in 0..m {
        let terms = (0..n).map(|i| MaxTerm::always(LinExpr::var(w[i][x]))).collect();
        on.push(lin_max(&mut b, &format!("on_x{x}"), terms, VarKind::Binary, VarRole::ServerOn { server: x })?);
    }

    let mut d = Vec::with_capacity(instance.sfcs.len());
    for (s, sfc) in instance.sfcs.iter().enumerate() {
        let terms = (0..sfc.chain.len()).map(|g| MaxTerm::always(moved(offsets[s] + g))).collect();
        d.push(lin_max(&mut b, &format!("d_s{s}"), terms, VarKind::Binary, VarRole::SfcMigrated { sfc: s })?);
    }

    // migrations into x from y: n(x, y) = Σ_{i: cur_i = y} w[i][x]
    let sources: BTreeSet<usize> = cur.iter().copied().collect();
    let count = |x: usize, y: usize| {
        let mut e = LinExpr::new();
        for i in (0..n).filter(|&i| cur[i] == y) {
            e.add(w[i][x], 1.0);
        }
        e
    };
    let degree = |x: usize| {
        let mut e = LinExpr::new();
        for i in 0..n {
            e.add_expr(&lin_abs_diff(w[i][x], cur[i] == x), 1.0);
        }
        e
    };
    let degrees: Vec<LinExpr> = (0..m).map(degree).collect();

    // link reservations
    let mut pair_expr: BTreeMap<usize, Vec<MaxTerm>> = BTreeMap::new();
    if n > 0 {
        for x in 0..m {
            for y in x + 1..m {
                if !sources.contains(&x) && !sources.contains(&y) {
                    continue;
                }
                let mut e = count(x, y);
                e.add_expr(&count(y, x), 1.0);
                if e.terms.is_empty() {
                    continue;
                }
                let e = e.scaled(1.0 / n as f64);
                for &l in kmat.pair_links(x, y) {
                    pair_expr.entry(l).or_default().push(MaxTerm::always(e.clone()));
                }
            }
        }
    }
    let mut res: BTreeMap<usize, VarId> = BTreeMap::new();
    let flow_links: BTreeSet<usize> = link_flows
        .keys()
        .map(|&(i, j)| topo.link_between(i, j).expect("candidate links exist"))
        .collect();
    for (l, terms) in pair_expr {
        // only links that can carry flows have a capacity row
        if !flow_links.contains(&l) {
            continue;
        }
        let link = &topo.links()[l];
        let role = VarRole::LinkReserved { a: link.a, b: link.b };
        res.insert(l, lin_max(&mut b, &format!("res_l{l}"), terms, VarKind::Binary, role)?);
    }
    for (&(i, j), terms) in &link_flows {
        let l = topo.link_between(i, j).unwrap();
        let mut e = LinExpr::new();
        for &(r, rate) in terms {
            e.add(r, rate);
        }
        if let Some(&rv) = res.get(&l) {
            e.add(rv, instance.migration_bw);
        }
        b.add_constraint(format!("cap_n{i}_n{j}"), e, Sense::Le, topo.links()[l].bandwidth_gbps)?;
    }

    // concurrency and migration time
    let w_max = bounds.terms.w;
    let mut t_terms = Vec::new();
    if n > 0 {
        let mut cvar: BTreeMap<(usize, usize), VarId> = BTreeMap::new();
        for y in sources.iter().copied() {
            for x in (0..m).filter(|&x| x != y) {
                let mut pair = count(x, y);
                for (zz, ww) in sources.iter().flat_map(|&ww| (0..m).map(move |zz| (zz, ww))) {
                    if zz != ww && kmat.get(x, y, zz, ww) == 1 {
                        pair.add_expr(&count(zz, ww), 1.0);
                    }
                }
                pair.compact();
                let terms = vec![
                    MaxTerm::always(degrees[x].clone()),
                    MaxTerm::always(degrees[y].clone()),
                    MaxTerm::always(pair),
                ];
                let role = VarRole::Concurrency {
                    destination: x,
                    source: y,
                };
                cvar.insert((x, y), lin_max(&mut b, &format!("c_x{x}_y{y}"), terms, VarKind::Integer, role)?);
            }
        }
        for (i, s) in slots.iter().enumerate() {
            let bits = BITS_PER_BYTE * instance.vnf_types[s.vnf].size_gb / instance.migration_bw;
            for x in (0..m).filter(|&x| x != cur[i]) {
                let e = LinExpr::var(cvar[&(x, cur[i])]).scaled(bits);
                t_terms.push(MaxTerm::gated(e, w[i][x], w_max));
            }
        }
    }
    let t = lin_max(&mut b, "t_mig", t_terms, VarKind::Continuous, VarRole::MigrationTime)?;

    // objective
    let inv = |v: f64| if v > 0.0 { 1.0 / v } else { 0.0 };
    let a6 = alpha / 6.0;
    let bt = &bounds.terms;
    let util = current_utilization(instance, state);
    let mut obj = LinExpr::new();
    let np = (1.0 - alpha) * inv(bounds.total_power_w);
    for (x, srv) in instance.servers.iter().enumerate() {
        obj.add(on[x], np * srv.power_w);
    }
    obj.add_expr(&u_expr, a6 * inv(bt.u));
    for (i, s) in slots.iter().enumerate() {
        let t = &instance.vnf_types[s.vnf];
        let q = util.get(&(s.sfc, s.vnf)).copied().unwrap_or(0.0) * t.migration_penalty;
        obj.add_expr(&moved(i), a6 * (t.size_gb * inv(bt.v) + q * inv(bt.y)));
        let mut zc = moved(i).scaled(instance.servers[cur[i]].overhead);
        for x in (0..m).filter(|&x| x != cur[i]) {
            zc.add(w[i][x], instance.servers[x].overhead);
        }
        obj.add_expr(&zc, a6 * inv(bt.z));
    }
    obj.add(t, a6 * inv(bt.w));
    for (s, &dv) in d.iter().enumerate() {
        let loss = instance.sfcs[s].revenue_rate * instance.sfc_rate_gbps(s) * instance.downtime_constant;
        obj.add(dv, a6 * loss * inv(bt.x));
    }
    b.set_objective(obj);
    Ok(b.finish())
}

/// Complete assignment for a decision: its placement and path binaries set,
/// every other decision binary 0, auxiliaries lifted.
pub fn assignment_for_decision(model: &MilpModel, instance: &Instance, decision: &Decision) -> Result<Assignment> {
    let index: HashMap<&str, VarId> = model.vars.iter().enumerate().map(|(i, v)| (v.name.as_str(), VarId(i))).collect();
    let lookup = |name: String| {
        index
            .get(name.as_str())
            .copied()
            .ok_or_else(|| Error::invalid(format!("model has no variable `{name}`")))
    };
    let slots = instance.slots();
    if decision.hosts.len() != slots.len() || decision.paths.len() != instance.flows.len() {
        return Err(Error::invalid("decision does not match the instance"));
    }
    let mut a = Assignment::zeros(model);
    for (s, &x) in slots.iter().zip(&decision.hosts) {
        a.set(lookup(w_name(s.sfc, s.vnf, x))?, 1.0);
    }
    let offsets = instance.slot_offsets();
    for f in &instance.flows {
        let k = instance.sfcs[f.sfc].chain.len();
        let ends = segment_endpoints(instance, f, &decision.hosts[offsets[f.sfc]..offsets[f.sfc] + k]);
        let choice = &decision.paths[f.id];
        if choice.len() != k + 1 {
            return Err(Error::invalid(format!("flow {} needs {} path choices", f.id, k + 1)));
        }
        for g in 0..=k {
            a.set(lookup(p_name(f.id, g, ends[g], ends[g + 1], choice[g]))?, 1.0);
        }
    }
    model.lift(&mut a);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostEngine;
    use crate::feasibility::validate;
    use crate::fixtures::{micro_instance, micro_migrated, micro_state};
    use crate::milp::{evaluate_assignment, export_lp, parse_lp};
    use crate::scenario::{generate_scenario, initial_state, ScenarioOverrides, ScenarioSize};

    /// Every decision of the candidate space, placements outer.
    fn all_decisions(inst: &Instance, cands: &CandidateSet) -> Vec<Decision> {
        let n = inst.slots().len();
        let m = inst.servers.len();
        let offsets = inst.slot_offsets();
        let mut out = Vec::new();
        for code in 0..m.pow(n as u32) {
            let hosts: Vec<usize> = (0..n).map(|i| code / m.pow((n - 1 - i) as u32) % m).collect();
            let mut per_flow: Vec<Vec<Vec<usize>>> = Vec::new();
            for f in &inst.flows {
                let k = inst.sfcs[f.sfc].chain.len();
                let ends = segment_endpoints(inst, f, &hosts[offsets[f.sfc]..offsets[f.sfc] + k]);
                let radix: Vec<usize> = ends.windows(2).map(|w| cands.get(w[0], w[1]).len()).collect();
                let mut combos = vec![vec![]];
                for r in radix {
                    combos = combos
                        .into_iter()
                        .flat_map(|c: Vec<usize>| {
                            (0..r).map(move |i| {
                                let mut c = c.clone();
                                c.push(i);
                                c
                            })
                        })
                        .collect();
                }
                per_flow.push(combos);
            }
            let mut paths: Vec<Vec<Vec<usize>>> = vec![vec![]];
            for combos in per_flow {
                paths = paths
                    .into_iter()
                    .flat_map(|p| {
                        combos.iter().map(move |c| {
                            let mut p = p.clone();
                            p.push(c.clone());
                            p
                        })
                    })
                    .collect();
            }
            out.extend(paths.into_iter().map(|paths| Decision {
                hosts: hosts.clone(),
                paths,
            }));
        }
        out
    }

    fn tiny(seed: u64) -> Instance {
        let o = ScenarioOverrides {
            n_sfcs: Some(2),
            vnfs_per_sfc: Some(2),
            n_flows: Some(2),
            n_spine: Some(1),
            n_leaf: Some(2),
            n_servers: Some(3),
            ..Default::default()
        };
        generate_scenario(ScenarioSize::Small, seed, Some(&o)).unwrap()
    }

    #[test]
    fn micro_model_shape() {
        let inst = micro_instance();
        let st = micro_state();
        let cands = CandidateSet::build(&inst, &st, 4).unwrap();
        let m = build_milp(&inst, &st, 1.0, &cands).unwrap();
        let w: Vec<_> = m.vars.iter().filter(|v| matches!(v.role, VarRole::Placement { .. })).collect();
        assert_eq!(w.len(), 2);
        let ident = Decision::from_configuration(&inst, &cands, &st).unwrap();
        let a = assignment_for_decision(&m, &inst, &ident).unwrap();
        let e = evaluate_assignment(&m, &a).unwrap();
        assert!(e.satisfied, "{:?}", e.violated);
        assert_eq!(e.objective, 0.0);
        let text = export_lp(&m).unwrap();
        let bins = text.split("Binaries\n").nth(1).unwrap();
        assert!(bins.contains("w_s0_v0_x0") && bins.contains("w_s0_v0_x1"));
    }

    #[test]
    fn micro_migration_matches_engine() {
        let inst = micro_instance();
        let st = micro_state();
        let cands = CandidateSet::build(&inst, &st, 4).unwrap();
        let engine = CostEngine::new(&inst, &st, &cands).unwrap();
        let target = micro_migrated();
        let d = Decision::from_configuration(&inst, &cands, &target).unwrap();
        for alpha in [0.0, 0.5, 1.0] {
            let m = build_milp(&inst, &st, alpha, &cands).unwrap();
            let e = evaluate_assignment(&m, &assignment_for_decision(&m, &inst, &d).unwrap()).unwrap();
            let want = engine.evaluate(&target, alpha).unwrap().joint;
            assert!(e.satisfied);
            assert!((e.objective - want).abs() < 1e-9, "{} vs {want}", e.objective);
        }
    }

    #[test]
    fn all_zero_assignment_violates_placement() {
        let inst = micro_instance();
        let st = micro_state();
        let cands = CandidateSet::build(&inst, &st, 4).unwrap();
        let m = build_milp(&inst, &st, 0.5, &cands).unwrap();
        let e = evaluate_assignment(&m, &Assignment::zeros(&m)).unwrap();
        assert!(!e.satisfied);
        assert!(e.violated.iter().any(|v| v.starts_with("place_")));
    }

    #[test]
    fn every_decision_agrees_with_engine_and_validator() {
        for seed in 0..3 {
            let inst = tiny(seed);
            let st = initial_state(&inst).unwrap();
            let cands = CandidateSet::build(&inst, &st, 2).unwrap();
            let engine = CostEngine::new(&inst, &st, &cands).unwrap();
            let alpha = 0.3;
            let m = build_milp(&inst, &st, alpha, &cands).unwrap();
            let mut feasible = 0;
            for d in all_decisions(&inst, &cands) {
                let cfg = d.to_configuration(&inst, &cands).unwrap();
                let ok = validate(&inst, &cfg, Some(&st)).is_feasible();
                let e = evaluate_assignment(&m, &assignment_for_decision(&m, &inst, &d).unwrap()).unwrap();
                assert_eq!(e.satisfied, ok, "seed {seed} {d:?}: {:?}", e.violated);
                if ok {
                    feasible += 1;
                    let want = engine.evaluate_reference(&cfg, alpha).unwrap().joint;
                    assert!((e.objective - want).abs() <= 1e-9, "{} vs {want}", e.objective);
                }
            }
            assert!(feasible > 0);
        }
    }

    #[test]
    fn alpha_zero_minimum_is_lowest_energy() {
        let inst = tiny(7);
        let st = initial_state(&inst).unwrap();
        let cands = CandidateSet::build(&inst, &st, 2).unwrap();
        let m = build_milp(&inst, &st, 0.0, &cands).unwrap();
        let mut best_milp = f64::INFINITY;
        let mut best_np = f64::INFINITY;
        let total: f64 = inst.servers.iter().map(|s| s.power_w).sum();
        for d in all_decisions(&inst, &cands) {
            let e = evaluate_assignment(&m, &assignment_for_decision(&m, &inst, &d).unwrap()).unwrap();
            if e.satisfied {
                best_milp = best_milp.min(e.objective);
            }
            let cfg = d.to_configuration(&inst, &cands).unwrap();
            if validate(&inst, &cfg, Some(&st)).is_feasible() {
                let mut on: Vec<usize> = d.hosts.clone();
                on.sort_unstable();
                on.dedup();
                best_np = best_np.min(on.iter().map(|&x| inst.servers[x].power_w).sum::<f64>() / total);
            }
        }
        assert!((best_milp - best_np).abs() < 1e-12);
    }

    #[test]
    fn small_scenario_identity_and_round_trip() {
        let inst = generate_scenario(ScenarioSize::Small, 1, None).unwrap();
        let st = initial_state(&inst).unwrap();
        let cands = CandidateSet::build(&inst, &st, 4).unwrap();
        let m = build_milp(&inst, &st, 0.5, &cands).unwrap();
        let ident = Decision::from_configuration(&inst, &cands, &st).unwrap();
        let e = evaluate_assignment(&m, &assignment_for_decision(&m, &inst, &ident).unwrap()).unwrap();
        let want = crate::cost::total_cost(&inst, &st, &st, 0.5).unwrap().joint;
        assert!(e.satisfied, "{:?}", e.violated);
        assert!((e.objective - want).abs() < 1e-9);
        let first = export_lp(&m).unwrap();
        assert_eq!(export_lp(&parse_lp(&first).unwrap()).unwrap(), first);
    }

    #[test]
    fn build_is_deterministic() {
        let inst = tiny(2);
        let st = initial_state(&inst).unwrap();
        let cands = CandidateSet::build(&inst, &st, 2).unwrap();
        let a = build_milp(&inst, &st, 0.4, &cands).unwrap();
        let b = build_milp(&inst, &st, 0.4, &cands).unwrap();
        assert_eq!(a, b);
    }
}
