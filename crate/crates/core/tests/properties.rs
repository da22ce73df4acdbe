mod common;

use proptest::prelude::*;
use sfc_reconfig::io::{load_instance, load_state, save_instance, save_state};
use sfc_reconfig::milp::{build_milp, export_lp, parse_lp};
use sfc_reconfig::model::segment_endpoints;
use sfc_reconfig::topology::candidate_paths;
use sfc_reconfig::{
    build_leaf_spine, generate_scenario, initial_state, validate, CandidateSet, CostEngine, Decision, Instance,
    ScenarioOverrides, ScenarioSize,
};

/// Decision built from arbitrary digits, wrapped into range.
fn decision(inst: &Instance, cands: &CandidateSet, digits: &[usize]) -> Decision {
    let mut it = digits.iter().copied().cycle();
    let m = inst.servers.len();
    let hosts: Vec<usize> = (0..inst.slots().len()).map(|_| it.next().unwrap() % m).collect();
    let offsets = inst.slot_offsets();
    let paths = inst
        .flows
        .iter()
        .map(|f| {
            let k = inst.sfcs[f.sfc].chain.len();
            let ends = segment_endpoints(inst, f, &hosts[offsets[f.sfc]..offsets[f.sfc] + k]);
            ends.windows(2)
                .map(|w| it.next().unwrap() % cands.get(w[0], w[1]).len())
                .collect()
        })
        .collect();
    Decision { hosts, paths }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_agrees_with_reference(seed in 0u64..500, digits in prop::collection::vec(0usize..64, 1..24), alpha in 0.0f64..=1.0) {
        let (inst, st) = common::micro(seed);
        let cands = CandidateSet::build(&inst, &st, 3).unwrap();
        let engine = CostEngine::new(&inst, &st, &cands).unwrap();
        let cfg = decision(&inst, &cands, &digits).to_configuration(&inst, &cands).unwrap();
        let fast = engine.evaluate(&cfg, alpha).unwrap();
        let slow = engine.evaluate_reference(&cfg, alpha).unwrap();
        prop_assert!((fast.joint - slow.joint).abs() <= 1e-12);
        for (a, b) in fast.raw.as_array().iter().zip(slow.raw.as_array()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        prop_assert_eq!(fast.migrations, slow.migrations);
    }

    #[test]
    fn normalized_terms_stay_in_unit_interval(seed in 0u64..500, digits in prop::collection::vec(0usize..64, 1..24), alpha in 0.0f64..=1.0) {
        let (inst, st) = common::micro(seed);
        let cands = CandidateSet::build(&inst, &st, 2).unwrap();
        let engine = CostEngine::new(&inst, &st, &cands).unwrap();
        let cfg = decision(&inst, &cands, &digits).to_configuration(&inst, &cands).unwrap();
        let b = engine.evaluate(&cfg, alpha).unwrap();
        for t in b.normalized.as_array().into_iter().chain([b.cost_np, b.cost_rec]) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&t), "{t} out of range: {b:?}");
        }
        let joint = (1.0 - alpha) * b.cost_np + alpha * b.cost_rec;
        prop_assert!((b.joint - joint).abs() <= 1e-12);
        prop_assert!((b.cost_rec - b.normalized.mean()).abs() <= 1e-12);
    }

    #[test]
    fn staying_put_costs_nothing(seed in 0u64..500, alpha in 0.0f64..=1.0) {
        let (inst, st) = common::micro(seed);
        let cands = CandidateSet::build(&inst, &st, 2).unwrap();
        let b = CostEngine::new(&inst, &st, &cands).unwrap().evaluate(&st, alpha).unwrap();
        prop_assert_eq!(b.cost_rec, 0.0);
        prop_assert_eq!(b.migrations, 0);
    }

    #[test]
    fn more_capacity_never_breaks_feasibility(seed in 0u64..500, digits in prop::collection::vec(0usize..64, 1..24), extra in 1u32..8, scale in 1.0f64..4.0) {
        let (inst, st) = common::micro(seed);
        let cands = CandidateSet::build(&inst, &st, 2).unwrap();
        let cfg = decision(&inst, &cands, &digits).to_configuration(&inst, &cands).unwrap();
        let before = validate(&inst, &cfg, Some(&st));
        let mut bigger = inst.clone();
        for s in &mut bigger.servers {
            s.cores += extra;
            s.memory_gb *= scale;
            s.cpu_hz *= scale;
        }
        let after = validate(&bigger, &cfg, Some(&st));
        prop_assert!(after.violations.len() <= before.violations.len());
        if before.is_feasible() {
            prop_assert!(after.is_feasible());
        }
    }

    #[test]
    fn generator_respects_ranges(seed in any::<u64>(), sfcs in 1usize..6, vnfs in 1usize..4, servers in 1usize..12, leaves in 1usize..5) {
        let o = ScenarioOverrides {
            n_sfcs: Some(sfcs),
            vnfs_per_sfc: Some(vnfs),
            n_servers: Some(servers),
            n_leaf: Some(leaves),
            ..Default::default()
        };
        let inst = generate_scenario(ScenarioSize::Medium, seed, Some(&o)).unwrap();
        prop_assert_eq!(inst.sfcs.len(), sfcs);
        prop_assert_eq!(inst.vnf_types.len(), 2 * vnfs);
        prop_assert!(inst.sfcs.iter().all(|s| s.chain.len() == vnfs));
        for s in &inst.sfcs {
            let mut c = s.chain.clone();
            c.sort_unstable();
            c.dedup();
            prop_assert_eq!(c.len(), vnfs);
        }
        prop_assert!(inst.vnf_types.iter().all(|v| (1.0..=2.0).contains(&v.size_gb)));
        prop_assert!(inst.servers.iter().all(|s| (20.0..=90.0).contains(&s.power_w) && (20.0..=50.0).contains(&s.overhead)));
        prop_assert!(inst.flows.iter().all(|f| (50.0..=100.0).contains(&f.rate) && (50.0..=100.0).contains(&f.delay_threshold_ms)));
        prop_assert!(inst.flows.iter().all(|f| f.ingress >= 5 && f.ingress < 5 + leaves && f.egress >= 5 && f.egress < 5 + leaves));
        prop_assert_eq!(generate_scenario(ScenarioSize::Medium, seed, Some(&o)).unwrap(), inst);
    }

    #[test]
    fn leaf_spine_shape(spines in 1usize..5, leaves in 1usize..6, servers in 1usize..12) {
        let t = build_leaf_spine(spines, leaves, servers, 10.0, 1.0).unwrap();
        prop_assert_eq!(t.node_count(), spines + leaves + servers);
        prop_assert_eq!(t.links().len(), spines * leaves + servers);
        prop_assert_eq!(t.switch_link_count(), spines * leaves);
        for &s in t.servers() {
            let a = t.attachment(s);
            prop_assert!(a >= spines && a < spines + leaves);
            prop_assert_eq!(t.neighbors(s).count(), 1);
        }
    }

    #[test]
    fn candidate_paths_are_simple_and_sorted(spines in 1usize..4, leaves in 2usize..5, k in 1usize..6, a in 0usize..16, b in 0usize..16) {
        let t = build_leaf_spine(spines, leaves, 2, 10.0, 1.0).unwrap();
        let sw = t.switches();
        let (src, dst) = (sw[a % sw.len()], sw[b % sw.len()]);
        let paths = candidate_paths(&t, src, dst, k).unwrap();
        prop_assert!(!paths.is_empty() && paths.len() <= k);
        for p in &paths {
            if src == dst {
                prop_assert!(p.is_empty());
                continue;
            }
            prop_assert_eq!(p.src(), Some(src));
            prop_assert_eq!(p.dst(), Some(dst));
            let mut n = p.nodes.clone();
            n.sort_unstable();
            n.dedup();
            prop_assert_eq!(n.len(), p.nodes.len());
            prop_assert!(p.nodes.windows(2).all(|w| t.link_between(w[0], w[1]).is_some()));
        }
        prop_assert!(paths.windows(2).all(|w| w[0].hops() <= w[1].hops()));
        for (i, p) in paths.iter().enumerate() {
            prop_assert!(paths[..i].iter().all(|q| q.nodes != p.nodes));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn files_round_trip(seed in 0u64..1000) {
        let inst = generate_scenario(ScenarioSize::Small, seed, None).unwrap();
        let st = initial_state(&inst).unwrap();
        let inst2 = load_instance(&save_instance(&inst).unwrap()).unwrap();
        let st2 = load_state(&save_state(&st).unwrap()).unwrap();
        prop_assert_eq!(save_instance(&inst2).unwrap(), save_instance(&inst).unwrap());
        prop_assert_eq!(&st2, &st);
        prop_assert!(validate(&inst, &st, None).is_feasible());
    }

    #[test]
    fn lp_text_round_trips(seed in 0u64..500, alpha in 0.0f64..=1.0) {
        let (inst, st) = common::micro(seed);
        let cands = CandidateSet::build(&inst, &st, 2).unwrap();
        let m = build_milp(&inst, &st, alpha, &cands).unwrap();
        let text = export_lp(&m).unwrap();
        let back = parse_lp(&text).unwrap();
        prop_assert_eq!(back.vars.len(), m.vars.len());
        prop_assert_eq!(back.constraints.len(), m.constraints.len());
        prop_assert_eq!(export_lp(&back).unwrap(), text);
    }
}
