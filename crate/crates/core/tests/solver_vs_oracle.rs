use abducer_core::generate::{random_network, random_observations, rng, NetworkShape};
use abducer_core::oracle::best_explanations_bruteforce;
use abducer_core::scenario::{log_weight, ObservationSet, Scenario};
use abducer_core::solver::{build_search_graph, explain, ranked_trees, steiner_dp, tree_to_scenario, EdgeSet};
use abducer_core::{CausalNetwork, EventId, TOP};
use std::collections::BTreeSet;

fn observations(net: &CausalNetwork, seed: u64, max: usize) -> ObservationSet {
    let mut r = rng(seed ^ 0x5eed);
    ObservationSet::new(net, random_observations(&mut r, net, max)).unwrap()
}

fn describe(net: &CausalNetwork, list: &[abducer_core::RankedExplanation]) -> Vec<String> {
    list.iter()
        .map(|r| format!("{} {:.9}", r.scenario.display(net), r.log_weight))
        .collect()
}

#[test]
fn single_mode_matches_bruteforce() {
    let shape = NetworkShape::default();
    let (mut nonempty, mut with_links) = (0, 0);
    for seed in 0..250u64 {
        let net = random_network(seed, &shape);
        let o = observations(&net, seed, 3);
        let oracle = best_explanations_bruteforce(&net, &o, 3).unwrap();
        let solver = explain(&net, &o, 3, false).unwrap().results;
        assert_eq!(
            describe(&net, &solver),
            describe(&net, &oracle),
            "seed {seed}, O = {:?}\n{net}",
            o.names(&net)
        );
        nonempty += usize::from(!oracle.is_empty());
        with_links += usize::from(oracle.iter().any(|r| !r.scenario.is_empty()));
    }
    assert!(nonempty > 100 && with_links > 50, "{nonempty} nonempty, {with_links} with links");
}

#[test]
fn multi_mode_matches_bruteforce_on_topped_network() {
    let shape = NetworkShape {
        max_events: 9,
        max_causal: 9,
        ..NetworkShape::default()
    };
    for seed in 0..120u64 {
        let net = random_network(seed, &shape);
        let o = observations(&net, seed, 3);
        let topped = net.add_top().unwrap();
        let top = topped.id(TOP).unwrap();
        let o_top = o.remap(&net, &topped).unwrap();
        let mut oracle = best_explanations_bruteforce(&topped, &o_top, usize::MAX).unwrap();
        oracle.retain(|r| r.scenario.culprit == top);
        oracle.truncate(3);
        for (i, r) in oracle.iter_mut().enumerate() {
            r.rank = i + 1;
        }
        let out = explain(&net, &o, 3, true).unwrap();
        assert_eq!(describe(&out.network, &out.results), describe(&topped, &oracle), "seed {seed}");
    }
}

/// Reference version of the solver's in-network rule, written from its
/// definition.
fn blocked(net: &CausalNetwork, v: EventId, c1: EventId, c2: EventId) -> bool {
    let ups: Vec<EventId> = net.isa_ancestors(v);
    ups.iter().any(|&c3| {
        c3 != c1
            && net.isa_star(c3, c1)
            && net.link_index(c3, c2).is_some()
            && !ups.iter().any(|&c| {
                c != c3
                    && net.isa_star(c, c3)
                    && net.causal_links().iter().any(|l| {
                        l.cause == c && (l.effect == c2 || net.reach(l.effect).contains(c2.index()))
                    })
            })
    })
}

/// Every tree-shaped link set hanging off `root` that covers `terminals`,
/// with its weight.
fn all_trees(net: &CausalNetwork, root: EventId, terminals: &[EventId]) -> Vec<(BTreeSet<(EventId, EventId)>, f64)> {
    let links: Vec<(EventId, EventId, f64)> = net
        .causal_links()
        .iter()
        .map(|l| (l.cause, l.effect, -l.cond_prob.ln()))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << links.len()) {
        let chosen: Vec<&(EventId, EventId, f64)> =
            (0..links.len()).filter(|&i| mask >> i & 1 == 1).map(|i| &links[i]).collect();
        let effects: BTreeSet<EventId> = chosen.iter().map(|l| l.1).collect();
        if effects.len() < chosen.len() {
            continue;
        }
        let mut reached = vec![root];
        let mut pending = chosen.clone();
        loop {
            let before = pending.len();
            pending.retain(|&&(c1, c2, _)| {
                let ok = reached.iter().any(|&v| net.isa_star(v, c1) && !blocked(net, v, c1, c2));
                if ok {
                    reached.push(c2);
                }
                !ok
            });
            if pending.is_empty() || pending.len() == before {
                break;
            }
        }
        if !pending.is_empty() {
            continue;
        }
        let covered = terminals
            .iter()
            .all(|&t| t == root || chosen.iter().any(|l| l.0 == t || l.1 == t));
        if covered {
            let w = chosen.iter().map(|l| l.2).sum::<f64>();
            out.push((chosen.iter().map(|l| (l.0, l.1)).collect(), w));
        }
    }
    out
}

#[test]
fn best_first_enumeration_is_exhaustive_and_ordered() {
    let shape = NetworkShape {
        max_events: 8,
        max_causal: 9,
        max_isa: 5,
        ..NetworkShape::default()
    };
    let mut total = 0;
    for seed in 0..150u64 {
        let net = random_network(seed, &shape);
        let o = observations(&net, seed, 3);
        let terminals: Vec<EventId> = o.ids().iter().copied().collect();
        let g = build_search_graph(&net);
        let roots: Vec<EventId> = net.disorders().collect();
        let mut expected: Vec<(EventId, BTreeSet<(EventId, EventId)>, f64)> = Vec::new();
        for &r in &roots {
            let base = -net.prior(r).unwrap().ln();
            for (links, w) in all_trees(&net, r, &terminals) {
                expected.push((r, links, base + w));
            }
        }
        let (trees, _) = ranked_trees(&g, &roots, &terminals, 100_000).unwrap();
        total += trees.len();
        for pair in trees.windows(2) {
            assert!(pair[0].weight <= pair[1].weight + 1e-12, "seed {seed}: out of order");
        }
        let got: BTreeSet<(EventId, BTreeSet<(EventId, EventId)>)> =
            trees.iter().map(|t| (t.root, t.links.iter().copied().collect())).collect();
        assert_eq!(got.len(), trees.len(), "seed {seed}: duplicates");
        let want: BTreeSet<(EventId, BTreeSet<(EventId, EventId)>)> =
            expected.iter().map(|(r, l, _)| (*r, l.clone())).collect();
        assert_eq!(got, want, "seed {seed}");
        for t in &trees {
            let (_, _, w) = expected
                .iter()
                .find(|(r, l, _)| *r == t.root && l.iter().copied().eq(t.links.iter().copied()))
                .unwrap();
            assert!((t.weight - w).abs() < 1e-9);
        }
    }
    assert!(total > 300, "only {total} trees");
}

#[test]
fn tree_weight_reconciles_with_scenario_weight() {
    let shape = NetworkShape::default();
    let none = EdgeSet::new();
    for seed in 0..200u64 {
        let net = random_network(seed, &shape);
        let o = observations(&net, seed, 3);
        let terminals: Vec<EventId> = o.ids().iter().copied().collect();
        let g = build_search_graph(&net);
        let n = net.len();
        for root in net.disorders() {
            let (tree, table) = steiner_dp(&g, root, &terminals, &none, &none).unwrap();
            assert!(table.entry_count() <= n << terminals.len());
            if let Some(tree) = tree {
                let s: Scenario = tree_to_scenario(&net, &tree).unwrap();
                let w = log_weight(&net, &s).unwrap();
                assert!((tree.total_weight + g.node_weight(root).unwrap() - w).abs() < 1e-12, "seed {seed}");
            }
        }
    }
}

#[test]
fn top_reaches_every_disorder_when_uncaused_events_are_disorders() {
    let shape = NetworkShape {
        uncaused_are_disorders: true,
        ..NetworkShape::default()
    };
    for seed in 0..300u64 {
        let net = random_network(seed, &shape);
        let topped = net.add_top().unwrap();
        let top = topped.top().unwrap();
        // causal-only reachability from TOP
        let mut seen = BTreeSet::from([top]);
        let mut stack = vec![top];
        while let Some(x) = stack.pop() {
            for &li in topped.causal_out(x) {
                let y = topped.link(li).effect;
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        for d in topped.disorders() {
            assert!(seen.contains(&d), "seed {seed}: {} unreachable", topped.name(d));
        }
        assert!(topped.add_top().is_err());
    }
}
