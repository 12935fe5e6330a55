use abducer_core::generate::{random_network, random_taxonomy, NetworkShape, TaxonomyShape};
use abducer_core::oracle::enumerate_valid_scenarios;
use abducer_core::recognition::{ln_rational, recognize, relevant_concept, RecognitionQuery};
use abducer_core::scenario::{log_weight, probability};
use abducer_core::{EventId, Scenario};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn valid_with_disorder_culprit(seed: u64) -> (abducer_core::CausalNetwork, Vec<Scenario>) {
    let net = random_network(seed, &NetworkShape::default());
    let all = enumerate_valid_scenarios(&net, 3)
        .unwrap()
        .filter(|s| net.is_disorder(s.culprit))
        .collect();
    (net, all)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_and_probability_agree(seed in 0u64..100_000) {
        let (net, all) = valid_with_disorder_culprit(seed);
        for s in &all {
            let p = probability(&net, s).unwrap();
            let w = log_weight(&net, s).unwrap();
            prop_assert!(((-w).exp() - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn extending_a_scenario_never_raises_its_probability(seed in 0u64..100_000) {
        let (net, all) = valid_with_disorder_culprit(seed);
        for s in &all {
            for t in &all {
                if s.culprit == t.culprit && s.causations.is_subset(&t.causations) {
                    prop_assert!(probability(&net, t).unwrap() <= probability(&net, s).unwrap());
                }
            }
        }
    }

    #[test]
    fn isa_ancestors_is_the_reflexive_transitive_closure(seed in 0u64..100_000) {
        let net = random_network(seed, &NetworkShape::default());
        for e in net.ids() {
            // closure by repeated parent expansion
            let mut closure = BTreeSet::from([e]);
            let mut frontier = vec![e];
            while let Some(x) = frontier.pop() {
                for &p in net.isa_parents(x) {
                    if closure.insert(p) {
                        frontier.push(p);
                    }
                }
            }
            let listed = net.isa_ancestors(e);
            prop_assert_eq!(listed.first().copied(), Some(e));
            prop_assert_eq!(listed.iter().copied().collect::<BTreeSet<_>>(), closure);
            // parents never precede their children
            for (i, &x) in listed.iter().enumerate() {
                for &p in net.isa_parents(x) {
                    let j = listed.iter().position(|&y| y == p).unwrap();
                    prop_assert!(j > i);
                }
            }
        }
    }

    #[test]
    fn recognition_matches_hand_computed_scores(seed in 0u64..100_000, picks in proptest::collection::vec((0usize..3, 0usize..2), 1..3)) {
        let kb = random_taxonomy(seed, &TaxonomyShape::default());
        let descr: Vec<(String, String)> = picks
            .iter()
            .map(|&(p, v)| (format!("p{p}"), format!("v{v}")))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let q = RecognitionQuery::all_concepts(&kb, &descr).unwrap();
        let out = recognize(&kb, &q).unwrap();
        prop_assert_eq!(out.ranked.len() + out.inapplicable.len(), kb.concepts().len());
        for r in &out.ranked {
            // #c * prod over the description of #r[p,v] / #r, r the reference class
            let mut score = BigRational::from_integer(BigInt::from(kb.count(r.concept).unwrap()));
            for (p, v) in &descr {
                let rc: EventId = relevant_concept(&kb, r.concept, p, v).unwrap().unwrap();
                let num = kb.specs().iter().find(|s| s.concept == rc && &s.property == p && &s.value == v).unwrap().count;
                score *= BigRational::new(BigInt::from(num), BigInt::from(kb.count(rc).unwrap()));
            }
            prop_assert_eq!(&score, &r.score);
            prop_assert!((r.weight + ln_rational(&score)).abs() <= 1e-9);
        }
        for pair in out.ranked.windows(2) {
            prop_assert!(pair[0].score >= pair[1].score);
        }
    }
}
