//! Exhaustive reference engine: sweeps every subset of causal links and
//! every culprit, keeping what the validity predicate accepts.
//!
//! Only meant for small networks; the sweep is refused above a configurable
//! number of causal links.

use crate::kb::{CausalNetwork, EventId};
use crate::ranking::{rank_explanations, RankedExplanation};
use crate::scenario::{ObservationSet, Scenario, ScenarioError, ValidityChecker};
use fixedbitset::FixedBitSet;
use itertools::{Combinations, Itertools};
use std::collections::VecDeque;
use std::ops::Range;

pub const DEFAULT_LINK_LIMIT: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Largest number of causal links the sweep will accept.
    pub link_limit: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            link_limit: DEFAULT_LINK_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("network has {links} causal links; exhaustive search is limited to {limit}")]
    NetworkTooLarge { links: usize, limit: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

fn guard(net: &CausalNetwork, config: &OracleConfig) -> Result<(), OracleError> {
    let links = net.causal_links().len();
    if links > config.link_limit {
        return Err(OracleError::NetworkTooLarge {
            links,
            limit: config.link_limit,
        });
    }
    Ok(())
}

/// Yields valid scenarios by increasing link count, then link subset in
/// lexicographic index order, then culprit.
pub struct ValidScenarios<'n> {
    checker: ValidityChecker<'n>,
    max_links: usize,
    size: usize,
    combos: Combinations<Range<usize>>,
    buffer: VecDeque<Scenario>,
}

impl Iterator for ValidScenarios<'_> {
    type Item = Scenario;

    fn next(&mut self) -> Option<Scenario> {
        let net = self.checker.network();
        let m = net.causal_links().len();
        loop {
            if let Some(s) = self.buffer.pop_front() {
                return Some(s);
            }
            let combo = match self.combos.next() {
                Some(c) => c,
                None => {
                    if self.size >= self.max_links.min(m) {
                        return None;
                    }
                    self.size += 1;
                    self.combos = (0..m).combinations(self.size);
                    continue;
                }
            };
            let links: FixedBitSet = set_of(m, &combo);
            for culprit in net.ids() {
                if self.checker.is_valid_links(culprit, &links) {
                    self.buffer.push_back(Scenario::from_link_set(net, culprit, &links));
                }
            }
        }
    }
}

fn set_of(m: usize, members: &[usize]) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(m);
    for &i in members {
        s.insert(i);
    }
    s
}

pub fn enumerate_valid_scenarios(net: &CausalNetwork, max_links: usize) -> Result<ValidScenarios<'_>, OracleError> {
    enumerate_valid_scenarios_with(net, max_links, &OracleConfig::default())
}

pub fn enumerate_valid_scenarios_with<'n>(
    net: &'n CausalNetwork,
    max_links: usize,
    config: &OracleConfig,
) -> Result<ValidScenarios<'n>, OracleError> {
    guard(net, config)?;
    Ok(ValidScenarios {
        checker: ValidityChecker::new(net),
        max_links,
        size: 0,
        combos: (0..net.causal_links().len()).combinations(0),
        buffer: VecDeque::new(),
    })
}

pub fn best_explanations_bruteforce(
    net: &CausalNetwork,
    o: &ObservationSet,
    k: usize,
) -> Result<Vec<RankedExplanation>, OracleError> {
    best_explanations_bruteforce_with(net, o, k, &OracleConfig::default())
}

pub fn best_explanations_bruteforce_with(
    net: &CausalNetwork,
    o: &ObservationSet,
    k: usize,
    config: &OracleConfig,
) -> Result<Vec<RankedExplanation>, OracleError> {
    guard(net, config)?;
    for &id in o.ids() {
        if id.index() >= net.len() {
            return Err(ScenarioError::UnknownEventId(id.index()).into());
        }
    }
    let m = net.causal_links().len();
    let culprits: Vec<EventId> = net.disorders().collect();
    let mut checker = ValidityChecker::new(net);
    let mut found = Vec::new();
    for size in 0..=m {
        for combo in (0..m).combinations(size) {
            let links = set_of(m, &combo);
            let mut covered = FixedBitSet::with_capacity(net.len());
            for &li in &combo {
                covered.insert(net.link(li).cause.index());
                covered.insert(net.link(li).effect.index());
            }
            for &culprit in &culprits {
                let all_seen = o
                    .ids()
                    .iter()
                    .all(|&x| x == culprit || covered.contains(x.index()));
                if all_seen && checker.is_valid_links(culprit, &links) {
                    found.push(Scenario::from_link_set(net, culprit, &links));
                }
            }
        }
    }
    Ok(rank_explanations(net, found, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_network, NetworkShape};
    use crate::kb::parse_network;
    use crate::scenario::is_explanation;

    fn fig2() -> CausalNetwork {
        parse_network(include_str!("../../../fixtures/fig2.cnet")).unwrap()
    }

    #[test]
    fn singletons_only_without_links() {
        let net = fig2();
        let all: Vec<Scenario> = enumerate_valid_scenarios(&net, 0).unwrap().collect();
        assert_eq!(all.len(), 7);
        assert!(all.iter().all(|s| s.is_empty()));
    }

    #[test]
    fn fig2_valid_scenarios_up_to_two_links() {
        let net = fig2();
        let all: Vec<Scenario> = enumerate_valid_scenarios(&net, 2).unwrap().collect();
        let s = |c, l: &[(&str, &str)]| Scenario::from_names(&net, c, l).unwrap();
        assert!(all.contains(&s("d", &[("b", "e"), ("d", "g")])));
        assert!(all.contains(&s("c", &[("a", "e")])));
        assert!(all.contains(&s("f", &[("f", "g"), ("a", "e")])));
        assert!(!all.contains(&s("d", &[("a", "e")])));
        // regression pin, computed by this sweep
        assert_eq!(all.len(), FIG2_VALID_UP_TO_TWO);
        let again: Vec<Scenario> = enumerate_valid_scenarios(&net, 2).unwrap().collect();
        assert_eq!(all, again);
    }

    const FIG2_VALID_UP_TO_TWO: usize = 16;

    #[test]
    fn fig2_best_for_e_and_g() {
        let net = fig2();
        let o = ObservationSet::from_names(&net, &["e", "g"]).unwrap();
        let best = best_explanations_bruteforce(&net, &o, 2).unwrap();
        assert_eq!(best.len(), 2);
        assert_eq!(best[0].scenario, Scenario::from_names(&net, "f", &[("f", "g"), ("a", "e")]).unwrap());
        assert_eq!(best[1].scenario, Scenario::from_names(&net, "d", &[("b", "e"), ("d", "g")]).unwrap());
        assert!((best[0].log_weight - (12.5f64 * 5.0 / 3.0 * 10.0 / 3.0).ln()).abs() < 1e-12);
        assert!((best[0].log_weight - 4.2405).abs() < 1e-4);
        assert!((best[1].log_weight - 4.6052).abs() < 1e-4);
        assert_eq!((best[0].rank, best[1].rank), (1, 2));
    }

    #[test]
    fn fig2_best_for_e() {
        let net = fig2();
        let o = ObservationSet::from_names(&net, &["e"]).unwrap();
        let best = best_explanations_bruteforce(&net, &o, 3).unwrap();
        let s = |c, l: &[(&str, &str)]| Scenario::from_names(&net, c, l).unwrap();
        assert_eq!(best[0].scenario, s("c", &[("a", "e")]));
        assert!((best[0].log_weight - (10f64.ln() + (10.0f64 / 3.0).ln())).abs() < 1e-12);
        assert_eq!(best[1].scenario, s("f", &[("a", "e")]));
        assert_eq!(best[2].scenario, s("d", &[("b", "e")]));
        assert!((best[2].log_weight - (20f64.ln() + 2.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn observing_a_class_node() {
        // a is an endpoint of a~>e, so a scenario using that link covers it
        let net = fig2();
        let o = ObservationSet::from_names(&net, &["a"]).unwrap();
        let best = best_explanations_bruteforce(&net, &o, 1).unwrap();
        assert_eq!(best[0].scenario, Scenario::from_names(&net, "c", &[("a", "e")]).unwrap());
    }

    #[test]
    fn a_disorder_explains_itself() {
        let net = fig2();
        let o = ObservationSet::from_names(&net, &["c"]).unwrap();
        let best = best_explanations_bruteforce(&net, &o, 5).unwrap();
        assert_eq!(best[0].scenario, Scenario::from_names(&net, "c", &[]).unwrap());
        assert_eq!(best[0].probability, 0.10);
    }

    #[test]
    fn no_explanation_gives_empty_list() {
        let net = parse_network("event d prior=0.2 disorder\nevent x\nevent y\ncause x y p=0.5").unwrap();
        let o = ObservationSet::from_names(&net, &["y"]).unwrap();
        assert!(best_explanations_bruteforce(&net, &o, 3).unwrap().is_empty());
    }

    #[test]
    fn guard_refuses_large_networks() {
        let net = fig2();
        let tight = OracleConfig { link_limit: 3 };
        assert_eq!(
            enumerate_valid_scenarios_with(&net, 1, &tight).err(),
            Some(OracleError::NetworkTooLarge { links: 4, limit: 3 })
        );
        let o = ObservationSet::from_names(&net, &["e"]).unwrap();
        assert!(best_explanations_bruteforce_with(&net, &o, 1, &tight).is_err());
    }

    #[test]
    fn enumerated_scenarios_are_connected_and_unique() {
        let shape = NetworkShape::default();
        for seed in 0..40 {
            let net = random_network(seed, &shape);
            let all: Vec<Scenario> = enumerate_valid_scenarios(&net, 4).unwrap().collect();
            let unique: std::collections::BTreeSet<&Scenario> = all.iter().collect();
            assert_eq!(unique.len(), all.len());
            for s in &all {
                // every link's cause is an isa ancestor of something reached so far
                let mut reached = vec![s.culprit];
                let mut pending: Vec<(EventId, EventId)> = s.causations.iter().copied().collect();
                while !pending.is_empty() {
                    let before = pending.len();
                    pending.retain(|&(x, y)| {
                        if reached.iter().any(|&r| net.isa_star(r, x)) {
                            reached.push(y);
                            false
                        } else {
                            true
                        }
                    });
                    assert!(pending.len() < before, "seed {seed}: {} is disconnected", s.display(&net));
                }
            }
        }
    }

    #[test]
    fn bruteforce_results_are_explanations() {
        let shape = NetworkShape::default();
        for seed in 0..40 {
            let net = random_network(seed, &shape);
            let mut rng = crate::generate::rng(seed);
            let o = ObservationSet::new(&net, crate::generate::random_observations(&mut rng, &net, 3)).unwrap();
            let best = best_explanations_bruteforce(&net, &o, 4).unwrap();
            for pair in best.windows(2) {
                assert!(pair[0].log_weight <= pair[1].log_weight + 1e-9);
            }
            for r in &best {
                assert!(is_explanation(&net, &r.scenario, &o).unwrap());
            }
        }
    }
}
