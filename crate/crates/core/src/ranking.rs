//! Deterministic ordering of scored explanations, shared by the oracle and
//! the solver so both produce identical lists.

use crate::kb::CausalNetwork;
use crate::scenario::{self, Scenario};
use std::cmp::Ordering;

/// Two weights closer than this are tied and ordered by structure.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RankedExplanation {
    pub scenario: Scenario,
    pub log_weight: f64,
    pub probability: f64,
    /// 1-based.
    pub rank: usize,
}

/// Sorts by weight, then within runs of tied weights by fewer links, the
/// sorted link-name list and the culprit name.
pub fn sort_by_weight<T>(net: &CausalNetwork, items: &mut [T], key: impl Fn(&T) -> (&Scenario, f64)) {
    items.sort_by(|a, b| key(a).1.total_cmp(&key(b).1));
    let mut start = 0;
    while start < items.len() {
        let base = key(&items[start]).1;
        let mut end = start + 1;
        while end < items.len() && key(&items[end]).1 - base <= WEIGHT_TOLERANCE {
            end += 1;
        }
        items[start..end].sort_by(|a, b| structural_cmp(net, key(a).0, key(b).0));
        start = end;
    }
}

pub fn structural_cmp(net: &CausalNetwork, a: &Scenario, b: &Scenario) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.link_names(net).cmp(&b.link_names(net)))
        .then_with(|| net.name(a.culprit).cmp(net.name(b.culprit)))
}

/// Scores, orders and truncates valid explanations. Weight and probability
/// are recomputed from the network so every engine reports the same bits.
pub fn rank_explanations(net: &CausalNetwork, scenarios: Vec<Scenario>, k: usize) -> Vec<RankedExplanation> {
    let mut scored: Vec<(Scenario, f64)> = scenarios
        .into_iter()
        .map(|s| {
            let w = scenario::log_weight(net, &s).expect("explanations have a prior");
            (s, w)
        })
        .collect();
    sort_by_weight(net, &mut scored, |(s, w)| (s, *w));
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (s, w))| RankedExplanation {
            probability: scenario::probability_unchecked(net, &s).expect("explanations have a prior"),
            scenario: s,
            log_weight: w,
            rank: i + 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_network;

    #[test]
    fn ties_fall_back_to_structure() {
        let net = parse_network(
            "event x prior=0.5 disorder\nevent y prior=0.5 disorder\nevent e\n\
             cause x e p=0.5\ncause y e p=0.5",
        )
        .unwrap();
        let sx = Scenario::from_names(&net, "x", &[("x", "e")]).unwrap();
        let sy = Scenario::from_names(&net, "y", &[("y", "e")]).unwrap();
        let ranked = rank_explanations(&net, vec![sy.clone(), sx.clone()], 5);
        assert_eq!(ranked[0].scenario, sx);
        assert_eq!(ranked[1].scenario, sy);
        assert_eq!(ranked[1].rank, 2);
        assert_eq!(rank_explanations(&net, vec![sy, sx], 1).len(), 1);
    }

    #[test]
    fn fewer_links_win_ties() {
        let net = parse_network(
            "event x prior=0.5 disorder\nevent y prior=0.25 disorder\nevent e\n\
             cause y x p=1\ncause x e p=0.5",
        )
        .unwrap();
        let y_link = Scenario::from_names(&net, "y", &[("y", "x")]).unwrap();
        let x_link = Scenario::from_names(&net, "x", &[("x", "e")]).unwrap();
        let both = Scenario::from_names(&net, "y", &[("y", "x"), ("x", "e")]).unwrap();
        let mut items = vec![(both.clone(), 1.0), (x_link.clone(), 1.0 + 1e-12), (y_link.clone(), 1.0 - 1e-12)];
        sort_by_weight(&net, &mut items, |(s, w)| (s, *w));
        let order: Vec<&Scenario> = items.iter().map(|(s, _)| s).collect();
        assert_eq!(order, [&x_link, &y_link, &both]);
    }
}
