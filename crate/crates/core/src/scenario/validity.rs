//! The constructibility predicate for scenarios.
//!
//! A scenario `(a, L)` is valid when `L` is empty, or when it splits as
//! `alpha + {c1~>c2} + gamma` such that `(a, alpha)` and `(c2, gamma)` are
//! valid, some maximally specific participant `c0` of `(a, alpha)` has
//! `c0 isa* c1`, and the attachment is not preempted: there is no `c3`
//! strictly between `c0` and `c1` on the isa chain whose own link
//! `c3~>c4` (with a valid `(c4, gamma')`) yields another scenario
//! `(a, alpha + beta')` that overlaps the participants of `(c2, gamma)`.
//!
//! Candidate structures must also be trees: no two links share an effect.

use super::{Scenario, ScenarioError};
use crate::kb::{CausalNetwork, EventId};
use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

type LinkSet = FixedBitSet;

/// One extension in a construction order.
///
/// `scope` is the index of the step whose sub-scenario this step extends,
/// or `None` for the scenario being certified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionStep {
    pub scope: Option<usize>,
    /// The maximally specific participant the link is inherited through.
    pub anchor: EventId,
    /// Where the link is actually declared (`anchor isa* reference_class`).
    pub reference_class: EventId,
    pub link: (EventId, EventId),
    pub sub_root: EventId,
}

/// A construction order witnessing validity, in pre-order: each step is
/// preceded by the steps building its `alpha` and followed by those
/// building its sub-scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityCertificate {
    pub culprit: EventId,
    pub steps: Vec<ExtensionStep>,
}

impl ValidityCertificate {
    /// Rebuilds the scenario and its participants from the steps alone,
    /// checking the structural side conditions of every step.
    pub fn replay(&self, net: &CausalNetwork) -> Result<(Scenario, BTreeSet<EventId>), String> {
        let mut top: BTreeSet<EventId> = BTreeSet::from([self.culprit]);
        let mut scoped: Vec<BTreeSet<EventId>> = Vec::new();
        let mut parent: Vec<Option<usize>> = Vec::new();
        let mut links = BTreeSet::new();
        for (i, st) in self.steps.iter().enumerate() {
            let parts = match st.scope {
                None => &top,
                Some(j) if j < i => &scoped[j],
                Some(j) => return Err(format!("step {i} refers to later scope {j}")),
            };
            if !parts.contains(&st.anchor) {
                return Err(format!("step {i}: {} is not a participant", net.name(st.anchor)));
            }
            if parts
                .iter()
                .any(|&d| d != st.anchor && net.isa_star(d, st.anchor))
            {
                return Err(format!("step {i}: {} is not maximally specific", net.name(st.anchor)));
            }
            if !net.isa_star(st.anchor, st.reference_class) {
                return Err(format!("step {i}: anchor does not inherit from reference class"));
            }
            if st.link.0 != st.reference_class || st.link.1 != st.sub_root {
                return Err(format!("step {i}: link does not join reference class and sub-root"));
            }
            if net.link_index(st.link.0, st.link.1).is_none() {
                return Err(format!("step {i}: no such link"));
            }
            if !links.insert(st.link) {
                return Err(format!("step {i}: link used twice"));
            }
            scoped.push(BTreeSet::from([st.sub_root]));
            parent.push(st.scope);
            let mut s = st.scope;
            loop {
                let set = match s {
                    None => &mut top,
                    Some(j) => &mut scoped[j],
                };
                set.insert(st.link.0);
                set.insert(st.link.1);
                match s {
                    None => break,
                    Some(j) => s = parent[j],
                }
            }
        }
        Ok((Scenario::new(self.culprit, links), top))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvalidReason {
    /// Two links share an effect, so the links do not form a tree.
    SharedEffect { effect: EventId },
    /// The link can only be attached through a class whose more specific
    /// subclass offers an overlapping alternative.
    Preempted {
        link: (EventId, EventId),
        by: (EventId, EventId),
    },
    /// No construction order exists.
    NotConstructible,
}

impl InvalidReason {
    pub fn describe(&self, net: &CausalNetwork) -> String {
        match self {
            InvalidReason::SharedEffect { effect } => {
                format!("two links share the effect {}", net.name(*effect))
            }
            InvalidReason::Preempted { link, by } => format!(
                "{}~>{} is preempted by {}~>{}",
                net.name(link.0),
                net.name(link.1),
                net.name(by.0),
                net.name(by.1)
            ),
            InvalidReason::NotConstructible => "no construction order exists".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid(ValidityCertificate),
    Invalid(InvalidReason),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid(_))
    }
}

#[derive(Debug)]
enum Construction {
    Base,
    Extend {
        alpha: Rc<Construction>,
        anchor: EventId,
        reference_class: EventId,
        link: usize,
        gamma: Rc<Construction>,
    },
}

/// Memoizing validity checker over one network.
///
/// Results are cached per (root, link set), so reusing a checker across
/// many queries on the same network is much cheaper than calling
/// [`super::is_valid_scenario`] repeatedly.
pub struct ValidityChecker<'n> {
    net: &'n CausalNetwork,
    valid_sets: HashMap<EventId, Rc<Vec<LinkSet>>>,
    constructions: HashMap<(EventId, LinkSet), Option<Rc<Construction>>>,
    shuffle: Option<ChaCha8Rng>,
}

impl<'n> ValidityChecker<'n> {
    pub fn new(net: &'n CausalNetwork) -> Self {
        ValidityChecker {
            net,
            valid_sets: HashMap::new(),
            constructions: HashMap::new(),
            shuffle: None,
        }
    }

    /// A checker that explores construction orders in a seeded random order
    /// instead of the deterministic one. Verdicts must not change.
    pub fn with_search_seed(net: &'n CausalNetwork, seed: u64) -> Self {
        ValidityChecker {
            shuffle: Some(ChaCha8Rng::seed_from_u64(seed)),
            ..ValidityChecker::new(net)
        }
    }

    pub fn network(&self) -> &'n CausalNetwork {
        self.net
    }

    pub fn check(&mut self, s: &Scenario) -> Result<Validity, ScenarioError> {
        let links = s.link_set(self.net)?;
        if let Some(effect) = self.shared_effect(&links) {
            return Ok(Validity::Invalid(InvalidReason::SharedEffect { effect }));
        }
        match self.construct(s.culprit, &links) {
            Some(c) => {
                let mut steps = Vec::new();
                self.flatten(&c, None, &mut steps);
                Ok(Validity::Valid(ValidityCertificate {
                    culprit: s.culprit,
                    steps,
                }))
            }
            None => {
                let mut first = None;
                if self.attached(s.culprit, &links) {
                    self.construct_uncached(s.culprit, &links, &mut first);
                }
                Ok(Validity::Invalid(match first {
                    Some((l, by)) => {
                        let (l, by) = (self.net.link(l), self.net.link(by));
                        InvalidReason::Preempted {
                            link: (l.cause, l.effect),
                            by: (by.cause, by.effect),
                        }
                    }
                    None => InvalidReason::NotConstructible,
                }))
            }
        }
    }

    pub fn is_valid(&mut self, s: &Scenario) -> Result<bool, ScenarioError> {
        let links = s.link_set(self.net)?;
        Ok(self.is_valid_links(s.culprit, &links))
    }

    /// Every valid scenario with the given culprit, found by closing the
    /// singleton under valid extensions rather than by decomposition.
    pub fn valid_scenarios_from(&mut self, root: EventId) -> Vec<Scenario> {
        let mut out: Vec<Scenario> = self
            .valid_set(root)
            .iter()
            .map(|l| Scenario::from_link_set(self.net, root, l))
            .collect();
        out.sort();
        out
    }

    pub(crate) fn is_valid_links(&mut self, root: EventId, links: &LinkSet) -> bool {
        self.shared_effect(links).is_none() && self.construct(root, links).is_some()
    }

    fn shared_effect(&self, links: &LinkSet) -> Option<EventId> {
        let mut seen = FixedBitSet::with_capacity(self.net.len());
        for li in links.ones() {
            let e = self.net.link(li).effect;
            if seen.put(e.index()) {
                return Some(e);
            }
        }
        None
    }

    fn effects(&self, links: &LinkSet) -> FixedBitSet {
        let mut out = FixedBitSet::with_capacity(self.net.len());
        for li in links.ones() {
            out.insert(self.net.link(li).effect.index());
        }
        out
    }

    fn participants(&self, root: EventId, links: &LinkSet) -> FixedBitSet {
        let mut out = FixedBitSet::with_capacity(self.net.len());
        out.insert(root.index());
        for li in links.ones() {
            let l = self.net.link(li);
            out.insert(l.cause.index());
            out.insert(l.effect.index());
        }
        out
    }

    fn maximal(&self, parts: &FixedBitSet) -> Vec<EventId> {
        parts
            .ones()
            .filter(|&c0| {
                !parts
                    .ones()
                    .any(|d| d != c0 && self.net.isa_up(EventId::new(d)).contains(c0))
            })
            .map(EventId::new)
            .collect()
    }

    /// Necessary condition: every link hangs off the culprit through causal
    /// links and isa climbs.
    fn attached(&self, root: EventId, links: &LinkSet) -> bool {
        let mut covered = self.net.isa_up(root).clone();
        let mut pending: Vec<usize> = links.ones().collect();
        loop {
            let before = pending.len();
            pending.retain(|&li| {
                let l = self.net.link(li);
                if covered.contains(l.cause.index()) {
                    covered.union_with(self.net.isa_up(l.effect));
                    false
                } else {
                    true
                }
            });
            if pending.is_empty() {
                return true;
            }
            if pending.len() == before {
                return false;
            }
        }
    }

    fn construct(&mut self, root: EventId, links: &LinkSet) -> Option<Rc<Construction>> {
        if links.is_clear() {
            return Some(Rc::new(Construction::Base));
        }
        let key = (root, links.clone());
        if let Some(hit) = self.constructions.get(&key) {
            return hit.clone();
        }
        let found = if self.attached(root, links) {
            self.construct_uncached(root, links, &mut None)
        } else {
            None
        };
        self.constructions.insert(key, found.clone());
        found
    }

    /// Tries every last extension `alpha + {c1~>c2} + gamma`. The first
    /// preemption encountered is reported through `first_preemption`.
    fn construct_uncached(
        &mut self,
        root: EventId,
        links: &LinkSet,
        first_preemption: &mut Option<(usize, usize)>,
    ) -> Option<Rc<Construction>> {
        let net = self.net;
        let mut order: Vec<usize> = links.ones().collect();
        if let Some(rng) = &mut self.shuffle {
            order.shuffle(rng);
        }
        for li in order {
            let (c1, c2) = (net.link(li).cause, net.link(li).effect);
            let mut rest = links.clone();
            rest.set(li, false);
            let mut below: Vec<usize> = rest
                .ones()
                .filter(|&x| net.reach(c2).contains(net.link(x).cause.index()))
                .collect();
            if let Some(rng) = &mut self.shuffle {
                below.shuffle(rng);
            }
            for mask in 0u64..(1u64 << below.len()) {
                let mut gamma = LinkSet::with_capacity(links.len());
                for (bit, &x) in below.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        gamma.insert(x);
                    }
                }
                let mut alpha = rest.clone();
                alpha.difference_with(&gamma);
                let mut anchors: Vec<EventId> = self
                    .maximal(&self.participants(root, &alpha))
                    .into_iter()
                    .filter(|&c0| net.isa_star(c0, c1))
                    .collect();
                if anchors.is_empty() {
                    continue;
                }
                let Some(g) = self.construct(c2, &gamma) else { continue };
                let Some(a) = self.construct(root, &alpha) else { continue };
                if let Some(rng) = &mut self.shuffle {
                    anchors.shuffle(rng);
                }
                for c0 in anchors {
                    match self.preempted(c0, c1, li, &gamma, &alpha) {
                        None => {
                            return Some(Rc::new(Construction::Extend {
                                alpha: a,
                                anchor: c0,
                                reference_class: c1,
                                link: li,
                                gamma: g,
                            }))
                        }
                        Some(by) => {
                            first_preemption.get_or_insert((li, by));
                        }
                    }
                }
            }
        }
        None
    }

    /// All valid link sets for scenarios rooted at `root`, built bottom-up
    /// by breadth-first extension.
    fn valid_set(&mut self, root: EventId) -> Rc<Vec<LinkSet>> {
        if let Some(s) = self.valid_sets.get(&root) {
            return s.clone();
        }
        let net = self.net;
        let empty = LinkSet::with_capacity(net.causal_links().len());
        let mut seen: HashSet<LinkSet> = HashSet::from([empty.clone()]);
        let mut list = vec![empty];
        let mut i = 0;
        while i < list.len() {
            let alpha = list[i].clone();
            i += 1;
            let eff_alpha = self.effects(&alpha);
            for c0 in self.maximal(&self.participants(root, &alpha)) {
                for c1 in net.isa_up(c0).ones().map(EventId::new) {
                    for &li in net.causal_out(c1) {
                        let c2 = net.link(li).effect;
                        if alpha.contains(li) || eff_alpha.contains(c2.index()) {
                            continue;
                        }
                        let subs = self.valid_set(c2);
                        for gamma in subs.iter() {
                            if !gamma.is_disjoint(&alpha) || !self.effects(gamma).is_disjoint(&eff_alpha) {
                                continue;
                            }
                            let mut next = alpha.clone();
                            next.union_with(gamma);
                            next.insert(li);
                            if seen.contains(&next) {
                                continue;
                            }
                            if self.preempted(c0, c1, li, gamma, &alpha).is_none() {
                                seen.insert(next.clone());
                                list.push(next);
                            }
                        }
                    }
                }
            }
        }
        let list = Rc::new(list);
        self.valid_sets.insert(root, list.clone());
        list
    }

    /// Returns the preempting link, if attaching `link` (declared at `c1`)
    /// through `c0`, with sub-scenario `gamma` below it, is blocked.
    fn preempted(
        &mut self,
        c0: EventId,
        c1: EventId,
        link: usize,
        gamma: &LinkSet,
        alpha: &LinkSet,
    ) -> Option<usize> {
        let net = self.net;
        let c2 = net.link(link).effect;
        let overlap_with = self.participants(c2, gamma);
        let mut used = alpha.clone();
        used.insert(link);
        let eff_alpha = self.effects(alpha);
        for c3 in net.isa_up(c0).ones().map(EventId::new) {
            if c3 == c1 || !net.isa_star(c3, c1) {
                continue;
            }
            for &l2 in net.causal_out(c3) {
                let c4 = net.link(l2).effect;
                if used.contains(l2)
                    || eff_alpha.contains(c4.index())
                    || net.reach(c4).is_disjoint(&overlap_with)
                {
                    continue;
                }
                let subs = self.valid_set(c4);
                for g2 in subs.iter() {
                    if !g2.is_disjoint(&used)
                        || !self.effects(g2).is_disjoint(&eff_alpha)
                        || self.participants(c4, g2).is_disjoint(&overlap_with)
                    {
                        continue;
                    }
                    if self.preempted(c0, c3, l2, g2, alpha).is_none() {
                        return Some(l2);
                    }
                }
            }
        }
        None
    }

    fn flatten(&self, c: &Construction, scope: Option<usize>, steps: &mut Vec<ExtensionStep>) {
        if let Construction::Extend {
            alpha,
            anchor,
            reference_class,
            link,
            gamma,
        } = c
        {
            self.flatten(alpha, scope, steps);
            let l = self.net.link(*link);
            let idx = steps.len();
            steps.push(ExtensionStep {
                scope,
                anchor: *anchor,
                reference_class: *reference_class,
                link: (l.cause, l.effect),
                sub_root: l.effect,
            });
            self.flatten(gamma, Some(idx), steps);
        }
    }
}
