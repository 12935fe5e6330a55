//! Seeded generators for synthetic networks, observation sets and
//! recognition taxonomies. Used by the test suites and benchmarks.

use crate::kb::{CausalNetwork, EventId, NetworkBuilder};
use crate::recognition::{RecognitionKB, RecognitionKbBuilder};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet};

#[derive(Clone, Debug)]
pub struct NetworkShape {
    pub min_events: usize,
    pub max_events: usize,
    pub max_causal: usize,
    pub max_isa: usize,
    pub prob_range: (f64, f64),
    /// Probability that an event is declared a disorder.
    pub disorder_rate: f64,
    /// Make every event without an incoming causal link a disorder.
    pub uncaused_are_disorders: bool,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            min_events: 3,
            max_events: 12,
            max_causal: 14,
            max_isa: 8,
            prob_range: (0.05, 0.95),
            disorder_rate: 0.35,
            uncaused_are_disorders: false,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network whose union of causal and isa edges is acyclic by
/// construction (all edges point forward in a random ranking).
pub fn random_network(seed: u64, shape: &NetworkShape) -> CausalNetwork {
    random_network_with(&mut rng(seed), shape)
}

pub fn random_network_with(rng: &mut impl Rng, shape: &NetworkShape) -> CausalNetwork {
    let n = rng.gen_range(shape.min_events..=shape.max_events);
    let names: Vec<String> = (0..n).map(|i| format!("e{i:02}")).collect();
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(rng);
    let forward_pair = |rng: &mut dyn rand::RngCore| -> (usize, usize) {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if rank[i] < rank[j] {
            (i, j)
        } else {
            (j, i)
        }
    };

    let mut pairs = HashSet::new();
    let mut isa = Vec::new();
    let isa_target = rng.gen_range(0..=shape.max_isa);
    for _ in 0..isa_target * 3 {
        if isa.len() == isa_target {
            break;
        }
        let p = forward_pair(rng);
        if pairs.insert(p) {
            isa.push(p);
        }
    }
    let mut causal = Vec::new();
    let causal_target = rng.gen_range(1..=shape.max_causal.max(1));
    for _ in 0..causal_target * 3 {
        if causal.len() == causal_target {
            break;
        }
        let p = forward_pair(rng);
        if pairs.insert(p) {
            causal.push(p);
        }
    }

    let (lo, hi) = shape.prob_range;
    let has_cause: HashSet<usize> = causal.iter().map(|&(_, e)| e).collect();
    let mut disorder: Vec<bool> = (0..n)
        .map(|v| {
            (shape.uncaused_are_disorders && !has_cause.contains(&v)) || rng.gen_bool(shape.disorder_rate)
        })
        .collect();
    if !disorder.iter().any(|&d| d) {
        let v = rng.gen_range(0..n);
        disorder[v] = true;
    }

    let mut b = NetworkBuilder::new();
    for v in 0..n {
        let prior = if disorder[v] || rng.gen_bool(0.1) {
            Some(rng.gen_range(lo..=hi))
        } else {
            None
        };
        b.event(&names[v], prior, disorder[v]);
    }
    for &(c, p) in &isa {
        b.isa(&names[c], &names[p]);
    }
    for &(c, e) in &causal {
        b.cause(&names[c], &names[e], rng.gen_range(lo..=hi));
    }
    b.build().expect("generated network is well-formed")
}

/// Between one and `max` distinct observed events, biased towards events
/// that have a cause.
pub fn random_observations(rng: &mut impl Rng, net: &CausalNetwork, max: usize) -> BTreeSet<EventId> {
    let caused: Vec<EventId> = net.ids().filter(|&v| !net.causal_in(v).is_empty()).collect();
    let all: Vec<EventId> = net.ids().collect();
    let want = rng.gen_range(1..=max.min(all.len()).max(1));
    let mut out = BTreeSet::new();
    while out.len() < want {
        let pool = if !caused.is_empty() && rng.gen_bool(0.8) { &caused } else { &all };
        out.insert(*pool.choose(rng).expect("non-empty pool"));
    }
    out
}

#[derive(Clone, Debug)]
pub struct TaxonomyShape {
    pub max_concepts: usize,
    pub properties: usize,
    pub values: usize,
    /// Probability that a concept specifies a given property value.
    pub spec_rate: f64,
    /// Probability of giving a concept a second parent.
    pub extra_parent_rate: f64,
}

impl Default for TaxonomyShape {
    fn default() -> Self {
        TaxonomyShape {
            max_concepts: 8,
            properties: 3,
            values: 2,
            spec_rate: 0.35,
            extra_parent_rate: 0.0,
        }
    }
}

/// Random concept taxonomy with instance counts that shrink along isa.
///
/// The first concept is the root and always specifies every property value,
/// so each candidate has a relevant concept for every description.
pub fn random_taxonomy(seed: u64, shape: &TaxonomyShape) -> RecognitionKB {
    let mut rng = rng(seed);
    let n = rng.gen_range(2..=shape.max_concepts.max(2));
    let names: Vec<String> = (0..n).map(|i| format!("k{i:02}")).collect();
    let mut counts = vec![0u64; n];
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    counts[0] = rng.gen_range(50..=400);
    for v in 1..n {
        let p = rng.gen_range(0..v);
        parents[v].push(p);
        if v > 1 && rng.gen_bool(shape.extra_parent_rate) {
            let q = rng.gen_range(0..v);
            if q != p {
                parents[v].push(q);
            }
        }
        let cap = parents[v].iter().map(|&p| counts[p]).min().expect("has a parent");
        counts[v] = rng.gen_range(1..=cap);
    }

    let mut b = RecognitionKbBuilder::new();
    for v in 0..n {
        b.concept(&names[v], counts[v]);
        for &p in &parents[v] {
            b.isa(&names[v], &names[p]);
        }
    }
    for prop in 0..shape.properties {
        for val in 0..shape.values {
            let (pn, vn) = (format!("p{prop}"), format!("v{val}"));
            for v in 0..n {
                if v == 0 || rng.gen_bool(shape.spec_rate) {
                    let c = rng.gen_range(1..=counts[v]);
                    b.prop(&names[v], &pn, &vn, c);
                }
            }
        }
    }
    b.build().expect("generated taxonomy is well-formed")
}
