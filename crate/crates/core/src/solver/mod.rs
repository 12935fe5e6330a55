//! Most probable explanations as minimum-weight Steiner arborescences.
//!
//! Maximising `P(a) * prod P(x~>y|x)` is minimising `ln(1/P(a))` plus the
//! causal edge weights of a tree rooted at the culprit that reaches every
//! observation. Trees the DP proposes are filtered through the validity
//! predicate; when the best tree is rejected, the next best is found by
//! partitioning the solution space over link indicators and re-solving
//! each part with forced and forbidden links.

mod dp;
mod graph;

pub use dp::{steiner_dp, DpTable, EdgeSet, SteinerTree, MAX_TERMINALS};
pub use graph::{build_search_graph, EdgeKind, SearchEdge, WeightedSearchGraph};

use crate::kb::{CausalNetwork, EventId, KbError};
use crate::ranking::{rank_explanations, RankedExplanation, WEIGHT_TOLERANCE};
use crate::scenario::{ObservationSet, Scenario, ScenarioError, ValidityChecker};
use fixedbitset::FixedBitSet;
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("{count} terminals exceed the limit of {max}")]
    TooManyTerminals { count: usize, max: usize },
    #[error("inconsistent constraints: {0}")]
    InconsistentConstraints(String),
    #[error("unknown event id {0}")]
    UnknownEventId(usize),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Reads a tree back as a scenario: the root is the culprit and the causal
/// edges are the causations.
pub fn tree_to_scenario(net: &CausalNetwork, t: &SteinerTree) -> Result<Scenario, SolverError> {
    let mut incoming = BTreeSet::new();
    let mut causal = Vec::new();
    for &(x, y) in &t.edges {
        for v in [x, y] {
            if v.index() >= net.len() {
                return Err(SolverError::UnknownEventId(v.index()));
            }
        }
        let is_isa = net.isa_parents(x).contains(&y);
        if !is_isa && net.link_index(x, y).is_none() {
            return Err(SolverError::MalformedTree(format!("{} -> {} is not an edge", net.name(x), net.name(y))));
        }
        if y == t.root || !incoming.insert(y) {
            return Err(SolverError::MalformedTree(format!("{} has two parents", net.name(y))));
        }
        if !is_isa {
            causal.push((x, y));
        }
    }
    // every edge must hang off the root
    let mut reached = BTreeSet::from([t.root]);
    let mut pending: Vec<(EventId, EventId)> = t.edges.iter().copied().collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|&(x, y)| {
            if reached.contains(&x) {
                reached.insert(y);
                false
            } else {
                true
            }
        });
        if pending.len() == before {
            return Err(SolverError::MalformedTree("edges not connected to the root".into()));
        }
    }
    Ok(Scenario::new(t.root, causal))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub dp_runs: usize,
    /// Summed over all DP runs.
    pub dp_entries: usize,
    pub relaxations: u64,
    /// Trees proposed by the DP, including rejected ones.
    pub candidates: usize,
}

#[derive(Clone, Debug)]
pub struct ExplainOutcome {
    /// The network the result ids refer to; the topped copy in multi mode.
    pub network: CausalNetwork,
    pub results: Vec<RankedExplanation>,
    pub stats: SolverStats,
}

/// The `k` lowest-weight valid explanations of `o`.
///
/// In multi mode the search runs on a copy of the network with the
/// distinguished `TOP` disorder added, rooted only at `TOP`, so several
/// independent disorders can share one scenario.
pub fn explain(net: &CausalNetwork, o: &ObservationSet, k: usize, multi: bool) -> Result<ExplainOutcome, SolverError> {
    let (work, obs) = if multi {
        let topped = if net.top().is_some() { net.clone() } else { net.add_top()? };
        let obs = o.remap(net, &topped)?;
        (topped, obs)
    } else {
        (net.clone(), o.clone())
    };
    if obs.len() > MAX_TERMINALS {
        return Err(SolverError::TooManyTerminals {
            count: obs.len(),
            max: MAX_TERMINALS,
        });
    }
    let roots: Vec<EventId> = if multi {
        vec![work.top().expect("topped network")]
    } else {
        work.disorders().collect()
    };
    let g = build_search_graph(&work);
    let terminals: Vec<EventId> = obs.ids().iter().copied().collect();
    let mut checker = ValidityChecker::new(&work);
    let mut stats = SolverStats::default();
    let found = k_best(&g, &roots, &terminals, k, &mut stats, |root, links| {
        checker.is_valid_links(root, links)
    })?;
    let scenarios = found
        .into_iter()
        .map(|(root, links, _)| Scenario::from_link_set(&work, root, &links))
        .collect();
    let results = rank_explanations(&work, scenarios, k);
    Ok(ExplainOutcome {
        network: work,
        results,
        stats,
    })
}

/// A tree-shaped candidate from the best-first enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedTree {
    pub root: EventId,
    pub links: Vec<(EventId, EventId)>,
    /// Root node weight plus link weights.
    pub weight: f64,
}

/// The `k` cheapest tree-shaped link sets over all `roots`, without the
/// validity filter, in non-decreasing weight.
pub fn ranked_trees(
    g: &WeightedSearchGraph<'_>,
    roots: &[EventId],
    terminals: &[EventId],
    k: usize,
) -> Result<(Vec<RankedTree>, SolverStats), SolverError> {
    let net = g.network();
    let mut stats = SolverStats::default();
    let found = k_best(g, roots, terminals, k, &mut stats, |_, _| true)?;
    let trees = found
        .into_iter()
        .take(k)
        .map(|(root, links, weight)| RankedTree {
            root,
            links: to_edges(net, &links).into_iter().collect(),
            weight,
        })
        .collect();
    Ok((trees, stats))
}

struct Region {
    root: EventId,
    forced: FixedBitSet,
    forbidden: FixedBitSet,
    links: FixedBitSet,
    key: f64,
    seq: usize,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Region {}

impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Region {
    // reversed so the max-heap pops the cheapest region first
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then(other.seq.cmp(&self.seq))
    }
}

/// Links whose cause some node reachable from `root` inherits from; no
/// other link can ever appear in a tree rooted there.
fn usable_links(net: &CausalNetwork, root: EventId) -> Vec<usize> {
    let mut inherited = FixedBitSet::with_capacity(net.len());
    for v in net.reach(root).ones() {
        inherited.union_with(net.isa_up(EventId::new(v)));
    }
    (0..net.causal_links().len())
        .filter(|&li| inherited.contains(net.link(li).cause.index()))
        .collect()
}

fn to_edges(net: &CausalNetwork, links: &FixedBitSet) -> EdgeSet {
    links
        .ones()
        .map(|li| {
            let l = net.link(li);
            (l.cause, l.effect)
        })
        .collect()
}

fn shares_effect(net: &CausalNetwork, links: &FixedBitSet) -> bool {
    let mut seen = FixedBitSet::with_capacity(net.len());
    links.ones().any(|li| seen.put(net.link(li).effect.index()))
}

/// Best-first enumeration of link sets per root, keyed by root node weight
/// plus tree weight. `accept` filters candidates; enumeration stops once `k`
/// are accepted and the next key is clearly heavier than the `k`-th.
pub(crate) fn k_best(
    g: &WeightedSearchGraph<'_>,
    roots: &[EventId],
    terminals: &[EventId],
    k: usize,
    stats: &mut SolverStats,
    mut accept: impl FnMut(EventId, &FixedBitSet) -> bool,
) -> Result<Vec<(EventId, FixedBitSet, f64)>, SolverError> {
    let net = g.network();
    let m = net.causal_links().len();
    let empty = FixedBitSet::with_capacity(m);
    let none = EdgeSet::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    if k == 0 {
        return Ok(Vec::new());
    }

    let shared = dp::fill_table(g, terminals, &none, &none)?;
    stats.dp_runs += 1;
    stats.dp_entries += shared.entry_count();
    stats.relaxations += shared.relaxations();
    for &root in roots {
        let Some(base) = g.node_weight(root) else { continue };
        if let Some((atts, w)) = dp::chosen_links(&shared, root) {
            let mut links = empty.clone();
            for a in atts {
                links.insert(dp::attachment_link(&shared, a));
            }
            heap.push(Region {
                root,
                forced: empty.clone(),
                forbidden: empty.clone(),
                links,
                key: base + w,
                seq,
            });
            seq += 1;
        }
    }

    let usable: std::collections::HashMap<EventId, Vec<usize>> =
        roots.iter().map(|&r| (r, usable_links(net, r))).collect();
    let mut out: Vec<(EventId, FixedBitSet, f64)> = Vec::new();
    let mut emitted: HashSet<(EventId, FixedBitSet)> = HashSet::new();
    while let Some(region) = heap.pop() {
        if out.len() >= k && region.key > out[k - 1].2 + WEIGHT_TOLERANCE {
            break;
        }
        stats.candidates += 1;
        if !shares_effect(net, &region.links)
            && emitted.insert((region.root, region.links.clone()))
            && accept(region.root, &region.links)
        {
            out.push((region.root, region.links.clone(), region.key));
        }

        // partition the rest of the region on each free link in turn
        let base = g.node_weight(region.root).expect("roots have weights");
        let mut forced = region.forced.clone();
        let mut forbidden = region.forbidden.clone();
        for &li in &usable[&region.root] {
            if region.forced.contains(li) || region.forbidden.contains(li) {
                continue;
            }
            let in_solution = region.links.contains(li);
            let mut f2 = forced.clone();
            let mut b2 = forbidden.clone();
            if in_solution {
                b2.insert(li);
            } else {
                f2.insert(li);
            }
            if !shares_effect(net, &f2) {
                let table = dp::fill_table(g, terminals, &to_edges(net, &f2), &to_edges(net, &b2))?;
                stats.dp_runs += 1;
                stats.dp_entries += table.entry_count();
                stats.relaxations += table.relaxations();
                if let Some((atts, w)) = dp::chosen_links(&table, region.root) {
                    let mut links = empty.clone();
                    for a in atts {
                        links.insert(dp::attachment_link(&table, a));
                    }
                    heap.push(Region {
                        root: region.root,
                        forced: f2,
                        forbidden: b2,
                        links,
                        key: base + w,
                        seq,
                    });
                    seq += 1;
                }
            }
            if in_solution {
                forced.insert(li);
            } else {
                forbidden.insert(li);
            }
        }
    }
    out.sort_by(|a, b| a.2.total_cmp(&b.2));
    Ok(out)
}
