use crate::kb::{CausalNetwork, EventId};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Carries the causal link index.
    Causal(usize),
    Isa,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchEdge {
    pub from: EventId,
    pub to: EventId,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// The network as a weighted digraph: causal edges weigh `ln(1/p)`, isa
/// edges (child to parent) weigh nothing, and roots carry a node weight.
#[derive(Clone, Debug)]
pub struct WeightedSearchGraph<'n> {
    net: &'n CausalNetwork,
    edges: Vec<SearchEdge>,
    index: BTreeMap<(EventId, EventId), usize>,
    node_weight: Vec<Option<f64>>,
}

pub fn build_search_graph(net: &CausalNetwork) -> WeightedSearchGraph<'_> {
    let mut edges: Vec<SearchEdge> = net
        .causal_links()
        .iter()
        .enumerate()
        .map(|(i, l)| SearchEdge {
            from: l.cause,
            to: l.effect,
            weight: -l.cond_prob.ln(),
            kind: EdgeKind::Causal(i),
        })
        .chain(net.isa_links().iter().map(|l| SearchEdge {
            from: l.child,
            to: l.parent,
            weight: 0.0,
            kind: EdgeKind::Isa,
        }))
        .collect();
    // ids follow names, so this is name order
    edges.sort_by_key(|e| (e.from, e.to));
    let index = edges.iter().enumerate().map(|(i, e)| ((e.from, e.to), i)).collect();
    let node_weight = net
        .ids()
        .map(|id| {
            if net.is_disorder(id) {
                net.prior(id).map(|p| -p.ln())
            } else {
                None
            }
        })
        .collect();
    WeightedSearchGraph {
        net,
        edges,
        index,
        node_weight,
    }
}

impl<'n> WeightedSearchGraph<'n> {
    pub fn network(&self) -> &'n CausalNetwork {
        self.net
    }

    pub fn nodes(&self) -> impl Iterator<Item = EventId> + '_ {
        self.net.ids()
    }

    pub fn node_count(&self) -> usize {
        self.net.len()
    }

    pub fn edges(&self) -> &[SearchEdge] {
        &self.edges
    }

    pub fn edge(&self, from: EventId, to: EventId) -> Option<&SearchEdge> {
        self.index.get(&(from, to)).map(|&i| &self.edges[i])
    }

    pub fn node_weight(&self, id: EventId) -> Option<f64> {
        self.node_weight[id.index()]
    }

    /// Replaces the root weights, e.g. with counts instead of priors.
    pub fn with_node_weights(mut self, weights: impl Fn(EventId) -> Option<f64>) -> Self {
        self.node_weight = self.net.ids().map(weights).collect();
        self
    }

    pub(crate) fn causal_weight(&self, link: usize) -> f64 {
        -self.net.link(link).cond_prob.ln()
    }
}
