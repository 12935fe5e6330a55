//! The causal-network knowledge base.
//!
//! A network is a finite set of events, a set of causal links `x ~> y` each
//! carrying the conditional probability `P(x ~> y | x)`, and an `isa`
//! taxonomy over the same events. Disorders are the events allowed to act
//! as culprits of an explanation; every disorder carries a prior.
//!
//! The `p=` value of a causal link is used opaquely. Authors may supply
//! either the true `P(x ~> y | x)` or the estimate `P(y | x)`, which is
//! easier to come by and close to it when `y` rarely happens for other
//! reasons.
//!
//! Networks are immutable once built. The union of causal edges
//! (cause -> effect) and isa edges (child -> parent) must be acyclic, which
//! keeps every scenario a tree and bounds all searches over it.

pub(crate) mod cnet;
mod dot;

pub use cnet::parse_network;
pub use dot::to_dot;

use fixedbitset::FixedBitSet;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;

/// Reserved event name for the distinguished always-true disorder.
pub const TOP: &str = "TOP";

/// Index of an event inside one [`CausalNetwork`].
///
/// Ids are assigned in ascending name order, so comparing ids compares
/// names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(u32);

impl EventId {
    pub(crate) fn new(index: usize) -> Self {
        EventId(u32::try_from(index).expect("event index overflows u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventNode {
    pub name: String,
    pub prior: Option<f64>,
    pub is_disorder: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalLink {
    pub cause: EventId,
    pub effect: EventId,
    pub cond_prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsaLink {
    pub child: EventId,
    pub parent: EventId,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum KbError {
    #[error("line {line}: syntax error at `{token}`: {message}")]
    Syntax {
        line: usize,
        token: String,
        message: String,
    },
    #[error("unknown event: {name}{}", line_suffix(*.line))]
    UnknownEvent { name: String, line: Option<usize> },
    #[error("duplicate declaration of {what}{}", line_suffix(*.line))]
    DuplicateDeclaration { what: String, line: Option<usize> },
    #[error("probability {value} out of range (0, 1]{}", line_suffix(*.line))]
    ProbabilityOutOfRange { value: f64, line: Option<usize> },
    #[error("isa cycle: {}", .cycle.join(" -> "))]
    IsaCycle { cycle: Vec<String> },
    #[error("causal/isa cycle: {}", .cycle.join(" -> "))]
    UnionCycle { cycle: Vec<String> },
    #[error("disorder {event} has no prior")]
    MissingDisorderPrior { event: String },
    #[error("{cause} -> {effect} is declared both as a causal link and as an isa link")]
    LinkKindOverlap { cause: String, effect: String },
    #[error("event name {TOP} is reserved")]
    ReservedNameClash,
    #[error("{TOP} must be declared as `event {TOP} prior=1 disorder`")]
    MalformedTop,
    #[error("network has no events")]
    EmptyNetwork,
    #[error("invalid event name `{name}`")]
    InvalidName { name: String },
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

/// Accumulates declarations in any order and validates them on [`build`].
///
/// [`build`]: NetworkBuilder::build
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    events: Vec<(EventNode, Option<usize>)>,
    isa: Vec<(String, String, Option<usize>)>,
    causal: Vec<(String, String, f64, Option<usize>)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn event(&mut self, name: &str, prior: Option<f64>, disorder: bool) -> &mut Self {
        self.event_at(name, prior, disorder, None)
    }

    pub fn isa(&mut self, child: &str, parent: &str) -> &mut Self {
        self.isa_at(child, parent, None)
    }

    pub fn cause(&mut self, cause: &str, effect: &str, cond_prob: f64) -> &mut Self {
        self.cause_at(cause, effect, cond_prob, None)
    }

    pub(crate) fn event_at(
        &mut self,
        name: &str,
        prior: Option<f64>,
        disorder: bool,
        line: Option<usize>,
    ) -> &mut Self {
        let node = EventNode {
            name: name.to_string(),
            prior,
            is_disorder: disorder,
        };
        self.events.push((node, line));
        self
    }

    pub(crate) fn isa_at(&mut self, child: &str, parent: &str, line: Option<usize>) -> &mut Self {
        self.isa.push((child.to_string(), parent.to_string(), line));
        self
    }

    pub(crate) fn cause_at(
        &mut self,
        cause: &str,
        effect: &str,
        cond_prob: f64,
        line: Option<usize>,
    ) -> &mut Self {
        self.causal
            .push((cause.to_string(), effect.to_string(), cond_prob, line));
        self
    }

    pub fn build(self) -> Result<CausalNetwork, KbError> {
        // self-loops are cycles whether or not the event was declared
        if let Some((c, _, _)) = self.isa.iter().find(|(c, p, _)| c == p) {
            return Err(KbError::IsaCycle { cycle: vec![c.clone()] });
        }
        if let Some((c, _, _, _)) = self.causal.iter().find(|(c, e, _, _)| c == e) {
            return Err(KbError::UnionCycle { cycle: vec![c.clone()] });
        }
        if self.events.is_empty() {
            return Err(KbError::EmptyNetwork);
        }
        let mut seen = HashSet::new();
        for (node, line) in &self.events {
            if node.name.is_empty() || node.name.chars().any(char::is_whitespace) {
                return Err(KbError::InvalidName {
                    name: node.name.clone(),
                });
            }
            if !seen.insert(node.name.as_str()) {
                return Err(KbError::DuplicateDeclaration {
                    what: format!("event {}", node.name),
                    line: *line,
                });
            }
            if let Some(p) = node.prior {
                check_probability(p, *line)?;
            }
            if node.is_disorder && node.prior.is_none() {
                return Err(KbError::MissingDisorderPrior {
                    event: node.name.clone(),
                });
            }
            if node.name == TOP && !(node.is_disorder && node.prior == Some(1.0)) {
                return Err(KbError::MalformedTop);
            }
        }

        let mut events: Vec<EventNode> = self.events.into_iter().map(|(n, _)| n).collect();
        events.sort_by(|a, b| a.name.cmp(&b.name));
        let index: HashMap<String, EventId> = events
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), EventId::new(i)))
            .collect();
        let resolve = |name: &str, line: Option<usize>| {
            index.get(name).copied().ok_or_else(|| KbError::UnknownEvent {
                name: name.to_string(),
                line,
            })
        };

        let mut isa = Vec::with_capacity(self.isa.len());
        let mut isa_pairs = HashSet::new();
        for (child, parent, line) in &self.isa {
            let link = IsaLink {
                child: resolve(child, *line)?,
                parent: resolve(parent, *line)?,
            };
            if !isa_pairs.insert((link.child, link.parent)) {
                return Err(KbError::DuplicateDeclaration {
                    what: format!("isa {child} {parent}"),
                    line: *line,
                });
            }
            isa.push(link);
        }

        let mut causal = Vec::with_capacity(self.causal.len());
        let mut causal_pairs = HashSet::new();
        for (cause, effect, p, line) in &self.causal {
            let link = CausalLink {
                cause: resolve(cause, *line)?,
                effect: resolve(effect, *line)?,
                cond_prob: check_probability(*p, *line)?,
            };
            if !causal_pairs.insert((link.cause, link.effect)) {
                return Err(KbError::DuplicateDeclaration {
                    what: format!("cause {cause} {effect}"),
                    line: *line,
                });
            }
            if isa_pairs.contains(&(link.cause, link.effect)) {
                return Err(KbError::LinkKindOverlap {
                    cause: cause.clone(),
                    effect: effect.clone(),
                });
            }
            causal.push(link);
        }
        isa.sort_by_key(|l| (l.child, l.parent));
        causal.sort_by_key(|l| (l.cause, l.effect));

        CausalNetwork::assemble(events, index, causal, isa)
    }
}

fn check_probability(p: f64, line: Option<usize>) -> Result<f64, KbError> {
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(KbError::ProbabilityOutOfRange { value: p, line })
    }
}

/// An immutable causal network with precomputed adjacency and closures.
#[derive(Clone, Debug)]
pub struct CausalNetwork {
    events: Vec<EventNode>,
    index: HashMap<String, EventId>,
    causal: Vec<CausalLink>,
    isa: Vec<IsaLink>,
    top: Option<EventId>,
    link_index: HashMap<(EventId, EventId), usize>,
    causal_out: Vec<Vec<usize>>,
    causal_in: Vec<Vec<usize>>,
    isa_parents: Vec<Vec<EventId>>,
    isa_up: Vec<FixedBitSet>,
    reach: Vec<FixedBitSet>,
}

impl PartialEq for CausalNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events && self.causal == other.causal && self.isa == other.isa
    }
}

impl CausalNetwork {
    fn assemble(
        events: Vec<EventNode>,
        index: HashMap<String, EventId>,
        causal: Vec<CausalLink>,
        isa: Vec<IsaLink>,
    ) -> Result<Self, KbError> {
        let n = events.len();
        let mut isa_parents = vec![Vec::new(); n];
        for l in &isa {
            isa_parents[l.child.index()].push(l.parent);
        }
        let mut causal_out = vec![Vec::new(); n];
        let mut causal_in = vec![Vec::new(); n];
        let mut link_index = HashMap::with_capacity(causal.len());
        for (i, l) in causal.iter().enumerate() {
            causal_out[l.cause.index()].push(i);
            causal_in[l.effect.index()].push(i);
            link_index.insert((l.cause, l.effect), i);
        }

        if let Some(cycle) = find_cycle(n, |v| isa_parents[v].iter().map(|p| p.index()).collect()) {
            return Err(KbError::IsaCycle {
                cycle: cycle.iter().map(|&v| events[v].name.clone()).collect(),
            });
        }
        let union_succ = |v: usize| -> Vec<usize> {
            let mut succ: Vec<usize> = isa_parents[v].iter().map(|p| p.index()).collect();
            succ.extend(causal_out[v].iter().map(|&li| causal[li].effect.index()));
            succ.sort_unstable();
            succ
        };
        if let Some(cycle) = find_cycle(n, union_succ) {
            return Err(KbError::UnionCycle {
                cycle: cycle.iter().map(|&v| events[v].name.clone()).collect(),
            });
        }

        let order = topological_order(n, union_succ);
        let mut isa_up = vec![FixedBitSet::with_capacity(n); n];
        let mut reach = vec![FixedBitSet::with_capacity(n); n];
        for &v in order.iter().rev() {
            let mut up = FixedBitSet::with_capacity(n);
            up.insert(v);
            for p in &isa_parents[v] {
                up.union_with(&isa_up[p.index()]);
            }
            isa_up[v] = up;
            let mut r = FixedBitSet::with_capacity(n);
            r.insert(v);
            for s in union_succ(v) {
                r.union_with(&reach[s]);
            }
            reach[v] = r;
        }

        let top = index.get(TOP).copied();
        Ok(CausalNetwork {
            events,
            index,
            causal,
            isa,
            top,
            link_index,
            causal_out,
            causal_in,
            isa_parents,
            isa_up,
            reach,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        (0..self.events.len()).map(EventId::new)
    }

    pub fn event(&self, id: EventId) -> &EventNode {
        &self.events[id.index()]
    }

    pub fn name(&self, id: EventId) -> &str {
        &self.events[id.index()].name
    }

    pub fn id(&self, name: &str) -> Option<EventId> {
        self.index.get(name).copied()
    }

    /// Looks up an event by name, failing with [`KbError::UnknownEvent`].
    pub fn require(&self, name: &str) -> Result<EventId, KbError> {
        self.id(name).ok_or_else(|| KbError::UnknownEvent {
            name: name.to_string(),
            line: None,
        })
    }

    pub fn prior(&self, id: EventId) -> Option<f64> {
        self.events[id.index()].prior
    }

    pub fn is_disorder(&self, id: EventId) -> bool {
        self.events[id.index()].is_disorder
    }

    pub fn disorders(&self) -> impl Iterator<Item = EventId> + '_ {
        self.ids().filter(|&id| self.is_disorder(id))
    }

    pub fn top(&self) -> Option<EventId> {
        self.top
    }

    /// Causal links sorted by (cause, effect).
    pub fn causal_links(&self) -> &[CausalLink] {
        &self.causal
    }

    pub fn isa_links(&self) -> &[IsaLink] {
        &self.isa
    }

    pub fn link_index(&self, cause: EventId, effect: EventId) -> Option<usize> {
        self.link_index.get(&(cause, effect)).copied()
    }

    pub fn link(&self, index: usize) -> &CausalLink {
        &self.causal[index]
    }

    /// Indices of causal links leaving `id`.
    pub fn causal_out(&self, id: EventId) -> &[usize] {
        &self.causal_out[id.index()]
    }

    /// Indices of causal links entering `id`.
    pub fn causal_in(&self, id: EventId) -> &[usize] {
        &self.causal_in[id.index()]
    }

    pub fn isa_parents(&self, id: EventId) -> &[EventId] {
        &self.isa_parents[id.index()]
    }

    /// `isa*` closure of `id` as a bitset over event indices (includes `id`).
    pub fn isa_up(&self, id: EventId) -> &FixedBitSet {
        &self.isa_up[id.index()]
    }

    /// True when `lower isa* upper`.
    pub fn isa_star(&self, lower: EventId, upper: EventId) -> bool {
        self.isa_up[lower.index()].contains(upper.index())
    }

    /// Events reachable from `id` over causal and isa edges (includes `id`).
    pub fn reach(&self, id: EventId) -> &FixedBitSet {
        &self.reach[id.index()]
    }

    /// All events `e'` with `e isa* e'`, most specific first.
    ///
    /// The order is topological over the isa edges; ties go to the smaller
    /// name.
    pub fn isa_ancestors(&self, e: EventId) -> Vec<EventId> {
        let up = &self.isa_up[e.index()];
        let mut indegree: HashMap<usize, usize> = up.ones().map(|v| (v, 0)).collect();
        for v in up.ones() {
            for p in &self.isa_parents[v] {
                *indegree.get_mut(&p.index()).expect("parent within closure") += 1;
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&v, _)| Reverse(v))
            .collect();
        let mut out = Vec::with_capacity(indegree.len());
        while let Some(Reverse(v)) = ready.pop() {
            out.push(EventId::new(v));
            for p in &self.isa_parents[v] {
                let d = indegree.get_mut(&p.index()).expect("parent within closure");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(p.index()));
                }
            }
        }
        out
    }

    /// Returns a copy extended with the always-true disorder [`TOP`].
    ///
    /// `TOP` gets prior 1 and a link `TOP ~> d` for every disorder `d`
    /// without an incoming causal link. Because `TOP ~> d` holds exactly
    /// when `d` holds, its conditional probability is the prior of `d`.
    pub fn add_top(&self) -> Result<CausalNetwork, KbError> {
        if self.id(TOP).is_some() {
            return Err(KbError::ReservedNameClash);
        }
        let mut b = self.to_builder();
        b.event(TOP, Some(1.0), true);
        for d in self.disorders() {
            if self.causal_in(d).is_empty() {
                let prior = self.prior(d).expect("disorders carry priors");
                b.cause(TOP, self.name(d), prior);
            }
        }
        b.build()
    }

    pub fn to_builder(&self) -> NetworkBuilder {
        let mut b = NetworkBuilder::new();
        for e in &self.events {
            b.event(&e.name, e.prior, e.is_disorder);
        }
        for l in &self.isa {
            b.isa(self.name(l.child), self.name(l.parent));
        }
        for l in &self.causal {
            b.cause(self.name(l.cause), self.name(l.effect), l.cond_prob);
        }
        b
    }
}

impl fmt::Display for CausalNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cnet())
    }
}

/// Finds a directed cycle, returned as the list of nodes along it.
fn find_cycle(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; n];
    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        // (node, successors, next successor position)
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(start, succ(start), 0)];
        mark[start] = Mark::Open;
        while let Some((v, next, pos)) = stack.last_mut() {
            if *pos < next.len() {
                let w = next[*pos];
                *pos += 1;
                match mark[w] {
                    Mark::Open => {
                        let from = stack.iter().position(|(u, _, _)| *u == w).expect("open node on stack");
                        return Some(stack[from..].iter().map(|(u, _, _)| *u).collect());
                    }
                    Mark::New => {
                        mark[w] = Mark::Open;
                        let s = succ(w);
                        stack.push((w, s, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[*v] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn topological_order(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Vec<usize> {
    let mut indegree = vec![0usize; n];
    for v in 0..n {
        for w in succ(v) {
            indegree[w] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for w in succ(v) {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    order
}
