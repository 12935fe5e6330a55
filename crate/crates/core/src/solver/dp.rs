//! Directed Steiner arborescence DP over terminal subsets.
//!
//! The DP works on attachments rather than raw edges: an attachment from a
//! node `v` climbs zero-weight isa edges to some `c1` and then takes one
//! causal edge `c1 -> c2`. Climbed classes are not covered, the cause `c1`
//! is. `Q(v, S)` is the cheapest tree of attachments hanging from `v` that
//! covers at least the bits in `S`, computed in increasing mask order:
//!
//! * self cover: `v` is itself a terminal in `S`,
//! * merge: two subtrees at `v` covering complementary parts of `S`,
//! * extend: one attachment `v => c2` followed by `Q(c2, S - cover)`;
//!   attachments covering nothing in `S` are handled by a Dijkstra pass.
//!
//! Forced causal links get their own bits, forbidden edges are excluded.

use super::graph::{EdgeKind, WeightedSearchGraph};
use super::SolverError;
use crate::kb::{CausalNetwork, EventId};
use fixedbitset::FixedBitSet;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

pub const MAX_TERMINALS: usize = 20;

pub type EdgeSet = BTreeSet<(EventId, EventId)>;

#[derive(Clone, Debug, PartialEq)]
pub struct SteinerTree {
    pub root: EventId,
    /// Real graph edges: isa climbs and causal links.
    pub edges: EdgeSet,
    pub terminals: Vec<EventId>,
    pub total_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Attachment {
    pub from: EventId,
    pub link: usize,
    pub to: EventId,
    pub weight: f64,
    pub cover: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Back {
    SelfCover(u32),
    Merge(u32),
    Attach(usize, u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    weight: f64,
    back: Back,
}

/// The filled DP table and its counters.
#[derive(Clone, Debug)]
pub struct DpTable {
    tables: Vec<BTreeMap<EventId, Entry>>,
    attachments: Vec<Attachment>,
    relaxations: u64,
    bits: usize,
}

impl DpTable {
    pub fn entry_count(&self) -> usize {
        self.tables.iter().map(|t| t.len()).sum()
    }

    /// Candidate evaluations across all recurrences.
    pub fn relaxations(&self) -> u64 {
        self.relaxations
    }

    /// Terminal bits plus one bit per forced link.
    pub fn bit_count(&self) -> usize {
        self.bits
    }

    pub fn weight(&self, v: EventId, mask: u32) -> Option<f64> {
        if mask == 0 {
            return Some(0.0);
        }
        self.tables.get(mask as usize)?.get(&v).map(|e| e.weight)
    }

    /// Nodes holding at least one entry.
    pub fn touched_nodes(&self) -> BTreeSet<EventId> {
        self.tables.iter().flat_map(|t| t.keys().copied()).collect()
    }

    fn full(&self) -> u32 {
        ((1u64 << self.bits) - 1) as u32
    }

    /// The attachment multiset chosen for `(v, full mask)`.
    fn attachments_of(&self, v: EventId) -> Option<Vec<usize>> {
        let full = self.full();
        self.weight(v, full)?;
        let mut out = Vec::new();
        let mut stack = vec![(v, full)];
        while let Some((v, mask)) = stack.pop() {
            if mask == 0 {
                continue;
            }
            let e = self.tables[mask as usize][&v];
            match e.back {
                Back::SelfCover(rest) => stack.push((v, rest)),
                Back::Merge(sub) => {
                    stack.push((v, sub));
                    stack.push((v, mask ^ sub));
                }
                Back::Attach(a, rest) => {
                    out.push(a);
                    stack.push((self.attachments[a].to, rest));
                }
            }
        }
        Some(out)
    }
}

struct Problem<'g, 'n> {
    g: &'g WeightedSearchGraph<'n>,
    bits: usize,
    terminal_count: usize,
    terminal_bit: Vec<u32>,
}

/// Minimum-weight arborescence from `root` covering every terminal, using
/// all forced edges and no forbidden one.
pub fn steiner_dp(
    g: &WeightedSearchGraph<'_>,
    root: EventId,
    terminals: &[EventId],
    forced: &EdgeSet,
    forbidden: &EdgeSet,
) -> Result<(Option<SteinerTree>, DpTable), SolverError> {
    let table = fill_table(g, terminals, forced, forbidden)?;
    let tree = table
        .attachments_of(root)
        .and_then(|atts| assemble_tree(g, root, terminals, &table, &atts, forbidden));
    Ok((tree, table))
}

/// Fills the table for every possible root at once.
pub(crate) fn fill_table(
    g: &WeightedSearchGraph<'_>,
    terminals: &[EventId],
    forced: &EdgeSet,
    forbidden: &EdgeSet,
) -> Result<DpTable, SolverError> {
    let net = g.network();
    if terminals.len() > MAX_TERMINALS {
        return Err(SolverError::TooManyTerminals {
            count: terminals.len(),
            max: MAX_TERMINALS,
        });
    }
    for &t in terminals {
        if t.index() >= net.len() {
            return Err(SolverError::UnknownEventId(t.index()));
        }
    }
    let mut forced_links = Vec::new();
    for &(x, y) in forced {
        match g.edge(x, y).map(|e| e.kind) {
            None => return Err(inconsistent(net, x, y, "is not an edge of the graph")),
            Some(EdgeKind::Isa) => return Err(inconsistent(net, x, y, "is an isa edge; only causal edges can be forced")),
            Some(EdgeKind::Causal(li)) => forced_links.push(li),
        }
        if forbidden.contains(&(x, y)) {
            return Err(inconsistent(net, x, y, "is both forced and forbidden"));
        }
    }
    for &(x, y) in forbidden {
        if g.edge(x, y).is_none() {
            return Err(inconsistent(net, x, y, "is not an edge of the graph"));
        }
    }
    let bits = terminals.len() + forced_links.len();
    if bits > MAX_TERMINALS {
        return Err(SolverError::TooManyTerminals {
            count: bits,
            max: MAX_TERMINALS,
        });
    }

    let mut terminal_bit = vec![0u32; net.len()];
    for (i, &t) in terminals.iter().enumerate() {
        terminal_bit[t.index()] |= 1 << i;
    }
    let p = Problem {
        g,
        bits,
        terminal_count: terminals.len(),
        terminal_bit,
    };
    let attachments = attachments(&p, &forced_links, forbidden);
    Ok(run(&p, attachments))
}

fn inconsistent(net: &CausalNetwork, x: EventId, y: EventId, what: &str) -> SolverError {
    SolverError::InconsistentConstraints(format!("{} -> {} {what}", net.name(x), net.name(y)))
}

/// Isa ancestors of `v` reachable without forbidden isa edges.
fn open_isa_up(net: &CausalNetwork, v: EventId, forbidden: &EdgeSet) -> FixedBitSet {
    let mut seen = FixedBitSet::with_capacity(net.len());
    seen.insert(v.index());
    let mut queue = VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        for &p in net.isa_parents(x) {
            if !forbidden.contains(&(x, p)) && !seen.put(p.index()) {
                queue.push_back(p);
            }
        }
    }
    seen
}

/// The in-network preemption rule: climbing past a class `c3` that links
/// straight to the same effect is pointless unless `c3`'s own link could be
/// blocked, which needs a still more specific class with a route there.
fn locally_preempted(net: &CausalNetwork, v: EventId, c1: EventId, c2: EventId) -> bool {
    net.isa_up(v).ones().map(EventId::new).any(|c3| {
        c3 != c1
            && net.isa_star(c3, c1)
            && net.link_index(c3, c2).is_some()
            && !net.isa_up(v).ones().map(EventId::new).any(|c3p| {
                c3p != c3
                    && net.isa_star(c3p, c3)
                    && net
                        .causal_out(c3p)
                        .iter()
                        .any(|&l| net.reach(net.link(l).effect).contains(c2.index()))
            })
    })
}

fn attachments(p: &Problem<'_, '_>, forced_links: &[usize], forbidden: &EdgeSet) -> Vec<Attachment> {
    let net = p.g.network();
    let mut forced_bit = vec![0u32; net.causal_links().len()];
    for (j, &li) in forced_links.iter().enumerate() {
        forced_bit[li] = 1 << (p.terminal_count + j);
    }
    let mut out = Vec::new();
    for v in net.ids() {
        let up = if forbidden.is_empty() {
            net.isa_up(v).clone()
        } else {
            open_isa_up(net, v, forbidden)
        };
        for c1 in up.ones().map(EventId::new) {
            for &li in net.causal_out(c1) {
                let c2 = net.link(li).effect;
                if forbidden.contains(&(c1, c2)) || locally_preempted(net, v, c1, c2) {
                    continue;
                }
                out.push(Attachment {
                    from: v,
                    link: li,
                    to: c2,
                    weight: p.g.causal_weight(li),
                    cover: p.terminal_bit[c1.index()] | forced_bit[li],
                });
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Item(f64, EventId);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn relax(table: &mut BTreeMap<EventId, Entry>, v: EventId, weight: f64, back: Back) -> bool {
    match table.get(&v) {
        Some(e) if e.weight <= weight => false,
        _ => {
            table.insert(v, Entry { weight, back });
            true
        }
    }
}

fn run(p: &Problem<'_, '_>, attachments: Vec<Attachment>) -> DpTable {
    let net = p.g.network();
    let full = ((1u64 << p.bits) - 1) as u32;
    let mut into: Vec<Vec<usize>> = vec![Vec::new(); net.len()];
    for (i, a) in attachments.iter().enumerate() {
        into[a.to.index()].push(i);
    }
    let terminal_nodes: Vec<EventId> = net.ids().filter(|v| p.terminal_bit[v.index()] != 0).collect();
    let mut tables: Vec<BTreeMap<EventId, Entry>> = vec![BTreeMap::new(); full as usize + 1];
    let mut relaxations = 0u64;
    let get = |tables: &[BTreeMap<EventId, Entry>], mask: u32, v: EventId| -> Option<f64> {
        if mask == 0 {
            Some(0.0)
        } else {
            tables[mask as usize].get(&v).map(|e| e.weight)
        }
    };

    for s in 1..=full {
        let mut cur = BTreeMap::new();
        for &v in &terminal_nodes {
            let b = p.terminal_bit[v.index()] & s;
            if b != 0 {
                if let Some(w) = get(&tables, s & !b, v) {
                    relaxations += 1;
                    relax(&mut cur, v, w, Back::SelfCover(s & !b));
                }
            }
        }
        let low = s & s.wrapping_neg();
        let mut sub = (s - 1) & s;
        while sub > 0 {
            if sub & low != 0 {
                let other = s ^ sub;
                let (small, large) = if tables[sub as usize].len() <= tables[other as usize].len() {
                    (sub, other)
                } else {
                    (other, sub)
                };
                for (&v, e1) in &tables[small as usize] {
                    if let Some(e2) = tables[large as usize].get(&v) {
                        relaxations += 1;
                        relax(&mut cur, v, e1.weight + e2.weight, Back::Merge(sub));
                    }
                }
            }
            sub = (sub - 1) & s;
        }
        for (i, a) in attachments.iter().enumerate() {
            if a.cover & s != 0 {
                let rest = s & !a.cover;
                if let Some(w) = get(&tables, rest, a.to) {
                    relaxations += 1;
                    relax(&mut cur, a.from, a.weight + w, Back::Attach(i, rest));
                }
            }
        }
        let mut heap: BinaryHeap<Reverse<Item>> = cur.iter().map(|(&v, e)| Reverse(Item(e.weight, v))).collect();
        while let Some(Reverse(Item(w, v))) = heap.pop() {
            if cur[&v].weight < w {
                continue;
            }
            for &i in &into[v.index()] {
                let a = &attachments[i];
                if a.cover & s == 0 {
                    relaxations += 1;
                    if relax(&mut cur, a.from, a.weight + w, Back::Attach(i, s)) {
                        heap.push(Reverse(Item(a.weight + w, a.from)));
                    }
                }
            }
        }
        tables[s as usize] = cur;
    }
    DpTable {
        tables,
        attachments,
        relaxations,
        bits: p.bits,
    }
}

/// Turns chosen attachments into real edges. Returns `None` when the links
/// do not form a tree (two links into one effect).
pub(crate) fn assemble_tree(
    g: &WeightedSearchGraph<'_>,
    root: EventId,
    terminals: &[EventId],
    table: &DpTable,
    chosen: &[usize],
    forbidden: &EdgeSet,
) -> Option<SteinerTree> {
    let net = g.network();
    let links: BTreeSet<usize> = chosen.iter().map(|&a| table.attachments[a].link).collect();
    let mut sources = FixedBitSet::with_capacity(net.len());
    sources.insert(root.index());
    for &li in &links {
        if sources.put(net.link(li).effect.index()) {
            return None;
        }
    }
    // isa forest grown from every source, never entering another source
    let mut parent: Vec<Option<EventId>> = vec![None; net.len()];
    let mut seen = sources.clone();
    let mut queue: VecDeque<EventId> = sources.ones().map(EventId::new).collect();
    while let Some(x) = queue.pop_front() {
        for &p in net.isa_parents(x) {
            if !forbidden.contains(&(x, p)) && !seen.put(p.index()) {
                parent[p.index()] = Some(x);
                queue.push_back(p);
            }
        }
    }
    let mut edges = EdgeSet::new();
    let mut total = 0.0;
    for &li in &links {
        let l = net.link(li);
        edges.insert((l.cause, l.effect));
        total += g.causal_weight(li);
        let mut x = l.cause;
        while let Some(px) = parent[x.index()] {
            if !edges.insert((px, x)) {
                break;
            }
            x = px;
        }
        if !sources.contains(x.index()) && parent[x.index()].is_none() {
            return None;
        }
    }
    Some(SteinerTree {
        root,
        edges,
        terminals: terminals.to_vec(),
        total_weight: total,
    })
}

/// Chosen causal links for the given root under the last fill.
pub(crate) fn chosen_links(table: &DpTable, root: EventId) -> Option<(Vec<usize>, f64)> {
    let atts = table.attachments_of(root)?;
    let w = table.weight(root, table.full())?;
    Some((atts, w))
}

pub(crate) fn attachment_link(table: &DpTable, a: usize) -> usize {
    table.attachments[a].link
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_network;
    use crate::solver::build_search_graph;

    fn fig2() -> CausalNetwork {
        parse_network(include_str!("../../../../fixtures/fig2.cnet")).unwrap()
    }

    fn ids(net: &CausalNetwork, names: &[&str]) -> Vec<EventId> {
        names.iter().map(|n| net.id(n).unwrap()).collect()
    }

    fn edge(net: &CausalNetwork, x: &str, y: &str) -> (EventId, EventId) {
        (net.id(x).unwrap(), net.id(y).unwrap())
    }

    #[test]
    fn root_f_covers_e_and_g() {
        let net = fig2();
        let g = build_search_graph(&net);
        let (tree, table) = steiner_dp(&g, net.id("f").unwrap(), &ids(&net, &["e", "g"]), &EdgeSet::new(), &EdgeSet::new()).unwrap();
        let tree = tree.unwrap();
        let expect: EdgeSet = [edge(&net, "f", "a"), edge(&net, "a", "e"), edge(&net, "f", "g")].into();
        assert_eq!(tree.edges, expect);
        assert!((tree.total_weight - (50.0f64 / 9.0).ln()).abs() < 1e-12);
        assert!((tree.total_weight - 1.7148).abs() < 1e-4);
        assert!(table.entry_count() <= 7 * 4);
    }

    #[test]
    fn root_as_its_own_terminal() {
        let net = fig2();
        let g = build_search_graph(&net);
        let c = net.id("c").unwrap();
        let (tree, _) = steiner_dp(&g, c, &[c], &EdgeSet::new(), &EdgeSet::new()).unwrap();
        let tree = tree.unwrap();
        assert!(tree.edges.is_empty());
        assert_eq!(tree.total_weight, 0.0);
    }

    #[test]
    fn unreachable_terminal() {
        let net = fig2();
        let g = build_search_graph(&net);
        let (tree, _) = steiner_dp(&g, net.id("c").unwrap(), &ids(&net, &["g"]), &EdgeSet::new(), &EdgeSet::new()).unwrap();
        assert_eq!(tree, None);
    }

    #[test]
    fn local_rule_blocks_general_link_for_d() {
        let net = fig2();
        let g = build_search_graph(&net);
        let d = net.id("d").unwrap();
        let forbid: EdgeSet = [edge(&net, "b", "e")].into();
        let (tree, _) = steiner_dp(&g, d, &ids(&net, &["e"]), &EdgeSet::new(), &forbid).unwrap();
        assert_eq!(tree, None);
        let (tree, _) = steiner_dp(&g, d, &ids(&net, &["e"]), &EdgeSet::new(), &EdgeSet::new()).unwrap();
        let expect: EdgeSet = [edge(&net, "d", "b"), edge(&net, "b", "e")].into();
        assert_eq!(tree.unwrap().edges, expect);
    }

    #[test]
    fn forced_and_forbidden() {
        let net = fig2();
        let g = build_search_graph(&net);
        let f = net.id("f").unwrap();
        let forced: EdgeSet = [edge(&net, "f", "g")].into();
        let (tree, _) = steiner_dp(&g, f, &ids(&net, &["e"]), &forced, &EdgeSet::new()).unwrap();
        let tree = tree.unwrap();
        assert!(tree.edges.contains(&edge(&net, "f", "g")));
        assert!(tree.edges.contains(&edge(&net, "a", "e")));
        let forbid: EdgeSet = [edge(&net, "f", "a")].into();
        let (tree, _) = steiner_dp(&g, f, &ids(&net, &["e"]), &EdgeSet::new(), &forbid).unwrap();
        assert_eq!(tree, None);
    }

    #[test]
    fn constraint_errors() {
        let net = fig2();
        let g = build_search_graph(&net);
        let f = net.id("f").unwrap();
        let e = ids(&net, &["e"]);
        let both: EdgeSet = [edge(&net, "f", "g")].into();
        assert!(matches!(
            steiner_dp(&g, f, &e, &both, &both),
            Err(SolverError::InconsistentConstraints(_))
        ));
        let absent: EdgeSet = [edge(&net, "g", "f")].into();
        assert!(matches!(
            steiner_dp(&g, f, &e, &absent, &EdgeSet::new()),
            Err(SolverError::InconsistentConstraints(_))
        ));
        let many: Vec<EventId> = (0..21).map(|_| f).collect();
        assert!(matches!(
            steiner_dp(&g, f, &many, &EdgeSet::new(), &EdgeSet::new()),
            Err(SolverError::TooManyTerminals { count: 21, .. })
        ));
    }
}
