//! Evidential recognition over a concept taxonomy with instance counts.
//!
//! Given candidate concepts and a description made of property values, the
//! best candidate maximises
//!
//! ```text
//! score(c) = #c * prod_{[p,v]} #c_p[p,v] / #c_p
//! ```
//!
//! where `c_p` is the most specific class above `c` that states a count for
//! `[p,v]`. The same answer comes out of the diagnosis machinery: concepts
//! become root candidates weighing `ln(1/#c)`, every property value becomes
//! a node, and a count `#c[p,v]` becomes a link `c -> "p=v"` weighing
//! `ln(#c/#c[p,v])`. The cheapest tree from `c` to all described values
//! then weighs exactly `-ln score(c)`, and preemption picks `c_p`.
//!
//! This only holds when each `c_p` is unique; candidates without a unique
//! relevant concept for some value are reported as inapplicable.

mod rkb;

pub use rkb::parse_recognition_kb;

use crate::kb::{CausalNetwork, EventId, KbError, NetworkBuilder};
use crate::solver::{build_search_graph, steiner_dp, EdgeSet, SolverError, SteinerTree};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RecognitionError {
    #[error("line {line}: {message} near `{token}`")]
    Syntax { line: usize, token: String, message: String },
    #[error("unknown concept: {name}{}", at_line(*line))]
    UnknownConcept { name: String, line: Option<usize> },
    #[error("duplicate declaration: {what}{}", at_line(*line))]
    DuplicateDeclaration { what: String, line: Option<usize> },
    #[error("count of {what} exceeds the count of {parent}")]
    CountExceedsParent { what: String, parent: String },
    #[error("concept {concept} must have a positive count")]
    ZeroCount { concept: String },
    #[error("isa cycle: {}", cycle.join(" -> "))]
    IsaCycle { cycle: Vec<String> },
    #[error("knowledge base declares no concepts")]
    Empty,
    #[error("unknown property-value: {property}={value}")]
    UnknownPropertyValue { property: String, value: String },
    #[error("no relevant concept for {property}={value} above {concept}")]
    NoRelevantConcept { concept: String, property: String, value: String },
    #[error("ambiguous reference class for {concept} and {property}={value}: {}", candidates.join(", "))]
    AmbiguousReferenceClass {
        concept: String,
        property: String,
        value: String,
        candidates: Vec<String>,
    },
    #[error("query needs at least one {0}")]
    EmptyQuery(&'static str),
    #[error(transparent)]
    Kb(KbError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concept {
    pub id: EventId,
    pub name: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertySpec {
    pub concept: EventId,
    pub property: String,
    pub value: String,
    pub count: u64,
}

pub type PropertyValue = (String, String);

/// Name of the node standing for a property value.
pub fn value_node_name(property: &str, value: &str) -> String {
    format!("{property}={value}")
}

#[derive(Clone, Debug, Default)]
pub struct RecognitionKbBuilder {
    concepts: Vec<(String, u64, Option<usize>)>,
    isa: Vec<(String, String, Option<usize>)>,
    props: Vec<(String, String, String, u64, Option<usize>)>,
}

impl RecognitionKbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn concept(&mut self, name: &str, count: u64) -> &mut Self {
        self.concept_at(name, count, None)
    }

    pub fn isa(&mut self, child: &str, parent: &str) -> &mut Self {
        self.isa_at(child, parent, None)
    }

    pub fn prop(&mut self, concept: &str, property: &str, value: &str, count: u64) -> &mut Self {
        self.prop_at(concept, property, value, count, None)
    }

    pub(crate) fn concept_at(&mut self, name: &str, count: u64, line: Option<usize>) -> &mut Self {
        self.concepts.push((name.to_string(), count, line));
        self
    }

    pub(crate) fn isa_at(&mut self, child: &str, parent: &str, line: Option<usize>) -> &mut Self {
        self.isa.push((child.to_string(), parent.to_string(), line));
        self
    }

    pub(crate) fn prop_at(
        &mut self,
        concept: &str,
        property: &str,
        value: &str,
        count: u64,
        line: Option<usize>,
    ) -> &mut Self {
        self.props
            .push((concept.to_string(), property.to_string(), value.to_string(), count, line));
        self
    }

    pub fn build(&self) -> Result<RecognitionKB, RecognitionError> {
        if self.concepts.is_empty() {
            return Err(RecognitionError::Empty);
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for (name, count, line) in &self.concepts {
            if *count == 0 {
                return Err(RecognitionError::ZeroCount { concept: name.clone() });
            }
            if counts.insert(name, *count).is_some() {
                return Err(RecognitionError::DuplicateDeclaration {
                    what: format!("concept {name}"),
                    line: *line,
                });
            }
        }
        let known = |name: &str, line: Option<usize>| {
            if counts.contains_key(name) {
                Ok(())
            } else {
                Err(RecognitionError::UnknownConcept {
                    name: name.to_string(),
                    line,
                })
            }
        };
        for (child, parent, line) in &self.isa {
            known(child, *line)?;
            known(parent, *line)?;
        }
        let mut seen_specs = HashSet::new();
        let mut values = BTreeSet::new();
        for (c, p, v, count, line) in &self.props {
            known(c, *line)?;
            if !seen_specs.insert((c, p, v)) {
                return Err(RecognitionError::DuplicateDeclaration {
                    what: format!("prop {c} {p}={v}"),
                    line: *line,
                });
            }
            if *count > counts[c.as_str()] {
                return Err(RecognitionError::CountExceedsParent {
                    what: format!("{c}[{p}={v}]"),
                    parent: c.clone(),
                });
            }
            values.insert((p.clone(), v.clone()));
        }

        let max = *counts.values().max().expect("non-empty") as f64;
        let mut nb = NetworkBuilder::new();
        for (name, count, _) in &self.concepts {
            nb.event(name, Some(*count as f64 / max), true);
        }
        for (p, v) in &values {
            nb.event(&value_node_name(p, v), None, false);
        }
        for (child, parent, _) in &self.isa {
            nb.isa(child, parent);
        }
        for (c, p, v, count, _) in &self.props {
            if *count > 0 {
                nb.cause(c, &value_node_name(p, v), *count as f64 / counts[c.as_str()] as f64);
            }
        }
        let network = nb.build().map_err(|e| match e {
            KbError::IsaCycle { cycle } | KbError::UnionCycle { cycle } => RecognitionError::IsaCycle { cycle },
            KbError::DuplicateDeclaration { what, line } => RecognitionError::DuplicateDeclaration { what, line },
            other => RecognitionError::Kb(other),
        })?;

        for l in network.isa_links() {
            let (c, p) = (network.name(l.child), network.name(l.parent));
            if counts[c] > counts[p] {
                return Err(RecognitionError::CountExceedsParent {
                    what: c.to_string(),
                    parent: p.to_string(),
                });
            }
        }

        let mut concepts: Vec<Concept> = self
            .concepts
            .iter()
            .map(|(name, count, _)| Concept {
                id: network.id(name).expect("declared"),
                name: name.clone(),
                count: *count,
            })
            .collect();
        concepts.sort_by(|a, b| a.name.cmp(&b.name));
        let mut specs: Vec<PropertySpec> = self
            .props
            .iter()
            .map(|(c, p, v, count, _)| PropertySpec {
                concept: network.id(c).expect("declared"),
                property: p.clone(),
                value: v.clone(),
                count: *count,
            })
            .collect();
        specs.sort_by(|a, b| (a.concept, &a.property, &a.value).cmp(&(b.concept, &b.property, &b.value)));
        let mut by_value: BTreeMap<PropertyValue, BTreeMap<EventId, u64>> = BTreeMap::new();
        for s in &specs {
            by_value
                .entry((s.property.clone(), s.value.clone()))
                .or_default()
                .insert(s.concept, s.count);
        }
        let mut count_of = vec![None; network.len()];
        for c in &concepts {
            count_of[c.id.index()] = Some(c.count);
        }
        Ok(RecognitionKB {
            network,
            concepts,
            specs,
            by_value,
            count_of,
        })
    }
}

/// Concepts with instance counts, an isa taxonomy and property-value
/// counts, together with the equivalent causal network.
#[derive(Clone, Debug)]
pub struct RecognitionKB {
    network: CausalNetwork,
    concepts: Vec<Concept>,
    specs: Vec<PropertySpec>,
    by_value: BTreeMap<PropertyValue, BTreeMap<EventId, u64>>,
    count_of: Vec<Option<u64>>,
}

impl RecognitionKB {
    /// Concepts are disorders with prior `#c / max #c`; value nodes are
    /// plain events; each positive count is a link with `#c[p,v] / #c`.
    pub fn network(&self) -> &CausalNetwork {
        &self.network
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn specs(&self) -> &[PropertySpec] {
        &self.specs
    }

    pub fn concept_id(&self, name: &str) -> Option<EventId> {
        self.network.id(name).filter(|&id| self.count_of[id.index()].is_some())
    }

    pub fn count(&self, id: EventId) -> Option<u64> {
        self.count_of.get(id.index()).copied().flatten()
    }

    pub fn count_of(&self, name: &str) -> Option<u64> {
        self.concept_id(name).and_then(|id| self.count(id))
    }

    pub fn name(&self, id: EventId) -> &str {
        self.network.name(id)
    }

    pub fn has_value(&self, property: &str, value: &str) -> bool {
        self.by_value.contains_key(&(property.to_string(), value.to_string()))
    }

    /// `#c[p,v]` when `c` states it.
    pub fn spec_count(&self, c: EventId, property: &str, value: &str) -> Option<u64> {
        self.by_value
            .get(&(property.to_string(), value.to_string()))
            .and_then(|m| m.get(&c).copied())
    }

    fn require_concept(&self, name: &str) -> Result<EventId, RecognitionError> {
        self.concept_id(name).ok_or_else(|| RecognitionError::UnknownConcept {
            name: name.to_string(),
            line: None,
        })
    }

    fn require_value(&self, property: &str, value: &str) -> Result<(), RecognitionError> {
        if self.has_value(property, value) {
            Ok(())
        } else {
            Err(RecognitionError::UnknownPropertyValue {
                property: property.to_string(),
                value: value.to_string(),
            })
        }
    }
}

/// The class `c` inherits its `[p,v]` count from: `c` itself when it states
/// one, otherwise the unique maximally specific ancestor that does.
pub fn relevant_concept(
    kb: &RecognitionKB,
    c: EventId,
    property: &str,
    value: &str,
) -> Result<Option<EventId>, RecognitionError> {
    if kb.count(c).is_none() {
        return Err(RecognitionError::UnknownConcept {
            name: format!("#{}", c.index()),
            line: None,
        });
    }
    let Some(holders) = kb.by_value.get(&(property.to_string(), value.to_string())) else {
        return Ok(None);
    };
    let net = kb.network();
    let above: Vec<EventId> = holders.keys().copied().filter(|&h| net.isa_star(c, h)).collect();
    let maximal: Vec<EventId> = above
        .iter()
        .copied()
        .filter(|&h| !above.iter().any(|&o| o != h && net.isa_star(o, h)))
        .collect();
    match maximal.len() {
        0 => Ok(None),
        1 => Ok(Some(maximal[0])),
        _ => Err(RecognitionError::AmbiguousReferenceClass {
            concept: kb.name(c).to_string(),
            property: property.to_string(),
            value: value.to_string(),
            candidates: maximal.iter().map(|&h| kb.name(h).to_string()).collect(),
        }),
    }
}

/// `#c * prod #c_p[p,v] / #c_p`, exact.
pub fn shastri_score(kb: &RecognitionKB, c: EventId, descr: &[PropertyValue]) -> Result<BigRational, RecognitionError> {
    let count = kb.count(c).ok_or_else(|| RecognitionError::UnknownConcept {
        name: format!("#{}", c.index()),
        line: None,
    })?;
    let mut score = BigRational::from_integer(BigInt::from(count));
    for (p, v) in descr {
        kb.require_value(p, v)?;
        let cp = relevant_concept(kb, c, p, v)?.ok_or_else(|| RecognitionError::NoRelevantConcept {
            concept: kb.name(c).to_string(),
            property: p.clone(),
            value: v.clone(),
        })?;
        let num = kb.spec_count(cp, p, v).expect("relevant concept states the count");
        let den = kb.count(cp).expect("concept");
        score *= BigRational::new(BigInt::from(num), BigInt::from(den));
    }
    Ok(score)
}

/// Candidate concepts and the description they are tested against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecognitionQuery {
    pub cset: BTreeSet<EventId>,
    pub descr: Vec<PropertyValue>,
}

impl RecognitionQuery {
    pub fn new<S: AsRef<str>>(
        kb: &RecognitionKB,
        cset: &[S],
        descr: &[(S, S)],
    ) -> Result<Self, RecognitionError> {
        let ids = cset
            .iter()
            .map(|n| kb.require_concept(n.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        Self::build(kb, ids, descr)
    }

    /// Every concept of the KB as a candidate.
    pub fn all_concepts<S: AsRef<str>>(kb: &RecognitionKB, descr: &[(S, S)]) -> Result<Self, RecognitionError> {
        Self::build(kb, kb.concepts().iter().map(|c| c.id).collect(), descr)
    }

    fn build<S: AsRef<str>>(
        kb: &RecognitionKB,
        cset: BTreeSet<EventId>,
        descr: &[(S, S)],
    ) -> Result<Self, RecognitionError> {
        if cset.is_empty() {
            return Err(RecognitionError::EmptyQuery("candidate concept"));
        }
        if descr.is_empty() {
            return Err(RecognitionError::EmptyQuery("property value"));
        }
        let mut pairs: Vec<PropertyValue> = Vec::new();
        for (p, v) in descr {
            let (p, v) = (p.as_ref(), v.as_ref());
            kb.require_value(p, v)?;
            let pv = (p.to_string(), v.to_string());
            if !pairs.contains(&pv) {
                pairs.push(pv);
            }
        }
        Ok(RecognitionQuery { cset, descr: pairs })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedConcept {
    pub concept: EventId,
    /// `ln(1/#c)` plus the tree weight.
    pub weight: f64,
    pub score: BigRational,
    pub rank: usize,
    pub tree: SteinerTree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionOutcome {
    pub ranked: Vec<RankedConcept>,
    /// Candidates the method does not apply to, with the reason.
    pub inapplicable: Vec<(EventId, String)>,
}

pub fn recognize(kb: &RecognitionKB, q: &RecognitionQuery) -> Result<RecognitionOutcome, RecognitionError> {
    let net = kb.network();
    let g = build_search_graph(net).with_node_weights(|id| kb.count(id).map(|c| -(c as f64).ln()));
    let terminals: Vec<EventId> = q
        .descr
        .iter()
        .map(|(p, v)| net.id(&value_node_name(p, v)).expect("query values are known"))
        .collect();
    let none = EdgeSet::new();
    let mut ranked = Vec::new();
    let mut inapplicable = Vec::new();
    'candidates: for &c in &q.cset {
        for (p, v) in &q.descr {
            let reason = match relevant_concept(kb, c, p, v) {
                Err(e) => e.to_string(),
                Ok(None) => format!("no relevant concept for {p}={v}"),
                Ok(Some(r)) if kb.spec_count(r, p, v) == Some(0) => {
                    format!("{} has zero instances with {p}={v}", kb.name(r))
                }
                Ok(Some(_)) => continue,
            };
            inapplicable.push((c, reason));
            continue 'candidates;
        }
        let (tree, _) = steiner_dp(&g, c, &terminals, &none, &none)?;
        let tree = tree.expect("every described value has a usable link");
        let weight = g.node_weight(c).expect("concept") + tree.total_weight;
        let score = shastri_score(kb, c, &q.descr)?;
        ranked.push(RankedConcept {
            concept: c,
            weight,
            score,
            rank: 0,
            tree,
        });
    }
    ranked.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then_with(|| kb.name(a.concept).cmp(kb.name(b.concept)))
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(RecognitionOutcome { ranked, inapplicable })
}

/// `ln` of a positive rational, accurate for huge numerators and
/// denominators.
pub fn ln_rational(r: &BigRational) -> f64 {
    assert!(r > &BigRational::zero(), "logarithm of a non-positive number");
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_string().parse::<f64>().expect("integer").ln();
    }
    let shift = bits - 900;
    let top: BigInt = n >> shift;
    top.to_string().parse::<f64>().expect("integer").ln() + shift as f64 * std::f64::consts::LN_2
}
