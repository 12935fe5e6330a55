//! Scenarios: a culprit plus a set of causation links, the unit of
//! explanation.
//!
//! The probability of a valid scenario factorises over its links,
//!
//! ```text
//! P(a, links) = P(a) * prod_{x~>y in links} P(x~>y | x)
//! ```
//!
//! which rests on a modelling assumption about the world rather than on
//! anything checkable from the network: whatever caused an event can only
//! influence that event's effects through the event itself. The log form
//! `ln(1/P)` turns the product into the additive weight the solver
//! minimises.

mod validity;

pub use validity::{ExtensionStep, InvalidReason, Validity, ValidityCertificate, ValidityChecker};

use crate::kb::{CausalNetwork, EventId, KbError};
use fixedbitset::FixedBitSet;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("unknown event id {0}")]
    UnknownEventId(usize),
    #[error("no causal link {cause} -> {effect}")]
    UnknownLink { cause: String, effect: String },
    #[error("not a valid scenario: {0}")]
    InvalidScenario(String),
    #[error("culprit {0} has no prior")]
    MissingPrior(String),
    #[error("observation set is empty")]
    EmptyObservations,
}

/// A culprit and the causation links assumed to have occurred.
///
/// Any culprit/link combination is representable; whether it can actually
/// be constructed is decided by [`is_valid_scenario`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scenario {
    pub culprit: EventId,
    pub causations: BTreeSet<(EventId, EventId)>,
}

impl Scenario {
    pub fn new(culprit: EventId, causations: impl IntoIterator<Item = (EventId, EventId)>) -> Self {
        Scenario {
            culprit,
            causations: causations.into_iter().collect(),
        }
    }

    pub fn singleton(culprit: EventId) -> Self {
        Scenario::new(culprit, [])
    }

    /// Builds a scenario from event names, checking every link exists.
    pub fn from_names(
        net: &CausalNetwork,
        culprit: &str,
        causations: &[(&str, &str)],
    ) -> Result<Self, ScenarioError> {
        let culprit = net.require(culprit)?;
        let mut links = BTreeSet::new();
        for &(x, y) in causations {
            let (x, y) = (net.require(x)?, net.require(y)?);
            if net.link_index(x, y).is_none() {
                return Err(unknown_link(net, x, y));
            }
            links.insert((x, y));
        }
        Ok(Scenario {
            culprit,
            causations: links,
        })
    }

    pub fn len(&self) -> usize {
        self.causations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.causations.is_empty()
    }

    /// Links as name pairs, in sorted order.
    pub fn link_names<'n>(&self, net: &'n CausalNetwork) -> Vec<(&'n str, &'n str)> {
        self.causations
            .iter()
            .map(|&(x, y)| (net.name(x), net.name(y)))
            .collect()
    }

    pub fn display<'a>(&'a self, net: &'a CausalNetwork) -> impl fmt::Display + 'a {
        DisplayScenario { s: self, net }
    }

    pub(crate) fn link_set(&self, net: &CausalNetwork) -> Result<FixedBitSet, ScenarioError> {
        check_event(net, self.culprit)?;
        let mut set = FixedBitSet::with_capacity(net.causal_links().len());
        for &(x, y) in &self.causations {
            check_event(net, x)?;
            check_event(net, y)?;
            let li = net.link_index(x, y).ok_or_else(|| unknown_link(net, x, y))?;
            set.insert(li);
        }
        Ok(set)
    }

    pub(crate) fn from_link_set(net: &CausalNetwork, culprit: EventId, links: &FixedBitSet) -> Self {
        Scenario::new(
            culprit,
            links.ones().map(|li| {
                let l = net.link(li);
                (l.cause, l.effect)
            }),
        )
    }
}

struct DisplayScenario<'a> {
    s: &'a Scenario,
    net: &'a CausalNetwork,
}

impl fmt::Display for DisplayScenario<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {{", self.net.name(self.s.culprit))?;
        for (i, (x, y)) in self.s.link_names(self.net).into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}~>{y}")?;
        }
        f.write_str("})")
    }
}

fn check_event(net: &CausalNetwork, id: EventId) -> Result<(), ScenarioError> {
    if id.index() < net.len() {
        Ok(())
    } else {
        Err(ScenarioError::UnknownEventId(id.index()))
    }
}

fn unknown_link(net: &CausalNetwork, x: EventId, y: EventId) -> ScenarioError {
    ScenarioError::UnknownLink {
        cause: net.name(x).to_string(),
        effect: net.name(y).to_string(),
    }
}

/// A non-empty set of observed events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationSet {
    obs: BTreeSet<EventId>,
}

impl ObservationSet {
    pub fn new(net: &CausalNetwork, ids: impl IntoIterator<Item = EventId>) -> Result<Self, ScenarioError> {
        let obs: BTreeSet<EventId> = ids.into_iter().collect();
        if obs.is_empty() {
            return Err(ScenarioError::EmptyObservations);
        }
        for &o in &obs {
            check_event(net, o)?;
        }
        Ok(ObservationSet { obs })
    }

    pub fn from_names<S: AsRef<str>>(net: &CausalNetwork, names: &[S]) -> Result<Self, ScenarioError> {
        let ids = names
            .iter()
            .map(|n| net.require(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        ObservationSet::new(net, ids)
    }

    pub fn ids(&self) -> &BTreeSet<EventId> {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn names<'n>(&self, net: &'n CausalNetwork) -> Vec<&'n str> {
        self.obs.iter().map(|&o| net.name(o)).collect()
    }

    /// Re-expresses the set over another network by event name.
    pub fn remap(&self, from: &CausalNetwork, to: &CausalNetwork) -> Result<Self, ScenarioError> {
        ObservationSet::from_names(to, &self.names(from))
    }
}

/// Events that must hold in the scenario: the culprit and both endpoints of
/// every link. Isa ancestors climbed to reach a link are not participants.
pub fn participants(net: &CausalNetwork, s: &Scenario) -> Result<BTreeSet<EventId>, ScenarioError> {
    s.link_set(net)?;
    let mut out = BTreeSet::new();
    out.insert(s.culprit);
    for &(x, y) in &s.causations {
        out.insert(x);
        out.insert(y);
    }
    Ok(out)
}

pub fn is_valid_scenario(net: &CausalNetwork, s: &Scenario) -> Result<Validity, ScenarioError> {
    ValidityChecker::new(net).check(s)
}

/// Valid scenario, culprit a disorder (TOP included), observations among
/// the participants.
pub fn is_explanation(net: &CausalNetwork, s: &Scenario, o: &ObservationSet) -> Result<bool, ScenarioError> {
    is_explanation_with(&mut ValidityChecker::new(net), s, o)
}

pub fn is_explanation_with(
    checker: &mut ValidityChecker<'_>,
    s: &Scenario,
    o: &ObservationSet,
) -> Result<bool, ScenarioError> {
    let net = checker.network();
    let parts = participants(net, s)?;
    if !net.is_disorder(s.culprit) || !o.ids().is_subset(&parts) {
        return Ok(false);
    }
    checker.is_valid(s)
}

/// Joint probability of the culprit and all links of a valid scenario.
pub fn probability(net: &CausalNetwork, s: &Scenario) -> Result<f64, ScenarioError> {
    match is_valid_scenario(net, s)? {
        Validity::Valid(_) => {}
        Validity::Invalid(reason) => {
            return Err(ScenarioError::InvalidScenario(reason.describe(net)));
        }
    }
    probability_unchecked(net, s)
}

/// The product formula without the validity check.
pub fn probability_unchecked(net: &CausalNetwork, s: &Scenario) -> Result<f64, ScenarioError> {
    s.link_set(net)?;
    let prior = net
        .prior(s.culprit)
        .ok_or_else(|| ScenarioError::MissingPrior(net.name(s.culprit).to_string()))?;
    Ok(s
        .causations
        .iter()
        .map(|&(x, y)| net.link(net.link_index(x, y).expect("checked link")).cond_prob)
        .fold(prior, |acc, p| acc * p))
}

/// `ln(1/P(culprit)) + sum ln(1/P(x~>y|x))`, defined for any candidate.
pub fn log_weight(net: &CausalNetwork, s: &Scenario) -> Result<f64, ScenarioError> {
    s.link_set(net)?;
    let prior = net
        .prior(s.culprit)
        .ok_or_else(|| ScenarioError::MissingPrior(net.name(s.culprit).to_string()))?;
    Ok(s
        .causations
        .iter()
        .map(|&(x, y)| -net.link(net.link_index(x, y).expect("checked link")).cond_prob.ln())
        .fold(-prior.ln(), |acc, w| acc + w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_network;

    fn fig2() -> CausalNetwork {
        parse_network(include_str!("../../../../fixtures/fig2.cnet")).unwrap()
    }

    fn names(net: &CausalNetwork, set: &BTreeSet<EventId>) -> Vec<String> {
        set.iter().map(|&i| net.name(i).to_string()).collect()
    }

    #[test]
    fn participants_closed_form() {
        let net = fig2();
        let s = Scenario::from_names(&net, "d", &[("b", "e"), ("d", "g")]).unwrap();
        assert_eq!(names(&net, &participants(&net, &s).unwrap()), ["b", "d", "e", "g"]);
        let s = Scenario::from_names(&net, "c", &[]).unwrap();
        assert_eq!(names(&net, &participants(&net, &s).unwrap()), ["c"]);
        let s = Scenario::from_names(&net, "f", &[("f", "g"), ("a", "e")]).unwrap();
        assert_eq!(names(&net, &participants(&net, &s).unwrap()), ["a", "e", "f", "g"]);
    }

    #[test]
    fn unknown_links_and_events() {
        let net = fig2();
        assert!(matches!(
            Scenario::from_names(&net, "d", &[("d", "e")]),
            Err(ScenarioError::UnknownLink { .. })
        ));
        assert!(matches!(
            Scenario::from_names(&net, "zz", &[]),
            Err(ScenarioError::Kb(KbError::UnknownEvent { .. }))
        ));
        let bogus = Scenario::singleton(EventId::new(99));
        assert_eq!(participants(&net, &bogus), Err(ScenarioError::UnknownEventId(99)));
    }

    #[test]
    fn explanations_for_e_and_g() {
        let net = fig2();
        let o = ObservationSet::from_names(&net, &["e", "g"]).unwrap();
        let s2 = Scenario::from_names(&net, "d", &[("b", "e"), ("d", "g")]).unwrap();
        let s4 = Scenario::from_names(&net, "f", &[("f", "g"), ("a", "e")]).unwrap();
        assert!(is_explanation(&net, &s2, &o).unwrap());
        assert!(is_explanation(&net, &s4, &o).unwrap());
        // b is not a disorder
        let sb = Scenario::from_names(&net, "b", &[("b", "e")]).unwrap();
        let oe = ObservationSet::from_names(&net, &["e"]).unwrap();
        assert!(!is_explanation(&net, &sb, &oe).unwrap());
        // (c, {a~>e}) does not cover g
        let s3 = Scenario::from_names(&net, "c", &[("a", "e")]).unwrap();
        assert!(!is_explanation(&net, &s3, &o).unwrap());
    }

    #[test]
    fn scenario_probabilities() {
        let net = fig2();
        let s = Scenario::from_names(&net, "d", &[("d", "g"), ("b", "e")]).unwrap();
        assert!((probability(&net, &s).unwrap() - 0.01).abs() < 1e-15);
        let s = Scenario::from_names(&net, "c", &[]).unwrap();
        assert_eq!(probability(&net, &s).unwrap(), 0.10);
        let s = Scenario::from_names(&net, "f", &[("f", "g"), ("a", "e")]).unwrap();
        assert!((probability(&net, &s).unwrap() - 0.0144).abs() < 1e-15);
    }

    #[test]
    fn probability_requires_validity_and_prior() {
        let net = fig2();
        let s5 = Scenario::from_names(&net, "d", &[("a", "e")]).unwrap();
        assert!(matches!(probability(&net, &s5), Err(ScenarioError::InvalidScenario(_))));
        let sb = Scenario::from_names(&net, "b", &[("b", "e")]).unwrap();
        assert_eq!(probability(&net, &sb), Err(ScenarioError::MissingPrior("b".into())));
        assert_eq!(log_weight(&net, &sb), Err(ScenarioError::MissingPrior("b".into())));
    }

    #[test]
    fn log_weights() {
        let net = fig2();
        let s = Scenario::from_names(&net, "c", &[]).unwrap();
        assert!((log_weight(&net, &s).unwrap() - 10f64.ln()).abs() < 1e-12);
        let s = Scenario::from_names(&net, "d", &[("d", "g"), ("b", "e")]).unwrap();
        let w = log_weight(&net, &s).unwrap();
        assert!((w - 4.605170).abs() < 1e-6);
        assert!((w + 0.01f64.ln()).abs() < 1e-12);
        // defined for invalid candidates too
        let s5 = Scenario::from_names(&net, "d", &[("a", "e")]).unwrap();
        assert!((log_weight(&net, &s5).unwrap() - (20f64.ln() + (10.0f64 / 3.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn certain_links_weigh_nothing() {
        let net = parse_network("event a prior=1 disorder\nevent b\ncause a b p=1").unwrap();
        let s = Scenario::from_names(&net, "a", &[("a", "b")]).unwrap();
        assert_eq!(log_weight(&net, &s).unwrap(), 0.0);
    }

    #[test]
    fn display_form() {
        let net = fig2();
        let s = Scenario::from_names(&net, "f", &[("f", "g"), ("a", "e")]).unwrap();
        assert_eq!(s.display(&net).to_string(), "(f, {a~>e, f~>g})");
    }
}
