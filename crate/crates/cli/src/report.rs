use abducer_core::recognition::{ln_rational, RecognitionKB, RecognitionOutcome, RecognitionQuery};
use abducer_core::{CausalNetwork, RankedExplanation};
use serde::Serialize;
use std::fmt::Write;

/// Pretty JSON with object keys in lexicographic order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    // serde_json's default map is ordered, so a round trip sorts the keys
    let v = serde_json::to_value(value).expect("report serializes");
    serde_json::to_string_pretty(&v).expect("value serializes")
}

#[derive(Serialize)]
pub struct ExplainReport {
    query: ExplainQuery,
    results: Vec<ExplanationRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<ExplainStats>,
}

#[derive(Serialize)]
struct ExplainQuery {
    observations: Vec<String>,
    mode: &'static str,
    k: usize,
    engine: &'static str,
}

#[derive(Serialize)]
struct ExplanationRow {
    rank: usize,
    culprit: String,
    causations: Vec<(String, String)>,
    log_weight: f64,
    probability: f64,
}

#[derive(Serialize, Default)]
pub struct ExplainStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_entries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
    pub wall_ms: Option<f64>,
}

impl ExplainReport {
    pub fn new(
        net: &CausalNetwork,
        observations: &[String],
        multi: bool,
        k: usize,
        engine: &'static str,
        results: &[RankedExplanation],
        stats: Option<ExplainStats>,
    ) -> Self {
        let mut observations = observations.to_vec();
        observations.sort();
        observations.dedup();
        ExplainReport {
            query: ExplainQuery {
                observations,
                mode: if multi { "multi" } else { "single" },
                k,
                engine,
            },
            results: results
                .iter()
                .map(|r| ExplanationRow {
                    rank: r.rank,
                    culprit: net.name(r.scenario.culprit).to_string(),
                    causations: r
                        .scenario
                        .link_names(net)
                        .into_iter()
                        .map(|(x, y)| (x.to_string(), y.to_string()))
                        .collect(),
                    log_weight: r.log_weight,
                    probability: r.probability,
                })
                .collect(),
            stats,
        }
    }

    pub fn render_text(&self) -> String {
        let q = &self.query;
        let mut out = format!(
            "observations: {} | mode: {} | k: {} | engine: {}\n",
            q.observations.join(", "),
            q.mode,
            q.k,
            q.engine
        );
        if self.results.is_empty() {
            out.push_str("no explanation\n");
        } else {
            let width = self.results.iter().map(|r| r.culprit.len()).max().unwrap_or(0).max(7);
            let _ = writeln!(out, "rank  {:<width$}  {:>12}  {:>12}  causations", "culprit", "log_weight", "probability");
            for r in &self.results {
                let links: Vec<String> = r.causations.iter().map(|(x, y)| format!("{x}~>{y}")).collect();
                let _ = writeln!(
                    out,
                    "{:>4}  {:<width$}  {:>12.6}  {:>12.6e}  {}",
                    r.rank,
                    r.culprit,
                    r.log_weight,
                    r.probability,
                    if links.is_empty() { "-".to_string() } else { links.join(", ") }
                );
            }
        }
        if let Some(s) = &self.stats {
            let mut parts = Vec::new();
            if let Some(v) = s.dp_runs {
                parts.push(format!("{v} dp runs"));
            }
            if let Some(v) = s.dp_entries {
                parts.push(format!("{v} entries"));
            }
            if let Some(v) = s.relaxations {
                parts.push(format!("{v} relaxations"));
            }
            if let Some(v) = s.candidates {
                parts.push(format!("{v} candidates"));
            }
            if let Some(ms) = s.wall_ms {
                parts.push(format!("{ms:.3} ms"));
            }
            let _ = writeln!(out, "stats: {}", parts.join(", "));
        }
        out
    }
}

#[derive(Serialize)]
pub struct RecognizeReport {
    query: RecognizeQuery,
    ranked: Vec<ConceptRow>,
    inapplicable: Vec<Inapplicable>,
}

#[derive(Serialize)]
struct RecognizeQuery {
    candidates: Vec<String>,
    description: Vec<String>,
}

#[derive(Serialize)]
struct ConceptRow {
    rank: usize,
    concept: String,
    weight: f64,
    /// Exact, as `numerator/denominator` or an integer.
    score: String,
    score_value: f64,
}

#[derive(Serialize)]
struct Inapplicable {
    concept: String,
    reason: String,
}

impl RecognizeReport {
    pub fn new(kb: &RecognitionKB, q: &RecognitionQuery, outcome: &RecognitionOutcome) -> Self {
        RecognizeReport {
            query: RecognizeQuery {
                candidates: q.cset.iter().map(|&c| kb.name(c).to_string()).collect(),
                description: q.descr.iter().map(|(p, v)| format!("{p}={v}")).collect(),
            },
            ranked: outcome
                .ranked
                .iter()
                .map(|r| ConceptRow {
                    rank: r.rank,
                    concept: kb.name(r.concept).to_string(),
                    weight: r.weight,
                    score: r.score.to_string(),
                    score_value: ln_rational(&r.score).exp(),
                })
                .collect(),
            inapplicable: outcome
                .inapplicable
                .iter()
                .map(|(c, reason)| Inapplicable {
                    concept: kb.name(*c).to_string(),
                    reason: reason.clone(),
                })
                .collect(),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "candidates: {} | description: {}\n",
            self.query.candidates.join(", "),
            self.query.description.join(", ")
        );
        if self.ranked.is_empty() {
            out.push_str("no applicable candidate\n");
        } else {
            let width = self.ranked.iter().map(|r| r.concept.len()).max().unwrap_or(0).max(7);
            let _ = writeln!(out, "rank  {:<width$}  {:>12}  score", "concept", "weight");
            for r in &self.ranked {
                let _ = writeln!(out, "{:>4}  {:<width$}  {:>12.6}  {}", r.rank, r.concept, r.weight, r.score);
            }
        }
        for i in &self.inapplicable {
            let _ = writeln!(out, "inapplicable: {} ({})", i.concept, i.reason);
        }
        out
    }
}
