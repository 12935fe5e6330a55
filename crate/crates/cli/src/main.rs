mod dot;
mod report;

use abducer_core::oracle::best_explanations_bruteforce;
use abducer_core::recognition::{parse_recognition_kb, recognize, RecognitionQuery};
use abducer_core::solver::explain;
use abducer_core::{parse_network, CausalNetwork, ObservationSet};
use clap::{Parser, Subcommand};
use report::{ExplainReport, ExplainStats, RecognizeReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "abducer", version, about = "Most probable explanations over causal networks with an isa taxonomy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a causal network and report its size.
    Validate { path: PathBuf },
    /// Rank the most probable explanations of a set of observations.
    Explain {
        path: PathBuf,
        /// Comma-separated observed events.
        #[arg(long, value_delimiter = ',', required = true)]
        obs: Vec<String>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Allow several independent disorders through an added TOP event.
        #[arg(long)]
        multi: bool,
        /// Use the exhaustive reference engine instead of the solver.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        json: bool,
        /// Include search statistics and wall time.
        #[arg(long)]
        stats: bool,
    },
    /// Rank candidate concepts against a property-value description.
    Recognize {
        path: PathBuf,
        /// Comma-separated candidate concepts.
        #[arg(long, value_delimiter = ',', required_unless_present = "all_concepts")]
        cset: Vec<String>,
        /// Comma-separated `property=value` pairs.
        #[arg(long, value_delimiter = ',', required = true)]
        descr: Vec<String>,
        /// Use every concept of the knowledge base as a candidate.
        #[arg(long, conflicts_with = "cset")]
        all_concepts: bool,
        #[arg(long)]
        json: bool,
    },
    /// Render a causal network as a Graphviz digraph.
    ExportDot {
        path: PathBuf,
        /// Add the TOP event before rendering.
        #[arg(long)]
        top: bool,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code: 2 for bad input, 3 for I/O.
struct Failure(u8, String);

impl Failure {
    fn input(e: impl ToString) -> Self {
        Failure(2, e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Explain {
            path,
            obs,
            k,
            multi,
            oracle,
            json,
            stats,
        } => cmd_explain(&path, &obs, k, multi, oracle, json, stats),
        Command::Recognize {
            path,
            cset,
            descr,
            all_concepts,
            json,
        } => cmd_recognize(&path, &cset, &descr, all_concepts, json),
        Command::ExportDot { path, top, out } => export_dot(&path, top, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(3, format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<CausalNetwork, Failure> {
    parse_network(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn validate(path: &Path) -> Outcome {
    let net = load_network(path)?;
    println!(
        "OK: {} events, {} causal, {} isa",
        net.len(),
        net.causal_links().len(),
        net.isa_links().len()
    );
    Ok(0)
}

fn cmd_explain(path: &Path, obs: &[String], k: usize, multi: bool, oracle: bool, json: bool, stats: bool) -> Outcome {
    let net = load_network(path)?;
    let o = ObservationSet::from_names(&net, obs).map_err(Failure::input)?;
    let start = Instant::now();
    let (network, results, mut run_stats) = if oracle {
        let (work, o) = if multi {
            let topped = net.add_top().map_err(Failure::input)?;
            let o = o.remap(&net, &topped).map_err(Failure::input)?;
            (topped, o)
        } else {
            (net, o)
        };
        let top = work.top();
        let mut all = best_explanations_bruteforce(&work, &o, if multi { usize::MAX } else { k })
            .map_err(Failure::input)?;
        if let Some(top) = top.filter(|_| multi) {
            all.retain(|r| r.scenario.culprit == top);
            all.truncate(k);
            for (i, r) in all.iter_mut().enumerate() {
                r.rank = i + 1;
            }
        }
        (work, all, ExplainStats::default())
    } else {
        let outcome = explain(&net, &o, k, multi).map_err(Failure::input)?;
        let s = ExplainStats {
            dp_runs: Some(outcome.stats.dp_runs),
            dp_entries: Some(outcome.stats.dp_entries),
            relaxations: Some(outcome.stats.relaxations),
            candidates: Some(outcome.stats.candidates),
            wall_ms: None,
        };
        (outcome.network, outcome.results, s)
    };
    run_stats.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    let report = ExplainReport::new(
        &network,
        obs,
        multi,
        k,
        if oracle { "oracle" } else { "solver" },
        &results,
        stats.then_some(run_stats),
    );
    if json {
        println!("{}", report::to_sorted_json(&report));
    } else {
        print!("{}", report.render_text());
    }
    Ok(if results.is_empty() { 1 } else { 0 })
}

fn cmd_recognize(path: &Path, cset: &[String], descr: &[String], all: bool, json: bool) -> Outcome {
    let kb = parse_recognition_kb(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let pairs: Vec<(String, String)> = descr
        .iter()
        .map(|pv| {
            pv.split_once('=')
                .map(|(p, v)| (p.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Failure::input(format!("expected property=value, got `{pv}`")))
        })
        .collect::<Result<_, _>>()?;
    let q = if all {
        RecognitionQuery::all_concepts(&kb, &pairs)
    } else {
        RecognitionQuery::new(&kb, cset, &pairs)
    }
    .map_err(Failure::input)?;
    let outcome = recognize(&kb, &q).map_err(Failure::input)?;
    let report = RecognizeReport::new(&kb, &q, &outcome);
    if json {
        println!("{}", report::to_sorted_json(&report));
    } else {
        print!("{}", report.render_text());
    }
    Ok(if outcome.ranked.is_empty() { 1 } else { 0 })
}

fn export_dot(path: &Path, top: bool, out: Option<&Path>) -> Outcome {
    let mut net = load_network(path)?;
    if top {
        net = net.add_top().map_err(Failure::input)?;
    }
    let text = dot::render(&net);
    match out {
        Some(file) => std::fs::write(file, text).map_err(|e| Failure(3, format!("{}: {e}", file.display())))?,
        None => print!("{text}"),
    }
    Ok(0)
}
