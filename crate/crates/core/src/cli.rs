//! Configuration parsing and the `plan`, `run`, `analyze` and `sweep` commands.
//!
//! A configuration is line based. Graph lines:
//!
//! ```text
//! node <id>
//! source <id>
//! edge <a> <b> weight=<w> [flip=<p>] [anti]
//! ```
//!
//! plus `param <key>=<value>` lines with keys `graph` (path of a separate graph
//! file, relative to the config), `leader` (0), `code` (`hamming7_4`), `blocks` (10),
//! `delta` (0.05), `epsilon` (0.05), `seed` (0) and `out` (`out`). Weights and
//! `delta` are read as exact decimals or fractions. `#` starts a comment line.
//!
//! `run` writes three files to the output directory:
//!
//! * `transcript.log`: every broadcast, one per line (see [`crate::transcript`]);
//! * `blocks.txt`: one line per block,
//!   `block status keys mismatches pairwise_bits key_bits eta_subroutine eta_code`,
//!   tab-separated, keys in hex per agent;
//! * `report.txt`: `key<TAB>value` lines with aggregate statistics, the efficiency
//!   figures and the failure bound for the configured `(delta, epsilon, m)`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::code::{CodeError, LinearCode};
use crate::eve::{analyze_transcript, AnalysisReport, EveError};
use crate::graph::{format_components, AgentId, GraphError, SecurityGraph, WeightedEdge};
use crate::protocol::{
    failure_bound, run, EfficiencyReport, ProtocolConfig, ProtocolError, RunStats,
};
use crate::rational::{parse_rational, to_f64, Rational};
use crate::rng::{SeededRng, Stream};
use crate::transcript::{Transcript, TranscriptError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DISCONNECTED: u8 = 2;
pub const EXIT_ALL_ABORTED: u8 = 3;
/// `analyze` found a round violating the two-configuration property.
pub const EXIT_ANALYSIS_FAILED: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based; 0 for issues not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration errors:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigIssue>),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("security graph is disconnected; no spanning tree exists. components: {}", format_components(.0))]
    Disconnected(Vec<Vec<AgentId>>),
    #[error(transparent)]
    Protocol(ProtocolError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error(transparent)]
    Eve(#[from] EveError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Disconnected(_) => EXIT_DISCONNECTED,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Disconnected { components } => CliError::Disconnected(components),
            other => CliError::Protocol(ProtocolError::Graph(other)),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Graph(g) => g.into(),
            other => CliError::Protocol(other),
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct RunSpec {
    /// Separate graph file, when the graph is not inline.
    pub graph_path: Option<PathBuf>,
    pub graph: SecurityGraph,
    pub leader: AgentId,
    pub code_name: String,
    pub blocks: u64,
    pub delta: Rational,
    pub epsilon: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunSpec {
    pub fn code(&self) -> LinearCode {
        LinearCode::by_name(&self.code_name).expect("validated at parse time")
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            graph: self.graph.clone(),
            leader: self.leader,
            code: self.code(),
            blocks: self.blocks,
            delta: self.delta,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }
}

#[derive(Default)]
struct GraphLines {
    nodes: BTreeSet<usize>,
    sources: BTreeSet<usize>,
    edges: Vec<WeightedEdge>,
    any: bool,
}

impl GraphLines {
    /// Consumes one graph line; returns `false` if it is not a graph directive.
    fn accept(&mut self, line_no: usize, words: &[&str], issues: &mut Vec<ConfigIssue>) -> bool {
        let issue = |message: String| ConfigIssue {
            line: line_no,
            message,
        };
        let id = |w: &str| {
            w.parse::<usize>()
                .map_err(|_| format!("bad agent id {w:?}"))
        };
        match words[0] {
            "node" | "source" => {
                self.any = true;
                match words {
                    [kind, w] => match id(w) {
                        Ok(v) if *kind == "node" => {
                            self.nodes.insert(v);
                        }
                        Ok(v) => {
                            self.sources.insert(v);
                        }
                        Err(e) => issues.push(issue(e)),
                    },
                    _ => issues.push(issue(format!("expected `{} <id>`", words[0]))),
                }
                true
            }
            "edge" => {
                self.any = true;
                match parse_edge(&words[1..]) {
                    Ok(e) => self.edges.push(e),
                    Err(e) => issues.push(issue(format!("malformed edge line: {e}"))),
                }
                true
            }
            _ => false,
        }
    }

    fn build(&self, issues: &mut Vec<ConfigIssue>) -> Option<SecurityGraph> {
        let mentioned: BTreeSet<usize> = self
            .nodes
            .iter()
            .chain(&self.sources)
            .copied()
            .chain(self.edges.iter().flat_map(|e| [e.a.0, e.b.0]))
            .collect();
        let n = mentioned.iter().next_back().map_or(0, |&m| m + 1);
        let missing: Vec<String> = (0..n)
            .filter(|v| !mentioned.contains(v))
            .map(|v| v.to_string())
            .collect();
        if !missing.is_empty() {
            issues.push(ConfigIssue {
                line: 0,
                message: format!(
                    "agent ids must be dense from 0; missing {}",
                    missing.join(",")
                ),
            });
            return None;
        }
        let graph = SecurityGraph::new(n, self.edges.clone(), self.sources.iter().copied());
        let report = graph.validate();
        if !report.is_valid() {
            issues.extend(report.violations.iter().map(|v| ConfigIssue {
                line: 0,
                message: v.to_string(),
            }));
            return None;
        }
        Some(graph)
    }
}

fn parse_edge(words: &[&str]) -> Result<WeightedEdge, String> {
    if words.len() < 3 {
        return Err("expected `edge <a> <b> weight=<w> [flip=<p>] [anti]`".into());
    }
    let a: usize = words[0]
        .parse()
        .map_err(|_| format!("bad endpoint {:?}", words[0]))?;
    let b: usize = words[1]
        .parse()
        .map_err(|_| format!("bad endpoint {:?}", words[1]))?;
    let mut weight = None;
    let mut flip = 0.0;
    let mut anti = false;
    for w in &words[2..] {
        if *w == "anti" {
            anti = true;
        } else if let Some(v) = w.strip_prefix("weight=") {
            weight = Some(parse_rational(v).map_err(|e| e.to_string())?);
        } else if let Some(v) = w.strip_prefix("flip=") {
            flip = v
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .ok_or_else(|| format!("bad flip probability {v:?}"))?;
        } else {
            return Err(format!("unexpected token {w:?}"));
        }
    }
    let weight = weight.ok_or("missing weight=")?;
    Ok(WeightedEdge::new(a, b, weight, flip, anti))
}

fn tokens(line: &str) -> Option<Vec<&str>> {
    let t = line.trim();
    if t.is_empty() || t.starts_with('#') {
        None
    } else {
        Some(t.split_whitespace().collect())
    }
}

/// Parses a graph-only file (node, source, edge and comment lines).
pub fn parse_graph(text: &str) -> Result<SecurityGraph, CliError> {
    let mut lines = GraphLines::default();
    let mut issues = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(words) = tokens(line) else { continue };
        if !lines.accept(i + 1, &words, &mut issues) {
            issues.push(ConfigIssue {
                line: i + 1,
                message: format!("unknown directive {:?}", words[0]),
            });
        }
    }
    let graph = lines.build(&mut issues);
    match graph {
        Some(g) if issues.is_empty() => Ok(g),
        _ => Err(CliError::Config(issues)),
    }
}

/// Parses a configuration. Relative `graph` and `out` paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunSpec, CliError> {
    let mut lines = GraphLines::default();
    let mut issues = Vec::new();
    let mut graph_param: Option<(usize, String)> = None;
    let mut leader = 0usize;
    let mut code_name = "hamming7_4".to_string();
    let mut blocks = 10u64;
    let mut delta = Rational::new(1, 20);
    let mut epsilon = 0.05f64;
    let mut seed = 0u64;
    let mut out = "out".to_string();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let Some(words) = tokens(line) else { continue };
        if lines.accept(line_no, &words, &mut issues) {
            continue;
        }
        let issue = |message: String| ConfigIssue {
            line: line_no,
            message,
        };
        if words[0] != "param" {
            issues.push(issue(format!("unknown directive {:?}", words[0])));
            continue;
        }
        let Some((key, value)) = words.get(1).and_then(|kv| kv.split_once('=')) else {
            issues.push(issue("expected `param <key>=<value>`".into()));
            continue;
        };
        if words.len() > 2 {
            issues.push(issue("unexpected text after parameter".into()));
            continue;
        }
        let bad = |what: &str| issue(format!("bad {what} value {value:?}"));
        match key {
            "graph" => graph_param = Some((line_no, value.to_string())),
            "leader" => match value.parse() {
                Ok(v) => leader = v,
                Err(_) => issues.push(bad("leader")),
            },
            "code" => match LinearCode::by_name(value) {
                Ok(_) => code_name = value.to_string(),
                Err(e @ (CodeError::EvenRepetition(_) | CodeError::TooLong(_))) => {
                    issues.push(issue(format!("parameter out of range: {e}")))
                }
                Err(e) => issues.push(issue(e.to_string())),
            },
            "blocks" => match value.parse::<u64>() {
                Ok(v) if v >= 1 => blocks = v,
                Ok(_) => issues.push(issue("parameter out of range: blocks must be at least 1".into())),
                Err(_) => issues.push(bad("blocks")),
            },
            "delta" => match parse_rational(value) {
                Ok(d) if *d.numer() > 0 && d < Rational::from_integer(1) => delta = d,
                Ok(_) => issues.push(issue(format!(
                    "parameter out of range: delta={value} (need 0 < delta < 1 so that delta - delta^2 > 0)"
                ))),
                Err(_) => issues.push(bad("delta")),
            },
            "epsilon" => match value.parse::<f64>() {
                Ok(e) if e > 0.0 && e.is_finite() => epsilon = e,
                Ok(_) => issues.push(issue(format!("parameter out of range: epsilon={value} (need > 0)"))),
                Err(_) => issues.push(bad("epsilon")),
            },
            "seed" => match value.parse() {
                Ok(v) => seed = v,
                Err(_) => issues.push(bad("seed")),
            },
            "out" => out = value.to_string(),
            other => issues.push(issue(format!("unknown key {other:?}"))),
        }
    }

    let (graph_path, graph) = match (&graph_param, lines.any) {
        (Some((line, _)), true) => {
            issues.push(ConfigIssue {
                line: *line,
                message: "graph given both inline and as a file".into(),
            });
            (None, None)
        }
        (Some((line, path)), false) => {
            let path = base_dir.join(path);
            match fs::read_to_string(&path) {
                Ok(text) => match parse_graph(&text) {
                    Ok(g) => (Some(path), Some(g)),
                    Err(CliError::Config(inner)) => {
                        issues.extend(inner.into_iter().map(|i| ConfigIssue {
                            line: *line,
                            message: format!("in {}: {}", path.display(), i),
                        }));
                        (Some(path), None)
                    }
                    Err(e) => return Err(e),
                },
                Err(e) => {
                    issues.push(ConfigIssue {
                        line: *line,
                        message: format!("cannot read graph file {}: {e}", path.display()),
                    });
                    (Some(path), None)
                }
            }
        }
        (None, true) => (None, lines.build(&mut issues)),
        (None, false) => {
            issues.push(ConfigIssue {
                line: 0,
                message: "no graph: give node/source/edge lines or `param graph=<path>`".into(),
            });
            (None, None)
        }
    };

    if let Some(g) = &graph {
        if leader >= g.n {
            issues.push(ConfigIssue {
                line: 0,
                message: format!(
                    "parameter out of range: leader {leader} is not one of the {} agents",
                    g.n
                ),
            });
        }
    }
    match graph {
        Some(graph) if issues.is_empty() => Ok(RunSpec {
            graph_path,
            graph,
            leader: AgentId(leader),
            code_name,
            blocks,
            delta,
            epsilon,
            seed,
            out_dir: base_dir.join(out),
        }),
        _ => Err(CliError::Config(issues)),
    }
}

/// Reads and parses a config file, applying command-line overrides.
pub fn load_spec(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<RunSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut spec = parse_config(&text, base)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(o) = out {
        spec.out_dir = o.to_path_buf();
    }
    Ok(spec)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Minimum spanning security tree plus the Kruskal/Prim cross-check.
pub fn cmd_plan(spec: &RunSpec) -> Result<String, CliError> {
    let g = &spec.graph;
    let tree = g.mst_kruskal()?;
    let mut out = String::new();
    out.push_str(&format!("agents\t{}\n", g.n));
    for e in &tree.edges {
        out.push_str(&format!(
            "tree_edge\t{}\t{}\tweight={}\n",
            e.a, e.b, e.weight
        ));
    }
    out.push_str(&format!("total_weight\t{}\n", tree.total_weight));
    let join = |ids: &mut dyn Iterator<Item = AgentId>| {
        ids.map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    };
    out.push_str(&format!(
        "terminal_agents\t{}\n",
        join(&mut tree.terminal_agents().into_iter())
    ));
    out.push_str(&format!(
        "non_terminal_agents\t{}\n",
        join(&mut tree.non_terminal_agents().into_iter())
    ));
    let mut agree = true;
    for root in g.agents() {
        let prim = g.mst_prim(root)?;
        agree &= prim.total_weight == tree.total_weight && prim.keys() == tree.keys();
    }
    out.push_str(&format!(
        "kruskal_prim_agree\t{}\n",
        if agree { "yes" } else { "no" }
    ));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub exit_code: u8,
    pub stats: RunStats,
    pub report: String,
}

fn block_line(r: &crate::protocol::KeyResult) -> String {
    let keys = if r.keys.is_empty() {
        "-".to_string()
    } else {
        r.keys
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mismatches = r
        .check_mismatches
        .iter()
        .map(|c| format!("{}:{}/{}", c.agent, c.mismatches, c.m))
        .collect::<Vec<_>>()
        .join(",");
    let e = &r.efficiency;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        r.block,
        r.status.as_str(),
        keys,
        if mismatches.is_empty() {
            "-".into()
        } else {
            mismatches
        },
        e.pairwise_bits_consumed,
        e.key_bits,
        e.eta_subroutine,
        e.eta_code
    )
}

/// Runs every block and writes the transcript, per-block summaries and report.
pub fn cmd_run(spec: &RunSpec) -> Result<RunOutput, CliError> {
    let config = spec.protocol_config();
    // Fail with the disconnected-graph error before doing any work.
    config.graph.mst_kruskal()?;
    let (results, transcript) = run(&config)?;
    let stats = RunStats::from_results(&results);

    let mut blocks = String::from(
        "block\tstatus\tkeys\tmismatches\tpairwise_bits\tkey_bits\teta_subroutine\teta_code\n",
    );
    for r in &results {
        blocks.push_str(&block_line(r));
    }

    let code = &config.code;
    let n = config.graph.n as u64;
    let completed: Vec<&EfficiencyReport> = results
        .iter()
        .filter(|r| r.is_completed())
        .map(|r| &r.efficiency)
        .collect();
    let totals = EfficiencyReport::from_counts(
        n,
        code.m() as u64,
        code.k() as u64,
        completed
            .iter()
            .map(|e| e.pairwise_bits_consumed)
            .sum::<u64>()
            .max(1),
        completed
            .iter()
            .map(|e| e.code_pairwise_bits)
            .sum::<u64>()
            .max(1),
        completed.iter().map(|e| e.subroutine_bits).sum(),
        completed.iter().map(|e| e.key_bits).sum(),
    );
    let bound = failure_bound(to_f64(&spec.delta), spec.epsilon, code.m() as u64)?;
    let mut report = String::new();
    let mut kv = |k: &str, v: String| report.push_str(&format!("{k}\t{v}\n"));
    kv("agents", n.to_string());
    kv("leader", spec.leader.to_string());
    kv(
        "code",
        format!(
            "{} m={} k={} t={}",
            code.name(),
            code.m(),
            code.k(),
            code.t()
        ),
    );
    kv("seed", spec.seed.to_string());
    kv("delta", spec.delta.to_string());
    kv("epsilon", spec.epsilon.to_string());
    kv("blocks", stats.blocks.to_string());
    kv("completed", stats.completed.to_string());
    kv("aborted", stats.aborted.to_string());
    kv("agreed", stats.agreed.to_string());
    kv("completion_rate", format!("{:.6}", stats.completion_rate()));
    kv("agreement_rate", format!("{:.6}", stats.agreement_rate()));
    kv(
        "mean_check_mismatch",
        format!("{:.6}", stats.mean_check_mismatch),
    );
    kv(
        "pairwise_bits_per_block",
        ((n - 1) * 2 * code.m() as u64).to_string(),
    );
    kv("key_bits_per_completed_block", code.k().to_string());
    if completed.is_empty() {
        kv("eta_subroutine", "-".into());
        kv("eta_code", "-".into());
    } else {
        kv("eta_subroutine", totals.eta_subroutine.to_string());
        kv("eta_code", totals.eta_code.to_string());
    }
    kv("failure_bound", format!("{bound:.9e}"));
    kv("transcript_messages", transcript.len().to_string());

    fs::create_dir_all(&spec.out_dir).map_err(|source| CliError::Io {
        path: spec.out_dir.clone(),
        source,
    })?;
    write_file(&spec.out_dir.join("transcript.log"), &transcript.to_log())?;
    write_file(&spec.out_dir.join("blocks.txt"), &blocks)?;
    write_file(&spec.out_dir.join("report.txt"), &report)?;

    let exit_code = if stats.blocks > 0 && stats.completed == 0 {
        EXIT_ALL_ABORTED
    } else {
        EXIT_OK
    };
    Ok(RunOutput {
        exit_code,
        stats,
        report,
    })
}

/// Runs the eavesdropper analysis over a transcript file against the graph's tree.
pub fn cmd_analyze(
    transcript_path: &Path,
    graph: &SecurityGraph,
) -> Result<AnalysisReport, CliError> {
    let text = fs::read_to_string(transcript_path).map_err(|source| CliError::Io {
        path: transcript_path.to_path_buf(),
        source,
    })?;
    let transcript = Transcript::parse_log(&text)?;
    let tree = graph.mst_kruskal()?;
    Ok(analyze_transcript(&transcript, &tree)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub flip_prob: f64,
    pub seed: u64,
    pub abort_rate: f64,
    /// `None` when every block aborted.
    pub agreement_rate: Option<f64>,
    pub mean_check_mismatch: f64,
    pub failure_bound: f64,
}

/// `steps` evenly spaced flip probabilities from `min` to `max`, inclusive.
pub fn flip_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 {
        return Err(CliError::Usage("--flip-steps must be at least 2".into()));
    }
    if !(0.0..0.5).contains(&min) || !(0.0..0.5).contains(&max) || min > max {
        return Err(CliError::Usage(format!(
            "flip range [{min}, {max}] must satisfy 0 <= min <= max < 0.5"
        )));
    }
    Ok((0..steps)
        .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// One run per flip probability (applied to every edge), each with its own derived seed.
pub fn cmd_sweep(spec: &RunSpec, flips: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let bound = failure_bound(to_f64(&spec.delta), spec.epsilon, spec.code().m() as u64)?;
    flips
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut config = spec.protocol_config();
            for e in &mut config.graph.edges {
                e.flip_prob = p;
            }
            config.seed =
                SeededRng::derive(spec.seed, Stream::Auxiliary, 1, i as u64).below(u64::MAX);
            let (results, _) = run(&config)?;
            let stats = RunStats::from_results(&results);
            Ok(SweepRow {
                flip_prob: p,
                seed: config.seed,
                abort_rate: stats.abort_rate(),
                agreement_rate: (stats.completed > 0).then(|| stats.agreement_rate()),
                mean_check_mismatch: stats.mean_check_mismatch,
                failure_bound: bound,
            })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "flip_prob\tabort_rate\tagreement_rate\tmean_check_mismatch\tfailure_bound\tseed\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:.6}\t{:.6}\t{}\t{:.6}\t{:.9e}\t{}\n",
            r.flip_prob,
            r.abort_rate,
            r.agreement_rate
                .map(|a| format!("{a:.6}"))
                .unwrap_or_else(|| "-".into()),
            r.mean_check_mismatch,
            r.failure_bound,
            r.seed
        ));
    }
    out
}

/// Writes the sweep table to `<out>/sweep.tsv` and returns it.
pub fn write_sweep(spec: &RunSpec, rows: &[SweepRow]) -> Result<String, CliError> {
    let table = sweep_table(rows);
    fs::create_dir_all(&spec.out_dir).map_err(|source| CliError::Io {
        path: spec.out_dir.clone(),
        source,
    })?;
    write_file(&spec.out_dir.join("sweep.tsv"), &table)?;
    Ok(table)
}
