//! What an eavesdropper can learn from the public transcript.
//!
//! The analyzer sees only published messages and the tree topology. For each
//! subroutine round it enumerates every tree edge assignment and keeps those that
//! explain every announcement with a single mask bit per announcing agent. The
//! secret bit's entropy over that set measures Eve's uncertainty.

use std::collections::BTreeMap;
use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::graph::{AgentId, SpanningTree};
use crate::protocol::KeyResult;
use crate::subroutine::{Announcement, EdgeAssignment};
use crate::transcript::{Payload, Transcript};

/// Largest agent count the brute-force enumeration accepts (2^19 assignments).
pub const MAX_AGENTS: usize = 20;

/// Fewest completed blocks accepted by [`key_uniformity_test`].
pub const MIN_UNIFORMITY_SAMPLE: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EveError {
    #[error("enumeration capped at {MAX_AGENTS} agents, tree has {0}")]
    TooLarge(usize),
    #[error("agent {0} is not a terminal agent")]
    NotTerminal(AgentId),
    #[error("need at least {MIN_UNIFORMITY_SAMPLE} completed blocks, got {0}")]
    InsufficientSample(usize),
}

/// The announcements of one subroutine round and the terminal choice closing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptRound {
    pub index: usize,
    pub announcements: Vec<Announcement>,
    pub terminal: Option<AgentId>,
}

/// Splits a transcript into rounds. A round is the run of announcements ending at
/// a terminal choice; messages of other kinds are not part of any round.
pub fn rounds(transcript: &Transcript) -> Vec<TranscriptRound> {
    let mut out = Vec::new();
    let mut pending = Vec::new();
    for msg in transcript.messages() {
        match &msg.payload {
            Payload::Announcement(pairs) => {
                pending.push(Announcement::from_payload(msg.sender, pairs));
            }
            Payload::TerminalChoice(chosen) => {
                out.push(TranscriptRound {
                    index: out.len(),
                    announcements: std::mem::take(&mut pending),
                    terminal: Some(*chosen),
                });
            }
            _ => {}
        }
    }
    if !pending.is_empty() {
        out.push(TranscriptRound {
            index: out.len(),
            announcements: pending,
            terminal: None,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencySet {
    pub round: usize,
    pub configurations: Vec<EdgeAssignment>,
}

impl ConsistencySet {
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    /// Exactly two members, each the complement of the other.
    pub fn is_complementary_pair(&self) -> bool {
        self.configurations.len() == 2
            && self.configurations[0].complement() == self.configurations[1]
    }
}

/// All tree edge assignments consistent with the round's announcements.
pub fn consistent_configurations(
    round: &TranscriptRound,
    tree: &SpanningTree,
) -> Result<ConsistencySet, EveError> {
    if tree.n > MAX_AGENTS {
        return Err(EveError::TooLarge(tree.n));
    }
    // Each announcement as (edge index, announced bit). A record that does not list
    // exactly the announcer's incident tree edges cannot be explained at all.
    let mut constraints: Vec<Vec<(usize, bool)>> = Vec::new();
    for ann in &round.announcements {
        let explainable = ann.agent.0 < tree.n && {
            let mut incident: Vec<_> = tree.incident(ann.agent);
            incident.sort();
            let listed: Option<Vec<usize>> = ann
                .masked_bits
                .keys()
                .map(|&k| tree.edge_index(k))
                .collect();
            listed.is_some_and(|mut l| {
                l.sort();
                l == incident
            })
        };
        if !explainable {
            return Ok(ConsistencySet {
                round: round.index,
                configurations: Vec::new(),
            });
        }
        constraints.push(
            ann.masked_bits
                .iter()
                .map(|(&k, &b)| (tree.edge_index(k).expect("checked above"), b))
                .collect(),
        );
    }

    let edges = tree.edges.len();
    let configurations = (0u64..1 << edges)
        .filter(|&word| {
            constraints.iter().all(|record| {
                let mut masks = record.iter().map(|&(i, b)| (word >> i & 1 == 1) ^ b);
                let first = masks.next();
                masks.all(|m| Some(m) == first)
            })
        })
        .map(|word| EdgeAssignment::from_word(word, tree))
        .collect();
    Ok(ConsistencySet {
        round: round.index,
        configurations,
    })
}

/// Shannon entropy (bits) of the secret on `chosen`'s edge, uniform over `cs`.
/// An empty set carries no distribution and reports 0.
pub fn secret_entropy(
    cs: &ConsistencySet,
    chosen: AgentId,
    tree: &SpanningTree,
) -> Result<f64, EveError> {
    if chosen.0 >= tree.n || !tree.is_terminal(chosen) {
        return Err(EveError::NotTerminal(chosen));
    }
    if cs.is_empty() {
        return Ok(0.0);
    }
    let (_, e) = tree.neighbors(chosen)[0];
    let key = tree.edges[e].key();
    let ones = cs
        .configurations
        .iter()
        .filter(|c| c.get(key) == Some(true))
        .count();
    let p = ones as f64 / cs.len() as f64;
    let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(h(p) + h(1.0 - p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub configurations: usize,
    pub complementary: bool,
    /// `None` when the round has no terminal choice.
    pub entropy: Option<f64>,
}

impl RoundReport {
    pub fn passes(&self) -> bool {
        self.complementary && self.entropy == Some(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub agents: usize,
    pub rounds: Vec<RoundReport>,
}

impl AnalysisReport {
    pub fn passes(&self) -> bool {
        self.rounds.iter().all(RoundReport::passes)
    }

    pub fn first_failure(&self) -> Option<usize> {
        self.rounds.iter().find(|r| !r.passes()).map(|r| r.round)
    }

    /// Two agents need no announcements at all.
    pub fn trivially_secure(&self) -> bool {
        self.agents == 2
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "round\tconfigurations\tcomplementary\tentropy")?;
        for r in &self.rounds {
            let entropy = r
                .entropy
                .map(|e| format!("{e:.6}"))
                .unwrap_or_else(|| "-".to_string());
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                r.round, r.configurations, r.complementary, entropy
            )?;
        }
        if self.trivially_secure() {
            writeln!(f, "note: two agents, no announcements; trivially secure")?;
        }
        match self.first_failure() {
            None => writeln!(
                f,
                "PASS two-configuration property holds in {} rounds",
                self.rounds.len()
            ),
            Some(i) => writeln!(f, "FAIL two-configuration property violated at round {i}"),
        }
    }
}

/// Analyzes every round of `transcript` against `tree`.
pub fn analyze_transcript(
    transcript: &Transcript,
    tree: &SpanningTree,
) -> Result<AnalysisReport, EveError> {
    let rounds = rounds(transcript)
        .iter()
        .map(|round| {
            let cs = consistent_configurations(round, tree)?;
            let entropy = match round.terminal {
                Some(t) if t.0 < tree.n && tree.is_terminal(t) => {
                    Some(secret_entropy(&cs, t, tree)?)
                }
                Some(_) => Some(0.0),
                None => None,
            };
            Ok(RoundReport {
                round: round.index,
                configurations: cs.len(),
                complementary: cs.is_complementary_pair(),
                entropy,
            })
        })
        .collect::<Result<Vec<_>, EveError>>()?;
    Ok(AnalysisReport {
        agents: tree.n,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub samples: usize,
    pub k: usize,
    /// Occurrences of each key index.
    pub counts: Vec<u64>,
    pub chi_square: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
    /// `|freq(bit j = 1) - 0.5|` per key bit.
    pub bit_bias: Vec<f64>,
}

impl UniformityReport {
    pub fn rejects_uniformity(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Chi-square test of the leaders' keys against the uniform distribution on `2^k`
/// indices, over completed blocks only.
pub fn key_uniformity_test(results: &[KeyResult]) -> Result<UniformityReport, EveError> {
    let completed: Vec<&KeyResult> = results.iter().filter(|r| r.is_completed()).collect();
    if completed.len() < MIN_UNIFORMITY_SAMPLE {
        return Err(EveError::InsufficientSample(completed.len()));
    }
    let k = completed[0].efficiency.k as usize;
    let cells = 1usize << k;
    let mut counts = vec![0u64; cells];
    let mut ones = vec![0u64; k];
    for r in &completed {
        let key = r.keys[r.leader.0].0;
        counts[key as usize] += 1;
        for (j, one) in ones.iter_mut().enumerate() {
            *one += key >> j & 1;
        }
    }
    let samples = completed.len();
    let expected = samples as f64 / cells as f64;
    let chi_square = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let degrees_of_freedom = (cells - 1) as u64;
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .expect("positive degrees of freedom")
            .sf(chi_square)
    };
    let bit_bias = ones
        .iter()
        .map(|&o| (o as f64 / samples as f64 - 0.5).abs())
        .collect();
    Ok(UniformityReport {
        samples,
        k,
        counts,
        chi_square,
        degrees_of_freedom,
        p_value,
        bit_bias,
    })
}

/// Groups consistent configurations by round for a whole transcript.
pub fn consistency_sets(
    transcript: &Transcript,
    tree: &SpanningTree,
) -> Result<BTreeMap<usize, ConsistencySet>, EveError> {
    rounds(transcript)
        .iter()
        .map(|r| consistent_configurations(r, tree).map(|cs| (r.index, cs)))
        .collect()
}
