//! One round of the classical tree subroutine: turns the `n-1` pairwise bits of one
//! position into a single bit shared by all `n` agents.
//!
//! Every non-terminal agent publishes its incident edge bits XOR a private mask.
//! Each agent then walks the tree breadth-first from itself (neighbors in ascending
//! id), deducing each announcer's mask from an edge bit it already knows and
//! unmasking that announcer's remaining edges. The first deduction of an edge is
//! final. The leader then picks a terminal agent uniformly, and the bit on that
//! terminal's unique edge is the round's secret.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_rational::Ratio;
use thiserror::Error;

use crate::graph::{AgentId, EdgeKey, SpanningTree};
use crate::rational::Rational;
use crate::rng::SeededRng;
use crate::transcript::{Payload, Transcript};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubroutineError {
    #[error("no announcement from non-terminal agent {0}")]
    MissingAnnouncement(AgentId),
    #[error("announcement from agent {0} does not list exactly its incident tree edges")]
    MalformedAnnouncement(AgentId),
    #[error("view of agent {0} does not cover exactly its incident tree edges")]
    IncompleteView(AgentId),
    #[error("agent {0} is not a terminal agent")]
    NotTerminal(AgentId),
    #[error("no terminal agents to choose from")]
    NoTerminals,
    #[error("expected one position per tree edge ({expected}), got {got}")]
    PositionCount { expected: usize, got: usize },
}

/// An agent's own copies of its incident edge bits for one position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentView {
    pub agent: AgentId,
    pub incident_bits: BTreeMap<EdgeKey, bool>,
}

/// The broadcast part of a randomized record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Announcement {
    pub agent: AgentId,
    pub masked_bits: BTreeMap<EdgeKey, bool>,
}

impl Announcement {
    pub fn to_payload(&self) -> Payload {
        Payload::Announcement(self.masked_bits.iter().map(|(&k, &b)| (k, b)).collect())
    }

    pub fn from_payload(agent: AgentId, pairs: &[(EdgeKey, bool)]) -> Self {
        Announcement {
            agent,
            masked_bits: pairs.iter().copied().collect(),
        }
    }
}

/// A randomized record together with the private mask that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnouncementRecord {
    public: Announcement,
    mask: bool,
}

impl AnnouncementRecord {
    pub fn public(&self) -> &Announcement {
        &self.public
    }

    /// Known only to the announcing agent.
    pub fn mask(&self) -> bool {
        self.mask
    }

    /// Recovers the view by XORing the mask back out.
    pub fn unmask(&self) -> AgentView {
        AgentView {
            agent: self.public.agent,
            incident_bits: self
                .public
                .masked_bits
                .iter()
                .map(|(&k, &b)| (k, b ^ self.mask))
                .collect(),
        }
    }
}

/// Bits for every tree edge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeAssignment(pub BTreeMap<EdgeKey, bool>);

impl EdgeAssignment {
    pub fn get(&self, key: EdgeKey) -> Option<bool> {
        self.0.get(&key).copied()
    }

    pub fn complement(&self) -> Self {
        EdgeAssignment(self.0.iter().map(|(&k, &b)| (k, !b)).collect())
    }

    /// Packs bits into a word, bit `i` for tree edge index `i`.
    pub fn to_word(&self, tree: &SpanningTree) -> u64 {
        tree.keys()
            .iter()
            .enumerate()
            .fold(0, |acc, (i, k)| acc | ((self.0[k] as u64) << i))
    }

    pub fn from_word(word: u64, tree: &SpanningTree) -> Self {
        EdgeAssignment(
            tree.keys()
                .into_iter()
                .enumerate()
                .map(|(i, k)| (k, word >> i & 1 == 1))
                .collect(),
        )
    }
}

pub fn make_announcement(view: &AgentView, mask: bool) -> AnnouncementRecord {
    AnnouncementRecord {
        public: Announcement {
            agent: view.agent,
            masked_bits: view
                .incident_bits
                .iter()
                .map(|(&k, &b)| (k, b ^ mask))
                .collect(),
        },
        mask,
    }
}

fn incident_keys(tree: &SpanningTree, v: AgentId) -> BTreeSet<EdgeKey> {
    tree.neighbors(v)
        .iter()
        .map(|&(_, i)| tree.edges[i].key())
        .collect()
}

/// Reconstructs every tree edge bit from `own` view plus the public announcements.
///
/// Announcements from the caller and from terminal agents are not needed and are
/// ignored. With error-free copies and honest announcements the result equals the
/// true assignment.
pub fn reconstruct_assignment(
    own: &AgentView,
    announcements: &[Announcement],
    tree: &SpanningTree,
) -> Result<EdgeAssignment, SubroutineError> {
    let me = own.agent;
    let own_keys: BTreeSet<EdgeKey> = own.incident_bits.keys().copied().collect();
    if own_keys != incident_keys(tree, me) {
        return Err(SubroutineError::IncompleteView(me));
    }
    let by_agent: BTreeMap<AgentId, &Announcement> =
        announcements.iter().map(|a| (a.agent, a)).collect();
    for v in tree.non_terminal_agents() {
        if v == me {
            continue;
        }
        let ann = by_agent
            .get(&v)
            .ok_or(SubroutineError::MissingAnnouncement(v))?;
        let keys: BTreeSet<EdgeKey> = ann.masked_bits.keys().copied().collect();
        if keys != incident_keys(tree, v) {
            return Err(SubroutineError::MalformedAnnouncement(v));
        }
    }

    let mut known: BTreeMap<EdgeKey, bool> = own.incident_bits.clone();
    let mut visited = vec![false; tree.n];
    visited[me.0] = true;
    let mut queue = VecDeque::from([me]);
    while let Some(v) = queue.pop_front() {
        for &(u, e) in tree.neighbors(v) {
            if visited[u.0] {
                continue;
            }
            visited[u.0] = true;
            let shared = tree.edges[e].key();
            if tree.degree(u) >= 2 {
                let ann = by_agent[&u];
                let mask = ann.masked_bits[&shared] ^ known[&shared];
                for (&k, &b) in &ann.masked_bits {
                    known.entry(k).or_insert(b ^ mask);
                }
            }
            queue.push_back(u);
        }
    }
    Ok(EdgeAssignment(known))
}

/// Uniform choice among `terminals`.
pub fn choose_secret_terminal(
    terminals: &BTreeSet<AgentId>,
    rng: &mut SeededRng,
) -> Result<AgentId, SubroutineError> {
    if terminals.is_empty() {
        return Err(SubroutineError::NoTerminals);
    }
    let i = rng.index(terminals.len());
    Ok(*terminals.iter().nth(i).expect("index in range"))
}

/// The bit on the unique tree edge incident to the terminal agent `chosen`.
pub fn secret_bit(
    assignment: &EdgeAssignment,
    chosen: AgentId,
    tree: &SpanningTree,
) -> Result<bool, SubroutineError> {
    if chosen.0 >= tree.n || !tree.is_terminal(chosen) {
        return Err(SubroutineError::NotTerminal(chosen));
    }
    let (_, e) = tree.neighbors(chosen)[0];
    assignment
        .get(tree.edges[e].key())
        .ok_or(SubroutineError::IncompleteView(chosen))
}

/// Both copies of one tree edge's bit at one position, after correlation alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeBits {
    pub at_a: bool,
    pub at_b: bool,
}

/// `agent`'s view for one position, given per-edge bits indexed like `tree.edges`.
pub fn view_of(agent: AgentId, tree: &SpanningTree, position: &[EdgeBits]) -> AgentView {
    AgentView {
        agent,
        incident_bits: tree
            .neighbors(agent)
            .iter()
            .map(|&(_, i)| {
                let e = &tree.edges[i];
                let bit = if e.a == agent {
                    position[i].at_a
                } else {
                    position[i].at_b
                };
                (e.key(), bit)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    /// Secret bit as computed by each agent, indexed by agent id.
    pub secrets: Vec<bool>,
    pub chosen: AgentId,
    /// Each agent's reconstruction, indexed by agent id.
    pub reconstructions: Vec<EdgeAssignment>,
}

/// Runs one round over one position.
///
/// Non-terminal agents announce in ascending id order with fresh masks drawn from
/// `masks`; the leader's terminal choice is drawn from `leader_rng`. Both are
/// appended to `transcript`.
pub fn subroutine_round(
    tree: &SpanningTree,
    position: &[EdgeBits],
    leader: AgentId,
    masks: &mut SeededRng,
    leader_rng: &mut SeededRng,
    transcript: &mut Transcript,
) -> Result<RoundOutcome, SubroutineError> {
    if position.len() != tree.edges.len() {
        return Err(SubroutineError::PositionCount {
            expected: tree.edges.len(),
            got: position.len(),
        });
    }
    let mut announcements = Vec::new();
    for v in tree.non_terminal_agents() {
        let record = make_announcement(&view_of(v, tree, position), masks.bit());
        transcript.publish(v, record.public().to_payload());
        announcements.push(record.public);
    }
    let reconstructions = (0..tree.n)
        .map(|v| reconstruct_assignment(&view_of(AgentId(v), tree, position), &announcements, tree))
        .collect::<Result<Vec<_>, _>>()?;
    let chosen = choose_secret_terminal(&tree.terminal_agents(), leader_rng)?;
    transcript.publish(leader, Payload::TerminalChoice(chosen));
    let secrets = reconstructions
        .iter()
        .map(|r| secret_bit(r, chosen, tree))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RoundOutcome {
        secrets,
        chosen,
        reconstructions,
    })
}

/// `n / (2(n-1))`: n-party bits times n over pairwise bits times 2.
pub fn random_efficiency(n: u64) -> Rational {
    assert!(n >= 2, "need at least two agents");
    Ratio::new(n, 2 * (n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{SecurityGraph, WeightedEdge};
    use crate::transcript::MessageKind;

    fn key(a: usize, b: usize) -> EdgeKey {
        EdgeKey::new(AgentId(a), AgentId(b))
    }

    fn path3() -> SpanningTree {
        SecurityGraph::new(
            3,
            vec![WeightedEdge::simple(0, 1, 1), WeightedEdge::simple(1, 2, 1)],
            [1],
        )
        .mst_kruskal()
        .unwrap()
    }

    fn three_edge_view() -> AgentView {
        AgentView {
            agent: AgentId(0),
            incident_bits: [(key(0, 1), false), (key(0, 2), true), (key(0, 3), true)].into(),
        }
    }

    #[test]
    fn announce_011_with_zero_mask() {
        let r = make_announcement(&three_edge_view(), false);
        let bits: Vec<bool> = r.public().masked_bits.values().copied().collect();
        assert_eq!(bits, vec![false, true, true]);
    }

    #[test]
    fn announce_011_with_one_mask() {
        let r = make_announcement(&three_edge_view(), true);
        let bits: Vec<bool> = r.public().masked_bits.values().copied().collect();
        assert_eq!(bits, vec![true, false, false]);
        assert_eq!(r.unmask(), three_edge_view());
    }

    #[test]
    fn single_edge_announcement() {
        for b in [false, true] {
            for m in [false, true] {
                let v = AgentView {
                    agent: AgentId(1),
                    incident_bits: [(key(0, 1), b)].into(),
                };
                assert_eq!(
                    make_announcement(&v, m).public().masked_bits[&key(0, 1)],
                    b ^ m
                );
            }
        }
    }

    #[test]
    fn path_reconstruction_by_end_agent() {
        let t = path3();
        for word in 0..4u64 {
            let truth = EdgeAssignment::from_word(word, &t);
            let (b1, b2) = (truth.get(key(0, 1)).unwrap(), truth.get(key(1, 2)).unwrap());
            for mask in [false, true] {
                let middle = AgentView {
                    agent: AgentId(1),
                    incident_bits: [(key(0, 1), b1), (key(1, 2), b2)].into(),
                };
                let ann = make_announcement(&middle, mask).public().clone();
                let own = AgentView {
                    agent: AgentId(0),
                    incident_bits: [(key(0, 1), b1)].into(),
                };
                assert_eq!(reconstruct_assignment(&own, &[ann], &t).unwrap(), truth);
            }
        }
    }

    #[test]
    fn flipped_copy_complements_assignment() {
        // Agent 2 holds a flipped copy of (1,2); hand propagation: mask deduced as x^1,
        // so (0,1) is also complemented.
        let t = path3();
        let (b1, b2, x) = (true, false, true);
        let middle = AgentView {
            agent: AgentId(1),
            incident_bits: [(key(0, 1), b1), (key(1, 2), b2)].into(),
        };
        let ann = make_announcement(&middle, x).public().clone();
        let own = AgentView {
            agent: AgentId(2),
            incident_bits: [(key(1, 2), !b2)].into(),
        };
        let got = reconstruct_assignment(&own, &[ann], &t).unwrap();
        let truth = EdgeAssignment([(key(0, 1), b1), (key(1, 2), b2)].into());
        assert_eq!(got, truth.complement());
    }

    #[test]
    fn missing_announcement_is_coverage_error() {
        let t = path3();
        let own = AgentView {
            agent: AgentId(0),
            incident_bits: [(key(0, 1), true)].into(),
        };
        assert_eq!(
            reconstruct_assignment(&own, &[], &t),
            Err(SubroutineError::MissingAnnouncement(AgentId(1)))
        );
    }

    #[test]
    fn terminal_choice() {
        let mut rng = SeededRng::new(1);
        let one: BTreeSet<AgentId> = [AgentId(4)].into();
        assert_eq!(choose_secret_terminal(&one, &mut rng), Ok(AgentId(4)));
        assert_eq!(
            choose_secret_terminal(&BTreeSet::new(), &mut rng),
            Err(SubroutineError::NoTerminals)
        );
    }

    #[test]
    fn terminal_choice_is_uniform() {
        let set: BTreeSet<AgentId> = [AgentId(0), AgentId(2)].into();
        let mut rng = SeededRng::new(2024);
        let zeros = (0..10_000)
            .filter(|_| choose_secret_terminal(&set, &mut rng).unwrap() == AgentId(0))
            .count();
        assert!((4700..=5300).contains(&zeros), "{zeros}");
    }

    #[test]
    fn secret_bit_of_terminals() {
        let t = path3();
        let a = EdgeAssignment([(key(0, 1), true), (key(1, 2), false)].into());
        assert_eq!(secret_bit(&a, AgentId(0), &t), Ok(true));
        assert_eq!(secret_bit(&a, AgentId(2), &t), Ok(false));
        assert_eq!(
            secret_bit(&a, AgentId(1), &t),
            Err(SubroutineError::NotTerminal(AgentId(1)))
        );
    }

    #[test]
    fn two_agent_round_needs_no_announcements() {
        let t = SecurityGraph::new(2, vec![WeightedEdge::simple(0, 1, 1)], [0])
            .mst_kruskal()
            .unwrap();
        let mut tr = Transcript::new();
        for bit in [false, true] {
            let out = subroutine_round(
                &t,
                &[EdgeBits {
                    at_a: bit,
                    at_b: bit,
                }],
                AgentId(0),
                &mut SeededRng::new(1),
                &mut SeededRng::new(2),
                &mut tr,
            )
            .unwrap();
            assert_eq!(out.secrets, vec![bit, bit]);
        }
        assert!(tr
            .messages()
            .iter()
            .all(|m| m.kind() == MessageKind::TerminalChoice));
    }

    #[test]
    fn efficiency_values() {
        assert_eq!(random_efficiency(2), Rational::from_integer(1));
        assert_eq!(random_efficiency(3), Rational::new(3, 4));
        let big = random_efficiency(1_000_000);
        assert!((crate::rational::to_f64(&big) - 0.5).abs() < 1e-5);
    }
}
