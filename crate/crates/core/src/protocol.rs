//! Block-level orchestration of the full key distribution protocol.
//!
//! One block consumes `2m` positions of pairwise key material on every tree edge:
//!
//! 1. pairwise key distribution along the minimum spanning tree, with correlation alignment;
//! 2. one subroutine round per position (masked announcements, reconstruction);
//! 3. a terminal choice per round, giving every agent a `2m`-bit string;
//! 4. the leader announces `m` random check positions;
//! 5. every agent announces its check values; the block aborts if any agent's mismatch
//!    fraction against the leader strictly exceeds `delta`;
//! 6. the leader broadcasts `c_i XOR v` for a random codeword `c_i` and its code bits `v`;
//! 7. each other agent XORs in its own code bits and syndrome-decodes;
//! 8. every agent outputs the codeword index as its `k`-bit key.

use num_rational::Ratio;
use thiserror::Error;

use crate::bits::BitString;
use crate::channel::{align_correlation, simulate_pairwise_kd};
use crate::code::{CodeError, CodewordIndex, LinearCode};
use crate::graph::{AgentId, GraphError, SecurityGraph, SpanningTree};
use crate::rational::Rational;
use crate::rng::{SeededRng, Stream};
use crate::subroutine::{subroutine_round, EdgeBits, SubroutineError};
use crate::transcript::{MismatchCount, Payload, Transcript};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Subroutine(#[from] SubroutineError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("invalid protocol configuration: {0}")]
    Config(String),
    #[error("outside the domain of the failure bound: {0}")]
    Domain(String),
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub graph: SecurityGraph,
    pub leader: AgentId,
    pub code: LinearCode,
    pub blocks: u64,
    /// Abort threshold on the check mismatch fraction, kept exact.
    pub delta: Rational,
    pub epsilon: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(graph: SecurityGraph, code: LinearCode) -> Self {
        ProtocolConfig {
            graph,
            leader: AgentId(0),
            code,
            blocks: 1,
            delta: Rational::new(1, 20),
            epsilon: 0.05,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<(), ProtocolError> {
        if self.leader.0 >= self.graph.n {
            return Err(ProtocolError::Config(format!(
                "leader {} is not one of the {} agents",
                self.leader, self.graph.n
            )));
        }
        if *self.delta.numer() == 0 || self.delta >= Rational::from_integer(1) {
            return Err(ProtocolError::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ProtocolError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-block secret strings after key generation and check-position selection.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub tree: SpanningTree,
    /// Each agent's `2m`-bit string, indexed by agent id.
    pub secrets: Vec<BitString>,
    /// Ascending, exactly `m` positions in `[0, 2m)`.
    pub check_positions: Vec<usize>,
    /// Pairwise bits drawn across all tree edges.
    pub pairwise_bits: u64,
    /// Subroutine rounds run (one per position).
    pub rounds: u64,
}

impl BlockState {
    pub fn m(&self) -> usize {
        self.check_positions.len()
    }

    /// Positions not used for checking, ascending.
    pub fn code_positions(&self) -> Vec<usize> {
        let total = self.secrets[0].len();
        let mut is_check = vec![false; total];
        for &p in &self.check_positions {
            is_check[p] = true;
        }
        (0..total).filter(|&p| !is_check[p]).collect()
    }

    pub fn check_bits(&self, agent: AgentId) -> BitString {
        self.secrets[agent.0].select(&self.check_positions)
    }

    pub fn code_bits(&self, agent: AgentId) -> BitString {
        self.secrets[agent.0].select(&self.code_positions())
    }

    /// Ground-truth `(check errors, code errors)` of every agent against `leader`.
    pub fn errors_against(&self, leader: AgentId) -> Vec<(usize, usize)> {
        let (lc, lv) = (self.check_bits(leader), self.code_bits(leader));
        (0..self.secrets.len())
            .map(|j| {
                let a = AgentId(j);
                (
                    self.check_bits(a).hamming(&lc).expect("equal lengths"),
                    self.code_bits(a).hamming(&lv).expect("equal lengths"),
                )
            })
            .collect()
    }
}

/// Uniform `m`-subset of `[0, total)`, ascending. `total` must be even.
pub fn select_check_positions(rng: &mut SeededRng, total: usize) -> Vec<usize> {
    assert!(
        total.is_multiple_of(2) && total > 0,
        "total must be a positive even count"
    );
    let m = total / 2;
    let mut pool: Vec<usize> = (0..total).collect();
    for i in 0..m {
        let j = i + rng.index(total - i);
        pool.swap(i, j);
    }
    let mut chosen = pool[..m].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Pairwise keys, subroutine rounds and check positions for one block of `2m`
/// positions. Announcements, terminal choices and check positions are appended
/// to `transcript`.
pub fn prepare_block(
    tree: &SpanningTree,
    leader: AgentId,
    m: usize,
    seed: u64,
    block: u64,
    transcript: &mut Transcript,
) -> Result<BlockState, ProtocolError> {
    let total = 2 * m;
    let materials: Vec<_> = tree
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut rng = SeededRng::derive(seed, Stream::PairwiseKd, block, i as u64);
            align_correlation(simulate_pairwise_kd(e, total, &mut rng))
        })
        .collect();
    let pairwise_bits = materials.iter().map(|mat| mat.len() as u64).sum();

    let mut masks = SeededRng::derive(seed, Stream::Masks, block, 0);
    let mut choices = SeededRng::derive(seed, Stream::TerminalChoice, block, 0);
    let mut secrets = vec![Vec::with_capacity(total); tree.n];
    for pos in 0..total {
        let position: Vec<EdgeBits> = materials
            .iter()
            .map(|mat| EdgeBits {
                at_a: mat.bits_at_a.get(pos),
                at_b: mat.bits_at_b.get(pos),
            })
            .collect();
        let round = subroutine_round(
            tree,
            &position,
            leader,
            &mut masks,
            &mut choices,
            transcript,
        )?;
        for (agent, bit) in round.secrets.into_iter().enumerate() {
            secrets[agent].push(bit);
        }
    }

    let mut check_rng = SeededRng::derive(seed, Stream::CheckPositions, block, 0);
    let check_positions = select_check_positions(&mut check_rng, total);
    transcript.publish(leader, Payload::CheckPositions(check_positions.clone()));
    Ok(BlockState {
        tree: tree.clone(),
        secrets: secrets.into_iter().map(BitString::from_bits).collect(),
        check_positions,
        pairwise_bits,
        rounds: total as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbortDecision {
    pub abort: bool,
    /// One entry per agent other than the leader, ascending.
    pub mismatches: Vec<MismatchCount>,
}

impl AbortDecision {
    pub fn fractions(&self) -> Vec<(AgentId, Rational)> {
        self.mismatches
            .iter()
            .map(|c| (c.agent, Ratio::new(c.mismatches as u64, c.m as u64)))
            .collect()
    }
}

/// Aborts iff some agent's mismatch fraction against the leader strictly exceeds `delta`.
pub fn decide_abort(check_values: &[BitString], leader: AgentId, delta: Rational) -> AbortDecision {
    let reference = &check_values[leader.0];
    let m = reference.len();
    let mismatches: Vec<MismatchCount> = check_values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != leader.0)
        .map(|(j, values)| MismatchCount {
            agent: AgentId(j),
            mismatches: values
                .hamming(reference)
                .expect("check strings share length m"),
            m,
        })
        .collect();
    let abort = m > 0
        && mismatches
            .iter()
            .any(|c| Ratio::new(c.mismatches as u64, m as u64) > delta);
    AbortDecision { abort, mismatches }
}

/// Leader broadcasts `c XOR v`; every agent decodes to an index.
/// `agent_codebits[j]` is agent `j`'s code string; the leader's entry is `v`.
///
/// Returns every agent's codeword index. An agent whose error against the leader is
/// beyond the code's radius may miscorrect to a different index.
pub fn reconcile(
    code: &LinearCode,
    rng: &mut SeededRng,
    agent_codebits: &[BitString],
    leader: AgentId,
    transcript: &mut Transcript,
) -> Result<Vec<CodewordIndex>, ProtocolError> {
    let v = &agent_codebits[leader.0];
    let (index, codeword) = code.random_codeword(rng);
    let public = codeword.xor(v).map_err(|_| CodeError::Length {
        expected: code.m(),
        got: v.len(),
    })?;
    transcript.publish(leader, Payload::CodeBroadcast(public.clone()));
    agent_codebits
        .iter()
        .enumerate()
        .map(|(j, own)| {
            if j == leader.0 {
                return Ok(index);
            }
            let noisy = public.xor(own).map_err(|_| CodeError::Length {
                expected: code.m(),
                got: own.len(),
            })?;
            let (corrected, _) = code.decode_to_codeword(&noisy)?;
            Ok(code.index_of(&corrected)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Completed,
    Aborted,
}

impl BlockStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockStatus::Completed => "completed",
            BlockStatus::Aborted => "aborted",
        }
    }
}

/// Resource accounting for one block, built from counted quantities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfficiencyReport {
    pub n: u64,
    pub m: u64,
    pub k: u64,
    /// Pairwise bits drawn across all tree edges (`(n-1) * 2m`).
    pub pairwise_bits_consumed: u64,
    /// Pairwise bits behind the code positions (`(n-1) * m`).
    pub code_pairwise_bits: u64,
    /// n-party bits produced by the subroutine (one per round).
    pub subroutine_bits: u64,
    /// Key bits produced per agent (`k` when completed, else 0).
    pub key_bits: u64,
    pub eta_subroutine: Rational,
    pub eta_code: Rational,
}

impl EfficiencyReport {
    pub fn from_counts(
        n: u64,
        m: u64,
        k: u64,
        pairwise_bits_consumed: u64,
        code_pairwise_bits: u64,
        subroutine_bits: u64,
        key_bits: u64,
    ) -> Self {
        EfficiencyReport {
            n,
            m,
            k,
            pairwise_bits_consumed,
            code_pairwise_bits,
            subroutine_bits,
            key_bits,
            eta_subroutine: Ratio::new(subroutine_bits * n, 2 * pairwise_bits_consumed),
            eta_code: Ratio::new(key_bits * n, 2 * code_pairwise_bits),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KeyResult {
    pub block: u64,
    pub leader: AgentId,
    pub status: BlockStatus,
    /// One key per agent, indexed by agent id; empty when aborted.
    pub keys: Vec<CodewordIndex>,
    pub check_mismatches: Vec<MismatchCount>,
    /// Simulator ground truth: each agent's code-bit error weight against the leader.
    /// Never published.
    pub code_errors: Vec<usize>,
    pub efficiency: EfficiencyReport,
}

impl KeyResult {
    pub fn is_completed(&self) -> bool {
        self.status == BlockStatus::Completed
    }

    /// All agents hold the same key (false for aborted blocks).
    pub fn keys_agree(&self) -> bool {
        self.is_completed() && self.keys.windows(2).all(|w| w[0] == w[1])
    }
}

/// Runs block number `block` end to end.
pub fn run_block(
    config: &ProtocolConfig,
    block: u64,
    transcript: &mut Transcript,
) -> Result<KeyResult, ProtocolError> {
    config.check()?;
    let tree = config.graph.mst_kruskal()?;
    let leader = config.leader;
    let (n, m, k) = (tree.n as u64, config.code.m(), config.code.k() as u64);
    let state = prepare_block(&tree, leader, m, config.seed, block, transcript)?;

    let check_values: Vec<BitString> = (0..tree.n).map(|j| state.check_bits(AgentId(j))).collect();
    for (j, values) in check_values.iter().enumerate() {
        transcript.publish(AgentId(j), Payload::CheckValues(values.clone()));
    }
    let decision = decide_abort(&check_values, leader, config.delta);
    let code_errors = state
        .errors_against(leader)
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let code_pairwise_bits = tree.edges.len() as u64 * state.code_positions().len() as u64;
    let report = |key_bits| {
        EfficiencyReport::from_counts(
            n,
            m as u64,
            k,
            state.pairwise_bits,
            code_pairwise_bits,
            state.rounds,
            key_bits,
        )
    };
    if decision.abort {
        transcript.publish(leader, Payload::Abort(decision.mismatches.clone()));
        return Ok(KeyResult {
            block,
            leader,
            status: BlockStatus::Aborted,
            keys: Vec::new(),
            check_mismatches: decision.mismatches,
            code_errors,
            efficiency: report(0),
        });
    }

    let codebits: Vec<BitString> = (0..tree.n).map(|j| state.code_bits(AgentId(j))).collect();
    let mut rng = SeededRng::derive(config.seed, Stream::Codeword, block, 0);
    let keys = reconcile(&config.code, &mut rng, &codebits, leader, transcript)?;
    Ok(KeyResult {
        block,
        leader,
        status: BlockStatus::Completed,
        keys,
        check_mismatches: decision.mismatches,
        code_errors,
        efficiency: report(k),
    })
}

/// Runs `config.blocks` blocks over one shared transcript.
pub fn run(config: &ProtocolConfig) -> Result<(Vec<KeyResult>, Transcript), ProtocolError> {
    let mut transcript = Transcript::new();
    let results = (0..config.blocks)
        .map(|b| run_block(config, b, &mut transcript))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((results, transcript))
}

/// Aggregate statistics over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub blocks: usize,
    pub completed: usize,
    pub aborted: usize,
    /// Completed blocks in which every agent holds the same key.
    pub agreed: usize,
    pub mean_check_mismatch: f64,
}

impl RunStats {
    pub fn from_results(results: &[KeyResult]) -> Self {
        let completed = results.iter().filter(|r| r.is_completed()).count();
        let agreed = results.iter().filter(|r| r.keys_agree()).count();
        let fractions: Vec<f64> = results
            .iter()
            .flat_map(|r| r.check_mismatches.iter())
            .map(|c| c.mismatches as f64 / c.m as f64)
            .collect();
        let mean_check_mismatch = if fractions.is_empty() {
            0.0
        } else {
            fractions.iter().sum::<f64>() / fractions.len() as f64
        };
        RunStats {
            blocks: results.len(),
            completed,
            aborted: results.len() - completed,
            agreed,
            mean_check_mismatch,
        }
    }

    pub fn completion_rate(&self) -> f64 {
        ratio_or_zero(self.completed, self.blocks)
    }

    pub fn abort_rate(&self) -> f64 {
        ratio_or_zero(self.aborted, self.blocks)
    }

    /// Fraction of completed blocks with full agreement; 0 when nothing completed.
    pub fn agreement_rate(&self) -> f64 {
        ratio_or_zero(self.agreed, self.completed)
    }
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `exp(-epsilon^2 nbits / (4 (delta - delta^2)))`: asymptotic bound on seeing more than
/// `(delta + epsilon) nbits` code-bit errors while seeing fewer than `delta nbits`
/// check-bit errors. `nbits` is the block length `m`.
pub fn failure_bound(delta: f64, epsilon: f64, nbits: u64) -> Result<f64, ProtocolError> {
    let spread = delta - delta * delta;
    if !(delta > 0.0 && delta < 1.0) || spread <= 0.0 {
        return Err(ProtocolError::Domain(format!("delta = {delta}")));
    }
    if epsilon.is_nan() || epsilon < 0.0 || nbits == 0 {
        return Err(ProtocolError::Domain(format!(
            "epsilon = {epsilon}, nbits = {nbits}"
        )));
    }
    Ok((-0.25 * epsilon * epsilon * nbits as f64 / spread).exp())
}

/// `k n / (2 m (n-1))`.
pub fn code_efficiency(n: u64, k: u64, m: u64) -> Rational {
    assert!(n >= 2 && m >= 1, "need n >= 2 and m >= 1");
    Ratio::new(k * n, 2 * m * (n - 1))
}
