//! The public, authenticated broadcast record.
//!
//! Log format, one message per line:
//!
//! ```text
//! <seq> <sender> <kind> <payload>
//! ```
//!
//! | kind              | payload                                   |
//! |-------------------|-------------------------------------------|
//! | `announcement`    | `(a,b):bit` pairs sorted by edge, comma-separated |
//! | `terminal_choice` | chosen agent id                           |
//! | `check_positions` | ascending positions, comma-separated      |
//! | `check_values`    | bit string, one char per check position   |
//! | `code_broadcast`  | bit string                                |
//! | `abort`           | `agent:mismatches/m` for every compared agent |
//!
//! Bit strings are written as `0`/`1` characters, position 0 first.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::BitString;
use crate::graph::{AgentId, EdgeKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Announcement,
    TerminalChoice,
    CheckPositions,
    CheckValues,
    CodeBroadcast,
    Abort,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Announcement => "announcement",
            MessageKind::TerminalChoice => "terminal_choice",
            MessageKind::CheckPositions => "check_positions",
            MessageKind::CheckValues => "check_values",
            MessageKind::CodeBroadcast => "code_broadcast",
            MessageKind::Abort => "abort",
        }
    }
}

impl FromStr for MessageKind {
    type Err = TranscriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "announcement" => MessageKind::Announcement,
            "terminal_choice" => MessageKind::TerminalChoice,
            "check_positions" => MessageKind::CheckPositions,
            "check_values" => MessageKind::CheckValues,
            "code_broadcast" => MessageKind::CodeBroadcast,
            "abort" => MessageKind::Abort,
            other => {
                return Err(TranscriptError::Malformed(format!(
                    "unknown kind {other:?}"
                )))
            }
        })
    }
}

/// Per-agent check mismatch count carried by an abort message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MismatchCount {
    pub agent: AgentId,
    pub mismatches: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Masked incident edge bits, sorted by edge key. The mask never appears here.
    Announcement(Vec<(EdgeKey, bool)>),
    TerminalChoice(AgentId),
    CheckPositions(Vec<usize>),
    CheckValues(BitString),
    CodeBroadcast(BitString),
    Abort(Vec<MismatchCount>),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Announcement(_) => MessageKind::Announcement,
            Payload::TerminalChoice(_) => MessageKind::TerminalChoice,
            Payload::CheckPositions(_) => MessageKind::CheckPositions,
            Payload::CheckValues(_) => MessageKind::CheckValues,
            Payload::CodeBroadcast(_) => MessageKind::CodeBroadcast,
            Payload::Abort(_) => MessageKind::Abort,
        }
    }

    fn parse(kind: MessageKind, text: &str) -> Result<Payload, TranscriptError> {
        let bad = || TranscriptError::Malformed(format!("bad {} payload {text:?}", kind.as_str()));
        let items = || text.split(',').filter(|s| !s.is_empty());
        Ok(match kind {
            MessageKind::Announcement => {
                let mut pairs = Vec::new();
                // Split on "),(" boundaries: items look like "(a,b):bit".
                let mut rest = text;
                while !rest.is_empty() {
                    let close = rest.find(')').ok_or_else(bad)?;
                    let (head, tail) = rest.split_at(close + 1);
                    let inner = head.strip_prefix('(').and_then(|h| h.strip_suffix(')'));
                    let (a, b) = inner.and_then(|i| i.split_once(',')).ok_or_else(bad)?;
                    let a: usize = a.parse().map_err(|_| bad())?;
                    let b: usize = b.parse().map_err(|_| bad())?;
                    let tail = tail.strip_prefix(':').ok_or_else(bad)?;
                    let bit = match tail.as_bytes().first() {
                        Some(b'0') => false,
                        Some(b'1') => true,
                        _ => return Err(bad()),
                    };
                    pairs.push((EdgeKey::new(AgentId(a), AgentId(b)), bit));
                    rest = &tail[1..];
                    if let Some(r) = rest.strip_prefix(',') {
                        rest = r;
                    } else if !rest.is_empty() {
                        return Err(bad());
                    }
                }
                Payload::Announcement(pairs)
            }
            MessageKind::TerminalChoice => {
                Payload::TerminalChoice(AgentId(text.parse().map_err(|_| bad())?))
            }
            MessageKind::CheckPositions => Payload::CheckPositions(
                items()
                    .map(|s| s.parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?,
            ),
            MessageKind::CheckValues => Payload::CheckValues(text.parse().map_err(|_| bad())?),
            MessageKind::CodeBroadcast => Payload::CodeBroadcast(text.parse().map_err(|_| bad())?),
            MessageKind::Abort => Payload::Abort(
                items()
                    .map(|item| {
                        let (agent, frac) = item.split_once(':').ok_or_else(bad)?;
                        let (mm, m) = frac.split_once('/').ok_or_else(bad)?;
                        Ok(MismatchCount {
                            agent: AgentId(agent.parse().map_err(|_| bad())?),
                            mismatches: mm.parse().map_err(|_| bad())?,
                            m: m.parse().map_err(|_| bad())?,
                        })
                    })
                    .collect::<Result<_, TranscriptError>>()?,
            ),
        })
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(
            f: &mut fmt::Formatter<'_>,
            items: impl Iterator<Item = T>,
        ) -> fmt::Result {
            for (i, item) in items.enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{item}")?;
            }
            Ok(())
        }
        match self {
            Payload::Announcement(pairs) => {
                join(f, pairs.iter().map(|(k, b)| format!("{k}:{}", *b as u8)))
            }
            Payload::TerminalChoice(a) => write!(f, "{a}"),
            Payload::CheckPositions(ps) => join(f, ps.iter()),
            Payload::CheckValues(bits) | Payload::CodeBroadcast(bits) => write!(f, "{bits}"),
            Payload::Abort(counts) => join(
                f,
                counts
                    .iter()
                    .map(|c| format!("{}:{}/{}", c.agent, c.mismatches, c.m)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastMessage {
    pub seq: u64,
    pub sender: AgentId,
    pub payload: Payload,
}

impl BroadcastMessage {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}

impl fmt::Display for BroadcastMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.seq,
            self.sender,
            self.kind().as_str(),
            self.payload
        )
    }
}

impl FromStr for BroadcastMessage {
    type Err = TranscriptError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut parts = line.splitn(4, ' ');
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| TranscriptError::Malformed(format!("missing {what} in {line:?}")))
        };
        let seq = next("seq")?
            .parse()
            .map_err(|_| TranscriptError::Malformed(format!("bad seq in {line:?}")))?;
        let sender = next("sender")?
            .parse()
            .map_err(|_| TranscriptError::Malformed(format!("bad sender in {line:?}")))?;
        let kind: MessageKind = next("kind")?.parse()?;
        let payload = Payload::parse(kind, next("payload").unwrap_or(""))?;
        Ok(BroadcastMessage {
            seq,
            sender: AgentId(sender),
            payload,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("malformed transcript: {0}")]
    Malformed(String),
    #[error("transcript line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<TranscriptError>,
    },
}

/// Append-only sequence of broadcasts with contiguous sequence numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<BroadcastMessage>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> &[BroadcastMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.messages.len() as u64
    }

    /// Appends `msg`, which must carry the next sequence number.
    pub fn broadcast(&mut self, msg: BroadcastMessage) -> Result<(), TranscriptError> {
        let expected = self.next_seq();
        if msg.seq != expected {
            return Err(TranscriptError::SequenceGap {
                expected,
                got: msg.seq,
            });
        }
        self.messages.push(msg);
        Ok(())
    }

    /// Appends a message stamped with the next sequence number.
    pub fn publish(&mut self, sender: AgentId, payload: Payload) -> &BroadcastMessage {
        let seq = self.next_seq();
        self.messages.push(BroadcastMessage {
            seq,
            sender,
            payload,
        });
        self.messages.last().expect("just pushed")
    }

    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&m.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses a log produced by [`Transcript::to_log`]. Blank lines are skipped.
    pub fn parse_log(text: &str) -> Result<Transcript, TranscriptError> {
        let mut t = Transcript::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let at = |e: TranscriptError| TranscriptError::AtLine {
                line: i + 1,
                source: Box::new(e),
            };
            let msg: BroadcastMessage = line.parse().map_err(at)?;
            t.broadcast(msg).map_err(at)?;
        }
        Ok(t)
    }
}
