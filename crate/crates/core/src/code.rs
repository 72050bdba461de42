//! Binary linear `[m, k]` block codes with syndrome-table decoding, `m <= 15`.
//!
//! Words are packed into `u32` with position `i` at bit `i`. A message index `i`
//! is the `k`-bit message whose position `j` is bit `j` of `i`; its codeword is the
//! GF(2) sum of the generator rows selected by those bits.
//!
//! Built-in codes use systematic generators, message bits first:
//!
//! * `hamming7_4`: `G = [I4 | P]` with parity positions 4, 5, 6 equal to
//!   `m0+m1+m3`, `m0+m2+m3` and `m1+m2+m3`; `H = [P^T | I3]`.
//! * `repetition<m>` (odd `m`): `G = [1 1 ... 1]`; row `r` of `H` checks
//!   positions `0` and `r + 1`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::BitString;
use crate::rng::SeededRng;

pub const MAX_BLOCK_LENGTH: usize = 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("expected a word of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("repetition code length must be odd and positive, got {0}")]
    EvenRepetition(usize),
    #[error("block length {0} exceeds the supported maximum of 15")]
    TooLong(usize),
    #[error("word {0} is not a codeword")]
    NotACodeword(BitString),
    #[error("invalid code construction: {0}")]
    Construction(String),
    #[error("unknown code name {0:?} (expected hamming7_4 or repetition<m>)")]
    UnknownName(String),
}

/// Index of a codeword; equivalently the `k`-bit message it encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodewordIndex(pub u64);

impl fmt::Display for CodewordIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

#[derive(Clone)]
pub struct LinearCode {
    name: String,
    m: usize,
    k: usize,
    t: usize,
    generator: Vec<u32>,
    parity_check: Vec<u32>,
    /// Minimum-weight coset leader per syndrome.
    decode_table: Vec<u32>,
    index_of_word: HashMap<u32, u64>,
}

impl fmt::Debug for LinearCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LinearCode({} [{},{}] t={})",
            self.name, self.m, self.k, self.t
        )
    }
}

fn parity(x: u32) -> u32 {
    x.count_ones() & 1
}

fn rank(rows: &[u32]) -> usize {
    let mut rows = rows.to_vec();
    let mut rank = 0;
    for bit in 0..32 {
        let pivot = (rank..rows.len()).find(|&r| rows[r] >> bit & 1 == 1);
        if let Some(p) = pivot {
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && rows[r] >> bit & 1 == 1 {
                    rows[r] ^= rows[rank];
                }
            }
            rank += 1;
        }
    }
    rank
}

impl LinearCode {
    /// Builds a code from packed generator and parity-check rows, checking that the
    /// generator has rank `k`, `G H^T = 0`, `H` has rank `m - k`, and every error of
    /// weight at most `t` has its own syndrome.
    pub fn new(
        name: impl Into<String>,
        m: usize,
        k: usize,
        t: usize,
        generator: Vec<u32>,
        parity_check: Vec<u32>,
    ) -> Result<Self, CodeError> {
        let bad = |msg: String| Err(CodeError::Construction(msg));
        if m == 0 || k == 0 || k > m {
            return bad(format!("need 0 < k <= m, got m={m} k={k}"));
        }
        if m > MAX_BLOCK_LENGTH {
            return Err(CodeError::TooLong(m));
        }
        if generator.len() != k || parity_check.len() != m - k {
            return bad("matrix dimensions do not match [m,k]".into());
        }
        let full = (1u32 << m) - 1;
        if generator
            .iter()
            .chain(&parity_check)
            .any(|r| r & !full != 0)
        {
            return bad("matrix row wider than m".into());
        }
        if rank(&generator) != k {
            return bad("generator rows are linearly dependent".into());
        }
        if rank(&parity_check) != m - k {
            return bad("parity-check rows are linearly dependent".into());
        }
        let syndrome_of = |w: u32| {
            parity_check
                .iter()
                .enumerate()
                .fold(0u32, |s, (r, &h)| s | (parity(h & w) << r))
        };
        if generator.iter().any(|&g| syndrome_of(g) != 0) {
            return bad("G * H^T is not zero".into());
        }

        // Coset leaders: visit words by (weight, value), first claimant wins.
        let mut words: Vec<u32> = (0..=full).collect();
        words.sort_by_key(|&w| (w.count_ones(), w));
        let mut decode_table = vec![u32::MAX; 1 << (m - k)];
        for w in words {
            let s = syndrome_of(w) as usize;
            if decode_table[s] == u32::MAX {
                decode_table[s] = w;
            } else if (w.count_ones() as usize) <= t {
                return bad(format!("two errors of weight <= {t} share a syndrome"));
            }
        }

        let mut index_of_word = HashMap::with_capacity(1 << k);
        for i in 0..(1u64 << k) {
            let w = generator
                .iter()
                .enumerate()
                .filter(|(j, _)| i >> j & 1 == 1)
                .fold(0u32, |acc, (_, &g)| acc ^ g);
            index_of_word.insert(w, i);
        }
        Ok(LinearCode {
            name: name.into(),
            m,
            k,
            t,
            generator,
            parity_check,
            decode_table,
            index_of_word,
        })
    }

    pub fn hamming_7_4() -> Self {
        // position j of each row; parity positions 4,5,6
        let generator = vec![
            0b0110001, // m0 -> p0, p1
            0b1010010, // m1 -> p0, p2
            0b1100100, // m2 -> p1, p2
            0b1111000, // m3 -> p0, p1, p2
        ];
        let parity_check = vec![
            0b0011011, // p0 = m0+m1+m3
            0b0101101, // p1 = m0+m2+m3
            0b1001110, // p2 = m1+m2+m3
        ];
        Self::new("hamming7_4", 7, 4, 1, generator, parity_check).expect("valid Hamming code")
    }

    pub fn repetition(m: usize) -> Result<Self, CodeError> {
        if m == 0 || m.is_multiple_of(2) {
            return Err(CodeError::EvenRepetition(m));
        }
        if m > MAX_BLOCK_LENGTH {
            return Err(CodeError::TooLong(m));
        }
        let generator = vec![(1u32 << m) - 1];
        let parity_check = (1..m).map(|j| 1u32 | (1 << j)).collect();
        Self::new(
            format!("repetition{m}"),
            m,
            1,
            (m - 1) / 2,
            generator,
            parity_check,
        )
    }

    /// Looks up `hamming7_4` or `repetition<m>`.
    pub fn by_name(name: &str) -> Result<Self, CodeError> {
        if name == "hamming7_4" {
            return Ok(Self::hamming_7_4());
        }
        if let Some(m) = name.strip_prefix("repetition") {
            if let Ok(m) = m.parse::<usize>() {
                return Self::repetition(m);
            }
        }
        Err(CodeError::UnknownName(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn codeword_count(&self) -> u64 {
        1 << self.k
    }

    pub fn generator_rows(&self) -> Vec<BitString> {
        self.generator
            .iter()
            .map(|&r| BitString::from_u64(r as u64, self.m))
            .collect()
    }

    pub fn parity_check_rows(&self) -> Vec<BitString> {
        self.parity_check
            .iter()
            .map(|&r| BitString::from_u64(r as u64, self.m))
            .collect()
    }

    fn pack(&self, word: &BitString, expected: usize) -> Result<u32, CodeError> {
        if word.len() != expected {
            return Err(CodeError::Length {
                expected,
                got: word.len(),
            });
        }
        Ok(word.to_u64() as u32)
    }

    fn syndrome_word(&self, w: u32) -> u32 {
        self.parity_check
            .iter()
            .enumerate()
            .fold(0, |s, (r, &h)| s | (parity(h & w) << r))
    }

    pub fn syndrome(&self, word: &BitString) -> Result<BitString, CodeError> {
        let w = self.pack(word, self.m)?;
        Ok(BitString::from_u64(
            self.syndrome_word(w) as u64,
            self.m - self.k,
        ))
    }

    fn encode_word(&self, index: u64) -> u32 {
        self.generator
            .iter()
            .enumerate()
            .filter(|(j, _)| index >> j & 1 == 1)
            .fold(0, |acc, (_, &g)| acc ^ g)
    }

    /// `message * G` over GF(2).
    pub fn encode(&self, message: &BitString) -> Result<BitString, CodeError> {
        let i = self.pack(message, self.k)?;
        Ok(self.encode_index(CodewordIndex(i as u64)))
    }

    pub fn encode_index(&self, index: CodewordIndex) -> BitString {
        assert!(
            index.0 < self.codeword_count(),
            "codeword index out of range"
        );
        BitString::from_u64(self.encode_word(index.0) as u64, self.m)
    }

    /// Syndrome decoding: returns `(word XOR leader, leader)`. Beyond radius `t` the
    /// result is still a codeword, possibly not the transmitted one.
    pub fn decode_to_codeword(
        &self,
        word: &BitString,
    ) -> Result<(BitString, BitString), CodeError> {
        let w = self.pack(word, self.m)?;
        let leader = self.decode_table[self.syndrome_word(w) as usize];
        Ok((
            BitString::from_u64((w ^ leader) as u64, self.m),
            BitString::from_u64(leader as u64, self.m),
        ))
    }

    pub fn index_of(&self, codeword: &BitString) -> Result<CodewordIndex, CodeError> {
        let w = self.pack(codeword, self.m)?;
        self.index_of_word
            .get(&w)
            .map(|&i| CodewordIndex(i))
            .ok_or_else(|| CodeError::NotACodeword(codeword.clone()))
    }

    /// Uniform index with its codeword.
    pub fn random_codeword(&self, rng: &mut SeededRng) -> (CodewordIndex, BitString) {
        let index = CodewordIndex(rng.below(self.codeword_count()));
        (index, self.encode_index(index))
    }
}

impl FromStr for LinearCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::by_name(s)
    }
}
