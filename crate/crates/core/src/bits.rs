use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("invalid bit character {0:?} (expected '0' or '1')")]
    BadChar(char),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// A fixed-length sequence of bits, position 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            bits: vec![false; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// The low `len` bits of `word`, bit `i` of the word at position `i`.
    pub fn from_u64(word: u64, len: usize) -> Self {
        assert!(len <= 64);
        BitString {
            bits: (0..len).map(|i| (word >> i) & 1 == 1).collect(),
        }
    }

    /// Inverse of [`BitString::from_u64`]. Panics for strings longer than 64.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn complement(&self) -> Self {
        BitString {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString, BitsError> {
        if self.len() != other.len() {
            return Err(BitsError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(BitString {
            bits: self.iter().zip(other.iter()).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn hamming(&self, other: &BitString) -> Result<usize, BitsError> {
        self.xor(other).map(|d| d.weight())
    }

    /// The bits at `positions`, in the given order.
    pub fn select(&self, positions: &[usize]) -> BitString {
        BitString {
            bits: positions.iter().map(|&p| self.bits[p]).collect(),
        }
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    /// Panics on length mismatch; use [`BitString::xor`] for a checked version.
    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("xor of unequal-length bit strings")
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString {
            bits: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString::from_bits)
    }
}
