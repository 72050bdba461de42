//! Pairwise key distribution along one tree edge, modelled as an ideal secret
//! shared-randomness source with symmetric bit-flip noise.
//!
//! Noise is applied to the b-side copy only. An anti-correlated edge delivers the
//! complement at the b-side until [`align_correlation`] undoes it.

use crate::bits::BitString;
use crate::graph::{AgentId, WeightedEdge};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeKeyMaterial {
    pub edge: WeightedEdge,
    pub bits_at_a: BitString,
    pub bits_at_b: BitString,
    /// Whether `bits_at_b` is still complemented relative to `bits_at_a`.
    pub anti_correlated: bool,
}

impl EdgeKeyMaterial {
    pub fn len(&self) -> usize {
        self.bits_at_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits_at_a.is_empty()
    }

    /// The copy held by `agent`. Panics if `agent` is not an endpoint.
    pub fn bits_of(&self, agent: AgentId) -> &BitString {
        if agent == self.edge.a {
            &self.bits_at_a
        } else if agent == self.edge.b {
            &self.bits_at_b
        } else {
            panic!("agent {agent} is not an endpoint of {}", self.edge.key())
        }
    }

    /// Positions where the two copies disagree after alignment.
    pub fn mismatches(&self) -> usize {
        let aligned = align_correlation(self.clone());
        aligned
            .bits_at_a
            .hamming(&aligned.bits_at_b)
            .expect("equal lengths")
    }
}

/// Draws `length` positions of pairwise key material for `edge`.
///
/// `bits_at_a` is uniform; `bits_at_b = f(bits_at_a) XOR e` where `f` complements on
/// anti-correlated edges and `e` has independent ones with probability `flip_prob`.
pub fn simulate_pairwise_kd(
    edge: &WeightedEdge,
    length: usize,
    rng: &mut SeededRng,
) -> EdgeKeyMaterial {
    assert!(length >= 1, "pairwise key length must be positive");
    let bits_at_a: BitString = (0..length).map(|_| rng.bit()).collect();
    let bits_at_b: BitString = bits_at_a
        .iter()
        .map(|bit| (bit ^ edge.anti_correlated) ^ rng.bernoulli(edge.flip_prob))
        .collect();
    EdgeKeyMaterial {
        edge: edge.clone(),
        bits_at_a,
        bits_at_b,
        anti_correlated: edge.anti_correlated,
    }
}

/// Complements the b-side copy of anti-correlated material and clears the flag.
pub fn align_correlation(mut material: EdgeKeyMaterial) -> EdgeKeyMaterial {
    if material.anti_correlated {
        material.bits_at_b = material.bits_at_b.complement();
        material.anti_correlated = false;
    }
    material
}

/// Probability of an odd number of flips among independent links, folding
/// `p (+) q = p + q - 2pq`.
pub fn combined_flip_probability(ps: &[f64]) -> f64 {
    ps.iter().fold(0.0, |acc, &p| acc + p - 2.0 * acc * p)
}
