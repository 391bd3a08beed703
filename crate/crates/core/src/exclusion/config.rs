use std::fmt;

use serde::{Deserialize, Serialize};

/// Occupation `η ∈ {0,1}` per point index.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParticleConfig {
    occ: Vec<bool>,
}

impl ParticleConfig {
    pub fn empty(n: usize) -> Self {
        ParticleConfig { occ: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        ParticleConfig { occ: vec![true; n] }
    }

    pub fn from_bits(occ: Vec<bool>) -> Self {
        ParticleConfig { occ }
    }

    /// Configuration with particles exactly at `sites`.
    pub fn from_occupied(n: usize, sites: &[usize]) -> Self {
        let mut c = Self::empty(n);
        for &s in sites {
            c.occ[s] = true;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.occ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.occ[i]
    }

    /// `η(i)` as 0.0 or 1.0.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        if self.occ[i] {
            1.0
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.occ[i] = v;
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.occ
    }

    pub fn count(&self) -> usize {
        self.occ.iter().filter(|b| **b).count()
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.occ.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    /// Swaps the occupations at `i` and `j` in place.
    #[inline]
    pub fn exchange_in_place(&mut self, i: usize, j: usize) {
        self.occ.swap(i, j);
    }
}

impl fmt::Debug for ParticleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.occ.iter().map(|b| if *b { '1' } else { '0' }).collect();
        write!(f, "ParticleConfig({s})")
    }
}

/// `η^{i,j}`: the configuration with the occupations at `i` and `j` swapped.
pub fn exchange(eta: &ParticleConfig, i: usize, j: usize) -> ParticleConfig {
    if i == j {
        log::debug!("exchange of point {i} with itself is the identity");
    }
    let mut out = eta.clone();
    out.exchange_in_place(i, j);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_and_involution() {
        let eta = ParticleConfig::from_bits(vec![true, false]);
        let s = exchange(&eta, 0, 1);
        assert_eq!(s, ParticleConfig::from_bits(vec![false, true]));
        assert_eq!(exchange(&s, 0, 1), eta);
        assert_eq!(exchange(&eta, 1, 1), eta);
    }
}
