//! Variable-selection models: binary inclusion vectors on the hypercube.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OrderRelation;

/// Largest `p` for which full hypercube enumeration is allowed (2^24 models).
pub const MAX_ENUM_P: usize = 24;

/// A variable-selection model: a length-`p` vector of inclusion indicators.
///
/// Stored as a bitmask; bit `i` set means variable `i` is included.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GammaVector {
    p: u8,
    mask: u32,
}

impl GammaVector {
    /// Model with the given inclusion bits.
    pub fn new(bits: &[bool]) -> Result<Self> {
        if bits.is_empty() || bits.len() > 32 {
            return Err(Error::Argument(format!(
                "gamma vector length must be in 1..=32, got {}",
                bits.len()
            )));
        }
        let mut mask = 0u32;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                mask |= 1 << i;
            }
        }
        Ok(Self { p: bits.len() as u8, mask })
    }

    /// The null model (no variables included).
    pub fn null(p: usize) -> Self {
        assert!((1..=32).contains(&p));
        Self { p: p as u8, mask: 0 }
    }

    /// The full model (all variables included).
    pub fn full(p: usize) -> Self {
        assert!((1..=32).contains(&p));
        Self { p: p as u8, mask: if p == 32 { u32::MAX } else { (1 << p) - 1 } }
    }

    pub fn from_mask(p: usize, mask: u32) -> Self {
        assert!((1..=32).contains(&p));
        debug_assert!(p == 32 || mask < (1u32 << p));
        Self { p: p as u8, mask }
    }

    /// Number of candidate variables.
    pub fn p(&self) -> usize {
        self.p as usize
    }

    /// Whether variable `i` is included.
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.p());
        self.mask >> i & 1 == 1
    }

    /// Model size |γ|: the number of included variables.
    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Indices of included variables, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.p()).filter(|&i| self.bit(i))
    }

    /// Copy with variable `i` set to `value`.
    pub fn with_bit(&self, i: usize, value: bool) -> Self {
        debug_assert!(i < self.p());
        let mask = if value { self.mask | 1 << i } else { self.mask & !(1 << i) };
        Self { p: self.p, mask }
    }

    /// Complexity partial order by strict support inclusion.
    pub fn compare(&self, other: &GammaVector) -> Result<OrderRelation> {
        if self.p != other.p {
            return Err(Error::Argument(format!(
                "mismatched p: {} vs {}",
                self.p, other.p
            )));
        }
        Ok(if self.mask == other.mask {
            OrderRelation::Equal
        } else if self.mask & other.mask == self.mask {
            OrderRelation::Simpler
        } else if self.mask & other.mask == other.mask {
            OrderRelation::MoreComplex
        } else {
            OrderRelation::Incomparable
        })
    }

    /// Immediate successors in the partial order: every single 0→1 flip.
    pub fn covers(&self) -> Vec<GammaVector> {
        (0..self.p())
            .filter(|&i| !self.bit(i))
            .map(|i| self.with_bit(i, true))
            .collect()
    }

    /// Symmetric Hamming distance.
    pub fn hamming(&self, other: &GammaVector) -> usize {
        (self.mask ^ other.mask).count_ones() as usize
    }
}

impl fmt::Display for GammaVector {
    /// Contiguous bit string, e.g. `0101`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.p() {
            write!(f, "{}", if self.bit(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for GammaVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GammaVector({self})")
    }
}

impl FromStr for GammaVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<_>>()?;
        GammaVector::new(&bits)
    }
}

impl Serialize for GammaVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GammaVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lazily enumerate all 2^p models in lexicographic order on bit strings.
pub fn enumerate_gamma(p: usize) -> Result<impl Iterator<Item = GammaVector>> {
    if !(1..=MAX_ENUM_P).contains(&p) {
        return Err(Error::Capacity(format!(
            "hypercube enumeration requires 1 <= p <= {MAX_ENUM_P}, got {p}"
        )));
    }
    // Counter bit (p-1-i) maps to position i, so bit strings come out in
    // lexicographic order: 00, 01, 10, 11, ...
    Ok((0u32..1 << p).map(move |n| {
        let mut mask = 0u32;
        for i in 0..p {
            if n >> (p - 1 - i) & 1 == 1 {
                mask |= 1 << i;
            }
        }
        GammaVector::from_mask(p, mask)
    }))
}
