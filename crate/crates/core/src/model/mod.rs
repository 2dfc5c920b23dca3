//! Representations, enumeration, and partial-order structure for the two
//! structured model spaces: the inclusion hypercube and the set-partition
//! lattice.

mod gamma;
mod partition;

pub use gamma::{enumerate_gamma, GammaVector};
pub use partition::{
    bell_numbers, enumerate_partitions, refinement_chain, stirling2, ChainStrategy, Partition,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of comparing two models under the complexity partial order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderRelation {
    Simpler,
    MoreComplex,
    Equal,
    Incomparable,
}

/// Which structured model space a value lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Hypercube,
    Partitions,
}

/// A model from either space. Boundary type for operations that are generic
/// over the space (risk profiles, matrix losses, CLI plumbing).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Model {
    Gamma(GammaVector),
    Partition(Partition),
}

impl Model {
    pub fn space(&self) -> SpaceKind {
        match self {
            Model::Gamma(_) => SpaceKind::Hypercube,
            Model::Partition(_) => SpaceKind::Partitions,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            Model::Gamma(g) => g.p(),
            Model::Partition(z) => z.n_items(),
        }
    }

    /// Complexity used for tie-breaking: |γ| or the number of clusters.
    pub fn complexity(&self) -> usize {
        match self {
            Model::Gamma(g) => g.size(),
            Model::Partition(z) => z.n_clusters(),
        }
    }

    pub fn as_gamma(&self) -> Result<&GammaVector> {
        match self {
            Model::Gamma(g) => Ok(g),
            Model::Partition(_) => Err(Error::Argument("expected a hypercube model".into())),
        }
    }

    pub fn as_partition(&self) -> Result<&Partition> {
        match self {
            Model::Partition(z) => Ok(z),
            Model::Gamma(_) => Err(Error::Argument("expected a partition model".into())),
        }
    }

    /// Complexity partial order; errors on mismatched space or `p`.
    pub fn compare(&self, other: &Model) -> Result<OrderRelation> {
        match (self, other) {
            (Model::Gamma(a), Model::Gamma(b)) => a.compare(b),
            (Model::Partition(a), Model::Partition(b)) => a.compare(b),
            _ => Err(Error::Argument("models from different spaces".into())),
        }
    }

    /// Immediate successors under the partial order.
    pub fn covers(&self) -> Vec<Model> {
        match self {
            Model::Gamma(g) => g.covers().into_iter().map(Model::Gamma).collect(),
            Model::Partition(z) => z.covers().into_iter().map(Model::Partition).collect(),
        }
    }

    /// Parse a model in the text format of the given space
    /// (`0101` for the hypercube, `1,1,2,3` for partitions).
    pub fn parse(kind: SpaceKind, s: &str) -> Result<Model> {
        match kind {
            SpaceKind::Hypercube => Ok(Model::Gamma(s.parse()?)),
            SpaceKind::Partitions => Ok(Model::Partition(s.parse()?)),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Gamma(g) => g.fmt(f),
            Model::Partition(z) => z.fmt(f),
        }
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Model({self})")
    }
}

impl From<GammaVector> for Model {
    fn from(g: GammaVector) -> Self {
        Model::Gamma(g)
    }
}

impl From<Partition> for Model {
    fn from(z: Partition) -> Self {
        Model::Partition(z)
    }
}

impl FromStr for Model {
    type Err = Error;

    /// Partitions contain commas, bit strings do not.
    fn from_str(s: &str) -> Result<Self> {
        if s.contains(',') {
            Ok(Model::Partition(s.parse()?))
        } else {
            Ok(Model::Gamma(s.parse()?))
        }
    }
}

/// Enumerate a full model space as a vector, subject to the per-space guards.
pub fn enumerate_space(kind: SpaceKind, p: usize) -> Result<Vec<Model>> {
    Ok(match kind {
        SpaceKind::Hypercube => enumerate_gamma(p)?.map(Model::Gamma).collect(),
        SpaceKind::Partitions => enumerate_partitions(p)?.map(Model::Partition).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space_is_strict_partial_order(models: &[Model]) {
        use OrderRelation::*;
        for a in models {
            assert_eq!(a.compare(a).unwrap(), Equal);
            for b in models {
                let ab = a.compare(b).unwrap();
                let ba = b.compare(a).unwrap();
                match ab {
                    Simpler => assert_eq!(ba, MoreComplex),
                    MoreComplex => assert_eq!(ba, Simpler),
                    Equal => {
                        assert_eq!(a, b);
                        assert_eq!(ba, Equal);
                    }
                    Incomparable => assert_eq!(ba, Incomparable),
                }
                for c in models {
                    if ab == Simpler && b.compare(c).unwrap() == Simpler {
                        assert_eq!(a.compare(c).unwrap(), Simpler, "transitivity");
                    }
                }
            }
        }
    }

    #[test]
    fn partial_order_axioms_exhaustive() {
        for p in 1..=5 {
            space_is_strict_partial_order(&enumerate_space(SpaceKind::Hypercube, p).unwrap());
        }
        for p in 1..=5 {
            space_is_strict_partial_order(&enumerate_space(SpaceKind::Partitions, p).unwrap());
        }
    }

    #[test]
    fn covers_are_covering_pairs() {
        use OrderRelation::Simpler;
        for kind in [SpaceKind::Hypercube, SpaceKind::Partitions] {
            for p in 2..=5 {
                let models = enumerate_space(kind, p).unwrap();
                for m in &models {
                    let covers = m.covers();
                    for c in &covers {
                        assert_eq!(m.compare(c).unwrap(), Simpler);
                        // No model strictly between m and c.
                        for x in &models {
                            if m.compare(x).unwrap() == Simpler
                                && x.compare(c).unwrap() == Simpler
                            {
                                panic!("{x} lies strictly between {m} and {c}");
                            }
                        }
                    }
                    // Every covering pair is found: any strictly-more-complex
                    // model with nothing in between must be in covers().
                    for x in &models {
                        if m.compare(x).unwrap() == Simpler
                            && !models.iter().any(|y| {
                                m.compare(y).unwrap() == Simpler
                                    && y.compare(x).unwrap() == Simpler
                            })
                        {
                            assert!(covers.contains(x), "missing cover {x} of {m}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn one_block_covers_match_two_block_partitions() {
        // Derived via the compare-based covering check above; spot value here.
        let covers = Partition::one_block(3).covers();
        assert_eq!(covers.len(), 3);
        assert!(covers.iter().all(|z| z.n_clusters() == 2));
    }

    #[test]
    fn parse_dispatch() {
        assert_eq!("0101".parse::<Model>().unwrap().space(), SpaceKind::Hypercube);
        assert_eq!("1,1,2".parse::<Model>().unwrap().space(), SpaceKind::Partitions);
    }
}
