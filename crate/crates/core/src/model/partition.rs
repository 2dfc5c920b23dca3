//! Clustering models: set partitions in restricted-growth-string form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OrderRelation;
use crate::rng::Rng64;

/// Largest `p` for which full partition enumeration is allowed (B_12 ≈ 4.2M).
pub const MAX_ENUM_P: usize = 12;

/// A set partition of `{1,...,p}` in canonical restricted-growth form:
/// `labels[0] = 1` and `labels[i+1] <= 1 + max(labels[0..=i])`.
///
/// The canonical form is unique per set partition, so `Eq`/`Hash` coincide
/// with partition identity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<u8>,
}

impl Partition {
    /// Canonicalize an arbitrary positive label sequence by first appearance.
    pub fn from_labels<T: Copy + Into<u64>>(labels: &[T]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Argument("empty label sequence".into()));
        }
        if labels.len() > 255 {
            return Err(Error::Argument(format!(
                "at most 255 items supported, got {}",
                labels.len()
            )));
        }
        let raw: Vec<u64> = labels.iter().map(|&l| l.into()).collect();
        if raw.contains(&0) {
            return Err(Error::Argument("labels must be positive".into()));
        }
        let mut map: Vec<(u64, u8)> = Vec::new();
        let mut canon = Vec::with_capacity(raw.len());
        for &l in &raw {
            let relabeled = match map.iter().find(|(orig, _)| *orig == l) {
                Some(&(_, c)) => c,
                None => {
                    let c = map.len() as u8 + 1;
                    map.push((l, c));
                    c
                }
            };
            canon.push(relabeled);
        }
        Ok(Self { labels: canon })
    }

    /// Construct from labels already known to be in restricted-growth form.
    fn from_canonical(labels: Vec<u8>) -> Self {
        debug_assert!(!labels.is_empty() && labels[0] == 1);
        debug_assert!(labels
            .iter()
            .scan(0u8, |mx, &l| {
                let ok = l <= *mx + 1;
                *mx = (*mx).max(l);
                Some(ok)
            })
            .all(|ok| ok));
        Self { labels }
    }

    /// The one-block partition, the least element under refinement.
    pub fn one_block(p: usize) -> Self {
        assert!(p >= 1);
        Self { labels: vec![1; p] }
    }

    /// The partition of singletons, the greatest element.
    pub fn singletons(p: usize) -> Self {
        assert!((1..=255).contains(&p));
        Self { labels: (1..=p as u8).collect() }
    }

    /// Number of items `p`.
    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    /// Number of clusters `k`.
    pub fn n_clusters(&self) -> usize {
        *self.labels.iter().max().unwrap() as usize
    }

    /// Canonical labels, 1-based.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// 0-based cluster index of item `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.labels[i] as usize - 1
    }

    /// Whether items `i` and `j` share a cluster.
    pub fn co_clustered(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// Cluster sizes indexed by 0-based cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_clusters()];
        for &l in &self.labels {
            sizes[l as usize - 1] += 1;
        }
        sizes
    }

    /// Cluster member lists indexed by 0-based cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize - 1].push(i);
        }
        out
    }

    /// Number of co-clustered pairs, Σ_l C(n_l, 2).
    pub fn n_pairs_together(&self) -> usize {
        self.cluster_sizes().iter().map(|&n| n * (n - 1) / 2).sum()
    }

    /// Refinement partial order: `self` is simpler than `other` when every
    /// cluster of `other` is contained in some cluster of `self`.
    pub fn compare(&self, other: &Partition) -> Result<OrderRelation> {
        if self.n_items() != other.n_items() {
            return Err(Error::Argument(format!(
                "mismatched p: {} vs {}",
                self.n_items(),
                other.n_items()
            )));
        }
        if self == other {
            return Ok(OrderRelation::Equal);
        }
        Ok(if other.refines(self) {
            OrderRelation::Simpler
        } else if self.refines(other) {
            OrderRelation::MoreComplex
        } else {
            OrderRelation::Incomparable
        })
    }

    /// True when every cluster of `self` is a subset of a cluster of `coarser`.
    fn refines(&self, coarser: &Partition) -> bool {
        // For each cluster of self, all members must share a label in coarser.
        // Equivalent: co-clustering in self implies co-clustering in coarser,
        // checked per cluster representative.
        let mut rep = vec![None::<u8>; self.n_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            let c = l as usize - 1;
            match rep[c] {
                None => rep[c] = Some(coarser.labels[i]),
                Some(r) => {
                    if coarser.labels[i] != r {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Immediate successors under refinement: every split of a single cluster
    /// into two nonempty parts, deduplicated and in canonical order.
    pub fn covers(&self) -> Vec<Partition> {
        let mut out = std::collections::BTreeSet::new();
        for members in self.clusters() {
            let n = members.len();
            if n < 2 {
                continue;
            }
            // Fix members[0] in the first part; enumerate the 2^(n-1)-1
            // nonempty complements.
            for pick in 1u64..(1 << (n - 1)) {
                let mut labels = self.labels.clone();
                let new_label = self.n_clusters() as u8 + 1;
                for (idx, &item) in members.iter().enumerate().skip(1) {
                    if pick >> (idx - 1) & 1 == 1 {
                        labels[item] = new_label;
                    }
                }
                out.insert(Partition::from_labels(&labels).expect("valid labels"));
            }
        }
        out.into_iter().collect()
    }

    /// Splits `members_to_move` (item indices) of one cluster into a fresh
    /// cluster, returning the canonicalized result.
    fn split_off(&self, members_to_move: &[usize]) -> Partition {
        let mut labels = self.labels.clone();
        let new_label = self.n_clusters() as u8 + 1;
        for &i in members_to_move {
            labels[i] = new_label;
        }
        Partition::from_labels(&labels).expect("valid labels")
    }
}

impl fmt::Display for Partition {
    /// Comma-separated canonical labels, e.g. `1,1,2,3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels: Vec<u64> = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(format!("invalid label {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        Partition::from_labels(&labels)
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lazily enumerate all B_p partitions in lexicographic order on
/// restricted growth strings.
pub fn enumerate_partitions(p: usize) -> Result<impl Iterator<Item = Partition>> {
    if !(1..=MAX_ENUM_P).contains(&p) {
        return Err(Error::Capacity(format!(
            "partition enumeration requires 1 <= p <= {MAX_ENUM_P}, got {p}"
        )));
    }
    Ok(RgsIter { next: Some(vec![1; p]) })
}

struct RgsIter {
    next: Option<Vec<u8>>,
}

impl Iterator for RgsIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let p = succ.len();
        let mut advanced = false;
        for i in (1..p).rev() {
            let prefix_max = *succ[..i].iter().max().unwrap();
            if succ[i] <= prefix_max {
                succ[i] += 1;
                for l in succ[i + 1..].iter_mut() {
                    *l = 1;
                }
                advanced = true;
                break;
            }
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(Partition::from_canonical(current))
    }
}

/// The Bell numbers B_0..=B_n via the Bell triangle.
pub fn bell_numbers(n: usize) -> Vec<u64> {
    let mut bell = vec![1u64];
    let mut row = vec![1u64];
    for _ in 1..=n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &x in &row {
            next.push(next.last().unwrap() + x);
        }
        bell.push(next[0]);
        row = next;
    }
    bell
}

/// Stirling numbers of the second kind S(n, k) for 0 <= k <= n.
pub fn stirling2(n: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; n + 1]; n + 1];
    s[0][0] = 1.0;
    for i in 1..=n {
        for k in 1..=i {
            s[i][k] = k as f64 * s[i - 1][k] + s[i - 1][k - 1];
        }
    }
    s
}

/// Strategy for building a maximal refinement chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainStrategy {
    /// Split the largest cluster into two near-equal halves each step.
    BalancedSplit,
    /// Peel a single element off the large cluster each step.
    SingletonPeel,
    /// Split a random cluster at a random bipartition each step.
    Random { seed: u64 },
}

/// A maximal chain from the one-block partition to singletons, where each
/// consecutive pair is a covering pair.
pub fn refinement_chain(p: usize, strategy: ChainStrategy) -> Vec<Partition> {
    assert!(p >= 2, "refinement chains need p >= 2");
    let mut chain = vec![Partition::one_block(p)];
    let mut rng = match strategy {
        ChainStrategy::Random { seed } => Some(crate::rng::rng_from_seed(seed)),
        _ => None,
    };
    while chain.last().unwrap().n_clusters() < p {
        let cur = chain.last().unwrap().clone();
        let next = match strategy {
            ChainStrategy::BalancedSplit => split_balanced(&cur),
            ChainStrategy::SingletonPeel => peel_singleton(&cur),
            ChainStrategy::Random { .. } => split_random(&cur, rng.as_mut().unwrap()),
        };
        chain.push(next);
    }
    chain
}

fn split_balanced(z: &Partition) -> Partition {
    let clusters = z.clusters();
    // Largest cluster, ties broken by smallest leading member.
    let target = clusters
        .iter()
        .max_by_key(|m| (m.len(), std::cmp::Reverse(m[0])))
        .unwrap();
    let half = target.len() - target.len() / 2;
    z.split_off(&target[half..])
}

fn peel_singleton(z: &Partition) -> Partition {
    let clusters = z.clusters();
    let target = clusters
        .iter()
        .max_by_key(|m| (m.len(), std::cmp::Reverse(m[0])))
        .unwrap();
    z.split_off(&target[target.len() - 1..])
}

fn split_random(z: &Partition, rng: &mut Rng64) -> Partition {
    use rand::Rng;
    let clusters = z.clusters();
    let splittable: Vec<&Vec<usize>> = clusters.iter().filter(|m| m.len() >= 2).collect();
    let target = splittable[rng.gen_range(0..splittable.len())];
    let n = target.len();
    let pick: u64 = rng.gen_range(1..(1u64 << (n - 1)));
    let moved: Vec<usize> = target
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(idx, _)| pick >> (idx - 1) & 1 == 1)
        .map(|(_, &i)| i)
        .collect();
    z.split_off(&moved)
}
