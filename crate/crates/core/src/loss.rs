//! Loss functions between models: zero-one, generalized Hamming, generalized
//! Binder, variation of information, its Jensen lower bound, and explicit
//! loss matrices.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GammaVector, Model, Partition, SpaceKind};

/// Validate a GH/GB weight: the open interval (0, 2).
fn check_weight(a: f64) -> Result<()> {
    if a > 0.0 && a < 2.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("weight must lie in (0, 2), got {a}")))
    }
}

/// Tagged choice of loss function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossSpec {
    /// 1(M ≠ M̂).
    ZeroOne,
    /// Per-variable loss charging `a` per false positive and `2-a` per
    /// false negative.
    Gh { a: f64 },
    /// Per-pair loss charging `a` per wrongly split pair and `2-a` per
    /// wrongly merged pair.
    Gb { a: f64 },
    /// Variation of information between partitions, in bits.
    Vi,
    /// The Jensen lower bound of the VI risk; not a pointwise loss, only
    /// meaningful at the risk level.
    ViLb,
    /// Explicit loss matrix over an enumerated model list.
    Matrix(LossMatrix),
}

impl LossSpec {
    pub fn gh(a: f64) -> Result<Self> {
        check_weight(a)?;
        Ok(LossSpec::Gh { a })
    }

    pub fn gb(a: f64) -> Result<Self> {
        check_weight(a)?;
        Ok(LossSpec::Gb { a })
    }

    /// The space this loss applies to, when it is space-specific.
    pub fn space(&self) -> Option<SpaceKind> {
        match self {
            LossSpec::Gh { .. } => Some(SpaceKind::Hypercube),
            LossSpec::Gb { .. } | LossSpec::Vi | LossSpec::ViLb => Some(SpaceKind::Partitions),
            LossSpec::ZeroOne | LossSpec::Matrix(_) => None,
        }
    }

    /// Short name used in report tables, e.g. `GB(1.1)` or `VI-LB`.
    pub fn name(&self) -> String {
        match self {
            LossSpec::ZeroOne => "01".into(),
            LossSpec::Gh { a } => format!("GH({a})"),
            LossSpec::Gb { a } => format!("GB({a})"),
            LossSpec::Vi => "VI".into(),
            LossSpec::ViLb => "VI-LB".into(),
            LossSpec::Matrix(_) => "matrix".into(),
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// The check function ρ_τ(x) = 2x(τ − 1(x<0)), piecewise linear with slopes
/// 2τ for x > 0 and 2(τ−1) for x < 0.
pub fn check(tau: f64, x: f64) -> f64 {
    debug_assert!(tau > 0.0 && tau < 1.0);
    2.0 * x * (tau - if x < 0.0 { 1.0 } else { 0.0 })
}

/// Generalized Hamming loss with weight `a`: false positives cost `a`,
/// false negatives cost `2-a`. Symmetric Hamming at `a = 1`.
pub fn gh_loss(g1: &GammaVector, g2: &GammaVector, a: f64) -> Result<f64> {
    check_weight(a)?;
    if g1.p() != g2.p() {
        return Err(Error::Argument(format!(
            "mismatched p: {} vs {}",
            g1.p(),
            g2.p()
        )));
    }
    let mut total = 0.0;
    for i in 0..g1.p() {
        match (g1.bit(i), g2.bit(i)) {
            (false, true) => total += a,
            (true, false) => total += 2.0 - a,
            _ => {}
        }
    }
    Ok(total)
}

/// Generalized Binder loss with weight `a`: wrongly split pairs cost `a`,
/// wrongly merged pairs cost `2-a`.
pub fn gb_loss(z1: &Partition, z2: &Partition, a: f64) -> Result<f64> {
    check_weight(a)?;
    let p = z1.n_items();
    if p != z2.n_items() {
        return Err(Error::Argument(format!(
            "mismatched p: {p} vs {}",
            z2.n_items()
        )));
    }
    let mut total = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            match (z1.co_clustered(i, j), z2.co_clustered(i, j)) {
                (true, false) => total += a,
                (false, true) => total += 2.0 - a,
                _ => {}
            }
        }
    }
    Ok(total)
}

/// Variation of information between two partitions, in bits.
///
/// Evaluated from per-item cluster sizes and intersection sizes; every
/// intersection count is at least 1 because item `i` itself is counted, so
/// no `0·log 0` term can arise.
pub fn vi_loss(z1: &Partition, z2: &Partition) -> Result<f64> {
    let p = z1.n_items();
    if p != z2.n_items() {
        return Err(Error::Argument(format!(
            "mismatched p: {p} vs {}",
            z2.n_items()
        )));
    }
    let s1 = z1.cluster_sizes();
    let s2 = z2.cluster_sizes();
    // Intersection counts per (cluster of z1, cluster of z2).
    let mut inter = vec![0usize; z1.n_clusters() * z2.n_clusters()];
    for i in 0..p {
        inter[z1.cluster_of(i) * z2.n_clusters() + z2.cluster_of(i)] += 1;
    }
    let mut total = 0.0;
    for i in 0..p {
        let ni = s1[z1.cluster_of(i)] as f64;
        let mi = s2[z2.cluster_of(i)] as f64;
        let ci = inter[z1.cluster_of(i) * z2.n_clusters() + z2.cluster_of(i)] as f64;
        debug_assert!(ci >= 1.0);
        total += ni.log2() + mi.log2() - 2.0 * ci.log2();
    }
    Ok(total / p as f64)
}

/// Explicit loss matrix over an enumerated model list.
///
/// Validated at construction: square, zero diagonal, strictly positive
/// off-diagonal entries (identity of indiscernibles holds by invariant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    index: Vec<String>,
    /// Row-major entries; `values[i * m + j] = L(index[i], index[j])`.
    values: Vec<f64>,
}

impl LossMatrix {
    pub fn new(index: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let m = index.len();
        if m == 0 {
            return Err(Error::Argument("empty loss matrix".into()));
        }
        if m > 1 << 12 {
            return Err(Error::Capacity(format!(
                "loss matrix limited to 4096 models, got {m}"
            )));
        }
        if values.len() != m * m {
            return Err(Error::Argument(format!(
                "expected {m}x{m} entries, got {}",
                values.len()
            )));
        }
        {
            let mut sorted = index.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != m {
                return Err(Error::Argument("duplicate model identifiers".into()));
            }
        }
        for i in 0..m {
            for j in 0..m {
                let v = values[i * m + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Argument(format!(
                        "loss entries must be finite and nonnegative, got {v} at ({i},{j})"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::Argument(format!(
                        "diagonal must be zero, got {v} at ({i},{i})"
                    )));
                }
                if i != j && v <= 0.0 {
                    return Err(Error::Argument(format!(
                        "off-diagonal must be strictly positive, got {v} at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { index, values })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Model identifiers, in matrix order.
    pub fn index(&self) -> &[String] {
        &self.index
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.iter().position(|x| x == id)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn get(&self, truth: &str, action: &str) -> Result<f64> {
        let i = self
            .position(truth)
            .ok_or_else(|| Error::Argument(format!("model {truth:?} not in matrix index")))?;
        let j = self
            .position(action)
            .ok_or_else(|| Error::Argument(format!("model {action:?} not in matrix index")))?;
        Ok(self.entry(i, j))
    }

    /// Load from CSV: header row of model identifiers, square body of reals.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let index: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut values = Vec::with_capacity(index.len() * index.len());
        for record in rdr.records() {
            let record = record?;
            if record.len() != index.len() {
                return Err(Error::Parse(format!(
                    "row width {} does not match header width {}",
                    record.len(),
                    index.len()
                )));
            }
            for field in record.iter() {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad loss entry {field:?}: {e}")))?,
                );
            }
        }
        Self::new(index, values)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(&self.index)?;
        let m = self.len();
        for i in 0..m {
            let row: Vec<String> = (0..m).map(|j| format!("{}", self.entry(i, j))).collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Evaluate a loss between a true model and an action.
///
/// `ViLb` is rejected here: the lower bound is defined at the risk level,
/// not between model pairs.
pub fn loss(spec: &LossSpec, truth: &Model, action: &Model) -> Result<f64> {
    match spec {
        LossSpec::ZeroOne => Ok(if truth == action { 0.0 } else { 1.0 }),
        LossSpec::Gh { a } => gh_loss(truth.as_gamma()?, action.as_gamma()?, *a),
        LossSpec::Gb { a } => gb_loss(truth.as_partition()?, action.as_partition()?, *a),
        LossSpec::Vi => vi_loss(truth.as_partition()?, action.as_partition()?),
        LossSpec::ViLb => Err(Error::UnsupportedMethod(
            "VI-LB is a risk-level bound, not a pointwise loss".into(),
        )),
        LossSpec::Matrix(m) => m.get(&truth.to_string(), &action.to_string()),
    }
}
